//! Recording exchanges from one backend and answering the same requests
//! later from the transcript alone.

use quest_core::gateway::{ChatBackend, ChatRequest, FnBackend, RecordBackend, ReplayBackend};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("session.jsonl");

    // Stands in for a live endpoint.
    let model = FnBackend(|r: &ChatRequest| Ok(format!("{} characters, attempt {}", r.user.len(), r.attempt_nonce)));
    let requests: Vec<ChatRequest> = ["first question", "second question"]
        .iter()
        .enumerate()
        .map(|(i, q)| {
            ChatRequest::new("be brief", *q, "demo-model")
                .with_seed(Some(7))
                .with_nonce(i as u64)
        })
        .collect();

    let recorder = RecordBackend::create(model, &path)?;
    for r in &requests {
        println!("live:   {}", recorder.complete(r)?);
    }

    let replay = ReplayBackend::load(&path)?;
    for r in &requests {
        println!("replay: {}  [{}]", replay.complete(r)?, &r.digest()[..12]);
    }
    let unseen = ChatRequest::new("be brief", "third question", "demo-model");
    println!("unseen: {}", replay.complete(&unseen).unwrap_err());
    Ok(())
}
