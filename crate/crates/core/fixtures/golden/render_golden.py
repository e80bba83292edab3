"""Renders the golden prompt files with Python's str.format.

This is a separate implementation from the crate's template renderer; the
Rust tests compare their output with the files written here.
Run from the crate directory: python3 fixtures/golden/render_golden.py
"""
import json
import re
from fractions import Fraction

HERE = "fixtures/golden/"


def read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def catalog():
    dims, current = {}, None
    for line in read("catalog/default.toml").splitlines():
        m = re.match(r"^(\w+) = \[$", line)
        if m:
            current = dims.setdefault(m.group(1), [])
        elif line.strip().startswith('"'):
            current.append(json.loads(line.strip().rstrip(",")))
    return dims


def score_text(score):
    if score.denominator == 1:
        return str(score.numerator)
    return ("%.2f" % float(score)).rstrip("0")


def quality_insight(dimensions):
    return "\n\n".join(
        "%s\n* Score: %s\n* Insights: %s" % (d["dimension"], score_text(d["score"]), d["insight"].strip())
        for d in dimensions
    )


def write(name, text):
    with open(HERE + name, "w", encoding="utf-8") as f:
        f.write(text)


def main():
    scenario = json.loads(read("fixtures/scenarios/mbpp_601.json"))
    code = read("fixtures/" + scenario["code"])
    statements = catalog()

    template = read("prompts/evaluator.txt")
    for dim in ("Security", "Documentation"):
        listing = "\n".join("%d. %s" % (i + 1, s) for i, s in enumerate(statements[dim]))
        write(
            "evaluator_601_%s.txt" % dim.lower(),
            template.format(code=code, dimension_statements=listing, quality_dimension=dim),
        )

    dims = [
        {"dimension": d["dimension"], "score": Fraction(sum(d["verdicts"])), "insight": d["insight"]}
        for d in scenario["dimensions"]
    ]
    template = read("prompts/improvement.txt")
    write("improvement_601.txt", template.format(code=code, quality_insight=quality_insight(dims)))

    # Self-consistency means: Efficiency over sums (-2, -2, -1), Scalability over (-3, -2).
    dims[3]["score"] = Fraction(-5, 3)
    dims[8]["score"] = Fraction(-5, 2)
    write("improvement_601_means.txt", template.format(code=code, quality_insight=quality_insight(dims)))

    write("baseline_601.txt", read("prompts/baseline.txt").format(code=code))


if __name__ == "__main__":
    main()
