const fs = require('fs');
const path = require('path');
const http = require('http');

const ROOT = '/srv/static';

function handler(req, res) {
  const url = new URL(req.url, 'http://localhost');
  const file = url.searchParams.get('file');
  fs.readFile(path.join(ROOT, file), function (err, data) {
    if (err) {
      res.statusCode = 500;
      res.end(err.message);
      return;
    }
    res.end(data);
  });
}

if (require.main === module) {
  http.createServer(handler).listen(8080);
}

module.exports = { handler };
