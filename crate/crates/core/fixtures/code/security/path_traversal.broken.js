const fs = require('fs');

function handler(req, res {
  res.end('ok');
}
