//! Inputs shared by the benchmarks.

/// Snippets cycled through to build synthetic modules, each one a
/// function body with a few rewritable sites and some plain code.
const SNIPPETS: &[&str] = &[
    "def f{n}(rows, postfix):\n    out = []\n    for r in rows:\n        if r is None:\n            continue\n        out.append(r + postfix)\n    return out\n",
    "def g{n}(a, b, x):\n    if a > b and a < 1:\n        x += 1\n    if x % 2 == 0:\n        return x\n    return -x\n",
    "def h{n}(text, table):\n    res = {}\n    for i in range(len(text)):\n        w = text[i]\n        if w in table:\n            res[i] = table[w]\n    return res\n",
    "def k{n}(self, device, log):\n    self._ad = device\n    self._client = None\n    log.info('device is %s' % repr(device))\n",
    "def m{n}(path, values):\n    lines = [l.strip() for l in open(path)]\n    total = 0\n    for v in values:\n        total += v * 2\n    return lines, total\n",
];

/// A module of roughly `lines` lines.
pub fn synthetic_module(lines: usize) -> String {
    let mut out = String::new();
    let mut n = 0;
    while out.lines().count() < lines {
        out.push_str(&SNIPPETS[n % SNIPPETS.len()].replace("{n}", &n.to_string()));
        out.push('\n');
        n += 1;
    }
    out
}
