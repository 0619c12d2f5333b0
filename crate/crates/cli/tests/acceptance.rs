//! Release gate: one PASS/FAIL line per acceptance criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use idiomizer_core::eval::{compute_metrics, to_f64, ConfusionCounts};
use idiomizer_core::idiomatize::chain_two_compares;
use idiomizer_core::syntax::parse_source;
use idiomizer_core::syntax::tokens::normalize;
use idiomizer_core::{
    find_sites, refactor_source, DeterministicEngine, IdiomKind, IdiomatizationOutcome, Options, ParsedFile,
    SourceFile,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_idiomizer")
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// ---------------------------------------------------------------- golden

struct Golden {
    name: &'static str,
    idiom: IdiomKind,
    before: &'static str,
    after: &'static str,
    /// Runnable stand-in for `before` when it elides code with `...`.
    exec_before: Option<&'static str>,
    /// Each setup runs the fragment once.
    setups: &'static [&'static str],
    observe: &'static str,
}

fn golden() -> Vec<Golden> {
    use IdiomKind::*;
    vec![
        Golden {
            name: "list-comprehension",
            idiom: ListComprehension,
            before: "new_cols = []\nfor col in old_cols:\n    new_cols.append(col + postfix)\n",
            after: "new_cols = [col + postfix for col in old_cols]\n",
            exec_before: None,
            setups: &["old_cols = ['a', 'b']\npostfix = '_x'", "old_cols = []\npostfix = ''"],
            observe: "print(new_cols)",
        },
        Golden {
            name: "set-comprehension",
            idiom: SetComprehension,
            before: "new_cols = set()\nfor col in old_cols:\n    new_cols.add(col + postfix)\n",
            after: "new_cols = {col + postfix for col in old_cols}\n",
            exec_before: None,
            setups: &["old_cols = ['a', 'b', 'a']\npostfix = '_x'"],
            observe: "print(sorted(new_cols))",
        },
        Golden {
            name: "dict-comprehension",
            idiom: DictComprehension,
            before: "new_cols = {}\nfor col in old_cols:\n    new_cols[col] = col + postfix\n",
            after: "new_cols = {col: col + postfix for col in old_cols}\n",
            exec_before: None,
            setups: &["old_cols = ['a', 'b', 'a']\npostfix = '_x'"],
            observe: "print(new_cols)",
        },
        Golden {
            name: "chain-comparison",
            idiom: ChainComparison,
            before: "r = a > b and a < 1\n",
            after: "r = b < a < 1\n",
            exec_before: None,
            setups: &["a, b = 0.5, 0", "a, b = 2, 0", "a, b = -1, 0", "a, b = 0, 0"],
            observe: "print(r)",
        },
        Golden {
            name: "truth-test",
            idiom: TruthTest,
            before: "if embedding_dim % 2 == 0:\n    print('even')\n",
            after: "if not embedding_dim % 2:\n    print('even')\n",
            exec_before: None,
            setups: &["embedding_dim = 4", "embedding_dim = 3"],
            observe: "",
        },
        Golden {
            name: "loop-else",
            idiom: LoopElse,
            before: "while attempt < 3:\n    ...\n    if body is not None:\n        break\nif body is None:\n    ...\n",
            after: "while attempt < 3:\n    ...\n    if body is not None:\n        break\nelse:\n    ...\n",
            exec_before: Some(
                "while attempt < 3:\n    attempt += 1\n    body = get(attempt)\n    if body is not None:\n        break\nif body is None:\n    body = 'failed'\n",
            ),
            setups: &[
                "attempt = 0\nbody = None\ndef get(k):\n    return None",
                "attempt = 0\nbody = None\ndef get(k):\n    return 'ok' if k == 2 else None",
            ],
            observe: "print(body, attempt)",
        },
        Golden {
            name: "assign-multi-targets",
            idiom: AssignMultiTargets,
            before: "self._ad = device\nself._sl4a_client = None\n",
            after: "self._ad, self._sl4a_client = device, None\n",
            exec_before: None,
            setups: &["class Obj:\n    pass\nself = Obj()\ndevice = 'dev'"],
            observe: "print(self._ad, self._sl4a_client)",
        },
        Golden {
            name: "for-multi-targets",
            idiom: ForMultiTargets,
            before: "for sample in family.samples:\n    if sample[0] > 2:\n        ...\n",
            after: "for e0, *e in family.samples:\n    if e0 > 2:\n        ...\n",
            exec_before: Some("for sample in family.samples:\n    if sample[0] > 2:\n        print(sample[0])\n"),
            setups: &["class Obj:\n    pass\nfamily = Obj()\nfamily.samples = [(1, 'a'), (3, 'b', 'c'), [5]]"],
            observe: "",
        },
        Golden {
            name: "star-in-func-call",
            idiom: StarInFuncCall,
            before: "nn.Linear(gate_channels[i], gate_channels[i+1])\n",
            after: "nn.Linear(*gate_channels[i:i + 2])\n",
            exec_before: None,
            setups: &[
                "class Obj:\n    pass\nnn = Obj()\nnn.Linear = lambda *a: print(a)\ngate_channels = [3, 4, 5]\ni = 0",
                "class Obj:\n    pass\nnn = Obj()\nnn.Linear = lambda *a: print(a)\ngate_channels = [3, 4, 5]\ni = 1",
            ],
            observe: "",
        },
        Golden {
            name: "with",
            idiom: With,
            before: "bamfiles = [x.strip() for x in open(bamfile)]\n",
            after: "with open(bamfile) as f:\n    bamfiles = [x.strip() for x in f]\n",
            exec_before: None,
            setups: &["import os, tempfile\nbamfile = os.path.join(tempfile.mkdtemp(), 'b.txt')\nwith open(bamfile, 'w') as out:\n    out.write(' a \\n b\\n')"],
            observe: "print(bamfiles)",
        },
        Golden {
            name: "enumerate",
            idiom: Enumerate,
            before: "for i in range(len(text)):\n    w = text[i]\n    if w in token2id:\n        R[i] = token2id[w]\n",
            after: "for (i, w) in enumerate(text):\n    if w in token2id:\n        R[i] = token2id[w]\n",
            exec_before: None,
            setups: &["text = 'abca'\ntoken2id = {'a': 1, 'c': 3}\nR = {}"],
            observe: "print(R)",
        },
        Golden {
            name: "chain-assign-same-value",
            idiom: ChainAssignSameValue,
            before: "global_draw_name = None\n_test_name = None\n",
            after: "global_draw_name = _test_name = None\n",
            exec_before: None,
            setups: &[""],
            observe: "print(global_draw_name, _test_name)",
        },
        Golden {
            name: "fstring",
            idiom: Fstring,
            before: "log.info('sample_num_list is %s' % repr(self.sample_num_list))\n",
            after: "log.info(f'sample_num_list is {repr(self.sample_num_list)}')\n",
            exec_before: None,
            setups: &["class Obj:\n    pass\nself = Obj()\nself.sample_num_list = [1, 2]\nlog = Obj()\nlog.info = print"],
            observe: "",
        },
        Golden {
            name: "set-comprehension with guards",
            idiom: SetComprehension,
            before: "z2 = set()\nfor z in y:\n    if z is x:\n        continue\n    if z not in df:\n        continue\n    z2.add(z)\n",
            after: "z2 = {z for z in y if z is not x and z in df}\n",
            exec_before: None,
            setups: &["x = None\ny = [1, None, 2, 3, 3]\ndf = [1, 3, None]"],
            observe: "print(sorted(z2))",
        },
        Golden {
            name: "chain with a chained operand",
            idiom: ChainComparison,
            before: "r = 0 < y_int < h_i and w_i < 0\n",
            after: "r = w_i < 0 < y_int < h_i\n",
            exec_before: None,
            setups: &[
                "y_int, h_i, w_i = 1, 5, -1",
                "y_int, h_i, w_i = 1, 5, 1",
                "y_int, h_i, w_i = 6, 5, -1",
                "y_int, h_i, w_i = -1, 5, -1",
            ],
            observe: "print(r)",
        },
        Golden {
            name: "chain needing a reversal",
            idiom: ChainComparison,
            before: "r = a != c and d < c\n",
            after: "r = a != c > d\n",
            exec_before: None,
            setups: &["a, c, d = 1, 2, 0", "a, c, d = 2, 2, 0", "a, c, d = 1, 2, 3"],
            observe: "print(r)",
        },
        Golden {
            name: "chain inside a longer condition",
            idiom: ChainComparison,
            before: "if args and args.save_steps > 0 and global_step % args.save_steps == 0:\n    print('save')\n",
            after: "if args and args.save_steps > 0 == global_step % args.save_steps:\n    print('save')\n",
            exec_before: None,
            setups: &[
                "class Obj:\n    pass\nargs = Obj()\nargs.save_steps = 5\nglobal_step = 10",
                "class Obj:\n    pass\nargs = Obj()\nargs.save_steps = 5\nglobal_step = 11",
                "args = None\nglobal_step = 3",
            ],
            observe: "",
        },
        Golden {
            name: "star over negative indices",
            idiom: StarInFuncCall,
            before: "view(feat.shape[-2], feat.shape[-1])\n",
            after: "view(*feat.shape[-2:])\n",
            exec_before: None,
            setups: &["class Obj:\n    pass\nfeat = Obj()\nfeat.shape = (2, 3, 4)\nview = lambda *a: print(a)"],
            observe: "",
        },
    ]
}

fn rewrite_with(idiom: IdiomKind, text: &str) -> Result<String, String> {
    let options = Options {
        idioms: vec![idiom],
        max_passes: 1,
    };
    refactor_source(SourceFile::new("golden.py", text), &DeterministicEngine, &options)
        .map(|r| r.final_source)
        .map_err(|e| e.to_string())
}

fn golden_corpus() -> Outcome {
    let start = Instant::now();
    let cases = golden();
    let mut failures = Vec::new();
    for g in &cases {
        let got = rewrite_with(g.idiom, g.before)?;
        if normalize(&got) != normalize(g.after) {
            failures.push(format!("{}: got {got:?}", g.name));
        }
    }
    let elapsed = start.elapsed();
    if cases.len() < 16 {
        return Err(format!("only {} pairs", cases.len()));
    }
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    if elapsed.as_secs_f64() >= 10.0 {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} pairs token-exact in {:.2}s", cases.len(), elapsed.as_secs_f64()))
}

// -------------------------------------------------------------- negative

fn negative_suite() -> Outcome {
    use IdiomKind::*;
    let cases: [(&str, IdiomKind, &str); 6] = [
        ("wrap-around star indices", StarInFuncCall, "f(a[-1], a[0])\n"),
        ("set loop without add", SetComprehension, "s = set()\nfor u in users:\n    s.update(u.tags)\n"),
        ("single comparison", ChainComparison, "if start is not None:\n    pass\n"),
        ("membership pair", ChainComparison, "r = v1 in v2 and v3 in v2\n"),
        ("non-arithmetic indices", StarInFuncCall, "d(n_points[idx1], n_points[idx2])\n"),
        ("non-arithmetic indices in call", StarInFuncCall, "dist = np.linalg.norm(n_points[idx1] - n_points[idx2])\n"),
    ];
    let mut failures = Vec::new();
    for (name, idiom, src) in cases {
        let r = refactor_source(
            SourceFile::new("neg.py", src),
            &DeterministicEngine,
            &Options {
                idioms: vec![idiom],
                max_passes: 5,
            },
        )
        .map_err(|e| e.to_string())?;
        if !r.candidates.is_empty() || r.changed() {
            failures.push(format!("{name}: {} candidates", r.candidates.len()));
        }
    }
    // The membership pair is found but must be declined, with the reason.
    match chain_two_compares("v1 in v2", "v3 in v2") {
        IdiomatizationOutcome::Declined { reason } if reason.contains("membership") => {}
        other => failures.push(format!("membership pair: {other:?}")),
    }
    if failures.is_empty() {
        Ok(format!("{} inputs, zero candidates", cases.len()))
    } else {
        Err(failures.join("; "))
    }
}

// ---------------------------------------------------------- chain oracle

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Op {
    Lt,
    LtE,
    Gt,
    GtE,
    Eq,
    NotEq,
    Is,
    IsNot,
    In,
    NotIn,
}

const OPS: [(Op, &str); 10] = [
    (Op::Lt, "<"),
    (Op::LtE, "<="),
    (Op::Gt, ">"),
    (Op::GtE, ">="),
    (Op::Eq, "=="),
    (Op::NotEq, "!="),
    (Op::Is, "is"),
    (Op::IsNot, "is not"),
    (Op::In, "in"),
    (Op::NotIn, "not in"),
];

fn op_text(op: Op) -> &'static str {
    OPS.iter().find(|(o, _)| *o == op).unwrap().1
}

/// Mirror for reading right to left; membership has none.
fn flip(op: Op) -> Option<Op> {
    Some(match op {
        Op::Lt => Op::Gt,
        Op::LtE => Op::GtE,
        Op::Gt => Op::Lt,
        Op::GtE => Op::LtE,
        Op::In | Op::NotIn => return None,
        same => same,
    })
}

/// Small integers; `in` is an arbitrary asymmetric relation so that a
/// wrongly reversed membership test shows up in the truth table.
fn holds(op: Op, a: i64, b: i64) -> bool {
    let member = (a + 1).rem_euclid(3) == b.rem_euclid(3);
    match op {
        Op::Lt => a < b,
        Op::LtE => a <= b,
        Op::Gt => a > b,
        Op::GtE => a >= b,
        Op::Eq | Op::Is => a == b,
        Op::NotEq | Op::IsNot => a != b,
        Op::In => member,
        Op::NotIn => !member,
    }
}

#[derive(Clone, Debug)]
struct Cmp {
    operands: Vec<String>,
    ops: Vec<Op>,
}

impl Cmp {
    fn text(&self) -> String {
        let mut s = self.operands[0].clone();
        for (op, o) in self.ops.iter().zip(&self.operands[1..]) {
            s.push_str(&format!(" {} {o}", op_text(*op)));
        }
        s
    }

    fn parse(text: &str) -> Option<Cmp> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let mut operands = vec![words.first()?.to_string()];
        let mut ops = Vec::new();
        let mut i = 1;
        while i < words.len() {
            let (op, used) = match (words[i], words.get(i + 1)) {
                ("is", Some(&"not")) => (Op::IsNot, 2),
                ("not", Some(&"in")) => (Op::NotIn, 2),
                (w, _) => (OPS.iter().find(|(_, t)| *t == w)?.0, 1),
            };
            i += used;
            ops.push(op);
            operands.push(words.get(i)?.to_string());
            i += 1;
        }
        Some(Cmp { operands, ops })
    }

    fn reversed(&self) -> Option<Cmp> {
        Some(Cmp {
            operands: self.operands.iter().rev().cloned().collect(),
            ops: self.ops.iter().rev().map(|o| flip(*o)).collect::<Option<_>>()?,
        })
    }

    fn eval(&self, env: &BTreeMap<String, i64>) -> bool {
        let value = |o: &String| env.get(o).copied().unwrap_or_else(|| o.parse().unwrap());
        self.ops
            .iter()
            .enumerate()
            .all(|(i, op)| holds(*op, value(&self.operands[i]), value(&self.operands[i + 1])))
    }
}

fn random_cmp(rng: &mut ChaCha8Rng) -> Cmp {
    const ATOMS: [&str; 5] = ["x", "y", "z", "0", "1"];
    let n = if rng.gen_bool(0.75) { 1 } else { 2 };
    let operands = (0..=n).map(|_| ATOMS.choose(rng).unwrap().to_string()).collect();
    let ops = (0..n)
        .map(|_| if rng.gen_bool(0.15) { OPS[8 + rng.gen_range(0..2)].0 } else { OPS[rng.gen_range(0..8)].0 })
        .collect();
    Cmp { operands, ops }
}

/// Is there any orientation, under the same reversal rules, where the two
/// comparisons meet at a shared operand?
fn brute_force_mergeable(a: &Cmp, b: &Cmp) -> bool {
    for swap in [false, true] {
        for ra in [false, true] {
            for rb in [false, true] {
                let x = if ra { a.reversed() } else { Some(a.clone()) };
                let y = if rb { b.reversed() } else { Some(b.clone()) };
                let (Some(x), Some(y)) = (x, y) else { continue };
                let (l, r) = if swap { (y, x) } else { (x, y) };
                if l.operands.last() == r.operands.first() {
                    return true;
                }
            }
        }
    }
    false
}

fn chain_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c4a1);
    let (mut accepted, mut declined, mut violations) = (0, 0, Vec::new());
    for _ in 0..1000 {
        let (a, b) = (random_cmp(&mut rng), random_cmp(&mut rng));
        let mergeable = brute_force_mergeable(&a, &b);
        match chain_two_compares(&a.text(), &b.text()) {
            IdiomatizationOutcome::Accepted { code } => {
                accepted += 1;
                let Some(merged) = Cmp::parse(&code) else {
                    violations.push(format!("unparseable {code:?}"));
                    continue;
                };
                let vars: BTreeSet<String> = a
                    .operands
                    .iter()
                    .chain(&b.operands)
                    .filter(|o| o.parse::<i64>().is_err())
                    .cloned()
                    .collect();
                let vars: Vec<String> = vars.into_iter().collect();
                for k in 0..3usize.pow(vars.len() as u32) {
                    let env: BTreeMap<String, i64> =
                        vars.iter().enumerate().map(|(i, v)| (v.clone(), ((k / 3usize.pow(i as u32)) % 3) as i64)).collect();
                    if merged.eval(&env) != (a.eval(&env) && b.eval(&env)) {
                        violations.push(format!("{} and {} -> {code} differs at {env:?}", a.text(), b.text()));
                        break;
                    }
                }
                if !mergeable {
                    violations.push(format!("{} and {} accepted without a valid orientation", a.text(), b.text()));
                }
            }
            IdiomatizationOutcome::Declined { .. } => {
                declined += 1;
                if mergeable {
                    violations.push(format!("{} and {} declined but mergeable", a.text(), b.text()));
                }
            }
        }
    }
    if violations.is_empty() && accepted > 0 && declined > 0 {
        Ok(format!("1000 pairs, {accepted} accepted, {declined} declined, 0 violations"))
    } else {
        Err(format!("{} violations: {:?}", violations.len(), violations.iter().take(3).collect::<Vec<_>>()))
    }
}

// ------------------------------------------------- extraction completeness

fn plant_template(idiom: IdiomKind) -> &'static str {
    use IdiomKind::*;
    match idiom {
        ListComprehension => "new_cols{k} = []\nfor col{k} in old_cols{k}:\n    new_cols{k}.append(col{k} + postfix{k})",
        SetComprehension => "new_cols{k} = set()\nfor col{k} in old_cols{k}:\n    new_cols{k}.add(col{k} + postfix{k})",
        DictComprehension => "new_cols{k} = {}\nfor col{k} in old_cols{k}:\n    new_cols{k}[col{k}] = col{k} + postfix{k}",
        ChainComparison => "ok{k} = a{k} > b{k} and a{k} < 1",
        TruthTest => "if embedding_dim{k} % 2 == 0:\n    flag{k}()",
        LoopElse => "while attempt{k} < 3:\n    ...\n    if body{k} is not None:\n        break\nif body{k} is None:\n    ...",
        AssignMultiTargets => "self._ad{k} = device{k}\nself._sl4a_client{k} = None",
        ForMultiTargets => "for sample{k} in family{k}.samples:\n    if sample{k}[0] > 2:\n        ...",
        StarInFuncCall => "nn.Linear(gate_channels{k}[i{k}], gate_channels{k}[i{k}+1])",
        With => "bamfiles{k} = [x.strip() for x in open(bamfile{k})]",
        Enumerate => "for i{k} in range(len(text{k})):\n    w{k} = text{k}[i{k}]\n    if w{k} in token2id:\n        R[i{k}] = token2id[w{k}]",
        ChainAssignSameValue => "global_draw_name{k} = None\n_test_name{k} = None",
        Fstring => "log.info('sample_num_list is %s' % repr(self.sample_num_list{k}))",
    }
}

/// A ~`lines`-line module of inert calls with `plants` copies of the
/// template, some wrapped in functions. Returns the text and each plant's
/// 1-based line range.
fn planted_file(rng: &mut ChaCha8Rng, idiom: IdiomKind, lines: usize, plants: usize) -> (String, Vec<(usize, usize)>) {
    let blocks: Vec<Vec<String>> = (0..plants)
        .map(|k| {
            let body = plant_template(idiom).replace("{k}", &format!("_{k}"));
            if rng.gen_bool(0.5) {
                let mut v = vec![format!("def holder_{k}():")];
                v.extend(body.lines().map(|l| format!("    {l}")));
                v
            } else {
                body.lines().map(str::to_string).collect()
            }
        })
        .collect();
    let planted: usize = blocks.iter().map(Vec::len).sum();
    let filler = lines.saturating_sub(planted).max(plants + 1);
    let mut slots: Vec<usize> = (1..filler).collect();
    slots.shuffle(rng);
    let mut slots: Vec<usize> = slots.into_iter().take(plants).collect();
    slots.sort();
    let mut out = Vec::new();
    let mut ranges = Vec::new();
    let mut next = 0;
    for f in 0..filler {
        if next < slots.len() && slots[next] == f {
            let start = out.len() + 1;
            out.extend(blocks[next].iter().cloned());
            ranges.push((start, out.len()));
            next += 1;
        }
        out.push(format!("step_{f}(arg_{f})"));
    }
    (out.join("\n") + "\n", ranges)
}

fn extraction_completeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for idiom in IdiomKind::ALL {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for n in 0..50 {
            let (text, ranges) = planted_file(&mut rng, idiom, 200, 5);
            let file = ParsedFile::parse(SourceFile::new(format!("plant_{n}.py"), text.clone()))
                .map_err(|e| format!("{idiom}: generated file does not parse: {e}"))?;
            let sites = find_sites(&file, &[idiom]);
            let mut hit = vec![false; ranges.len()];
            for s in &sites {
                let line = file.source.line_col(s.span().start).line;
                match ranges.iter().position(|(a, b)| (*a..=*b).contains(&line)) {
                    Some(i) if !hit[i] => {
                        hit[i] = true;
                        tp += 1;
                    }
                    _ => fp += 1,
                }
            }
            fn_ += hit.iter().filter(|h| !**h).count();
        }
        let m = compute_metrics(ConfusionCounts {
            tp: tp as u64,
            fp: fp as u64,
            fn_: fn_ as u64,
        });
        if to_f64(m.precision) != 1.0 || to_f64(m.recall) != 1.0 {
            failures.push(format!("{idiom}: tp {tp} fp {fp} fn {fn_}"));
        }
        rows.push(tp);
    }
    if failures.is_empty() {
        Ok(format!("13 idioms x 50 files x 5 plants, {} sites, P = R = 1.0", rows.iter().sum::<usize>()))
    } else {
        Err(failures.join("; "))
    }
}

// ------------------------------------------------- behavioral equivalence

fn python() -> Option<&'static str> {
    ["python3", "python"].into_iter().find(|p| {
        Command::new(p)
            .arg("--version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .is_ok_and(|s| s.success())
    })
}

/// stdout plus the exception line, if any.
fn run_python(py: &str, script: &str) -> Result<String, String> {
    let mut child = Command::new(py)
        .arg("-")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    child.stdin.take().unwrap().write_all(script.as_bytes()).map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    let err = String::from_utf8_lossy(&out.stderr);
    let last = err.lines().last().unwrap_or("");
    Ok(format!("{}|{}|{last}", String::from_utf8_lossy(&out.stdout), out.status.success()))
}

fn behavioral_equivalence() -> Outcome {
    let Some(py) = python() else {
        return Err("no python interpreter on PATH".into());
    };
    let mut runs = 0;
    let mut failures = Vec::new();
    for g in golden() {
        let before = g.exec_before.unwrap_or(g.before);
        let after = rewrite_with(g.idiom, before)?;
        if after == before {
            failures.push(format!("{}: not rewritten", g.name));
            continue;
        }
        for setup in g.setups {
            let script = |body: &str| format!("{setup}\n{body}\n{}\n", g.observe);
            let (x, y) = (run_python(py, &script(before))?, run_python(py, &script(&after))?);
            runs += 1;
            if x != y {
                failures.push(format!("{} [{setup:?}]: {x:?} vs {y:?}", g.name));
            } else if !x.contains("|true|") {
                failures.push(format!("{}: fragment failed to run: {x}", g.name));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{runs} runs under {py}, identical output"))
    } else {
        Err(failures.join("; "))
    }
}

// ------------------------------------------------------------ idempotence

const EXTRA_BLOCKS: &[&str] = &[
    "def g{k}(a, b, x):\n    if a > b and a < 1:\n        x += 1\n    if x % 2 == 0:\n        return x\n    return -x",
    "def h{k}(rows):\n    out = []\n    for r in rows:\n        if r % 2 == 0:\n            continue\n        out.append(r * 2)\n    return out",
    "def m{k}(path, values):\n    total = 0\n    for v in values:\n        total += v\n    return total",
    "class C{k}:\n    def __init__(self, a, b):\n        self.a = a\n        self.b = b\n        self.c = None\n        self.d = None",
    "def q{k}(x, lo, hi):\n    return lo <= x and x < hi and hi < 100",
    "def s{k}(items):\n    seen = set()\n    for it in items:\n        if it.name not in seen:\n            seen.add(it.name)\n    return seen",
];

fn synthetic_corpus(dir: &Path, files: usize) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in 0..files {
        let mut blocks = Vec::new();
        for k in 0..rng.gen_range(6..14) {
            let block = if rng.gen_bool(0.6) {
                let idiom = *IdiomKind::ALL.choose(&mut rng).unwrap();
                let body = plant_template(idiom).replace("{k}", &format!("_{k}"));
                let mut v = vec![format!("def fn_{k}(self, log, nn, family, token2id, R):")];
                v.extend(body.lines().map(|l| format!("    {l}")));
                v.join("\n")
            } else {
                EXTRA_BLOCKS.choose(&mut rng).unwrap().replace("{k}", &k.to_string())
            };
            blocks.push(block);
        }
        std::fs::write(dir.join(format!("mod_{n:03}.py")), blocks.join("\n\n") + "\n")?;
    }
    Ok(())
}

fn json_summary(stdout: &[u8]) -> Option<serde_json::Value> {
    let text = String::from_utf8_lossy(stdout);
    let last = text.lines().last()?;
    serde_json::from_str::<serde_json::Value>(last).ok()?.get("summary").cloned()
}

fn idempotence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    synthetic_corpus(dir.path(), 100).map_err(|e| e.to_string())?;

    let mut candidates = 0;
    for entry in std::fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let source = SourceFile::read(&path).map_err(|e| e.to_string())?;
        let r = refactor_source(source, &DeterministicEngine, &Options::default()).map_err(|e| e.to_string())?;
        for c in &r.candidates {
            candidates += 1;
            if let Err(e) = parse_source(&c.new_source) {
                return Err(format!("{}: candidate {} does not parse: {e}", path.display(), c.site.site_id));
            }
        }
    }

    let fix = |dir: &Path| {
        Command::new(bin())
            .args(["refactor", "--fix", "--json"])
            .arg(dir)
            .output()
            .map_err(|e| e.to_string())
    };
    let first = fix(dir.path())?;
    let applied = json_summary(&first.stdout).and_then(|s| s["candidates"].as_u64()).ok_or("no summary from first run")?;
    let second = fix(dir.path())?;
    let again = json_summary(&second.stdout).and_then(|s| s["candidates"].as_u64()).ok_or("no summary from second run")?;
    let check = Command::new(bin()).arg("--check").arg(dir.path()).stderr(Stdio::null()).status().map_err(|e| e.to_string())?;
    for entry in std::fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        parse_source(&text).map_err(|e| format!("{} after --fix: {e}", path.display()))?;
    }
    if candidates == 0 || applied == 0 {
        return Err("corpus produced no candidates".into());
    }
    if again != 0 || check.code() != Some(0) {
        return Err(format!("second --fix emitted {again} candidates, --check exit {:?}", check.code()));
    }
    Ok(format!(
        "100 files, {candidates} candidates parse, {applied} applied by --fix, second pass emits 0"
    ))
}

// ---------------------------------------------------------------- metrics

fn metrics() -> Outcome {
    let m = compute_metrics(ConfusionCounts { tp: 8, fp: 2, fn_: 5 });
    let shown: Vec<String> = [m.precision, m.recall, m.f1, m.accuracy]
        .iter()
        .map(|r| format!("{:.4}", to_f64(*r)))
        .collect();
    if shown != ["0.8000", "0.6154", "0.6957", "0.5333"] {
        return Err(format!("(8,2,5) gave {shown:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let (tp, fp, fn_) = (rng.gen_range(0..60u64), rng.gen_range(0..60u64), rng.gen_range(0..60u64));
        let m = compute_metrics(ConfusionCounts { tp, fp, fn_ });
        let frac = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        // F1 in closed form, 2TP / (2TP + FP + FN).
        let expected = [
            frac(tp, tp + fp + fn_),
            frac(tp, tp + fp),
            frac(tp, tp + fn_),
            frac(2 * tp, 2 * tp + fp + fn_),
        ];
        let got = [m.accuracy, m.precision, m.recall, m.f1].map(to_f64);
        for (g, e) in got.iter().zip(expected) {
            if (g - e).abs() > 1e-9 {
                return Err(format!("({tp},{fp},{fn_}): {got:?} vs {expected:?}"));
            }
        }
    }
    Ok("(8,2,5) exact; 20 random triples within 1e-9".into())
}

// -------------------------------------------------------- replay / network

struct EvalRun<'a> {
    exe: PathBuf,
    data: PathBuf,
    report: &'a Path,
    engine: &'a str,
    envs: &'a [(&'a str, String)],
    netns: bool,
}

impl EvalRun<'_> {
    fn output(&self) -> Result<std::process::Output, String> {
        let mut cmd = if self.netns {
            let mut c = Command::new("unshare");
            c.arg("-rn").arg(&self.exe);
            c
        } else {
            Command::new(&self.exe)
        };
        cmd.arg("eval")
            .arg("--benchmark")
            .arg(self.data.join("benchmark.jsonl"))
            .args(["--engine", self.engine, "--fixtures"])
            .arg(self.data.join("responses.jsonl"))
            .arg("--report")
            .arg(self.report)
            .current_dir(self.report.parent().unwrap())
            .env_remove("IDIOMIZER_LLM_ENDPOINT");
        for (k, v) in self.envs {
            cmd.env(k, v);
        }
        cmd.output().map_err(|e| e.to_string())
    }
}

fn eval_replay(report: &Path, envs: &[(&str, String)], engine: &str) -> Result<std::process::Output, String> {
    EvalRun {
        exe: bin().into(),
        data: workspace().join("fixtures"),
        report,
        engine,
        envs,
        netns: false,
    }
    .output()
}

fn netns_available() -> bool {
    Command::new("unshare")
        .args(["-rn", "true"])
        .stderr(Stdio::null())
        .status()
        .is_ok_and(|s| s.success())
}

fn replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (r1, r2) = (dir.path().join("r1.json"), dir.path().join("r2.json"));
    for r in [&r1, &r2] {
        let out = eval_replay(r, &[], "replay")?;
        if !out.status.success() {
            return Err(format!("eval failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let (a, b) = (std::fs::read(&r1).map_err(|e| e.to_string())?, std::fs::read(&r2).map_err(|e| e.to_string())?);
    if a != b {
        return Err("reports differ between runs".into());
    }

    // Deny-all harness: a canary listener stands in for the endpoint and
    // every proxy; any connection attempt is a failure.
    let canary = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    canary.set_nonblocking(true).map_err(|e| e.to_string())?;
    let url = format!("http://{}", canary.local_addr().unwrap());
    let proxies: Vec<(&str, String)> = ["HTTP_PROXY", "HTTPS_PROXY", "ALL_PROXY", "http_proxy", "https_proxy", "all_proxy"]
        .into_iter()
        .map(|k| (k, url.clone()))
        .collect();
    let mut with_endpoint = proxies.clone();
    with_endpoint.push(("IDIOMIZER_LLM_ENDPOINT", url.clone()));
    let r3 = dir.path().join("r3.json");
    let r4 = dir.path().join("r4.json");
    let replay = eval_replay(&r3, &with_endpoint, "replay")?;
    let llm_unset = eval_replay(&r4, &proxies, "llm")?;
    let touched = canary.accept().is_ok();
    if touched {
        return Err("a network connection reached the canary".into());
    }
    for (name, out, path) in [("replay", &replay, &r3), ("llm without endpoint", &llm_unset, &r4)] {
        if !out.status.success() {
            return Err(format!("{name}: {}", String::from_utf8_lossy(&out.stderr)));
        }
        if std::fs::read(path).map_err(|e| e.to_string())? != a {
            return Err(format!("{name}: report differs"));
        }
    }
    let mut detail = String::from("identical reports; canary saw 0 connections");
    if netns_available() {
        // The namespace may not see into the build tree, so run from copies.
        let exe = dir.path().join("idiomizer");
        std::fs::copy(bin(), &exe).map_err(|e| e.to_string())?;
        for f in ["benchmark.jsonl", "responses.jsonl"] {
            std::fs::copy(workspace().join("fixtures").join(f), dir.path().join(f)).map_err(|e| e.to_string())?;
        }
        let r5 = dir.path().join("r5.json");
        let out = EvalRun {
            exe,
            data: dir.path().to_path_buf(),
            report: &r5,
            engine: "replay",
            envs: &[],
            netns: true,
        }
        .output()?;
        if !out.status.success() || std::fs::read(&r5).map_err(|e| e.to_string())? != a {
            return Err(format!("eval inside an empty network namespace failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        detail.push_str("; identical inside an empty network namespace");
    }
    Ok(detail)
}

// ------------------------------------------------------------------ main

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden corpus", golden_corpus),
        ("negative suite", negative_suite),
        ("chain-comparison oracle", chain_oracle),
        ("extraction completeness", extraction_completeness),
        ("behavioral equivalence", behavioral_equivalence),
        ("idempotence and parse preservation", idempotence),
        ("metrics", metrics),
        ("replay determinism", replay_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
