//! Prompt library for the remote engine.

use serde::Serialize;

use crate::knowledge::IdiomKind;

/// Instruction for turning comparison operands into symbols.
pub const ABSTRACTION_PROMPT: &str = "Use a symbol v to simplify each comparison operand within the following Python code. \
The same comparison operand is represented by the same symbol.";

const CHAIN_INSTRUCTION: &str = "Reverse compare operands of the first comparison operation, the second comparison, \
or the first and the second comparison operations so that \"v2 and v2\" is in the new Python code, and then simplify it";

const ANSWER_FORMAT: &str = "Answer \"Yes\" or \"No\" on the first line. After \"Yes\", give the rewritten code \
in a single ```python fenced block. After \"No\", give a one-line reason.";

#[derive(Debug, Clone, Serialize)]
pub struct PromptTemplate {
    pub idiom: IdiomKind,
    pub instruction: &'static str,
    /// Input code and the expected answer; `None` means the answer is No.
    pub examples: Vec<(&'static str, Option<&'static str>)>,
    /// False for the chain-comparison instruction, which is used as given.
    pub authored: bool,
}

pub fn template(idiom: IdiomKind) -> PromptTemplate {
    use IdiomKind::*;
    let (instruction, examples): (&'static str, Vec<(&'static str, Option<&'static str>)>) = match idiom {
        ListComprehension => (
            "Rewrite the empty-list initialization and the for loop that appends to it as one assignment of a \
list comprehension. Turn each leading `if C: continue` into the condition `not C`. Answer No if the loop \
does anything besides appending.",
            vec![
                ("r = []\nfor x in xs:\n    r.append(x + 1)", Some("r = [x + 1 for x in xs]")),
                ("r = []\nfor x in xs:\n    if x is None:\n        continue\n    r.append(x)", Some("r = [x for x in xs if x is not None]")),
                ("r = []\nfor x in xs:\n    n += 1\n    r.append(x)", None),
            ],
        ),
        SetComprehension => (
            "Rewrite the empty-set initialization and the for loop that adds to it as one assignment of a set \
comprehension. Turn each leading `if C: continue` into the condition `not C` and join conditions with `and`. \
Answer No if the loop does anything besides adding.",
            vec![
                ("s = set()\nfor x in xs:\n    s.add(x.name)", Some("s = {x.name for x in xs}")),
                ("s = set()\nfor x in xs:\n    if x in seen:\n        continue\n    s.add(x)", Some("s = {x for x in xs if x not in seen}")),
                ("s = set()\nfor x in xs:\n    s.add(x)\n    log(x)", None),
            ],
        ),
        DictComprehension => (
            "Rewrite the empty-dict initialization and the for loop that stores items into it as one assignment \
of a dict comprehension. Answer No if the loop does anything besides storing.",
            vec![
                ("d = {}\nfor k in ks:\n    d[k] = f(k)", Some("d = {k: f(k) for k in ks}")),
                ("d = {}\nfor k, v in items:\n    if v:\n        d[k] = v", Some("d = {k: v for k, v in items if v}")),
                ("d = {}\nfor k in ks:\n    d[k] = 1\n    break", None),
            ],
        ),
        ChainComparison => (
            CHAIN_INSTRUCTION,
            vec![
                ("v1 > v2 and v3 == v2", Some("v1 > v2 == v3")),
                ("v1 > v2 and v1 < v3", Some("v2 < v1 < v3")),
                ("v1 in v2 and v3 in v2", None),
            ],
        ),
        TruthTest => (
            "Replace the comparison against an empty or zero value with a direct truth test of the other operand: \
`E == empty` becomes `not E` and `E != empty` becomes `E`.",
            vec![
                ("n % 2 == 0", Some("not n % 2")),
                ("name != ''", Some("name")),
                ("x == 1", None),
            ],
        ),
        LoopElse => (
            "The if statement after the loop runs exactly when the loop ended without break. Move its body into \
an else clause of the loop and delete the if statement.",
            vec![
                (
                    "while tries:\n    r = fetch()\n    if r is not None:\n        break\nif r is None:\n    fail()",
                    Some("while tries:\n    r = fetch()\n    if r is not None:\n        break\nelse:\n    fail()"),
                ),
                ("while a:\n    if b:\n        break\nif not b:\n    c()", Some("while a:\n    if b:\n        break\nelse:\n    c()")),
                ("for x in xs:\n    g(x)\nif done:\n    h()", None),
            ],
        ),
        AssignMultiTargets => (
            "Combine the consecutive assignments into one assignment with multiple targets and a tuple of values.",
            vec![
                ("a = 1\nb = 2", Some("a, b = 1, 2")),
                ("self.x = x\nself.y = None", Some("self.x, self.y = x, None")),
                ("a = 1\nb = a", None),
            ],
        ),
        ForMultiTargets => (
            "The loop variable v is only used through constant indices. Unpack it in the for header into names \
e0, e1, ... for the used positions and *e for the rest, and replace each v[k] with ek.",
            vec![
                ("for v in pairs:\n    print(v[0], v[1])", Some("for e0, e1, *e in pairs:\n    print(e0, e1)")),
                ("for v in rows:\n    if v[0] > 2:\n        keep()", Some("for e0, *e in rows:\n    if e0 > 2:\n        keep()")),
                ("for v in rows:\n    use(v)", None),
            ],
        ),
        StarInFuncCall => (
            "The arguments index the same value v at consecutive positions. Replace them with one starred slice \
of v.",
            vec![
                ("v[0], v[1]", Some("*v[:2]")),
                ("v[i], v[i+1]", Some("*v[i:i + 2]")),
                ("v[-1], v[0]", None),
            ],
        ),
        With => (
            "The statement opens a file and never closes it. Wrap the statement in a with block that opens the \
file as f and use f in place of the open call.",
            vec![
                ("data = json.load(open(p))", Some("with open(p) as f:\n    data = json.load(f)")),
                ("lines = [l for l in open(p)]", Some("with open(p) as f:\n    lines = [l for l in f]")),
                ("fh = open(p)", None),
            ],
        ),
        Enumerate => (
            "The loop iterates over range(len(v)) to read v[i]. Iterate over enumerate(v) instead, binding the \
element in the for header.",
            vec![
                ("for i in range(len(v)):\n    w = v[i]\n    use(i, w)", Some("for (i, w) in enumerate(v):\n    use(i, w)")),
                ("for i in range(len(v)):\n    print(v[i])", Some("for (i, item) in enumerate(v):\n    print(item)")),
                ("for i in range(len(v)):\n    v[i] = 0", None),
            ],
        ),
        ChainAssignSameValue => (
            "The consecutive assignments store the same immutable value. Combine them into one chained assignment.",
            vec![
                ("a = None\nb = None", Some("a = b = None")),
                ("x = 0\ny = 0\nz = 0", Some("x = y = z = 0")),
                ("a = []\nb = []", None),
            ],
        ),
        Fstring => (
            "Rewrite the %-formatting expression as an f-string. Only %s, %r, %d and %f conversions are allowed.",
            vec![
                ("'n is %s' % n", Some("f'n is {n}'")),
                ("'%s=%r' % (k, v)", Some("f'{k}={v!r}'")),
                ("'%5.2f' % x", None),
            ],
        ),
    };
    PromptTemplate {
        idiom,
        instruction,
        examples,
        authored: idiom != ChainComparison,
    }
}

/// Instruction, answer format and worked examples, without the code under
/// question.
pub fn render(idiom: IdiomKind) -> String {
    let t = template(idiom);
    let mut out = format!("{}\n\n{ANSWER_FORMAT}\n", t.instruction);
    for (input, output) in &t.examples {
        out.push_str(&format!("\nCode:\n```python\n{input}\n```\nAnswer:\n"));
        match output {
            Some(code) => out.push_str(&format!("Yes\n```python\n{code}\n```\n")),
            None => out.push_str("No\n"),
        }
    }
    out
}

/// The full message sent to the model.
pub fn message(prompt: &str, abstract_code: &str) -> String {
    format!("{prompt}\nCode:\n```python\n{}\n```\nAnswer:\n", abstract_code.trim_end())
}
