use crate::syntax::tokens::{normalize, TokenIndex};
use crate::syntax::{parse_expression, CmpOp, NodeKind};

use super::IdiomatizationOutcome;

/// A comparison as its operand texts and operators.
#[derive(Debug, Clone)]
struct Chain {
    operands: Vec<String>,
    ops: Vec<CmpOp>,
}

impl Chain {
    fn parse(text: &str) -> Option<Chain> {
        let node = parse_expression(text).ok()?;
        if node.kind != NodeKind::Compare {
            return None;
        }
        let index = TokenIndex::new(text).ok()?;
        let operands = node
            .operands()
            .iter()
            .map(|o| index.outer_span(o.span).slice(text).to_string())
            .collect();
        Some(Chain {
            operands,
            ops: node.compare_ops().to_vec(),
        })
    }

    /// `a < b <= c` read right to left as `c >= b > a`. `None` when an
    /// operator has no mirror (`in`, `not in`).
    fn reversed(&self) -> Option<Chain> {
        let ops = self.ops.iter().rev().map(|o| o.mirrored()).collect::<Option<Vec<_>>>()?;
        let operands = self.operands.iter().rev().cloned().collect();
        Some(Chain { operands, ops })
    }

    fn first(&self) -> String {
        normalize(&self.operands[0])
    }

    fn last(&self) -> String {
        normalize(self.operands.last().unwrap())
    }

    /// Joins `self` and `next`, which starts with `self`'s last operand.
    fn merge(&self, next: &Chain) -> String {
        let mut out = self.operands[0].clone();
        let tail = self.ops.iter().zip(&self.operands[1..]);
        let tail = tail.chain(next.ops.iter().zip(&next.operands[1..]));
        for (op, operand) in tail {
            out.push(' ');
            out.push_str(op.token());
            out.push(' ');
            out.push_str(operand);
        }
        out
    }
}

/// The eight ways of orienting and ordering two comparisons, in the order
/// they are tried: fewer reversals first, then the original order before
/// the swapped one, then reversing the first comparison before the second.
pub(crate) const CONFIGURATIONS: [(bool, bool, bool); 8] = [
    // (swap, reverse c1, reverse c2)
    (false, false, false),
    (true, false, false),
    (false, true, false),
    (false, false, true),
    (true, true, false),
    (true, false, true),
    (false, true, true),
    (true, true, true),
];

/// Merges `c1 and c2` into one chained comparison when some orientation of
/// the two puts a shared operand where they meet.
pub fn chain_two_compares(c1: &str, c2: &str) -> IdiomatizationOutcome {
    let (Some(a), Some(b)) = (Chain::parse(c1), Chain::parse(c2)) else {
        return IdiomatizationOutcome::declined("operands are not both comparisons");
    };
    let mut blocked = false;
    for (swap, rev_a, rev_b) in CONFIGURATIONS {
        let orient = |c: &Chain, rev: bool| if rev { c.reversed() } else { Some(c.clone()) };
        let (Some(x), Some(y)) = (orient(&a, rev_a), orient(&b, rev_b)) else {
            blocked = true;
            continue;
        };
        let (left, right) = if swap { (y, x) } else { (x, y) };
        if left.last() == right.first() {
            return IdiomatizationOutcome::accepted(left.merge(&right));
        }
    }
    if blocked {
        IdiomatizationOutcome::declined("reversing compare operands is invalid for membership operators")
    } else {
        IdiomatizationOutcome::declined("no orientation makes the comparisons meet at a shared operand")
    }
}
