//! The idiom catalog: for each idiom, where its non-idiomatic form may occur
//! (scenario), what it is made of (component), and which conditions make it
//! refactorable. Pure data; evaluation lives in [`crate::extract`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::syntax::{BoolOpKind, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdiomKind {
    ListComprehension,
    SetComprehension,
    DictComprehension,
    ChainComparison,
    TruthTest,
    LoopElse,
    AssignMultiTargets,
    ForMultiTargets,
    StarInFuncCall,
    With,
    Enumerate,
    ChainAssignSameValue,
    Fstring,
}

impl IdiomKind {
    pub const ALL: [IdiomKind; 13] = [
        IdiomKind::ListComprehension,
        IdiomKind::SetComprehension,
        IdiomKind::DictComprehension,
        IdiomKind::ChainComparison,
        IdiomKind::TruthTest,
        IdiomKind::LoopElse,
        IdiomKind::AssignMultiTargets,
        IdiomKind::ForMultiTargets,
        IdiomKind::StarInFuncCall,
        IdiomKind::With,
        IdiomKind::Enumerate,
        IdiomKind::ChainAssignSameValue,
        IdiomKind::Fstring,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdiomKind::ListComprehension => "list-comprehension",
            IdiomKind::SetComprehension => "set-comprehension",
            IdiomKind::DictComprehension => "dict-comprehension",
            IdiomKind::ChainComparison => "chain-comparison",
            IdiomKind::TruthTest => "truth-test",
            IdiomKind::LoopElse => "loop-else",
            IdiomKind::AssignMultiTargets => "assign-multi-targets",
            IdiomKind::ForMultiTargets => "for-multi-targets",
            IdiomKind::StarInFuncCall => "star-in-func-call",
            IdiomKind::With => "with",
            IdiomKind::Enumerate => "enumerate",
            IdiomKind::ChainAssignSameValue => "chain-assign-same-value",
            IdiomKind::Fstring => "fstring",
        }
    }

    /// Position in catalog order.
    pub fn index(self) -> usize {
        IdiomKind::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn is_comprehension(self) -> bool {
        matches!(
            self,
            IdiomKind::ListComprehension | IdiomKind::SetComprehension | IdiomKind::DictComprehension
        )
    }
}

impl fmt::Display for IdiomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown idiom `{0}`")]
pub struct UnknownIdiom(pub String);

impl FromStr for IdiomKind {
    type Err = UnknownIdiom;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        IdiomKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| UnknownIdiom(s.to_string()))
    }
}

/// Extra constraint a scenario node must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttrConstraint {
    BoolOpIs(BoolOpKind),
    /// The node's truth value is consumed: a branch or loop test, a
    /// comprehension guard, or reached from one through `and`/`or`/`not`.
    TestPosition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioPattern {
    pub node_kind: NodeKind,
    pub attr_constraints: Vec<AttrConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adjacency {
    /// Both nodes are direct operands of the scenario node.
    BothWithinScenario,
    /// The second node is the statement right after the first.
    NextStatement,
    /// The first node (an Assign) is the statement right before the second.
    PrecedingStatement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentPattern {
    SingleNode(NodeKind),
    NodePair {
        kind_a: Vec<NodeKind>,
        kind_b: NodeKind,
        adjacency: Adjacency,
    },
    ConsecutiveRun {
        kind: NodeKind,
        min_len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    /// A numbered condition of the idiom's knowledge record.
    Table,
    /// A safety condition added by this implementation.
    Artifact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    HasAppendCall,
    HasAddCall,
    AppendTargetIsAssigned,
    HasSubscriptAssign,
    SubscriptValueIsAssigned,
    InitializerIsEmptyCollection,
    LoopBodyReducible,
    OperandsIntersect,
    ConjunctsAdjacent,
    OpIsEqOrNotEq,
    OperandInEmptySet,
    SingleComparison,
    LoopHasBreak,
    IfIsNextStatement,
    IfNegatesBreakGuard,
    SingleTargetAssigns,
    NoCrossDependency,
    ValuesNotAllSame,
    BodyHasSubscriptOfTarget,
    SubscriptValueIsLoopVariable,
    ForIndicesNonNegativeLiterals,
    LoopVariableOnlySubscripted,
    SubscriptValuesSame,
    StarIndicesValid,
    StarValueIsPure,
    CalleeNameIsOpen,
    OpenResultConsumedInStatement,
    IterNotAlreadyEnumerate,
    IterIsRangeLen,
    IndexedElementRead,
    AssignValuesSame,
    ValueIsImmutableLiteral,
    BinOpIsModulo,
    LeftIsStringLiteral,
}

impl ConditionId {
    pub fn origin(self) -> Origin {
        use ConditionId::*;
        match self {
            HasAppendCall | HasAddCall | AppendTargetIsAssigned | HasSubscriptAssign
            | SubscriptValueIsAssigned | OperandsIntersect | OpIsEqOrNotEq | OperandInEmptySet
            | LoopHasBreak | IfIsNextStatement | BodyHasSubscriptOfTarget
            | SubscriptValueIsLoopVariable | SubscriptValuesSame | CalleeNameIsOpen
            | IterNotAlreadyEnumerate | AssignValuesSame | BinOpIsModulo => Origin::Table,
            _ => Origin::Artifact,
        }
    }

    pub fn description(self) -> &'static str {
        use ConditionId::*;
        match self {
            HasAppendCall => "the For node has an append function call",
            HasAddCall => "the For node has an add function call",
            AppendTargetIsAssigned => {
                "the object of the append/add call is the assigned variable of the Assign node"
            }
            HasSubscriptAssign => {
                "the For node has an assign statement whose assigned variable is a Subscript node"
            }
            SubscriptValueIsAssigned => {
                "the value of the Subscript node is the assigned variable of the Assign node"
            }
            InitializerIsEmptyCollection => {
                "the Assign node directly precedes the loop and binds an empty collection literal"
            }
            LoopBodyReducible => {
                "the loop body is only continue-guards, nested for/if clauses and one final write"
            }
            OperandsIntersect => "compare operands of the two Compare nodes intersect",
            ConjunctsAdjacent => "the two comparisons are neighbouring conjuncts",
            OpIsEqOrNotEq => "the op of the Compare node is == or !=",
            OperandInEmptySet => "one comparison operand belongs to the empty-value literals",
            SingleComparison => "the Compare node has exactly one operator",
            LoopHasBreak => "the For/While node has break statements",
            IfIsNextStatement => "the If node is the next statement of the loop",
            IfNegatesBreakGuard => {
                "the If test is the negation of the unique break guard and the If has no else"
            }
            SingleTargetAssigns => "every statement is a single-target assignment to a name or attribute",
            NoCrossDependency => "no right-hand side reads a target assigned earlier in the run",
            ValuesNotAllSame => "the assigned values are not all identical (that case is chain assignment)",
            BodyHasSubscriptOfTarget => "the body of the For node has a Subscript node",
            SubscriptValueIsLoopVariable => {
                "the value of the Subscript node is the iterated variable of the For node"
            }
            ForIndicesNonNegativeLiterals => "every subscript index is a non-negative integer literal",
            LoopVariableOnlySubscripted => {
                "the loop variable is only read through subscripts and never rebound"
            }
            SubscriptValuesSame => "the values of the Subscript nodes are the same",
            StarIndicesValid => {
                "the indices form a step-1 ascending run without crossing from negative to non-negative"
            }
            StarValueIsPure => "the subscripted value contains no calls",
            CalleeNameIsOpen => "the function name of the Call node is open",
            OpenResultConsumedInStatement => {
                "the open() result is consumed within one statement and not stored or returned"
            }
            IterNotAlreadyEnumerate => {
                "the iterated object is not a function call whose function name is enumerate"
            }
            IterIsRangeLen => "the iterated object is range(len(X)) for a name or attribute X",
            IndexedElementRead => "X[i] is read in the body and X, i and X[i] are never written",
            AssignValuesSame => "the values of the consecutive Assign nodes are the same",
            ValueIsImmutableLiteral => "the shared value is an immutable literal",
            BinOpIsModulo => "the op of the BinOp node is %",
            LeftIsStringLiteral => "the left operand is a single string literal",
        }
    }
}

/// How component code is abstracted before idiomatization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbstractionMode {
    SpecifiedObject,
    OperandMapping,
    NoAbstraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdiomSpec {
    pub kind: IdiomKind,
    pub scenario: Option<ScenarioPattern>,
    pub component: ComponentPattern,
    pub conditions: Vec<ConditionId>,
    pub abstraction_mode: AbstractionMode,
}

fn build(kind: IdiomKind) -> IdiomSpec {
    use ComponentPattern::*;
    use ConditionId::*;
    use IdiomKind as K;
    use NodeKind as N;

    let for_and_init = NodePair {
        kind_a: vec![N::Assign],
        kind_b: N::For,
        adjacency: Adjacency::PrecedingStatement,
    };
    let (scenario, component, conditions, abstraction_mode) = match kind {
        K::ListComprehension => (
            None,
            for_and_init,
            vec![HasAppendCall, AppendTargetIsAssigned, InitializerIsEmptyCollection, LoopBodyReducible],
            AbstractionMode::NoAbstraction,
        ),
        K::SetComprehension => (
            None,
            for_and_init,
            vec![HasAddCall, AppendTargetIsAssigned, InitializerIsEmptyCollection, LoopBodyReducible],
            AbstractionMode::NoAbstraction,
        ),
        K::DictComprehension => (
            None,
            for_and_init,
            vec![
                HasSubscriptAssign,
                SubscriptValueIsAssigned,
                InitializerIsEmptyCollection,
                LoopBodyReducible,
            ],
            AbstractionMode::NoAbstraction,
        ),
        K::ChainComparison => (
            Some(ScenarioPattern {
                node_kind: N::BoolOp,
                attr_constraints: vec![AttrConstraint::BoolOpIs(BoolOpKind::And)],
            }),
            NodePair {
                kind_a: vec![N::Compare],
                kind_b: N::Compare,
                adjacency: Adjacency::BothWithinScenario,
            },
            vec![OperandsIntersect, ConjunctsAdjacent],
            AbstractionMode::OperandMapping,
        ),
        K::TruthTest => (
            Some(ScenarioPattern {
                node_kind: N::Compare,
                attr_constraints: vec![AttrConstraint::TestPosition],
            }),
            SingleNode(N::Compare),
            vec![OpIsEqOrNotEq, OperandInEmptySet, SingleComparison],
            AbstractionMode::NoAbstraction,
        ),
        K::LoopElse => (
            None,
            NodePair {
                kind_a: vec![N::For, N::While],
                kind_b: N::If,
                adjacency: Adjacency::NextStatement,
            },
            vec![LoopHasBreak, IfIsNextStatement, IfNegatesBreakGuard],
            AbstractionMode::NoAbstraction,
        ),
        K::AssignMultiTargets => (
            None,
            ConsecutiveRun {
                kind: N::Assign,
                min_len: 2,
            },
            vec![SingleTargetAssigns, NoCrossDependency, ValuesNotAllSame],
            AbstractionMode::NoAbstraction,
        ),
        K::ForMultiTargets => (
            None,
            SingleNode(N::For),
            vec![
                BodyHasSubscriptOfTarget,
                SubscriptValueIsLoopVariable,
                ForIndicesNonNegativeLiterals,
                LoopVariableOnlySubscripted,
            ],
            AbstractionMode::SpecifiedObject,
        ),
        K::StarInFuncCall => (
            Some(ScenarioPattern {
                node_kind: N::Call,
                attr_constraints: vec![],
            }),
            ConsecutiveRun {
                kind: N::Subscript,
                min_len: 2,
            },
            vec![SubscriptValuesSame, StarIndicesValid, StarValueIsPure],
            AbstractionMode::SpecifiedObject,
        ),
        K::With => (
            None,
            SingleNode(N::Call),
            vec![CalleeNameIsOpen, OpenResultConsumedInStatement],
            AbstractionMode::NoAbstraction,
        ),
        K::Enumerate => (
            None,
            SingleNode(N::For),
            vec![IterNotAlreadyEnumerate, IterIsRangeLen, IndexedElementRead],
            AbstractionMode::SpecifiedObject,
        ),
        K::ChainAssignSameValue => (
            None,
            ConsecutiveRun {
                kind: N::Assign,
                min_len: 2,
            },
            vec![AssignValuesSame, SingleTargetAssigns, ValueIsImmutableLiteral],
            AbstractionMode::NoAbstraction,
        ),
        K::Fstring => (
            None,
            SingleNode(N::BinOp),
            vec![BinOpIsModulo, LeftIsStringLiteral],
            AbstractionMode::NoAbstraction,
        ),
    };
    IdiomSpec {
        kind,
        scenario,
        component,
        conditions,
        abstraction_mode,
    }
}

/// All 13 idiom records in catalog order.
pub fn catalog() -> Vec<IdiomSpec> {
    IdiomKind::ALL.into_iter().map(build).collect()
}

pub fn spec_for(kind: IdiomKind) -> IdiomSpec {
    build(kind)
}

#[derive(Serialize)]
struct ConditionJson {
    id: ConditionId,
    description: &'static str,
    origin: Origin,
}

#[derive(Serialize)]
struct SpecJson<'a> {
    kind: IdiomKind,
    scenario: &'a Option<ScenarioPattern>,
    component: &'a ComponentPattern,
    conditions: Vec<ConditionJson>,
    #[serde(rename = "origin-flags")]
    origin_flags: Vec<Origin>,
    abstraction_mode: AbstractionMode,
}

/// The catalog as a pretty-printed JSON array.
pub fn catalog_json() -> String {
    let specs = catalog();
    let docs: Vec<SpecJson> = specs
        .iter()
        .map(|s| SpecJson {
            kind: s.kind,
            scenario: &s.scenario,
            component: &s.component,
            conditions: s
                .conditions
                .iter()
                .map(|&c| ConditionJson {
                    id: c,
                    description: c.description(),
                    origin: c.origin(),
                })
                .collect(),
            origin_flags: s.conditions.iter().map(|c| c.origin()).collect(),
            abstraction_mode: s.abstraction_mode,
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("catalog serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConditionId::*;

    fn table_conditions(kind: IdiomKind) -> Vec<ConditionId> {
        spec_for(kind)
            .conditions
            .into_iter()
            .filter(|c| c.origin() == Origin::Table)
            .collect()
    }

    #[test]
    fn thirteen_specs_in_order() {
        let specs = catalog();
        assert_eq!(specs.len(), 13);
        for (spec, kind) in specs.iter().zip(IdiomKind::ALL) {
            assert_eq!(spec.kind, kind);
            assert_eq!(spec, &spec_for(kind));
        }
    }

    #[test]
    fn scenario_present_for_exactly_three() {
        let with: Vec<IdiomKind> = catalog()
            .into_iter()
            .filter(|s| s.scenario.is_some())
            .map(|s| s.kind)
            .collect();
        assert_eq!(
            with,
            vec![IdiomKind::ChainComparison, IdiomKind::TruthTest, IdiomKind::StarInFuncCall]
        );
    }

    #[test]
    fn table_cells() {
        use IdiomKind as K;
        use NodeKind as N;
        let chain = spec_for(K::ChainComparison);
        assert_eq!(
            chain.scenario.unwrap().attr_constraints,
            vec![AttrConstraint::BoolOpIs(BoolOpKind::And)]
        );
        assert_eq!(table_conditions(K::ChainComparison), vec![OperandsIntersect]);

        assert_eq!(spec_for(K::TruthTest).scenario.unwrap().attr_constraints, vec![AttrConstraint::TestPosition]);
        assert_eq!(table_conditions(K::TruthTest), vec![OpIsEqOrNotEq, OperandInEmptySet]);

        assert_eq!(table_conditions(K::ListComprehension), vec![HasAppendCall, AppendTargetIsAssigned]);
        assert_eq!(table_conditions(K::SetComprehension), vec![HasAddCall, AppendTargetIsAssigned]);
        assert_eq!(
            table_conditions(K::DictComprehension),
            vec![HasSubscriptAssign, SubscriptValueIsAssigned]
        );
        assert_eq!(table_conditions(K::LoopElse), vec![LoopHasBreak, IfIsNextStatement]);
        assert_eq!(table_conditions(K::AssignMultiTargets), vec![]);
        assert!(!spec_for(K::AssignMultiTargets).conditions.is_empty());
        assert_eq!(
            table_conditions(K::ForMultiTargets),
            vec![BodyHasSubscriptOfTarget, SubscriptValueIsLoopVariable]
        );
        assert_eq!(table_conditions(K::StarInFuncCall), vec![SubscriptValuesSame]);
        assert_eq!(table_conditions(K::With), vec![CalleeNameIsOpen]);
        assert_eq!(table_conditions(K::Enumerate), vec![IterNotAlreadyEnumerate]);
        assert_eq!(table_conditions(K::ChainAssignSameValue), vec![AssignValuesSame]);
        assert_eq!(table_conditions(K::Fstring), vec![BinOpIsModulo]);

        assert_eq!(spec_for(K::With).component, ComponentPattern::SingleNode(N::Call));
        assert_eq!(spec_for(K::Fstring).component, ComponentPattern::SingleNode(N::BinOp));
        assert_eq!(
            spec_for(K::LoopElse).component,
            ComponentPattern::NodePair {
                kind_a: vec![N::For, N::While],
                kind_b: N::If,
                adjacency: Adjacency::NextStatement
            }
        );
        assert_eq!(
            spec_for(K::AssignMultiTargets).component,
            ComponentPattern::ConsecutiveRun { kind: N::Assign, min_len: 2 }
        );
        assert_eq!(spec_for(K::Enumerate).conditions[0], IterNotAlreadyEnumerate);
    }

    #[test]
    fn abstraction_modes() {
        use AbstractionMode::*;
        for spec in catalog() {
            let expected = match spec.kind {
                IdiomKind::ChainComparison => OperandMapping,
                IdiomKind::StarInFuncCall | IdiomKind::ForMultiTargets | IdiomKind::Enumerate => {
                    SpecifiedObject
                }
                _ => NoAbstraction,
            };
            assert_eq!(spec.abstraction_mode, expected, "{}", spec.kind);
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in IdiomKind::ALL {
            assert_eq!(kind.name().parse::<IdiomKind>().unwrap(), kind);
            assert_eq!(serde_json::to_string(&kind).unwrap(), format!("\"{}\"", kind.name()));
        }
        assert_eq!("chain_comparison".parse::<IdiomKind>().unwrap(), IdiomKind::ChainComparison);
        assert!("nope".parse::<IdiomKind>().is_err());
    }

    #[test]
    fn json_export_lists_all() {
        let doc: serde_json::Value = serde_json::from_str(&catalog_json()).unwrap();
        let arr = doc.as_array().unwrap();
        assert_eq!(arr.len(), 13);
        assert_eq!(arr[9]["kind"], "with");
        assert_eq!(arr[9]["conditions"][0]["id"], "CalleeNameIsOpen");
        assert_eq!(arr[9]["origin-flags"][0], "table");
    }
}
