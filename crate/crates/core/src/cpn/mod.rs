//! A restricted colored Petri net kernel.
//!
//! Nets here only need the handful of colorsets, arc shapes and guard atoms
//! that case-model translation produces, so guards are a fixed vocabulary of
//! atoms rather than an expression language. Places and transitions are
//! addressed by index; ids are kept for display and serialization.

mod kernel;
mod token;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{CardinalityConstraint, ClassId};

pub use kernel::{
    enabled_bindings, enabled_for, fire, fire_unchecked, initial_marking, Enabled, FireError,
};
pub use token::{Association, Binding, ColorValue, Marking, ObjectId, ParseObjectIdError};

pub type PlaceIdx = usize;
pub type TransitionIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Colorset {
    Unit,
    Int,
    Id,
    IdSet,
    AssocSet,
    CfMap,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "camelCase")]
pub enum PlaceRole {
    Initial,
    Running,
    Final,
    Objects,
    Associations,
    Counter {
        class: ClassId,
    },
    Config {
        class: ClassId,
        state: String,
    },
    ControlFlow {
        fragment: String,
        from: String,
        to: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    pub colorset: Colorset,
    #[serde(flatten)]
    pub role: PlaceRole,
}

/// Input arc of a transition. Every variable is bound by exactly one arc.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arc", rename_all = "camelCase")]
pub enum ArcPattern {
    /// Consumes one token and binds it.
    Single { place: PlaceIdx, var: String },
    /// Requires a token without consuming it. Without a variable the token
    /// must be `Unit`.
    Test {
        place: PlaceIdx,
        var: Option<String>,
    },
    /// Consumes the counter token of a class.
    CounterTake {
        class: ClassId,
        place: PlaceIdx,
        var: String,
    },
    /// Consumes the objects or associations token.
    SetTake { place: PlaceIdx, var: String },
    /// Consumes every token on `place` of `class` that is associated with
    /// the object bound to `ref_var`, binding them as one set.
    CollectionBind {
        place: PlaceIdx,
        set_var: String,
        ref_var: String,
        class: ClassId,
    },
}

impl ArcPattern {
    pub fn place(&self) -> PlaceIdx {
        match self {
            ArcPattern::Single { place, .. }
            | ArcPattern::Test { place, .. }
            | ArcPattern::CounterTake { place, .. }
            | ArcPattern::SetTake { place, .. }
            | ArcPattern::CollectionBind { place, .. } => *place,
        }
    }

    pub fn var(&self) -> Option<&str> {
        match self {
            ArcPattern::Single { var, .. }
            | ArcPattern::CounterTake { var, .. }
            | ArcPattern::SetTake { var, .. } => Some(var),
            ArcPattern::Test { var, .. } => var.as_deref(),
            ArcPattern::CollectionBind { set_var, .. } => Some(set_var),
        }
    }

    pub fn consumes(&self) -> bool {
        !matches!(self, ArcPattern::Test { .. })
    }
}

/// Guard atoms. A transition's guard is the conjunction of its atoms.
/// Atoms that count associations read the token on the associations place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "atom", rename_all = "camelCase")]
pub enum GuardAtom {
    /// Every object in `a` is associated with every object in `b`.
    Associated { a: String, b: String },
    /// Every object in `var` has fewer than `upper` associated objects of
    /// `partner_class`, so one more fits.
    NotExceedsUpper {
        var: String,
        partner_class: ClassId,
        upper: u32,
    },
    /// `var` holds at least `lower` objects (1 for a single id).
    MeetsLower { var: String, lower: u32 },
    /// Every object in `var` (restricted to `of_class` if given) has at
    /// least `min_count` associated `dependent_class` objects, counting
    /// `pending` associations the firing itself establishes.
    GoalCount {
        var: String,
        of_class: Option<ClassId>,
        dependent_class: ClassId,
        min_count: u32,
        pending: u32,
    },
    /// The control-flow token maps `class` to `var`'s object or to nothing.
    CfConsistent {
        cf: String,
        class: ClassId,
        var: String,
    },
    /// Every `class` object associated with `ref_var` lies on `place`.
    AllAssociatedInState {
        ref_var: String,
        class: ClassId,
        place: PlaceIdx,
    },
    SetSizeAtLeast { var: String, n: u32 },
    SetSizeAtMost { var: String, n: u32 },
}

impl GuardAtom {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            GuardAtom::Associated { a, b } => vec![a, b],
            GuardAtom::CfConsistent { cf, var, .. } => vec![cf, var],
            GuardAtom::NotExceedsUpper { var, .. }
            | GuardAtom::MeetsLower { var, .. }
            | GuardAtom::GoalCount { var, .. }
            | GuardAtom::SetSizeAtLeast { var, .. }
            | GuardAtom::SetSizeAtMost { var, .. } => vec![var],
            GuardAtom::AllAssociatedInState { ref_var, .. } => vec![ref_var],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "var", rename_all = "camelCase")]
pub enum TokenExpr {
    Unit,
    /// The bound value itself.
    Var(String),
    /// One `Id` token per element of a bound set.
    Each(String),
}

/// Output effect of a transition, applied in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "out", rename_all = "camelCase")]
pub enum Output {
    Produce {
        place: PlaceIdx,
        value: TokenExpr,
    },
    /// A new object of `class` numbered by the pre-firing counter value,
    /// bound to `var` for later outputs and associated with every object in
    /// `associate_with`.
    FreshId {
        class: ClassId,
        var: String,
        place: PlaceIdx,
        associate_with: Vec<String>,
    },
    /// Puts back the counter bound to `var`, incremented.
    CounterPut { place: PlaceIdx, var: String },
    /// Puts back the objects or associations set bound to `var`, extended
    /// with the objects or associations this firing created.
    SetPut { place: PlaceIdx, var: String },
    /// A control-flow token: `base` (or an all-empty map) with `assign`
    /// entries overwritten by the bound objects.
    EmitCf {
        place: PlaceIdx,
        base: Option<String>,
        assign: Vec<(ClassId, String)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Origin {
    StartEvent {
        fragment: String,
        node: String,
        output: usize,
    },
    Activity {
        fragment: String,
        node: String,
        input: usize,
        output: usize,
    },
    Gateway {
        fragment: String,
        node: String,
        from: String,
        to: String,
    },
    Termination {
        index: usize,
    },
}

impl Origin {
    pub fn fragment(&self) -> Option<&str> {
        match self {
            Origin::StartEvent { fragment, .. }
            | Origin::Activity { fragment, .. }
            | Origin::Gateway { fragment, .. } => Some(fragment),
            Origin::Termination { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    pub label: String,
    pub origin: Origin,
    pub arcs: Vec<ArcPattern>,
    pub guard: Vec<GuardAtom>,
    pub outputs: Vec<Output>,
}

impl Transition {
    pub fn is_termination(&self) -> bool {
        matches!(self.origin, Origin::Termination { .. })
    }

    /// Variables bound by input arcs.
    pub fn bound_vars(&self) -> BTreeSet<&str> {
        self.arcs.iter().filter_map(ArcPattern::var).collect()
    }
}

/// The compiled net. Carries the class list (the domain of control-flow
/// maps) and the cardinality constraints so markings can be checked
/// against global bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub classes: Vec<ClassId>,
    pub constraints: Vec<CardinalityConstraint>,
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
}

impl Net {
    fn find_place(&self, pred: impl Fn(&PlaceRole) -> bool) -> Option<PlaceIdx> {
        self.places.iter().position(|p| pred(&p.role))
    }

    pub fn initial(&self) -> PlaceIdx {
        self.find_place(|r| *r == PlaceRole::Initial)
            .expect("net has an initial place")
    }

    pub fn running(&self) -> PlaceIdx {
        self.find_place(|r| *r == PlaceRole::Running)
            .expect("net has a running place")
    }

    pub fn final_place(&self) -> PlaceIdx {
        self.find_place(|r| *r == PlaceRole::Final)
            .expect("net has a final place")
    }

    pub fn objects(&self) -> PlaceIdx {
        self.find_place(|r| *r == PlaceRole::Objects)
            .expect("net has an objects place")
    }

    pub fn associations(&self) -> PlaceIdx {
        self.find_place(|r| *r == PlaceRole::Associations)
            .expect("net has an associations place")
    }

    pub fn counter(&self, class: &ClassId) -> Option<PlaceIdx> {
        self.find_place(|r| matches!(r, PlaceRole::Counter { class: c } if c == class))
    }

    pub fn config(&self, class: &ClassId, state: &str) -> Option<PlaceIdx> {
        self.find_place(
            |r| matches!(r, PlaceRole::Config { class: c, state: s } if c == class && s == state),
        )
    }

    pub fn place_by_id(&self, id: &str) -> Option<PlaceIdx> {
        self.places.iter().position(|p| p.id == id)
    }

    pub fn transition_by_id(&self, id: &str) -> Option<TransitionIdx> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn upper(&self, source: &ClassId, target: &ClassId) -> Option<u32> {
        self.constraints
            .iter()
            .find(|c| &c.source == source && &c.target == target)
            .map(|c| c.upper)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("nets always serialize")
    }

    pub fn from_json(text: &str) -> Result<Net, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Structural problems: variables used by guards or outputs that no arc
    /// binds, variables bound twice, dangling place indices, and global
    /// places that are missing or duplicated.
    pub fn lint(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for role in [
            PlaceRole::Initial,
            PlaceRole::Running,
            PlaceRole::Final,
            PlaceRole::Objects,
            PlaceRole::Associations,
        ] {
            let n = self.places.iter().filter(|p| p.role == role).count();
            if n != 1 {
                issues.push(format!("expected one {role:?} place, found {n}"));
            }
        }
        for t in &self.transitions {
            let mut bound = BTreeSet::new();
            let check_place = |p: PlaceIdx, issues: &mut Vec<String>| {
                if p >= self.places.len() {
                    issues.push(format!("{}: place index {p} out of range", t.id));
                }
            };
            for arc in &t.arcs {
                check_place(arc.place(), &mut issues);
                if let ArcPattern::CollectionBind { ref_var, .. } = arc {
                    if !bound.contains(ref_var.as_str()) {
                        issues.push(format!(
                            "{}: collection reference {ref_var} bound after its use",
                            t.id
                        ));
                    }
                }
                if let Some(v) = arc.var() {
                    if !bound.insert(v) {
                        issues.push(format!("{}: variable {v} bound twice", t.id));
                    }
                }
            }
            for atom in &t.guard {
                for v in atom.vars() {
                    if !bound.contains(v) {
                        issues.push(format!("{}: guard uses unbound variable {v}", t.id));
                    }
                }
            }
            let mut scope = bound.clone();
            for out in &t.outputs {
                if let Output::FreshId { var, .. } = out {
                    if !scope.insert(var) {
                        issues.push(format!("{}: fresh variable {var} shadows a binding", t.id));
                    }
                }
            }
            for out in &t.outputs {
                let used: Vec<&str> = match out {
                    Output::Produce { place, value } => {
                        check_place(*place, &mut issues);
                        match value {
                            TokenExpr::Unit => vec![],
                            TokenExpr::Var(v) | TokenExpr::Each(v) => vec![v],
                        }
                    }
                    Output::FreshId {
                        place,
                        associate_with,
                        ..
                    } => {
                        check_place(*place, &mut issues);
                        associate_with.iter().map(String::as_str).collect()
                    }
                    Output::CounterPut { place, var } | Output::SetPut { place, var } => {
                        check_place(*place, &mut issues);
                        vec![var]
                    }
                    Output::EmitCf {
                        place, base, assign, ..
                    } => {
                        check_place(*place, &mut issues);
                        base.iter()
                            .map(String::as_str)
                            .chain(assign.iter().map(|(_, v)| v.as_str()))
                            .collect()
                    }
                };
                for v in used {
                    if !scope.contains(v) {
                        issues.push(format!("{}: output uses unbound variable {v}", t.id));
                    }
                }
            }
        }
        issues
    }
}
