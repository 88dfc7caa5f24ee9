//! Case models: domain model, object life cycles, fragments and termination
//! conditions.
//!
//! The types in this module double as the JSON model document. Every struct
//! rejects unknown keys, so a document either maps one-to-one onto a
//! [`CaseModel`] or fails to parse.

mod parse;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_case_model, ParseError};
pub use validate::{
    summarize, validate_all, validate_case_model, validate_domain_model, validate_fragments,
    Violation, ViolationCode,
};

/// Name of a class. Unique within a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub String);

impl ClassId {
    pub fn new(name: impl Into<String>) -> Self {
        ClassId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        ClassId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeType {
    String,
    Integer,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttributeType,
}

/// A goal-cardinality guard on an OLC transition: the object may only take
/// the transition while it has at least `min_count` associated objects of
/// `dependent_class`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct GoalGuard {
    pub dependent_class: ClassId,
    pub min_count: u32,
}

/// A guard annotation attached to one OLC transition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TransitionGuard {
    pub from: String,
    pub to: String,
    pub dependent_class: ClassId,
    pub min_count: u32,
}

impl TransitionGuard {
    pub fn goal(&self) -> GoalGuard {
        GoalGuard {
            dependent_class: self.dependent_class.clone(),
            min_count: self.min_count,
        }
    }
}

/// One class of the domain model together with its object life cycle and
/// attribute schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ClassDecl {
    pub name: ClassId,
    #[serde(default)]
    pub is_case_class: bool,
    #[serde(default)]
    pub attributes: Vec<AttributeDecl>,
    pub states: Vec<String>,
    #[serde(default)]
    pub transitions: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guards: Vec<TransitionGuard>,
}

impl ClassDecl {
    pub fn olc(&self) -> ObjectLifeCycle<'_> {
        ObjectLifeCycle { class: self }
    }
}

/// Read-only view of a class's object life cycle.
#[derive(Debug, Clone, Copy)]
pub struct ObjectLifeCycle<'a> {
    class: &'a ClassDecl,
}

impl<'a> ObjectLifeCycle<'a> {
    pub fn class(&self) -> &'a ClassId {
        &self.class.name
    }

    pub fn states(&self) -> &'a [String] {
        &self.class.states
    }

    pub fn has_state(&self, state: &str) -> bool {
        self.class.states.iter().any(|s| s == state)
    }

    pub fn has_transition(&self, from: &str, to: &str) -> bool {
        self.class
            .transitions
            .iter()
            .any(|(a, b)| a == from && b == to)
    }

    pub fn transitions(&self) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.class
            .transitions
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn successors(&self, state: &str) -> impl Iterator<Item = &'a str> + '_ {
        let state = state.to_string();
        self.transitions()
            .filter(move |(a, _)| *a == state)
            .map(|(_, b)| b)
    }

    /// States reachable from `start` over the raw transition relation,
    /// `start` included.
    pub fn reachable_from(&self, start: &str) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::new();
        let mut stack = Vec::new();
        if let Some(s) = self.class.states.iter().find(|s| *s == start) {
            seen.insert(s.as_str());
            stack.push(s.as_str());
        }
        while let Some(q) = stack.pop() {
            for next in self.successors(q) {
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        seen
    }

    pub fn guards_on(&self, from: &str, to: &str) -> impl Iterator<Item = GoalGuard> + 'a {
        let (from, to) = (from.to_string(), to.to_string());
        self.class
            .guards
            .iter()
            .filter(move |g| g.from == from && g.to == to)
            .map(TransitionGuard::goal)
    }
}

/// Lower, goal-lower and upper bound of one direction of an association.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: u32,
    pub goal_lower: u32,
    pub upper: u32,
}

/// A binary association as written in the model document.
///
/// `*_a_per_b` bounds how many `class_a` objects each `class_b` object is
/// associated with; `*_b_per_a` is the opposite direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AssociationDecl {
    pub class_a: ClassId,
    pub class_b: ClassId,
    #[serde(rename = "lowerAperB")]
    pub lower_a_per_b: u32,
    #[serde(rename = "goalLowerAperB")]
    pub goal_lower_a_per_b: u32,
    #[serde(rename = "upperAperB")]
    pub upper_a_per_b: u32,
    #[serde(rename = "lowerBperA")]
    pub lower_b_per_a: u32,
    #[serde(rename = "goalLowerBperA")]
    pub goal_lower_b_per_a: u32,
    #[serde(rename = "upperBperA")]
    pub upper_b_per_a: u32,
}

impl AssociationDecl {
    pub fn a_per_b(&self) -> Bounds {
        Bounds {
            lower: self.lower_a_per_b,
            goal_lower: self.goal_lower_a_per_b,
            upper: self.upper_a_per_b,
        }
    }

    pub fn b_per_a(&self) -> Bounds {
        Bounds {
            lower: self.lower_b_per_a,
            goal_lower: self.goal_lower_b_per_a,
            upper: self.upper_b_per_a,
        }
    }

    /// The two directed constraints this association declares.
    pub fn constraints(&self) -> [CardinalityConstraint; 2] {
        [
            CardinalityConstraint::new(self.class_a.clone(), self.class_b.clone(), self.a_per_b()),
            CardinalityConstraint::new(self.class_b.clone(), self.class_a.clone(), self.b_per_a()),
        ]
    }
}

/// Each `target` object is associated with between `lower` and `upper`
/// `source` objects; at case termination with at least `goal_lower`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CardinalityConstraint {
    pub source: ClassId,
    pub target: ClassId,
    pub lower: u32,
    pub goal_lower: u32,
    pub upper: u32,
}

impl CardinalityConstraint {
    pub fn new(source: ClassId, target: ClassId, b: Bounds) -> Self {
        CardinalityConstraint {
            source,
            target,
            lower: b.lower,
            goal_lower: b.goal_lower,
            upper: b.upper,
        }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.lower,
            goal_lower: self.goal_lower,
            upper: self.upper,
        }
    }
}

/// `class[state]`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfiguration {
    pub class: ClassId,
    pub state: String,
}

impl fmt::Display for ObjectConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.class, self.state)
    }
}

/// Entry of an input or output set. `collection` marks a set read of all
/// associated objects in that configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoEntry {
    pub class: ClassId,
    pub state: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub collection: bool,
}

impl IoEntry {
    pub fn configuration(&self) -> ObjectConfiguration {
        ObjectConfiguration {
            class: self.class.clone(),
            state: self.state.clone(),
        }
    }
}

impl fmt::Display for IoEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.class, self.state)?;
        if self.collection {
            f.write_str("*")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IoSet(pub Vec<IoEntry>);

impl IoSet {
    pub fn entries(&self) -> &[IoEntry] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The entry for `class`; sets hold at most one entry per class.
    pub fn entry(&self, class: &ClassId) -> Option<&IoEntry> {
        self.0.iter().find(|e| &e.class == class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    Activity,
    Gateway,
    StartEvent,
}

fn default_io() -> Vec<IoSet> {
    vec![IoSet::default()]
}

fn is_default_io(v: &[IoSet]) -> bool {
    v.len() == 1 && v[0].is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Node {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: NodeKind,
    #[serde(default)]
    pub label: String,
    #[serde(default = "default_io", skip_serializing_if = "is_default_io")]
    pub input_sets: Vec<IoSet>,
    #[serde(default = "default_io", skip_serializing_if = "is_default_io")]
    pub output_sets: Vec<IoSet>,
}

impl Node {
    pub fn display_label(&self) -> &str {
        if self.label.is_empty() {
            &self.id
        } else {
            &self.label
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fragment {
    pub id: String,
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub flows: Vec<(String, String)>,
}

impl Fragment {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn predecessors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.flows
            .iter()
            .filter(move |(_, t)| t == id)
            .map(|(s, _)| s.as_str())
    }

    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.flows
            .iter()
            .filter(move |(s, _)| s == id)
            .map(|(_, t)| t.as_str())
    }

    pub fn incoming(&self, id: &str) -> Option<&(String, String)> {
        self.flows.iter().find(|(_, t)| t == id)
    }

    pub fn outgoing(&self, id: &str) -> Option<&(String, String)> {
        self.flows.iter().find(|(s, _)| s == id)
    }

    pub fn start_events(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::StartEvent)
    }

    /// A topological order of the node ids, or `None` if the control flow
    /// has a cycle (or references unknown nodes).
    pub fn topological_order(&self) -> Option<Vec<&str>> {
        let mut indeg: BTreeMap<&str, usize> =
            self.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
        for (s, t) in &self.flows {
            if !indeg.contains_key(s.as_str()) {
                return None;
            }
            *indeg.get_mut(t.as_str())? += 1;
        }
        let mut ready: Vec<&str> = self
            .nodes
            .iter()
            .map(|n| n.id.as_str())
            .filter(|id| indeg[id] == 0)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop() {
            order.push(n);
            for (s, t) in &self.flows {
                if s == n {
                    let d = indeg.get_mut(t.as_str())?;
                    *d -= 1;
                    if *d == 0 {
                        ready.push(t.as_str());
                    }
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataCondition(pub Vec<ObjectConfiguration>);

impl DataCondition {
    pub fn configurations(&self) -> &[ObjectConfiguration] {
        &self.0
    }
}

impl fmt::Display for DataCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// A complete case model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CaseModel {
    pub classes: Vec<ClassDecl>,
    #[serde(default)]
    pub constraints: Vec<AssociationDecl>,
    pub fragments: Vec<Fragment>,
    pub termination_conditions: Vec<DataCondition>,
}

impl CaseModel {
    pub fn class(&self, id: &ClassId) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| &c.name == id)
    }

    pub fn class_ids(&self) -> impl Iterator<Item = &ClassId> {
        self.classes.iter().map(|c| &c.name)
    }

    pub fn case_class(&self) -> Option<&ClassId> {
        self.classes
            .iter()
            .find(|c| c.is_case_class)
            .map(|c| &c.name)
    }

    pub fn olc(&self, id: &ClassId) -> Option<ObjectLifeCycle<'_>> {
        self.class(id).map(ClassDecl::olc)
    }

    pub fn has_configuration(&self, class: &ClassId, state: &str) -> bool {
        self.olc(class).is_some_and(|olc| olc.has_state(state))
    }

    /// All directed cardinality constraints declared by the model.
    pub fn constraints(&self) -> Vec<CardinalityConstraint> {
        self.constraints
            .iter()
            .flat_map(AssociationDecl::constraints)
            .collect()
    }

    /// Bounds on how many `source` objects each `target` object is
    /// associated with. All zero if the classes are not associated.
    pub fn bounds(&self, source: &ClassId, target: &ClassId) -> Bounds {
        for a in &self.constraints {
            if &a.class_a == source && &a.class_b == target {
                return a.a_per_b();
            }
            if &a.class_b == source && &a.class_a == target {
                return a.b_per_a();
            }
        }
        Bounds::default()
    }

    pub fn lower(&self, source: &ClassId, target: &ClassId) -> u32 {
        self.bounds(source, target).lower
    }

    pub fn goal_lower(&self, source: &ClassId, target: &ClassId) -> u32 {
        self.bounds(source, target).goal_lower
    }

    pub fn upper(&self, source: &ClassId, target: &ClassId) -> u32 {
        self.bounds(source, target).upper
    }

    pub fn associated(&self, a: &ClassId, b: &ClassId) -> bool {
        a != b && (self.upper(a, b) > 0 || self.upper(b, a) > 0)
    }

    /// Serializes the model back into its document form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case models always serialize")
    }
}

/// All (input set, output set) index pairs of an activity, or the output
/// sets of a start event paired with an empty input set. Other nodes yield
/// nothing.
pub(crate) fn io_pairs(node: &Node) -> Vec<(Option<usize>, usize, &IoSet, &IoSet)> {
    static EMPTY: IoSet = IoSet(Vec::new());
    match node.kind {
        NodeKind::Gateway => Vec::new(),
        NodeKind::StartEvent => node
            .output_sets
            .iter()
            .enumerate()
            .map(|(o, out)| (None, o, &EMPTY, out))
            .collect(),
        NodeKind::Activity => {
            let mut v = Vec::new();
            for (i, input) in node.input_sets.iter().enumerate() {
                for (o, out) in node.output_sets.iter().enumerate() {
                    v.push((Some(i), o, input, out));
                }
            }
            v
        }
    }
}

/// How an activity treats one class for a given input/output set pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataEffect<'a> {
    /// Singleton read; the token goes back to the place it came from.
    Read(&'a IoEntry),
    /// Singleton moved from one state to another.
    Update { from: &'a IoEntry, to: &'a IoEntry },
    /// Set read qualified by a reference object, reproduced in place.
    CollectionRead(&'a IoEntry),
    /// Set moved from one state to another.
    CollectionUpdate { from: &'a IoEntry, to: &'a IoEntry },
    /// A fresh object.
    Create(&'a IoEntry),
}

/// Classifies every class mentioned by an input/output set pair.
///
/// A class only in the output is created. A singleton input with a singleton
/// output is read (same state) or updated (different state). A collection
/// input with a collection output is a set read or set update. A collection
/// input with a singleton output reads the set and creates one new object.
/// Classes only in the input are read. Returns `Err` with the offending
/// class when an output collection has no matching input collection, or a
/// singleton input is paired with an output collection.
pub fn data_effects<'a>(
    input: &'a IoSet,
    output: &'a IoSet,
) -> Result<Vec<(ClassId, Vec<DataEffect<'a>>)>, ClassId> {
    let mut classes: Vec<&ClassId> = input.0.iter().map(|e| &e.class).collect();
    for e in &output.0 {
        if !classes.contains(&&e.class) {
            classes.push(&e.class);
        }
    }
    let mut out = Vec::new();
    for class in classes {
        let i = input.entry(class);
        let o = output.entry(class);
        let effects = match (i, o) {
            (Some(i), None) if i.collection => vec![DataEffect::CollectionRead(i)],
            (Some(i), None) => vec![DataEffect::Read(i)],
            (None, Some(o)) if !o.collection => vec![DataEffect::Create(o)],
            (Some(i), Some(o)) => match (i.collection, o.collection) {
                (false, false) if i.state == o.state => vec![DataEffect::Read(i)],
                (false, false) => vec![DataEffect::Update { from: i, to: o }],
                (true, true) if i.state == o.state => vec![DataEffect::CollectionRead(i)],
                (true, true) => vec![DataEffect::CollectionUpdate { from: i, to: o }],
                (true, false) => vec![DataEffect::CollectionRead(i), DataEffect::Create(o)],
                (false, true) => return Err(class.clone()),
            },
            _ => return Err(class.clone()),
        };
        out.push((class.clone(), effects));
    }
    Ok(out)
}
