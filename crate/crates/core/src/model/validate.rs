use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{data_effects, io_pairs, CaseModel, ClassId, DataEffect, Fragment, IoSet, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    // domain model
    NoClasses,
    DuplicateClass,
    CaseClassCount,
    UnknownClass,
    SelfAssociation,
    DuplicateAssociation,
    BoundsOrder,
    UpperSymmetry,
    NonExistential,
    ManyToMany,
    DuplicateState,
    UnknownState,
    GuardOnUnknownTransition,
    GuardMismatch,
    // fragments
    DuplicateFragment,
    DuplicateNode,
    NoActivities,
    UnknownNode,
    Acyclicity,
    ActivityIncomingCount,
    OutgoingCount,
    GatewayWithoutPredecessor,
    FlowIntoStartEvent,
    StartEventCount,
    StartActivityCount,
    EmptySetList,
    UnexpectedDataSets,
    UnknownConfiguration,
    DuplicateClassInSet,
    // case model
    DependentWithoutSupporter,
    SetReadRequired,
    ReferenceObject,
    CollectionShape,
    IllegalStateChange,
    NoTerminationCondition,
    EmptyDataCondition,
}

/// A broken well-formedness rule. Validation only reports; it never changes
/// the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// What the rule was checked on, e.g. `Conference/Paper` or `fb/submit_paper`.
    pub subject: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            code,
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} [{}]: {}", self.code, self.subject, self.message)
    }
}

fn pair(a: &ClassId, b: &ClassId) -> String {
    format!("{a}/{b}")
}

/// Checks the domain model and the object life cycles: unique classes, one
/// case class, bound ordering, symmetric associations, existential
/// associations and no many-to-many associations.
pub fn validate_domain_model(m: &CaseModel) -> Vec<Violation> {
    use ViolationCode::*;
    let mut v = Vec::new();
    if m.classes.is_empty() {
        v.push(Violation::new(NoClasses, "classes", "the domain model declares no classes"));
    }
    let mut names = BTreeSet::new();
    for c in &m.classes {
        if !names.insert(&c.name) {
            v.push(Violation::new(DuplicateClass, c.name.as_str(), "class declared twice"));
        }
    }
    let case_classes = m.classes.iter().filter(|c| c.is_case_class).count();
    if case_classes != 1 && !m.classes.is_empty() {
        v.push(Violation::new(
            CaseClassCount,
            "classes",
            format!("exactly one case class required, found {case_classes}"),
        ));
    }

    let mut seen_pairs = BTreeSet::new();
    for a in &m.constraints {
        let subject = pair(&a.class_a, &a.class_b);
        for c in [&a.class_a, &a.class_b] {
            if m.class(c).is_none() {
                v.push(Violation::new(UnknownClass, &subject, format!("class {c} is not declared")));
            }
        }
        if a.class_a == a.class_b {
            v.push(Violation::new(
                SelfAssociation,
                &subject,
                "associations must link two distinct classes",
            ));
            continue;
        }
        let key = if a.class_a < a.class_b {
            (&a.class_a, &a.class_b)
        } else {
            (&a.class_b, &a.class_a)
        };
        if !seen_pairs.insert(key) {
            v.push(Violation::new(
                DuplicateAssociation,
                &subject,
                "at most one association per pair of classes",
            ));
        }
        for c in a.constraints() {
            if !(c.lower <= c.goal_lower && c.goal_lower <= c.upper) {
                v.push(Violation::new(
                    BoundsOrder,
                    pair(&c.source, &c.target),
                    format!(
                        "bounds must satisfy lower <= goal lower <= upper, got {} / {} / {}",
                        c.lower, c.goal_lower, c.upper
                    ),
                ));
            }
        }
        let (ab, ba) = (a.a_per_b(), a.b_per_a());
        if (ab.upper > 0) != (ba.upper > 0) {
            v.push(Violation::new(
                UpperSymmetry,
                &subject,
                "an upper bound is positive in one direction only",
            ));
        }
        if (ab.upper > 0 || ba.upper > 0) && ab.lower == 0 && ba.lower == 0 {
            v.push(Violation::new(
                NonExistential,
                &subject,
                "association is not existential: one direction needs a positive lower bound",
            ));
        }
        if (ab.upper > 1 && ba.upper != 1) || (ba.upper > 1 && ab.upper != 1) {
            v.push(Violation::new(
                ManyToMany,
                &subject,
                format!(
                    "many-to-many association with upper bounds {} and {}; \
                     reify it into an intermediate class with one-to-many associations",
                    ab.upper, ba.upper
                ),
            ));
        }
    }

    for c in &m.classes {
        let mut states = BTreeSet::new();
        for s in &c.states {
            if !states.insert(s) {
                v.push(Violation::new(
                    DuplicateState,
                    format!("{}[{s}]", c.name),
                    "state declared twice",
                ));
            }
        }
        for (from, to) in &c.transitions {
            for s in [from, to] {
                if !states.contains(s) {
                    v.push(Violation::new(
                        UnknownState,
                        format!("{}[{s}]", c.name),
                        format!("transition {from} -> {to} uses an undeclared state"),
                    ));
                }
            }
        }
        for g in &c.guards {
            let subject = format!("{}: {} -> {}", c.name, g.from, g.to);
            if !c.olc().has_transition(&g.from, &g.to) {
                v.push(Violation::new(
                    GuardOnUnknownTransition,
                    &subject,
                    "guard attached to a transition the life cycle does not contain",
                ));
            }
            let expected = m.goal_lower(&g.dependent_class, &c.name);
            if expected != g.min_count {
                v.push(Violation::new(
                    GuardMismatch,
                    &subject,
                    format!(
                        "guard requires {} {} objects but the goal lower bound is {expected}",
                        g.min_count, g.dependent_class
                    ),
                ));
            }
        }
    }
    v
}

/// Checks the structural rules of every fragment and that every input and
/// output entry names a declared object configuration.
pub fn validate_fragments(m: &CaseModel) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut ids = BTreeSet::new();
    for f in &m.fragments {
        if !ids.insert(&f.id) {
            v.push(Violation::new(
                ViolationCode::DuplicateFragment,
                &f.id,
                "fragment id used twice",
            ));
        }
        validate_fragment(m, f, &mut v);
    }
    v
}

fn validate_fragment(m: &CaseModel, f: &Fragment, v: &mut Vec<Violation>) {
    use ViolationCode::*;
    let at = |n: &str| format!("{}/{n}", f.id);

    let mut node_ids = BTreeSet::new();
    for n in &f.nodes {
        if !node_ids.insert(n.id.as_str()) {
            v.push(Violation::new(DuplicateNode, at(&n.id), "node id used twice"));
        }
    }
    if !f.nodes.iter().any(|n| n.kind == NodeKind::Activity) {
        v.push(Violation::new(NoActivities, &f.id, "a fragment needs at least one activity"));
    }
    let mut flows_ok = true;
    for (s, t) in &f.flows {
        for n in [s, t] {
            if !node_ids.contains(n.as_str()) {
                flows_ok = false;
                v.push(Violation::new(
                    UnknownNode,
                    at(n),
                    format!("flow {s} -> {t} references an undeclared node"),
                ));
            }
        }
    }
    if flows_ok && f.topological_order().is_none() {
        v.push(Violation::new(Acyclicity, &f.id, "control flow contains a cycle"));
    }

    let starts = f.start_events().count();
    if starts > 1 {
        v.push(Violation::new(
            StartEventCount,
            &f.id,
            format!("at most one start event allowed, found {starts}"),
        ));
    }
    for n in &f.nodes {
        let indeg = f.predecessors(&n.id).count();
        let outdeg = f.successors(&n.id).count();
        match n.kind {
            NodeKind::Activity if indeg > 1 => v.push(Violation::new(
                ActivityIncomingCount,
                at(&n.id),
                format!("activities have at most one incoming flow, found {indeg}"),
            )),
            NodeKind::Gateway if indeg == 0 => v.push(Violation::new(
                GatewayWithoutPredecessor,
                at(&n.id),
                "fragments must not start with a gateway",
            )),
            NodeKind::StartEvent if indeg > 0 => v.push(Violation::new(
                FlowIntoStartEvent,
                at(&n.id),
                "start events cannot have incoming flows",
            )),
            _ => {}
        }
        if matches!(n.kind, NodeKind::Activity | NodeKind::StartEvent) && outdeg > 1 {
            v.push(Violation::new(
                OutgoingCount,
                at(&n.id),
                format!("at most one outgoing flow allowed, found {outdeg}"),
            ));
        }
    }
    if starts == 0 {
        let initial = f
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Activity && f.predecessors(&n.id).next().is_none())
            .count();
        if initial != 1 {
            v.push(Violation::new(
                StartActivityCount,
                &f.id,
                format!(
                    "a fragment without start event must begin with exactly one activity, found {initial}"
                ),
            ));
        }
    }

    for n in &f.nodes {
        let subject = at(&n.id);
        let default_io = |sets: &[IoSet]| sets.len() == 1 && sets[0].is_empty();
        match n.kind {
            NodeKind::Gateway => {
                if !default_io(&n.input_sets) || !default_io(&n.output_sets) {
                    v.push(Violation::new(
                        UnexpectedDataSets,
                        &subject,
                        "gateways neither read nor write data",
                    ));
                }
                continue;
            }
            NodeKind::StartEvent if !default_io(&n.input_sets) => v.push(Violation::new(
                UnexpectedDataSets,
                &subject,
                "start events have no input sets",
            )),
            _ => {}
        }
        for (kind, sets) in [("input", &n.input_sets), ("output", &n.output_sets)] {
            if sets.is_empty() {
                v.push(Violation::new(
                    EmptySetList,
                    &subject,
                    format!("{kind} set list is empty; use a single empty set instead"),
                ));
            }
            for set in sets.iter() {
                let mut classes = BTreeSet::new();
                for e in set.entries() {
                    if !m.has_configuration(&e.class, &e.state) {
                        v.push(Violation::new(
                            UnknownConfiguration,
                            &subject,
                            format!("{kind} entry {e} is not a declared object configuration"),
                        ));
                    }
                    if !classes.insert(&e.class) {
                        v.push(Violation::new(
                            DuplicateClassInSet,
                            &subject,
                            format!("{kind} set mentions class {} more than once", e.class),
                        ));
                    }
                }
            }
        }
    }
}

/// Case-model well-formedness: dependents are created in the context of
/// their supporters, set reads where lower bounds exceed one, a single
/// reference object per set read, and state changes that follow the object
/// life cycles. Also checks the termination conditions.
pub fn validate_case_model(m: &CaseModel) -> Vec<Violation> {
    use ViolationCode::*;
    let mut v = Vec::new();
    let classes: Vec<&ClassId> = m.class_ids().collect();

    for f in &m.fragments {
        for n in &f.nodes {
            let subject = format!("{}/{}", f.id, n.id);
            for input in n.input_sets.iter().filter(|_| n.kind == NodeKind::Activity) {
                for e in input.entries().iter().filter(|e| e.collection) {
                    let refs: Vec<_> = input
                        .entries()
                        .iter()
                        .filter(|r| !r.collection && m.upper(&e.class, &r.class) > 1)
                        .collect();
                    if refs.len() != 1 {
                        v.push(Violation::new(
                            ReferenceObject,
                            &subject,
                            format!(
                                "set read of {} needs exactly one reference object, found {}",
                                e.class,
                                refs.len()
                            ),
                        ));
                    }
                }
            }
            for (i, o, input, output) in io_pairs(n) {
                let variant = match i {
                    Some(i) => format!("{subject} (in{i}/out{o})"),
                    None => format!("{subject} (out{o})"),
                };
                let effects = match data_effects(input, output) {
                    Ok(e) => e,
                    Err(class) => {
                        v.push(Violation::new(
                            CollectionShape,
                            &variant,
                            format!(
                                "{class} mixes a singleton and a collection, or writes a collection it never read"
                            ),
                        ));
                        continue;
                    }
                };
                let created: BTreeSet<&ClassId> = effects
                    .iter()
                    .filter(|(_, e)| e.iter().any(|e| matches!(e, DataEffect::Create(_))))
                    .map(|(c, _)| c)
                    .collect();
                for dependent in &created {
                    for supporter in classes.iter().filter(|c| **c != *dependent) {
                        let lower = m.lower(supporter, dependent);
                        if lower == 0 {
                            continue;
                        }
                        let read = input.entry(supporter);
                        if read.is_none() && !created.contains(supporter) {
                            v.push(Violation::new(
                                DependentWithoutSupporter,
                                &variant,
                                format!(
                                    "creates {dependent} without reading or co-creating its supporter {supporter}"
                                ),
                            ));
                        } else if lower > 1 && !read.is_some_and(|e| e.collection) {
                            v.push(Violation::new(
                                SetReadRequired,
                                &variant,
                                format!(
                                    "each {dependent} needs at least {lower} {supporter} objects; read them as a collection"
                                ),
                            ));
                        }
                    }
                }
                for (class, effs) in &effects {
                    for eff in effs {
                        let (from, to) = match eff {
                            DataEffect::Update { from, to }
                            | DataEffect::CollectionUpdate { from, to } => (from, to),
                            _ => continue,
                        };
                        let legal = m
                            .olc(class)
                            .is_some_and(|olc| olc.has_transition(&from.state, &to.state));
                        if !legal {
                            v.push(Violation::new(
                                IllegalStateChange,
                                &variant,
                                format!(
                                    "{class}: {} -> {} is not a transition of the object life cycle",
                                    from.state, to.state
                                ),
                            ));
                        }
                    }
                }
            }
        }
    }

    if m.termination_conditions.is_empty() {
        v.push(Violation::new(
            NoTerminationCondition,
            "terminationConditions",
            "at least one termination condition is required",
        ));
    }
    for (i, t) in m.termination_conditions.iter().enumerate() {
        let subject = format!("termination/{i}");
        if t.configurations().is_empty() {
            v.push(Violation::new(EmptyDataCondition, &subject, "data condition is empty"));
        }
        for c in t.configurations() {
            if !m.has_configuration(&c.class, &c.state) {
                v.push(Violation::new(
                    UnknownConfiguration,
                    &subject,
                    format!("{c} is not a declared object configuration"),
                ));
            }
        }
    }
    v
}

/// Runs every validator in order. Case-model rules are only checked when the
/// domain model and the fragments are individually valid.
pub fn validate_all(m: &CaseModel) -> Vec<Violation> {
    let mut v = validate_domain_model(m);
    v.extend(validate_fragments(m));
    if v.is_empty() {
        v.extend(validate_case_model(m));
    }
    v
}

/// Violation codes grouped, for compact reporting.
pub fn summarize(v: &[Violation]) -> BTreeMap<ViolationCode, usize> {
    let mut out = BTreeMap::new();
    for x in v {
        *out.entry(x.code).or_default() += 1;
    }
    out
}
