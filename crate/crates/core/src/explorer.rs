//! Bounded breadth-first exploration of the reachable markings of a net.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpn::{
    enabled_bindings, fire_unchecked, initial_marking, Binding, ColorValue, Marking, Net, ObjectId,
    PlaceRole,
};
use crate::model::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InvariantKind {
    /// Exactly one `Unit` token across `i`, `r` and `o`.
    AbstractState,
    /// Counters equal the number of objects of their class, numbered densely.
    CounterSoundness,
    /// Every associated object is a known object.
    AssociationsInObjects,
    /// Every object sits on exactly one configuration place.
    ConfigurationUniqueness,
    /// No object has more partners of a class than the upper bound allows.
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InvariantViolation {
    pub kind: InvariantKind,
    pub message: String,
}

impl InvariantViolation {
    fn new(kind: InvariantKind, message: String) -> Self {
        InvariantViolation { kind, message }
    }
}

/// Checks the structural invariants every reachable marking must satisfy.
/// Object-level checks only apply while the objects token exists, i.e.
/// before termination consumed it.
pub fn check_invariants(net: &Net, m: &Marking) -> Vec<InvariantViolation> {
    use InvariantKind::*;
    let mut out = Vec::new();
    let units: usize = [net.initial(), net.running(), net.final_place()]
        .iter()
        .map(|p| m.count(*p, &ColorValue::Unit))
        .sum();
    if units != 1 || m.total_tokens() == 0 {
        out.push(InvariantViolation::new(
            AbstractState,
            format!("{units} Unit tokens across i, r and o"),
        ));
    }

    let objects = m.tokens(net.objects());
    let Some(objects) = objects.first().and_then(ColorValue::as_id_set) else {
        return out;
    };
    if m.tokens(net.objects()).len() > 1 {
        out.push(InvariantViolation::new(
            CounterSoundness,
            "more than one objects token".into(),
        ));
    }

    for (k, p) in net.places.iter().enumerate() {
        if let PlaceRole::Counter { class } = &p.role {
            let Some(n) = m.tokens(k).first().and_then(ColorValue::as_int) else {
                out.push(InvariantViolation::new(
                    CounterSoundness,
                    format!("counter of {class} missing"),
                ));
                continue;
            };
            let ids: Vec<u32> = objects
                .iter()
                .filter(|o| &o.class == class)
                .map(|o| o.index)
                .collect();
            let dense = ids.iter().copied().eq(0..n as u32);
            if !dense {
                out.push(InvariantViolation::new(
                    CounterSoundness,
                    format!("counter of {class} is {n} but objects are {ids:?}"),
                ));
            }
        }
    }

    let assoc = m
        .tokens(net.associations())
        .first()
        .and_then(ColorValue::as_assoc_set);
    if let Some(assoc) = assoc {
        for a in assoc {
            let (x, y) = a.ends();
            for o in [x, y] {
                if !objects.contains(o) {
                    out.push(InvariantViolation::new(
                        AssociationsInObjects,
                        format!("{o} is associated but not an object"),
                    ));
                }
            }
        }
        let mut partners: BTreeMap<(&ObjectId, &ClassId), u32> = BTreeMap::new();
        for a in assoc {
            let (x, y) = a.ends();
            *partners.entry((x, &y.class)).or_default() += 1;
            *partners.entry((y, &x.class)).or_default() += 1;
        }
        for ((o, c), n) in partners {
            let upper = net.upper(c, &o.class).unwrap_or(0);
            if n > upper {
                out.push(InvariantViolation::new(
                    UpperBound,
                    format!("{o} has {n} associated {c} objects, upper bound {upper}"),
                ));
            }
        }
    }

    let mut seen: BTreeMap<&ObjectId, usize> = BTreeMap::new();
    for (k, p) in net.places.iter().enumerate() {
        if matches!(p.role, PlaceRole::Config { .. }) {
            for t in m.tokens(k) {
                if let Some(o) = t.as_id() {
                    *seen.entry(o).or_default() += 1;
                }
            }
        }
    }
    for o in objects {
        let n = seen.get(o).copied().unwrap_or(0);
        if n != 1 {
            out.push(InvariantViolation::new(
                ConfigurationUniqueness,
                format!("{o} is on {n} configuration places"),
            ));
        }
    }
    for (o, _) in seen.iter().filter(|(o, _)| !objects.contains(**o)) {
        out.push(InvariantViolation::new(
            ConfigurationUniqueness,
            format!("{o} is on a configuration place but not an object"),
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Limits {
    pub max_states: usize,
    /// Markings at this depth are visited but not expanded.
    pub max_depth: usize,
    /// Generate the successors of a BFS level on the rayon pool.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 100_000,
            max_depth: usize::MAX,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WitnessStep {
    pub transition_id: String,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateViolation {
    pub state: usize,
    pub violation: InvariantViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub states_visited: usize,
    pub edges: usize,
    pub termination_reachable: bool,
    /// Non-final markings without successors.
    pub deadlocks: usize,
    pub max_depth_reached: usize,
    pub violations: Vec<StateViolation>,
    pub truncated: bool,
    /// Shortest firing sequence to the first terminated marking found.
    pub witness: Option<Vec<WitnessStep>>,
}

type Successor = (Marking, usize, Binding);

fn successors(net: &Net, m: &Marking) -> Vec<Successor> {
    enabled_bindings(net, m)
        .into_iter()
        .map(|e| (fire_unchecked(net, m, e.transition, &e.binding), e.transition, e.binding))
        .collect()
}

/// Explores from the initial marking. The report does not depend on
/// `limits.parallel`.
pub fn explore(net: &Net, limits: Limits) -> Report {
    let init = initial_marking(net);
    let mut index: HashMap<Marking, usize> = HashMap::new();
    // (parent, transition, binding) per state; the root has none.
    let mut parent: Vec<Option<(usize, usize, Binding)>> = vec![None];
    let mut states = vec![init.clone()];
    index.insert(init, 0);
    let mut report = Report {
        states_visited: 0,
        edges: 0,
        termination_reachable: false,
        deadlocks: 0,
        max_depth_reached: 0,
        violations: Vec::new(),
        truncated: false,
        witness: None,
    };
    let final_place = net.final_place();
    let mut first_final = None;
    let mut frontier = vec![0usize];
    let mut depth = 0;
    loop {
        for &s in &frontier {
            for v in check_invariants(net, &states[s]) {
                report.violations.push(StateViolation {
                    state: s,
                    violation: v,
                });
            }
            if first_final.is_none() && states[s].contains(final_place, &ColorValue::Unit) {
                first_final = Some(s);
            }
        }
        report.max_depth_reached = depth;
        if frontier.is_empty() {
            break;
        }
        let expanded: Vec<Vec<Successor>> = if limits.parallel {
            frontier
                .par_iter()
                .map(|&s| successors(net, &states[s]))
                .collect()
        } else {
            frontier.iter().map(|&s| successors(net, &states[s])).collect()
        };
        if depth >= limits.max_depth {
            if expanded.iter().any(|v| !v.is_empty()) {
                report.truncated = true;
            }
            break;
        }
        let mut next = Vec::new();
        for (&s, succ) in frontier.iter().zip(expanded) {
            if succ.is_empty() && !states[s].contains(final_place, &ColorValue::Unit) {
                report.deadlocks += 1;
            }
            for (m, t, b) in succ {
                report.edges += 1;
                if index.contains_key(&m) {
                    continue;
                }
                if states.len() >= limits.max_states {
                    report.truncated = true;
                    continue;
                }
                index.insert(m.clone(), states.len());
                next.push(states.len());
                states.push(m);
                parent.push(Some((s, t, b)));
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
        depth += 1;
    }
    report.states_visited = states.len();
    report.termination_reachable = first_final.is_some();
    report.witness = first_final.map(|mut s| {
        let mut steps = Vec::new();
        while let Some((p, t, b)) = &parent[s] {
            steps.push(WitnessStep {
                transition_id: net.transitions[*t].id.clone(),
                binding: b.clone(),
            });
            s = *p;
        }
        steps.reverse();
        steps
    });
    report
}
