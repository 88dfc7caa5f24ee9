//! Goal-cardinality guards on object life cycles.
//!
//! Associations between a supporter and its dependents can only be added
//! while the supporter sits in certain states. Once an OLC transition leaves
//! those states for good, the goal lower bound has to hold already, so the
//! transition is guarded.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{data_effects, io_pairs, CaseModel, ClassId, DataEffect, TransitionGuard};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
}

/// States of `supporter` in which some activity or start event creates a
/// `dependent` while reading, updating or co-creating the supporter.
pub fn supporting_states(
    m: &CaseModel,
    supporter: &ClassId,
    dependent: &ClassId,
) -> Result<BTreeSet<String>, PreprocessError> {
    for c in [supporter, dependent] {
        if m.class(c).is_none() {
            return Err(PreprocessError::UnknownClass(c.clone()));
        }
    }
    let mut states = BTreeSet::new();
    for n in m.fragments.iter().flat_map(|f| &f.nodes) {
        for (_, _, input, output) in io_pairs(n) {
            let Ok(effects) = data_effects(input, output) else {
                continue;
            };
            let creates_dependent = effects.iter().any(|(c, e)| {
                c == dependent && e.iter().any(|e| matches!(e, DataEffect::Create(_)))
            });
            if !creates_dependent {
                continue;
            }
            if let Some(e) = input.entry(supporter) {
                states.insert(e.state.clone());
            }
            for (c, effs) in &effects {
                if c != supporter {
                    continue;
                }
                for e in effs {
                    if let DataEffect::Create(e) = e {
                        states.insert(e.state.clone());
                    }
                }
            }
        }
    }
    Ok(states)
}

/// Attaches goal guards to every OLC transition that leaves the supporting
/// states of a (supporter, dependent) pair for good. Idempotent; existing
/// guards are kept.
pub fn augment_goal_guards(m: &CaseModel) -> CaseModel {
    let mut out = m.clone();
    let classes: Vec<ClassId> = m.class_ids().cloned().collect();
    for supporter in &classes {
        for dependent in &classes {
            if supporter == dependent {
                continue;
            }
            let goal = m.goal_lower(dependent, supporter);
            if goal == 0 {
                continue;
            }
            let supporting =
                supporting_states(m, supporter, dependent).expect("classes come from the model");
            if supporting.is_empty() {
                continue;
            }
            let olc = m.olc(supporter).expect("declared class");
            let mut added = Vec::new();
            for (from, to) in olc.transitions() {
                if !supporting.contains(from) {
                    continue;
                }
                let reopens = olc
                    .reachable_from(to)
                    .iter()
                    .any(|q| supporting.contains(*q));
                if !reopens {
                    added.push(TransitionGuard {
                        from: from.to_string(),
                        to: to.to_string(),
                        dependent_class: dependent.clone(),
                        min_count: goal,
                    });
                }
            }
            let decl = out
                .classes
                .iter_mut()
                .find(|c| &c.name == supporter)
                .expect("declared class");
            for g in added {
                if !decl.guards.contains(&g) {
                    decl.guards.push(g);
                }
            }
        }
    }
    for c in &mut out.classes {
        c.guards.sort();
    }
    out
}
