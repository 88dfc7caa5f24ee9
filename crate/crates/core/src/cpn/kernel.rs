use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{
    ArcPattern, Association, Binding, ColorValue, GuardAtom, Marking, Net, ObjectId, Output,
    PlaceRole, TokenExpr, Transition, TransitionIdx,
};

/// An enabled transition together with one satisfying binding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Enabled {
    pub transition: TransitionIdx,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("transition {0} is not enabled under the given binding")]
    NotEnabled(String),
    #[error("no transition with index {0}")]
    UnknownTransition(TransitionIdx),
}

/// One `Unit` on the initial place, every counter at zero, and empty
/// objects and associations sets.
pub fn initial_marking(net: &Net) -> Marking {
    let mut m = Marking::empty(net.places.len());
    for (i, p) in net.places.iter().enumerate() {
        match p.role {
            PlaceRole::Initial => m.add(i, ColorValue::Unit),
            PlaceRole::Counter { .. } => m.add(i, ColorValue::Int(0)),
            PlaceRole::Objects => m.add(i, ColorValue::IdSet(BTreeSet::new())),
            PlaceRole::Associations => m.add(i, ColorValue::AssocSet(BTreeSet::new())),
            _ => {}
        }
    }
    m
}

/// Every enabled (transition, binding) pair, ordered by transition index and
/// then by binding.
pub fn enabled_bindings(net: &Net, m: &Marking) -> Vec<Enabled> {
    (0..net.transitions.len())
        .flat_map(|t| {
            enabled_for(net, m, t)
                .into_iter()
                .map(move |binding| Enabled { transition: t, binding })
        })
        .collect()
}

/// Sorted, de-duplicated bindings under which transition `t` is enabled.
pub fn enabled_for(net: &Net, m: &Marking, t: TransitionIdx) -> Vec<Binding> {
    let transition = &net.transitions[t];
    let assoc = associations_of(net, m);
    let search = Search::new(net, m, transition, &assoc);
    let mut out = Vec::new();
    if search.check_stage(usize::MAX, &Binding::default()) {
        search.extend(0, &mut Binding::default(), &mut Vec::new(), &mut out);
    }
    out.sort();
    out.dedup();
    out
}

/// Fires `t` under `b` after checking that the pair is enabled.
pub fn fire(net: &Net, m: &Marking, t: TransitionIdx, b: &Binding) -> Result<Marking, FireError> {
    let transition = net
        .transitions
        .get(t)
        .ok_or(FireError::UnknownTransition(t))?;
    if !enabled_for(net, m, t).contains(b) {
        return Err(FireError::NotEnabled(transition.id.clone()));
    }
    Ok(fire_unchecked(net, m, t, b))
}

/// Fires without re-checking enablement. The caller guarantees that `b`
/// came from [`enabled_for`] on the same marking.
pub fn fire_unchecked(net: &Net, m: &Marking, t: TransitionIdx, b: &Binding) -> Marking {
    let transition = &net.transitions[t];
    let mut next = m.clone();
    for arc in &transition.arcs {
        match arc {
            ArcPattern::Test { .. } => {}
            ArcPattern::CollectionBind { place, set_var, .. } => {
                for o in b.get(set_var).map(ColorValue::objects).unwrap_or_default() {
                    next.remove(*place, &ColorValue::Id(o.clone()));
                }
            }
            ArcPattern::Single { place, var }
            | ArcPattern::CounterTake { place, var, .. }
            | ArcPattern::SetTake { place, var } => {
                if let Some(v) = b.get(var) {
                    next.remove(*place, v);
                }
            }
        }
    }

    let mut scope = b.clone();
    let mut created = Vec::new();
    for out in &transition.outputs {
        if let Output::FreshId { class, var, .. } = out {
            let index = counter_value(transition, b, class);
            let id = ObjectId {
                class: class.clone(),
                index: index as u32,
            };
            scope.insert(var.clone(), ColorValue::Id(id.clone()));
            created.push(id);
        }
    }
    let mut new_assocs = BTreeSet::new();
    for out in &transition.outputs {
        if let Output::FreshId {
            var,
            associate_with,
            ..
        } = out
        {
            let fresh = scope.get(var).and_then(ColorValue::as_id).cloned();
            let Some(fresh) = fresh else { continue };
            for partner_var in associate_with {
                for o in scope.get(partner_var).map(ColorValue::objects).unwrap_or_default() {
                    if let Some(a) = Association::new(fresh.clone(), o.clone()) {
                        new_assocs.insert(a);
                    }
                }
            }
        }
    }

    for out in &transition.outputs {
        match out {
            Output::Produce { place, value } => match value {
                TokenExpr::Unit => next.add(*place, ColorValue::Unit),
                TokenExpr::Var(v) => {
                    if let Some(val) = scope.get(v) {
                        next.add(*place, val.clone());
                    }
                }
                TokenExpr::Each(v) => {
                    for o in scope.get(v).map(ColorValue::objects).unwrap_or_default() {
                        next.add(*place, ColorValue::Id(o.clone()));
                    }
                }
            },
            Output::FreshId { var, place, .. } => {
                if let Some(val) = scope.get(var) {
                    next.add(*place, val.clone());
                }
            }
            Output::CounterPut { place, var } => {
                let n = b.get(var).and_then(ColorValue::as_int).unwrap_or(0);
                next.add(*place, ColorValue::Int(n + 1));
            }
            Output::SetPut { place, var } => {
                let value = match (&net.places[*place].role, b.get(var)) {
                    (PlaceRole::Objects, Some(ColorValue::IdSet(s))) => {
                        let mut s = s.clone();
                        s.extend(created.iter().cloned());
                        ColorValue::IdSet(s)
                    }
                    (PlaceRole::Associations, Some(ColorValue::AssocSet(s))) => {
                        let mut s = s.clone();
                        s.extend(new_assocs.iter().cloned());
                        ColorValue::AssocSet(s)
                    }
                    (_, Some(v)) => v.clone(),
                    (_, None) => continue,
                };
                next.add(*place, value);
            }
            Output::EmitCf {
                place,
                base,
                assign,
            } => {
                let mut map: BTreeMap<_, _> = match base.as_ref().and_then(|v| scope.get(v)) {
                    Some(ColorValue::CfMap(m)) => m.clone(),
                    _ => net.classes.iter().map(|c| (c.clone(), None)).collect(),
                };
                for (class, var) in assign {
                    if let Some(ColorValue::Id(o)) = scope.get(var) {
                        map.insert(class.clone(), Some(o.clone()));
                    }
                }
                next.add(*place, ColorValue::CfMap(map));
            }
        }
    }
    next
}

fn counter_value(t: &Transition, b: &Binding, class: &crate::model::ClassId) -> u64 {
    t.arcs
        .iter()
        .find_map(|a| match a {
            ArcPattern::CounterTake { class: c, var, .. } if c == class => {
                b.get(var).and_then(ColorValue::as_int)
            }
            _ => None,
        })
        .unwrap_or(0)
}

fn associations_of(net: &Net, m: &Marking) -> BTreeSet<Association> {
    m.tokens(net.associations())
        .iter()
        .find_map(ColorValue::as_assoc_set)
        .cloned()
        .unwrap_or_default()
}

/// Depth-first binding search over the arcs of one transition. Guard atoms
/// are checked as soon as all their variables are bound.
struct Search<'a> {
    net: &'a Net,
    m: &'a Marking,
    t: &'a Transition,
    assoc: &'a BTreeSet<Association>,
    /// `stages[k]` lists the atoms whose variables are all bound after arc `k`.
    stages: Vec<Vec<&'a GuardAtom>>,
    /// Atoms without variables, or with variables no arc binds.
    unstaged: Vec<&'a GuardAtom>,
}

impl<'a> Search<'a> {
    fn new(net: &'a Net, m: &'a Marking, t: &'a Transition, assoc: &'a BTreeSet<Association>) -> Self {
        let binder: BTreeMap<&str, usize> = t
            .arcs
            .iter()
            .enumerate()
            .filter_map(|(k, a)| a.var().map(|v| (v, k)))
            .collect();
        let mut stages = vec![Vec::new(); t.arcs.len()];
        let mut unstaged = Vec::new();
        for atom in &t.guard {
            let ks: Option<Vec<usize>> = atom.vars().iter().map(|v| binder.get(v).copied()).collect();
            match ks.and_then(|ks| ks.into_iter().max()) {
                Some(k) => stages[k].push(atom),
                None => unstaged.push(atom),
            }
        }
        Search {
            net,
            m,
            t,
            assoc,
            stages,
            unstaged,
        }
    }

    fn check_stage(&self, k: usize, b: &Binding) -> bool {
        let atoms = if k == usize::MAX {
            &self.unstaged
        } else {
            &self.stages[k]
        };
        atoms.iter().all(|a| eval_atom(a, b, self.m, self.assoc))
    }

    fn available(&self, place: usize, value: &ColorValue, taken: &[(usize, ColorValue)]) -> bool {
        let used = taken
            .iter()
            .filter(|(p, v)| *p == place && v == value)
            .count();
        self.m.count(place, value) > used
    }

    fn extend(
        &self,
        k: usize,
        b: &mut Binding,
        taken: &mut Vec<(usize, ColorValue)>,
        out: &mut Vec<Binding>,
    ) {
        let Some(arc) = self.t.arcs.get(k) else {
            out.push(b.clone());
            return;
        };
        match arc {
            ArcPattern::Test { place, var: None } => {
                if self.m.contains(*place, &ColorValue::Unit) && self.check_stage(k, b) {
                    self.extend(k + 1, b, taken, out);
                }
            }
            ArcPattern::Test {
                place,
                var: Some(var),
            } => {
                for value in distinct(self.m.tokens(*place)) {
                    b.insert(var.clone(), value.clone());
                    if self.check_stage(k, b) {
                        self.extend(k + 1, b, taken, out);
                    }
                }
                b.0.remove(var);
            }
            ArcPattern::Single { place, var }
            | ArcPattern::CounterTake { place, var, .. }
            | ArcPattern::SetTake { place, var } => {
                for value in distinct(self.m.tokens(*place)) {
                    if !self.available(*place, value, taken) {
                        continue;
                    }
                    b.insert(var.clone(), value.clone());
                    taken.push((*place, value.clone()));
                    if self.check_stage(k, b) {
                        self.extend(k + 1, b, taken, out);
                    }
                    taken.pop();
                }
                b.0.remove(var);
            }
            ArcPattern::CollectionBind {
                place,
                set_var,
                ref_var,
                class,
            } => {
                let Some(reference) = b.get(ref_var).and_then(ColorValue::as_id).cloned() else {
                    return;
                };
                let members: BTreeSet<ObjectId> = self
                    .assoc
                    .iter()
                    .filter_map(|a| a.partner(&reference))
                    .filter(|o| &o.class == class)
                    .filter(|o| self.m.contains(*place, &ColorValue::Id((*o).clone())))
                    .cloned()
                    .collect();
                if members
                    .iter()
                    .any(|o| !self.available(*place, &ColorValue::Id(o.clone()), taken))
                {
                    return;
                }
                let before = taken.len();
                taken.extend(members.iter().map(|o| (*place, ColorValue::Id(o.clone()))));
                b.insert(set_var.clone(), ColorValue::IdSet(members));
                if self.check_stage(k, b) {
                    self.extend(k + 1, b, taken, out);
                }
                b.0.remove(set_var);
                taken.truncate(before);
            }
        }
        let _ = self.net;
    }
}

fn distinct(tokens: &[ColorValue]) -> impl Iterator<Item = &ColorValue> {
    tokens
        .iter()
        .enumerate()
        .filter(move |(i, t)| *i == 0 || tokens[i - 1] != **t)
        .map(|(_, t)| t)
}

fn partner_count(assoc: &BTreeSet<Association>, o: &ObjectId, class: &crate::model::ClassId) -> usize {
    assoc
        .iter()
        .filter_map(|a| a.partner(o))
        .filter(|p| &p.class == class)
        .count()
}

fn associated(assoc: &BTreeSet<Association>, a: &ObjectId, b: &ObjectId) -> bool {
    Association::new(a.clone(), b.clone()).is_some_and(|x| assoc.contains(&x))
}

pub(crate) fn eval_atom(
    atom: &GuardAtom,
    b: &Binding,
    m: &Marking,
    assoc: &BTreeSet<Association>,
) -> bool {
    let objects = |v: &str| b.get(v).map(ColorValue::objects);
    match atom {
        GuardAtom::Associated { a, b: other } => match (objects(a), objects(other)) {
            (Some(xs), Some(ys)) => xs
                .iter()
                .all(|x| ys.iter().all(|y| associated(assoc, x, y))),
            _ => false,
        },
        GuardAtom::NotExceedsUpper {
            var,
            partner_class,
            upper,
        } => objects(var).is_some_and(|os| {
            os.iter()
                .all(|o| partner_count(assoc, o, partner_class) < *upper as usize)
        }),
        GuardAtom::MeetsLower { var, lower } => {
            objects(var).is_some_and(|os| os.len() >= *lower as usize)
        }
        GuardAtom::GoalCount {
            var,
            of_class,
            dependent_class,
            min_count,
            pending,
        } => objects(var).is_some_and(|os| {
            os.iter()
                .filter(|o| of_class.as_ref().is_none_or(|c| &o.class == c))
                .all(|o| {
                    partner_count(assoc, o, dependent_class) + *pending as usize
                        >= *min_count as usize
                })
        }),
        GuardAtom::CfConsistent { cf, class, var } => {
            match (b.get(cf).and_then(ColorValue::as_cf), b.get(var)) {
                (Some(map), Some(ColorValue::Id(o))) => match map.get(class) {
                    Some(Some(bound)) => bound == o,
                    _ => true,
                },
                _ => false,
            }
        }
        GuardAtom::AllAssociatedInState {
            ref_var,
            class,
            place,
        } => match b.get(ref_var).and_then(ColorValue::as_id) {
            Some(r) => assoc
                .iter()
                .filter_map(|a| a.partner(r))
                .filter(|o| &o.class == class)
                .all(|o| m.contains(*place, &ColorValue::Id(o.clone()))),
            None => false,
        },
        GuardAtom::SetSizeAtLeast { var, n } => {
            objects(var).is_some_and(|os| os.len() >= *n as usize)
        }
        GuardAtom::SetSizeAtMost { var, n } => {
            objects(var).is_some_and(|os| os.len() <= *n as usize)
        }
    }
}
