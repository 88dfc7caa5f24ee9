//! Brute-force reference semantics for compiled nets.
//!
//! Bindings are found by enumerating every combination of token positions
//! (and every subset of tokens for collection arcs) and re-checking the
//! complete guard on each combination. Firing works on plain token lists.
//! Nothing here calls the kernel.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use fcm_core::cpn::{
    ArcPattern, Binding, ColorValue, GuardAtom, Marking, Net, ObjectId, Output, PlaceRole,
    TokenExpr, Transition,
};

type Tokens = Vec<Vec<ColorValue>>;

fn assoc_pairs(net: &Net, m: &Tokens) -> Vec<(ObjectId, ObjectId)> {
    let p = net.associations();
    m[p].iter()
        .filter_map(|t| match t {
            ColorValue::AssocSet(s) => Some(s),
            _ => None,
        })
        .flatten()
        .map(|a| (a.ends().0.clone(), a.ends().1.clone()))
        .collect()
}

fn linked(pairs: &[(ObjectId, ObjectId)], a: &ObjectId, b: &ObjectId) -> bool {
    pairs
        .iter()
        .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
}

fn partners_of_class(pairs: &[(ObjectId, ObjectId)], o: &ObjectId, class: &str) -> usize {
    pairs
        .iter()
        .filter(|(x, y)| (x == o && y.class.as_str() == class) || (y == o && x.class.as_str() == class))
        .count()
}

fn objs(v: Option<&ColorValue>) -> Option<Vec<ObjectId>> {
    match v? {
        ColorValue::Id(o) => Some(vec![o.clone()]),
        ColorValue::IdSet(s) => Some(s.iter().cloned().collect()),
        _ => None,
    }
}

fn guard_holds(net: &Net, m: &Tokens, t: &Transition, b: &BTreeMap<String, ColorValue>) -> bool {
    let pairs = assoc_pairs(net, m);
    t.guard.iter().all(|atom| match atom {
        GuardAtom::Associated { a, b: c } => match (objs(b.get(a)), objs(b.get(c))) {
            (Some(xs), Some(ys)) => xs.iter().all(|x| ys.iter().all(|y| linked(&pairs, x, y))),
            _ => false,
        },
        GuardAtom::NotExceedsUpper {
            var,
            partner_class,
            upper,
        } => objs(b.get(var)).is_some_and(|os| {
            os.iter()
                .all(|o| partners_of_class(&pairs, o, partner_class.as_str()) < *upper as usize)
        }),
        GuardAtom::MeetsLower { var, lower } => {
            objs(b.get(var)).is_some_and(|os| os.len() >= *lower as usize)
        }
        GuardAtom::GoalCount {
            var,
            of_class,
            dependent_class,
            min_count,
            pending,
        } => objs(b.get(var)).is_some_and(|os| {
            os.iter().all(|o| {
                if let Some(c) = of_class {
                    if &o.class != c {
                        return true;
                    }
                }
                partners_of_class(&pairs, o, dependent_class.as_str()) + *pending as usize
                    >= *min_count as usize
            })
        }),
        GuardAtom::CfConsistent { cf, class, var } => match (b.get(cf), b.get(var)) {
            (Some(ColorValue::CfMap(map)), Some(ColorValue::Id(o))) => {
                map.get(class).cloned().flatten().is_none_or(|x| &x == o)
            }
            _ => false,
        },
        GuardAtom::AllAssociatedInState {
            ref_var,
            class,
            place,
        } => match b.get(ref_var) {
            Some(ColorValue::Id(r)) => pairs.iter().all(|(x, y)| {
                let other = if x == r {
                    y
                } else if y == r {
                    x
                } else {
                    return true;
                };
                &other.class != class || m[*place].contains(&ColorValue::Id(other.clone()))
            }),
            _ => false,
        },
        GuardAtom::SetSizeAtLeast { var, n } => {
            objs(b.get(var)).is_some_and(|os| os.len() >= *n as usize)
        }
        GuardAtom::SetSizeAtMost { var, n } => {
            objs(b.get(var)).is_some_and(|os| os.len() <= *n as usize)
        }
    })
}

/// One way to satisfy an arc: variable value plus consumed token positions.
#[derive(Clone)]
struct Choice {
    var: Option<(String, ColorValue)>,
    consumed: Vec<(usize, usize)>,
    /// For collection arcs: (place, ref var, class) to check completeness.
    collection: Option<(usize, String, String)>,
}

fn choices(m: &Tokens, arc: &ArcPattern) -> Vec<Choice> {
    match arc {
        ArcPattern::Test { place, var: None } => {
            if m[*place].contains(&ColorValue::Unit) {
                vec![Choice {
                    var: None,
                    consumed: vec![],
                    collection: None,
                }]
            } else {
                vec![]
            }
        }
        ArcPattern::Test {
            place,
            var: Some(v),
        } => m[*place]
            .iter()
            .map(|t| Choice {
                var: Some((v.clone(), t.clone())),
                consumed: vec![],
                collection: None,
            })
            .collect(),
        ArcPattern::Single { place, var }
        | ArcPattern::CounterTake { place, var, .. }
        | ArcPattern::SetTake { place, var } => m[*place]
            .iter()
            .enumerate()
            .map(|(k, t)| Choice {
                var: Some((var.clone(), t.clone())),
                consumed: vec![(*place, k)],
                collection: None,
            })
            .collect(),
        ArcPattern::CollectionBind {
            place,
            set_var,
            ref_var,
            class,
        } => {
            let positions: Vec<usize> = m[*place]
                .iter()
                .enumerate()
                .filter(|(_, t)| matches!(t, ColorValue::Id(o) if &o.class == class))
                .map(|(k, _)| k)
                .collect();
            (0u32..1 << positions.len())
                .map(|mask| {
                    let chosen: Vec<usize> = positions
                        .iter()
                        .enumerate()
                        .filter(|(bit, _)| mask & (1 << bit) != 0)
                        .map(|(_, k)| *k)
                        .collect();
                    let set: BTreeSet<ObjectId> = chosen
                        .iter()
                        .filter_map(|k| match &m[*place][*k] {
                            ColorValue::Id(o) => Some(o.clone()),
                            _ => None,
                        })
                        .collect();
                    Choice {
                        var: Some((set_var.clone(), ColorValue::IdSet(set))),
                        consumed: chosen.iter().map(|k| (*place, *k)).collect(),
                        collection: Some((*place, ref_var.clone(), class.to_string())),
                    }
                })
                .collect()
        }
    }
}

/// Every (transition index, binding) enabled in `m`.
pub fn enabled(net: &Net, m: &Marking) -> BTreeSet<(usize, Binding)> {
    let tokens: Tokens = m.clone().into_tokens();
    let mut out = BTreeSet::new();
    for (ti, t) in net.transitions.iter().enumerate() {
        let per_arc: Vec<Vec<Choice>> = t.arcs.iter().map(|a| choices(&tokens, a)).collect();
        let mut combo = vec![0usize; per_arc.len()];
        if per_arc.iter().any(Vec::is_empty) {
            continue;
        }
        'outer: loop {
            let picked: Vec<&Choice> = combo.iter().zip(&per_arc).map(|(k, c)| &c[*k]).collect();
            if let Some(b) = check_combination(net, &tokens, t, &picked) {
                out.insert((ti, Binding(b)));
            }
            for k in (0..combo.len()).rev() {
                combo[k] += 1;
                if combo[k] < per_arc[k].len() {
                    continue 'outer;
                }
                combo[k] = 0;
            }
            break;
        }
    }
    out
}

fn check_combination(
    net: &Net,
    m: &Tokens,
    t: &Transition,
    picked: &[&Choice],
) -> Option<BTreeMap<String, ColorValue>> {
    let mut used = BTreeSet::new();
    for c in picked {
        for pos in &c.consumed {
            if !used.insert(*pos) {
                return None;
            }
        }
    }
    let b: BTreeMap<String, ColorValue> = picked.iter().filter_map(|c| c.var.clone()).collect();
    let pairs = assoc_pairs(net, m);
    for c in picked {
        let Some((place, ref_var, class)) = &c.collection else {
            continue;
        };
        let Some(ColorValue::Id(r)) = b.get(ref_var) else {
            return None;
        };
        let Some((_, ColorValue::IdSet(set))) = &c.var else {
            return None;
        };
        // The bound set is exactly the associated tokens on the place.
        let expected: BTreeSet<ObjectId> = m[*place]
            .iter()
            .filter_map(|t| match t {
                ColorValue::Id(o) if o.class.as_str() == class && linked(&pairs, r, o) => {
                    Some(o.clone())
                }
                _ => None,
            })
            .collect();
        if &expected != set {
            return None;
        }
    }
    guard_holds(net, m, t, &b).then_some(b)
}

fn take(m: &mut Tokens, place: usize, v: &ColorValue) {
    let k = m[place]
        .iter()
        .position(|t| t == v)
        .expect("consumed token present");
    m[place].remove(k);
}

/// Fires `t` under `b`, assuming it is enabled.
pub fn fire(net: &Net, m: &Marking, ti: usize, b: &Binding) -> Marking {
    let t = &net.transitions[ti];
    let mut tok: Tokens = m.clone().into_tokens();
    for arc in &t.arcs {
        match arc {
            ArcPattern::Test { .. } => {}
            ArcPattern::CollectionBind { place, set_var, .. } => {
                if let Some(ColorValue::IdSet(s)) = b.get(set_var) {
                    for o in s {
                        take(&mut tok, *place, &ColorValue::Id(o.clone()));
                    }
                }
            }
            ArcPattern::Single { place, var }
            | ArcPattern::CounterTake { place, var, .. }
            | ArcPattern::SetTake { place, var } => take(&mut tok, *place, &b.0[var]),
        }
    }
    let mut env = b.0.clone();
    let mut new_objects = Vec::new();
    for out in &t.outputs {
        if let Output::FreshId { class, var, .. } = out {
            let n = t
                .arcs
                .iter()
                .find_map(|a| match a {
                    ArcPattern::CounterTake { class: c, var, .. } if c == class => {
                        match b.0[var] {
                            ColorValue::Int(n) => Some(n),
                            _ => None,
                        }
                    }
                    _ => None,
                })
                .expect("counter bound");
            let id = ObjectId::new(class.as_str(), n as u32);
            env.insert(var.clone(), ColorValue::Id(id.clone()));
            new_objects.push(id);
        }
    }
    let mut new_pairs = Vec::new();
    for out in &t.outputs {
        if let Output::FreshId {
            var,
            associate_with,
            ..
        } = out
        {
            let ColorValue::Id(me) = env[var].clone() else {
                unreachable!()
            };
            for w in associate_with {
                for o in objs(env.get(w)).unwrap_or_default() {
                    if o != me {
                        new_pairs.push((me.clone(), o));
                    }
                }
            }
        }
    }
    for out in &t.outputs {
        match out {
            Output::Produce { place, value } => match value {
                TokenExpr::Unit => tok[*place].push(ColorValue::Unit),
                TokenExpr::Var(v) => tok[*place].push(env[v].clone()),
                TokenExpr::Each(v) => {
                    for o in objs(env.get(v)).unwrap_or_default() {
                        tok[*place].push(ColorValue::Id(o));
                    }
                }
            },
            Output::FreshId { var, place, .. } => tok[*place].push(env[var].clone()),
            Output::CounterPut { place, var } => {
                let ColorValue::Int(n) = env[var] else {
                    unreachable!()
                };
                tok[*place].push(ColorValue::Int(n + 1));
            }
            Output::SetPut { place, var } => {
                let v = match (&net.places[*place].role, &env[var]) {
                    (PlaceRole::Objects, ColorValue::IdSet(s)) => {
                        let mut s = s.clone();
                        s.extend(new_objects.iter().cloned());
                        ColorValue::IdSet(s)
                    }
                    (PlaceRole::Associations, ColorValue::AssocSet(s)) => {
                        let mut s = s.clone();
                        for (x, y) in &new_pairs {
                            s.insert(fcm_core::cpn::Association::new(x.clone(), y.clone()).unwrap());
                        }
                        ColorValue::AssocSet(s)
                    }
                    (_, v) => v.clone(),
                };
                tok[*place].push(v);
            }
            Output::EmitCf {
                place,
                base,
                assign,
            } => {
                let mut map = match base.as_ref().map(|v| &env[v]) {
                    Some(ColorValue::CfMap(m)) => m.clone(),
                    _ => net.classes.iter().map(|c| (c.clone(), None)).collect(),
                };
                for (c, v) in assign {
                    if let Some(ColorValue::Id(o)) = env.get(v) {
                        map.insert(c.clone(), Some(o.clone()));
                    }
                }
                tok[*place].push(ColorValue::CfMap(map));
            }
        }
    }
    Marking::from_tokens(tok)
}

pub struct NaiveReport {
    pub states: usize,
    pub termination_reachable: bool,
}

/// Exhaustive search with the oracle's own enablement and firing.
pub fn explore(net: &Net, initial: Marking) -> NaiveReport {
    let final_place = net.final_place();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(initial.clone());
    queue.push_back(initial);
    let mut termination_reachable = false;
    while let Some(m) = queue.pop_front() {
        if m.tokens(final_place).contains(&ColorValue::Unit) {
            termination_reachable = true;
        }
        for (t, b) in enabled(net, &m) {
            let next = fire(net, &m, t, &b);
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    NaiveReport {
        states: seen.len(),
        termination_reachable,
    }
}
