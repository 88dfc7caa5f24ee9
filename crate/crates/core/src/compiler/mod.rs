//! Translation of case models into colored Petri nets.
//!
//! Places: `i`, `r`, `o`, `objects`, `associations`, one counter per class,
//! one place per object configuration and one control-flow place per flow.
//! Transitions: one per start-event output set, per gateway in/out flow
//! pair, per activity input/output set combination and per termination
//! condition.

mod dot;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpn::{
    ArcPattern, Colorset, GuardAtom, Net, Origin, Output, Place, PlaceIdx, PlaceRole, TokenExpr,
    Transition,
};
use crate::model::{
    data_effects, CaseModel, ClassId, DataCondition, DataEffect, Fragment, IoSet, Node, NodeKind,
};
use crate::preprocess::augment_goal_guards;

pub use dot::export_dot;

/// Variable names used by generated transitions.
pub mod vars {
    pub const INITIAL: &str = "$i";
    pub const RUNNING: &str = "$r";
    pub const CF: &str = "$cf";
    pub const OBJECTS: &str = "$objects";
    pub const ASSOCIATIONS: &str = "$associations";

    pub fn object(class: &str) -> String {
        class.to_string()
    }
    pub fn set(class: &str) -> String {
        format!("{class}*")
    }
    pub fn fresh(class: &str) -> String {
        format!("$new {class}")
    }
    pub fn counter(class: &str) -> String {
        format!("$cnt {class}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("{transition}: creates {dependent} but no {supporter} object is bound")]
    MissingSupporterBinding {
        transition: String,
        supporter: ClassId,
        dependent: ClassId,
    },
    #[error("{transition}: collection of {class} has no reference object")]
    MissingReference { transition: String, class: ClassId },
    #[error("{transition}: inconsistent input/output entries for {class}")]
    InvalidDataSets { transition: String, class: ClassId },
    #[error("{transition}: unknown configuration {class}[{state}]")]
    UnknownConfiguration {
        transition: String,
        class: ClassId,
        state: String,
    },
    #[error("generated net is malformed: {0}")]
    Lint(String),
    #[error("fragment {fragment}: flow {from}->{to} has no place")]
    UnknownFlow {
        fragment: String,
        from: String,
        to: String,
    },
}

/// Element counts of a compiled net.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompileReport {
    pub places: usize,
    pub transitions: usize,
    pub places_by_role: BTreeMap<String, usize>,
    /// Transitions per fragment id; termination transitions under
    /// `termination`.
    pub transitions_by_fragment: BTreeMap<String, usize>,
}

impl CompileReport {
    pub fn of(net: &Net) -> Self {
        let mut r = CompileReport {
            places: net.places.len(),
            transitions: net.transitions.len(),
            ..Default::default()
        };
        for p in &net.places {
            let role = match p.role {
                PlaceRole::Initial | PlaceRole::Running | PlaceRole::Final => "global",
                PlaceRole::Objects | PlaceRole::Associations => "global",
                PlaceRole::Counter { .. } => "counter",
                PlaceRole::Config { .. } => "config",
                PlaceRole::ControlFlow { .. } => "controlFlow",
            };
            *r.places_by_role.entry(role.into()).or_default() += 1;
        }
        for t in &net.transitions {
            let key = t.origin.fragment().unwrap_or("termination");
            *r.transitions_by_fragment.entry(key.into()).or_default() += 1;
        }
        r
    }
}

pub fn config_place_id(class: &ClassId, state: &str) -> String {
    format!("{class}[{state}]")
}

pub fn flow_place_id(fragment: &str, from: &str, to: &str) -> String {
    format!("cf {fragment}:{from}->{to}")
}

/// Compiles a case model. Goal guards are added first; models that already
/// carry them are unaffected.
pub fn compile(m: &CaseModel) -> Result<(Net, CompileReport), CompileError> {
    let m = augment_goal_guards(m);
    let places = build_places(&m);
    let mut transitions = Vec::new();
    for f in &m.fragments {
        for n in &f.nodes {
            match n.kind {
                NodeKind::StartEvent => {
                    for o in 0..n.output_sets.len() {
                        transitions.push(translate_start_event(&m, &places, f, n, o)?);
                    }
                }
                NodeKind::Gateway => transitions.extend(translate_gateway(&places, f, n)?),
                NodeKind::Activity => {
                    for i in 0..n.input_sets.len() {
                        for o in 0..n.output_sets.len() {
                            transitions.push(translate_activity(&m, &places, f, n, i, o)?);
                        }
                    }
                }
            }
        }
    }
    for (k, t) in m.termination_conditions.iter().enumerate() {
        transitions.push(translate_termination(&m, &places, t, k)?);
    }
    let net = Net {
        classes: m.class_ids().cloned().collect(),
        constraints: m.constraints(),
        places,
        transitions,
    };
    if let Some(issue) = net.lint().into_iter().next() {
        return Err(CompileError::Lint(issue));
    }
    let report = CompileReport::of(&net);
    Ok((net, report))
}

/// Global places, counters, configuration places and flow places, in that
/// order.
pub fn build_places(m: &CaseModel) -> Vec<Place> {
    let global = |id: &str, colorset, role| Place {
        id: id.into(),
        colorset,
        role,
    };
    let mut places = vec![
        global("i", Colorset::Unit, PlaceRole::Initial),
        global("r", Colorset::Unit, PlaceRole::Running),
        global("o", Colorset::Unit, PlaceRole::Final),
        global("objects", Colorset::IdSet, PlaceRole::Objects),
        global("associations", Colorset::AssocSet, PlaceRole::Associations),
    ];
    for c in &m.classes {
        places.push(Place {
            id: format!("cnt_{}", c.name),
            colorset: Colorset::Int,
            role: PlaceRole::Counter {
                class: c.name.clone(),
            },
        });
    }
    for c in &m.classes {
        for q in &c.states {
            places.push(Place {
                id: config_place_id(&c.name, q),
                colorset: Colorset::Id,
                role: PlaceRole::Config {
                    class: c.name.clone(),
                    state: q.clone(),
                },
            });
        }
    }
    for f in &m.fragments {
        for (a, b) in &f.flows {
            places.push(Place {
                id: flow_place_id(&f.id, a, b),
                colorset: Colorset::CfMap,
                role: PlaceRole::ControlFlow {
                    fragment: f.id.clone(),
                    from: a.clone(),
                    to: b.clone(),
                },
            });
        }
    }
    places
}

struct Places<'a>(&'a [Place]);

impl Places<'_> {
    fn find(&self, pred: impl Fn(&PlaceRole) -> bool) -> Option<PlaceIdx> {
        self.0.iter().position(|p| pred(&p.role))
    }

    fn global(&self, role: PlaceRole) -> PlaceIdx {
        self.find(|r| *r == role).expect("global places exist")
    }

    fn config(&self, t: &str, class: &ClassId, state: &str) -> Result<PlaceIdx, CompileError> {
        self.find(|r| matches!(r, PlaceRole::Config { class: c, state: s } if c == class && s == state))
            .ok_or_else(|| CompileError::UnknownConfiguration {
                transition: t.into(),
                class: class.clone(),
                state: state.into(),
            })
    }

    fn counter(&self, class: &ClassId) -> PlaceIdx {
        self.find(|r| matches!(r, PlaceRole::Counter { class: c } if c == class))
            .expect("one counter per class")
    }

    fn flow(&self, fragment: &str, flow: &(String, String)) -> Result<PlaceIdx, CompileError> {
        self.find(|r| {
            matches!(r, PlaceRole::ControlFlow { fragment: f, from, to }
                if f == fragment && *from == flow.0 && *to == flow.1)
        })
        .ok_or_else(|| CompileError::UnknownFlow {
            fragment: fragment.into(),
            from: flow.0.clone(),
            to: flow.1.clone(),
        })
    }
}

fn label(n: &Node) -> String {
    n.display_label().to_string()
}

/// One transition per (incoming flow, outgoing flow) pair that passes the
/// control-flow token on unchanged.
pub fn translate_gateway(
    places: &[Place],
    f: &Fragment,
    n: &Node,
) -> Result<Vec<Transition>, CompileError> {
    let p = Places(places);
    let mut out = Vec::new();
    for inflow in f.flows.iter().filter(|(_, b)| *b == n.id) {
        for outflow in f.flows.iter().filter(|(a, _)| *a == n.id) {
            out.push(Transition {
                id: format!("{}/{}/{}->{}", f.id, n.id, inflow.0, outflow.1),
                label: label(n),
                origin: Origin::Gateway {
                    fragment: f.id.clone(),
                    node: n.id.clone(),
                    from: inflow.0.clone(),
                    to: outflow.1.clone(),
                },
                arcs: vec![ArcPattern::Single {
                    place: p.flow(&f.id, inflow)?,
                    var: vars::CF.into(),
                }],
                guard: vec![],
                outputs: vec![Output::Produce {
                    place: p.flow(&f.id, outflow)?,
                    value: TokenExpr::Var(vars::CF.into()),
                }],
            });
        }
    }
    Ok(out)
}

/// Moves the case from `i` to `r`, creating the objects of output set
/// `output`.
pub fn translate_start_event(
    m: &CaseModel,
    places: &[Place],
    f: &Fragment,
    n: &Node,
    output: usize,
) -> Result<Transition, CompileError> {
    let id = format!("{}/{}/out{}", f.id, n.id, output);
    let p = Places(places);
    let mut b = Builder::new(m, &p, id.clone());
    b.arcs.push(ArcPattern::Single {
        place: p.global(PlaceRole::Initial),
        var: vars::INITIAL.into(),
    });
    b.outputs.push(Output::Produce {
        place: p.global(PlaceRole::Running),
        value: TokenExpr::Unit,
    });
    let empty = IoSet::default();
    b.data(&empty, &n.output_sets[output])?;
    if let Some(flow) = f.outgoing(&n.id) {
        b.emit_cf(p.flow(&f.id, flow)?, false);
    }
    Ok(b.finish(
        label(n),
        Origin::StartEvent {
            fragment: f.id.clone(),
            node: n.id.clone(),
            output,
        },
    ))
}

/// The transition for one input/output set combination of an activity.
pub fn translate_activity(
    m: &CaseModel,
    places: &[Place],
    f: &Fragment,
    n: &Node,
    input: usize,
    output: usize,
) -> Result<Transition, CompileError> {
    let id = format!("{}/{}/in{}/out{}", f.id, n.id, input, output);
    let p = Places(places);
    let mut b = Builder::new(m, &p, id.clone());
    let incoming = match f.incoming(&n.id) {
        Some(flow) => {
            b.arcs.push(ArcPattern::Single {
                place: p.flow(&f.id, flow)?,
                var: vars::CF.into(),
            });
            true
        }
        None => {
            b.arcs.push(ArcPattern::Test {
                place: p.global(PlaceRole::Running),
                var: None,
            });
            false
        }
    };
    b.control_flow = incoming;
    b.data(&n.input_sets[input], &n.output_sets[output])?;
    if let Some(flow) = f.outgoing(&n.id) {
        b.emit_cf(p.flow(&f.id, flow)?, incoming);
    }
    Ok(b.finish(
        label(n),
        Origin::Activity {
            fragment: f.id.clone(),
            node: n.id.clone(),
            input,
            output,
        },
    ))
}

/// Closes the case: consumes `r`, one object per configuration of the
/// condition and both set tokens, and checks every goal lower bound.
pub fn translate_termination(
    m: &CaseModel,
    places: &[Place],
    t: &DataCondition,
    index: usize,
) -> Result<Transition, CompileError> {
    let id = format!("termination/{index}");
    let p = Places(places);
    let mut arcs = vec![ArcPattern::Single {
        place: p.global(PlaceRole::Running),
        var: vars::RUNNING.into(),
    }];
    for (k, c) in t.configurations().iter().enumerate() {
        arcs.push(ArcPattern::Single {
            place: p.config(&id, &c.class, &c.state)?,
            var: format!("{}{}", c.class, k),
        });
    }
    arcs.push(ArcPattern::SetTake {
        place: p.global(PlaceRole::Objects),
        var: vars::OBJECTS.into(),
    });
    arcs.push(ArcPattern::SetTake {
        place: p.global(PlaceRole::Associations),
        var: vars::ASSOCIATIONS.into(),
    });
    let mut guard = Vec::new();
    for c1 in m.class_ids() {
        for c in m.class_ids() {
            let goal = m.goal_lower(c, c1);
            if c != c1 && goal > 0 {
                guard.push(GuardAtom::GoalCount {
                    var: vars::OBJECTS.into(),
                    of_class: Some(c1.clone()),
                    dependent_class: c.clone(),
                    min_count: goal,
                    pending: 0,
                });
            }
        }
    }
    Ok(Transition {
        id,
        label: format!("terminate: {t}"),
        origin: Origin::Termination { index },
        arcs,
        guard,
        outputs: vec![Output::Produce {
            place: p.global(PlaceRole::Final),
            value: TokenExpr::Unit,
        }],
    })
}

/// What a transition binds for one class.
#[derive(Debug, Clone)]
enum Bound {
    Single(String),
    Set(String),
    Fresh(String),
}

struct Builder<'a> {
    m: &'a CaseModel,
    p: &'a Places<'a>,
    id: String,
    control_flow: bool,
    arcs: Vec<ArcPattern>,
    guard: Vec<GuardAtom>,
    outputs: Vec<Output>,
    /// Singleton inputs and created objects, recorded in control-flow tokens.
    cf_assign: Vec<(ClassId, String)>,
}

impl<'a> Builder<'a> {
    fn new(m: &'a CaseModel, p: &'a Places<'a>, id: String) -> Self {
        Builder {
            m,
            p,
            id,
            control_flow: false,
            arcs: Vec::new(),
            guard: Vec::new(),
            outputs: Vec::new(),
            cf_assign: Vec::new(),
        }
    }

    fn invalid(&self, class: ClassId) -> CompileError {
        CompileError::InvalidDataSets {
            transition: self.id.clone(),
            class,
        }
    }

    fn data(&mut self, input: &IoSet, output: &IoSet) -> Result<(), CompileError> {
        let effects = data_effects(input, output).map_err(|c| self.invalid(c))?;
        let m = self.m;

        // Input arcs: singletons first so collection references are bound.
        let mut inputs: Vec<(ClassId, Bound)> = Vec::new();
        for e in input.entries().iter().filter(|e| !e.collection) {
            let var = vars::object(e.class.as_str());
            self.arcs.push(ArcPattern::Single {
                place: self.p.config(&self.id, &e.class, &e.state)?,
                var: var.clone(),
            });
            if self.control_flow {
                self.guard.push(GuardAtom::CfConsistent {
                    cf: vars::CF.into(),
                    class: e.class.clone(),
                    var: var.clone(),
                });
            }
            self.cf_assign.push((e.class.clone(), var.clone()));
            inputs.push((e.class.clone(), Bound::Single(var)));
        }
        let mut references = Vec::new();
        for e in input.entries().iter().filter(|e| e.collection) {
            let reference = input
                .entries()
                .iter()
                .find(|r| !r.collection && m.upper(&e.class, &r.class) > 1)
                .ok_or_else(|| CompileError::MissingReference {
                    transition: self.id.clone(),
                    class: e.class.clone(),
                })?;
            let place = self.p.config(&self.id, &e.class, &e.state)?;
            let set_var = vars::set(e.class.as_str());
            let ref_var = vars::object(reference.class.as_str());
            self.arcs.push(ArcPattern::CollectionBind {
                place,
                set_var: set_var.clone(),
                ref_var: ref_var.clone(),
                class: e.class.clone(),
            });
            self.guard.push(GuardAtom::AllAssociatedInState {
                ref_var: ref_var.clone(),
                class: e.class.clone(),
                place,
            });
            references.push((ref_var, set_var.clone()));
            inputs.push((e.class.clone(), Bound::Set(set_var)));
        }

        // Inputs of associated classes must be associated with each other.
        for (x, (cx, vx)) in inputs.iter().enumerate() {
            for (cy, vy) in &inputs[x + 1..] {
                if !m.associated(cx, cy) {
                    continue;
                }
                let (a, b) = (bound_var(vx), bound_var(vy));
                let is_reference = references
                    .iter()
                    .any(|(r, s)| (r == a && s == b) || (r == b && s == a));
                if !is_reference {
                    self.guard.push(GuardAtom::Associated {
                        a: a.into(),
                        b: b.into(),
                    });
                }
            }
        }

        let created: Vec<(ClassId, &str)> = effects
            .iter()
            .flat_map(|(c, effs)| {
                effs.iter().filter_map(move |e| match e {
                    DataEffect::Create(o) => Some((c.clone(), o.state.as_str())),
                    _ => None,
                })
            })
            .collect();
        for (c, _) in &created {
            self.arcs.push(ArcPattern::CounterTake {
                class: c.clone(),
                place: self.p.counter(c),
                var: vars::counter(c.as_str()),
            });
        }
        let needs_associations = !created.is_empty()
            || !references.is_empty()
            || effects.iter().any(|(c, effs)| {
                effs.iter().any(|e| match e {
                    DataEffect::Update { from, to } | DataEffect::CollectionUpdate { from, to } => {
                        m.olc(c)
                            .is_some_and(|olc| olc.guards_on(&from.state, &to.state).next().is_some())
                    }
                    _ => false,
                })
            })
            || self
                .guard
                .iter()
                .any(|g| matches!(g, GuardAtom::Associated { .. }));
        if !created.is_empty() {
            self.arcs.push(ArcPattern::SetTake {
                place: self.p.global(PlaceRole::Objects),
                var: vars::OBJECTS.into(),
            });
            self.arcs.push(ArcPattern::SetTake {
                place: self.p.global(PlaceRole::Associations),
                var: vars::ASSOCIATIONS.into(),
            });
        } else if needs_associations {
            self.arcs.push(ArcPattern::Test {
                place: self.p.global(PlaceRole::Associations),
                var: Some(vars::ASSOCIATIONS.into()),
            });
        }

        // Every object bound or created by this transition, by class.
        let mut scope = inputs.clone();
        for (c, _) in &created {
            scope.push((c.clone(), Bound::Fresh(vars::fresh(c.as_str()))));
        }

        // Outputs for the data effects, in input/output order.
        for (c, effs) in &effects {
            for e in effs {
                match e {
                    DataEffect::Read(i) => self.outputs.push(Output::Produce {
                        place: self.p.config(&self.id, c, &i.state)?,
                        value: TokenExpr::Var(vars::object(c.as_str())),
                    }),
                    DataEffect::Update { from, to } => {
                        let var = vars::object(c.as_str());
                        self.goal_guards(c, &from.state, &to.state, &var, &created);
                        self.outputs.push(Output::Produce {
                            place: self.p.config(&self.id, c, &to.state)?,
                            value: TokenExpr::Var(var),
                        });
                    }
                    DataEffect::CollectionRead(i) => self.outputs.push(Output::Produce {
                        place: self.p.config(&self.id, c, &i.state)?,
                        value: TokenExpr::Each(vars::set(c.as_str())),
                    }),
                    DataEffect::CollectionUpdate { from, to } => {
                        let var = vars::set(c.as_str());
                        self.goal_guards(c, &from.state, &to.state, &var, &created);
                        self.outputs.push(Output::Produce {
                            place: self.p.config(&self.id, c, &to.state)?,
                            value: TokenExpr::Each(var),
                        });
                    }
                    DataEffect::Create(o) => {
                        let fresh = vars::fresh(c.as_str());
                        let partners: Vec<&(ClassId, Bound)> = scope
                            .iter()
                            .filter(|(pc, _)| m.associated(c, pc))
                            .collect();
                        self.creation_guards(c, &partners)?;
                        self.outputs.push(Output::FreshId {
                            class: c.clone(),
                            var: fresh.clone(),
                            place: self.p.config(&self.id, c, &o.state)?,
                            associate_with: partners
                                .iter()
                                .map(|(_, b)| bound_var(b).to_string())
                                .collect(),
                        });
                        self.outputs.push(Output::CounterPut {
                            place: self.p.counter(c),
                            var: vars::counter(c.as_str()),
                        });
                        self.cf_assign.push((c.clone(), fresh));
                    }
                }
            }
        }
        if !created.is_empty() {
            self.outputs.push(Output::SetPut {
                place: self.p.global(PlaceRole::Objects),
                var: vars::OBJECTS.into(),
            });
            self.outputs.push(Output::SetPut {
                place: self.p.global(PlaceRole::Associations),
                var: vars::ASSOCIATIONS.into(),
            });
        }
        Ok(())
    }

    /// Goal guards of the OLC transition `from -> to` of `class`, applied to
    /// the object(s) bound to `var`.
    fn goal_guards(
        &mut self,
        class: &ClassId,
        from: &str,
        to: &str,
        var: &str,
        created: &[(ClassId, &str)],
    ) {
        let Some(olc) = self.m.olc(class) else { return };
        for g in olc.guards_on(from, to) {
            let pending = created
                .iter()
                .filter(|(c, _)| *c == g.dependent_class)
                .count() as u32;
            self.guard.push(GuardAtom::GoalCount {
                var: var.into(),
                of_class: None,
                dependent_class: g.dependent_class,
                min_count: g.min_count,
                pending,
            });
        }
    }

    /// Upper bounds for every new association and lower bounds for every
    /// supporter of the created class.
    fn creation_guards(
        &mut self,
        created: &ClassId,
        partners: &[&(ClassId, Bound)],
    ) -> Result<(), CompileError> {
        let m = self.m;
        for (pc, b) in partners {
            match b {
                Bound::Single(v) => self.guard.push(GuardAtom::NotExceedsUpper {
                    var: v.clone(),
                    partner_class: created.clone(),
                    upper: m.upper(created, pc),
                }),
                Bound::Set(v) => {
                    self.guard.push(GuardAtom::NotExceedsUpper {
                        var: v.clone(),
                        partner_class: created.clone(),
                        upper: m.upper(created, pc),
                    });
                    self.guard.push(GuardAtom::SetSizeAtMost {
                        var: v.clone(),
                        n: m.upper(pc, created),
                    });
                }
                Bound::Fresh(_) => {}
            }
        }
        for supporter in m.class_ids() {
            let lower = m.lower(supporter, created);
            if supporter == created || lower == 0 {
                continue;
            }
            let bound = partners.iter().find(|(c, _)| c == supporter);
            match bound.map(|(_, b)| b) {
                Some(Bound::Single(v)) => self.guard.push(GuardAtom::MeetsLower {
                    var: v.clone(),
                    lower,
                }),
                Some(Bound::Set(v)) => self.guard.push(GuardAtom::SetSizeAtLeast {
                    var: v.clone(),
                    n: lower,
                }),
                Some(Bound::Fresh(_)) => {}
                None => {
                    return Err(CompileError::MissingSupporterBinding {
                        transition: self.id.clone(),
                        supporter: supporter.clone(),
                        dependent: created.clone(),
                    })
                }
            }
        }
        Ok(())
    }

    fn emit_cf(&mut self, place: PlaceIdx, has_base: bool) {
        self.outputs.push(Output::EmitCf {
            place,
            base: has_base.then(|| vars::CF.to_string()),
            assign: self.cf_assign.clone(),
        });
    }

    fn finish(self, label: String, origin: Origin) -> Transition {
        Transition {
            id: self.id,
            label,
            origin,
            arcs: self.arcs,
            guard: self.guard,
            outputs: self.outputs,
        }
    }
}

fn bound_var(b: &Bound) -> &str {
    match b {
        Bound::Single(v) | Bound::Set(v) | Bound::Fresh(v) => v,
    }
}
