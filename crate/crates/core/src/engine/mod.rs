//! Case execution on top of the net kernel.
//!
//! The marking alone decides which steps are enabled. Object attributes
//! live in a separate store and never influence enablement. Every step is
//! appended to a log so a case can be replayed from scratch.

mod attributes;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compiler::{compile, CompileError};
use crate::cpn::{
    enabled_bindings, fire_unchecked, initial_marking, ArcPattern, Binding, ColorValue, Marking,
    Net, ObjectId, Output, PlaceRole, TokenExpr, Transition,
};
use crate::model::{AttributeDecl, CaseModel, ClassId};
use crate::preprocess::augment_goal_guards;

pub use attributes::{check_attributes, AttributeValue, Attributes};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("option {0} is not enabled in the current state")]
    StaleOption(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("the case has terminated")]
    CaseTerminated,
    #[error("snapshot belongs to model {found}, expected {expected}")]
    VersionMismatch { expected: String, found: String },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

/// A compiled model ready to run cases.
#[derive(Debug, Clone)]
pub struct CaseDefinition {
    /// The model with goal guards added.
    pub model: CaseModel,
    pub net: Net,
    /// SHA-256 of the guarded model's canonical JSON.
    pub model_hash: String,
}

impl CaseDefinition {
    pub fn new(m: &CaseModel) -> Result<Self, CompileError> {
        let model = augment_goal_guards(m);
        let (net, _) = compile(&model)?;
        let canonical = serde_json::to_string(&model).expect("case models always serialize");
        let model_hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        Ok(CaseDefinition {
            model,
            net,
            model_hash,
        })
    }

    fn schema(&self, class: &ClassId) -> &[AttributeDecl] {
        self.model
            .class(class)
            .map(|c| c.attributes.as_slice())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CaseStatus {
    Initial,
    Running,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectRecord {
    pub id: ObjectId,
    /// `None` once the object's token has been consumed by termination.
    pub current_state: Option<String>,
    pub attributes: Attributes,
}

/// Attribute assignments for one step, keyed by class name for created
/// objects and by object id (`Class#n`) for updated ones.
pub type AttributeInput = BTreeMap<String, Attributes>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub transition_id: String,
    pub binding: Binding,
    pub attributes: AttributeInput,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseState {
    pub case_id: String,
    pub model_hash: String,
    pub marking: Marking,
    pub objects: BTreeMap<ObjectId, ObjectRecord>,
    pub status: CaseStatus,
    pub log: Vec<StepRecord>,
}

impl CaseState {
    /// Associations currently on the associations place.
    pub fn associations(&self, net: &Net) -> Vec<(ObjectId, ObjectId)> {
        self.marking
            .tokens(net.associations())
            .iter()
            .filter_map(ColorValue::as_assoc_set)
            .flatten()
            .map(|a| (a.ends().0.clone(), a.ends().1.clone()))
            .collect()
    }
}

/// An attribute form a step asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FormSpec {
    /// Key in [`AttributeInput`].
    pub key: String,
    pub class: ClassId,
    /// Created (all attributes required) or updated (all optional).
    pub created: bool,
    pub attributes: Vec<AttributeDecl>,
}

/// One executable (transition, binding) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepOption {
    pub option_id: String,
    pub transition_id: String,
    pub label: String,
    /// Object variables and the objects they are bound to.
    pub summary: BTreeMap<String, String>,
    pub binding: Binding,
    pub required_forms: Vec<FormSpec>,
}

pub fn option_id(transition_id: &str, binding: &Binding) -> String {
    let mut h = Sha256::new();
    h.update(transition_id.as_bytes());
    h.update([0]);
    h.update(serde_json::to_string(binding).expect("bindings serialize").as_bytes());
    hex::encode(&h.finalize()[..8])
}

pub fn create_case(def: &CaseDefinition) -> CaseState {
    CaseState {
        case_id: uuid::Uuid::new_v4().to_string(),
        model_hash: def.model_hash.clone(),
        marking: initial_marking(&def.net),
        objects: BTreeMap::new(),
        status: CaseStatus::Initial,
        log: Vec::new(),
    }
}

pub fn status_of(net: &Net, m: &Marking) -> CaseStatus {
    if m.contains(net.final_place(), &ColorValue::Unit) {
        CaseStatus::Terminated
    } else if m.contains(net.running(), &ColorValue::Unit) {
        CaseStatus::Running
    } else {
        CaseStatus::Initial
    }
}

fn step_label(t: &Transition) -> String {
    use crate::cpn::Origin;
    match &t.origin {
        Origin::StartEvent { output, .. } => format!("Start: {} [out{output}]", t.label),
        Origin::Activity { input, output, .. } => {
            format!("{} [in{input}/out{output}]", t.label)
        }
        Origin::Gateway { from, to, .. } => format!("{} ({from} -> {to})", t.label),
        Origin::Termination { .. } => t.label.clone(),
    }
}

/// Objects bound in `b` whose token moves to a different configuration
/// place.
fn updated_objects(t: &Transition, b: &Binding) -> Vec<ObjectId> {
    let mut out = Vec::new();
    for arc in &t.arcs {
        let ArcPattern::Single { place, var } = arc else {
            continue;
        };
        let moved = t.outputs.iter().any(|o| {
            matches!(o, Output::Produce { place: p, value: TokenExpr::Var(v) } if v == var && p != place)
        });
        if moved {
            if let Some(ColorValue::Id(o)) = b.get(var) {
                out.push(o.clone());
            }
        }
    }
    out
}

fn forms(def: &CaseDefinition, t: &Transition, b: &Binding) -> Vec<FormSpec> {
    let mut forms = Vec::new();
    for out in &t.outputs {
        if let Output::FreshId { class, .. } = out {
            let schema = def.schema(class);
            if !schema.is_empty() {
                forms.push(FormSpec {
                    key: class.to_string(),
                    class: class.clone(),
                    created: true,
                    attributes: schema.to_vec(),
                });
            }
        }
    }
    for o in updated_objects(t, b) {
        let schema = def.schema(&o.class);
        if !schema.is_empty() {
            forms.push(FormSpec {
                key: o.to_string(),
                class: o.class.clone(),
                created: false,
                attributes: schema.to_vec(),
            });
        }
    }
    forms
}

/// Steps enabled in the current marking, in kernel order.
pub fn enabled_steps(def: &CaseDefinition, cs: &CaseState) -> Result<Vec<StepOption>, EngineError> {
    if cs.status == CaseStatus::Terminated {
        return Err(EngineError::CaseTerminated);
    }
    Ok(enabled_bindings(&def.net, &cs.marking)
        .into_iter()
        .map(|e| {
            let t = &def.net.transitions[e.transition];
            let summary = object_vars(&def.net, t)
                .filter_map(|v| e.binding.get(v).map(|x| (v.to_string(), x.to_string())))
                .collect();
            StepOption {
                option_id: option_id(&t.id, &e.binding),
                transition_id: t.id.clone(),
                label: step_label(t),
                summary,
                required_forms: forms(def, t, &e.binding),
                binding: e.binding,
            }
        })
        .collect())
}

/// Variables bound to objects on configuration places.
fn object_vars<'a>(net: &'a Net, t: &'a Transition) -> impl Iterator<Item = &'a str> {
    t.arcs.iter().filter_map(move |a| match a {
        ArcPattern::Single { place, var }
            if matches!(net.places[*place].role, PlaceRole::Config { .. }) =>
        {
            Some(var.as_str())
        }
        ArcPattern::CollectionBind { set_var, .. } => Some(set_var.as_str()),
        _ => None,
    })
}

/// Whether some termination transition is enabled.
pub fn terminable(def: &CaseDefinition, cs: &CaseState) -> bool {
    cs.status != CaseStatus::Terminated
        && def
            .net
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_termination())
            .any(|(k, _)| !crate::cpn::enabled_for(&def.net, &cs.marking, k).is_empty())
}

/// Executes the option with id `option_id`, returning the new state.
pub fn apply_step(
    def: &CaseDefinition,
    cs: &CaseState,
    option_id: &str,
    attrs: &AttributeInput,
) -> Result<CaseState, EngineError> {
    let options = enabled_steps(def, cs)?;
    let option = options
        .iter()
        .find(|o| o.option_id == option_id)
        .ok_or_else(|| EngineError::StaleOption(option_id.to_string()))?;
    apply_option(def, cs, option, attrs, now_ms())
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn apply_option(
    def: &CaseDefinition,
    cs: &CaseState,
    option: &StepOption,
    attrs: &AttributeInput,
    timestamp: u64,
) -> Result<CaseState, EngineError> {
    for key in attrs.keys() {
        if !option.required_forms.iter().any(|f| &f.key == key) {
            return Err(EngineError::Schema(format!("no form {key} in this step")));
        }
    }
    let empty = Attributes::new();
    for form in &option.required_forms {
        let values = attrs.get(&form.key).unwrap_or(&empty);
        check_attributes(&form.attributes, values, form.created)
            .map_err(|e| EngineError::Schema(format!("{}: {e}", form.key)))?;
    }

    let t = def
        .net
        .transition_by_id(&option.transition_id)
        .ok_or_else(|| EngineError::StaleOption(option.option_id.clone()))?;
    let marking = fire_unchecked(&def.net, &cs.marking, t, &option.binding);

    let mut objects = cs.objects.clone();
    let before: BTreeSet<&ObjectId> = object_set(&def.net, &cs.marking).collect();
    let created: Vec<ObjectId> = object_set(&def.net, &marking)
        .filter(|o| !before.contains(o))
        .cloned()
        .collect();
    for id in created {
        let attributes = attrs.get(id.class.as_str()).cloned().unwrap_or_default();
        objects.insert(
            id.clone(),
            ObjectRecord {
                id,
                current_state: None,
                attributes,
            },
        );
    }
    for form in option.required_forms.iter().filter(|f| !f.created) {
        if let (Ok(id), Some(values)) = (form.key.parse::<ObjectId>(), attrs.get(&form.key)) {
            if let Some(rec) = objects.get_mut(&id) {
                rec.attributes.extend(values.clone());
            }
        }
    }
    sync_states(&def.net, &marking, &mut objects);

    let mut log = cs.log.clone();
    log.push(StepRecord {
        transition_id: option.transition_id.clone(),
        binding: option.binding.clone(),
        attributes: attrs.clone(),
        timestamp,
    });
    Ok(CaseState {
        case_id: cs.case_id.clone(),
        model_hash: cs.model_hash.clone(),
        status: status_of(&def.net, &marking),
        marking,
        objects,
        log,
    })
}

fn object_set<'a>(net: &Net, m: &'a Marking) -> impl Iterator<Item = &'a ObjectId> {
    m.tokens(net.objects())
        .iter()
        .filter_map(ColorValue::as_id_set)
        .flatten()
}

/// Sets every record's state to the configuration place holding its id.
fn sync_states(net: &Net, m: &Marking, objects: &mut BTreeMap<ObjectId, ObjectRecord>) {
    for rec in objects.values_mut() {
        rec.current_state = None;
    }
    for (k, p) in net.places.iter().enumerate() {
        if let PlaceRole::Config { state, .. } = &p.role {
            for tok in m.tokens(k) {
                if let Some(rec) = tok.as_id().and_then(|o| objects.get_mut(o)) {
                    rec.current_state = Some(state.clone());
                }
            }
        }
    }
}

/// Re-executes a step log on a fresh case.
pub fn replay(def: &CaseDefinition, case_id: &str, log: &[StepRecord]) -> Result<CaseState, EngineError> {
    let mut cs = create_case(def);
    cs.case_id = case_id.to_string();
    for step in log {
        let options = enabled_steps(def, &cs)?;
        let option = options
            .iter()
            .find(|o| o.transition_id == step.transition_id && o.binding == step.binding)
            .ok_or_else(|| EngineError::StaleOption(option_id(&step.transition_id, &step.binding)))?;
        cs = apply_option(def, &cs, option, &step.attributes, step.timestamp)?;
    }
    Ok(cs)
}

/// Serialized case: the marking is keyed by place id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Snapshot {
    pub case_id: String,
    pub model_hash: String,
    pub status: CaseStatus,
    pub marking: BTreeMap<String, Vec<ColorValue>>,
    pub objects: Vec<ObjectRecord>,
    pub log: Vec<StepRecord>,
}

pub fn snapshot(def: &CaseDefinition, cs: &CaseState) -> Snapshot {
    Snapshot {
        case_id: cs.case_id.clone(),
        model_hash: cs.model_hash.clone(),
        status: cs.status,
        marking: def
            .net
            .places
            .iter()
            .enumerate()
            .filter(|(k, _)| !cs.marking.tokens(*k).is_empty())
            .map(|(k, p)| (p.id.clone(), cs.marking.tokens(k).to_vec()))
            .collect(),
        objects: cs.objects.values().cloned().collect(),
        log: cs.log.clone(),
    }
}

pub fn restore(def: &CaseDefinition, doc: &Snapshot) -> Result<CaseState, EngineError> {
    if doc.model_hash != def.model_hash {
        return Err(EngineError::VersionMismatch {
            expected: def.model_hash.clone(),
            found: doc.model_hash.clone(),
        });
    }
    let mut tokens = vec![Vec::new(); def.net.places.len()];
    for (id, toks) in &doc.marking {
        let k = def
            .net
            .place_by_id(id)
            .ok_or_else(|| EngineError::Snapshot(format!("unknown place {id}")))?;
        tokens[k] = toks.clone();
    }
    let marking = Marking::from_tokens(tokens);
    let status = status_of(&def.net, &marking);
    if status != doc.status {
        return Err(EngineError::Snapshot(format!(
            "status {:?} does not match the marking",
            doc.status
        )));
    }
    Ok(CaseState {
        case_id: doc.case_id.clone(),
        model_hash: doc.model_hash.clone(),
        marking,
        objects: doc
            .objects
            .iter()
            .map(|r| (r.id.clone(), r.clone()))
            .collect(),
        status,
        log: doc.log.clone(),
    })
}
