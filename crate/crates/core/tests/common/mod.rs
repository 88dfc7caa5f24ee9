//! Fixtures, a scripted case driver and independent reference
//! implementations of binding enumeration, firing and exploration.

#![allow(dead_code)]

pub mod oracle;
pub mod random_model;

use fcm_core::engine::{
    apply_step, create_case, enabled_steps, AttributeInput, AttributeValue, Attributes,
    CaseDefinition, CaseState, StepOption,
};
use fcm_core::model::{parse_case_model, CaseModel};

pub const MINI: &str = include_str!("../../fixtures/conference-mini.json");
pub const MICRO: &str = include_str!("../../fixtures/conference-micro.json");
pub const MINIMAL: &str = include_str!("../../fixtures/minimal.json");
pub const BROKEN_BOUNDS: &str = include_str!("../../fixtures/broken-bounds.json");

pub fn model(doc: &str) -> CaseModel {
    parse_case_model(doc).expect("fixture parses")
}

/// Steps a case by transition id and bound objects.
pub struct Driver {
    pub def: CaseDefinition,
    pub cs: CaseState,
}

impl Driver {
    pub fn new(doc: &str) -> Self {
        let def = CaseDefinition::new(&model(doc)).expect("fixture compiles");
        let cs = create_case(&def);
        Driver { def, cs }
    }

    pub fn options(&self) -> Vec<StepOption> {
        enabled_steps(&self.def, &self.cs).unwrap_or_default()
    }

    /// Options of transition `t` whose summary contains every `(var, value)`.
    pub fn matching(&self, t: &str, with: &[(&str, &str)]) -> Vec<StepOption> {
        self.options()
            .into_iter()
            .filter(|o| o.transition_id == t)
            .filter(|o| {
                with.iter()
                    .all(|(k, v)| o.summary.get(*k).map(String::as_str) == Some(*v))
            })
            .collect()
    }

    pub fn enabled(&self, t: &str, with: &[(&str, &str)]) -> bool {
        !self.matching(t, with).is_empty()
    }

    /// Fires the unique matching option, filling every form with defaults.
    pub fn step(&mut self, t: &str, with: &[(&str, &str)]) -> Result<(), String> {
        let opts = self.matching(t, with);
        let [o] = opts.as_slice() else {
            return Err(format!(
                "{t} {with:?}: {} matching options among {:?}",
                opts.len(),
                self.options()
                    .iter()
                    .map(|o| (&o.transition_id, &o.summary))
                    .collect::<Vec<_>>()
            ));
        };
        let attrs = default_attributes(o);
        self.cs = apply_step(&self.def, &self.cs, &o.option_id, &attrs).map_err(|e| e.to_string())?;
        Ok(())
    }
}

pub fn default_attributes(o: &StepOption) -> AttributeInput {
    let mut input = AttributeInput::new();
    for f in o.required_forms.iter().filter(|f| f.created) {
        let mut a = Attributes::new();
        for d in &f.attributes {
            let v = match d.ty {
                fcm_core::model::AttributeType::String => AttributeValue::String(format!("{} {}", f.key, d.name)),
                fcm_core::model::AttributeType::Integer => AttributeValue::Integer(1),
                fcm_core::model::AttributeType::Boolean => AttributeValue::Boolean(true),
            };
            a.insert(d.name.clone(), v);
        }
        input.insert(f.key.clone(), a);
    }
    input
}

/// The conference walk-through on the mini fixture up to (not including)
/// termination: two teams submit one paper each, each paper gets one
/// review, paper 0 is accepted, paper 1 rejected, authors are notified and
/// reviewing is closed.
pub fn walk_through(d: &mut Driver) -> Result<(), String> {
    d.step("fa/start/out0", &[])?;
    d.step("fa/open_submission/in0/out0", &[])?;
    d.step("fb/submit_paper/in0/out0", &[])?;
    d.step("fb/submit_paper/in0/out0", &[])?;
    for (team, paper) in [("AuthorTeam#0", "Paper#0"), ("AuthorTeam#1", "Paper#1")] {
        d.step(
            "fb/send_submission_notification/in0/out0",
            &[("AuthorTeam", team), ("Paper", paper)],
        )?;
    }
    d.step("fa/close_submission/in0/out0", &[])?;
    for paper in ["Paper#0", "Paper#1"] {
        d.step("fc/assign_reviewer/in0/out0", &[("Paper", paper)])?;
    }
    for (review, paper) in [("Review#0", "Paper#0"), ("Review#1", "Paper#1")] {
        d.step(
            "fd/create_review/in0/out0",
            &[("Review", review), ("Paper", paper)],
        )?;
    }
    d.step("fe/decide_on_paper/in0/out1", &[("Paper", "Paper#0")])?;
    d.step("fe/decide_on_paper/in0/out2", &[("Paper", "Paper#1")])?;
    d.step("ff/send_notification/in0/out0", &[("Paper", "Paper#0")])?;
    d.step("ff/send_notification/in1/out0", &[("Paper", "Paper#1")])?;
    d.step("fa/close_reviewing/in0/out0", &[])?;
    Ok(())
}
