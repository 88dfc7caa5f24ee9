//! Randomized small case models: at most three classes, two fragments and
//! eight objects per case.

use proptest::prelude::*;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct Params {
    /// Upper bound of `B` objects per `A` object, and its goal lower bound.
    pub b_upper: u32,
    pub b_goal: u32,
    /// Adds a third class `C` depending on `B`.
    pub with_c: bool,
    pub c_upper: u32,
    pub c_goal: u32,
    /// The start event also creates one `B`.
    pub co_create: bool,
    /// `A` advances through a gateway with two alternative activities.
    pub gateway: bool,
    /// Advancing `A` moves all its `B` objects as a collection.
    pub batch: bool,
    /// `A`'s life cycle can return from `a1` to `a0`.
    pub reopen: bool,
}

impl Params {
    pub fn max_objects(&self) -> u32 {
        let c = if self.with_c { self.b_upper * self.c_upper } else { 0 };
        1 + self.b_upper + c
    }
}

pub fn params() -> impl Strategy<Value = Params> {
    (
        (1u32..=3, 0u32..=3, any::<bool>(), 1u32..=2, 0u32..=2),
        (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()),
    )
        .prop_map(
            |((b_upper, b_goal, with_c, c_upper, c_goal), (co_create, gateway, batch, reopen))| Params {
                b_upper,
                b_goal: b_goal.min(b_upper),
                with_c,
                c_upper,
                c_goal: c_goal.min(c_upper),
                co_create,
                gateway,
                batch: batch && b_upper > 1,
                reopen,
            },
        )
        .prop_filter("at most eight objects", |p| p.max_objects() <= 8)
}

fn entry(class: &str, state: &str) -> Value {
    json!({ "class": class, "state": state })
}

fn collection(class: &str, state: &str) -> Value {
    json!({ "class": class, "state": state, "collection": true })
}

fn activity(id: &str, input: Value, output: Value) -> Value {
    json!({ "id": id, "type": "activity", "label": id.replace('_', " "),
            "inputSets": [input], "outputSets": [output] })
}

/// The model document for `p`.
pub fn build(p: &Params) -> String {
    let mut a_transitions = vec![json!(["a0", "a1"]), json!(["a1", "a2"])];
    if p.reopen {
        a_transitions.push(json!(["a1", "a0"]));
    }
    let mut classes = vec![
        json!({ "name": "A", "isCaseClass": true, "states": ["a0", "a1", "a2"],
                "transitions": a_transitions }),
        json!({ "name": "B", "states": ["p", "q"], "transitions": [["p", "q"]] }),
    ];
    let mut constraints = vec![json!({
        "classA": "A", "classB": "B",
        "lowerAperB": 1, "goalLowerAperB": 1, "upperAperB": 1,
        "lowerBperA": 0, "goalLowerBperA": p.b_goal, "upperBperA": p.b_upper
    })];
    if p.with_c {
        classes.push(json!({ "name": "C", "states": ["x"] }));
        constraints.push(json!({
            "classA": "B", "classB": "C",
            "lowerAperB": 1, "goalLowerAperB": 1, "upperAperB": 1,
            "lowerBperA": 0, "goalLowerBperA": p.c_goal, "upperBperA": p.c_upper
        }));
    }

    let start_out = if p.co_create {
        json!([entry("A", "a0"), entry("B", "p")])
    } else {
        json!([entry("A", "a0")])
    };
    let advance = if p.batch {
        activity(
            "advance",
            json!([entry("A", "a0"), collection("B", "p")]),
            json!([entry("A", "a1"), collection("B", "q")]),
        )
    } else {
        activity("advance", json!([entry("A", "a0")]), json!([entry("A", "a1")]))
    };
    let mut f0_nodes = vec![
        json!({ "id": "start", "type": "startEvent", "outputSets": [start_out] }),
        advance,
    ];
    let mut f0_flows = vec![json!(["start", "advance"])];
    if p.gateway {
        f0_nodes.push(json!({ "id": "g", "type": "gateway" }));
        f0_nodes.push(activity("finish_left", json!([entry("A", "a1")]), json!([entry("A", "a2")])));
        f0_nodes.push(activity("finish_right", json!([entry("A", "a1")]), json!([entry("A", "a2")])));
        f0_flows.extend([json!(["advance", "g"]), json!(["g", "finish_left"]), json!(["g", "finish_right"])]);
    } else {
        f0_nodes.push(activity("finish", json!([entry("A", "a1")]), json!([entry("A", "a2")])));
        f0_flows.push(json!(["advance", "finish"]));
    }

    let mut f1_nodes = vec![
        activity("create_b", json!([entry("A", "a0")]), json!([entry("A", "a0"), entry("B", "p")])),
        activity("update_b", json!([entry("B", "p")]), json!([entry("B", "q")])),
    ];
    let mut f1_flows = vec![json!(["create_b", "update_b"])];
    if p.with_c {
        f1_nodes.push(activity(
            "create_c",
            json!([entry("B", "q")]),
            json!([entry("B", "q"), entry("C", "x")]),
        ));
        f1_flows.push(json!(["update_b", "create_c"]));
    }

    json!({
        "classes": classes,
        "constraints": constraints,
        "fragments": [
            { "id": "f0", "nodes": f0_nodes, "flows": f0_flows },
            { "id": "f1", "nodes": f1_nodes, "flows": f1_flows }
        ],
        "terminationConditions": [[entry("A", "a2")]]
    })
    .to_string()
}
