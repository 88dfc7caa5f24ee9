use std::fmt::Write;

use crate::cpn::{ArcPattern, Net, Output};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering: places as ellipses, transitions as boxes, test arcs
/// dashed. Output depends only on the net.
pub fn export_dot(net: &Net) -> String {
    let mut s = String::from("digraph net {\n  rankdir=LR;\n");
    for (k, p) in net.places.iter().enumerate() {
        let _ = writeln!(s, "  p{k} [shape=ellipse, label={}];", quote(&p.id));
    }
    for (k, t) in net.transitions.iter().enumerate() {
        let _ = writeln!(
            s,
            "  t{k} [shape=box, label={}];",
            quote(&format!("{}\\n{}", t.label, t.id))
        );
    }
    for (k, t) in net.transitions.iter().enumerate() {
        for arc in &t.arcs {
            let label = arc.var().unwrap_or("()");
            match arc {
                ArcPattern::Test { place, .. } => {
                    let _ = writeln!(
                        s,
                        "  p{place} -> t{k} [style=dashed, dir=both, label={}];",
                        quote(label)
                    );
                }
                _ => {
                    let _ = writeln!(s, "  p{} -> t{k} [label={}];", arc.place(), quote(label));
                }
            }
        }
        for out in &t.outputs {
            let (place, label) = match out {
                Output::Produce { place, value } => (place, format!("{value:?}")),
                Output::FreshId { place, var, .. } => (place, var.clone()),
                Output::CounterPut { place, var } => (place, format!("{var}+1")),
                Output::SetPut { place, var } => (place, format!("{var}'")),
                Output::EmitCf { place, .. } => (place, "cf'".to_string()),
            };
            let _ = writeln!(s, "  t{k} -> p{place} [label={}];", quote(&label));
        }
    }
    s.push_str("}\n");
    s
}
