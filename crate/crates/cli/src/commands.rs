//! Subcommand implementations. Each returns the process exit code: 2 for
//! unreadable or unparsable input, 1 for validation or exploration
//! violations, 0 otherwise.

use std::io::{self, BufRead, Write};
use std::path::Path;

use fcm_core::compiler::{compile as compile_model, export_dot};
use fcm_core::engine::{
    apply_step, create_case, enabled_steps, terminable, AttributeInput, AttributeValue,
    Attributes, CaseDefinition, CaseStatus, StepOption,
};
use fcm_core::explorer::{explore as explore_net, Limits};
use fcm_core::model::{parse_case_model, validate_all, CaseModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_PARSE: i32 = 2;

fn load(path: &Path, err: &mut dyn Write) -> Result<CaseModel, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(err, "{}: {e}", path.display());
        EXIT_PARSE
    })?;
    parse_case_model(&text).map_err(|e| {
        let _ = writeln!(err, "{}: {e}", path.display());
        EXIT_PARSE
    })
}

/// Loads and validates; violations are printed to `out`.
fn load_valid(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<CaseModel, i32> {
    let m = load(path, err)?;
    let v = validate_all(&m);
    if !v.is_empty() {
        for v in &v {
            let _ = writeln!(out, "{v}");
        }
        let _ = writeln!(out, "{} violations", v.len());
        return Err(EXIT_VIOLATIONS);
    }
    Ok(m)
}

pub fn validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match load_valid(path, out, err) {
        Ok(_) => {
            let _ = writeln!(out, "0 violations");
            EXIT_OK
        }
        Err(code) => code,
    }
}

pub fn compile(
    path: &Path,
    net_out: &Path,
    dot_out: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let m = match load_valid(path, out, err) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let (net, report) = match compile_model(&m) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "compile: {e}");
            return EXIT_VIOLATIONS;
        }
    };
    let mut writes = vec![(net_out, net.to_json())];
    if let Some(dot) = dot_out {
        writes.push((dot, export_dot(&net)));
    }
    for (p, text) in writes {
        if let Err(e) = std::fs::write(p, text) {
            let _ = writeln!(err, "{}: {e}", p.display());
            return EXIT_PARSE;
        }
    }
    let _ = writeln!(out, "{} places, {} transitions", report.places, report.transitions);
    EXIT_OK
}

pub fn explore(path: &Path, max_states: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let m = match load_valid(path, out, err) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let def = match CaseDefinition::new(&m) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "compile: {e}");
            return EXIT_VIOLATIONS;
        }
    };
    let limits = Limits {
        max_states,
        parallel: true,
        ..Limits::default()
    };
    let report = explore_net(&def.net, limits);
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
    if report.violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_VIOLATIONS
    }
}

fn describe(o: &StepOption) -> String {
    let objects: Vec<String> = o.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if objects.is_empty() {
        format!("{} [{}]", o.label, o.transition_id)
    } else {
        format!("{} [{}] {}", o.label, o.transition_id, objects.join(", "))
    }
}

/// Prompts for every attribute of the option's forms. Created objects need
/// a value for each attribute; updates accept an empty line to skip.
fn read_attributes(
    o: &StepOption,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> io::Result<Option<AttributeInput>> {
    let mut attrs = AttributeInput::new();
    for form in &o.required_forms {
        let mut values = Attributes::new();
        for decl in &form.attributes {
            loop {
                write!(out, "{}.{} ({:?}): ", form.key, decl.name, decl.ty)?;
                out.flush()?;
                let mut line = String::new();
                if input.read_line(&mut line)? == 0 {
                    return Ok(None);
                }
                let text = line.trim();
                if text.is_empty() && !form.created {
                    break;
                }
                match AttributeValue::parse(text, decl.ty) {
                    Some(v) => {
                        values.insert(decl.name.clone(), v);
                        break;
                    }
                    None => writeln!(out, "expected a {:?} value", decl.ty)?,
                }
            }
        }
        if !values.is_empty() || form.created {
            attrs.insert(form.key.clone(), values);
        }
    }
    Ok(Some(attrs))
}

/// Interactive case execution: lists the enabled options, reads a choice
/// and the attribute values, and repeats until the case terminates or the
/// input ends (`q` quits).
pub fn run(path: &Path, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let m = match load_valid(path, out, err) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let def = match CaseDefinition::new(&m) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "compile: {e}");
            return EXIT_VIOLATIONS;
        }
    };
    match run_loop(&def, input, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            EXIT_PARSE
        }
    }
}

fn run_loop(def: &CaseDefinition, input: &mut dyn BufRead, out: &mut dyn Write) -> io::Result<()> {
    let mut cs = create_case(def);
    writeln!(out, "case {}", cs.case_id)?;
    loop {
        if cs.status == CaseStatus::Terminated {
            writeln!(out, "case terminated after {} steps", cs.log.len())?;
            return Ok(());
        }
        let options = enabled_steps(def, &cs).map_err(io::Error::other)?;
        if options.is_empty() {
            writeln!(out, "no enabled steps")?;
            return Ok(());
        }
        if terminable(def, &cs) {
            writeln!(out, "the case can terminate")?;
        }
        for (i, o) in options.iter().enumerate() {
            writeln!(out, "{:>3}) {}", i + 1, describe(o))?;
        }
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 || line.trim() == "q" {
            return Ok(());
        }
        let Some(o) = line
            .trim()
            .parse::<usize>()
            .ok()
            .and_then(|n| n.checked_sub(1))
            .and_then(|i| options.get(i))
        else {
            writeln!(out, "pick a number between 1 and {}", options.len())?;
            continue;
        };
        let Some(attrs) = read_attributes(o, input, out)? else {
            return Ok(());
        };
        match apply_step(def, &cs, &o.option_id, &attrs) {
            Ok(next) => cs = next,
            Err(e) => writeln!(out, "{e}")?,
        }
    }
}
