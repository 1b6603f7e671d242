//! Regression runs on bundled seeds and their comparison against stored
//! summaries. Timing fields are dropped before storing or comparing.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::BaselineSpec;
use crate::runner::{run_receding_horizon, run_single_shot, Baseline, MpcOptions, PipelineSettings};
use crate::scenario::{generate_scenario, GeneratorParams};
use crate::HarnessError;

/// Environment variable that rewrites golden files instead of comparing.
pub const BLESS_VAR: &str = "HVAC_BLESS";

/// Relative tolerance for numbers in golden comparisons.
pub const REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    SingleShot { baselines: bool },
    RecedingHorizon { horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Case {
    pub name: &'static str,
    pub zones: usize,
    pub seed: u64,
    pub kind: CaseKind,
}

pub const CASES: &[Case] = &[
    Case {
        name: "solve_z2_s1",
        zones: 2,
        seed: 1,
        kind: CaseKind::SingleShot { baselines: true },
    },
    Case {
        name: "solve_z5_s1",
        zones: 5,
        seed: 1,
        kind: CaseKind::SingleShot { baselines: true },
    },
    Case {
        name: "solve_z5_s2",
        zones: 5,
        seed: 2,
        kind: CaseKind::SingleShot { baselines: true },
    },
    Case {
        name: "solve_z20_s3",
        zones: 20,
        seed: 3,
        kind: CaseKind::SingleShot { baselines: false },
    },
    Case {
        name: "mpc_z5_s1_h10",
        zones: 5,
        seed: 1,
        kind: CaseKind::RecedingHorizon { horizon: 10 },
    },
];

/// Scenario documents stored verbatim: `(file name, zones, seed)`.
pub const SCENARIOS: &[(&str, usize, u64)] = &[("scenario_z5_s1.toml", 5, 1), ("scenario_z2_s7.toml", 2, 7)];

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn is_timing_key(key: &str) -> bool {
    key.ends_with("_s") || key.contains("_s_")
}

/// Copy of `v` without timing fields.
pub fn strip_timing(v: &Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.iter()
                .filter(|(k, _)| !is_timing_key(k))
                .map(|(k, v)| (k.clone(), strip_timing(v)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.iter().map(strip_timing).collect()),
        other => other.clone(),
    }
}

/// Differences between two documents, as `path: expected vs actual` lines.
/// Numbers match within `rel` relative (or `rel` absolute near zero).
pub fn diff(expected: &Value, actual: &Value, rel: f64) -> Vec<String> {
    let mut out = Vec::new();
    diff_into(expected, actual, rel, "$", &mut out);
    out
}

fn diff_into(e: &Value, a: &Value, rel: f64, path: &str, out: &mut Vec<String>) {
    match (e, a) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if (x - y).abs() > rel * x.abs().max(y.abs()).max(1.0) {
                out.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            for (k, v) in x {
                match y.get(k) {
                    Some(w) => diff_into(v, w, rel, &format!("{path}.{k}"), out),
                    None => out.push(format!("{path}.{k}: missing")),
                }
            }
            for k in y.keys().filter(|k| !x.contains_key(*k)) {
                out.push(format!("{path}.{k}: unexpected"));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (v, w)) in x.iter().zip(y).enumerate() {
                diff_into(v, w, rel, &format!("{path}[{i}]"), out);
            }
        }
        _ if e == a => {}
        _ => out.push(format!("{path}: {e} vs {a}")),
    }
}

/// Run one case and return its summary without timing fields.
pub fn render(case: &Case) -> Result<Value, HarnessError> {
    let scenario = generate_scenario(case.zones, case.seed, &GeneratorParams::default())?;
    let settings = PipelineSettings::default();
    let doc = match case.kind {
        CaseKind::SingleShot { baselines } => {
            let specs = if baselines {
                vec![BaselineSpec::centralized_relaxed(), BaselineSpec::centralized_nonlinear()]
            } else {
                Vec::new()
            };
            let refs: Vec<&dyn Baseline> = specs.iter().map(|b| b as &dyn Baseline).collect();
            serde_json::to_value(run_single_shot(&scenario, &settings, &refs)?.summary)?
        }
        CaseKind::RecedingHorizon { horizon } => {
            serde_json::to_value(run_receding_horizon(&scenario, &settings, MpcOptions::new(horizon))?.summary)?
        }
    };
    Ok(strip_timing(&doc))
}

pub fn render_scenario(zones: usize, seed: u64) -> Result<String, HarnessError> {
    Ok(generate_scenario(zones, seed, &GeneratorParams::default())?.to_toml()?)
}

pub fn blessing() -> bool {
    std::env::var_os(BLESS_VAR).is_some_and(|v| v != "0")
}

/// Compare every case and scenario document against the stored files, or
/// rewrite them when blessing. Returns one line per mismatch.
pub fn check_all() -> Result<Vec<String>, HarnessError> {
    let dir = golden_dir();
    let bless = blessing();
    let mut problems = Vec::new();
    for &(file, zones, seed) in SCENARIOS {
        let text = render_scenario(zones, seed)?;
        let path = dir.join(file);
        if bless {
            crate::report::write_atomic(&path, text.as_bytes())?;
            continue;
        }
        match std::fs::read_to_string(&path) {
            Ok(stored) if stored == text => {}
            Ok(_) => problems.push(format!("{file}: scenario document changed")),
            Err(e) => problems.push(format!("{file}: {e}")),
        }
    }
    for case in CASES {
        let actual = render(case)?;
        let path = dir.join(format!("{}.json", case.name));
        if bless {
            let mut text = serde_json::to_string_pretty(&actual)?;
            text.push('\n');
            crate::report::write_atomic(&path, text.as_bytes())?;
            continue;
        }
        let stored = match std::fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("{}: {e}", case.name));
                continue;
            }
        };
        let expected: Value = serde_json::from_str(&stored)?;
        problems.extend(diff(&expected, &actual, REL_TOL).into_iter().map(|d| format!("{}: {d}", case.name)));
    }
    Ok(problems)
}
