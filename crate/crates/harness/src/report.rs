//! CSV and JSON output. Every file is written to a temporary sibling and
//! renamed into place, so readers never see a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::Serialize;

use hvac_core::adal::TraceRow;
use hvac_core::recover::Schedule;
use hvac_core::Exogenous;

use crate::runner::{MpcStep, RhoCell, ZoneCell};
use crate::HarnessError;

/// JSON schema every summary document satisfies.
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");

/// Write `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| HarnessError::io(path, e))?;
    // Temporary files are created owner-only; outputs get the usual mode.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| HarnessError::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Invalid(e.to_string()))
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), HarnessError> {
    write_atomic(path, &csv_bytes(rows)?)
}

#[derive(Debug, Serialize)]
struct ScheduleRow {
    stage: usize,
    zone: usize,
    temp_c: f64,
    flow_kg_s: f64,
    cooling_kw: f64,
    price: f64,
    stage_cooling_kw: f64,
    stage_fan_kw: f64,
    t_out_c: f64,
    t_supply_c: f64,
}

/// One row per zone and stage. `cooling_kw` is the zone's recirculated
/// cooling; the `stage_*` columns are the AHU's electrical power at the stage.
pub fn schedule_csv(schedule: &Schedule, exo: &Exogenous) -> Result<Vec<u8>, HarnessError> {
    let h = schedule.horizon();
    let rows = (0..h).flat_map(|t| {
        let stage = schedule.cost.per_stage[t];
        (0..schedule.n_zones()).map(move |i| ScheduleRow {
            stage: t,
            zone: i,
            temp_c: schedule.temps[i][t],
            flow_kg_s: schedule.flows[i][t],
            cooling_kw: schedule.x_cool[i][t],
            price: exo.price[t],
            stage_cooling_kw: stage.cooling_kw,
            stage_fan_kw: stage.fan_kw,
            t_out_c: exo.t_out[t],
            t_supply_c: exo.t_supply[t],
        })
    });
    csv_bytes(rows)
}

pub fn write_schedule_csv(path: &Path, schedule: &Schedule, exo: &Exogenous) -> Result<(), HarnessError> {
    write_atomic(path, &schedule_csv(schedule, exo)?)
}

pub fn write_convergence_csv(path: &Path, trace: &[TraceRow]) -> Result<(), HarnessError> {
    write_csv(path, trace)
}

#[derive(Debug, Serialize)]
struct MpcRow {
    stage: usize,
    window: usize,
    iterations: usize,
    converged: bool,
    residual: f64,
    solve_s: f64,
    fallback: bool,
    total_flow_kg_s: f64,
}

pub fn write_mpc_csv(path: &Path, steps: &[MpcStep]) -> Result<(), HarnessError> {
    write_csv(
        path,
        steps.iter().map(|s| MpcRow {
            stage: s.stage,
            window: s.window,
            iterations: s.iterations,
            converged: s.converged,
            residual: s.residual,
            solve_s: s.solve_s,
            fallback: s.fallback,
            total_flow_kg_s: s.applied_flows.iter().sum(),
        }),
    )
}

pub fn write_rho_csv(path: &Path, cells: &[RhoCell]) -> Result<(), HarnessError> {
    write_csv(path, cells)
}

pub fn write_zone_csv(path: &Path, cells: &[ZoneCell]) -> Result<(), HarnessError> {
    write_csv(path, cells)
}

/// File name of the convergence trace for one penalty value.
pub fn rho_trace_name(rho: f64) -> String {
    format!("convergence_rho_{rho}.csv")
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Check a summary document against the bundled schema.
pub fn validate_summary(doc: &serde_json::Value) -> Result<(), HarnessError> {
    let errors: Vec<String> = validator()
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Schema(errors.join("; ")))
    }
}

/// Serialize, validate and write a summary.
pub fn write_summary<T: Serialize>(path: &Path, summary: &T) -> Result<serde_json::Value, HarnessError> {
    let doc = serde_json::to_value(summary)?;
    validate_summary(&doc)?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(doc)
}
