use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use crffw::{read_json, read_uai, CrfInstance, IterationTrace};
use serde::Serialize;

use crate::{classify, CliResult};

/// Column order of trace CSV files.
pub const TRACE_HEADER: [&str; 10] =
    ["k", "alpha", "e_cont", "e_reg", "e_disc", "s_k", "step_norm", "bound_delta", "bound_held", "time_ms"];

#[derive(Serialize)]
struct Row {
    k: usize,
    alpha: f64,
    e_cont: f64,
    e_reg: f64,
    e_disc: Option<f64>,
    s_k: Option<f64>,
    step_norm: f64,
    bound_delta: Option<f64>,
    bound_held: Option<bool>,
    time_ms: f64,
}

/// Reads `.uai` files with the UAI reader and everything else as native JSON.
pub fn load_instance(path: &Path) -> CliResult<CrfInstance> {
    let is_uai = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("uai"));
    let loaded = if is_uai { read_uai(path) } else { read_json(path) };
    loaded.map_err(classify)
}

/// One row per record; `timing = false` writes 0 for `time_ms`.
pub fn write_trace_csv(trace: &IterationTrace, out: impl Write, timing: bool) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.serialize(Row {
            k: r.k,
            alpha: r.alpha,
            e_cont: r.e_cont,
            e_reg: r.e_reg,
            e_disc: r.e_disc,
            s_k: r.s_k,
            step_norm: r.step_norm,
            bound_delta: r.bound_delta,
            bound_held: r.bound_held,
            time_ms: if timing { r.time_ms } else { 0.0 },
        })?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn create(path: &Path) -> anyhow::Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub(crate) fn write_json_file(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}
