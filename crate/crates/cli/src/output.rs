//! Report and artifact emission: out-dir layout, CSV renderers for the
//! tabular parts of experiment reports, and the exact corner dump.
//!
//! Out-dir layout: `manifest.json` (argv, resolved seed, config hash,
//! version, timestamp), `report.json` (the full pretty-printed report),
//! plus per-command CSV/JSONL artifacts. Reports are deterministic for a
//! fixed seed except for the `timestamp_unix`/`runtime_ms` fields.

use std::fmt::Write as _;
use std::fs;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use wedgecp_core::exact::{format_rat, rat_to_f64};
use wedgecp_core::{ExperimentConfig, RenormLattice, Reproducibility, YRegion};

use crate::{runtime, CliResult, Common};

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes the out-dir artifact set, or nothing when no out-dir was given
/// (the caller prints the report to stdout in that case).
pub fn emit(
    common: &Common,
    name: &str,
    cfg: Option<&ExperimentConfig>,
    report: &Value,
    extra: &[(String, String)],
) -> CliResult<()> {
    let Some(dir) = &common.out_dir else {
        return Ok(());
    };
    fs::create_dir_all(dir).map_err(|e| runtime(format!("creating {}: {e}", dir.display())))?;
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut manifest = json!({
        "command": name,
        "argv": argv,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": now_unix(),
    });
    if let Some(cfg) = cfg {
        let repro = Reproducibility::of(cfg)?;
        manifest["seed"] = json!(repro.master_seed);
        manifest["config_hash"] = json!(repro.config_hash);
        manifest["config"] = serde_json::to_value(cfg).map_err(|e| runtime(e.to_string()))?;
    }
    let write = |file: &str, body: String| -> CliResult<()> {
        let path = dir.join(file);
        fs::write(&path, body).map_err(|e| runtime(format!("writing {}: {e}", path.display())))
    };
    write("manifest.json", pretty(&manifest)?)?;
    write("report.json", pretty(report)?)?;
    for (file, body) in extra {
        write(file, body.clone())?;
    }
    Ok(())
}

fn pretty(v: &Value) -> CliResult<String> {
    serde_json::to_string_pretty(v).map(|mut s| {
        s.push('\n');
        s
    })
    .map_err(|e| runtime(e.to_string()))
}

fn num(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `m,survivors,used,discards,point,wilson_lo,wilson_hi` per width.
pub fn survival_csv(report: &Value) -> Option<String> {
    let points = report.get("points")?.as_array()?;
    let mut out = String::from("m,survivors,used,discards,point,wilson_lo,wilson_hi\n");
    for p in points {
        let est = &p["estimate"];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(&p["m"]),
            num(&p["survivors"]),
            num(&est["used"]),
            num(&est["discards"]),
            num(&est["point"]),
            num(&est["wilson95"][0]),
            num(&est["wilson95"][1]),
        );
    }
    Some(out)
}

/// One row per checkpoint of the three-lane comparison.
pub fn coupling_csv(report: &Value) -> Option<String> {
    let cps = report.get("checkpoints")?.as_array()?;
    let mut out =
        String::from("t,survivors,interval_sites,disagreeing_sites,disagreement,identity_ok,band_mean\n");
    for c in cps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(&c["t"]),
            num(&c["survivors"]),
            num(&c["interval_sites"]),
            num(&c["disagreeing_sites"]),
            num(&c["disagreement"]),
            num(&c["identity_ok"]),
            num(&c["band_mean"]),
        );
    }
    Some(out)
}

/// Every bisection probe: the rate tried and the survival proportion seen.
pub fn lambda_c_csv(report: &Value) -> Option<String> {
    let probes = report.get("probes")?.as_array()?;
    let mut out = String::from("lambda,survival\n");
    for p in probes {
        let _ = writeln!(out, "{},{}", num(&p["lambda"]), num(&p["survival"]));
    }
    Some(out)
}

/// Per-scale open frequency vs the per-cell product bound. Returns `None`
/// for reports without a scale grid (the open-path mode).
pub fn block_open_csv(report: &Value) -> Option<String> {
    let points = report.get("points")?.as_array()?;
    if points.first().map(|p| p.get("n_cells").is_none()).unwrap_or(true) {
        return None;
    }
    let mut out = String::from("m,n_cells,p_open,crossing_pooled,product_bound,bound_ok\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(&p["m"]),
            num(&p["n_cells"]),
            num(&p["p_open"]["point"]),
            num(&p["crossing_pooled"]["point"]),
            num(&p["product_bound"]),
            num(&p["bound_ok"]),
        );
    }
    Some(out)
}

/// Exact corners of every cell of every translate in lattice rows
/// `0..=rows`: a CSV with one line per cell (rational coordinates as p/q)
/// and an SVG rendering for quick visual inspection. Returns the cell
/// count alongside.
pub fn corner_dump(y: &YRegion, rows: i64) -> CliResult<(String, String, u64)> {
    let lattice = RenormLattice::new(rows)?;
    let mut csv = String::from("j,k,stage,lean,small,x0,t0,x1,t1,x2,t2,x3,t3\n");
    let mut polys: Vec<(u8, [(f64, f64); 4])> = Vec::new();
    let mut cells = 0u64;
    for (j, k) in lattice.points() {
        let translated = y.translated_pieces(j, k)?;
        for (piece, cell) in y.pieces().iter().zip(&translated) {
            let corners = cell.corners();
            let mut line = format!("{j},{k},{},{:?},{}", piece.stage, cell.lean, cell.small);
            let mut approx = [(0.0, 0.0); 4];
            for (i, (x, t)) in corners.iter().enumerate() {
                let _ = write!(line, ",{},{}", format_rat(x), format_rat(t));
                approx[i] = (rat_to_f64(x), rat_to_f64(t));
            }
            csv.push_str(&line);
            csv.push('\n');
            polys.push((piece.stage, approx));
            cells += 1;
        }
    }
    Ok((csv, render_svg(&polys), cells))
}

/// Minimal standalone SVG: space on the horizontal axis, time upward,
/// cells tinted by assembly stage.
fn render_svg(polys: &[(u8, [(f64, f64); 4])]) -> String {
    const FILLS: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2"];
    let (mut x_min, mut x_max, mut t_min, mut t_max) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (_, c) in polys {
        for &(x, t) in c {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            t_min = t_min.min(t);
            t_max = t_max.max(t);
        }
    }
    if polys.is_empty() {
        return String::from(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"10\" height=\"10\"></svg>\n",
        );
    }
    let pad = 0.03 * ((x_max - x_min).max(t_max - t_min)).max(1.0);
    let (x_min, x_max, t_min, t_max) = (x_min - pad, x_max + pad, t_min - pad, t_max + pad);
    let width = 800.0;
    let scale = width / (x_max - x_min);
    let height = (t_max - t_min) * scale;
    let px = |x: f64| (x - x_min) * scale;
    let py = |t: f64| (t_max - t) * scale;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.2} {height:.2}\">\n"
    );
    for (stage, c) in polys {
        let fill = FILLS[*stage as usize % FILLS.len()];
        let mut points = String::new();
        // corners() orders them bottom-left, bottom-right, top-left,
        // top-right; a polygon outline needs the top pair swapped.
        for &(x, t) in &[c[0], c[1], c[3], c[2]] {
            let _ = write!(points, "{:.3},{:.3} ", px(x), py(t));
        }
        let _ = writeln!(
            svg,
            "  <polygon points=\"{}\" fill=\"{fill}\" fill-opacity=\"0.55\" \
             stroke=\"#333\" stroke-width=\"0.7\"/>",
            points.trim_end()
        );
    }
    svg.push_str("</svg>\n");
    svg
}
