//! Per-run files: trajectory CSV, summary and manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use onco_core::scenario::{Row, SimulationRecord};

pub const CSV_HEADER: &str =
    "t,x,y,x_ref,y_ref,u_ol,v_ol,u_mfc,v_mfc,u_cl,v_cl,eta_x,eta_y,fx_est,fy_est,int_u,int_v";

pub const CSV_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONFIG_FILE: &str = "config.cfg";
pub const MANIFEST_FILE: &str = "manifest.txt";

fn row_fields(r: &Row) -> [f64; 17] {
    [
        r.t, r.x, r.y, r.x_ref, r.y_ref, r.u_ol, r.v_ol, r.u_mfc, r.v_mfc, r.u_cl, r.v_cl, r.eta_x,
        r.eta_y, r.fx_est, r.fy_est, r.int_u, r.int_v,
    ]
}

/// Writes the header and one line per row, 17 significant digits per value.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{CSV_HEADER}")?;
    let mut line = String::with_capacity(17 * 24);
    for r in rows {
        line.clear();
        for (i, v) in row_fields(r).iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{v:.16e}");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn summary_text(name: &str, rec: &SimulationRecord) -> String {
    let s = &rec.summary;
    let mut out = String::new();
    let _ = writeln!(out, "scenario = {name}");
    match &rec.abort {
        None => {
            let _ = writeln!(out, "status = completed");
        }
        Some(e) => {
            let _ = writeln!(out, "status = aborted\nabort_reason = {e}");
        }
    }
    let _ = writeln!(out, "final_time = {}", s.final_time);
    let _ = writeln!(
        out,
        "final_x = {}\nfinal_y = {}",
        s.final_state.x, s.final_state.y
    );
    let _ = writeln!(out, "distance_benign = {}", s.distance_benign);
    let _ = writeln!(out, "distance_saddle = {}", s.distance_saddle);
    let _ = writeln!(out, "distance_malignant = {}", s.distance_malignant);
    let _ = writeln!(out, "basin = {}", s.basin.label());
    let _ = writeln!(out, "total_u = {}\ntotal_v = {}", s.total_u, s.total_v);
    match s.steady_state {
        Some(c) => {
            let verdict = if c.passed { "pass" } else { "fail" };
            let _ = writeln!(
                out,
                "steady_state = {verdict}\nsteady_state_max_change = {}",
                c.max_change
            );
        }
        None => {
            let _ = writeln!(out, "steady_state = n/a");
        }
    }
    let _ = writeln!(out, "time_to_benign = {}", opt(s.time_to_benign));
    let _ = writeln!(out, "eta_clamped_samples = {}", s.eta_clamped_samples);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub scenario: String,
    pub config_hash: String,
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
    pub version: String,
    pub wall_clock: Duration,
}

impl RunManifest {
    pub fn text(&self) -> String {
        format!(
            "scenario = {}\nconfig_hash = {}\ncsv = {}\nsummary = {}\nconfig = {}\nversion = {}\nwall_clock_seconds = {}\n",
            self.scenario,
            self.config_hash,
            self.csv.display(),
            self.summary.display(),
            self.config.display(),
            self.version,
            self.wall_clock.as_secs_f64()
        )
    }
}

/// Writes all run files into `dir`, creating it if needed.
pub fn write_run(
    dir: &Path,
    name: &str,
    config_text: &str,
    config_hash: &str,
    rec: &SimulationRecord,
    wall_clock: Duration,
) -> io::Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let manifest = RunManifest {
        scenario: name.to_string(),
        config_hash: config_hash.to_string(),
        csv: dir.join(CSV_FILE),
        summary: dir.join(SUMMARY_FILE),
        config: dir.join(CONFIG_FILE),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock,
    };
    write_csv(&rec.rows, fs::File::create(&manifest.csv)?)?;
    fs::write(&manifest.summary, summary_text(name, rec))?;
    fs::write(&manifest.config, config_text)?;
    fs::write(dir.join(MANIFEST_FILE), manifest.text())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use onco_core::scenario::{preset, run_scenario};

    #[test]
    fn csv_shape_and_round_trip() {
        let mut cfg = preset("fast").unwrap();
        cfg.duration = 1.0;
        cfg.reference.ramp_time = 1.0;
        let rec = run_scenario(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&rec.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let data: Vec<_> = lines.collect();
        assert_eq!(data.len(), 49);
        let last: Vec<f64> = data[48].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last.len(), 17);
        assert_eq!(last[1].to_bits(), rec.rows[48].x.to_bits());
        assert_eq!(last[16].to_bits(), rec.rows[48].int_v.to_bits());
    }

    #[test]
    fn nan_reference_is_written_as_nan() {
        let mut cfg = preset("uncontrolled").unwrap();
        cfg.duration = 1.0;
        let rec = run_scenario(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&rec.rows[..1], &mut buf).unwrap();
        let line = String::from_utf8(buf)
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_string();
        assert_eq!(line.split(',').nth(3), Some("NaN"));
    }

    #[test]
    fn summary_lists_verdicts() {
        let rec = run_scenario(&preset("fast").unwrap()).unwrap();
        let s = summary_text("fast", &rec);
        for key in [
            "distance_saddle = ",
            "basin = benign",
            "steady_state = pass",
            "status = completed",
        ] {
            assert!(s.contains(key), "{key} missing from\n{s}");
        }
    }
}
