//! CSV writers. Column layouts are documented in `docs/csv_schema.md`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::metrics::{empirical_cdf, quantile, RunSummary};
use crate::sim::Replications;

/// Nine significant digits; empty for NaN.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

fn fmt_summary_value(col: &str, x: f64) -> String {
    let integral = !matches!(
        col,
        "cooperative_ratio"
            | "mean_waiting"
            | "median_waiting"
            | "p90_waiting"
            | "p99_waiting"
            | "verifier_utilization"
            | "revocation_time"
    );
    if integral && x.fract() == 0.0 && x.is_finite() {
        format!("{}", x as i64)
    } else {
        fmt_float(x)
    }
}

pub fn summary_csv(reps: &Replications) -> String {
    let mut s = String::from("run,seed");
    for c in RunSummary::COLUMNS {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (run, sum) in reps.runs.iter().zip(reps.summaries()) {
        let _ = write!(s, "{},{}", run.run_index, run.seed);
        for (c, v) in RunSummary::COLUMNS.iter().zip(sum.values()) {
            s.push(',');
            s.push_str(&fmt_summary_value(c, v));
        }
        s.push('\n');
    }
    s.push_str("mean,");
    for v in reps.mean_summary() {
        s.push(',');
        s.push_str(&fmt_float(v));
    }
    s.push('\n');
    s
}

pub fn waiting_times_csv(reps: &Replications) -> String {
    let mut s = String::from(
        "run,receiver,msg_id,sender,seq,bogus,enqueue_time,leave_time,disposition,waiting_time,spot_checked\n",
    );
    for run in &reps.runs {
        for d in &run.dispositions {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                run.run_index,
                d.receiver,
                d.digest,
                d.sender,
                d.seq,
                u8::from(d.bogus),
                d.enqueue_time,
                d.leave_queue_time,
                d.outcome,
                d.waiting_time(),
                u8::from(d.spot_checked)
            );
        }
    }
    s
}

pub fn cdf_csv(reps: &Replications) -> String {
    let pooled = reps.pooled_waiting();
    let mut s = String::from("waiting_time,cumulative_probability\n");
    for (t, p) in empirical_cdf(&pooled) {
        let _ = writeln!(s, "{t},{}", fmt_float(p));
    }
    s
}

pub fn timeseries_csv(reps: &Replications) -> String {
    let mut s = String::from("run,second,departures,mean_waiting,queue_length\n");
    for run in &reps.runs {
        for row in run.timeseries() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                run.run_index,
                row.second,
                row.departures,
                fmt_float(row.mean_waiting),
                row.queue_len
            );
        }
    }
    s
}

pub fn events_csv(reps: &Replications) -> String {
    let mut s = String::from(
        "run,time,kind,reporter,accused,claim_digest,bogus_digest,distinct_reporters\n",
    );
    for run in &reps.runs {
        // (time, kind rank, position) keeps reports ahead of the revocation they trigger
        let mut rows: Vec<(u64, u8, usize, String)> = Vec::new();
        for (i, r) in run.reports.iter().enumerate() {
            rows.push((
                r.time.as_nanos(),
                0,
                i,
                format!(
                    "{},{},report,{},{},{},{},",
                    run.run_index, r.time, r.reporter, r.accused, r.claim_digest, r.bogus_digest
                ),
            ));
        }
        for (i, r) in run.revocations.iter().enumerate() {
            rows.push((
                r.time.as_nanos(),
                1,
                i,
                format!(
                    "{},{},revocation,,{},,,{}",
                    run.run_index, r.time, r.accused, r.reporters
                ),
            ));
        }
        rows.sort_by_key(|r| (r.0, r.1, r.2));
        for r in rows {
            s.push_str(&r.3);
            s.push('\n');
        }
    }
    s
}

/// Quantile levels exported to `combined.csv`: 0.01, 0.02, ..., 1.00.
pub fn combined_quantiles() -> impl Iterator<Item = (String, f64)> {
    (1..=100).map(|i| (format!("{:.2}", i as f64 / 100.0), i as f64 / 100.0))
}

pub fn combined_header() -> &'static str {
    "parameter,value,quantile,waiting_time,cooperative_ratio,mean_waiting\n"
}

pub fn combined_rows(param: &str, value: &str, reps: &Replications) -> String {
    let pooled = reps.pooled_waiting();
    let mean = reps.mean_summary();
    let ratio = fmt_float(mean[8]);
    let mean_w = fmt_float(mean[9]);
    let mut s = String::new();
    for (label, q) in combined_quantiles() {
        let w = quantile(&pooled, q)
            .map(|t| t.to_string())
            .unwrap_or_default();
        let _ = writeln!(s, "{param},{value},{label},{w},{ratio},{mean_w}");
    }
    s
}

/// Writes every per-run file into `dir`, creating it if needed.
pub fn write_run_outputs(dir: &Path, reps: &Replications) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let config = toml::to_string(&reps.config).map_err(std::io::Error::other)?;
    fs::write(dir.join("config.toml"), config)?;
    fs::write(dir.join("summary.csv"), summary_csv(reps))?;
    fs::write(dir.join("waiting_times.csv"), waiting_times_csv(reps))?;
    fs::write(dir.join("cdf.csv"), cdf_csv(reps))?;
    fs::write(dir.join("timeseries.csv"), timeseries_csv(reps))?;
    fs::write(dir.join("events.csv"), events_csv(reps))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(0.804_122_820_507_691_8), "0.804122821");
        assert_eq!(fmt_float(20.0), "20.0000000");
        assert_eq!(fmt_float(14.285_714_285_714), "14.2857143");
        assert_eq!(fmt_float(1.5e-7), "1.50000000e-7");
        assert_eq!(fmt_float(f64::NAN), "");
        assert_eq!(fmt_float(0.0), "0");
    }
}
