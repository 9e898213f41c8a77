use std::fmt::Write as _;

use constbandit::sim::{MemoryAudit, RegretReport, SuiteOutcome};

use crate::CliError;

pub const CSV_COLUMNS: [&str; 12] = [
    "policy",
    "schedule",
    "instance",
    "K",
    "T",
    "seed_count",
    "mean_regret",
    "stddev_regret",
    "bound_value",
    "state_words",
    "r_max_mean",
    "clean_event_rate",
];

/// 17 significant digits: parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("csv: {e}"))
}

pub fn regret_csv(reports: &[RegretReport]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.policy.clone(),
            r.schedule.clone(),
            r.instance.clone(),
            r.k.to_string(),
            r.horizon.to_string(),
            r.seeds.len().to_string(),
            fmt_float(r.mean_regret),
            fmt_float(r.stddev_regret),
            fmt_opt(r.bound_value),
            r.state_words.to_string(),
            fmt_opt(r.r_max_mean),
            fmt_float(r.clean_event_rate),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn suite_json(outcome: &SuiteOutcome) -> Result<String, CliError> {
    serde_json::to_string_pretty(outcome).map_err(|e| CliError::Io(format!("json: {e}")))
}

pub fn audit_csv(audits: &[MemoryAudit]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy", "schedule", "K", "reset_words", "peak_words"])
        .map_err(csv_err)?;
    for a in audits {
        for row in &a.rows {
            w.write_record([
                a.policy.clone(),
                a.schedule.clone(),
                row.k.to_string(),
                row.reset_words.to_string(),
                row.peak_words.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn summary_table(reports: &[RegretReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<16} {:<28} {:>6} {:>9} {:>12} {:>10} {:>12} {:>6} {:>6} {:>6}",
        "policy",
        "schedule",
        "instance",
        "K",
        "T",
        "regret",
        "stddev",
        "bound",
        "words",
        "r_max",
        "clean"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<12} {:<16} {:<28} {:>6} {:>9} {:>12.2} {:>10.2} {:>12} {:>6} {:>6} {:>6.2}",
            r.policy,
            r.schedule,
            r.instance,
            r.k,
            r.horizon,
            r.mean_regret,
            r.stddev_regret,
            r.bound_value.map_or("-".into(), |b| format!("{b:.1}")),
            r.state_words,
            r.r_max_mean.map_or("-".into(), |m| format!("{m:.2}")),
            r.clean_event_rate,
        );
    }
    out
}

pub fn audit_table(audits: &[MemoryAudit]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<16} {:>8} {:>12} {:>12}  growth",
        "policy", "schedule", "K", "reset_words", "peak_words"
    );
    for a in audits {
        let growth = if a.constant {
            "constant".to_string()
        } else {
            a.slope
                .map_or("varies".into(), |s| format!("{s:.3} words/arm"))
        };
        for (i, row) in a.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<12} {:<16} {:>8} {:>12} {:>12}  {}",
                a.policy,
                a.schedule,
                row.k,
                row.reset_words,
                row.peak_words,
                if i == 0 { growth.as_str() } else { "" }
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e7, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
    }
}
