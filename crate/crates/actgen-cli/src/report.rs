//! CSV outputs: per-cell metric traces, the cross-seed summary, and the
//! per-iteration VI trace. All files are written atomically via a temp file
//! and rename so interrupted runs never leave partial CSVs behind.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use actgen_core::vi::TraceRow;

/// One output row per round; optional fields render as empty cells.
#[derive(Clone, Debug, Default)]
pub struct MetricRow {
    pub round: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub performance: Option<f64>,
    pub regret: f64,
    pub diversity: f64,
    pub hits: usize,
    pub kl_oracle: Option<f64>,
}

pub const METRICS_HEADER: &str =
    "round,precision,recall,performance,regret,diversity,hits,kl_oracle";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.round,
            fmt_opt(r.precision),
            fmt_opt(r.recall),
            fmt_opt(r.performance),
            r.regret,
            r.diversity,
            r.hits,
            fmt_opt(r.kl_oracle),
        );
    }
    out
}

/// Parse a metrics CSV produced by [`metrics_csv`]; used to recompute
/// summary statistics from disk.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => return Err(format!("bad header: {other:?}")),
    }
    let parse_opt = |s: &str| -> Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| format!("{e}: {s:?}"))
        }
    };
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(format!("expected 8 columns, got {}", cols.len()));
        }
        rows.push(MetricRow {
            round: cols[0].parse().map_err(|e| format!("{e}"))?,
            precision: parse_opt(cols[1])?,
            recall: parse_opt(cols[2])?,
            performance: parse_opt(cols[3])?,
            regret: cols[4].parse().map_err(|e| format!("{e}"))?,
            diversity: cols[5].parse().map_err(|e| format!("{e}"))?,
            hits: cols[6].parse().map_err(|e| format!("{e}"))?,
            kl_oracle: parse_opt(cols[7])?,
        });
    }
    Ok(rows)
}

/// Mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub const SUMMARY_HEADER: &str = "method,round,precision_mean,precision_std,recall_mean,recall_std,performance_mean,performance_std,regret_mean,regret_std,diversity_mean,diversity_std,hits_mean,hits_std";

/// Per-round mean and std across seeds, one block per method. Methods keep
/// their configured order; rounds are ascending.
pub fn summary_csv(per_method: &[(String, Vec<Vec<MetricRow>>)]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (method, cells) in per_method {
        if cells.is_empty() {
            continue;
        }
        let rounds = cells.iter().map(|c| c.len()).min().unwrap_or(0);
        for r in 0..rounds {
            let collect = |f: &dyn Fn(&MetricRow) -> Option<f64>| -> Option<(f64, f64)> {
                let vals: Option<Vec<f64>> = cells.iter().map(|c| f(&c[r])).collect();
                vals.map(|v| mean_std(&v))
            };
            let stat = |pair: Option<(f64, f64)>| -> String {
                match pair {
                    Some((m, s)) => format!("{m},{s}"),
                    None => String::from(","),
                }
            };
            let precision = collect(&|row| row.precision);
            let recall = collect(&|row| row.recall);
            let performance = collect(&|row| row.performance);
            let regret = collect(&|row| Some(row.regret));
            let diversity = collect(&|row| Some(row.diversity));
            let hits = collect(&|row| Some(row.hits as f64));
            let _ = writeln!(
                out,
                "{method},{},{},{},{},{},{},{}",
                cells[0][r].round,
                stat(precision),
                stat(recall),
                stat(performance),
                stat(regret),
                stat(diversity),
                stat(hits),
            );
        }
    }
    out
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iter,elbo,grad_norm,baseline\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.iter, r.elbo, r.grad_norm, r.baseline);
    }
    out
}

/// Write via temp-and-rename in the destination directory.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_csv_round_trips() {
        let rows = vec![
            MetricRow {
                round: 1,
                precision: Some(0.5),
                recall: Some(0.25),
                performance: Some(12.5),
                regret: 0.75,
                diversity: 3.25,
                hits: 2,
                kl_oracle: None,
            },
            MetricRow {
                round: 2,
                precision: None,
                recall: None,
                performance: None,
                regret: 0.5,
                diversity: 3.0,
                hits: 4,
                kl_oracle: Some(0.125),
            },
        ];
        let text = metrics_csv(&rows);
        let parsed = parse_metrics_csv(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].precision, Some(0.5));
        assert_eq!(parsed[1].precision, None);
        assert_eq!(parsed[1].kl_oracle, Some(0.125));
    }

    #[test]
    fn summary_means_are_exact() {
        let mk = |recall: f64| MetricRow {
            round: 1,
            precision: Some(recall),
            recall: Some(recall),
            performance: Some(1.0),
            regret: 0.0,
            diversity: 0.0,
            hits: 1,
            kl_oracle: None,
        };
        let text = summary_csv(&[(String::from("vsd"), vec![vec![mk(0.25)], vec![mk(0.75)]])]);
        let line = text.lines().nth(1).unwrap();
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], "vsd");
        assert_eq!(cols[4].parse::<f64>().unwrap(), 0.5); // recall mean
        assert_eq!(cols[5].parse::<f64>().unwrap(), 0.25); // recall std
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = std::env::temp_dir().join("actgen-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        write_atomic(&path, "one\n").unwrap();
        write_atomic(&path, "two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two\n");
        assert!(!path.with_extension("tmp").exists());
    }
}
