//! Result tables: fixed-width text for terminals, CSV for machines.

use std::fmt::Write as _;

use crate::copula::Family;
use crate::estimation::Method;
use crate::simulation::{Estimand, MonteCarloSummary};
use crate::truth::TruthResult;
use crate::variance::Intervals;

/// One output line of the estimate table. `None` fields print as NA.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub tau: f64,
    pub method: Method,
    pub copula: Option<Family>,
    pub estimand: Estimand,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl ResultRow {
    pub fn from_intervals(tau: f64, method: Method, copula: Option<Family>, iv: &Intervals) -> Vec<ResultRow> {
        [(Estimand::Nb, iv.nb), (Estimand::Wr, iv.wr), (Estimand::Wo, iv.wo)]
            .into_iter()
            .map(|(e, i)| ResultRow {
                tau,
                method,
                copula,
                estimand: e,
                estimate: Some(i.estimate),
                se: Some(i.se),
                lower: Some(i.lower),
                upper: Some(i.upper),
            })
            .collect()
    }

    /// Rows for a (τ, method) cell where the summaries are undefined.
    pub fn missing(tau: f64, method: Method, copula: Option<Family>) -> Vec<ResultRow> {
        Estimand::ALL
            .into_iter()
            .map(|e| ResultRow {
                tau,
                method,
                copula,
                estimand: e,
                estimate: None,
                se: None,
                lower: None,
                upper: None,
            })
            .collect()
    }

    fn copula_label(&self) -> &'static str {
        self.copula.map(|f| f.label()).unwrap_or("--")
    }
}

pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => {
            let s = format!("{v:.3}");
            if s == "-0.000" {
                "0.000".to_string()
            } else {
                s
            }
        }
        _ => "NA".to_string(),
    }
}

/// τ without a trailing ".0" for whole numbers.
pub fn fmt_tau(tau: f64) -> String {
    if tau.fract() == 0.0 && tau.abs() < 1e15 {
        format!("{}", tau as i64)
    } else {
        format!("{tau}")
    }
}

pub const RESULT_HEADER: [&str; 8] = ["tau", "method", "copula", "estimand", "estimate", "se", "lower", "upper"];

fn result_cells(r: &ResultRow) -> [String; 8] {
    [
        fmt_tau(r.tau),
        r.method.label().to_string(),
        r.copula_label().to_string(),
        r.estimand.label().to_string(),
        fmt_num(r.estimate),
        fmt_num(r.se),
        fmt_num(r.lower),
        fmt_num(r.upper),
    ]
}

fn text_table(header: &[&str], rows: &[Vec<String>], left: usize) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 && k < left {
                    format!("{:<w$}", c, w = widths[k])
                } else {
                    format!("{:>w$}", c, w = widths[k])
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    for r in rows {
        line(r.iter().map(|s| s.as_str()).collect(), &mut out);
    }
    out
}

fn csv_table(comment: Option<&str>, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for l in c.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn results_table(rows: &[ResultRow]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| result_cells(r).to_vec()).collect();
    text_table(&RESULT_HEADER, &cells, 4)
}

pub fn results_csv(rows: &[ResultRow], comment: Option<&str>) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| result_cells(r).to_vec()).collect();
    csv_table(comment, &RESULT_HEADER, &cells)
}

pub const TRUTH_HEADER: [&str; 8] = ["tau", "pi_t", "pi_c", "pi_t1", "pi_t2", "NB", "WR", "WO"];

fn truth_cells(t: &TruthResult) -> Vec<String> {
    let f6 = |x: f64| format!("{x:.6}");
    vec![
        fmt_tau(t.tau),
        f6(t.pi_t),
        f6(t.pi_c),
        t.pi_tq.first().map(|&x| f6(x)).unwrap_or_else(|| "NA".into()),
        t.pi_tq.get(1).map(|&x| f6(x)).unwrap_or_else(|| "NA".into()),
        fmt_num(Some(t.nb)),
        fmt_num(Some(t.wr)),
        fmt_num(Some(t.wo)),
    ]
}

pub fn truth_table(rows: &[TruthResult]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(truth_cells).collect();
    text_table(&TRUTH_HEADER, &cells, 1)
}

pub fn truth_csv(rows: &[TruthResult], comment: Option<&str>) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(truth_cells).collect();
    csv_table(comment, &TRUTH_HEADER, &cells)
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "tau", "method", "estimand", "true", "mean", "rbias_pct", "mcsd", "ase", "coverage", "re", "n_ok",
];

fn summary_cells(s: &MonteCarloSummary) -> Vec<Vec<String>> {
    s.rows
        .iter()
        .map(|r| {
            vec![
                fmt_tau(r.tau),
                r.method.label().to_string(),
                r.estimand.label().to_string(),
                fmt_num(Some(r.true_value)),
                fmt_num(Some(r.mean_estimate)),
                format!("{:.1}", r.rbias_pct),
                if r.mcsd_defined { format!("{:.4}", r.mcsd) } else { "NA".into() },
                format!("{:.4}", r.ase),
                fmt_num(Some(r.coverage)),
                if r.re.is_finite() { format!("{:.2}", r.re) } else { "NA".into() },
                r.successes.to_string(),
            ]
        })
        .collect()
}

pub fn summary_comment(s: &MonteCarloSummary) -> String {
    format!(
        "seed={} reps={} failures={} lambda_c={:.6} achieved_censoring={:.3}",
        s.seed, s.reps, s.failures, s.lambda_c, s.achieved_censoring
    )
}

pub fn summary_table(s: &MonteCarloSummary) -> String {
    text_table(&SUMMARY_HEADER, &summary_cells(s), 3)
}

pub fn summary_csv(s: &MonteCarloSummary) -> String {
    csv_table(Some(&summary_comment(s)), &SUMMARY_HEADER, &summary_cells(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variance::Interval;

    fn iv(e: f64) -> Interval {
        Interval {
            estimate: e,
            se: 0.1,
            lower: e - 0.2,
            upper: e + 0.2,
        }
    }

    #[test]
    fn table_shape_and_na() {
        let ivs = Intervals {
            nb: iv(-0.0001),
            wr: iv(1.0),
            wo: iv(1.0),
        };
        let mut rows = ResultRow::from_intervals(36.0, Method::Ipcw, None, &ivs);
        rows.extend(ResultRow::missing(36.0, Method::MIpcw, Some(Family::Gumbel)));
        let csv = results_csv(&rows, Some("seed=1"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[1], "tau,method,copula,estimand,estimate,se,lower,upper");
        assert_eq!(lines[2], "36,IPCW,--,NB,0.000,0.100,-0.200,0.200");
        assert_eq!(lines[5], "36,m-IPCW,Gumbel,NB,NA,NA,NA,NA");
        assert_eq!(results_table(&rows).lines().count(), 7);
    }
}
