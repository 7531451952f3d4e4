mod common;

use common::*;
use ctwin_core::copula::{CopulaSpec, Family};
use ctwin_core::estimation::margin_samples;
use ctwin_core::survival::{cox_survival, fit_censoring_km, fit_cox, SurvivalSample};

fn oracle6() -> Vec<SurvivalSample> {
    [(1.0, 1, 1.0), (2.0, 1, 0.0), (3.0, 0, 1.0), (4.0, 1, 1.0), (5.0, 0, 0.0), (6.0, 1, 0.0)]
        .iter()
        .enumerate()
        .map(|(i, &(t, d, z))| SurvivalSample::new(format!("s{i}"), t, d, vec![z], 0))
        .collect()
}

fn unpack(s: &[SurvivalSample]) -> (Vec<f64>, Vec<bool>, Vec<Vec<f64>>) {
    (
        s.iter().map(|x| x.observed_time).collect(),
        s.iter().map(|x| x.indicator == 1).collect(),
        s.iter().map(|x| x.covariates.clone()).collect(),
    )
}

fn check_against_newton(s: &[SurvivalSample], tol: f64) {
    let fit = fit_cox(s, 1e-12, 50).unwrap();
    let (t, d, z) = unpack(s);
    let (beta, jumps) = weighted_cox(&t, &d, &z, &vec![1.0; s.len()]);
    for (a, b) in fit.beta.iter().zip(&beta) {
        assert!((a - b).abs() < tol, "beta {a} vs {b}");
    }
    let mut cum = 0.0;
    let lib = fit.baseline_jumps();
    assert_eq!(lib.len(), jumps.len());
    for ((tl, hl), (to, dj)) in lib.iter().zip(&jumps) {
        cum += dj;
        assert_eq!(tl, to);
        assert!((hl - cum).abs() < tol * cum.max(1.0), "Λ0({tl}) {hl} vs {cum}");
    }
}

#[test]
fn six_subject_cox_matches_independent_newton() {
    check_against_newton(&oracle6(), 1e-8);
}

#[test]
fn simulated_margin_cox_matches_independent_newton() {
    let records = sim_records(&busy_dgp(CopulaSpec::new(Family::Gumbel, 1.5).unwrap(), 0.02), 60, 24.0, 4);
    for q in 0..2 {
        check_against_newton(&margin_samples(&records, 1, q), 1e-8);
    }
}

#[test]
fn breslow_increments_positive_at_event_times_only() {
    let s = oracle6();
    let fit = fit_cox(&s, 1e-10, 50).unwrap();
    let events: Vec<f64> = s.iter().filter(|x| x.indicator == 1).map(|x| x.observed_time).collect();
    let mut prev = 0.0;
    for (t, h) in fit.baseline_jumps() {
        assert!(events.contains(&t));
        assert!(h > prev);
        prev = h;
    }
    assert_eq!(fit.baseline_cumhaz(0.5), 0.0);
}

#[test]
fn cox_survival_nonincreasing() {
    let s = oracle6();
    let fit = fit_cox(&s, 1e-10, 50).unwrap();
    for z in [0.0, 1.0, -2.0] {
        assert_eq!(cox_survival(&fit, 0.0, &[z]), 1.0);
        let mut prev = 1.0;
        for k in 0..80 {
            let v = cox_survival(&fit, k as f64 * 0.1, &[z]);
            assert!(v <= prev && v > 0.0);
            prev = v;
        }
    }
}

#[test]
fn km_refit_on_implied_risk_sets() {
    let s = vec![
        SurvivalSample::new("a", 2.0, 1, vec![], 0),
        SurvivalSample::new("b", 3.0, 0, vec![], 0),
        SurvivalSample::new("c", 3.0, 1, vec![], 0),
        SurvivalSample::new("d", 5.0, 1, vec![], 0),
        SurvivalSample::new("e", 7.0, 0, vec![], 0),
        SurvivalSample::new("f", 9.0, 1, vec![], 0),
        SurvivalSample::new("g", 9.5, 0, vec![], 0),
    ];
    let km = fit_censoring_km(&s).unwrap();
    let (t, d, _) = unpack(&s);
    let oracle = weighted_km(&t, &d, &vec![1.0; t.len()]);
    let mut prev = 1.0;
    for k in 0..110 {
        let x = k as f64 * 0.1;
        assert!((km.eval(x) - oracle(x)).abs() < 1e-15);
        assert!(km.eval(x) <= prev);
        prev = km.eval(x);
    }
    // Right-continuity at a jump.
    assert!(km.eval(5.0) < km.eval(5.0 - 1e-12));
    assert_eq!(km.eval(5.0), km.eval(5.0 + 1e-12));
}
