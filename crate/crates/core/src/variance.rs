//! Influence rows (Hoeffding projection, censoring-model and event-model
//! corrections), the two-sample sandwich and delta-method intervals.

use nalgebra::Matrix2;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::copula::{pair_scores, CopulaSpec};
use crate::error::{Error, Result};
use crate::estimation::{summarize, Estimate, FittedNuisances, Method, NuisanceBundle, RestrictedRecord, WinComponents};
use crate::survival::ModelInfluence;

/// Per-subject 2-vectors (win, loss coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRows {
    pub xi: Vec<[f64; 2]>,
    pub rg: Vec<[f64; 2]>,
    pub re: Vec<[f64; 2]>,
}

impl ArmRows {
    fn zeros(n: usize) -> Self {
        Self {
            xi: vec![[0.0; 2]; n],
            rg: vec![[0.0; 2]; n],
            re: vec![[0.0; 2]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn psi(&self) -> Vec<[f64; 2]> {
        (0..self.len())
            .map(|k| {
                [
                    self.xi[k][0] + self.rg[k][0] + self.re[k][0],
                    self.xi[k][1] + self.rg[k][1] + self.re[k][1],
                ]
            })
            .collect()
    }
}

/// Influence rows for both arms; `arms[1]` is treated, rows follow the
/// record order within each arm.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceRows {
    pub arms: [ArmRows; 2],
    /// Set when the copula-parameter pathway was dropped for a flat fit.
    pub copula_term_dropped: bool,
}

/// ξ̂: opposite-arm kernel averages minus (π̂_t, π̂_c).
pub fn hoeffding_rows(est: &Estimate) -> [Vec<[f64; 2]>; 2] {
    let k = &est.kernels;
    let pi = [est.components.pi_t, est.components.pi_c];
    let mut treated = vec![[0.0; 2]; k.n1];
    let mut control = vec![[0.0; 2]; k.n0];
    for (i, row) in treated.iter_mut().enumerate() {
        for j in 0..k.n0 {
            for q in 0..k.q {
                let ix = k.index(i, j, q);
                row[0] += k.win[ix];
                row[1] += k.loss[ix];
                control[j][0] += k.win[ix];
                control[j][1] += k.loss[ix];
            }
        }
    }
    for row in treated.iter_mut() {
        row[0] = row[0] / k.n0 as f64 - pi[0];
        row[1] = row[1] / k.n0 as f64 - pi[1];
    }
    for row in control.iter_mut() {
        row[0] = row[0] / k.n1 as f64 - pi[0];
        row[1] = row[1] / k.n1 as f64 - pi[1];
    }
    [control, treated]
}

// Time argument of the censoring weight for (q, method): win uses the
// control record's time, loss the treated record's.
#[inline]
fn weight_time(method: Method, q: usize, own: &RestrictedRecord, tau: f64) -> f64 {
    if q == 0 || method == Method::MIpcw {
        own.y_tilde[q]
    } else {
        tau
    }
}

/// r̂^G rows: the pairwise kernels' derivative in G_a routed through the
/// fitted censoring model's influence, averaged over all pairs.
pub fn censoring_correction_rows(
    records: &[RestrictedRecord],
    est: &Estimate,
    method: Method,
    bundle: &NuisanceBundle,
    influence: &[ModelInfluence; 2],
    tau: f64,
) -> [Vec<[f64; 2]>; 2] {
    let k = &est.kernels;
    let m = (k.n1 * k.n0) as f64;
    let mut out = [vec![[0.0; 2]; k.n0], vec![[0.0; 2]; k.n1]];
    if method == Method::Raw {
        return out;
    }
    for arm in 0..2 {
        let inf = &influence[arm];
        if inf.is_zero() {
            continue;
        }
        let mut acc_w = inf.accumulator();
        let mut acc_l = inf.accumulator();
        for (i, &ti) in est.treated.iter().enumerate() {
            let ri = &records[ti];
            for (j, &cj) in est.control.iter().enumerate() {
                let rj = &records[cj];
                let z = if arm == 1 { &ri.covariates } else { &rj.covariates };
                for q in 0..k.q {
                    let ix = k.index(i, j, q);
                    let kw = k.win[ix];
                    if kw != 0.0 {
                        let t = weight_time(method, q, rj, tau);
                        let (g, _) = bundle.g(arm as u8, t, z);
                        inf.add(&mut acc_w, t, z, -kw / g);
                    }
                    let kl = k.loss[ix];
                    if kl != 0.0 {
                        let t = weight_time(method, q, ri, tau);
                        let (g, _) = bundle.g(arm as u8, t, z);
                        inf.add(&mut acc_l, t, z, -kl / g);
                    }
                }
            }
        }
        let w = inf.finish(&acc_w);
        let l = inf.finish(&acc_l);
        for (row, (a, b)) in out[arm].iter_mut().zip(w.iter().zip(&l)) {
            *row = [a / m, b / m];
        }
    }
    out
}

/// Copula pieces at (S₁(s), S₂(t)) needed by the log-ratio derivatives.
struct Partials {
    /// The ratio's building block: C (for R^>) or ∂₂C (for R^=).
    value: f64,
    /// Derivatives of `value` in u₁, u₂ and η.
    d1: f64,
    d2: f64,
    deta: f64,
}

fn partials(spec: &CopulaSpec, u1: f64, u2: f64, eq: bool) -> Partials {
    if eq {
        Partials {
            value: spec.dv(u1, u2),
            d1: spec.density(u1, u2),
            d2: spec.dvv(u1, u2),
            deta: spec.dv_eta(u1, u2),
        }
    } else {
        Partials {
            value: spec.cdf(u1, u2),
            d1: spec.du(u1, u2),
            d2: spec.dv(u1, u2),
            deta: spec.d_eta(u1, u2),
        }
    }
}

/// Accumulates weight·D log R(u, t | z) for one arm's margins and copula.
struct LogRatioAcc<'a> {
    m1: &'a ModelInfluence,
    m2: &'a ModelInfluence,
    a1: crate::survival::InfluenceAccumulator,
    a2: crate::survival::InfluenceAccumulator,
    eta_weight: f64,
}

impl<'a> LogRatioAcc<'a> {
    fn new(m1: &'a ModelInfluence, m2: &'a ModelInfluence) -> Self {
        Self {
            a1: m1.accumulator(),
            a2: m2.accumulator(),
            m1,
            m2,
            eta_weight: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn add(&mut self, bundle: &NuisanceBundle, arm: u8, u: f64, t: f64, z: &[f64], tau: f64, eq: bool, w: f64) {
        if u >= tau || w == 0.0 {
            return;
        }
        let spec = &bundle.copula[arm as usize];
        let s1_tau = bundle.margin(arm, 0, tau, z);
        let s1_u = bundle.margin(arm, 0, u, z);
        let s2_t = bundle.margin(arm, 1, t, z);
        let hi = partials(spec, s1_tau, s2_t, eq);
        let lo = partials(spec, s1_u, s2_t, eq);
        if !(hi.value > 0.0 && lo.value > 0.0) {
            return;
        }
        self.m1.add(&mut self.a1, tau, z, w * hi.d1 / hi.value);
        self.m1.add(&mut self.a1, u, z, -w * lo.d1 / lo.value);
        self.m2.add(&mut self.a2, t, z, w * (hi.d2 / hi.value - lo.d2 / lo.value));
        self.eta_weight += w * (hi.deta / hi.value - lo.deta / lo.value);
    }

    fn finish(&self, kappa_eta: &[f64]) -> Vec<f64> {
        let a = self.m1.finish(&self.a1);
        let b = self.m2.finish(&self.a2);
        (0..a.len())
            .map(|l| a[l] + b[l] + self.eta_weight * kappa_eta.get(l).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Per-subject copula-parameter influence on the η scale; zero for
/// independence or a flat fit.
pub fn copula_influence(fitted: &FittedNuisances, arm: usize) -> (Vec<f64>, bool) {
    let fit = &fitted.copula_fits[arm];
    let pairs = &fitted.copula_pairs[arm];
    let n = fitted.censor_influence[arm].len();
    if pairs.is_empty() || fit.spec.family == crate::copula::Family::Independence {
        return (vec![0.0; n], false);
    }
    if fit.degenerate {
        return (vec![0.0; n], true);
    }
    let scores = pair_scores(&fit.spec, pairs);
    let info_avg = fit.information / scores.len() as f64;
    (scores.iter().map(|s| s / info_avg).collect(), false)
}

/// Gradient of (π̂_t, π̂_c) in each arm's copula parameter η, through the
/// m-IPCW log-ratio pathway. Returned as [arm][coordinate].
pub fn copula_gradient(records: &[RestrictedRecord], est: &Estimate, bundle: &NuisanceBundle, tau: f64) -> Result<[[f64; 2]; 2]> {
    let (_, grads) = event_pathway(records, est, bundle, None, tau)?;
    Ok(grads)
}

type EventRows = [Vec<[f64; 2]>; 2];

fn event_pathway(
    records: &[RestrictedRecord],
    est: &Estimate,
    bundle: &NuisanceBundle,
    fitted: Option<(&FittedNuisances, &[Vec<f64>; 2])>,
    tau: f64,
) -> Result<(EventRows, [[f64; 2]; 2])> {
    let k = &est.kernels;
    if k.q != 2 {
        return Err(Error::Unsupported(format!(
            "event-model variance correction is implemented for two components, found {}",
            k.q
        )));
    }
    let zero = ModelInfluence::new(&crate::survival::SurvivalModel::Constant, &[])?;
    let inf = |arm: usize, c: usize| -> &ModelInfluence {
        match fitted {
            Some((f, _)) if f.margin_influence[arm].len() > c => &f.margin_influence[arm][c],
            _ => &zero,
        }
    };
    // [arm][coordinate]
    let mut accs: Vec<Vec<LogRatioAcc>> = (0..2)
        .map(|a| (0..2).map(|_| LogRatioAcc::new(inf(a, 0), inf(a, 1))).collect())
        .collect();
    for (i, &ti) in est.treated.iter().enumerate() {
        let ri = &records[ti];
        for (j, &cj) in est.control.iter().enumerate() {
            let rj = &records[cj];
            let ix = k.index(i, j, 1);
            let kw = k.win[ix];
            if kw != 0.0 {
                let t = rj.y_tilde[1];
                accs[1][0].add(bundle, 1, ri.gate_u[1], t, &ri.covariates, tau, false, kw);
                accs[0][0].add(bundle, 0, rj.gate_u[1], t, &rj.covariates, tau, true, kw);
            }
            let kl = k.loss[ix];
            if kl != 0.0 {
                let t = ri.y_tilde[1];
                accs[1][1].add(bundle, 1, ri.gate_u[1], t, &ri.covariates, tau, true, kl);
                accs[0][1].add(bundle, 0, rj.gate_u[1], t, &rj.covariates, tau, false, kl);
            }
        }
    }
    let m = (k.n1 * k.n0) as f64;
    let mut grads = [[0.0; 2]; 2];
    let mut rows: EventRows = [vec![[0.0; 2]; k.n0], vec![[0.0; 2]; k.n1]];
    for a in 0..2 {
        for c in 0..2 {
            grads[a][c] = accs[a][c].eta_weight / m;
        }
        if let Some((_, keta)) = fitted {
            let w = accs[a][0].finish(&keta[a]);
            let l = accs[a][1].finish(&keta[a]);
            for (row, (x, y)) in rows[a].iter_mut().zip(w.iter().zip(&l)) {
                *row = [x / m, y / m];
            }
        }
    }
    Ok((rows, grads))
}

/// r̂^E rows for m-IPCW with two components: margin-model and copula
/// influence routed through the conditional tie ratios.
pub fn event_correction_rows(
    records: &[RestrictedRecord],
    est: &Estimate,
    fitted: &FittedNuisances,
    tau: f64,
) -> Result<(EventRows, bool)> {
    let (k0, d0) = copula_influence(fitted, 0);
    let (k1, d1) = copula_influence(fitted, 1);
    let keta = [k0, k1];
    let (rows, _) = event_pathway(records, est, &fitted.bundle, Some((fitted, &keta)), tau)?;
    Ok((rows, d0 || d1))
}

/// ψ̂ = ξ̂ + r̂^G + r̂^E for every subject.
pub fn influence_rows(
    records: &[RestrictedRecord],
    est: &Estimate,
    fitted: &FittedNuisances,
    tau: f64,
) -> Result<InfluenceRows> {
    let method = est.components.method;
    let k = &est.kernels;
    let mut arms = [ArmRows::zeros(k.n0), ArmRows::zeros(k.n1)];
    let xi = hoeffding_rows(est);
    let rg = censoring_correction_rows(records, est, method, &fitted.bundle, &fitted.censor_influence, tau);
    let mut dropped = false;
    let re = if method == Method::MIpcw && k.q > 1 {
        let (rows, d) = event_correction_rows(records, est, fitted, tau)?;
        dropped = d;
        Some(rows)
    } else {
        None
    };
    for a in 0..2 {
        arms[a].xi = xi[a].clone();
        arms[a].rg = rg[a].clone();
        if let Some(re) = &re {
            arms[a].re = re[a].clone();
        }
    }
    Ok(InfluenceRows {
        arms,
        copula_term_dropped: dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    /// Standard error on the scale the interval is built on (log for WR/WO).
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichResult {
    pub omega: Matrix2<f64>,
    pub n1: usize,
    pub n0: usize,
}

impl SandwichResult {
    pub fn n(&self) -> usize {
        self.n1 + self.n0
    }

    /// √(gᵀΩ̂g/n).
    pub fn se(&self, g: [f64; 2]) -> f64 {
        let o = &self.omega;
        let v = g[0] * g[0] * o[(0, 0)] + 2.0 * g[0] * g[1] * o[(0, 1)] + g[1] * g[1] * o[(1, 1)];
        (v.max(0.0) / self.n() as f64).sqrt()
    }
}

/// Ω̂ = (n/n₁²)Σψψᵀ (treated) + (n/n₀²)Σψψᵀ (control).
pub fn sandwich(rows: &InfluenceRows) -> SandwichResult {
    let n0 = rows.arms[0].len();
    let n1 = rows.arms[1].len();
    sandwich_psi(&rows.arms[1].psi(), &rows.arms[0].psi())
        .map(|s| SandwichResult { n1, n0, ..s })
        .unwrap_or(SandwichResult {
            omega: Matrix2::zeros(),
            n1,
            n0,
        })
}

/// Sandwich from raw ψ rows of the treated and control arms.
pub fn sandwich_psi(treated: &[[f64; 2]], control: &[[f64; 2]]) -> Option<SandwichResult> {
    let (n1, n0) = (treated.len(), control.len());
    if n1 == 0 || n0 == 0 {
        return None;
    }
    let n = (n1 + n0) as f64;
    let outer = |rows: &[[f64; 2]]| {
        let mut m = Matrix2::zeros();
        for r in rows {
            m[(0, 0)] += r[0] * r[0];
            m[(0, 1)] += r[0] * r[1];
            m[(1, 1)] += r[1] * r[1];
        }
        m[(1, 0)] = m[(0, 1)];
        m
    };
    let omega = outer(treated) * (n / (n1 as f64 * n1 as f64)) + outer(control) * (n / (n0 as f64 * n0 as f64));
    Some(SandwichResult { omega, n1, n0 })
}

/// NB on the natural scale; WR and WO with log-scale Wald intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intervals {
    pub nb: Interval,
    pub wr: Interval,
    pub wo: Interval,
}

pub fn normal_quantile(conf_level: f64) -> Result<f64> {
    if !(conf_level > 0.0 && conf_level < 1.0) {
        return Err(Error::InvalidInput(format!("confidence level {conf_level} outside (0, 1)")));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - (1.0 - conf_level) / 2.0))
}

/// Delta-method intervals: g_NB = (1, −1), g_logWR = (1/π_t, −1/π_c),
/// g_logWO = 2/(1 − NB²)·(1, −1).
pub fn delta_ci(c: &WinComponents, s: &SandwichResult, conf_level: f64) -> Result<Intervals> {
    let sm = summarize(c)?;
    let z = normal_quantile(conf_level)?;
    let se_nb = s.se([1.0, -1.0]);
    if !(c.pi_t > 0.0) {
        return Err(Error::InvalidInput(format!("log win ratio undefined: pi_t = {}", c.pi_t)));
    }
    let se_wr = s.se([1.0 / c.pi_t, -1.0 / c.pi_c]);
    let gwo = 2.0 / (1.0 - sm.nb * sm.nb);
    let se_wo = s.se([gwo, -gwo]);
    let log_iv = |est: f64, se: f64| Interval {
        estimate: est,
        se,
        lower: (est.ln() - z * se).exp(),
        upper: (est.ln() + z * se).exp(),
    };
    Ok(Intervals {
        nb: Interval {
            estimate: sm.nb,
            se: se_nb,
            lower: sm.nb - z * se_nb,
            upper: sm.nb + z * se_nb,
        },
        wr: log_iv(sm.wr, se_wr),
        wo: log_iv(sm.wo, se_wo),
    })
}
