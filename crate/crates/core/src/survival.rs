//! Survival nuisance models: reverse Kaplan–Meier, Breslow Cox, one-rate
//! exponential and known Weibull PH, plus their per-subject influence
//! functions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One subject's observation for a single modeled event.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalSample {
    pub subject_id: String,
    pub observed_time: f64,
    /// 1 when the modeled event occurred at `observed_time`.
    pub indicator: u8,
    pub covariates: Vec<f64>,
    pub arm: u8,
}

impl SurvivalSample {
    pub fn new(id: impl Into<String>, time: f64, indicator: u8, covariates: Vec<f64>, arm: u8) -> Self {
        Self {
            subject_id: id.into(),
            observed_time: time,
            indicator,
            covariates,
            arm,
        }
    }
}

fn check_samples(samples: &[SurvivalSample]) -> Result<usize> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    let p = first.covariates.len();
    for s in samples {
        if !(s.observed_time >= 0.0) || !s.observed_time.is_finite() {
            return Err(Error::InvalidInput(format!(
                "subject {}: observed time {} is not a nonnegative number",
                s.subject_id, s.observed_time
            )));
        }
        if s.indicator > 1 {
            return Err(Error::InvalidInput(format!(
                "subject {}: indicator {} is not binary",
                s.subject_id, s.indicator
            )));
        }
        if s.covariates.len() != p {
            return Err(Error::CovariateLength {
                expected: p,
                found: s.covariates.len(),
            });
        }
    }
    Ok(p)
}

// Number of sorted jump times at or before t.
#[inline]
fn jumps_upto(times: &[f64], t: f64) -> usize {
    times.partition_point(|&x| x <= t)
}

/// Product-limit step function.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierCurve {
    pub jump_times: Vec<f64>,
    pub survival_values: Vec<f64>,
    pub n_at_risk: Vec<usize>,
}

impl KaplanMeierCurve {
    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        match jumps_upto(&self.jump_times, t) {
            0 => 1.0,
            k => self.survival_values[k - 1],
        }
    }
}

/// Product-limit estimate of Pr(event > t); covariates are ignored.
/// For the censoring curve, `indicator` flags the censoring events.
pub fn fit_censoring_km(samples: &[SurvivalSample]) -> Result<KaplanMeierCurve> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut obs: Vec<(f64, u8)> = samples.iter().map(|s| (s.observed_time, s.indicator)).collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = obs.len();
    let mut jump_times = Vec::new();
    let mut survival_values = Vec::new();
    let mut n_at_risk = Vec::new();
    let mut s = 1.0;
    let mut i = 0;
    while i < n {
        let t = obs[i].0;
        let at_risk = n - i;
        let mut d = 0usize;
        let mut k = i;
        while k < n && obs[k].0 == t {
            d += obs[k].1 as usize;
            k += 1;
        }
        if d > 0 {
            s *= 1.0 - d as f64 / at_risk as f64;
            jump_times.push(t);
            survival_values.push(s);
            n_at_risk.push(at_risk);
        }
        i = k;
    }
    Ok(KaplanMeierCurve {
        jump_times,
        survival_values,
        n_at_risk,
    })
}

/// Per-event-time risk-set averages at the fitted coefficients, on the
/// centered covariate scale: s0 = n⁻¹ΣYe^η, s1 = n⁻¹ΣYe^η z, s2 likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSummary {
    pub s0: f64,
    pub s1: Vec<f64>,
    /// Row-major p×p.
    pub s2: Vec<f64>,
}

/// Breslow-ties Cox fit.
#[derive(Debug, Clone)]
pub struct CoxFit {
    /// Coefficients on the original covariate scale.
    pub beta: Vec<f64>,
    /// Covariate means used for internal centering.
    pub means: Vec<f64>,
    pub jump_times: Vec<f64>,
    /// Breslow increments of the centered baseline.
    pub increments: Vec<f64>,
    cumhaz: Vec<f64>,
    /// Cumulative ∫ z̄ dΛ0 at each jump (centered scale), row per jump.
    bcum: Vec<Vec<f64>>,
    pub risk_summaries: Vec<RiskSummary>,
    /// Observed information divided by n.
    pub information: DMatrix<f64>,
    pub converged: bool,
    pub score_norm: f64,
    pub iterations: usize,
    pub n: usize,
}

impl CoxFit {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    fn lp_centered(&self, z: &[f64]) -> f64 {
        self.beta
            .iter()
            .zip(z.iter().zip(&self.means))
            .map(|(b, (x, m))| b * (x - m))
            .sum()
    }

    fn cumhaz_centered(&self, t: f64) -> f64 {
        match jumps_upto(&self.jump_times, t) {
            0 => 0.0,
            k => self.cumhaz[k - 1],
        }
    }

    /// Breslow baseline cumulative hazard on the original covariate scale.
    pub fn baseline_cumhaz(&self, t: f64) -> f64 {
        let shift: f64 = self.beta.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        self.cumhaz_centered(t) * (-shift).exp()
    }

    /// (jump time, baseline cumulative hazard) on the original covariate scale.
    pub fn baseline_jumps(&self) -> Vec<(f64, f64)> {
        let shift: f64 = self.beta.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        let f = (-shift).exp();
        self.jump_times
            .iter()
            .zip(&self.cumhaz)
            .map(|(&t, &h)| (t, h * f))
            .collect()
    }

    pub fn cumhaz(&self, t: f64, z: &[f64]) -> f64 {
        self.cumhaz_centered(t) * self.lp_centered(z).exp()
    }

    pub fn survival(&self, t: f64, z: &[f64]) -> f64 {
        (-self.cumhaz(t, z)).exp()
    }

    fn inv_information(&self) -> Result<DMatrix<f64>> {
        let p = self.p();
        if p == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        self.information
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::SingularInformation)
    }

    /// Per-subject martingale score residuals U_i (centered scale, which
    /// equals the original-scale score).
    pub fn scores(&self, samples: &[SurvivalSample]) -> Vec<Vec<f64>> {
        let p = self.p();
        samples
            .iter()
            .map(|s| {
                let zc: Vec<f64> = s.covariates.iter().zip(&self.means).map(|(x, m)| x - m).collect();
                let e = self.lp_centered(&s.covariates).exp();
                let k = jumps_upto(&self.jump_times, s.observed_time);
                let mut u = vec![0.0; p];
                for j in 0..k {
                    let rs = &self.risk_summaries[j];
                    for r in 0..p {
                        u[r] -= e * (zc[r] - rs.s1[r] / rs.s0) * self.increments[j];
                    }
                }
                if s.indicator == 1 && k > 0 && self.jump_times[k - 1] == s.observed_time {
                    let rs = &self.risk_summaries[k - 1];
                    for r in 0..p {
                        u[r] += zc[r] - rs.s1[r] / rs.s0;
                    }
                }
                u
            })
            .collect()
    }

    /// Influence pieces for every subject of the fitting sample.
    pub fn influence_pieces(&self, samples: &[SurvivalSample]) -> Result<CoxInfluence> {
        let ainv = self.inv_information()?;
        let scores = self.scores(samples);
        let p = self.p();
        let beta_if: Vec<Vec<f64>> = scores
            .iter()
            .map(|u| {
                if p == 0 {
                    Vec::new()
                } else {
                    (&ainv * DVector::from_column_slice(u)).as_slice().to_vec()
                }
            })
            .collect();
        Ok(CoxInfluence {
            fit: self.clone(),
            times: samples.iter().map(|s| s.observed_time).collect(),
            events: samples.iter().map(|s| s.indicator).collect(),
            eta: samples.iter().map(|s| self.lp_centered(&s.covariates)).collect(),
            scores,
            beta_if,
        })
    }
}

/// Per-subject Cox influence: scores U_i, Breslow influence φ_i(t) and the
/// survival-curve influence κ_i(t, z).
#[derive(Debug, Clone)]
pub struct CoxInfluence {
    fit: CoxFit,
    times: Vec<f64>,
    events: Vec<u8>,
    eta: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
    /// A⁻¹U_i.
    pub beta_if: Vec<Vec<f64>>,
}

impl CoxInfluence {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// φ_i(t) = ∫₀ᵗ dM_i/s0 − B(t)ᵀA⁻¹U_i.
    pub fn phi(&self, i: usize, t: f64) -> f64 {
        let f = &self.fit;
        let k = jumps_upto(&f.jump_times, t);
        let ki = jumps_upto(&f.jump_times, self.times[i]);
        let e = self.eta[i].exp();
        let mut v = 0.0;
        for j in 0..k.min(ki) {
            v -= e * f.increments[j] / f.risk_summaries[j].s0;
        }
        if self.events[i] == 1 && ki > 0 && ki <= k && f.jump_times[ki - 1] == self.times[i] {
            v += 1.0 / f.risk_summaries[ki - 1].s0;
        }
        if k > 0 {
            for (b, d) in f.bcum[k - 1].iter().zip(&self.beta_if[i]) {
                v -= b * d;
            }
        }
        v
    }

    /// κ_i(t, z) = −S(t|z)e^{βᵀz}{φ_i(t) + Λ0(t)zᵀA⁻¹U_i}.
    pub fn kappa(&self, i: usize, t: f64, z: &[f64]) -> f64 {
        let f = &self.fit;
        let eta = f.lp_centered(z);
        let lam = f.cumhaz_centered(t);
        let s = (-lam * eta.exp()).exp();
        let mut reg = 0.0;
        for ((x, m), d) in z.iter().zip(&f.means).zip(&self.beta_if[i]) {
            reg += (x - m) * d;
        }
        -s * eta.exp() * (self.phi(i, t) + lam * reg)
    }
}

struct Partial {
    loglik: f64,
    score: Vec<f64>,
    info: Vec<f64>,
}

// Breslow partial likelihood pieces on centered covariates; `order` sorts
// subjects by descending time.
fn partial(zc: &[Vec<f64>], times: &[f64], events: &[u8], order: &[usize], beta: &[f64]) -> Partial {
    let p = beta.len();
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut loglik = 0.0;
    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let n = order.len();
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut k = i;
        let mut d = 0.0;
        let mut zsum = vec![0.0; p];
        let mut etasum = 0.0;
        while k < n && times[order[k]] == t {
            let idx = order[k];
            let z = &zc[idx];
            let eta: f64 = z.iter().zip(beta).map(|(a, b)| a * b).sum();
            let w = eta.exp();
            s0 += w;
            for r in 0..p {
                s1[r] += w * z[r];
                for c in 0..p {
                    s2[r * p + c] += w * z[r] * z[c];
                }
            }
            if events[idx] == 1 {
                d += 1.0;
                etasum += eta;
                for r in 0..p {
                    zsum[r] += z[r];
                }
            }
            k += 1;
        }
        if d > 0.0 {
            loglik += etasum - d * s0.ln();
            for r in 0..p {
                let zb = s1[r] / s0;
                score[r] += zsum[r] - d * zb;
                for c in 0..p {
                    info[r * p + c] += d * (s2[r * p + c] / s0 - zb * s1[c] / s0);
                }
            }
        }
        i = k;
    }
    Partial { loglik, score, info }
}

/// Breslow log partial likelihood at `beta` (original scale).
pub fn log_partial_likelihood(samples: &[SurvivalSample], beta: &[f64]) -> Result<f64> {
    check_samples(samples)?;
    let times: Vec<f64> = samples.iter().map(|s| s.observed_time).collect();
    let events: Vec<u8> = samples.iter().map(|s| s.indicator).collect();
    let z: Vec<Vec<f64>> = samples.iter().map(|s| s.covariates.clone()).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    Ok(partial(&z, &times, &events, &order, beta).loglik)
}

/// Breslow partial-likelihood score at `beta` (original scale).
pub fn partial_score(samples: &[SurvivalSample], beta: &[f64]) -> Result<Vec<f64>> {
    check_samples(samples)?;
    let times: Vec<f64> = samples.iter().map(|s| s.observed_time).collect();
    let events: Vec<u8> = samples.iter().map(|s| s.indicator).collect();
    let z: Vec<Vec<f64>> = samples.iter().map(|s| s.covariates.clone()).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    Ok(partial(&z, &times, &events, &order, beta).score)
}

const MAX_LOG_HR: f64 = 15.0;

/// Newton–Raphson with step halving on the Breslow partial likelihood.
pub fn fit_cox(samples: &[SurvivalSample], tol: f64, max_iter: usize) -> Result<CoxFit> {
    let p = check_samples(samples)?;
    let n = samples.len();
    if samples.iter().all(|s| s.indicator == 0) {
        return Err(Error::NoEvents("Cox model"));
    }
    let mut means = vec![0.0; p];
    for s in samples {
        for (m, x) in means.iter_mut().zip(&s.covariates) {
            *m += x / n as f64;
        }
    }
    let zc: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.covariates.iter().zip(&means).map(|(x, m)| x - m).collect())
        .collect();
    let ranges: Vec<f64> = (0..p)
        .map(|r| {
            let (lo, hi) = zc
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z[r]), hi.max(z[r])));
            hi - lo
        })
        .collect();
    let times: Vec<f64> = samples.iter().map(|s| s.observed_time).collect();
    let events: Vec<u8> = samples.iter().map(|s| s.indicator).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut beta = vec![0.0; p];
    let mut cur = partial(&zc, &times, &events, &order, &beta);
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut iterations = 0;
    let mut converged = sup(&cur.score) <= tol;
    while !converged && iterations < max_iter {
        iterations += 1;
        let info = DMatrix::from_row_slice(p, p, &cur.info);
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&DVector::from_column_slice(&cur.score)))
            .or_else(|| info.lu().solve(&DVector::from_column_slice(&cur.score)))
            .ok_or(Error::SingularInformation)?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let next = partial(&zc, &times, &events, &order, &trial);
            if next.loglik.is_finite() && next.loglik >= cur.loglik - 1e-12 * (1.0 + cur.loglik.abs()) {
                accepted = Some((trial, next));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, next)) = accepted else {
            break;
        };
        beta = trial;
        cur = next;
        converged = sup(&cur.score) <= tol;
    }
    // Monotone likelihood drives |β| off towards infinity while the score
    // decays; treat an implausible hazard ratio over the covariate range as
    // divergence.
    if !converged || beta.iter().zip(&ranges).any(|(b, r)| (b * r).abs() > MAX_LOG_HR) {
        return Err(Error::NonConvergence {
            iterations,
            score_norm: sup(&cur.score),
            beta,
        });
    }
    let information = DMatrix::from_row_slice(p, p, &cur.info) / n as f64;
    if p > 0 && information.clone().cholesky().is_none() {
        return Err(Error::SingularInformation);
    }

    // Breslow baseline and risk summaries at the solution, ascending time.
    let mut jump_times = Vec::new();
    let mut increments = Vec::new();
    let mut risk_summaries = Vec::new();
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut k = i;
        let mut d = 0.0;
        while k < n && times[order[k]] == t {
            let idx = order[k];
            let z = &zc[idx];
            let w = z.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp();
            s0 += w;
            for r in 0..p {
                s1[r] += w * z[r];
                for c in 0..p {
                    s2[r * p + c] += w * z[r] * z[c];
                }
            }
            d += events[idx] as f64;
            k += 1;
        }
        if d > 0.0 {
            jump_times.push(t);
            increments.push(d / s0);
            let nf = n as f64;
            risk_summaries.push(RiskSummary {
                s0: s0 / nf,
                s1: s1.iter().map(|x| x / nf).collect(),
                s2: s2.iter().map(|x| x / nf).collect(),
            });
        }
        i = k;
    }
    jump_times.reverse();
    increments.reverse();
    risk_summaries.reverse();
    let mut cumhaz = Vec::with_capacity(increments.len());
    let mut bcum = Vec::with_capacity(increments.len());
    let mut h = 0.0;
    let mut b = vec![0.0; p];
    for (inc, rs) in increments.iter().zip(&risk_summaries) {
        h += inc;
        for r in 0..p {
            b[r] += rs.s1[r] / rs.s0 * inc;
        }
        cumhaz.push(h);
        bcum.push(b.clone());
    }
    let score_norm = sup(&cur.score);
    Ok(CoxFit {
        beta,
        means,
        jump_times,
        increments,
        cumhaz,
        bcum,
        risk_summaries,
        information,
        converged,
        score_norm,
        iterations,
        n,
    })
}

/// exp(−Λ0(t)e^{βᵀz}).
pub fn cox_survival(fit: &CoxFit, t: f64, z: &[f64]) -> f64 {
    fit.survival(t, z)
}

/// One-rate exponential fit, λ = D / ΣX; covariates ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub rate: f64,
    pub mean_time: f64,
}

pub fn fit_exponential(samples: &[SurvivalSample]) -> Result<ExponentialFit> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let d: f64 = samples.iter().map(|s| s.indicator as f64).sum();
    let x: f64 = samples.iter().map(|s| s.observed_time).sum();
    if d == 0.0 {
        return Err(Error::NoEvents("exponential model"));
    }
    Ok(ExponentialFit {
        rate: d / x,
        mean_time: x / n,
    })
}

/// Known Weibull PH: S(t|z) = exp(−λ t^ρ exp(βᵀz + offset)).
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullPh {
    pub shape: f64,
    pub scale: f64,
    pub beta: Vec<f64>,
    pub offset: f64,
}

impl WeibullPh {
    pub fn lp(&self, z: &[f64]) -> f64 {
        self.offset + self.beta.iter().zip(z).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn cumhaz(&self, t: f64, z: &[f64]) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.scale * t.powf(self.shape) * self.lp(z).exp()
    }

    pub fn survival(&self, t: f64, z: &[f64]) -> f64 {
        (-self.cumhaz(t, z)).exp()
    }

    pub fn hazard(&self, t: f64, z: &[f64]) -> f64 {
        if t <= 0.0 {
            return if self.shape < 1.0 { f64::INFINITY } else if self.shape == 1.0 { self.scale * self.lp(z).exp() } else { 0.0 };
        }
        self.scale * self.shape * t.powf(self.shape - 1.0) * self.lp(z).exp()
    }

    /// Inverse survival: t with S(t|z) = v.
    pub fn quantile(&self, v: f64, z: &[f64]) -> f64 {
        ((-v.ln()) / (self.scale * self.lp(z).exp())).powf(1.0 / self.shape)
    }
}

/// A fitted or known survival curve S(t | z).
#[derive(Debug, Clone)]
pub enum SurvivalModel {
    /// S ≡ 1, e.g. a censoring model when no censoring occurred.
    Constant,
    KaplanMeier(KaplanMeierCurve),
    Cox(CoxFit),
    Exponential(ExponentialFit),
    Weibull(WeibullPh),
}

impl SurvivalModel {
    pub fn survival(&self, t: f64, z: &[f64]) -> f64 {
        match self {
            SurvivalModel::Constant => 1.0,
            SurvivalModel::KaplanMeier(km) => km.eval(t),
            SurvivalModel::Cox(fit) => fit.survival(t, z),
            SurvivalModel::Exponential(e) => (-e.rate * t.max(0.0)).exp(),
            SurvivalModel::Weibull(w) => w.survival(t, z),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SurvivalModel::Constant => "constant",
            SurvivalModel::KaplanMeier(_) => "km",
            SurvivalModel::Cox(_) => "cox",
            SurvivalModel::Exponential(_) => "exponential",
            SurvivalModel::Weibull(_) => "weibull",
        }
    }
}

// Risk-set pieces for a Nelson–Aalen / Breslow style influence.
#[derive(Debug, Clone)]
struct Hazard {
    jump_times: Vec<f64>,
    dlam: Vec<f64>,
    cumhaz: Vec<f64>,
    s0: Vec<f64>,
    bcum: Vec<Vec<f64>>,
    means: Vec<f64>,
    beta: Vec<f64>,
}

impl Hazard {
    fn from_km_samples(samples: &[SurvivalSample]) -> Hazard {
        let n = samples.len();
        let mut obs: Vec<(f64, u8)> = samples.iter().map(|s| (s.observed_time, s.indicator)).collect();
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut h = Hazard {
            jump_times: Vec::new(),
            dlam: Vec::new(),
            cumhaz: Vec::new(),
            s0: Vec::new(),
            bcum: Vec::new(),
            means: Vec::new(),
            beta: Vec::new(),
        };
        let mut cum = 0.0;
        let mut i = 0;
        while i < n {
            let t = obs[i].0;
            let y = (n - i) as f64;
            let mut d = 0.0;
            let mut k = i;
            while k < n && obs[k].0 == t {
                d += obs[k].1 as f64;
                k += 1;
            }
            if d > 0.0 {
                cum += d / y;
                h.jump_times.push(t);
                h.dlam.push(d / y);
                h.cumhaz.push(cum);
                h.s0.push(y / n as f64);
                h.bcum.push(Vec::new());
            }
            i = k;
        }
        h
    }

    fn from_cox(fit: &CoxFit) -> Hazard {
        Hazard {
            jump_times: fit.jump_times.clone(),
            dlam: fit.increments.clone(),
            cumhaz: fit.cumhaz.clone(),
            s0: fit.risk_summaries.iter().map(|r| r.s0).collect(),
            bcum: fit.bcum.clone(),
            means: fit.means.clone(),
            beta: fit.beta.clone(),
        }
    }

    fn eta(&self, z: &[f64]) -> f64 {
        self.beta
            .iter()
            .zip(z.iter().zip(&self.means))
            .map(|(b, (x, m))| b * (x - m))
            .sum()
    }
}

#[derive(Debug, Clone)]
enum InfluenceKind {
    Zero,
    Breslow {
        hazard: Hazard,
        /// A⁻¹U_l per subject (empty when p = 0).
        beta_if: Vec<Vec<f64>>,
        eta: Vec<f64>,
    },
    Exponential {
        /// (δ_l − λX_l)/mean(X).
        rate_if: Vec<f64>,
    },
}

/// Influence of a fitted survival model on the curve, arranged so that
/// Σ_k w_k κ_l(t_k, z_k) can be formed for all subjects l in O(n + K).
#[derive(Debug, Clone)]
pub struct ModelInfluence {
    model: SurvivalModel,
    kind: InfluenceKind,
    times: Vec<f64>,
    events: Vec<u8>,
}

/// Running sums for one weighted influence functional.
#[derive(Debug, Clone)]
pub struct InfluenceAccumulator {
    bins: Vec<f64>,
    v: Vec<f64>,
    scalar: f64,
}

impl ModelInfluence {
    /// Influence of `model` fitted on `samples`. Known or constant models
    /// carry zero influence.
    pub fn new(model: &SurvivalModel, samples: &[SurvivalSample]) -> Result<Self> {
        let kind = match model {
            SurvivalModel::Constant | SurvivalModel::Weibull(_) => InfluenceKind::Zero,
            SurvivalModel::KaplanMeier(_) => InfluenceKind::Breslow {
                hazard: Hazard::from_km_samples(samples),
                beta_if: vec![Vec::new(); samples.len()],
                eta: vec![0.0; samples.len()],
            },
            SurvivalModel::Cox(fit) => {
                let pieces = fit.influence_pieces(samples)?;
                InfluenceKind::Breslow {
                    hazard: Hazard::from_cox(fit),
                    beta_if: pieces.beta_if,
                    eta: pieces.eta,
                }
            }
            SurvivalModel::Exponential(e) => InfluenceKind::Exponential {
                rate_if: samples
                    .iter()
                    .map(|s| (s.indicator as f64 - e.rate * s.observed_time) / e.mean_time)
                    .collect(),
            },
        };
        Ok(Self {
            model: model.clone(),
            kind,
            times: samples.iter().map(|s| s.observed_time).collect(),
            events: samples.iter().map(|s| s.indicator).collect(),
        })
    }

    pub fn model(&self) -> &SurvivalModel {
        &self.model
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, InfluenceKind::Zero)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn accumulator(&self) -> InfluenceAccumulator {
        match &self.kind {
            InfluenceKind::Breslow { hazard, .. } => InfluenceAccumulator {
                bins: vec![0.0; hazard.jump_times.len()],
                v: vec![0.0; hazard.means.len()],
                scalar: 0.0,
            },
            _ => InfluenceAccumulator {
                bins: Vec::new(),
                v: Vec::new(),
                scalar: 0.0,
            },
        }
    }

    /// Adds w · κ_·(t, z) to the functional.
    pub fn add(&self, acc: &mut InfluenceAccumulator, t: f64, z: &[f64], w: f64) {
        if w == 0.0 {
            return;
        }
        match &self.kind {
            InfluenceKind::Zero => {}
            InfluenceKind::Breslow { hazard, .. } => {
                let k = jumps_upto(&hazard.jump_times, t);
                if k == 0 {
                    return;
                }
                let e = hazard.eta(z).exp();
                let s = self.model.survival(t, z);
                let c = -w * s * e;
                acc.bins[k - 1] += c;
                let lam = hazard.cumhaz[k - 1];
                for r in 0..acc.v.len() {
                    acc.v[r] += c * (lam * (z[r] - hazard.means[r]) - hazard.bcum[k - 1][r]);
                }
            }
            InfluenceKind::Exponential { .. } => {
                let s = self.model.survival(t, z);
                acc.scalar += -w * t * s;
            }
        }
    }

    /// κ_l(t, z) for a single subject. O(n); meant for tests.
    pub fn kappa(&self, l: usize, t: f64, z: &[f64]) -> f64 {
        let mut acc = self.accumulator();
        self.add(&mut acc, t, z, 1.0);
        self.finish_one(&acc, l)
    }

    fn finish_one(&self, acc: &InfluenceAccumulator, l: usize) -> f64 {
        self.finish(acc)[l]
    }

    /// Σ_k w_k κ_l(t_k, z_k) for every subject l of the fitting sample.
    pub fn finish(&self, acc: &InfluenceAccumulator) -> Vec<f64> {
        let n = self.times.len();
        match &self.kind {
            InfluenceKind::Zero => vec![0.0; n],
            InfluenceKind::Exponential { rate_if } => rate_if.iter().map(|r| acc.scalar * r).collect(),
            InfluenceKind::Breslow { hazard, beta_if, eta } => {
                let m = hazard.jump_times.len();
                let mut r = vec![0.0; m];
                let mut run = 0.0;
                for j in (0..m).rev() {
                    run += acc.bins[j];
                    r[j] = run;
                }
                // prefix[k] = Σ_{j<k} R(j) dΛ_j / s0_j
                let mut prefix = vec![0.0; m + 1];
                for j in 0..m {
                    prefix[j + 1] = prefix[j] + r[j] * hazard.dlam[j] / hazard.s0[j];
                }
                (0..n)
                    .map(|l| {
                        let x = self.times[l];
                        let k = jumps_upto(&hazard.jump_times, x);
                        let mut v = -eta[l].exp() * prefix[k];
                        if self.events[l] == 1 && k > 0 && hazard.jump_times[k - 1] == x {
                            v += r[k - 1] / hazard.s0[k - 1];
                        }
                        for (a, b) in acc.v.iter().zip(&beta_if[l]) {
                            v += a * b;
                        }
                        v
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle6() -> Vec<SurvivalSample> {
        [(1.0, 1, 1.0), (2.0, 1, 0.0), (3.0, 0, 1.0), (4.0, 1, 1.0), (5.0, 0, 0.0), (6.0, 1, 0.0)]
            .iter()
            .enumerate()
            .map(|(i, &(t, d, z))| SurvivalSample::new(format!("s{i}"), t, d, vec![z], 0))
            .collect()
    }

    #[test]
    fn km_hand_example() {
        let s = vec![
            SurvivalSample::new("a", 2.0, 1, vec![], 0),
            SurvivalSample::new("b", 5.0, 0, vec![], 0),
            SurvivalSample::new("c", 8.0, 1, vec![], 0),
        ];
        let km = fit_censoring_km(&s).unwrap();
        assert_eq!(km.eval(1.999), 1.0);
        assert!((km.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.eval(7.9) - 2.0 / 3.0).abs() < 1e-15);
        // the last subject is at risk alone, so the product-limit drops to 0
        assert_eq!(km.eval(8.0), 0.0);
    }

    #[test]
    fn km_no_events_is_one() {
        let s: Vec<_> = (0..3).map(|i| SurvivalSample::new(i.to_string(), i as f64 + 1.0, 0, vec![], 0)).collect();
        let km = fit_censoring_km(&s).unwrap();
        assert!(km.jump_times.is_empty());
        assert_eq!(km.eval(100.0), 1.0);
    }

    #[test]
    fn km_single_subject() {
        let km = fit_censoring_km(&[SurvivalSample::new("x", 4.0, 1, vec![], 0)]).unwrap();
        assert_eq!(km.eval(3.9), 1.0);
        assert_eq!(km.eval(4.0), 0.0);
    }

    #[test]
    fn km_empty_errors() {
        assert!(matches!(fit_censoring_km(&[]), Err(Error::NoSamples)));
    }

    #[test]
    fn cox_score_zero_and_scores_sum() {
        let s = oracle6();
        let fit = fit_cox(&s, 1e-10, 50).unwrap();
        assert!(fit.converged);
        let sc = fit.scores(&s);
        let sum: f64 = sc.iter().map(|u| u[0]).sum();
        assert!(sum.abs() < 1e-8, "{sum}");
    }

    #[test]
    fn cox_gradient_matches_finite_difference() {
        let s = oracle6();
        for b in [-0.7, 0.0, 0.4] {
            let h = 1e-5;
            let fd = (log_partial_likelihood(&s, &[b + h]).unwrap() - log_partial_likelihood(&s, &[b - h]).unwrap()) / (2.0 * h);
            let g = partial_score(&s, &[b]).unwrap()[0];
            assert!((fd - g).abs() <= 1e-5 * g.abs().max(1e-3), "{fd} vs {g}");
        }
    }

    #[test]
    fn cox_null_model_is_nelson_aalen() {
        let s: Vec<_> = oracle6().into_iter().map(|mut x| {
            x.covariates.clear();
            x
        }).collect();
        let fit = fit_cox(&s, 1e-8, 50).unwrap();
        // NA at t=4: 1/6 + 1/5 + 1/3
        let na = 1.0 / 6.0 + 1.0 / 5.0 + 1.0 / 3.0;
        assert!((fit.baseline_cumhaz(4.0) - na).abs() < 1e-14);
        assert!((cox_survival(&fit, 4.0, &[]) - (-na).exp()).abs() < 1e-14);
        assert_eq!(cox_survival(&fit, 0.0, &[]), 1.0);
    }

    #[test]
    fn cox_survival_power_relation() {
        let s = oracle6();
        let fit = fit_cox(&s, 1e-10, 50).unwrap();
        let z = 2f64.ln() / fit.beta[0];
        for t in [1.0, 2.5, 4.0, 6.0] {
            let s0 = cox_survival(&fit, t, &[0.0]);
            let s2 = cox_survival(&fit, t, &[z]);
            assert!((s2 - s0 * s0).abs() < 1e-12);
        }
    }

    #[test]
    fn cox_separation_errors() {
        let s: Vec<_> = (0..8)
            .map(|i| {
                let z = if i < 4 { 1.0 } else { 0.0 };
                let d = if i < 4 { 1 } else { 0 };
                SurvivalSample::new(i.to_string(), i as f64 + 1.0, d, vec![z], 0)
            })
            .collect();
        assert!(matches!(fit_cox(&s, 1e-8, 50), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn cox_kappa_zero_at_origin_and_mean_zero() {
        let s = oracle6();
        let fit = fit_cox(&s, 1e-10, 50).unwrap();
        let inf = fit.influence_pieces(&s).unwrap();
        for i in 0..s.len() {
            assert_eq!(inf.kappa(i, 0.0, &[1.0]), 0.0);
        }
        for (t, z) in [(1.5, 0.0), (3.5, 1.0), (6.0, 0.5)] {
            let m: f64 = (0..s.len()).map(|i| inf.kappa(i, t, &[z])).sum::<f64>() / s.len() as f64;
            assert!(m.abs() < 1e-10, "{m}");
        }
    }

    #[test]
    fn accumulator_matches_direct_kappa() {
        let s = oracle6();
        let fit = fit_cox(&s, 1e-10, 50).unwrap();
        let inf = fit.influence_pieces(&s).unwrap();
        let model = SurvivalModel::Cox(fit);
        let mi = ModelInfluence::new(&model, &s).unwrap();
        let pts = [(1.5, 0.0, 0.3), (3.5, 1.0, -1.2), (6.0, 0.5, 2.0), (0.5, 1.0, 1.0)];
        let mut acc = mi.accumulator();
        for &(t, z, w) in &pts {
            mi.add(&mut acc, t, &[z], w);
        }
        let got = mi.finish(&acc);
        for l in 0..s.len() {
            let want: f64 = pts.iter().map(|&(t, z, w)| w * inf.kappa(l, t, &[z])).sum();
            assert!((got[l] - want).abs() < 1e-12, "{l}: {} vs {want}", got[l]);
        }
    }

    #[test]
    fn km_influence_matches_finite_perturbation() {
        // Gateaux derivative of the product-limit curve toward one subject.
        let s = oracle6();
        let km = fit_censoring_km(&s).unwrap();
        let model = SurvivalModel::KaplanMeier(km.clone());
        let mi = ModelInfluence::new(&model, &s).unwrap();
        let n = s.len() as f64;
        let t = 4.5;
        for l in 0..s.len() {
            let k = mi.kappa(l, t, &[]);
            // NA-based influence -G(t)∫dM/y, by direct sum
            let mut direct = 0.0;
            for (j, &tj) in km.jump_times.iter().enumerate() {
                if tj > t {
                    break;
                }
                let y = km.n_at_risk[j] as f64 / n;
                let d = s.iter().filter(|x| x.observed_time == tj && x.indicator == 1).count() as f64;
                let dn = if s[l].observed_time == tj && s[l].indicator == 1 { 1.0 } else { 0.0 };
                let yl = if s[l].observed_time >= tj { 1.0 } else { 0.0 };
                direct += (dn - yl * d / km.n_at_risk[j] as f64) / y;
            }
            let want = -km.eval(t) * direct;
            assert!((k - want).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_influence() {
        let s = oracle6();
        let fit = fit_exponential(&s).unwrap();
        let mi = ModelInfluence::new(&SurvivalModel::Exponential(fit), &s).unwrap();
        let t = 2.0;
        let sum: f64 = (0..s.len()).map(|l| mi.kappa(l, t, &[])).sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn weibull_quantile_inverts() {
        let w = WeibullPh {
            shape: 1.35,
            scale: 0.0008,
            beta: vec![0.35, 0.6, 0.25],
            offset: -0.05,
        };
        let z = [1.0, 0.3, 0.0];
        let t = w.quantile(0.4, &z);
        assert!((w.survival(t, &z) - 0.4).abs() < 1e-13);
    }
}
