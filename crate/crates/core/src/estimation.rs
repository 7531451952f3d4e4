//! Restricted records, nuisance bundles, pairwise IPCW / m-IPCW kernels and
//! the win-probability point estimates.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::copula::{fit_copula_lenient, CensoredUniformPair, CopulaFit, CopulaSpec, Family};
use crate::error::{Error, Result};
use crate::survival::{
    fit_censoring_km, fit_cox, fit_exponential, ModelInfluence, SurvivalModel, SurvivalSample,
};

/// One row of long-format trial data. `event_type` 0 is the follow-up row.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub id: String,
    pub arm: u8,
    pub time: f64,
    pub status: u8,
    pub event_type: u32,
    pub covariates: Vec<f64>,
}

/// A subject's per-component observation restricted at τ. Components are
/// indexed 0..Q in priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedRecord {
    pub subject_id: String,
    pub arm: u8,
    pub covariates: Vec<f64>,
    pub y_tilde: Vec<f64>,
    pub delta: Vec<u8>,
    pub bar_delta: Vec<u8>,
    pub gate_u: Vec<f64>,
    /// min(follow-up, τ).
    pub follow_up: f64,
    /// Follow-up ended by censoring before τ.
    pub censored: bool,
}

impl RestrictedRecord {
    pub fn n_components(&self) -> usize {
        self.y_tilde.len()
    }

    /// Builds a record from latent quantities: follow-up end `c` and
    /// component event times (`None` when not observed).
    pub fn from_latent(
        id: impl Into<String>,
        arm: u8,
        covariates: Vec<f64>,
        c: f64,
        event_times: &[Option<f64>],
        tau: f64,
    ) -> Self {
        let q = event_times.len();
        let fu = c.min(tau);
        let mut y_tilde = Vec::with_capacity(q);
        let mut delta = Vec::with_capacity(q);
        for t in event_times {
            match *t {
                Some(t) if t <= fu => {
                    y_tilde.push(t);
                    delta.push(1);
                }
                _ => {
                    y_tilde.push(fu);
                    delta.push(0);
                }
            }
        }
        let mut bar_delta = Vec::with_capacity(q);
        let mut gate_u = Vec::with_capacity(q);
        let mut bd = 1u8;
        for k in 0..q {
            bar_delta.push(bd);
            gate_u.push(if k == 0 || bd == 0 { tau } else { fu });
            bd *= 1 - delta[k];
        }
        let event_at_end = y_tilde.iter().zip(&delta).any(|(&y, &d)| d == 1 && y == fu);
        RestrictedRecord {
            subject_id: id.into(),
            arm,
            covariates,
            y_tilde,
            delta,
            bar_delta,
            gate_u,
            follow_up: fu,
            censored: c < tau && !event_at_end,
        }
    }
}

/// Restricts long-format rows at τ. Component rows with status 0 or with an
/// event type outside `priority` are ignored; follow-up times at or beyond
/// τ count as complete observation through τ.
pub fn restrict(rows: &[LongRow], tau: f64, priority: &[u32]) -> Result<Vec<RestrictedRecord>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    if priority.is_empty() {
        return Err(Error::InvalidInput("priority order is empty".into()));
    }
    struct Acc<'a> {
        first: &'a LongRow,
        follow: Option<&'a LongRow>,
        events: Vec<Option<f64>>,
    }
    let mut order: Vec<&str> = Vec::new();
    let mut by_id: HashMap<&str, Acc> = HashMap::new();
    for row in rows {
        let acc = by_id.entry(row.id.as_str()).or_insert_with(|| {
            order.push(row.id.as_str());
            Acc {
                first: row,
                follow: None,
                events: vec![None; priority.len()],
            }
        });
        if row.arm != acc.first.arm || row.covariates != acc.first.covariates {
            return Err(Error::Data(format!("subject {}: inconsistent arm or covariates across rows", row.id)));
        }
        if row.event_type == 0 {
            if acc.follow.is_some() {
                return Err(Error::Data(format!("subject {}: duplicate follow-up row", row.id)));
            }
            acc.follow = Some(row);
        } else if let Some(q) = priority.iter().position(|&p| p == row.event_type) {
            if row.status == 1 {
                if acc.events[q].is_some() {
                    return Err(Error::Data(format!(
                        "subject {}: duplicate rows for event type {}",
                        row.id, row.event_type
                    )));
                }
                acc.events[q] = Some(row.time);
            }
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let acc = &by_id[id];
        let follow = acc
            .follow
            .ok_or_else(|| Error::Data(format!("subject {id}: no follow-up row (event_type = 0)")))?;
        for (q, t) in acc.events.iter().enumerate() {
            if let Some(t) = t {
                if *t > follow.time {
                    return Err(Error::Data(format!(
                        "subject {id}: event type {} at {t} after end of follow-up {}",
                        priority[q], follow.time
                    )));
                }
            }
        }
        out.push(RestrictedRecord::from_latent(
            id,
            follow.arm,
            follow.covariates.clone(),
            follow.time,
            &acc.events,
            tau,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ipcw,
    MIpcw,
    /// Uncensored kernels on the observed times; valid without censoring.
    Raw,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ipcw => "IPCW",
            Method::MIpcw => "m-IPCW",
            Method::Raw => "raw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ipcw" => Ok(Method::Ipcw),
            "m-ipcw" | "mipcw" | "m_ipcw" => Ok(Method::MIpcw),
            "raw" => Ok(Method::Raw),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

/// Everything the kernels evaluate. Arrays are indexed by arm (0 control,
/// 1 treated).
#[derive(Debug, Clone)]
pub struct NuisanceBundle {
    pub censoring: [SurvivalModel; 2],
    /// Per arm, one margin per component; may be empty for IPCW.
    pub margins: [Vec<SurvivalModel>; 2],
    pub copula: [CopulaSpec; 2],
    pub eps: f64,
}

impl NuisanceBundle {
    /// G ≡ 1, no margins, independence: the uncensored setting.
    pub fn trivial(eps: f64) -> Self {
        Self {
            censoring: [SurvivalModel::Constant, SurvivalModel::Constant],
            margins: [Vec::new(), Vec::new()],
            copula: [CopulaSpec::independence(), CopulaSpec::independence()],
            eps,
        }
    }

    /// G_a(t|z) floored at eps; the flag reports a floor hit.
    #[inline]
    pub fn g(&self, arm: u8, t: f64, z: &[f64]) -> (f64, bool) {
        let g = self.censoring[arm as usize].survival(t, z).max(1e-10);
        if g < self.eps {
            (self.eps, true)
        } else {
            (g, false)
        }
    }

    /// Margin S_{q,a}(t|z) truncated to [ε, 1−ε].
    #[inline]
    pub fn margin(&self, arm: u8, q: usize, t: f64, z: &[f64]) -> f64 {
        self.margins[arm as usize][q]
            .survival(t, z)
            .clamp(self.eps, 1.0 - self.eps)
    }

    fn check_margins(&self, q: usize) -> Result<()> {
        for a in 0..2 {
            if self.margins[a].len() < q {
                return Err(Error::InvalidInput(format!(
                    "m-IPCW needs {q} event margins in arm {a}, found {}",
                    self.margins[a].len()
                )));
            }
        }
        Ok(())
    }

    fn prefix(&self, arm: u8, q: usize, s: f64, t: f64, z: &[f64]) -> Vec<f64> {
        let mut us: Vec<f64> = (0..q).map(|k| self.margin(arm, k, s, z)).collect();
        us.push(self.margin(arm, q, t, z));
        us
    }
}

/// Conditional probability that components before `q` stay event-free from
/// u to τ given component q survives past t.
pub fn ratio_gt(bundle: &NuisanceBundle, arm: u8, q: usize, u: f64, t: f64, z: &[f64], tau: f64) -> Result<f64> {
    ratio(bundle, arm, q, u, t, z, tau, false)
}

/// As [`ratio_gt`] but given component q fails at t.
pub fn ratio_eq(bundle: &NuisanceBundle, arm: u8, q: usize, u: f64, t: f64, z: &[f64], tau: f64) -> Result<f64> {
    ratio(bundle, arm, q, u, t, z, tau, true)
}

#[allow(clippy::too_many_arguments)]
fn ratio(bundle: &NuisanceBundle, arm: u8, q: usize, u: f64, t: f64, z: &[f64], tau: f64, eq: bool) -> Result<f64> {
    if u >= tau || q == 0 {
        return Ok(1.0);
    }
    bundle.check_margins(q + 1)?;
    let spec = &bundle.copula[arm as usize];
    let num_us = bundle.prefix(arm, q, tau, t, z);
    let den_us = bundle.prefix(arm, q, u, t, z);
    let (num, den) = if eq {
        (spec.prefix_dlast(&num_us)?, spec.prefix_dlast(&den_us)?)
    } else {
        (spec.prefix_cdf(&num_us)?, spec.prefix_cdf(&den_us)?)
    };
    let floor = bundle.eps * bundle.eps;
    if !(den >= floor) {
        return Err(Error::Positivity {
            treated: format!("arm {arm}"),
            control: String::new(),
            component: q + 1,
            value: den,
        });
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Counts of floor hits during kernel evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelWarnings {
    pub g_floor_hits: usize,
}

#[inline]
fn strictly_tied_at_tau(r: &RestrictedRecord, k: usize, tau: f64) -> bool {
    r.y_tilde[k] == tau && r.delta[k] == 0
}

fn label_positivity(e: Error, i: &RestrictedRecord, j: &RestrictedRecord) -> Error {
    match e {
        Error::Positivity { component, value, .. } => Error::Positivity {
            treated: i.subject_id.clone(),
            control: j.subject_id.clone(),
            component,
            value,
        },
        other => other,
    }
}

/// Win and loss terms of the treated record `i` against the control record
/// `j` on component `q` (0-based).
pub fn kernel_pair(
    i: &RestrictedRecord,
    j: &RestrictedRecord,
    q: usize,
    method: Method,
    bundle: &NuisanceBundle,
    tau: f64,
) -> Result<(f64, f64)> {
    let mut w = KernelWarnings::default();
    kernel_pair_counted(i, j, q, method, bundle, tau, &mut w).map_err(|e| label_positivity(e, i, j))
}

#[inline]
fn denom(bundle: &NuisanceBundle, i: &RestrictedRecord, j: &RestrictedRecord, t: f64, w: &mut KernelWarnings) -> f64 {
    let (g1, h1) = bundle.g(1, t, &i.covariates);
    let (g0, h0) = bundle.g(0, t, &j.covariates);
    if h1 || h0 {
        w.g_floor_hits += 1;
    }
    g1 * g0
}

fn kernel_pair_counted(
    i: &RestrictedRecord,
    j: &RestrictedRecord,
    q: usize,
    method: Method,
    bundle: &NuisanceBundle,
    tau: f64,
    w: &mut KernelWarnings,
) -> Result<(f64, f64)> {
    let yi = i.y_tilde[q];
    let yj = j.y_tilde[q];
    let win_ind = yi > yj && j.delta[q] == 1;
    let loss_ind = yj > yi && i.delta[q] == 1;
    if q == 0 {
        return Ok(match method {
            Method::Raw => ((yi > yj) as u8 as f64, (yj > yi) as u8 as f64),
            _ => {
                let win = if win_ind { 1.0 / denom(bundle, i, j, yj, w) } else { 0.0 };
                let loss = if loss_ind { 1.0 / denom(bundle, i, j, yi, w) } else { 0.0 };
                (win, loss)
            }
        });
    }
    match method {
        Method::Raw => {
            let gate = (0..q).all(|k| strictly_tied_at_tau(i, k, tau) && strictly_tied_at_tau(j, k, tau));
            if !gate {
                return Ok((0.0, 0.0));
            }
            Ok(((yi > yj) as u8 as f64, (yj > yi) as u8 as f64))
        }
        Method::Ipcw => {
            if !(win_ind || loss_ind) {
                return Ok((0.0, 0.0));
            }
            let gate = (0..q).all(|k| strictly_tied_at_tau(i, k, tau) && strictly_tied_at_tau(j, k, tau));
            if !gate {
                return Ok((0.0, 0.0));
            }
            let d = denom(bundle, i, j, tau, w);
            Ok((win_ind as u8 as f64 / d, loss_ind as u8 as f64 / d))
        }
        Method::MIpcw => {
            if !(win_ind || loss_ind) || i.bar_delta[q] == 0 || j.bar_delta[q] == 0 {
                return Ok((0.0, 0.0));
            }
            let (ui, uj) = (i.gate_u[q], j.gate_u[q]);
            let win = if win_ind {
                let r1 = ratio_gt(bundle, 1, q, ui, yj, &i.covariates, tau)?;
                let r0 = ratio_eq(bundle, 0, q, uj, yj, &j.covariates, tau)?;
                r1 * r0 / denom(bundle, i, j, yj, w)
            } else {
                0.0
            };
            let loss = if loss_ind {
                let r0 = ratio_gt(bundle, 0, q, uj, yi, &j.covariates, tau)?;
                let r1 = ratio_eq(bundle, 1, q, ui, yi, &i.covariates, tau)?;
                r0 * r1 / denom(bundle, i, j, yi, w)
            } else {
                0.0
            };
            Ok((win, loss))
        }
    }
}

/// Component-wise win/loss probability estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct WinComponents {
    pub method: Method,
    pub tau: f64,
    pub pi_tq: Vec<f64>,
    pub pi_cq: Vec<f64>,
    pub pi_t: f64,
    pub pi_c: f64,
    pub pi_u: f64,
}

impl WinComponents {
    pub fn from_components(method: Method, tau: f64, pi_tq: Vec<f64>, pi_cq: Vec<f64>) -> Self {
        let pi_t: f64 = pi_tq.iter().sum();
        let pi_c: f64 = pi_cq.iter().sum();
        Self {
            method,
            tau,
            pi_tq,
            pi_cq,
            pi_t,
            pi_c,
            pi_u: 1.0 - pi_t - pi_c,
        }
    }
}

/// Pairwise kernel values for all n₁ × n₀ pairs and Q components, kept for
/// the variance pass.
#[derive(Debug, Clone)]
pub struct PairKernels {
    pub n1: usize,
    pub n0: usize,
    pub q: usize,
    /// Indexed ((i·n₀) + j)·Q + q.
    pub win: Vec<f64>,
    pub loss: Vec<f64>,
}

impl PairKernels {
    #[inline]
    pub fn index(&self, i: usize, j: usize, q: usize) -> usize {
        (i * self.n0 + j) * self.q + q
    }
}

/// Point estimate plus the cached pairwise kernels.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub components: WinComponents,
    pub kernels: PairKernels,
    pub treated: Vec<usize>,
    pub control: Vec<usize>,
    pub warnings: KernelWarnings,
}

/// Indices of treated and control records.
pub fn split_arms(records: &[RestrictedRecord]) -> Result<(Vec<usize>, Vec<usize>)> {
    let treated: Vec<usize> = (0..records.len()).filter(|&k| records[k].arm == 1).collect();
    let control: Vec<usize> = (0..records.len()).filter(|&k| records[k].arm == 0).collect();
    if treated.is_empty() {
        return Err(Error::EmptyArm(1));
    }
    if control.is_empty() {
        return Err(Error::EmptyArm(0));
    }
    Ok((treated, control))
}

/// Double-sum estimator over all treated × control pairs.
pub fn estimate(records: &[RestrictedRecord], tau: f64, method: Method, bundle: &NuisanceBundle) -> Result<WinComponents> {
    estimate_full(records, tau, method, bundle).map(|e| e.components)
}

pub fn estimate_full(records: &[RestrictedRecord], tau: f64, method: Method, bundle: &NuisanceBundle) -> Result<Estimate> {
    let (treated, control) = split_arms(records)?;
    let q = records[0].n_components();
    if records.iter().any(|r| r.n_components() != q) {
        return Err(Error::InvalidInput("records disagree on the number of components".into()));
    }
    let n0 = control.len();
    let rows: Vec<Result<(Vec<f64>, Vec<f64>, KernelWarnings)>> = treated
        .par_iter()
        .map(|&ti| {
            let ri = &records[ti];
            let mut win = vec![0.0; n0 * q];
            let mut loss = vec![0.0; n0 * q];
            let mut w = KernelWarnings::default();
            for (jj, &cj) in control.iter().enumerate() {
                let rj = &records[cj];
                for k in 0..q {
                    let (a, b) =
                        kernel_pair_counted(ri, rj, k, method, bundle, tau, &mut w).map_err(|e| label_positivity(e, ri, rj))?;
                    win[jj * q + k] = a;
                    loss[jj * q + k] = b;
                }
            }
            Ok((win, loss, w))
        })
        .collect();
    let n1 = treated.len();
    let mut win = Vec::with_capacity(n1 * n0 * q);
    let mut loss = Vec::with_capacity(n1 * n0 * q);
    let mut warnings = KernelWarnings::default();
    for row in rows {
        let (w, l, c) = row?;
        win.extend_from_slice(&w);
        loss.extend_from_slice(&l);
        warnings.g_floor_hits += c.g_floor_hits;
    }
    let kernels = PairKernels { n1, n0, q, win, loss };
    let components = components_from_kernels(&kernels, method, tau);
    Ok(Estimate {
        components,
        kernels,
        treated,
        control,
        warnings,
    })
}

/// Averages cached kernels; row sums first, then rows in index order.
pub fn components_from_kernels(k: &PairKernels, method: Method, tau: f64) -> WinComponents {
    let mut pt = vec![0.0; k.q];
    let mut pc = vec![0.0; k.q];
    let per_row = k.n0 * k.q;
    for i in 0..k.n1 {
        let base = i * per_row;
        let mut rt = vec![0.0; k.q];
        let mut rc = vec![0.0; k.q];
        for j in 0..k.n0 {
            for c in 0..k.q {
                rt[c] += k.win[base + j * k.q + c];
                rc[c] += k.loss[base + j * k.q + c];
            }
        }
        for c in 0..k.q {
            pt[c] += rt[c];
            pc[c] += rc[c];
        }
    }
    let m = (k.n1 * k.n0) as f64;
    WinComponents::from_components(
        method,
        tau,
        pt.into_iter().map(|x| x / m).collect(),
        pc.into_iter().map(|x| x / m).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub nb: f64,
    pub wr: f64,
    pub wo: f64,
}

/// NB, WR and WO from the total win/loss probabilities.
pub fn summarize(c: &WinComponents) -> Result<Summary> {
    summarize_pi(c.pi_t, c.pi_c)
}

pub fn summarize_pi(pi_t: f64, pi_c: f64) -> Result<Summary> {
    let nb = pi_t - pi_c;
    if !(pi_c > 0.0) {
        return Err(Error::WinRatioUndefined(pi_c));
    }
    if !(nb.abs() < 1.0) {
        return Err(Error::WinOddsUndefined(nb.abs()));
    }
    Ok(Summary {
        nb,
        wr: pi_t / pi_c,
        wo: (1.0 + nb) / (1.0 - nb),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorModel {
    Km,
    Cox,
}

impl FromStr for CensorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "km" => Ok(CensorModel::Km),
            "cox" => Ok(CensorModel::Cox),
            other => Err(Error::InvalidInput(format!("unknown censoring model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginModel {
    Cox,
    /// One-rate exponential, ignoring covariates.
    Exponential,
}

impl FromStr for MarginModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cox" => Ok(MarginModel::Cox),
            "exponential" | "exp" => Ok(MarginModel::Exponential),
            other => Err(Error::InvalidInput(format!("unknown margin model '{other}'"))),
        }
    }
}

/// Working-model choices for the nuisance fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceConfig {
    pub censor: CensorModel,
    pub margin: MarginModel,
    pub copula: Family,
    pub eps: f64,
    pub cox_tol: f64,
    pub cox_max_iter: usize,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            censor: CensorModel::Cox,
            margin: MarginModel::Cox,
            copula: Family::Gumbel,
            eps: 1e-6,
            cox_tol: 1e-8,
            cox_max_iter: 50,
        }
    }
}

/// Fitted nuisances with what the variance pass needs: per-arm influence
/// objects (rows follow the arm's record order) and copula fits.
#[derive(Debug, Clone)]
pub struct FittedNuisances {
    pub bundle: NuisanceBundle,
    pub censor_influence: [ModelInfluence; 2],
    /// Empty when margins were not fitted.
    pub margin_influence: [Vec<ModelInfluence>; 2],
    pub copula_fits: [CopulaFit; 2],
    pub copula_pairs: [Vec<CensoredUniformPair>; 2],
}

/// Samples for the censoring model: X = min(follow-up, τ), censoring event
/// when follow-up ended by censoring before τ.
pub fn censoring_samples(records: &[RestrictedRecord], arm: u8) -> Vec<SurvivalSample> {
    records
        .iter()
        .filter(|r| r.arm == arm)
        .map(|r| SurvivalSample::new(r.subject_id.clone(), r.follow_up, r.censored as u8, r.covariates.clone(), arm))
        .collect()
}

/// Samples for component q's margin: (Ỹ_q, δ_q).
pub fn margin_samples(records: &[RestrictedRecord], arm: u8, q: usize) -> Vec<SurvivalSample> {
    records
        .iter()
        .filter(|r| r.arm == arm)
        .map(|r| SurvivalSample::new(r.subject_id.clone(), r.y_tilde[q], r.delta[q], r.covariates.clone(), arm))
        .collect()
}

fn fit_censoring(samples: &[SurvivalSample], cfg: &NuisanceConfig) -> Result<SurvivalModel> {
    if samples.iter().all(|s| s.indicator == 0) {
        return Ok(SurvivalModel::Constant);
    }
    Ok(match cfg.censor {
        CensorModel::Km => SurvivalModel::KaplanMeier(fit_censoring_km(samples)?),
        CensorModel::Cox => SurvivalModel::Cox(fit_cox(samples, cfg.cox_tol, cfg.cox_max_iter)?),
    })
}

fn fit_margin(samples: &[SurvivalSample], cfg: &NuisanceConfig) -> Result<SurvivalModel> {
    Ok(match cfg.margin {
        MarginModel::Cox => SurvivalModel::Cox(fit_cox(samples, cfg.cox_tol, cfg.cox_max_iter)?),
        MarginModel::Exponential => SurvivalModel::Exponential(fit_exponential(samples)?),
    })
}

/// Copula pairs of an arm: fitted margin values at the observed times.
/// Q > 2 pools every component pair (pairwise composite likelihood).
pub fn copula_pairs(records: &[RestrictedRecord], arm: u8, margins: &[SurvivalModel], eps: f64) -> Vec<CensoredUniformPair> {
    let q = margins.len();
    let mut pairs = Vec::new();
    for a in 0..q {
        for b in (a + 1)..q {
            for r in records.iter().filter(|r| r.arm == arm) {
                let u1 = margins[a].survival(r.y_tilde[a], &r.covariates);
                let u2 = margins[b].survival(r.y_tilde[b], &r.covariates);
                pairs.push(CensoredUniformPair::new(u1, u2, r.delta[a], r.delta[b], eps));
            }
        }
    }
    pairs
}

/// Fits censoring models, and for m-IPCW the event margins and copulas.
pub fn fit_nuisances(records: &[RestrictedRecord], method: Method, cfg: &NuisanceConfig) -> Result<FittedNuisances> {
    split_arms(records)?;
    let q = records[0].n_components();
    let mut censoring = Vec::with_capacity(2);
    let mut censor_influence = Vec::with_capacity(2);
    for arm in 0..2u8 {
        let s = censoring_samples(records, arm);
        let m = fit_censoring(&s, cfg)?;
        censor_influence.push(ModelInfluence::new(&m, &s)?);
        censoring.push(m);
    }
    let mut margins = [Vec::new(), Vec::new()];
    let mut margin_influence = [Vec::new(), Vec::new()];
    let mut copula = [CopulaSpec::independence(); 2];
    let mut copula_fits = [CopulaFit::independence(), CopulaFit::independence()];
    let mut pairs_out = [Vec::new(), Vec::new()];
    if method == Method::MIpcw && q > 1 {
        for arm in 0..2u8 {
            let a = arm as usize;
            for k in 0..q {
                let s = margin_samples(records, arm, k);
                let m = fit_margin(&s, cfg)?;
                margin_influence[a].push(ModelInfluence::new(&m, &s)?);
                margins[a].push(m);
            }
            let pairs = copula_pairs(records, arm, &margins[a], cfg.eps);
            let fit = fit_copula_lenient(cfg.copula, &pairs)?;
            copula[a] = fit.spec;
            copula_fits[a] = fit;
            pairs_out[a] = pairs;
        }
    }
    let [c0, c1]: [SurvivalModel; 2] = censoring.try_into().expect("two arms");
    let [i0, i1]: [ModelInfluence; 2] = censor_influence.try_into().expect("two arms");
    Ok(FittedNuisances {
        bundle: NuisanceBundle {
            censoring: [c0, c1],
            margins,
            copula,
            eps: cfg.eps,
        },
        censor_influence: [i0, i1],
        margin_influence,
        copula_fits,
        copula_pairs: pairs_out,
    })
}
