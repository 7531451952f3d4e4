//! Weibull-margin copula data generation, censoring calibration and the
//! Monte Carlo harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::copula::{CopulaFit, CopulaSpec, Family};
use crate::error::{Error, Result};
use crate::estimation::{
    censoring_samples, estimate_full, fit_nuisances, margin_samples, CensorModel, FittedNuisances, MarginModel,
    Method, NuisanceBundle, NuisanceConfig, RestrictedRecord,
};
use crate::survival::{ModelInfluence, SurvivalModel, WeibullPh};
use crate::truth::{true_values, TruthResult};
use crate::variance::{delta_ci, influence_rows, sandwich};

/// Horizon used for the censoring calibration.
pub const CALIBRATION_HORIZON: f64 = 36.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WeibullComponent {
    pub shape: f64,
    pub scale: f64,
    pub beta: Vec<f64>,
    pub beta_a: f64,
}

impl WeibullComponent {
    fn for_arm(&self, arm: u8) -> WeibullPh {
        WeibullPh {
            shape: self.shape,
            scale: self.scale,
            beta: self.beta.clone(),
            offset: self.beta_a * arm as f64,
        }
    }
}

pub fn default_components() -> Vec<WeibullComponent> {
    vec![
        WeibullComponent {
            shape: 1.35,
            scale: 0.0008,
            beta: vec![0.35, 0.60, 0.25],
            beta_a: -0.05,
        },
        WeibullComponent {
            shape: 0.95,
            scale: 0.02,
            beta: vec![0.30, 0.70, 0.20],
            beta_a: -0.35,
        },
    ]
}

pub const DEFAULT_CENSOR_BETA: [f64; 3] = [0.80, 1.00, 0.65];

/// Data-generating process: covariates, per-arm Weibull PH margins joined
/// by a survival copula, and exponential PH censoring shared by both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Dgp {
    pub components: Vec<WeibullComponent>,
    pub copula: CopulaSpec,
    pub censor_beta: Vec<f64>,
    pub lambda_c: f64,
    pub p_z1: f64,
    pub p_z3: f64,
    margins: [Vec<WeibullPh>; 2],
}

impl Dgp {
    pub fn new(components: Vec<WeibullComponent>, copula: CopulaSpec, censor_beta: Vec<f64>, lambda_c: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("no components".into()));
        }
        for c in &components {
            if !(c.shape > 0.0 && c.scale > 0.0) {
                return Err(Error::InvalidInput(format!("Weibull shape {} and scale {} must be positive", c.shape, c.scale)));
            }
            if c.beta.len() != 3 {
                return Err(Error::CovariateLength {
                    expected: 3,
                    found: c.beta.len(),
                });
            }
        }
        if censor_beta.len() != 3 {
            return Err(Error::CovariateLength {
                expected: 3,
                found: censor_beta.len(),
            });
        }
        if !(lambda_c >= 0.0) {
            return Err(Error::InvalidInput(format!("censoring rate {lambda_c} must be nonnegative")));
        }
        let margins = [0u8, 1].map(|a| components.iter().map(|c| c.for_arm(a)).collect());
        Ok(Self {
            components,
            copula,
            censor_beta,
            lambda_c,
            p_z1: 0.5,
            p_z3: 0.4,
            margins,
        })
    }

    /// Reference design with a Gumbel copula of parameter `theta`.
    pub fn reference(theta: f64, lambda_c: f64) -> Result<Self> {
        Self::new(
            default_components(),
            CopulaSpec::new(Family::Gumbel, theta)?,
            DEFAULT_CENSOR_BETA.to_vec(),
            lambda_c,
        )
    }

    pub fn with_lambda_c(&self, lambda_c: f64) -> Self {
        Self {
            lambda_c,
            ..self.clone()
        }
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn margin(&self, arm: u8, q: usize) -> &WeibullPh {
        &self.margins[arm as usize][q]
    }

    pub fn censoring(&self) -> WeibullPh {
        WeibullPh {
            shape: 1.0,
            scale: self.lambda_c,
            beta: self.censor_beta.clone(),
            offset: 0.0,
        }
    }

    fn censor_lp(&self, z: &[f64]) -> f64 {
        self.censor_beta.iter().zip(z).map(|(b, x)| b * x).sum()
    }

    /// True nuisances: Weibull censoring and margins and the DGP copula.
    pub fn true_bundle(&self, eps: f64) -> NuisanceBundle {
        let g = SurvivalModel::Weibull(self.censoring());
        NuisanceBundle {
            censoring: [g.clone(), g],
            margins: [0u8, 1].map(|a| self.margins[a as usize].iter().cloned().map(SurvivalModel::Weibull).collect()),
            copula: [self.copula; 2],
            eps,
        }
    }
}

/// One simulated subject before censoring is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSubject {
    pub arm: u8,
    pub covariates: Vec<f64>,
    pub event_times: Vec<f64>,
    /// Unit exponential driving the censoring time.
    pub censor_unit: f64,
}

impl LatentSubject {
    pub fn censor_time(&self, dgp: &Dgp) -> f64 {
        if dgp.lambda_c <= 0.0 {
            return f64::INFINITY;
        }
        self.censor_unit / (dgp.lambda_c * dgp.censor_lp(&self.covariates).exp())
    }

    pub fn to_record(&self, id: impl Into<String>, dgp: &Dgp, tau: f64) -> RestrictedRecord {
        let times: Vec<Option<f64>> = self.event_times.iter().map(|&t| Some(t)).collect();
        RestrictedRecord::from_latent(id, self.arm, self.covariates.clone(), self.censor_time(dgp), &times, tau)
    }

    fn censored_by(&self, c: f64, horizon: f64) -> bool {
        let last = self.event_times.iter().cloned().fold(0.0, f64::max);
        c < horizon.min(last)
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draws covariates, copula-dependent event times and the censoring driver.
pub fn gen_latent<R: Rng + ?Sized>(rng: &mut R, arm: u8, dgp: &Dgp) -> Result<LatentSubject> {
    let z1 = if rng.random::<f64>() < dgp.p_z1 { 1.0 } else { 0.0 };
    let z2: f64 = rng.random();
    let z3 = if rng.random::<f64>() < dgp.p_z3 { 1.0 } else { 0.0 };
    let z = vec![z1, z2, z3];
    let mut v = vec![0.0; dgp.n_components()];
    if dgp.copula.family == Family::Independence {
        for x in v.iter_mut() {
            *x = open_unit(rng);
        }
    } else {
        dgp.copula.sample_into(rng, &mut v)?;
    }
    let event_times = v
        .iter()
        .enumerate()
        .map(|(q, &u)| dgp.margin(arm, q).quantile(u.clamp(f64::MIN_POSITIVE, 1.0), &z))
        .collect();
    let censor_unit: f64 = Exp1.sample(rng);
    Ok(LatentSubject {
        arm,
        covariates: z,
        event_times,
        censor_unit,
    })
}

/// (covariates, latent event times, censoring time).
pub fn gen_subject<R: Rng + ?Sized>(rng: &mut R, arm: u8, dgp: &Dgp) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let s = gen_latent(rng, arm, dgp)?;
    let c = s.censor_time(dgp);
    Ok((s.covariates, s.event_times, c))
}

/// `n_per_arm` treated subjects followed by `n_per_arm` controls.
pub fn gen_trial<R: Rng + ?Sized>(rng: &mut R, dgp: &Dgp, n_per_arm: usize) -> Result<Vec<LatentSubject>> {
    let mut out = Vec::with_capacity(2 * n_per_arm);
    for arm in [1u8, 0] {
        for _ in 0..n_per_arm {
            out.push(gen_latent(rng, arm, dgp)?);
        }
    }
    Ok(out)
}

pub fn to_records(subjects: &[LatentSubject], dgp: &Dgp, tau: f64) -> Vec<RestrictedRecord> {
    subjects
        .iter()
        .enumerate()
        .map(|(i, s)| s.to_record(format!("s{}", i + 1), dgp, tau))
        .collect()
}

/// Fraction of subjects censored before the horizon and before their last
/// component event.
pub fn censoring_proportion(subjects: &[LatentSubject], dgp: &Dgp, horizon: f64) -> f64 {
    if subjects.is_empty() {
        return 0.0;
    }
    let k = subjects.iter().filter(|s| s.censored_by(s.censor_time(dgp), horizon)).count();
    k as f64 / subjects.len() as f64
}

pub const CALIBRATION_SUBJECTS: usize = 200_000;
pub const CALIBRATION_TOL: f64 = 0.005;

/// Bisection on log λ_C against the censoring proportion of a fixed draw of
/// `CALIBRATION_SUBJECTS` subjects (half per arm).
pub fn calibrate_lambda_c(dgp: &Dgp, target: f64, seed: u64) -> Result<f64> {
    calibrate_lambda_c_with(dgp, target, seed, CALIBRATION_SUBJECTS)
}

pub fn calibrate_lambda_c_with(dgp: &Dgp, target: f64, seed: u64, n_subjects: usize) -> Result<f64> {
    if !(target > 0.01 && target < 0.99) {
        return Err(Error::InvalidInput(format!("censoring target {target} outside (0.01, 0.99)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let subjects = gen_trial(&mut rng, dgp, n_subjects / 2)?;
    let prop = |log_l: f64| censoring_proportion(&subjects, &dgp.with_lambda_c(log_l.exp()), CALIBRATION_HORIZON);
    let (mut lo, mut hi) = (1e-8f64.ln(), 100f64.ln());
    let (p_lo, p_hi) = (prop(lo), prop(hi));
    if !(p_lo < target && p_hi > target) {
        return Err(Error::Bracket {
            lo: lo.exp(),
            hi: hi.exp(),
        });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let p = prop(mid);
        if (p - target).abs() < 0.1 * CALIBRATION_TOL || hi - lo < 1e-12 {
            break;
        }
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid.exp())
}

/// Working nuisance configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkingModel {
    /// Cox censoring, Cox margins, copula of the working family.
    M1,
    /// Cox censoring, exponential margins, independence.
    M2,
    /// KM censoring, Cox margins, copula of the working family.
    M3,
    /// KM censoring, exponential margins, independence.
    M4,
    /// True censoring, margins and copula, no fitting.
    Oracle,
}

impl WorkingModel {
    pub fn label(self) -> &'static str {
        match self {
            WorkingModel::M1 => "M1",
            WorkingModel::M2 => "M2",
            WorkingModel::M3 => "M3",
            WorkingModel::M4 => "M4",
            WorkingModel::Oracle => "oracle",
        }
    }

    pub fn config(self, family: Family, eps: f64) -> NuisanceConfig {
        let (censor, margin, copula) = match self {
            WorkingModel::M1 | WorkingModel::Oracle => (CensorModel::Cox, MarginModel::Cox, family),
            WorkingModel::M2 => (CensorModel::Cox, MarginModel::Exponential, Family::Independence),
            WorkingModel::M3 => (CensorModel::Km, MarginModel::Cox, family),
            WorkingModel::M4 => (CensorModel::Km, MarginModel::Exponential, Family::Independence),
        };
        NuisanceConfig {
            censor,
            margin,
            copula,
            eps,
            ..NuisanceConfig::default()
        }
    }
}

impl std::str::FromStr for WorkingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m1" => Ok(WorkingModel::M1),
            "m2" => Ok(WorkingModel::M2),
            "m3" => Ok(WorkingModel::M3),
            "m4" => Ok(WorkingModel::M4),
            "oracle" => Ok(WorkingModel::Oracle),
            other => Err(Error::Config(format!("unknown working model '{other}'"))),
        }
    }
}

fn oracle_nuisances(records: &[RestrictedRecord], dgp: &Dgp, eps: f64) -> Result<FittedNuisances> {
    let bundle = dgp.true_bundle(eps);
    let q = dgp.n_components();
    let mut censor_influence = Vec::with_capacity(2);
    let mut margin_influence = [Vec::new(), Vec::new()];
    for arm in 0..2u8 {
        censor_influence.push(ModelInfluence::new(&bundle.censoring[arm as usize], &censoring_samples(records, arm))?);
        for k in 0..q {
            let m = &bundle.margins[arm as usize][k];
            margin_influence[arm as usize].push(ModelInfluence::new(m, &margin_samples(records, arm, k))?);
        }
    }
    let [c0, c1]: [ModelInfluence; 2] = censor_influence.try_into().expect("two arms");
    let fit = CopulaFit {
        spec: dgp.copula,
        ..CopulaFit::independence()
    };
    Ok(FittedNuisances {
        bundle,
        censor_influence: [c0, c1],
        margin_influence,
        copula_fits: [fit.clone(), fit],
        copula_pairs: [Vec::new(), Vec::new()],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimand {
    Nb,
    Wr,
    Wo,
}

impl Estimand {
    pub const ALL: [Estimand; 3] = [Estimand::Nb, Estimand::Wr, Estimand::Wo];

    pub fn label(self) -> &'static str {
        match self {
            Estimand::Nb => "NB",
            Estimand::Wr => "WR",
            Estimand::Wo => "WO",
        }
    }

    /// Ratios are summarized on the log scale.
    pub fn on_log_scale(self) -> bool {
        self != Estimand::Nb
    }

    pub fn of_truth(self, t: &TruthResult) -> f64 {
        match self {
            Estimand::Nb => t.nb,
            Estimand::Wr => t.wr,
            Estimand::Wo => t.wo,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_per_arm: usize,
    pub dgp: Dgp,
    /// Target censoring proportion by the calibration horizon; `None`
    /// keeps `dgp.lambda_c`.
    pub target_censoring: Option<f64>,
    pub taus: Vec<f64>,
    pub working: WorkingModel,
    /// Working copula family; defaults to the DGP family.
    pub working_copula: Option<Family>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    pub eps: f64,
    pub conf_level: f64,
    /// Skip the sandwich (point estimates only).
    pub point_only: bool,
}

impl ScenarioConfig {
    pub fn reference(theta: f64, target_censoring: f64, taus: Vec<f64>, reps: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            n_per_arm: 400,
            dgp: Dgp::reference(theta, 0.0)?,
            target_censoring: Some(target_censoring),
            taus,
            working: WorkingModel::M1,
            working_copula: None,
            methods: vec![Method::Ipcw, Method::MIpcw],
            reps,
            seed,
            eps: 1e-6,
            conf_level: 0.95,
            point_only: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n_per_arm < 2 {
            return Err(Error::Config("n_per_arm must be at least 2".into()));
        }
        if self.taus.is_empty() || self.taus.iter().any(|&t| !(t > 0.0 && t <= CALIBRATION_HORIZON)) {
            return Err(Error::Config(format!("taus must be a nonempty subset of (0, {CALIBRATION_HORIZON}]")));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods".into()));
        }
        Ok(())
    }
}

/// One replication's result for a (τ, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationCell {
    pub pi_t: f64,
    pub pi_c: f64,
    /// NB, WR, WO.
    pub estimates: [f64; 3],
    /// Standard errors on the summary scale (log for WR/WO); NaN when the
    /// sandwich was skipped.
    pub ses: [f64; 3],
    pub covered: [bool; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub censoring: f64,
    /// Indexed [τ][method]; `None` marks a failed fit.
    pub cells: Vec<Vec<Option<ReplicationCell>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub tau: f64,
    pub method: Method,
    pub estimand: Estimand,
    pub true_value: f64,
    pub mean_estimate: f64,
    pub rbias_pct: f64,
    pub mcsd: f64,
    /// False when fewer than two replications succeeded.
    pub mcsd_defined: bool,
    pub ase: f64,
    pub coverage: f64,
    /// MCSD²(IPCW)/MCSD²(m-IPCW); NaN unless both methods ran.
    pub re: f64,
    pub successes: usize,
    pub mean_pi_t: f64,
    pub sd_pi_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub lambda_c: f64,
    pub achieved_censoring: f64,
    pub reps: usize,
    pub failures: usize,
    pub seed: u64,
    pub truths: Vec<TruthResult>,
    pub rows: Vec<SummaryRow>,
}

impl MonteCarloSummary {
    pub fn row(&self, tau: f64, method: Method, estimand: Estimand) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.tau == tau && r.method == method && r.estimand == estimand)
    }
}

fn run_cell(
    records: &[RestrictedRecord],
    cfg: &ScenarioConfig,
    dgp: &Dgp,
    tau: f64,
    method: Method,
    truth: &TruthResult,
) -> Result<ReplicationCell> {
    let fitted = match cfg.working {
        WorkingModel::Oracle => oracle_nuisances(records, dgp, cfg.eps)?,
        w => {
            let family = cfg.working_copula.unwrap_or(dgp.copula.family);
            fit_nuisances(records, method, &w.config(family, cfg.eps))?
        }
    };
    let est = estimate_full(records, tau, method, &fitted.bundle)?;
    let c = &est.components;
    let sm = crate::estimation::summarize(c)?;
    let estimates = [sm.nb, sm.wr, sm.wo];
    if cfg.point_only {
        return Ok(ReplicationCell {
            pi_t: c.pi_t,
            pi_c: c.pi_c,
            estimates,
            ses: [f64::NAN; 3],
            covered: [false; 3],
        });
    }
    let rows = influence_rows(records, &est, &fitted, tau)?;
    let iv = delta_ci(c, &sandwich(&rows), cfg.conf_level)?;
    let ivs = [iv.nb, iv.wr, iv.wo];
    let mut covered = [false; 3];
    for (k, e) in Estimand::ALL.iter().enumerate() {
        let t = e.of_truth(truth);
        covered[k] = ivs[k].lower <= t && t <= ivs[k].upper;
    }
    Ok(ReplicationCell {
        pi_t: c.pi_t,
        pi_c: c.pi_c,
        estimates,
        ses: ivs.map(|i| i.se),
        covered,
    })
}

/// One replication on its own substream of `seed`.
pub fn run_replication(cfg: &ScenarioConfig, dgp: &Dgp, truths: &[TruthResult], rep: usize) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let subjects = gen_trial(&mut rng, dgp, cfg.n_per_arm)?;
    let censoring = censoring_proportion(&subjects, dgp, CALIBRATION_HORIZON);
    let mut cells = Vec::with_capacity(cfg.taus.len());
    for (ti, &tau) in cfg.taus.iter().enumerate() {
        let records = to_records(&subjects, dgp, tau);
        cells.push(
            cfg.methods
                .iter()
                .map(|&m| run_cell(&records, cfg, dgp, tau, m, &truths[ti]).ok())
                .collect(),
        );
    }
    Ok(Replication { censoring, cells })
}

/// Calibrated DGP of a scenario.
pub fn scenario_dgp(cfg: &ScenarioConfig) -> Result<Dgp> {
    match cfg.target_censoring {
        Some(target) => Ok(cfg.dgp.with_lambda_c(calibrate_lambda_c(&cfg.dgp, target, cfg.seed)?)),
        None => Ok(cfg.dgp.clone()),
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MonteCarloSummary> {
    cfg.validate()?;
    let dgp = scenario_dgp(cfg)?;
    let truths = cfg.taus.iter().map(|&t| true_values(&dgp, t)).collect::<Result<Vec<_>>>()?;
    run_scenario_with(cfg, &dgp, truths)
}

/// Runs replications against a fixed DGP and precomputed truths.
pub fn run_scenario_with(cfg: &ScenarioConfig, dgp: &Dgp, truths: Vec<TruthResult>) -> Result<MonteCarloSummary> {
    cfg.validate()?;
    let reps: Vec<Result<Replication>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| run_replication(cfg, dgp, &truths, r))
        .collect();
    let mut ok = Vec::with_capacity(reps.len());
    for r in reps {
        ok.push(r?);
    }
    Ok(summarize_replications(cfg, dgp, truths, &ok))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

pub fn summarize_replications(
    cfg: &ScenarioConfig,
    dgp: &Dgp,
    truths: Vec<TruthResult>,
    reps: &[Replication],
) -> MonteCarloSummary {
    let mut rows = Vec::new();
    let mut failures = 0;
    for rep in reps {
        if rep.cells.iter().flatten().any(|c| c.is_none()) {
            failures += 1;
        }
    }
    for (ti, &tau) in cfg.taus.iter().enumerate() {
        let truth = &truths[ti];
        let mut block: Vec<SummaryRow> = Vec::new();
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let cells: Vec<&ReplicationCell> = reps.iter().filter_map(|r| r.cells[ti][mi].as_ref()).collect();
            let pis: Vec<f64> = cells.iter().map(|c| c.pi_t).collect();
            let (mean_pi_t, sd_pi_t) = mean_sd(&pis);
            for (k, &e) in Estimand::ALL.iter().enumerate() {
                let tv = e.of_truth(truth);
                let raw: Vec<f64> = cells.iter().map(|c| c.estimates[k]).collect();
                let scaled: Vec<f64> = if e.on_log_scale() { raw.iter().map(|x| x.ln()).collect() } else { raw.clone() };
                let (mean_est, _) = mean_sd(&raw);
                let (_, mcsd) = mean_sd(&scaled);
                let ses: Vec<f64> = cells.iter().map(|c| c.ses[k]).collect();
                let (ase, _) = mean_sd(&ses);
                let n = cells.len();
                let coverage = if n == 0 { f64::NAN } else { cells.iter().filter(|c| c.covered[k]).count() as f64 / n as f64 };
                block.push(SummaryRow {
                    tau,
                    method,
                    estimand: e,
                    true_value: tv,
                    mean_estimate: mean_est,
                    rbias_pct: 100.0 * (mean_est - tv) / tv,
                    mcsd,
                    mcsd_defined: n >= 2,
                    ase,
                    coverage,
                    re: f64::NAN,
                    successes: n,
                    mean_pi_t,
                    sd_pi_t,
                });
            }
        }
        for e in Estimand::ALL {
            let sd = |m: Method| block.iter().find(|r| r.method == m && r.estimand == e).map(|r| r.mcsd);
            if let (Some(a), Some(b)) = (sd(Method::Ipcw), sd(Method::MIpcw)) {
                let re = if b > 0.0 { a * a / (b * b) } else { f64::NAN };
                for r in block.iter_mut().filter(|r| r.estimand == e) {
                    r.re = re;
                }
            }
        }
        rows.extend(block);
    }
    let achieved = if reps.is_empty() { f64::NAN } else { reps.iter().map(|r| r.censoring).sum::<f64>() / reps.len() as f64 };
    MonteCarloSummary {
        lambda_c: dgp.lambda_c,
        achieved_censoring: achieved,
        reps: reps.len(),
        failures,
        seed: cfg.seed,
        truths,
        rows,
    }
}
