//! Bivariate survival copulas (independence, Gumbel, Clayton, Frank,
//! Plackett), exchangeable Archimedean prefixes, censored pseudo-likelihood
//! fitting and samplers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardUniform};

use crate::error::{Error, Result};
use crate::optim::{brent_min, brent_root};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Independence,
    Gumbel,
    Clayton,
    Frank,
    Plackett,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Independence,
        Family::Gumbel,
        Family::Clayton,
        Family::Frank,
        Family::Plackett,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Independence => "independence",
            Family::Gumbel => "gumbel",
            Family::Clayton => "clayton",
            Family::Frank => "frank",
            Family::Plackett => "plackett",
        }
    }

    /// Label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::Independence => "Independence",
            Family::Gumbel => "Gumbel",
            Family::Clayton => "Clayton",
            Family::Frank => "Frank",
            Family::Plackett => "Plackett",
        }
    }

    /// Search interval on the transformed scale.
    fn eta_bounds(self) -> (f64, f64) {
        match self {
            Family::Independence => (0.0, 0.0),
            Family::Gumbel => ((THETA_DELTA).ln(), (THETA_MAX - 1.0).ln()),
            Family::Clayton => (THETA_DELTA.ln(), THETA_MAX.ln()),
            Family::Frank => (-THETA_MAX, THETA_MAX),
            Family::Plackett => ((1e-4f64).ln(), (1e4f64).ln()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independence" | "indep" => Ok(Family::Independence),
            "gumbel" => Ok(Family::Gumbel),
            "clayton" => Ok(Family::Clayton),
            "frank" => Ok(Family::Frank),
            "plackett" => Ok(Family::Plackett),
            other => Err(Error::InvalidInput(format!("unknown copula family '{other}'"))),
        }
    }
}

const THETA_MAX: f64 = 50.0;
const THETA_DELTA: f64 = 1e-4;
// Frank and Plackett parameters this close to their independence value are
// evaluated as independence.
const FRANK_ZERO: f64 = 1e-8;
const PLACKETT_ONE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaSpec {
    pub family: Family,
    pub theta: f64,
}

impl CopulaSpec {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        let ok = match family {
            Family::Independence => true,
            Family::Gumbel => theta >= 1.0 && theta.is_finite(),
            Family::Clayton => theta > 0.0 && theta.is_finite(),
            Family::Frank => theta != 0.0 && theta.is_finite(),
            Family::Plackett => theta > 0.0 && theta != 1.0 && theta.is_finite(),
        };
        if ok {
            Ok(Self { family, theta })
        } else {
            Err(Error::ParameterDomain {
                family: family.name(),
                theta,
            })
        }
    }

    pub fn independence() -> Self {
        Self {
            family: Family::Independence,
            theta: 0.0,
        }
    }

    fn effectively_independent(&self) -> bool {
        match self.family {
            Family::Independence => true,
            Family::Gumbel => self.theta == 1.0,
            Family::Frank => self.theta.abs() < FRANK_ZERO,
            Family::Plackett => (self.theta - 1.0).abs() < PLACKETT_ONE,
            Family::Clayton => false,
        }
    }

    /// Unconstrained parameter used by the optimizer and for numeric
    /// derivatives.
    pub fn eta(&self) -> f64 {
        match self.family {
            Family::Independence => 0.0,
            Family::Gumbel => (self.theta - 1.0).max(1e-300).ln(),
            Family::Clayton => self.theta.ln(),
            Family::Frank => self.theta,
            Family::Plackett => self.theta.ln(),
        }
    }

    /// Inverse of [`CopulaSpec::eta`]; no domain check (Frank η = 0 is
    /// evaluated as independence).
    pub fn with_eta(family: Family, eta: f64) -> Self {
        let theta = match family {
            Family::Independence => 0.0,
            Family::Gumbel => 1.0 + eta.exp(),
            Family::Clayton => eta.exp(),
            Family::Frank => eta,
            Family::Plackett => eta.exp(),
        };
        Self { family, theta }
    }

    pub fn kendall_tau(&self) -> f64 {
        let t = self.theta;
        match self.family {
            _ if self.effectively_independent() => 0.0,
            Family::Gumbel => 1.0 - 1.0 / t,
            Family::Clayton => t / (t + 2.0),
            Family::Frank => 1.0 - 4.0 / t + 4.0 * debye1(t) / t,
            Family::Plackett => plackett_kendall(t),
            Family::Independence => 0.0,
        }
    }

    /// C(u, v).
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if self.effectively_independent() {
            return u * v;
        }
        let t = self.theta;
        match self.family {
            Family::Gumbel => {
                if u <= 0.0 || v <= 0.0 {
                    return 0.0;
                }
                let a = gumbel_a(u, v, t);
                (-a.powf(1.0 / t)).exp()
            }
            Family::Clayton => {
                if u <= 0.0 || v <= 0.0 {
                    return 0.0;
                }
                let b = u.powf(-t) + v.powf(-t) - 1.0;
                b.powf(-1.0 / t)
            }
            Family::Frank => {
                if t < 0.0 {
                    return u - CopulaSpec { theta: -t, ..*self }.cdf(u, 1.0 - v);
                }
                let (m, b) = frank_parts(u, v, t);
                (m - (b.ln() - (-(-t).exp_m1()).ln()) / t).clamp(0.0, u.min(v))
            }
            Family::Plackett => {
                let (b, d) = plackett_bd(u, v, t);
                plackett_c(u, v, t, b, d)
            }
            Family::Independence => u * v,
        }
    }

    /// ∂C/∂v.
    pub fn dv(&self, u: f64, v: f64) -> f64 {
        if self.effectively_independent() {
            return u;
        }
        let t = self.theta;
        let r = match self.family {
            Family::Gumbel => {
                if u <= 0.0 {
                    return 0.0;
                }
                if v >= 1.0 {
                    return if t > 1.0 { 0.0 } else { u };
                }
                let lv = -v.ln();
                let a = gumbel_a(u, v, t);
                let la = a.ln();
                // log C + (1/θ − 1)log A + (θ−1)log lv − log v
                let lc = -(la / t).exp();
                (lc + (1.0 / t - 1.0) * la + (t - 1.0) * lv.ln() + lv).exp()
            }
            Family::Clayton => {
                if u <= 0.0 {
                    return 0.0;
                }
                let b = u.powf(-t) + v.powf(-t) - 1.0;
                // v^{−θ−1} B^{−1/θ−1} = (v^θ B)^{−1/θ−1}
                (v.powf(t) * b).powf(-1.0 / t - 1.0)
            }
            Family::Frank => {
                if t < 0.0 {
                    return CopulaSpec { theta: -t, ..*self }.dv(u, 1.0 - v);
                }
                let (m, b) = frank_parts(u, v, t);
                (-t * (v - m)).exp() * -(-t * u).exp_m1() / b
            }
            Family::Plackett => {
                let (b, d) = plackett_bd(u, v, t);
                0.5 * (1.0 - (b - 2.0 * t * u) / d.sqrt())
            }
            Family::Independence => u,
        };
        r.clamp(0.0, 1.0)
    }

    /// ∂C/∂u; every family here is exchangeable.
    pub fn du(&self, u: f64, v: f64) -> f64 {
        self.dv(v, u)
    }

    /// Copula density ∂²C/∂u∂v.
    pub fn density(&self, u: f64, v: f64) -> f64 {
        if self.effectively_independent() {
            return 1.0;
        }
        let t = self.theta;
        match self.family {
            Family::Gumbel => {
                let lu = -u.ln();
                let lv = -v.ln();
                let a = gumbel_a(u, v, t);
                let la = a.ln();
                let a1t = (la / t).exp();
                let log = -a1t + (t - 1.0) * (lu.ln() + lv.ln()) + lu + lv + (1.0 / t - 2.0) * la;
                log.exp() * (a1t + t - 1.0)
            }
            Family::Clayton => {
                let b = u.powf(-t) + v.powf(-t) - 1.0;
                (1.0 + t) * (u * v).powf(-t - 1.0) * b.powf(-1.0 / t - 2.0)
            }
            Family::Frank => {
                if t < 0.0 {
                    return CopulaSpec { theta: -t, ..*self }.density(u, 1.0 - v);
                }
                let (m, b) = frank_parts(u, v, t);
                t * -(-t).exp_m1() * (-t * (u + v - 2.0 * m)).exp() / (b * b)
            }
            Family::Plackett => {
                let (_, d) = plackett_bd(u, v, t);
                t * (1.0 + (t - 1.0) * (u + v - 2.0 * u * v)) / d.powf(1.5)
            }
            Family::Independence => 1.0,
        }
    }

    /// ∂²C/∂v² by central differences of [`CopulaSpec::dv`].
    pub fn dvv(&self, u: f64, v: f64) -> f64 {
        if self.effectively_independent() {
            return 0.0;
        }
        let h = 1e-5f64.min(0.5 * v).min(0.5 * (1.0 - v));
        (self.dv(u, v + h) - self.dv(u, v - h)) / (2.0 * h)
    }

    /// ∂C/∂η on the transformed parameter scale.
    pub fn d_eta(&self, u: f64, v: f64) -> f64 {
        self.eta_diff(|s| s.cdf(u, v))
    }

    /// ∂²C/∂v∂η on the transformed parameter scale.
    pub fn dv_eta(&self, u: f64, v: f64) -> f64 {
        self.eta_diff(|s| s.dv(u, v))
    }

    fn eta_diff<F: Fn(&CopulaSpec) -> f64>(&self, f: F) -> f64 {
        if self.family == Family::Independence {
            return 0.0;
        }
        let e = self.eta();
        let h = 1e-5;
        let up = CopulaSpec::with_eta(self.family, e + h);
        let dn = CopulaSpec::with_eta(self.family, e - h);
        (f(&up) - f(&dn)) / (2.0 * h)
    }

    /// Exchangeable Archimedean C(u_1, …, u_q); q = 2 uses the bivariate
    /// closed forms.
    pub fn prefix_cdf(&self, us: &[f64]) -> Result<f64> {
        match us.len() {
            0 => Ok(1.0),
            1 => Ok(us[0]),
            2 => Ok(self.cdf(us[0], us[1])),
            q => {
                self.check_prefix_dim(q)?;
                if self.effectively_independent() {
                    return Ok(us.iter().product());
                }
                let s: f64 = us.iter().map(|&u| self.phi(u)).sum();
                Ok(self.phi_inv(s))
            }
        }
    }

    /// ∂C(u_1, …, u_q)/∂u_q.
    pub fn prefix_dlast(&self, us: &[f64]) -> Result<f64> {
        match us.len() {
            0 => Err(Error::InvalidInput("empty prefix".into())),
            1 => Ok(1.0),
            2 => Ok(self.dv(us[0], us[1])),
            q => {
                self.check_prefix_dim(q)?;
                if self.effectively_independent() {
                    return Ok(us[..q - 1].iter().product());
                }
                let s: f64 = us.iter().map(|&u| self.phi(u)).sum();
                Ok((self.phi_inv_d(s) * self.phi_d(us[q - 1])).clamp(0.0, 1.0))
            }
        }
    }

    fn check_prefix_dim(&self, q: usize) -> Result<()> {
        match self.family {
            Family::Plackett => Err(Error::UnsupportedDimension {
                family: "plackett",
                dim: q,
            }),
            Family::Frank if self.theta < 0.0 => Err(Error::UnsupportedDimension {
                family: "frank (negative dependence)",
                dim: q,
            }),
            _ => Ok(()),
        }
    }

    /// Archimedean generator φ.
    pub fn phi(&self, u: f64) -> f64 {
        let t = self.theta;
        match self.family {
            Family::Gumbel => (-u.ln()).powf(t),
            Family::Clayton => (u.powf(-t) - 1.0) / t,
            Family::Frank => -((-t * u).exp_m1() / (-t).exp_m1()).ln(),
            _ => -u.ln(),
        }
    }

    fn phi_d(&self, u: f64) -> f64 {
        let t = self.theta;
        match self.family {
            Family::Gumbel => -t * (-u.ln()).powf(t - 1.0) / u,
            Family::Clayton => -u.powf(-t - 1.0),
            Family::Frank => t * (-t * u).exp() / (-t * u).exp_m1(),
            _ => -1.0 / u,
        }
    }

    fn phi_inv(&self, s: f64) -> f64 {
        let t = self.theta;
        match self.family {
            Family::Gumbel => (-s.powf(1.0 / t)).exp(),
            Family::Clayton => (1.0 + t * s).powf(-1.0 / t),
            Family::Frank => -((-s).exp() * (-t).exp_m1()).ln_1p() / t,
            _ => (-s).exp(),
        }
    }

    fn phi_inv_d(&self, s: f64) -> f64 {
        let t = self.theta;
        match self.family {
            Family::Gumbel => {
                if s <= 0.0 {
                    return if t == 1.0 { -1.0 } else { f64::NEG_INFINITY };
                }
                -(1.0 / t) * s.powf(1.0 / t - 1.0) * (-s.powf(1.0 / t)).exp()
            }
            Family::Clayton => -(1.0 + t * s).powf(-1.0 / t - 1.0),
            Family::Frank => {
                let g = (-t).exp_m1();
                let e = (-s).exp();
                e * g / (t * (1.0 + e * g))
            }
            _ => -(-s).exp(),
        }
    }

    /// One draw of (U_1, U_2) with joint distribution function C.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self.family {
            Family::Frank | Family::Plackett if !self.effectively_independent() => {
                let u: f64 = open_unit(rng);
                let w: f64 = open_unit(rng);
                let v = brent_root(|v| self.du(u, v) - w, 0.0, 1.0, 1e-12, 200).unwrap_or(w);
                (u, v)
            }
            _ => {
                let mut out = [0.0; 2];
                self.sample_frailty(rng, &mut out);
                (out[0], out[1])
            }
        }
    }

    /// Draws `out.len()` exchangeable uniforms. Frank and Plackett support
    /// only two coordinates.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match self.family {
            Family::Frank | Family::Plackett if !self.effectively_independent() => {
                if out.len() != 2 {
                    return Err(Error::UnsupportedDimension {
                        family: self.family.name(),
                        dim: out.len(),
                    });
                }
                let (a, b) = self.sample_pair(rng);
                out[0] = a;
                out[1] = b;
                Ok(())
            }
            _ => {
                self.sample_frailty(rng, out);
                Ok(())
            }
        }
    }

    // Marshall–Olkin: U_k = φ⁻¹(E_k / W) with W the frailty whose Laplace
    // transform is φ⁻¹.
    fn sample_frailty<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let t = self.theta;
        match self.family {
            Family::Gumbel if t > 1.0 => {
                let w = positive_stable(rng, 1.0 / t);
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *o = (-(e / w).powf(1.0 / t)).exp();
                }
            }
            Family::Clayton => {
                let w = Gamma::new(1.0 / t, 1.0).expect("valid gamma").sample(rng);
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *o = (1.0 + e / w).powf(-1.0 / t);
                }
            }
            _ => {
                for o in out.iter_mut() {
                    *o = open_unit(rng);
                }
            }
        }
    }
}

impl fmt::Display for CopulaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Independence => write!(f, "independence"),
            fam => write!(f, "{}({})", fam.name(), self.theta),
        }
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = StandardUniform.sample(rng);
        if u > 0.0 {
            return u;
        }
    }
}

// Kanter's representation of the positive stable law with Laplace
// transform exp(−s^α), 0 < α ≤ 1.
fn positive_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u = PI * open_unit(rng);
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

#[inline]
fn gumbel_a(u: f64, v: f64, t: f64) -> f64 {
    (-u.ln()).powf(t) + (-v.ln()).powf(t)
}

#[inline]
fn plackett_bd(u: f64, v: f64, psi: f64) -> (f64, f64) {
    let b = 1.0 + (psi - 1.0) * (u + v);
    let d = b * b - 4.0 * psi * (psi - 1.0) * u * v;
    (b, d.max(0.0))
}

#[inline]
fn plackett_c(u: f64, v: f64, psi: f64, b: f64, d: f64) -> f64 {
    // rationalized (B − √D)/(2(ψ−1)) to avoid cancellation near ψ = 1
    let denom = b + d.sqrt();
    if denom > 0.0 {
        2.0 * psi * u * v / denom
    } else {
        0.0
    }
}

fn plackett_kendall(psi: f64) -> f64 {
    // τ = 4∫∫C dC − 1, by tensor Gauss–Legendre over the density
    let g = GaussLegendre::new(40);
    let spec = CopulaSpec {
        family: Family::Plackett,
        theta: psi,
    };
    let mut s = 0.0;
    for (u, wu) in g.mapped(0.0, 1.0) {
        for (v, wv) in g.mapped(0.0, 1.0) {
            s += wu * wv * spec.cdf(u, v) * spec.density(u, v);
        }
    }
    4.0 * s - 1.0
}

/// First Debye function D₁(θ) = θ⁻¹∫₀^θ x/(eˣ−1) dx.
pub fn debye1(theta: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    if theta < 0.0 {
        return debye1(-theta) - theta / 2.0;
    }
    let g = GaussLegendre::new(20);
    let panels = theta.ceil().max(1.0) as usize;
    let w = theta / panels as f64;
    let mut s = 0.0;
    for k in 0..panels {
        let a = k as f64 * w;
        s += g.integrate(a, a + w, |x| if x == 0.0 { 1.0 } else { x / x.exp_m1() });
    }
    s / theta
}

/// Initial parameter from Kendall's τ; `None` means "use the grid scan"
/// (Plackett, independence, or an inadmissible τ).
pub fn kendall_tau_start(family: Family, tau_k: f64) -> Option<f64> {
    if !(tau_k > -1.0 && tau_k < 1.0) {
        return None;
    }
    match family {
        Family::Gumbel if tau_k > 0.0 => Some(1.0 / (1.0 - tau_k)),
        Family::Clayton if tau_k > 0.0 => Some(2.0 * tau_k / (1.0 - tau_k)),
        Family::Frank if tau_k.abs() > 1e-6 => {
            let f = |t: f64| 1.0 - 4.0 / t + 4.0 * debye1(t) / t - tau_k;
            let (lo, hi) = if tau_k > 0.0 { (1e-6, 200.0) } else { (-200.0, -1e-6) };
            brent_root(f, lo, hi, 1e-12, 200).ok()
        }
        _ => None,
    }
}

/// Default starting values when Kendall's τ is unusable.
pub fn default_start(family: Family) -> f64 {
    match family {
        Family::Gumbel => 1.5,
        Family::Clayton => 1.0,
        Family::Frank => 2.0,
        Family::Plackett => 2.0,
        Family::Independence => 0.0,
    }
}

// Frank with θ > 0: e^{−θu} + e^{−θv} − e^{−θ(u+v)} − e^{−θ} = e^{−θm}·B with
// m = min(u, v); returns (m, B), both free of cancellation for large θ.
fn frank_parts(u: f64, v: f64, t: f64) -> (f64, f64) {
    let (m, big) = if u < v { (u, v) } else { (v, u) };
    let b = -(-t * big).exp_m1() + ((-t * (big - m)).exp() - (-t * (1.0 - m)).exp());
    (m, b.max(f64::MIN_POSITIVE))
}

/// Fitted marginal survival probabilities with their event indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoredUniformPair {
    pub u1: f64,
    pub u2: f64,
    pub d1: u8,
    pub d2: u8,
}

impl CensoredUniformPair {
    pub fn new(u1: f64, u2: f64, d1: u8, d2: u8, eps: f64) -> Self {
        Self {
            u1: u1.clamp(eps, 1.0 - eps),
            u2: u2.clamp(eps, 1.0 - eps),
            d1,
            d2,
        }
    }
}

const LOG_FLOOR: f64 = 1e-300;

/// Log pseudo-likelihood contribution of one pair.
pub fn pair_loglik(spec: &CopulaSpec, p: &CensoredUniformPair) -> f64 {
    let v = match (p.d1, p.d2) {
        (1, 1) => spec.density(p.u1, p.u2),
        (1, _) => spec.du(p.u1, p.u2),
        (_, 1) => spec.dv(p.u1, p.u2),
        _ => spec.cdf(p.u1, p.u2),
    };
    if !v.is_finite() {
        return LOG_FLOOR.ln();
    }
    v.max(LOG_FLOOR).ln()
}

pub fn pseudo_loglik(spec: &CopulaSpec, pairs: &[CensoredUniformPair]) -> f64 {
    pairs.iter().map(|p| pair_loglik(spec, p)).sum()
}

/// Per-pair score on the transformed scale, by central differences.
pub fn pair_scores(spec: &CopulaSpec, pairs: &[CensoredUniformPair]) -> Vec<f64> {
    if spec.family == Family::Independence {
        return vec![0.0; pairs.len()];
    }
    let e = spec.eta();
    let h = 1e-5;
    let up = CopulaSpec::with_eta(spec.family, e + h);
    let dn = CopulaSpec::with_eta(spec.family, e - h);
    pairs
        .iter()
        .map(|p| (pair_loglik(&up, p) - pair_loglik(&dn, p)) / (2.0 * h))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopulaFit {
    pub spec: CopulaSpec,
    /// Negative second derivative of the total pseudo log-likelihood on the
    /// transformed scale.
    pub information: f64,
    pub loglik: f64,
    pub at_boundary: bool,
    pub degenerate: bool,
}

impl CopulaFit {
    pub fn independence() -> Self {
        Self {
            spec: CopulaSpec::independence(),
            information: 0.0,
            loglik: 0.0,
            at_boundary: false,
            degenerate: false,
        }
    }
}

/// Sample Kendall τ over pairs with both events observed.
pub fn kendall_tau_observed(pairs: &[CensoredUniformPair]) -> Option<f64> {
    let obs: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.d1 == 1 && p.d2 == 1)
        .take(2000)
        .map(|p| (p.u1, p.u2))
        .collect();
    if obs.len() < 3 {
        return None;
    }
    let mut s = 0.0;
    let mut m = 0.0;
    for i in 0..obs.len() {
        for j in (i + 1)..obs.len() {
            let a = (obs[i].0 - obs[j].0) * (obs[i].1 - obs[j].1);
            s += a.signum();
            m += 1.0;
        }
    }
    Some(s / m)
}

/// Maximizes the censored pseudo-likelihood. Flat likelihoods are an error;
/// see [`fit_copula_lenient`] for a variant that flags them instead.
pub fn fit_copula(family: Family, pairs: &[CensoredUniformPair]) -> Result<CopulaFit> {
    let fit = fit_copula_lenient(family, pairs)?;
    if fit.degenerate {
        return Err(Error::DegenerateFit {
            information: fit.information,
        });
    }
    Ok(fit)
}

pub fn fit_copula_lenient(family: Family, pairs: &[CensoredUniformPair]) -> Result<CopulaFit> {
    if family == Family::Independence {
        return Ok(CopulaFit::independence());
    }
    if pairs.len() < 2 {
        return Err(Error::InvalidInput("copula fit needs at least two pairs".into()));
    }
    let (lo, hi) = family.eta_bounds();
    let negll = |e: f64| -pseudo_loglik(&CopulaSpec::with_eta(family, e), pairs);
    const GRID: usize = 25;
    let mut grid: Vec<f64> = (0..GRID).map(|k| lo + (hi - lo) * k as f64 / (GRID - 1) as f64).collect();
    if let Some(t0) = kendall_tau_observed(pairs).and_then(|tk| kendall_tau_start(family, tk)) {
        let e0 = CopulaSpec { family, theta: t0 }.eta();
        if e0 > lo && e0 < hi {
            grid.push(e0);
        }
    }
    grid.sort_by(f64::total_cmp);
    let vals: Vec<f64> = grid.iter().map(|&e| negll(e)).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("nonempty grid");
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let (mut e_hat, mut f_hat) = brent_min(negll, a, b, 1e-10, 200);
    if vals[best] < f_hat {
        e_hat = grid[best];
        f_hat = vals[best];
    }
    let width = hi - lo;
    let at_boundary = (e_hat - lo) < 1e-3 * width || (hi - e_hat) < 1e-3 * width;
    let h = 1e-4;
    let information = if at_boundary {
        let (ea, eb) = if (e_hat - lo) < (hi - e_hat) { (e_hat, e_hat + h) } else { (e_hat - h, e_hat) };
        let mid = 0.5 * (ea + eb);
        (negll(mid + h) - 2.0 * negll(mid) + negll(mid - h)) / (h * h)
    } else {
        (negll(e_hat + h) - 2.0 * f_hat + negll(e_hat - h)) / (h * h)
    };
    let spec = CopulaSpec::with_eta(family, e_hat);
    // the exact independence point of Frank lies inside the search range
    let spec = if family == Family::Frank && spec.theta.abs() < FRANK_ZERO {
        CopulaSpec {
            family,
            theta: FRANK_ZERO.copysign(spec.theta + 0.0),
        }
    } else {
        spec
    };
    Ok(CopulaFit {
        spec,
        information,
        loglik: -f_hat,
        at_boundary,
        // with no observed event the likelihood moves only through the
        // truncation of the margins
        degenerate: !(information >= 1e-8) || pairs.iter().all(|p| p.d1 + p.d2 == 0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn specs() -> Vec<CopulaSpec> {
        vec![
            CopulaSpec::new(Family::Gumbel, 2.0).unwrap(),
            CopulaSpec::new(Family::Clayton, 1.5).unwrap(),
            CopulaSpec::new(Family::Frank, 4.0).unwrap(),
            CopulaSpec::new(Family::Frank, -3.0).unwrap(),
            CopulaSpec::new(Family::Plackett, 5.0).unwrap(),
            CopulaSpec::new(Family::Plackett, 0.3).unwrap(),
        ]
    }

    #[test]
    fn gumbel_closed_form_value() {
        let c = CopulaSpec::new(Family::Gumbel, 2.0).unwrap().cdf(0.5, 0.5);
        let want = (-(2.0 * 2f64.ln().powi(2)).sqrt()).exp();
        assert!((c - want).abs() < 1e-15);
        assert!((c - 0.37521).abs() < 1e-5);
    }

    #[test]
    fn clayton_dv_hand_value() {
        let d = CopulaSpec::new(Family::Clayton, 1.0).unwrap().dv(0.5, 0.5);
        assert!((d - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_margins() {
        for s in specs() {
            for &u in &[0.01, 0.3, 0.77, 0.999] {
                assert!((s.cdf(u, 1.0) - u).abs() < 1e-12, "{s} {u}");
                assert!((s.cdf(1.0, u) - u).abs() < 1e-12, "{s} {u}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(CopulaSpec::new(Family::Gumbel, 0.9).is_err());
        assert!(CopulaSpec::new(Family::Clayton, 0.0).is_err());
        assert!(CopulaSpec::new(Family::Frank, 0.0).is_err());
        assert!(CopulaSpec::new(Family::Plackett, 1.0).is_err());
    }

    #[test]
    fn frank_near_zero_is_independent() {
        let s = CopulaSpec::new(Family::Frank, 1e-6).unwrap();
        for &(u, v) in &[(0.2, 0.3), (0.8, 0.6)] {
            assert!((s.density(u, v) - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn prefix_matches_bivariate_and_product() {
        for s in specs().into_iter().filter(|s| s.family != Family::Plackett && s.theta > 0.0) {
            let direct = s.cdf(0.4, 0.7);
            let s_sum = s.phi(0.4) + s.phi(0.7);
            assert!((s.phi_inv(s_sum) - direct).abs() < 1e-12, "{s}");
            let d = s.phi_inv_d(s_sum) * s.phi_d(0.7);
            assert!((d - s.dv(0.4, 0.7)).abs() < 1e-10, "{s}");
        }
        let ind = CopulaSpec::independence();
        assert!((ind.prefix_cdf(&[0.9, 0.8, 0.7]).unwrap() - 0.504).abs() < 1e-15);
        let p = CopulaSpec::new(Family::Plackett, 3.0).unwrap();
        assert!(matches!(p.prefix_cdf(&[0.5, 0.5, 0.5]), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn prefix_dlast_matches_difference() {
        let s = CopulaSpec::new(Family::Clayton, 2.0).unwrap();
        let us = [0.8, 0.6, 0.5];
        let h = 1e-6;
        let fd = (s.prefix_cdf(&[0.8, 0.6, 0.5 + h]).unwrap() - s.prefix_cdf(&[0.8, 0.6, 0.5 - h]).unwrap()) / (2.0 * h);
        assert!((s.prefix_dlast(&us).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn debye_values() {
        assert!((debye1(1e-8) - 1.0).abs() < 1e-6);
        // adaptive Simpson reference for D1(1)
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, whole: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let l = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
            let r = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
            if depth == 0 || (l + r - whole).abs() < 15.0 * tol {
                return l + r + (l + r - whole) / 15.0;
            }
            simpson(f, a, m, tol / 2.0, l, depth - 1) + simpson(f, m, b, tol / 2.0, r, depth - 1)
        }
        let f = |x: f64| if x == 0.0 { 1.0 } else { x / x.exp_m1() };
        let whole = (f(0.0) + 4.0 * f(0.5) + f(1.0)) / 6.0;
        let want = simpson(&f, 0.0, 1.0, 1e-14, whole, 50);
        assert!((debye1(1.0) - want).abs() < 1e-10);
        assert!((debye1(-2.0) - (debye1(2.0) + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn kendall_starts() {
        assert_eq!(kendall_tau_start(Family::Gumbel, 0.5), Some(2.0));
        assert!((kendall_tau_start(Family::Clayton, 0.2).unwrap() - 0.5).abs() < 1e-15);
        let t = kendall_tau_start(Family::Frank, 0.3).unwrap();
        let back = CopulaSpec::new(Family::Frank, t).unwrap().kendall_tau();
        assert!((back - 0.3).abs() < 1e-10);
        assert_eq!(kendall_tau_start(Family::Plackett, 0.3), None);
        assert_eq!(kendall_tau_start(Family::Gumbel, -0.2), None);
    }

    #[test]
    fn samplers_reproduce_kendall_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in specs() {
            let n = 3000;
            let draws: Vec<(f64, f64)> = (0..n).map(|_| s.sample_pair(&mut rng)).collect();
            let mut c = 0.0;
            let mut m = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    c += ((draws[i].0 - draws[j].0) * (draws[i].1 - draws[j].1)).signum();
                    m += 1.0;
                }
            }
            let tau = c / m;
            assert!((tau - s.kendall_tau()).abs() < 0.04, "{s}: {tau} vs {}", s.kendall_tau());
        }
    }

    #[test]
    fn fit_recovers_gumbel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = CopulaSpec::new(Family::Gumbel, 2.0).unwrap();
        let pairs: Vec<CensoredUniformPair> = (0..2000)
            .map(|_| {
                let (u1, u2) = s.sample_pair(&mut rng);
                let c: f64 = rng.random();
                // censoring at survival level c: observed when U < c fails
                let (d1, o1) = if u1 >= 0.3 * c { (1, u1) } else { (0, 0.3 * c) };
                let (d2, o2) = if u2 >= 0.3 * c { (1, u2) } else { (0, 0.3 * c) };
                CensoredUniformPair::new(o1, o2, d1, d2, 1e-6)
            })
            .collect();
        let fit = fit_copula(Family::Gumbel, &pairs).unwrap();
        assert!(fit.spec.theta > 1.8 && fit.spec.theta < 2.2, "{}", fit.spec.theta);
        assert!(!fit.at_boundary);
        let g: f64 = pair_scores(&fit.spec, &pairs).iter().sum::<f64>() / pairs.len() as f64;
        assert!(g.abs() < 1e-6, "{g}");
    }

    #[test]
    fn fully_censored_is_degenerate() {
        let pairs = vec![CensoredUniformPair::new(1.0, 1.0, 0, 0, 1e-6); 50];
        assert!(matches!(fit_copula(Family::Gumbel, &pairs), Err(Error::DegenerateFit { .. })));
    }

    #[test]
    fn independence_fit_is_noop() {
        let fit = fit_copula(Family::Independence, &[]).unwrap();
        assert_eq!(fit.spec.family, Family::Independence);
    }

    #[test]
    fn frank_stable_for_large_and_negative_theta() {
        let big = CopulaSpec::new(Family::Frank, 45.0).unwrap();
        for (u, v) in [(0.3, 0.6), (0.9, 0.95), (1e-6, 0.5)] {
            let c = big.cdf(u, v);
            assert!(c.is_finite() && c >= 0.0 && c <= u.min(v) + 1e-15, "{c}");
            let d = big.density(u, v);
            assert!(d.is_finite() && d >= 0.0);
        }
        // The textbook form is accurate at moderate |θ|.
        for t in [-3.0, 2.5] {
            let s = CopulaSpec::new(Family::Frank, t).unwrap();
            let (u, v) = (0.35f64, 0.8f64);
            let a = (-t * u).exp_m1();
            let b = (-t * v).exp_m1();
            let g = (-t).exp_m1();
            assert!((s.cdf(u, v) - (-(a * b / g).ln_1p() / t)).abs() < 1e-14);
            assert!((s.dv(u, v) - (-t * v).exp() * a / (g + a * b)).abs() < 1e-14);
            let den = g + a * b;
            assert!((s.density(u, v) - (-t * g * (-t * (u + v)).exp() / (den * den))).abs() < 1e-13);
        }
    }
}
