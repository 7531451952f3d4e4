//! True win probabilities under the simulation model by Gauss–Legendre
//! quadrature over t and Z₂ and exact enumeration over (Z₁, Z₃).

use crate::copula::Family;
use crate::error::Result;
use crate::estimation::summarize_pi;
use crate::quadrature::GaussLegendre;
use crate::simulation::Dgp;

#[derive(Debug, Clone, PartialEq)]
pub struct TruthResult {
    pub tau: f64,
    pub pi_tq: Vec<f64>,
    pub pi_cq: Vec<f64>,
    pub pi_t: f64,
    pub pi_c: f64,
    pub nb: f64,
    pub wr: f64,
    pub wo: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureOrders {
    pub inner: usize,
    pub z2: usize,
    /// Inner nodes are placed on s with t = τ·s^grading, which smooths
    /// the t^(ρ−1) endpoint behavior of the subdensity when ρ < 1.
    pub grading: u32,
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        Self { inner: 80, z2: 24, grading: 3 }
    }
}

/// Pr(T_k > τ for k < q, T_q > t | arm, z).
pub fn prefix_survival_true(dgp: &Dgp, arm: u8, q: usize, tau: f64, t: f64, z: &[f64]) -> Result<f64> {
    let spec = &dgp.copula;
    if spec.family == Family::Gumbel {
        let th = spec.theta;
        let a = gumbel_a(dgp, arm, q, tau, t, z);
        return Ok((-a.powf(1.0 / th)).exp());
    }
    let us = prefix_margins(dgp, arm, q, tau, t, z);
    spec.prefix_cdf(&us)
}

/// −∂/∂t of [`prefix_survival_true`].
pub fn prefix_subdensity_true(dgp: &Dgp, arm: u8, q: usize, tau: f64, t: f64, z: &[f64]) -> Result<f64> {
    let spec = &dgp.copula;
    let m = dgp.margin(arm, q);
    let lam_q = m.cumhaz(t, z);
    let haz = m.hazard(t, z);
    if spec.family == Family::Gumbel {
        let th = spec.theta;
        let a = gumbel_a(dgp, arm, q, tau, t, z);
        let s = (-a.powf(1.0 / th)).exp();
        if th == 1.0 {
            return Ok(s * haz);
        }
        if lam_q <= 0.0 {
            return Ok(0.0);
        }
        return Ok(s * lam_q.powf(th - 1.0) * a.powf(1.0 / th - 1.0) * haz);
    }
    let us = prefix_margins(dgp, arm, q, tau, t, z);
    let d = spec.prefix_dlast(&us)?;
    Ok(d * us[q] * haz)
}

fn gumbel_a(dgp: &Dgp, arm: u8, q: usize, tau: f64, t: f64, z: &[f64]) -> f64 {
    let th = dgp.copula.theta;
    let mut a = 0.0;
    for k in 0..q {
        a += dgp.margin(arm, k).cumhaz(tau, z).powf(th);
    }
    a + dgp.margin(arm, q).cumhaz(t, z).powf(th)
}

fn prefix_margins(dgp: &Dgp, arm: u8, q: usize, tau: f64, t: f64, z: &[f64]) -> Vec<f64> {
    let mut us: Vec<f64> = (0..q).map(|k| dgp.margin(arm, k).survival(tau, z)).collect();
    us.push(dgp.margin(arm, q).survival(t, z));
    us
}

/// Covariate law nodes: (z, probability weight).
fn covariate_nodes(dgp: &Dgp, z2_order: usize) -> Vec<([f64; 3], f64)> {
    let g = GaussLegendre::new(z2_order);
    let mut out = Vec::with_capacity(4 * z2_order);
    for z1 in [0.0, 1.0] {
        for z3 in [0.0, 1.0] {
            let p1 = if z1 == 1.0 { dgp.p_z1 } else { 1.0 - dgp.p_z1 };
            let p3 = if z3 == 1.0 { dgp.p_z3 } else { 1.0 - dgp.p_z3 };
            for (z2, w) in g.mapped(0.0, 1.0) {
                out.push(([z1, z2, z3], p1 * p3 * w));
            }
        }
    }
    out
}

/// π_tq and π_cq for every component, then NB, WR and WO.
///
/// The covariate expectation factors across arms, so each inner node uses
/// the arm-averaged prefix survival and subdensity.
pub fn true_values_with(dgp: &Dgp, tau: f64, orders: QuadratureOrders) -> Result<TruthResult> {
    let nodes = covariate_nodes(dgp, orders.z2);
    let g = GaussLegendre::new(orders.inner);
    let nq = dgp.components.len();
    let mut pi_tq = vec![0.0; nq];
    let mut pi_cq = vec![0.0; nq];
    for q in 0..nq {
        let p = orders.grading.max(1) as i32;
        for (x, wx) in g.mapped(0.0, 1.0) {
            let t = tau * x.powi(p);
            let w = wx * tau * p as f64 * x.powi(p - 1);
            let mut s = [0.0; 2];
            let mut h = [0.0; 2];
            for arm in 0..2u8 {
                for (z, p) in &nodes {
                    s[arm as usize] += p * prefix_survival_true(dgp, arm, q, tau, t, z)?;
                    h[arm as usize] += p * prefix_subdensity_true(dgp, arm, q, tau, t, z)?;
                }
            }
            pi_tq[q] += w * s[1] * h[0];
            pi_cq[q] += w * s[0] * h[1];
        }
    }
    let pi_t: f64 = pi_tq.iter().sum();
    let pi_c: f64 = pi_cq.iter().sum();
    let sm = summarize_pi(pi_t, pi_c)?;
    Ok(TruthResult {
        tau,
        pi_tq,
        pi_cq,
        pi_t,
        pi_c,
        nb: sm.nb,
        wr: sm.wr,
        wo: sm.wo,
    })
}

pub fn true_values(dgp: &Dgp, tau: f64) -> Result<TruthResult> {
    true_values_with(dgp, tau, QuadratureOrders::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::CopulaSpec;
    use crate::simulation::{default_components, DEFAULT_CENSOR_BETA};

    fn reference_dgp(theta: f64) -> Dgp {
        Dgp::reference(theta, 0.0).unwrap()
    }

    #[test]
    fn reproduces_table_truths() {
        let expected = [
            (1.25, 12.0, 0.078, 1.370, 1.170),
            (1.25, 24.0, 0.106, 1.331, 1.237),
            (1.25, 36.0, 0.111, 1.293, 1.249),
            (4.0, 12.0, 0.082, 1.408, 1.179),
            (4.0, 24.0, 0.117, 1.389, 1.264),
            (4.0, 36.0, 0.129, 1.363, 1.297),
        ];
        for (theta, tau, nb, wr, wo) in expected {
            let r = true_values(&reference_dgp(theta), tau).unwrap();
            assert!((r.nb - nb).abs() <= 0.001 + 1e-9, "theta {theta} tau {tau}: nb {}", r.nb);
            assert!((r.wr - wr).abs() <= 0.001 + 1e-9, "theta {theta} tau {tau}: wr {}", r.wr);
            assert!((r.wo - wo).abs() <= 0.001 + 1e-9, "theta {theta} tau {tau}: wo {}", r.wo);
            assert!(((1.0 + r.nb) / (1.0 - r.nb) - r.wo).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_orders_is_stable() {
        for theta in [1.25, 4.0] {
            for tau in [12.0, 36.0] {
                let d = reference_dgp(theta);
                let a = true_values(&d, tau).unwrap();
                let b = true_values_with(&d, tau, QuadratureOrders { inner: 160, z2: 48, ..Default::default() }).unwrap();
                for q in 0..2 {
                    assert!((a.pi_tq[q] - b.pi_tq[q]).abs() < 1e-6, "{} vs {}", a.pi_tq[q], b.pi_tq[q]);
                    assert!((a.pi_cq[q] - b.pi_cq[q]).abs() < 1e-6, "{} vs {}", a.pi_cq[q], b.pi_cq[q]);
                }
            }
        }
    }

    #[test]
    fn theta_one_factorizes() {
        let d = reference_dgp(1.0);
        let z = [1.0, 0.3, 0.0];
        let s = prefix_survival_true(&d, 1, 1, 24.0, 7.0, &z).unwrap();
        let want = d.margin(1, 0).survival(24.0, &z) * d.margin(1, 1).survival(7.0, &z);
        assert!((s - want).abs() < 1e-14);
        assert_eq!(prefix_survival_true(&d, 0, 0, 24.0, 0.0, &z).unwrap(), 1.0);
    }

    #[test]
    fn subdensity_is_minus_derivative() {
        let d = reference_dgp(2.5);
        let z = [0.0, 0.8, 1.0];
        let (t, h) = (9.0, 1e-5);
        let fd = -(prefix_survival_true(&d, 0, 1, 30.0, t + h, &z).unwrap()
            - prefix_survival_true(&d, 0, 1, 30.0, t - h, &z).unwrap())
            / (2.0 * h);
        let an = prefix_subdensity_true(&d, 0, 1, 30.0, t, &z).unwrap();
        assert!((fd - an).abs() < 1e-8, "{fd} vs {an}");
    }

    #[test]
    fn general_family_path_matches_gumbel_closed_form() {
        let d = reference_dgp(2.0);
        let z = [1.0, 0.5, 1.0];
        let us = [d.margin(1, 0).survival(20.0, &z), d.margin(1, 1).survival(6.0, &z)];
        let via_prefix = d.copula.prefix_cdf(&us).unwrap();
        let closed = prefix_survival_true(&d, 1, 1, 20.0, 6.0, &z).unwrap();
        assert!((via_prefix - closed).abs() < 1e-12);
    }

    #[test]
    fn arm_swap_negates_nb() {
        let mut comps = default_components();
        for c in comps.iter_mut() {
            c.beta_a = -c.beta_a;
        }
        let d = reference_dgp(1.25);
        let swapped = Dgp::new(comps, d.copula, DEFAULT_CENSOR_BETA.to_vec(), 0.0).unwrap();
        // Exchanging arms is equivalent to flipping the treatment effect
        // and relabeling the baseline; compare through the π pair.
        let a = true_values(&d, 24.0).unwrap();
        let b = true_values(&swapped, 24.0).unwrap();
        let ratio_a = a.pi_t / a.pi_c;
        assert!(ratio_a > 1.0);
        assert!(b.nb < 0.0);
        let mut d0 = default_components();
        for c in d0.iter_mut() {
            c.beta_a = 0.0;
        }
        let null = Dgp::new(d0, CopulaSpec::new(Family::Gumbel, 1.25).unwrap(), DEFAULT_CENSOR_BETA.to_vec(), 0.0).unwrap();
        let r = true_values(&null, 24.0).unwrap();
        assert!(r.nb.abs() < 1e-12 && (r.wr - 1.0).abs() < 1e-12 && (r.wo - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stronger_effect_raises_nb() {
        let base = true_values(&reference_dgp(1.25), 24.0).unwrap().nb;
        let mut comps = default_components();
        comps[1].beta_a = -0.6;
        let d = Dgp::new(comps, CopulaSpec::new(Family::Gumbel, 1.25).unwrap(), DEFAULT_CENSOR_BETA.to_vec(), 0.0).unwrap();
        assert!(true_values(&d, 24.0).unwrap().nb > base);
    }
}
