//! Shared fixtures and from-scratch reference computations for the
//! integration tests. Nothing here calls the library's fitting or
//! influence code.
#![allow(dead_code)]

use ctwin_core::copula::CopulaSpec;
use ctwin_core::estimation::RestrictedRecord;
use ctwin_core::simulation::{gen_trial, to_records, Dgp, WeibullComponent, DEFAULT_CENSOR_BETA};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Higher-hazard two-component DGP so small samples carry enough events.
pub fn busy_dgp(copula: CopulaSpec, lambda_c: f64) -> Dgp {
    Dgp::new(
        vec![
            WeibullComponent {
                shape: 1.2,
                scale: 0.012,
                beta: vec![0.4, 0.5, 0.3],
                beta_a: -0.3,
            },
            WeibullComponent {
                shape: 0.9,
                scale: 0.05,
                beta: vec![0.3, 0.6, 0.2],
                beta_a: -0.5,
            },
        ],
        copula,
        DEFAULT_CENSOR_BETA.to_vec(),
        lambda_c,
    )
    .unwrap()
}

pub fn sim_records(dgp: &Dgp, n_per_arm: usize, tau: f64, seed: u64) -> Vec<RestrictedRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = gen_trial(&mut rng, dgp, n_per_arm).unwrap();
    to_records(&subjects, dgp, tau)
}

/// Reverse product-limit curve with case weights; `censored[i]` marks a
/// censoring event at `times[i]`.
pub fn weighted_km(times: &[f64], censored: &[bool], w: &[f64]) -> impl Fn(f64) -> f64 {
    let mut jumps: Vec<f64> = times
        .iter()
        .zip(censored)
        .filter(|(_, &c)| c)
        .map(|(&t, _)| t)
        .collect();
    jumps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    jumps.dedup();
    let mut steps = Vec::new();
    let mut s = 1.0;
    for &u in &jumps {
        let at_risk: f64 = times.iter().zip(w).filter(|(&t, _)| t >= u).map(|(_, &x)| x).sum();
        let d: f64 = (0..times.len())
            .filter(|&i| censored[i] && times[i] == u)
            .map(|i| w[i])
            .sum();
        s *= 1.0 - d / at_risk;
        steps.push((u, s));
    }
    move |t: f64| {
        let mut v = 1.0;
        for &(u, s) in &steps {
            if u <= t {
                v = s;
            }
        }
        v
    }
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = ((c + 1)..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x
}

/// Weighted Breslow-ties Cox fit by plain Newton; returns (β, baseline
/// jumps as (time, increment)).
pub fn weighted_cox(times: &[f64], events: &[bool], z: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, Vec<(f64, f64)>) {
    let p = z[0].len();
    let n = times.len();
    let mut beta = vec![0.0; p];
    for _ in 0..100 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for i in 0..n {
            if !events[i] {
                continue;
            }
            let mut s0 = 0.0;
            let mut s1 = vec![0.0; p];
            let mut s2 = vec![vec![0.0; p]; p];
            for j in 0..n {
                if times[j] >= times[i] {
                    let e = w[j] * z[j].iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp();
                    s0 += e;
                    for r in 0..p {
                        s1[r] += e * z[j][r];
                        for c in 0..p {
                            s2[r][c] += e * z[j][r] * z[j][c];
                        }
                    }
                }
            }
            for r in 0..p {
                grad[r] += w[i] * (z[i][r] - s1[r] / s0);
                for c in 0..p {
                    hess[r][c] += w[i] * (s2[r][c] / s0 - s1[r] * s1[c] / (s0 * s0));
                }
            }
        }
        let step = solve(hess, grad.clone());
        for r in 0..p {
            beta[r] += step[r];
        }
        if grad.iter().map(|g| g.abs()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
    }
    let mut ev: Vec<f64> = (0..n).filter(|&i| events[i]).map(|i| times[i]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.dedup();
    let jumps = ev
        .iter()
        .map(|&u| {
            let d: f64 = (0..n).filter(|&i| events[i] && times[i] == u).map(|i| w[i]).sum();
            let s0: f64 = (0..n)
                .filter(|&j| times[j] >= u)
                .map(|j| w[j] * z[j].iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp())
                .sum();
            (u, d / s0)
        })
        .collect();
    (beta, jumps)
}

pub fn cox_curve(beta: Vec<f64>, jumps: Vec<(f64, f64)>) -> impl Fn(f64, &[f64]) -> f64 {
    move |t: f64, z: &[f64]| {
        let lam: f64 = jumps.iter().filter(|(u, _)| *u <= t).map(|(_, d)| d).sum();
        (-lam * z.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp()).exp()
    }
}

/// IPCW (π_t, π_c) for two components written out directly.
pub fn ipcw_pi<G1, G0>(records: &[RestrictedRecord], tau: f64, g1: G1, g0: G0, eps: f64) -> (f64, f64)
where
    G1: Fn(f64, &[f64]) -> f64,
    G0: Fn(f64, &[f64]) -> f64,
{
    let fl = |g: f64| g.max(1e-10).max(eps);
    let t: Vec<&RestrictedRecord> = records.iter().filter(|r| r.arm == 1).collect();
    let c: Vec<&RestrictedRecord> = records.iter().filter(|r| r.arm == 0).collect();
    let (mut win, mut loss) = (0.0, 0.0);
    for i in &t {
        for j in &c {
            let (yi, yj) = (i.y_tilde[0], j.y_tilde[0]);
            if yi > yj && j.delta[0] == 1 {
                win += 1.0 / (fl(g1(yj, &i.covariates)) * fl(g0(yj, &j.covariates)));
            }
            if yj > yi && i.delta[0] == 1 {
                loss += 1.0 / (fl(g1(yi, &i.covariates)) * fl(g0(yi, &j.covariates)));
            }
            let tied = i.y_tilde[0] == tau && i.delta[0] == 0 && j.y_tilde[0] == tau && j.delta[0] == 0;
            if tied {
                let d = fl(g1(tau, &i.covariates)) * fl(g0(tau, &j.covariates));
                let (yi, yj) = (i.y_tilde[1], j.y_tilde[1]);
                if yi > yj && j.delta[1] == 1 {
                    win += 1.0 / d;
                }
                if yj > yi && i.delta[1] == 1 {
                    loss += 1.0 / d;
                }
            }
        }
    }
    let m = (t.len() * c.len()) as f64;
    (win / m, loss / m)
}

/// m-IPCW (π_t, π_c) for two components under the independence copula,
/// where both conditional tie ratios reduce to S₁(τ|z)/S₁(u|z).
pub fn mipcw_independence_pi<G1, G0, S1, S0>(
    records: &[RestrictedRecord],
    tau: f64,
    g1: G1,
    g0: G0,
    s1: S1,
    s0: S0,
    eps: f64,
) -> (f64, f64)
where
    G1: Fn(f64, &[f64]) -> f64,
    G0: Fn(f64, &[f64]) -> f64,
    S1: Fn(f64, &[f64]) -> f64,
    S0: Fn(f64, &[f64]) -> f64,
{
    let fl = |g: f64| g.max(1e-10).max(eps);
    let cl = |s: f64| s.clamp(eps, 1.0 - eps);
    let ratio = |s: &dyn Fn(f64, &[f64]) -> f64, u: f64, z: &[f64]| {
        if u >= tau {
            1.0
        } else {
            (cl(s(tau, z)) / cl(s(u, z))).clamp(0.0, 1.0)
        }
    };
    let t: Vec<&RestrictedRecord> = records.iter().filter(|r| r.arm == 1).collect();
    let c: Vec<&RestrictedRecord> = records.iter().filter(|r| r.arm == 0).collect();
    let (mut win, mut loss) = (0.0, 0.0);
    for i in &t {
        for j in &c {
            let (yi, yj) = (i.y_tilde[0], j.y_tilde[0]);
            if yi > yj && j.delta[0] == 1 {
                win += 1.0 / (fl(g1(yj, &i.covariates)) * fl(g0(yj, &j.covariates)));
            }
            if yj > yi && i.delta[0] == 1 {
                loss += 1.0 / (fl(g1(yi, &i.covariates)) * fl(g0(yi, &j.covariates)));
            }
            if i.delta[0] == 1 || j.delta[0] == 1 {
                continue;
            }
            // Neither subject had component 1, so u = end of follow-up.
            let (ui, uj) = (i.y_tilde[0], j.y_tilde[0]);
            let gate = ratio(&s1, ui, &i.covariates) * ratio(&s0, uj, &j.covariates);
            let (yi, yj) = (i.y_tilde[1], j.y_tilde[1]);
            if yi > yj && j.delta[1] == 1 {
                win += gate / (fl(g1(yj, &i.covariates)) * fl(g0(yj, &j.covariates)));
            }
            if yj > yi && i.delta[1] == 1 {
                loss += gate / (fl(g1(yi, &i.covariates)) * fl(g0(yi, &j.covariates)));
            }
        }
    }
    let m = (t.len() * c.len()) as f64;
    (win / m, loss / m)
}
