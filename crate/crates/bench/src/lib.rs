//! Fixtures shared by the benchmarks.

use ctwin_core::simulation::{calibrate_lambda_c, gen_trial, to_records};
use ctwin_core::{Dgp, RestrictedRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Gumbel(1.25) trial with calibrated censoring, restricted at `tau`.
pub fn trial(n_per_arm: usize, censoring: f64, tau: f64, seed: u64) -> (Dgp, Vec<RestrictedRecord>) {
    let base = Dgp::reference(1.25, 0.0).expect("valid DGP");
    let dgp = base.with_lambda_c(calibrate_lambda_c(&base, censoring, seed).expect("calibrates"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = gen_trial(&mut rng, &dgp, n_per_arm).expect("draws");
    let records = to_records(&subjects, &dgp, tau);
    (dgp, records)
}
