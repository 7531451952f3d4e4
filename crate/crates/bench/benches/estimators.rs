use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ctwin_bench::trial;
use ctwin_core::{
    estimate, estimate_full, fit_nuisances, influence_rows, sandwich, true_values, CopulaSpec, Dgp, Family, Method,
    NuisanceConfig,
};
use std::hint::black_box;

fn point_estimates(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate");
    for n in [100, 200, 400] {
        let (_, records) = trial(n, 0.4, 24.0, 3);
        let cfg = NuisanceConfig::default();
        for method in [Method::Ipcw, Method::MIpcw] {
            let fitted = fit_nuisances(&records, method, &cfg).unwrap();
            g.bench_with_input(BenchmarkId::new(method.label(), n), &records, |b, r| {
                b.iter(|| estimate(black_box(r), 24.0, method, &fitted.bundle).unwrap())
            });
        }
    }
    g.finish();
}

fn nuisance_fits(c: &mut Criterion) {
    let (_, records) = trial(400, 0.4, 24.0, 4);
    let cfg = NuisanceConfig::default();
    c.bench_function("fit_nuisances/m-IPCW/400", |b| {
        b.iter(|| fit_nuisances(black_box(&records), Method::MIpcw, &cfg).unwrap())
    });
}

fn sandwich_variance(c: &mut Criterion) {
    let mut g = c.benchmark_group("influence_rows");
    g.sample_size(10);
    let (_, records) = trial(200, 0.4, 24.0, 5);
    for method in [Method::Ipcw, Method::MIpcw] {
        let fitted = fit_nuisances(&records, method, &NuisanceConfig::default()).unwrap();
        let est = estimate_full(&records, 24.0, method, &fitted.bundle).unwrap();
        g.bench_function(method.label(), |b| {
            b.iter(|| sandwich(&influence_rows(black_box(&records), &est, &fitted, 24.0).unwrap()))
        });
    }
    g.finish();
}

fn truth(c: &mut Criterion) {
    let dgp = Dgp::reference(1.25, 0.0).unwrap();
    c.bench_function("true_values/tau36", |b| b.iter(|| true_values(black_box(&dgp), 36.0).unwrap()));
}

fn copula_kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("copula");
    for (f, t) in [(Family::Gumbel, 2.0), (Family::Clayton, 2.0), (Family::Frank, 5.0), (Family::Plackett, 4.0)] {
        let s = CopulaSpec::new(f, t).unwrap();
        g.bench_function(f.name(), |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for k in 1..100 {
                    let u = k as f64 / 100.0;
                    acc += s.cdf(u, 0.4) + s.dv(u, 0.4) + s.density(u, 0.4);
                }
                black_box(acc)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, point_estimates, nuisance_fits, sandwich_variance, truth, copula_kernels);
criterion_main!(benches);
