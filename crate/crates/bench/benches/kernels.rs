use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ctdr_bench::{sample_with_truth, staircase};
use ctdr_core::dgp::DgpSpec;
use ctdr_core::estimator::{solve_linear, EstimatingFunctionPlugin};
use ctdr_core::nuisance::{default_cutpoints, fit_piecewise_exponential, Target};
use ctdr_core::stepfun::{product_limit, rs_integrate, total_variation, FiniteVariationPath, Horizon, RsOptions};

fn integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("rs_integrate");
    for k in [10, 100, 1000] {
        let h = staircase(k, 0.25);
        let q = FiniteVariationPath::from(&staircase(k, 0.5));
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| rs_integrate(&h, &q, Horizon::Infinity, RsOptions::default()).unwrap())
        });
    }
    group.finish();

    let cumhaz = FiniteVariationPath::from(&staircase(1000, 0.5));
    c.bench_function("total_variation/1000", |b| {
        b.iter(|| total_variation(&cumhaz, None, true))
    });
    let (_, truth) = sample_with_truth(&DgpSpec::censoring_default(), 10, 1);
    let path = truth.event.cumhaz_path(0.5, 3.0);
    c.bench_function("product_limit/exponential", |b| {
        b.iter(|| product_limit(&path, 2.0).unwrap())
    });
}

fn estimating_functions(c: &mut Criterion) {
    for spec in [DgpSpec::censoring_default(), DgpSpec::truncation_default()] {
        let (sample, truth) = sample_with_truth(&spec, 2000, 3);
        let plugin = EstimatingFunctionPlugin::new(spec.scenario, &truth, spec.horizon);
        c.bench_function(&format!("coefficients/{}/2000", spec.scenario.name()), |b| {
            b.iter(|| plugin.all_coefficients(&sample).unwrap())
        });
        let coefs = plugin.all_coefficients(&sample).unwrap();
        c.bench_function(&format!("solve_linear/{}/2000", spec.scenario.name()), |b| {
            b.iter(|| solve_linear(&coefs).unwrap())
        });
        for target in [Target::Event, Target::Coarsening] {
            let cuts = default_cutpoints(&sample, target);
            c.bench_function(&format!("fit/{}/{target:?}/2000", spec.scenario.name()), |b| {
                b.iter(|| fit_piecewise_exponential(&sample, target, &cuts, true).unwrap())
            });
        }
    }
}

criterion_group!(benches, integration, estimating_functions);
criterion_main!(benches);
