use std::hint::black_box;

use blockcert::blockmodel::{operator_norm, BlockNorm, Exponent};
use blockcert::conditions::{verify_certificate, Certificate};
use blockcert::harness::{gen_matrix, gen_signal, stream_rng, ExperimentConfig, MatrixType};
use blockcert::recovery::{
    group_lasso, lasso_lambdas, nebmp, recover_penalized, recover_regular, NebmpParams, Observation,
};
use blockcert::synthesis::{goodness_upper_bound, synthesize_kappa};
use criterion::{criterion_group, criterion_main, Criterion};

fn desk(t: MatrixType) -> ExperimentConfig {
    ExperimentConfig { matrix_type: t, ..Default::default() }
}

fn norms(c: &mut Criterion) {
    let cfg = desk(MatrixType::G);
    let a = gen_matrix(&cfg, &mut stream_rng(1, 0)).unwrap();
    let rs = cfg.structure(BlockNorm::L2).unwrap();
    let w: Vec<f64> = (0..cfg.n).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("operator_norm (2,inf) 24x32", |b| {
        b.iter(|| operator_norm(black_box(&a), BlockNorm::L2, BlockNorm::Linf).unwrap())
    });
    c.bench_function("L_{s,2} K=8 s=3", |b| b.iter(|| rs.lsp(black_box(&w), 3, Exponent::TWO).unwrap()));
}

fn synthesis(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthesis");
    group.sample_size(10);
    for t in [MatrixType::G, MatrixType::H] {
        let cfg = desk(t);
        let a = gen_matrix(&cfg, &mut stream_rng(2, 0)).unwrap();
        for r in [BlockNorm::Linf, BlockNorm::L2] {
            let rs = cfg.structure(r).unwrap();
            group.bench_function(format!("synthesize_kappa {t} r={r} s=1"), |b| {
                b.iter(|| synthesize_kappa(black_box(&a), &rs, 1, r).unwrap())
            });
        }
        let rs = cfg.structure(BlockNorm::Linf).unwrap();
        group.bench_function(format!("goodness_upper_bound {t} r=inf"), |b| {
            b.iter(|| goodness_upper_bound(black_box(&a), &rs, BlockNorm::Linf, 20).unwrap())
        });
    }
    group.finish();
}

fn recovery(c: &mut Criterion) {
    let mut group = c.benchmark_group("recovery");
    group.sample_size(20);
    let cfg = desk(MatrixType::G);
    let a = gen_matrix(&cfg, &mut stream_rng(3, 0)).unwrap();
    for r in [BlockNorm::Linf, BlockNorm::L2] {
        let rs = cfg.structure(r).unwrap();
        let h = synthesize_kappa(&a, &rs, 1, r).unwrap().certificate.h;
        let x = gen_signal(&rs, 1, &mut stream_rng(3, 1)).unwrap();
        let obs = Observation::noiseless(a.clone(), rs.clone(), &x).unwrap();
        group.bench_function(format!("regular r={r}"), |b| {
            b.iter(|| recover_regular(black_box(&obs), &h, 0.0).unwrap())
        });
        group.bench_function(format!("penalized r={r}"), |b| {
            b.iter(|| recover_penalized(black_box(&obs), &h, 2.0).unwrap())
        });
        let cert = Certificate::from_contrast(&a, h.clone(), &rs, 1, Exponent::Inf, "bench").unwrap();
        group.bench_function(format!("verify_certificate r={r}"), |b| {
            b.iter(|| verify_certificate(black_box(&cert), &a, &rs).unwrap())
        });
        let params = NebmpParams { gamma_bar: cert.omega.max(), rho: 0.0, s: 1, upsilon: 0.0, iters: 50 };
        group.bench_function(format!("nebmp 50 iterations r={r}"), |b| {
            b.iter(|| nebmp(black_box(&obs), &h, &params, None).unwrap())
        });
    }
    let rs = cfg.structure(BlockNorm::L2).unwrap();
    let x = gen_signal(&rs, 1, &mut stream_rng(3, 2)).unwrap();
    let obs = Observation::noiseless(a.clone(), rs.clone(), &x).unwrap();
    let lambdas = lasso_lambdas(&rs, cfg.m, 0.001, 1.0);
    group.bench_function("group lasso", |b| b.iter(|| group_lasso(black_box(&obs), &lambdas).unwrap()));
    group.finish();
}

criterion_group!(benches, norms, synthesis, recovery);
criterion_main!(benches);
