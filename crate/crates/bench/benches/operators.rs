use criterion::{criterion_group, criterion_main, Criterion};
use pmcgraph::{
    conformal_mean_curvature, divergence_oracle, mean_curvature_product, pmc_residual, BaseGrid,
    ConformalFactor, GridSpec, ScalarField, Topology,
};
use std::hint::black_box;

fn torus_field(n: usize) -> ScalarField {
    let grid = BaseGrid::build(&GridSpec::new(
        &[n, n],
        &[1.0, 1.0],
        &[Topology::Periodic; 2],
    ))
    .unwrap();
    ScalarField::from_fn(&grid, |x| {
        1.0 + 0.2 * (std::f64::consts::TAU * x[0]).sin() * (std::f64::consts::TAU * x[1]).cos()
    })
    .unwrap()
}

fn operators(c: &mut Criterion) {
    let u = torus_field(128);
    let f = ConformalFactor::from_expr("0.2*sin(6.283185307179586*x1) - ln(r)").unwrap();
    let h = pmcgraph::parse_pmc("0.5*sin(z) + 0.1*sin(6.283185307179586*x1)").unwrap();
    c.bench_function("mean_curvature_product 128^2", |b| {
        b.iter(|| mean_curvature_product(black_box(&u)))
    });
    c.bench_function("conformal_mean_curvature 128^2", |b| {
        b.iter(|| conformal_mean_curvature(black_box(&u), &f, 2).unwrap())
    });
    c.bench_function("divergence_oracle 128^2", |b| {
        b.iter(|| divergence_oracle(black_box(&u), &f, 2).unwrap())
    });
    c.bench_function("pmc_residual 128^2", |b| {
        b.iter(|| pmc_residual(black_box(&u), &h, None, 2, None).unwrap())
    });
}

criterion_group!(benches, operators);
criterion_main!(benches);
