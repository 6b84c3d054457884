use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ehdwaves_core::strip::solve_stream;
use ehdwaves_core::{
    assemble_residual, continue_branch, eta_jacobian, mode, BifurcationPoint, BranchSign, ContinuationOptions,
    Discretization, ExtendedState, SurfaceProfile, WaveParams, WaveProblem,
};

const GRIDS: [(usize, usize); 2] = [(32, 24), (64, 48)];

fn params() -> WaveParams {
    WaveParams::new(1.0, 1.0, 0.5, 1.0, 0.4).unwrap()
}

/// A small two-mode surface near the mode-1 bifurcation speed.
fn state(disc: &Discretization) -> ExtendedState {
    let mut eta = SurfaceProfile::zero(disc.modes());
    eta.coeffs_mut()[0] = 2e-2;
    eta.coeffs_mut()[1] = -5e-3;
    ExtendedState { eta, lambda: 1.3, q0: 1e-4 }
}

fn strip_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("strip_solve");
    for (m, n) in GRIDS {
        let disc = Discretization::new(m, n).unwrap();
        let st = state(&disc);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{n}")), &disc, |b, d| {
            b.iter(|| solve_stream(black_box(&st.eta), st.lambda, &params(), &d.lower).unwrap())
        });
    }
    g.finish();
}

fn residual(c: &mut Criterion) {
    let mut g = c.benchmark_group("residual");
    for (m, n) in GRIDS {
        let disc = Discretization::new(m, n).unwrap();
        let st = state(&disc);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{n}")), &disc, |b, d| {
            b.iter(|| assemble_residual(black_box(&st), &params(), d).unwrap())
        });
    }
    g.finish();
}

fn jacobian(c: &mut Criterion) {
    let mut g = c.benchmark_group("eta_jacobian");
    g.sample_size(20);
    for (m, n) in GRIDS {
        let disc = Discretization::new(m, n).unwrap();
        let st = state(&disc);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{n}")), &disc, |b, d| {
            b.iter(|| eta_jacobian(black_box(&st), &params(), d).unwrap())
        });
    }
    g.finish();
}

fn branch(c: &mut Criterion) {
    let mut g = c.benchmark_group("continue_branch");
    g.sample_size(10);
    let prob = WaveProblem::new(params(), 32, 24).unwrap();
    let bp = BifurcationPoint::new(mode(1), BranchSign::Plus, &prob.params, prob.modes()).unwrap();
    let opts = ContinuationOptions { smax: 4e-3, detect_events: false, ..Default::default() };
    g.bench_function("32x24", |b| b.iter(|| continue_branch(black_box(&bp), &prob, &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, strip_solve, residual, jacobian, branch);
criterion_main!(benches);
