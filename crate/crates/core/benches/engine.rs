//! Benchmarks of the data-parallel hot paths. Run with the default features
//! for the rayon build and with `--no-default-features` for the sequential
//! fallback; the IDs match so the two runs can be compared directly:
//!
//! ```text
//! cargo bench -p dimersim-core
//! cargo bench -p dimersim-core --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, Criterion};

use dimersim_core::fock::{DimerParams, FockBasis};
use dimersim_core::greens::{build_greens_set, GfSectors, DEFAULT_WEIGHT_PRUNE};
use dimersim_core::liouvillian::build_blocks;
use dimersim_core::spectral::{
    diagonalize_block, diagonalize_blocks, evolve, steady_state, DensityMatrix,
};

fn params() -> DimerParams {
    DimerParams::symmetric(1.0, 0.1, 0.026, 3e-4, 2e-4).unwrap()
}

fn bench_block_assembly(c: &mut Criterion) {
    let basis = FockBasis::enumerate(8).unwrap();
    let p = params();
    c.bench_function("build_blocks/cutoff8/sectors3", |b| {
        b.iter(|| build_blocks(&basis, &p, &[0, 1, -1]).unwrap())
    });
}

fn bench_diagonalization(c: &mut Criterion) {
    let basis = FockBasis::enumerate(6).unwrap();
    let p = params();
    let blocks = build_blocks(&basis, &p, &[0, 1, -1]).unwrap();
    c.bench_function("diagonalize_blocks/cutoff6/sectors3", |b| {
        b.iter(|| diagonalize_blocks(&blocks).unwrap())
    });
}

fn bench_trajectory(c: &mut Criterion) {
    let basis = FockBasis::enumerate(6).unwrap();
    let p = params();
    let blocks = build_blocks(&basis, &p, &[0]).unwrap();
    let decomp = diagonalize_block(&blocks[0]).unwrap();
    let rho0 = DensityMatrix::from_fock_state(&basis, 3, 1).unwrap();
    let times: Vec<f64> = (0..4000).map(|k| k as f64 * 0.25).collect();
    c.bench_function("evolve/cutoff6/4000pts", |b| {
        b.iter(|| evolve(&decomp, &basis, &rho0, &times).unwrap())
    });
}

fn bench_greens_evaluation(c: &mut Criterion) {
    let basis = FockBasis::enumerate(5).unwrap();
    let p = params();
    let blocks = build_blocks(&basis, &p, &[0, 1, -1]).unwrap();
    let decomps = diagonalize_blocks(&blocks).unwrap();
    let rho_ss = steady_state(&decomps[0], &basis).unwrap();
    let sectors = GfSectors::new(&decomps[1], &decomps[2]).unwrap();
    let set = build_greens_set(&sectors, &basis, &rho_ss, DEFAULT_WEIGHT_PRUNE).unwrap();
    let grid = dimersim_core::greens::linspace(0.0, 2.0, 2001);
    c.bench_function("greens_evaluate/cutoff5/2001pts", |b| {
        b.iter(|| set.ret_ll.evaluate_grid(&grid))
    });
}

criterion_group!(
    benches,
    bench_block_assembly,
    bench_diagonalization,
    bench_trajectory,
    bench_greens_evaluation
);
criterion_main!(benches);
