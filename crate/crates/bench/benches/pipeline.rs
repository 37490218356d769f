use chanmix::channels::{
    apply, chi_of, pauli_mixing_of, ChannelModel, DensityMatrix, Member, Scenario,
};
use chanmix::experiment::{
    gbar_series, lambda_points, run, GbarMode, RunConfig, DEFAULT_COND_LIMIT,
};
use chanmix::linalg::herm_eig;
use chanmix::markovianity::{ideal_transfer, intermediate_choi, intermediate_map};
use chanmix::tomography::{
    mle_state, outcome_probabilities, probe_states, process_tomography, simulate_counts,
    CountTable,
};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

/// Witness Choi for the first family's combined channel at (1, 1.5), the
/// reference point the analyses keep returning to.
fn witness_choi() -> chanmix::channels::ChoiMatrix {
    let model = ChannelModel::new(Scenario::CaseA, Member::Total);
    let f_t = ideal_transfer(model, 1.5).unwrap();
    let f_s = ideal_transfer(model, 1.0).unwrap();
    let v = intermediate_map(&f_t, &f_s, 1.0, 1.5, DEFAULT_COND_LIMIT).unwrap();
    intermediate_choi(&v).unwrap()
}

fn bench_eig(c: &mut Criterion) {
    let w = witness_choi();
    let herm = w.matrix().herm_part();
    c.bench_function("herm_eig 4x4 witness", |b| {
        b.iter(|| herm_eig(black_box(&herm), 1e-8).unwrap())
    });
}

fn bench_ideal_sweep(c: &mut Criterion) {
    c.bench_function("ideal witness sweep", |b| {
        b.iter(|| {
            let outcome = run(RunConfig::ideal(Scenario::CaseA)).unwrap();
            let mut acc = 0.0;
            for member in Member::ALL {
                for point in lambda_points(&outcome, member).unwrap() {
                    acc += point.mean.abs();
                }
            }
            black_box(acc)
        })
    });
}

fn bench_cell_reconstruction(c: &mut Criterion) {
    let model = ChannelModel::new(Scenario::CaseA, Member::Total);
    let mix = pauli_mixing_of(model, 1.0).unwrap();
    let target = chi_of(&mix);
    let probes = probe_states();
    c.bench_function("single-cell tomography, 1e4 shots", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        b.iter(|| {
            let mut outputs = Vec::with_capacity(4);
            let mut tables = Vec::with_capacity(4);
            for probe in &probes {
                let image = apply(&mix, probe);
                let table = simulate_counts(&outcome_probabilities(&image), 10_000, &mut rng);
                let fit = mle_state(&table, None).unwrap();
                outputs.push(fit.estimate);
                tables.push(table);
            }
            let outputs: [DensityMatrix; 4] = outputs.try_into().unwrap();
            let tables: [CountTable; 4] = tables.try_into().unwrap();
            let fit = process_tomography(&outputs, &tables).unwrap();
            black_box((fit.estimate, &target));
        })
    });
}

fn bench_gbar_series(c: &mut Criterion) {
    let outcome = run(RunConfig::ideal(Scenario::CaseB)).unwrap();
    c.bench_function("gbar series over second-family grid", |b| {
        b.iter(|| {
            let series =
                gbar_series(black_box(&outcome), Member::Ch1, GbarMode::PairwiseReplicas).unwrap();
            black_box(series)
        })
    });
}

criterion_group! {
    name = pipeline;
    config = Criterion::default().sample_size(20);
    targets = bench_eig, bench_ideal_sweep, bench_cell_reconstruction, bench_gbar_series
}
criterion_main!(pipeline);
