//! Sequential vs parallel execution of the batch runner and of the
//! heaviest per-frame stages.
//!
//! Run with `cargo bench -p jcas-sim`. Frames are reduced in size so that a
//! sample finishes in well under a second; the relative cost of the stages
//! matches full-size frames.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jcas_sim::exec::{map_indexed, ExecMode};
use jcas_sim::experiment::{run_experiment, ExperimentConfig};
use jcas_sim::scenario::{generate_trajectory, ScenarioParams};
use jcas_sim::sensing::{DopplerSpectrum, ZoomWindow};
use jcas_sim::waveform::{generate_frame, synthesize_ratio_matrix, OfdmConfig};

fn small_ofdm() -> OfdmConfig {
    OfdmConfig {
        n_subcarriers: 512,
        n_symbols: 64,
        n_cp: 8,
        bandwidth_hz: 6.25e6,
        n_snapshots: 64,
        ..OfdmConfig::default()
    }
}

fn small_experiment() -> ExperimentConfig {
    ExperimentConfig {
        n_trajectories: 8,
        master_seed: 1,
        ofdm: small_ofdm(),
        scenario: ScenarioParams {
            steps: 6,
            ..ScenarioParams::default()
        },
        czt_range_outputs: 512,
        czt_doppler_outputs: 64,
        ..ExperimentConfig::default()
    }
}

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn batch(c: &mut Criterion) {
    let cfg = small_experiment();
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiment(black_box(&cfg), mode).unwrap())
        });
    }
    group.finish();
}

fn stages(c: &mut Criterion) {
    let ofdm = small_ofdm();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let traj = generate_trajectory(&ofdm, &ScenarioParams::default(), &mut rng).unwrap();
    let truth = traj.truths()[0];
    let frame = generate_frame(&ofdm, &mut rng);
    let y = synthesize_ratio_matrix(&ofdm, &truth, &frame, &mut rng).unwrap();
    let window = ZoomWindow::new(truth.range, 4.0, 512, ofdm.n_symbols).unwrap();

    let mut group = c.benchmark_group("stages");
    group.sample_size(20);
    for (name, mode) in MODES {
        // a one-task pool pins the inner data-parallel loops to `mode`
        let in_mode = |f: &(dyn Fn() + Sync)| map_indexed(mode, 1, |_| f()).unwrap();
        group.bench_function(BenchmarkId::new("zero_pad_x16", name), |b| {
            b.iter(|| {
                in_mode(&|| {
                    let s = DopplerSpectrum::fft(&y, &ofdm).unwrap();
                    black_box(s.range_peak(16).unwrap());
                })
            })
        });
        group.bench_function(BenchmarkId::new("czt_zoom", name), |b| {
            b.iter(|| {
                in_mode(&|| {
                    let s = DopplerSpectrum::czt(&y, &ofdm, ofdm.n_symbols).unwrap();
                    black_box(s.zoom_peak(&window, &ofdm).unwrap());
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, batch, stages);
criterion_main!(benches);
