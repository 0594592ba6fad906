//! Monte-Carlo batch runner and result files.
//!
//! Every trajectory owns an RNG seeded with `master_seed ^ index`, so the
//! results do not depend on how trajectories are spread over workers.
//! Aggregation runs afterwards in trajectory order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{self, ExecMode};
use crate::scenario::{
    bounds_report, complexity_table, generate_trajectory, BoundsReport, ErrorAccumulator, ErrorSummary, Estimate,
    Estimator, ScenarioParams, StepRecord,
};
use crate::sensing::{DopplerSpectrum, Peak, ZoomWindow};
use crate::trackers::{
    ebm_step, kalman_czt_step_with, kalman_predict, kalman_update, EbmState, KalmanConfig, KalmanCztConfig,
    TrackState, DEFAULT_SIGMA_MEAS, DEFAULT_SIGMA_PRED,
};
use crate::waveform::{
    generate_frame, synthesize_array_snapshots, synthesize_ratio_matrix, BartlettScanner, OfdmConfig, TargetTruth,
};
use crate::{Error, Result};

/// How the trackers learn the first state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// The first state is the ground truth, with zero covariance.
    #[default]
    KnownTruth,
    /// The first state is the native RDM / Bartlett estimate.
    RdmEstimate,
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "known_truth" | "known" => Ok(InitMode::KnownTruth),
            "rdm_estimate" | "rdm" => Ok(InitMode::RdmEstimate),
            _ => Err(Error::Config(format!(
                "unknown init mode {s:?}; expected known_truth or rdm_estimate"
            ))),
        }
    }
}

/// Everything a batch run needs. Serialises to a flat key/value file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub init_mode: InitMode,
    pub estimators: Vec<Estimator>,
    pub out_dir: PathBuf,
    /// Zero-padding factor of the ZP estimator.
    pub pad_factor: usize,
    /// Range outputs of both chirp-Z zooms.
    pub czt_range_outputs: usize,
    /// Doppler outputs of the chirp-Z Doppler stage.
    pub czt_doppler_outputs: usize,
    /// Window width of the untracked chirp-Z zoom, in native range bins.
    pub czt_span_bins: f64,
    /// KalmanCZT window width in predicted standard deviations.
    pub czt_sigma_factor: f64,
    /// Smallest KalmanCZT window width, m.
    pub czt_min_span: f64,
    /// Diagonal of the Kalman measurement covariance (m², (m/s)², rad²).
    pub sigma_meas: [f64; 3],
    /// Diagonal of the Kalman process covariance.
    pub sigma_pred: [f64; 3],
    pub aoa_grid_step_deg: f64,
    /// Bartlett scan covers ±this, degrees.
    pub aoa_sector_deg: f64,
    #[serde(flatten)]
    pub ofdm: OfdmConfig,
    #[serde(flatten)]
    pub scenario: ScenarioParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 100,
            master_seed: 2024,
            init_mode: InitMode::KnownTruth,
            estimators: Estimator::ALL.to_vec(),
            out_dir: PathBuf::from("results"),
            pad_factor: 16,
            czt_range_outputs: 2048,
            czt_doppler_outputs: 259,
            czt_span_bins: 128.0,
            czt_sigma_factor: 6.0,
            czt_min_span: 0.01,
            sigma_meas: DEFAULT_SIGMA_MEAS,
            sigma_pred: DEFAULT_SIGMA_PRED,
            aoa_grid_step_deg: 0.01,
            aoa_sector_deg: 60.0,
            ofdm: OfdmConfig::default(),
            scenario: ScenarioParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// 1000 trajectories of 92 frames.
    pub fn paper_scale() -> Self {
        Self {
            n_trajectories: 1000,
            ..Self::default()
        }
    }

    /// Parses a flat key/value file; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let known = Self::default().to_toml_table()?;
        if let Some(key) = table.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::Config(format!("unknown configuration key {key:?}")));
        }
        let cfg: Self = table.try_into().map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise configuration: {e}")))
    }

    fn to_toml_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::Config(format!("cannot serialise configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.scenario.validate()?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n_trajectories == 0 {
            return bad("n_trajectories must be at least 1");
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator must be enabled");
        }
        if self.pad_factor == 0 || !self.pad_factor.is_power_of_two() {
            return bad("pad_factor must be a power of two");
        }
        if self.czt_range_outputs < 2 || self.czt_doppler_outputs < 2 {
            return bad("chirp-Z output counts must be at least 2");
        }
        if !(self.czt_span_bins > 0.0 && self.czt_sigma_factor > 0.0 && self.czt_min_span > 0.0) {
            return bad("chirp-Z window parameters must be positive");
        }
        if !self
            .sigma_meas
            .iter()
            .chain(&self.sigma_pred)
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return bad("Kalman covariance diagonals must be finite and non-negative");
        }
        if !(self.aoa_grid_step_deg > 0.0 && (0.0..90.0).contains(&self.aoa_sector_deg)) {
            return bad("angle scan needs a positive step and a sector below 90 degrees");
        }
        if self.ofdm.n_antennas < 2 {
            return bad("n_antennas must be at least 2");
        }
        if i64::try_from(self.master_seed).is_err() {
            return bad("master_seed must fit in a signed 64-bit integer");
        }
        Ok(())
    }

    fn enabled(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    /// Enabled estimators in canonical order without duplicates.
    fn estimator_set(&self) -> Vec<Estimator> {
        Estimator::ALL.into_iter().filter(|e| self.enabled(*e)).collect()
    }
}

/// Overall errors of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub errors: ErrorSummary,
    pub flops: u64,
}

/// Errors of one estimator at one step index, over all trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub estimator: Estimator,
    pub errors: ErrorSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    pub config: ExperimentConfig,
    pub summary: Vec<SummaryRow>,
    /// Step-major, estimators in canonical order.
    pub curves: Vec<CurvePoint>,
    pub bounds: BoundsReport,
    pub version: &'static str,
}

impl ResultsBundle {
    pub fn summary_for(&self, e: Estimator) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.estimator == e)
    }

    /// Per-step curve of one estimator, in step order.
    pub fn curve(&self, e: Estimator) -> Vec<ErrorSummary> {
        self.curves
            .iter()
            .filter(|p| p.estimator == e)
            .map(|p| p.errors)
            .collect()
    }
}

/// Per-run state shared read-only by all trajectories.
struct Pipeline<'a> {
    cfg: &'a ExperimentConfig,
    estimators: Vec<Estimator>,
    scanner: BartlettScanner,
    kalman: KalmanConfig,
    kalman_czt: KalmanCztConfig,
}

/// Tracker states carried from frame to frame.
#[derive(Default)]
struct TrackerStates {
    kalman: Option<TrackState>,
    ebm: Option<EbmState>,
    czt_range: Option<f64>,
    kalman_czt: Option<TrackState>,
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let sector = cfg.aoa_sector_deg.to_radians();
        let scanner = BartlettScanner::new(
            cfg.ofdm.n_antennas,
            cfg.aoa_grid_step_deg.to_radians(),
            (-sector, sector),
        )?;
        let kalman = KalmanConfig::constant_velocity(cfg.ofdm.frame_interval(), cfg.sigma_meas, cfg.sigma_pred);
        let kalman_czt = KalmanCztConfig {
            n_range_out: cfg.czt_range_outputs,
            sigma_factor: cfg.czt_sigma_factor,
            min_span: cfg.czt_min_span,
            ..KalmanCztConfig::new(kalman, cfg.czt_doppler_outputs)
        };
        Ok(Self {
            cfg,
            estimators: cfg.estimator_set(),
            scanner,
            kalman,
            kalman_czt,
        })
    }

    fn has(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    fn initial_state(&self, truth: &TargetTruth, rdm: &Peak, aoa: f64) -> TrackState {
        match self.cfg.init_mode {
            InitMode::KnownTruth => TrackState::known(truth.range, truth.radial_velocity, truth.aoa),
            InitMode::RdmEstimate => {
                let cov = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(
                    self.cfg.ofdm.range_resolution(),
                    self.cfg.ofdm.velocity_resolution(),
                    0.5,
                ));
                TrackState::new(rdm.range, rdm.velocity, aoa, cov)
            }
        }
    }

    fn run_trajectory(&self, index: usize) -> Result<Vec<StepRecord>> {
        let ofdm = &self.cfg.ofdm;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.master_seed ^ index as u64);
        let traj = generate_trajectory(ofdm, &self.cfg.scenario, &mut rng)?;
        let r_res = ofdm.range_resolution();
        let interval = ofdm.frame_interval();
        let mut states = TrackerStates::default();
        let mut records = Vec::with_capacity(traj.steps());

        for (step, truth) in traj.truths().iter().enumerate() {
            let frame = generate_frame(ofdm, &mut rng);
            let y = synthesize_ratio_matrix(ofdm, truth, &frame, &mut rng)?;
            let snapshots = synthesize_array_snapshots(ofdm, truth, &mut rng)?;
            let aoa = self.scanner.estimate(&snapshots)?;

            let first = step == 0;
            let needs_fft = first
                || [Estimator::Rdm, Estimator::Kalman, Estimator::Ebm, Estimator::ZeroPad]
                    .iter()
                    .any(|e| self.has(*e));
            let needs_czt = !first && (self.has(Estimator::Czt) || self.has(Estimator::KalmanCZT));
            let fft_stage = needs_fft.then(|| DopplerSpectrum::fft(&y, ofdm)).transpose()?;
            let czt_stage = needs_czt
                .then(|| DopplerSpectrum::czt(&y, ofdm, self.cfg.czt_doppler_outputs))
                .transpose()?;
            let rdm = fft_stage.as_ref().map(|s| s.range_peak(1)).transpose()?;

            let mut estimates = BTreeMap::new();
            for &e in &self.estimators {
                let est = match e {
                    Estimator::Rdm => {
                        let p = rdm.as_ref().expect("native stage computed");
                        Estimate::new(p.range, p.velocity, aoa)
                    }
                    Estimator::ZeroPad => {
                        let p = fft_stage.as_ref().expect("native stage computed").range_peak(self.cfg.pad_factor)?;
                        Estimate::new(p.range, p.velocity, aoa)
                    }
                    Estimator::Kalman => {
                        let p = rdm.as_ref().expect("native stage computed");
                        let state = match states.kalman {
                            None => self.initial_state(truth, p, aoa),
                            Some(prev) => {
                                let pred = kalman_predict(&prev, &self.kalman);
                                let z = nalgebra::Vector3::new(p.range, p.velocity, aoa);
                                kalman_update(&pred, &z, &self.kalman.sigma_meas)?
                            }
                        };
                        states.kalman = Some(state);
                        Estimate::new(state.range(), state.velocity(), state.aoa())
                    }
                    Estimator::Ebm => {
                        let p = rdm.as_ref().expect("native stage computed");
                        let (state, est) = match states.ebm {
                            None => match self.cfg.init_mode {
                                InitMode::KnownTruth => {
                                    (EbmState::from_known(truth.range, p.range), Estimate::exact(truth))
                                }
                                InitMode::RdmEstimate => {
                                    let s = EbmState::from_rdm(p.range);
                                    (s, Estimate::new(s.r_ebm, p.velocity, aoa))
                                }
                            },
                            Some(prev) => {
                                let s = ebm_step(prev, p.range, p.velocity, interval, r_res);
                                (s, Estimate::new(s.r_ebm, p.velocity, aoa))
                            }
                        };
                        states.ebm = Some(state);
                        est
                    }
                    Estimator::Czt => {
                        let p = match states.czt_range {
                            None => *rdm.as_ref().expect("native stage computed"),
                            Some(prev) => {
                                let window = ZoomWindow::new(
                                    prev,
                                    self.cfg.czt_span_bins * r_res,
                                    self.cfg.czt_range_outputs,
                                    self.cfg.czt_doppler_outputs,
                                )?;
                                czt_stage.as_ref().expect("chirp-Z stage computed").zoom_peak(&window, ofdm)?
                            }
                        };
                        states.czt_range = Some(p.range);
                        Estimate::new(p.range, p.velocity, aoa)
                    }
                    Estimator::KalmanCZT => {
                        let state = match states.kalman_czt {
                            None => self.initial_state(truth, rdm.as_ref().expect("native stage computed"), aoa),
                            Some(prev) => {
                                let stage = czt_stage.as_ref().expect("chirp-Z stage computed");
                                kalman_czt_step_with(&prev, stage, aoa, &self.kalman_czt, ofdm)?.state
                            }
                        };
                        states.kalman_czt = Some(state);
                        Estimate::new(state.range(), state.velocity(), state.aoa())
                    }
                };
                estimates.insert(e, est);
            }
            records.push(StepRecord {
                step,
                truth: *truth,
                estimates,
            });
        }
        Ok(records)
    }
}

/// Runs every trajectory under `mode` and aggregates overall and per-step
/// errors. The result is identical for every `mode`.
pub fn run_experiment(cfg: &ExperimentConfig, mode: ExecMode) -> Result<ResultsBundle> {
    cfg.validate()?;
    let pipeline = Pipeline::new(cfg)?;
    let runs = exec::map_indexed(mode, cfg.n_trajectories, |i| pipeline.run_trajectory(i))?;

    let estimators = cfg.estimator_set();
    let steps = cfg.scenario.steps;
    let mut per_step = vec![BTreeMap::<Estimator, ErrorAccumulator>::new(); steps];
    for run in runs {
        for rec in run? {
            for (e, est) in &rec.estimates {
                per_step[rec.step].entry(*e).or_default().add(&rec.truth, est);
            }
        }
    }

    let mut curves = Vec::with_capacity(steps * estimators.len());
    let mut overall = BTreeMap::<Estimator, ErrorAccumulator>::new();
    for (step, accs) in per_step.iter().enumerate() {
        for &e in &estimators {
            let acc = accs.get(&e).ok_or_else(|| Error::Numerical(format!("no samples for {e}")))?;
            overall.entry(e).or_default().merge(acc);
            curves.push(CurvePoint {
                step,
                estimator: e,
                errors: acc.summary()?,
            });
        }
    }

    let flops = complexity_table(&cfg.ofdm, cfg.pad_factor);
    let summary = estimators
        .iter()
        .map(|&e| {
            Ok(SummaryRow {
                estimator: e,
                errors: overall[&e].summary()?,
                flops: flops.flops(e),
            })
        })
        .collect::<Result<_>>()?;

    Ok(ResultsBundle {
        config: cfg.clone(),
        summary,
        curves,
        bounds: bounds_report(&cfg.ofdm)?,
        version: env!("CARGO_PKG_VERSION"),
    })
}

/// Formats `v` with 6 significant digits, fixed or scientific like `%g`.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Paths written by [`emit_results`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultFiles {
    pub summary: PathBuf,
    pub curves: PathBuf,
    pub config: PathBuf,
}

pub const CURVES_HEADER: &str = "step,estimator,range_rmse,velocity_rmse,aoa_rmse,position_err";

/// Key/value summary, one `[[estimator]]` record per estimator. Angles in
/// rad, variances of the bounds in SI units squared.
pub fn summary_text(bundle: &ResultsBundle) -> String {
    let cfg = &bundle.config;
    let mut s = String::new();
    let _ = writeln!(s, "version = \"{}\"", bundle.version);
    let _ = writeln!(s, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(s, "n_trajectories = {}", cfg.n_trajectories);
    let _ = writeln!(s, "steps = {}", cfg.scenario.steps);
    let init = match cfg.init_mode {
        InitMode::KnownTruth => "known_truth",
        InitMode::RdmEstimate => "rdm_estimate",
    };
    let _ = writeln!(s, "init_mode = \"{init}\"");
    s.push_str("\n[bounds]\n");
    let b = &bundle.bounds;
    let _ = writeln!(s, "crb_aoa_avg = {}", format_sig6(b.crb_aoa_avg));
    let _ = writeln!(s, "range_bound = {}", format_sig6(b.range_bound));
    let _ = writeln!(s, "velocity_bound = {}", format_sig6(b.velocity_bound));
    for row in &bundle.summary {
        let e = &row.errors;
        s.push_str("\n[[estimator]]\n");
        let _ = writeln!(s, "name = \"{}\"", row.estimator);
        let _ = writeln!(s, "range_rmse = {}", format_sig6(e.range_rmse));
        let _ = writeln!(s, "velocity_rmse = {}", format_sig6(e.velocity_rmse));
        let _ = writeln!(s, "aoa_rmse = {}", format_sig6(e.aoa_rmse));
        let _ = writeln!(s, "position_err = {}", format_sig6(e.position_error));
        let _ = writeln!(s, "flops = {}", row.flops);
    }
    s
}

pub fn curves_csv(bundle: &ResultsBundle) -> Result<String> {
    if bundle.curves.is_empty() {
        return Err(Error::invalid("refusing to write an empty curve table"));
    }
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for p in &bundle.curves {
        let e = &p.errors;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.step,
            p.estimator,
            format_sig6(e.range_rmse),
            format_sig6(e.velocity_rmse),
            format_sig6(e.aoa_rmse),
            format_sig6(e.position_error)
        );
    }
    Ok(s)
}

/// Writes `summary.txt`, `curves.csv` and `config.toml` into `dir`.
pub fn emit_results(bundle: &ResultsBundle, dir: &Path) -> Result<ResultFiles> {
    let curves = curves_csv(bundle)?;
    let config = bundle.config.to_toml_string()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ResultFiles {
        summary: dir.join("summary.txt"),
        curves: dir.join("curves.csv"),
        config: dir.join("config.toml"),
    };
    for (path, text) in [
        (&files.summary, summary_text(bundle)),
        (&files.curves, curves),
        (&files.config, config),
    ] {
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(files)
}

/// Parses a curve table written by [`emit_results`].
pub fn parse_curves(text: &str) -> Result<Vec<CurvePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVES_HEADER) {
        return Err(Error::invalid("curve table header missing"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::invalid(format!("malformed curve row {line:?}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number {s:?} in row {line:?}")))
            };
            Ok(CurvePoint {
                step: f[0]
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad step in row {line:?}")))?,
                estimator: f[1].parse()?,
                errors: ErrorSummary {
                    range_rmse: num(f[2])?,
                    velocity_rmse: num(f[3])?,
                    aoa_rmse: num(f[4])?,
                    position_error: num(f[5])?,
                },
            })
        })
        .collect()
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curves(&text)
}
