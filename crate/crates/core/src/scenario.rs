//! Ground truth, theoretical bounds, error metrics and the FLOP model.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::transforms::{flops_czt, flops_fft};
use crate::waveform::{OfdmConfig, TargetTruth};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Distribution of the random constant-velocity trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    /// Points per trajectory.
    pub steps: usize,
    pub initial_range_min: f64,
    pub initial_range_max: f64,
    /// Initial angle is uniform in ±this, degrees.
    pub initial_aoa_max_deg: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Every point must stay within [range_min, range_max] and the cyclic
    /// prefix limit of the waveform.
    pub range_min: f64,
    pub range_max: f64,
    /// Every point must stay within ±this, degrees.
    pub aoa_max_deg: f64,
    pub max_attempts: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            steps: 92,
            initial_range_min: 30.0,
            initial_range_max: 150.0,
            initial_aoa_max_deg: 50.0,
            speed_min: 5.0,
            speed_max: 25.0,
            range_min: 5.0,
            range_max: 300.0,
            aoa_max_deg: 60.0,
            max_attempts: 1000,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.steps >= 1
            && self.max_attempts >= 1
            && 0.0 < self.range_min
            && self.initial_range_min <= self.initial_range_max
            && self.range_min <= self.range_max
            && 0.0 <= self.speed_min
            && self.speed_min <= self.speed_max
            && (0.0..90.0).contains(&self.initial_aoa_max_deg)
            && (0.0..90.0).contains(&self.aoa_max_deg);
        let finite = [
            self.initial_range_min,
            self.initial_range_max,
            self.speed_min,
            self.speed_max,
            self.range_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid scenario parameters {self:?}")))
        }
    }
}

/// Sampled 2-D constant-velocity motion. The array sits at the origin with
/// boresight along +y; angles are measured from boresight towards +x.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frame_interval: f64,
    positions: Vec<[f64; 2]>,
    truths: Vec<TargetTruth>,
}

/// Polar (range, angle) to Cartesian (x, y) with y as boresight.
pub fn to_cartesian(range: f64, aoa: f64) -> [f64; 2] {
    [range * aoa.sin(), range * aoa.cos()]
}

impl Trajectory {
    /// Samples `start + k T velocity` for `k = 0..steps`.
    ///
    /// The radial velocity at step k is the mean closing speed over the
    /// following frame, `(r_k - r_{k+1}) / T`, so that dead-reckoning one
    /// frame ahead with it lands exactly on the next range.
    pub fn from_motion(start: [f64; 2], velocity: [f64; 2], steps: usize, frame_interval: f64) -> Result<Self> {
        if steps == 0 || !(frame_interval > 0.0) {
            return Err(Error::invalid(format!(
                "trajectory needs steps >= 1 and a positive frame interval, got {steps} and {frame_interval}"
            )));
        }
        let at = |k: usize| {
            let t = k as f64 * frame_interval;
            [start[0] + t * velocity[0], start[1] + t * velocity[1]]
        };
        let range_at = |p: [f64; 2]| p[0].hypot(p[1]);
        let positions: Vec<_> = (0..steps).map(at).collect();
        let truths = positions
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let r = range_at(p);
                let v_rad = (r - range_at(at(k + 1))) / frame_interval;
                TargetTruth::new(r, v_rad, p[0].atan2(p[1]))
            })
            .collect();
        Ok(Self {
            frame_interval,
            positions,
            truths,
        })
    }

    pub fn steps(&self) -> usize {
        self.truths.len()
    }

    pub fn frame_interval(&self) -> f64 {
        self.frame_interval
    }

    pub fn truths(&self) -> &[TargetTruth] {
        &self.truths
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    fn within(&self, cfg: &OfdmConfig, params: &ScenarioParams) -> bool {
        let r_hi = params.range_max.min(cfg.max_range());
        let aoa_hi = params.aoa_max_deg.to_radians();
        self.truths
            .iter()
            .all(|t| t.range >= params.range_min && t.range < r_hi && t.aoa.abs() <= aoa_hi)
    }
}

/// Draws a random trajectory, resampling until every point is inside the
/// allowed region.
pub fn generate_trajectory<R: Rng + ?Sized>(cfg: &OfdmConfig, params: &ScenarioParams, rng: &mut R) -> Result<Trajectory> {
    params.validate()?;
    let t = cfg.frame_interval();
    let aoa0 = params.initial_aoa_max_deg.to_radians();
    for _ in 0..params.max_attempts {
        let r0 = rng.random_range(params.initial_range_min..=params.initial_range_max);
        let phi0 = rng.random_range(-aoa0..=aoa0);
        let speed = rng.random_range(params.speed_min..=params.speed_max);
        let heading = rng.random_range(-PI..PI);
        let traj = Trajectory::from_motion(
            to_cartesian(r0, phi0),
            [speed * heading.cos(), speed * heading.sin()],
            params.steps,
            t,
        )?;
        if traj.within(cfg, params) {
            return Ok(traj);
        }
    }
    Err(Error::ScenarioInfeasible(format!(
        "no admissible trajectory after {} attempts",
        params.max_attempts
    )))
}

/// Theoretical error floors, all as variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    /// rad²
    pub crb_aoa_avg: f64,
    /// m²
    pub range_bound: f64,
    /// (m/s)²
    pub velocity_bound: f64,
}

/// Angle CRB of a K-element half-wavelength ULA averaged over the full
/// angle range, for `n_win` snapshots.
pub fn crb_aoa_avg(signal_power: f64, noise_power: f64, k: usize, n_win: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid(format!("angle bound needs at least 2 antennas, got {k}")));
    }
    if !(signal_power > 0.0 && noise_power > 0.0 && n_win >= 1) {
        return Err(Error::invalid("angle bound needs positive powers and snapshots"));
    }
    let k = k as f64;
    let num = 12.0 * noise_power * (noise_power + k * signal_power);
    let den = PI * PI * n_win as f64 * signal_power * signal_power * k * k * (k * k - 1.0);
    Ok(num / den)
}

/// Variance of uniform quantisation on `n_fft` range and `m_fft` velocity
/// bins.
pub fn quantization_bounds(cfg: &OfdmConfig, n_fft: usize, m_fft: usize) -> Result<(f64, f64)> {
    if n_fft == 0 || m_fft == 0 {
        return Err(Error::invalid("transform sizes must be positive"));
    }
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    let range_step = 2.0 * n_fft as f64 * cfg.subcarrier_spacing();
    let velocity_step = 2.0 * cfg.carrier_hz * m_fft as f64 * cfg.symbol_duration();
    Ok((
        c2 / (12.0 * range_step * range_step),
        c2 / (12.0 * velocity_step * velocity_step),
    ))
}

/// Bounds at the native transform sizes.
pub fn bounds_report(cfg: &OfdmConfig) -> Result<BoundsReport> {
    let (range_bound, velocity_bound) = quantization_bounds(cfg, cfg.n_subcarriers, cfg.n_symbols)?;
    let crb = if cfg.noise {
        crb_aoa_avg(cfg.signal_power(), cfg.noise_power(), cfg.n_antennas, cfg.n_snapshots)?
    } else {
        0.0
    };
    Ok(BoundsReport {
        crb_aoa_avg: crb,
        range_bound,
        velocity_bound,
    })
}

/// The six compared estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "RDM")]
    Rdm,
    Kalman,
    #[serde(rename = "EBM")]
    Ebm,
    #[serde(rename = "ZP")]
    ZeroPad,
    #[serde(rename = "CZT")]
    Czt,
    KalmanCZT,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::Rdm,
        Estimator::Kalman,
        Estimator::Ebm,
        Estimator::ZeroPad,
        Estimator::Czt,
        Estimator::KalmanCZT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Rdm => "RDM",
            Estimator::Kalman => "Kalman",
            Estimator::Ebm => "EBM",
            Estimator::ZeroPad => "ZP",
            Estimator::Czt => "CZT",
            Estimator::KalmanCZT => "KalmanCZT",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Estimator::ALL.iter().map(|e| e.name()).collect();
                Error::invalid(format!("unknown estimator {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// One (range, velocity, angle) estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub range: f64,
    pub velocity: f64,
    pub aoa: f64,
}

impl Estimate {
    pub fn new(range: f64, velocity: f64, aoa: f64) -> Self {
        Self { range, velocity, aoa }
    }

    pub fn exact(truth: &TargetTruth) -> Self {
        Self::new(truth.range, truth.radial_velocity, truth.aoa)
    }
}

/// Truth and every enabled estimator's output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub truth: TargetTruth,
    pub estimates: BTreeMap<Estimator, Estimate>,
}

/// Root-mean-square errors and mean Euclidean position error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorSummary {
    pub range_rmse: f64,
    pub velocity_rmse: f64,
    pub aoa_rmse: f64,
    pub position_error: f64,
}

/// Running sums behind an [`ErrorSummary`]; merging is associative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorAccumulator {
    pub count: usize,
    pub range_sq: f64,
    pub velocity_sq: f64,
    pub aoa_sq: f64,
    pub position: f64,
}

impl ErrorAccumulator {
    pub fn add(&mut self, truth: &TargetTruth, est: &Estimate) {
        let dr = est.range - truth.range;
        let dv = est.velocity - truth.radial_velocity;
        let da = est.aoa - truth.aoa;
        let p = to_cartesian(est.range, est.aoa);
        let q = to_cartesian(truth.range, truth.aoa);
        self.count += 1;
        self.range_sq += dr * dr;
        self.velocity_sq += dv * dv;
        self.aoa_sq += da * da;
        self.position += (p[0] - q[0]).hypot(p[1] - q[1]);
    }

    pub fn merge(&mut self, other: &ErrorAccumulator) {
        self.count += other.count;
        self.range_sq += other.range_sq;
        self.velocity_sq += other.velocity_sq;
        self.aoa_sq += other.aoa_sq;
        self.position += other.position;
    }

    pub fn summary(&self) -> Result<ErrorSummary> {
        if self.count == 0 {
            return Err(Error::invalid("no samples to summarise"));
        }
        let n = self.count as f64;
        Ok(ErrorSummary {
            range_rmse: (self.range_sq / n).sqrt(),
            velocity_rmse: (self.velocity_sq / n).sqrt(),
            aoa_rmse: (self.aoa_sq / n).sqrt(),
            position_error: self.position / n,
        })
    }
}

/// Per-estimator errors over all records.
pub fn metrics(records: &[StepRecord]) -> Result<BTreeMap<Estimator, ErrorSummary>> {
    if records.is_empty() {
        return Err(Error::invalid("metrics need at least one record"));
    }
    let mut acc: BTreeMap<Estimator, ErrorAccumulator> = BTreeMap::new();
    for rec in records {
        for (&e, est) in &rec.estimates {
            acc.entry(e).or_default().add(&rec.truth, est);
        }
    }
    acc.into_iter().map(|(e, a)| Ok((e, a.summary()?))).collect()
}

/// Kalman filter cost per step, FLOPs.
pub const KALMAN_FLOPS: u64 = 50;
/// Extra cost of the event-based measurement over a plain RDM, FLOPs.
pub const EBM_FLOPS: u64 = 3;

/// FLOPs per frame for each estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityTable {
    pub rdm: u64,
    pub kalman: u64,
    pub ebm: u64,
    pub zero_pad: u64,
    pub czt: u64,
    pub kalman_czt: u64,
}

impl ComplexityTable {
    pub fn flops(&self, e: Estimator) -> u64 {
        match e {
            Estimator::Rdm => self.rdm,
            Estimator::Kalman => self.kalman,
            Estimator::Ebm => self.ebm,
            Estimator::ZeroPad => self.zero_pad,
            Estimator::Czt => self.czt,
            Estimator::KalmanCZT => self.kalman_czt,
        }
    }
}

/// Evaluates the per-frame cost model, with `5 n log2 n` per FFT and
/// `75 (2n) log2(2n)` per chirp-Z transform.
pub fn complexity_table(cfg: &OfdmConfig, pad_factor: usize) -> ComplexityTable {
    let n = cfg.n_subcarriers;
    let m = cfg.n_symbols;
    let c0 = flops_fft(n * m);
    let doppler_stage = n as u64 * flops_fft(m);
    let zero_pad = m as u64 * flops_fft(n * pad_factor) + doppler_stage;
    let czt = m as u64 * flops_czt(n) + doppler_stage;
    ComplexityTable {
        rdm: c0,
        kalman: c0 + KALMAN_FLOPS,
        ebm: c0 + EBM_FLOPS,
        zero_pad,
        czt,
        kalman_czt: czt + KALMAN_FLOPS,
    }
}
