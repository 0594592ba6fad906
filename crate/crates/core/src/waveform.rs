//! OFDM sensing observations for a single point target.
//!
//! The reflection is modelled directly in the time-frequency grid after
//! matched filtering: every subcarrier/symbol cell carries the delay and
//! Doppler phase ramps of the target plus receiver noise divided by the
//! transmitted QPSK symbol. The antenna array only enters through the
//! angle-of-arrival snapshots; the range-Doppler path sees a single
//! post-beamforming SNR.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::transforms::ComplexMatrix;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Frame geometry and receiver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmConfig {
    /// Carrier frequency f_c, Hz.
    pub carrier_hz: f64,
    /// Occupied bandwidth B, Hz.
    pub bandwidth_hz: f64,
    /// Subcarriers per symbol (N), a power of two.
    pub n_subcarriers: usize,
    /// OFDM symbols per sensing frame (M).
    pub n_symbols: usize,
    /// Cyclic prefix length in samples.
    pub n_cp: usize,
    /// ULA elements (K), half-wavelength spacing.
    pub n_antennas: usize,
    /// Snapshots per angle estimate (N_win).
    pub n_snapshots: usize,
    /// Instantaneous sensing SNR sigma_s^2 / sigma_ns^2, dB.
    pub snr_db: f64,
    /// Disable all receiver noise (oracle runs).
    pub noise: bool,
    /// Split the transmit beam towards a communication user, costing 3 dB
    /// of sensing SNR.
    pub comm_split: bool,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 5e9,
            bandwidth_hz: 25e6,
            n_subcarriers: 2048,
            n_symbols: 259,
            n_cp: 30,
            n_antennas: 16,
            n_snapshots: 256,
            snr_db: 0.0,
            noise: true,
            comm_split: false,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.n_subcarriers.is_power_of_two() || self.n_subcarriers < 2 {
            return bad(format!(
                "n_subcarriers must be a power of two >= 2, got {}",
                self.n_subcarriers
            ));
        }
        if self.n_symbols == 0 {
            return bad("n_symbols must be at least 1".into());
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad(format!("bandwidth_hz must be positive, got {}", self.bandwidth_hz));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return bad(format!("carrier_hz must be positive, got {}", self.carrier_hz));
        }
        if self.n_snapshots == 0 {
            return bad("n_snapshots must be at least 1".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        Ok(())
    }

    /// Subcarrier spacing Δf = B/N.
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth_hz / self.n_subcarriers as f64
    }

    /// Cyclic prefix duration T_cp.
    pub fn cp_duration(&self) -> f64 {
        self.n_cp as f64 / self.bandwidth_hz
    }

    /// Symbol duration including cyclic prefix, T0 = (N + N_cp)/B.
    pub fn symbol_duration(&self) -> f64 {
        (self.n_subcarriers + self.n_cp) as f64 / self.bandwidth_hz
    }

    /// Time between consecutive sensing frames, M·T0.
    pub fn frame_interval(&self) -> f64 {
        self.n_symbols as f64 * self.symbol_duration()
    }

    /// Native range bin c0/(2B).
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// Native velocity bin c0/(2 f_c M T0).
    pub fn velocity_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.carrier_hz * self.frame_interval())
    }

    /// Largest range whose echo stays inside the cyclic prefix.
    pub fn max_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.cp_duration() / 2.0
    }

    /// Received signal power sigma_s^2 (normalised).
    pub fn signal_power(&self) -> f64 {
        1.0
    }

    /// Noise power sigma_ns^2 implied by the SNR (and beam split penalty).
    pub fn noise_power(&self) -> f64 {
        let snr_db = if self.comm_split {
            self.snr_db - 10.0 * 2f64.log10()
        } else {
            self.snr_db
        };
        self.signal_power() * 10f64.powf(-snr_db / 10.0)
    }
}

/// True target parameters for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    /// Distance from the co-located array, m.
    pub range: f64,
    /// Radial velocity, m/s, positive towards the receiver.
    pub radial_velocity: f64,
    /// Angle of arrival from boresight, rad.
    pub aoa: f64,
}

impl TargetTruth {
    pub fn new(range: f64, radial_velocity: f64, aoa: f64) -> Self {
        Self {
            range,
            radial_velocity,
            aoa,
        }
    }

    /// Round-trip delay 2r/c0.
    pub fn delay(&self) -> f64 {
        2.0 * self.range / SPEED_OF_LIGHT
    }

    /// Doppler shift 2 v f_c / c0.
    pub fn doppler(&self, cfg: &OfdmConfig) -> f64 {
        2.0 * self.radial_velocity * cfg.carrier_hz / SPEED_OF_LIGHT
    }

    fn check(&self, cfg: &OfdmConfig) -> Result<()> {
        if !(self.range >= 0.0) || !self.radial_velocity.is_finite() {
            return Err(Error::invalid(format!("invalid target {self:?}")));
        }
        if !(self.aoa.abs() < PI / 2.0) {
            return Err(Error::invalid(format!(
                "angle of arrival {} rad outside (-pi/2, pi/2)",
                self.aoa
            )));
        }
        if self.delay() >= cfg.cp_duration() {
            return Err(Error::OutOfModel(format!(
                "echo delay {:.4e} s at range {:.3} m exceeds the cyclic prefix ({:.4e} s)",
                self.delay(),
                self.range,
                cfg.cp_duration()
            )));
        }
        Ok(())
    }
}

/// Element-wise ratio of received to transmitted symbols, N x M.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix(ComplexMatrix);

impl RatioMatrix {
    pub fn new(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.0.rows()
    }

    pub fn n_symbols(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

/// Per-antenna received samples, antenna x snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySnapshots {
    data: ComplexMatrix,
}

impl ArraySnapshots {
    pub fn new(data: ComplexMatrix) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::invalid("snapshots need at least one antenna and sample"));
        }
        Ok(Self { data })
    }

    pub fn n_antennas(&self) -> usize {
        self.data.rows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &ComplexMatrix {
        &self.data
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut data = self.data.clone();
        data.data_mut().iter_mut().for_each(|z| *z *= s);
        Self { data }
    }
}

const QPSK: [C64; 4] = [
    C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    C64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    C64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

fn qpsk_symbols<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut bits = rng.next_u64();
        for _ in 0..32.min(n - out.len()) {
            out.push(QPSK[(bits & 3) as usize]);
            bits >>= 2;
        }
    }
    out
}

fn complex_noise<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Random QPSK frame, one symbol per subcarrier (row) and OFDM symbol
/// (column).
pub fn generate_frame<R: Rng + ?Sized>(cfg: &OfdmConfig, rng: &mut R) -> ComplexMatrix {
    let n = cfg.n_subcarriers * cfg.n_symbols;
    ComplexMatrix::new(cfg.n_subcarriers, cfg.n_symbols, qpsk_symbols(rng, n))
        .expect("QPSK frame has the configured shape")
}

/// Noiseless ratio matrix `sigma_s * exp(-j2π nΔf τ) * exp(+j2π f_D m T0)`.
pub fn ideal_ratio_matrix(cfg: &OfdmConfig, truth: &TargetTruth) -> Result<RatioMatrix> {
    truth.check(cfg)?;
    let amp = cfg.signal_power().sqrt();
    let range_step = -2.0 * PI * cfg.subcarrier_spacing() * truth.delay();
    let doppler_step = 2.0 * PI * truth.doppler(cfg) * cfg.symbol_duration();
    let range_phase: Vec<C64> = (0..cfg.n_subcarriers)
        .map(|n| C64::from_polar(amp, range_step * n as f64))
        .collect();
    let doppler_phase: Vec<C64> = (0..cfg.n_symbols)
        .map(|m| C64::from_polar(1.0, doppler_step * m as f64))
        .collect();
    Ok(RatioMatrix(ComplexMatrix::from_fn(
        cfg.n_subcarriers,
        cfg.n_symbols,
        |n, m| range_phase[n] * doppler_phase[m],
    )))
}

/// Received-over-transmitted ratio for `frame`, including receiver noise
/// `q / X` when noise is enabled.
pub fn synthesize_ratio_matrix<R: Rng + ?Sized>(
    cfg: &OfdmConfig,
    truth: &TargetTruth,
    frame: &ComplexMatrix,
    rng: &mut R,
) -> Result<RatioMatrix> {
    if frame.rows() != cfg.n_subcarriers || frame.cols() != cfg.n_symbols {
        return Err(Error::invalid(format!(
            "frame is {}x{}, configuration expects {}x{}",
            frame.rows(),
            frame.cols(),
            cfg.n_subcarriers,
            cfg.n_symbols
        )));
    }
    let mut y = ideal_ratio_matrix(cfg, truth)?.into_matrix();
    if cfg.noise {
        let var = cfg.noise_power();
        for (cell, x) in y.data_mut().iter_mut().zip(frame.data()) {
            *cell += complex_noise(rng, var) / x;
        }
    }
    Ok(RatioMatrix(y))
}

/// Steering phase of element `a` for angle `aoa`, half-wavelength spacing.
#[inline]
pub fn steering(a: usize, aoa: f64) -> C64 {
    C64::from_polar(1.0, PI * a as f64 * aoa.sin())
}

/// `n_snapshots` samples per antenna of random unit-power symbols arriving
/// from `truth.aoa`.
pub fn synthesize_array_snapshots<R: Rng + ?Sized>(
    cfg: &OfdmConfig,
    truth: &TargetTruth,
    rng: &mut R,
) -> Result<ArraySnapshots> {
    let k = cfg.n_antennas;
    if k < 2 {
        return Err(Error::invalid(format!(
            "angle estimation needs at least 2 antennas, got {k}"
        )));
    }
    if !(truth.aoa.abs() < PI / 2.0) {
        return Err(Error::invalid(format!("angle {} rad not in (-pi/2, pi/2)", truth.aoa)));
    }
    let t = cfg.n_snapshots;
    let amp = cfg.signal_power().sqrt();
    let symbols = qpsk_symbols(rng, t);
    let steer: Vec<C64> = (0..k).map(|a| steering(a, truth.aoa)).collect();
    let var = cfg.noise_power();
    let noise = cfg.noise;
    let mut data = ComplexMatrix::zeros(k, t);
    for (a, st) in steer.iter().enumerate() {
        for (i, s) in symbols.iter().enumerate() {
            let mut v = amp * s * st;
            if noise {
                v += complex_noise(rng, var);
            }
            data.set(a, i, v);
        }
    }
    ArraySnapshots::new(data)
}

/// Bartlett angle scan with precomputed steering phases.
///
/// The beam power `a(φ)^H C a(φ)` of the sample covariance `C` is evaluated
/// through its diagonal sums, `P(u) = s_0 + 2 Re Σ_d s_d e^{jπ d u}` with
/// `u = sin φ`, which costs `K` terms per grid angle.
#[derive(Debug, Clone)]
pub struct BartlettScanner {
    n_antennas: usize,
    angles: Vec<f64>,
    // row-major: angle x lag(1..K)
    phases: Vec<C64>,
}

impl BartlettScanner {
    pub fn new(n_antennas: usize, grid_step: f64, sector: (f64, f64)) -> Result<Self> {
        if n_antennas < 2 {
            return Err(Error::invalid("Bartlett scan needs at least 2 antennas"));
        }
        let (lo, hi) = sector;
        if !(grid_step > 0.0) || !(hi >= lo) || !(lo > -PI / 2.0) || !(hi < PI / 2.0) {
            return Err(Error::invalid(format!(
                "invalid scan grid: step {grid_step}, sector [{lo}, {hi}]"
            )));
        }
        let count = ((hi - lo) / grid_step + 1e-9).floor() as usize + 1;
        let angles: Vec<f64> = (0..count).map(|i| lo + i as f64 * grid_step).collect();
        let lags = n_antennas - 1;
        let mut phases = Vec::with_capacity(count * lags);
        for &phi in &angles {
            let u = phi.sin();
            phases.extend((1..n_antennas).map(|d| C64::from_polar(1.0, PI * d as f64 * u)));
        }
        Ok(Self {
            n_antennas,
            angles,
            phases,
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Beam power over the grid.
    pub fn spectrum(&self, snapshots: &ArraySnapshots) -> Result<Vec<f64>> {
        let k = self.n_antennas;
        if snapshots.n_antennas() != k {
            return Err(Error::invalid(format!(
                "scanner built for {k} antennas, snapshots have {}",
                snapshots.n_antennas()
            )));
        }
        let x = snapshots.data();
        let t = snapshots.n_snapshots();
        // lag sums s_d = Σ_a C[a, a+d], C = (1/T) Σ_t x_t x_t^H
        let mut lag = vec![C64::new(0.0, 0.0); k];
        for a in 0..k {
            let ra = x.row(a);
            for (d, slot) in lag.iter_mut().enumerate().take(k - a) {
                let rb = x.row(a + d);
                let c: C64 = ra.iter().zip(rb).map(|(p, q)| p * q.conj()).sum();
                *slot += c;
            }
        }
        lag.iter_mut().for_each(|z| *z /= t as f64);
        let total = lag[0].re;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::EstimationFailure(
                "sample covariance is degenerate (zero or non-finite power)".into(),
            ));
        }
        let lags = k - 1;
        Ok(self
            .phases
            .chunks_exact(lags)
            .map(|ph| {
                let cross: f64 = lag[1..]
                    .iter()
                    .zip(ph)
                    .map(|(s, e)| (s * e).re)
                    .sum();
                total + 2.0 * cross
            })
            .collect())
    }

    /// Grid angle with maximum beam power; ties go to the smaller angle.
    pub fn estimate(&self, snapshots: &ArraySnapshots) -> Result<f64> {
        let power = self.spectrum(snapshots)?;
        let mut best = 0;
        for (i, &p) in power.iter().enumerate() {
            if p > power[best] {
                best = i;
            }
        }
        Ok(self.angles[best])
    }
}

/// Bartlett angle-of-arrival estimate over `sector` with spacing `grid_step`.
pub fn bartlett_aoa(snapshots: &ArraySnapshots, grid_step: f64, sector: (f64, f64)) -> Result<f64> {
    BartlettScanner::new(snapshots.n_antennas(), grid_step, sector)?.estimate(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    fn small_cfg() -> OfdmConfig {
        OfdmConfig {
            n_subcarriers: 64,
            n_symbols: 8,
            ..OfdmConfig::default()
        }
    }

    #[test]
    fn default_geometry() {
        let cfg = OfdmConfig::default();
        assert!((cfg.frame_interval() - 0.021_528_08).abs() < 1e-9);
        assert!((cfg.range_resolution() - 5.995_849_16).abs() < 1e-6);
        assert!((cfg.symbol_duration() - 83.12e-6).abs() < 1e-12);
        cfg.validate().unwrap();
        let bad = OfdmConfig {
            n_subcarriers: 2000,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn frame_is_unit_modulus_and_zero_mean() {
        let cfg = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = generate_frame(&cfg, &mut rng);
        assert_eq!((x.rows(), x.cols()), (2048, 259));
        assert!(x.data().iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let mean: C64 = x.data().iter().sum::<C64>() / x.data().len() as f64;
        assert!(mean.norm() < 0.01);
        let again = generate_frame(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(x, again);
    }

    #[test]
    fn zero_delay_zero_doppler_is_constant() {
        let cfg = OfdmConfig {
            noise: false,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = generate_frame(&cfg, &mut rng);
        let y = synthesize_ratio_matrix(&cfg, &TargetTruth::new(0.0, 0.0, 0.0), &x, &mut rng)
            .unwrap();
        assert!(y
            .matrix()
            .data()
            .iter()
            .all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn noiseless_ratio_matrix_is_rank_one() {
        let cfg = OfdmConfig {
            noise: false,
            ..small_cfg()
        };
        let truth = TargetTruth::new(73.2, -11.0, 0.3);
        let y = ideal_ratio_matrix(&cfg, &truth).unwrap();
        let m = y.matrix();
        let dm = nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c));
        let sv = dm.singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        assert!(top * top / m.energy() > 1.0 - 1e-9);
    }

    #[test]
    fn noise_variance_matches_snr() {
        let cfg = OfdmConfig::default();
        let truth = TargetTruth::new(50.0, 3.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = generate_frame(&cfg, &mut rng);
        let y = synthesize_ratio_matrix(&cfg, &truth, &x, &mut rng).unwrap();
        let clean = ideal_ratio_matrix(&cfg, &truth).unwrap();
        let n = y.matrix().data().len() as f64;
        let var: f64 = y
            .matrix()
            .data()
            .iter()
            .zip(clean.matrix().data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn cyclic_prefix_violation_is_out_of_model() {
        let cfg = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = generate_frame(&cfg, &mut rng);
        let far = TargetTruth::new(cfg.max_range() + 0.01, 0.0, 0.0);
        assert!(matches!(
            synthesize_ratio_matrix(&cfg, &far, &x, &mut rng),
            Err(Error::OutOfModel(_))
        ));
        let wrong = ComplexMatrix::zeros(4, 4);
        let near = TargetTruth::new(10.0, 0.0, 0.0);
        assert!(synthesize_ratio_matrix(&cfg, &near, &wrong, &mut rng).is_err());
    }

    #[test]
    fn broadside_snapshots_are_identical_across_antennas() {
        let cfg = OfdmConfig {
            noise: false,
            n_snapshots: 8,
            ..OfdmConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = synthesize_array_snapshots(&cfg, &TargetTruth::new(10.0, 0.0, 0.0), &mut rng)
            .unwrap();
        for t in 0..8 {
            for a in 1..16 {
                assert!((s.data().get(a, t) - s.data().get(0, t)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn thirty_degree_steering_is_quarter_turn_per_element() {
        let cfg = OfdmConfig {
            noise: false,
            n_snapshots: 4,
            ..OfdmConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = synthesize_array_snapshots(&cfg, &TargetTruth::new(10.0, 0.0, deg(30.0)), &mut rng)
            .unwrap();
        for t in 0..4 {
            for a in 0..16 {
                let ratio = s.data().get(a, t) / s.data().get(0, t);
                let want = C64::from_polar(1.0, PI * a as f64 / 2.0);
                assert!((ratio - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn snapshots_need_two_antennas() {
        let cfg = OfdmConfig {
            n_antennas: 1,
            ..OfdmConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            synthesize_array_snapshots(&cfg, &TargetTruth::new(10.0, 0.0, 0.0), &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn bartlett_noiseless_is_grid_exact() {
        let cfg = OfdmConfig {
            noise: false,
            ..OfdmConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let step = deg(0.01);
        let sector = (deg(-60.0), deg(60.0));
        for (truth_deg, tol_deg) in [(0.0, 0.005), (25.0, 0.005)] {
            let s = synthesize_array_snapshots(
                &cfg,
                &TargetTruth::new(10.0, 0.0, deg(truth_deg)),
                &mut rng,
            )
            .unwrap();
            let est = bartlett_aoa(&s, step, sector).unwrap();
            assert!((est.to_degrees() - truth_deg).abs() <= tol_deg + 1e-9, "{est}");
        }
    }

    #[test]
    fn bartlett_noisy_ten_degrees() {
        let cfg = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = synthesize_array_snapshots(&cfg, &TargetTruth::new(10.0, 0.0, deg(10.0)), &mut rng)
            .unwrap();
        let est = bartlett_aoa(&s, deg(0.01), (deg(-60.0), deg(60.0))).unwrap();
        assert!((est.to_degrees() - 10.0).abs() < 0.5);
    }

    #[test]
    fn bartlett_spectrum_matches_quadratic_form() {
        let cfg = OfdmConfig {
            n_antennas: 5,
            n_snapshots: 7,
            ..OfdmConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = synthesize_array_snapshots(&cfg, &TargetTruth::new(1.0, 0.0, 0.4), &mut rng)
            .unwrap();
        let scan = BartlettScanner::new(5, 0.1, (-1.0, 1.0)).unwrap();
        let fast = scan.spectrum(&s).unwrap();
        let x = s.data();
        for (phi, got) in scan.angles().iter().zip(&fast) {
            let steer: Vec<C64> = (0..5).map(|a| steering(a, *phi)).collect();
            let mut p = 0.0;
            for t in 0..7 {
                let b: C64 = (0..5).map(|a| steer[a].conj() * x.get(a, t)).sum();
                p += b.norm_sqr();
            }
            p /= 7.0;
            assert!((p - got).abs() < 1e-9 * p.max(1.0));
        }
    }

    #[test]
    fn bartlett_rejects_zero_snapshots() {
        let s = ArraySnapshots::new(ComplexMatrix::zeros(4, 3)).unwrap();
        assert!(matches!(
            bartlett_aoa(&s, 0.01, (-1.0, 1.0)),
            Err(Error::EstimationFailure(_))
        ));
    }

    #[test]
    fn bartlett_prefers_smaller_angle_on_ties() {
        // steering power is symmetric in u for a single real-valued snapshot pattern
        let data = ComplexMatrix::from_fn(2, 1, |a, _| C64::new(if a == 0 { 1.0 } else { 0.0 }, 0.0));
        let s = ArraySnapshots::new(data).unwrap();
        let est = bartlett_aoa(&s, 0.1, (-0.5, 0.5)).unwrap();
        assert!((est + 0.5).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = small_cfg();
        let truth = TargetTruth::new(40.0, 5.0, 0.2);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = generate_frame(&cfg, &mut rng);
            let y = synthesize_ratio_matrix(&cfg, &truth, &x, &mut rng).unwrap();
            let s = synthesize_array_snapshots(&cfg, &truth, &mut rng).unwrap();
            (y, s)
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9).0, run(10).0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn bartlett_scale_invariant(seed in any::<u64>(), mag in 0.01f64..100.0, ph in -3.0f64..3.0) {
            let cfg = OfdmConfig { n_snapshots: 32, ..OfdmConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = TargetTruth::new(10.0, 0.0, (seed % 100) as f64 / 100.0 - 0.5);
            let s = synthesize_array_snapshots(&cfg, &truth, &mut rng).unwrap();
            let scan = BartlettScanner::new(16, deg(0.05), (deg(-60.0), deg(60.0))).unwrap();
            let a = scan.estimate(&s).unwrap();
            let b = scan.estimate(&s.scaled(C64::from_polar(mag, ph))).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
