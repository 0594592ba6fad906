//! Frame-to-frame state estimation of (range, radial velocity, angle).
//!
//! The motion model is constant radial velocity, `r' = r - MT0 * v`, with an
//! identity observation model: every measurement is a direct
//! (range, velocity, angle) triple.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::sensing::{DopplerSpectrum, Peak, ZoomWindow};
use crate::waveform::{OfdmConfig, RatioMatrix};
use crate::{Error, Result};

/// Kalman state and covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    /// (range m, radial velocity m/s, angle rad)
    pub x: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl TrackState {
    pub fn new(range: f64, velocity: f64, aoa: f64, cov: Matrix3<f64>) -> Self {
        Self {
            x: Vector3::new(range, velocity, aoa),
            cov,
        }
    }

    /// Exactly known initial state (zero covariance).
    pub fn known(range: f64, velocity: f64, aoa: f64) -> Self {
        Self::new(range, velocity, aoa, Matrix3::zeros())
    }

    pub fn range(&self) -> f64 {
        self.x[0]
    }

    pub fn velocity(&self) -> f64 {
        self.x[1]
    }

    pub fn aoa(&self) -> f64 {
        self.x[2]
    }

    /// Symmetric with no eigenvalue below `-tol * max(1, |cov|)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let scale = self.cov.norm().max(1.0);
        if (self.cov - self.cov.transpose()).norm() > tol * scale {
            return false;
        }
        SymmetricEigen::new(self.cov)
            .eigenvalues
            .iter()
            .all(|&l| l >= -tol * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    pub transition: Matrix3<f64>,
    pub sigma_meas: Matrix3<f64>,
    pub sigma_pred: Matrix3<f64>,
    /// Frame interval M·T0, s.
    pub frame_interval: f64,
}

/// Measurement noise used with RDM-quality measurements.
pub const DEFAULT_SIGMA_MEAS: [f64; 3] = [4.4, 0.01, 0.01];
/// Process noise per frame.
pub const DEFAULT_SIGMA_PRED: [f64; 3] = [1.3e-5, 0.8, 0.4];

impl KalmanConfig {
    pub fn constant_velocity(frame_interval: f64, sigma_meas: [f64; 3], sigma_pred: [f64; 3]) -> Self {
        let mut transition = Matrix3::identity();
        transition[(0, 1)] = -frame_interval;
        Self {
            transition,
            sigma_meas: Matrix3::from_diagonal(&Vector3::from(sigma_meas)),
            sigma_pred: Matrix3::from_diagonal(&Vector3::from(sigma_pred)),
            frame_interval,
        }
    }

    /// Tuned noise levels for the 5 GHz / 25 MHz / 2048 x 259 system.
    pub fn tuned(frame_interval: f64) -> Self {
        Self::constant_velocity(frame_interval, DEFAULT_SIGMA_MEAS, DEFAULT_SIGMA_PRED)
    }
}

/// `x' = F x`, `Σ' = F Σ Fᵀ + Σ_pred`.
pub fn kalman_predict(state: &TrackState, cfg: &KalmanConfig) -> TrackState {
    let f = &cfg.transition;
    TrackState {
        x: f * state.x,
        cov: f * state.cov * f.transpose() + cfg.sigma_pred,
    }
}

/// Identity-observation update with gain `Σ (Σ + Σ_meas)^-1`.
pub fn kalman_update(pred: &TrackState, z: &Vector3<f64>, sigma_meas: &Matrix3<f64>) -> Result<TrackState> {
    let innovation_cov = pred.cov + sigma_meas;
    let inv = innovation_cov.try_inverse().ok_or_else(|| {
        Error::Numerical("innovation covariance is singular".into())
    })?;
    let gain = pred.cov * inv;
    let x = pred.x + gain * (z - pred.x);
    let cov = (Matrix3::identity() - gain) * pred.cov;
    let cov = (cov + cov.transpose()) * 0.5;
    if !x.iter().all(|v| v.is_finite()) || !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("Kalman update produced non-finite values".into()));
    }
    Ok(TrackState { x, cov })
}

/// Event-based range tracker: averages the two RDM ranges around a bin
/// change, otherwise dead-reckons with the measured velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbmState {
    pub r_ebm: f64,
    pub prev_rdm_range: f64,
}

impl EbmState {
    /// Starts from the first RDM range.
    pub fn from_rdm(rdm_range: f64) -> Self {
        Self {
            r_ebm: rdm_range.max(0.0),
            prev_rdm_range: rdm_range,
        }
    }

    /// Starts from a known range; `rdm_range` is the first RDM estimate.
    pub fn from_known(range: f64, rdm_range: f64) -> Self {
        Self {
            r_ebm: range.max(0.0),
            prev_rdm_range: rdm_range,
        }
    }
}

/// One EBM update. RDM ranges are compared with a tolerance of `1e-6` of
/// the native range bin `r_res`.
pub fn ebm_step(state: EbmState, rdm_range: f64, rdm_velocity: f64, frame_interval: f64, r_res: f64) -> EbmState {
    let changed = (rdm_range - state.prev_rdm_range).abs() > r_res * 1e-6;
    let r_ebm = if changed {
        0.5 * (rdm_range + state.prev_rdm_range)
    } else {
        state.r_ebm - frame_interval * rdm_velocity
    };
    EbmState {
        r_ebm: r_ebm.max(0.0),
        prev_rdm_range: rdm_range,
    }
}

/// Settings of the Kalman-steered chirp-Z zoom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanCztConfig {
    pub kalman: KalmanConfig,
    /// N_CZT,1
    pub n_range_out: usize,
    /// N_CZT,2
    pub n_doppler_out: usize,
    /// Window width in predicted standard deviations.
    pub sigma_factor: f64,
    /// Smallest window width, m.
    pub min_span: f64,
}

impl KalmanCztConfig {
    pub fn new(kalman: KalmanConfig, n_doppler_out: usize) -> Self {
        Self {
            kalman,
            n_range_out: 2048,
            n_doppler_out,
            sigma_factor: 6.0,
            min_span: 0.01,
        }
    }

    /// Window width for a predicted range variance.
    pub fn span(&self, predicted_range_var: f64) -> f64 {
        (self.sigma_factor * predicted_range_var.max(0.0).sqrt()).max(self.min_span)
    }
}

/// Everything one KalmanCZT iteration produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanCztStep {
    pub predicted: TrackState,
    pub window: ZoomWindow,
    pub peak: Peak,
    pub measurement: Vector3<f64>,
    /// d_CZT^2 / 12
    pub range_meas_var: f64,
    pub state: TrackState,
}

/// Window centred on the predicted range, `span = max(6σ, 1 cm)`.
pub fn kalman_czt_window(predicted: &TrackState, cfg: &KalmanCztConfig) -> Result<ZoomWindow> {
    ZoomWindow::new(
        predicted.range(),
        cfg.span(predicted.cov[(0, 0)]),
        cfg.n_range_out,
        cfg.n_doppler_out,
    )
}

/// One KalmanCZT iteration on a precomputed chirp-Z Doppler stage.
pub fn kalman_czt_step_with(
    state: &TrackState,
    doppler: &DopplerSpectrum,
    aoa_meas: f64,
    cfg: &KalmanCztConfig,
    ofdm: &OfdmConfig,
) -> Result<KalmanCztStep> {
    let predicted = kalman_predict(state, &cfg.kalman);
    let window = kalman_czt_window(&predicted, cfg)?;
    let peak = doppler.zoom_peak(&window, ofdm)?;
    let measurement = Vector3::new(peak.range, peak.velocity, aoa_meas);
    let d = window.spacing();
    let range_meas_var = d * d / 12.0;
    let mut sigma_meas = cfg.kalman.sigma_meas;
    sigma_meas[(0, 0)] = range_meas_var;
    let state = kalman_update(&predicted, &measurement, &sigma_meas)?;
    Ok(KalmanCztStep {
        predicted,
        window,
        peak,
        measurement,
        range_meas_var,
        state,
    })
}

/// Predict, zoom around the prediction, detect, update.
pub fn kalman_czt_step(
    state: &TrackState,
    y: &RatioMatrix,
    aoa_meas: f64,
    cfg: &KalmanCztConfig,
    ofdm: &OfdmConfig,
) -> Result<KalmanCztStep> {
    let doppler = DopplerSpectrum::czt(y, ofdm, cfg.n_doppler_out)?;
    kalman_czt_step_with(state, &doppler, aoa_meas, cfg, ofdm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{ideal_ratio_matrix, TargetTruth};
    use proptest::prelude::*;

    const MT0: f64 = 0.021_528_08;

    #[test]
    fn predict_from_zero() {
        let cfg = KalmanConfig::tuned(MT0);
        let p = kalman_predict(&TrackState::known(0.0, 0.0, 0.0), &cfg);
        assert_eq!(p.x, Vector3::zeros());
        assert_eq!(p.cov, cfg.sigma_pred);
    }

    #[test]
    fn predict_moves_range_against_velocity() {
        let cfg = KalmanConfig::tuned(MT0);
        let p = kalman_predict(&TrackState::known(100.0, 2.0, 0.1), &cfg);
        assert!((p.range() - 99.956_943_84).abs() < 1e-9);
        assert_eq!(p.velocity(), 2.0);
        assert_eq!(p.aoa(), 0.1);
    }

    #[test]
    fn predict_covariance_shape() {
        let cfg = KalmanConfig::constant_velocity(MT0, [1.0; 3], [0.0; 3]);
        let p = kalman_predict(&TrackState::new(0.0, 0.0, 0.0, Matrix3::identity()), &cfg);
        assert!((p.cov[(0, 0)] - (1.0 + MT0 * MT0)).abs() < 1e-15);
        assert!((p.cov[(0, 1)] + MT0).abs() < 1e-15);
        assert!((p.cov[(1, 0)] + MT0).abs() < 1e-15);
        assert_eq!(p.cov[(1, 1)], 1.0);
    }

    #[test]
    fn perfect_measurement_limit() {
        let pred = TrackState::new(10.0, 1.0, 0.2, Matrix3::from_diagonal_element(2.0));
        let z = Vector3::new(12.0, -1.0, 0.3);
        let out = kalman_update(&pred, &z, &Matrix3::from_diagonal_element(1e-15)).unwrap();
        assert!((out.x - z).amax() < 1e-6);
    }

    #[test]
    fn perfect_prediction_limit() {
        let pred = TrackState::known(10.0, 1.0, 0.2);
        let z = Vector3::new(12.0, -1.0, 0.3);
        let out = kalman_update(&pred, &z, &Matrix3::identity()).unwrap();
        assert_eq!(out.x, pred.x);
    }

    #[test]
    fn equal_variances_average() {
        let eps = 1e-12;
        let cov = Matrix3::from_diagonal(&Vector3::new(1.0 + eps, eps, eps));
        let pred = TrackState::new(10.0, 0.0, 0.0, cov);
        let z = Vector3::new(14.0, 0.0, 0.0);
        let out = kalman_update(&pred, &z, &Matrix3::identity()).unwrap();
        assert!((out.range() - 12.0).abs() < 1e-6);
    }

    #[test]
    fn singular_innovation_is_reported() {
        let pred = TrackState::known(0.0, 0.0, 0.0);
        let r = kalman_update(&pred, &Vector3::zeros(), &Matrix3::zeros());
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn ebm_examples() {
        let r_res = 5.995_849_16;
        let s = EbmState::from_rdm(5.995_85);
        assert_eq!(s.r_ebm, 5.995_85);
        let s = ebm_step(s, 11.9917, 0.0, MT0, r_res);
        assert!((s.r_ebm - 8.993_775).abs() < 1e-9);
        let s = EbmState {
            r_ebm: 100.0,
            prev_rdm_range: 95.93,
        };
        let s = ebm_step(s, 95.93, 2.0, MT0, r_res);
        assert!((s.r_ebm - 99.956_943_84).abs() < 1e-9);
        assert_eq!(s.prev_rdm_range, 95.93);
    }

    #[test]
    fn ebm_tolerates_rounding_in_bin_ranges() {
        let r_res = 5.995_849_16;
        let s = EbmState {
            r_ebm: 50.0,
            prev_rdm_range: 17.0 * r_res,
        };
        let s = ebm_step(s, 17.0 * r_res * (1.0 + 1e-15), 1.0, MT0, r_res);
        assert!((s.r_ebm - (50.0 - MT0)).abs() < 1e-12);
    }

    #[test]
    fn czt_span_floor_and_scaling() {
        let cfg = KalmanCztConfig::new(KalmanConfig::tuned(MT0), 259);
        assert_eq!(cfg.span(0.0), 0.01);
        assert!((cfg.span(0.25) - 3.0).abs() < 1e-12);
        let d = cfg.span(0.25) / 2048.0;
        assert!((d * d / 12.0 - 1.788_7e-7).abs() < 1e-10);
    }

    #[test]
    fn noiseless_kalman_czt_tracks_within_zoom_bin() {
        let ofdm = OfdmConfig {
            n_symbols: 16,
            noise: false,
            ..OfdmConfig::default()
        };
        let mt0 = ofdm.frame_interval();
        let cfg = KalmanCztConfig::new(KalmanConfig::tuned(mt0), 16);
        let v = 3.0 * ofdm.velocity_resolution();
        let mut state = TrackState::known(80.0, v, 0.1);
        for k in 1..=10 {
            let truth = TargetTruth::new(80.0 - k as f64 * mt0 * v, v, 0.1);
            let y = ideal_ratio_matrix(&ofdm, &truth).unwrap();
            let step = kalman_czt_step(&state, &y, 0.1, &cfg, &ofdm).unwrap();
            let err = (step.peak.range - truth.range).abs();
            assert!(err <= step.window.spacing() / 2.0 + 1e-9, "step {k}: {err}");
            assert!((step.state.range() - truth.range).abs() <= step.window.spacing() / 2.0 + 1e-9);
            state = step.state;
        }
    }

    #[test]
    fn huge_range_noise_keeps_prediction() {
        let cfg = KalmanConfig::tuned(MT0);
        let pred = kalman_predict(&TrackState::known(80.0, 4.0, 0.1), &cfg);
        let mut sm = cfg.sigma_meas;
        sm[(0, 0)] = 1e12;
        let z = Vector3::new(80.5, 4.3, 0.1);
        let out = kalman_update(&pred, &z, &sm).unwrap();
        assert!(((out.range() - pred.range()) / pred.range()).abs() < 1e-6);
    }

    fn random_psd(vals: &[f64]) -> Matrix3<f64> {
        let a = Matrix3::from_iterator(vals.iter().cloned());
        a * a.transpose()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn covariance_stays_psd_and_contracts(
            init in proptest::collection::vec(-3.0f64..3.0, 9),
            meas in proptest::collection::vec(-2.0f64..2.0, 9),
            zs in proptest::collection::vec(-50.0f64..50.0, 30),
        ) {
            let cfg = KalmanConfig::tuned(MT0);
            let sm = random_psd(&meas) + Matrix3::from_diagonal_element(1e-3);
            let mut st = TrackState::new(10.0, 1.0, 0.0, random_psd(&init));
            for z in zs.chunks(3) {
                let pred = kalman_predict(&st, &cfg);
                prop_assert!(pred.is_psd(1e-9));
                st = kalman_update(&pred, &Vector3::new(z[0], z[1], z[2]), &sm).unwrap();
                prop_assert!(st.is_psd(1e-9));
                for i in 0..3 {
                    prop_assert!(st.cov[(i, i)] <= pred.cov[(i, i)] * (1.0 + 1e-12) + 1e-12);
                }
            }
        }

        #[test]
        fn ebm_drift_is_linear_in_velocity_error(v_true in 2.0f64..20.0, dv in -0.7f64..0.7) {
            // quantised ranges that do not change bin: error grows by |dv|*MT0 per step
            let r_res: f64 = 5.995_849_16;
            let r0: f64 = 60.0;
            let bin = (r0 / r_res).round() * r_res;
            let mut s = EbmState::from_known(r0, bin);
            for k in 1..=20 {
                s = ebm_step(s, bin, v_true + dv, MT0, r_res);
                let truth = r0 - k as f64 * MT0 * v_true;
                let err = (s.r_ebm - truth).abs();
                prop_assert!(err <= k as f64 * dv.abs() * MT0 + 1e-9);
            }
        }
    }
}
