//! Range-Doppler processing of a ratio matrix.
//!
//! All three map flavours share a two-stage structure: a transform along
//! each subcarrier row (slow time, giving Doppler) followed by a transform
//! along each Doppler column (frequency, giving delay). The first stage is
//! exposed as [`DopplerSpectrum`] so several range stages can reuse it.
//!
//! Range axes start at zero and are not shifted; velocity axes are centred
//! on zero Doppler.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::exec;
use crate::transforms::{plan, ChirpZ, CztParams};
use crate::waveform::{OfdmConfig, RatioMatrix};
use crate::{Error, Result};

/// Affine bin-to-physical map `offset + bin * spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub offset: f64,
    pub spacing: f64,
}

impl Axis {
    #[inline]
    pub fn at(&self, bin: usize) -> f64 {
        self.offset + bin as f64 * self.spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapSource {
    Native,
    ZeroPad(usize),
    Zoom(ZoomWindow),
}

/// Power over (range bin, Doppler bin), stored range-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    power: Vec<f64>,
    n_range: usize,
    n_doppler: usize,
    range_axis: Axis,
    velocity_axis: Axis,
    source: MapSource,
}

impl RangeDopplerMap {
    pub fn new(
        power: Vec<f64>,
        n_range: usize,
        n_doppler: usize,
        range_axis: Axis,
        velocity_axis: Axis,
        source: MapSource,
    ) -> Result<Self> {
        if power.len() != n_range * n_doppler || power.is_empty() {
            return Err(Error::invalid(format!(
                "map of {n_range}x{n_doppler} bins needs {} values, got {}",
                n_range * n_doppler,
                power.len()
            )));
        }
        if !(range_axis.spacing > 0.0) {
            return Err(Error::invalid("range spacing must be positive"));
        }
        if power.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("power must be non-negative"));
        }
        Ok(Self {
            power,
            n_range,
            n_doppler,
            range_axis,
            velocity_axis,
            source,
        })
    }

    pub fn n_range(&self) -> usize {
        self.n_range
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler
    }

    #[inline]
    pub fn power(&self, range_bin: usize, doppler_bin: usize) -> f64 {
        self.power[range_bin * self.n_doppler + doppler_bin]
    }

    pub fn power_data(&self) -> &[f64] {
        &self.power
    }

    pub fn range_axis(&self) -> Axis {
        self.range_axis
    }

    pub fn velocity_axis(&self) -> Axis {
        self.velocity_axis
    }

    pub fn source(&self) -> MapSource {
        self.source
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Observation window of the chirp-Z range zoom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomWindow {
    /// Window centre, m.
    pub center_range: f64,
    /// Window width r_CZT, m.
    pub span: f64,
    /// Range outputs N_CZT,1.
    pub n_range_out: usize,
    /// Doppler outputs N_CZT,2.
    pub n_doppler_out: usize,
}

impl ZoomWindow {
    pub fn new(center_range: f64, span: f64, n_range_out: usize, n_doppler_out: usize) -> Result<Self> {
        let w = Self {
            center_range,
            span,
            n_range_out,
            n_doppler_out,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.span >= 1e-12) || !self.span.is_finite() {
            return Err(Error::invalid(format!(
                "zoom span must be at least 1e-12 m, got {}",
                self.span
            )));
        }
        if !self.center_range.is_finite() {
            return Err(Error::invalid("zoom centre must be finite"));
        }
        if self.n_range_out < 2 || self.n_doppler_out < 2 {
            return Err(Error::invalid(format!(
                "zoom needs at least 2 outputs per axis, got {}x{}",
                self.n_range_out, self.n_doppler_out
            )));
        }
        Ok(())
    }

    /// First range of the window, clamped at zero.
    pub fn start(&self) -> f64 {
        (self.center_range - self.span / 2.0).max(0.0)
    }

    /// Output bin spacing d_CZT = r_CZT / N_CZT,1.
    pub fn spacing(&self) -> f64 {
        self.span / self.n_range_out as f64
    }

    /// Start and step of the range contour in cycles per subcarrier,
    /// i.e. `A_r = e^{j2π start}` and `W_r = e^{j2π step}`.
    pub fn contour(&self, cfg: &OfdmConfig) -> (f64, f64) {
        let full = cfg.n_subcarriers as f64 * cfg.range_resolution();
        (self.start() / full, self.spacing() / full)
    }
}

/// Location and height of the strongest map cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub range: f64,
    pub velocity: f64,
    pub power: f64,
    pub range_bin: usize,
    pub doppler_bin: usize,
}

/// Running argmax with the map tie-break: smaller range bin first, then
/// smaller Doppler bin.
#[derive(Debug, Clone, Copy)]
struct BestCell {
    power: f64,
    range_bin: usize,
    doppler_bin: usize,
}

impl BestCell {
    fn none() -> Self {
        Self {
            power: f64::NEG_INFINITY,
            range_bin: usize::MAX,
            doppler_bin: usize::MAX,
        }
    }

    #[inline]
    fn offer(&mut self, power: f64, range_bin: usize, doppler_bin: usize) {
        let better = power > self.power
            || (power == self.power
                && (range_bin, doppler_bin) < (self.range_bin, self.doppler_bin));
        if better {
            *self = Self {
                power,
                range_bin,
                doppler_bin,
            };
        }
    }

    fn into_peak(self, range_axis: Axis, velocity_axis: Axis) -> Result<Peak> {
        if !(self.power > 0.0) {
            return Err(Error::DetectionFailure(
                "map has no positive power cell".into(),
            ));
        }
        Ok(Peak {
            range: range_axis.at(self.range_bin),
            velocity: velocity_axis.at(self.doppler_bin),
            power: self.power,
            range_bin: self.range_bin,
            doppler_bin: self.doppler_bin,
        })
    }
}

/// Global maximum of the map in physical units.
pub fn detect_peak(map: &RangeDopplerMap) -> Result<Peak> {
    let mut best = BestCell::none();
    for r in 0..map.n_range {
        for d in 0..map.n_doppler {
            best.offer(map.power(r, d), r, d);
        }
    }
    best.into_peak(map.range_axis, map.velocity_axis)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopplerKind {
    /// Row FFT with the zero-Doppler bin moved to `floor(M/2)`.
    Fft,
    /// Row chirp-Z transform starting at -M/2 bins (`A_v = -1`).
    Czt,
}

/// Output of the slow-time stage, stored Doppler-major (one contiguous
/// subcarrier vector per Doppler bin).
#[derive(Debug, Clone)]
pub struct DopplerSpectrum {
    n_subcarriers: usize,
    n_doppler: usize,
    data: Vec<C64>,
    velocity_axis: Axis,
    range_resolution: f64,
    kind: DopplerKind,
}

/// Subcarrier rows handled per task in the slow-time stage.
const ROW_BLOCK: usize = 64;
/// Tile edge of the row-major to Doppler-major transpose.
const TILE: usize = 32;

/// Applies `f(row, out, scratch)` to every subcarrier row of `y`, producing
/// `n_out` values per row, and returns them Doppler-major.
fn slow_time_stage<F>(y: &RatioMatrix, n_out: usize, f: F) -> Vec<C64>
where
    F: Fn(&[C64], &mut [C64], &mut Vec<C64>) + Send + Sync,
{
    let n_sub = y.n_subcarriers();
    let mut rows = vec![C64::new(0.0, 0.0); n_sub * n_out];
    exec::for_each_chunk(&mut rows, ROW_BLOCK * n_out, |block, chunk| {
        let mut scratch = Vec::new();
        for (i, out) in chunk.chunks_mut(n_out).enumerate() {
            f(y.matrix().row(block * ROW_BLOCK + i), out, &mut scratch);
        }
    });
    let mut data = vec![C64::new(0.0, 0.0); n_sub * n_out];
    for n0 in (0..n_sub).step_by(TILE) {
        for d0 in (0..n_out).step_by(TILE) {
            for n in n0..(n0 + TILE).min(n_sub) {
                for d in d0..(d0 + TILE).min(n_out) {
                    data[d * n_sub + n] = rows[n * n_out + d];
                }
            }
        }
    }
    data
}

/// Reusable buffers of one column worker.
struct ColumnScratch {
    buf: Vec<C64>,
    fft: Vec<C64>,
}

impl DopplerSpectrum {
    /// Row-wise FFT over OFDM symbols, zero velocity centred.
    pub fn fft(y: &RatioMatrix, cfg: &OfdmConfig) -> Result<Self> {
        check_shape(y, cfg)?;
        let m = y.n_symbols();
        let half = m / 2;
        let fft = plan(m, false);
        let data = slow_time_stage(y, m, |row, out, scratch| {
            out.copy_from_slice(row);
            scratch.resize(fft.get_inplace_scratch_len(), C64::new(0.0, 0.0));
            fft.process_with_scratch(out, scratch);
            // fftshift
            out.rotate_left(m - half);
        });
        let v_res = cfg.velocity_resolution();
        Ok(Self {
            n_subcarriers: y.n_subcarriers(),
            n_doppler: m,
            data,
            velocity_axis: Axis {
                offset: -(half as f64) * v_res,
                spacing: v_res,
            },
            range_resolution: cfg.range_resolution(),
            kind: DopplerKind::Fft,
        })
    }

    /// Row-wise chirp-Z transform with `A_v = -1` and a `1/M` cycle step,
    /// producing `n_out` Doppler bins from -M/2.
    ///
    /// For `n_out == M` the contour is exactly the M-point DFT of the row
    /// modulated by `(-1)^n`, which is evaluated with an FFT.
    pub fn czt(y: &RatioMatrix, cfg: &OfdmConfig, n_out: usize) -> Result<Self> {
        check_shape(y, cfg)?;
        let m = y.n_symbols();
        let data = if n_out == m {
            let fft = plan(m, false);
            slow_time_stage(y, m, |row, out, scratch| {
                for (i, (o, x)) in out.iter_mut().zip(row).enumerate() {
                    *o = if i % 2 == 0 { *x } else { -x };
                }
                scratch.resize(fft.get_inplace_scratch_len(), C64::new(0.0, 0.0));
                fft.process_with_scratch(out, scratch);
            })
        } else {
            Self::czt_bluestein(y, n_out)?
        };
        let v_res = cfg.velocity_resolution();
        Ok(Self {
            n_subcarriers: y.n_subcarriers(),
            n_doppler: n_out,
            data,
            velocity_axis: Axis {
                offset: -(m as f64) / 2.0 * v_res,
                spacing: v_res,
            },
            range_resolution: cfg.range_resolution(),
            kind: DopplerKind::Czt,
        })
    }

    /// General slow-time chirp-Z stage via Bluestein, Doppler-major.
    fn czt_bluestein(y: &RatioMatrix, n_out: usize) -> Result<Vec<C64>> {
        let m = y.n_symbols();
        // contour e^{j2π(k - M/2)/M}: a = -1, w = e^{-j2π/M}
        let params = CztParams::new(
            C64::new(-1.0, 0.0),
            C64::from_polar(1.0, -2.0 * PI / m as f64),
            n_out,
        )?;
        let chirp = ChirpZ::new(m, params)?;
        Ok(slow_time_stage(y, n_out, |row, out, scratch| {
            chirp.transform_into(row, out, scratch)
        }))
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn kind(&self) -> DopplerKind {
        self.kind
    }

    pub fn velocity_axis(&self) -> Axis {
        self.velocity_axis
    }

    /// Subcarrier vector of one Doppler bin.
    pub fn column(&self, d: usize) -> &[C64] {
        &self.data[d * self.n_subcarriers..(d + 1) * self.n_subcarriers]
    }

    fn padded_axis(&self, pad: usize) -> Axis {
        Axis {
            offset: 0.0,
            spacing: self.range_resolution / pad as f64,
        }
    }

    /// Runs `f(doppler_bin, transformed)` over every Doppler column after a
    /// zero-padded inverse FFT of length `pad * N` (unscaled).
    fn padded_columns<R, F>(&self, pad: usize, f: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize, &[C64]) -> R + Send + Sync,
    {
        if pad == 0 || !pad.is_power_of_two() {
            return Err(Error::invalid(format!(
                "zero-padding factor must be a power of two >= 1, got {pad}"
            )));
        }
        let len = self.n_subcarriers * pad;
        let ifft = plan(len, true);
        let init = || ColumnScratch {
            buf: vec![C64::new(0.0, 0.0); len],
            fft: vec![C64::new(0.0, 0.0); ifft.get_inplace_scratch_len()],
        };
        Ok(exec::collect_indexed_with(self.n_doppler, init, |s, d| {
            s.buf[..self.n_subcarriers].copy_from_slice(self.column(d));
            s.buf[self.n_subcarriers..].fill(C64::new(0.0, 0.0));
            ifft.process_with_scratch(&mut s.buf, &mut s.fft);
            f(d, &s.buf)
        }))
    }

    /// Native (`pad = 1`) or zero-padded range-Doppler map.
    pub fn range_map(&self, pad: usize) -> Result<RangeDopplerMap> {
        let scale = 1.0 / (self.n_subcarriers * pad.max(1)) as f64;
        let cols = self.padded_columns(pad, |_, col| col.iter().map(|z| (z * scale).norm_sqr()).collect())?;
        let source = if pad == 1 {
            MapSource::Native
        } else {
            MapSource::ZeroPad(pad)
        };
        self.assemble(cols, self.padded_axis(pad), source)
    }

    /// Peak of [`DopplerSpectrum::range_map`] without materialising the map.
    pub fn range_peak(&self, pad: usize) -> Result<Peak> {
        let bests = self.padded_columns(pad, |d, col| {
            let mut best = BestCell::none();
            for (r, z) in col.iter().enumerate() {
                best.offer(z.norm_sqr(), r, d);
            }
            best
        })?;
        // the 1/len scale is a power of two, so scaling afterwards is exact
        let scale = 1.0 / (self.n_subcarriers * pad) as f64;
        let mut best = merge(bests);
        best.power *= scale * scale;
        best.into_peak(self.padded_axis(pad), self.velocity_axis)
    }

    fn zoom_columns(&self, window: &ZoomWindow, cfg: &OfdmConfig) -> Result<(ChirpZ, Axis)> {
        window.validate()?;
        let (start, step) = window.contour(cfg);
        // conj(CZT(conj(v); a, w)) = Σ v[n] e^{j2πn(start + step*l)}
        let params = CztParams::new(
            C64::from_polar(1.0, 2.0 * PI * start),
            C64::from_polar(1.0, -2.0 * PI * step),
            window.n_range_out,
        )?;
        let axis = Axis {
            offset: window.start(),
            spacing: window.spacing(),
        };
        Ok((ChirpZ::new(self.n_subcarriers, params)?, axis))
    }

    /// Runs `f(doppler_bin, zoomed)` over every Doppler column.
    fn zoomed_columns<R, F>(&self, chirp: &ChirpZ, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, &[C64]) -> R + Send + Sync,
    {
        let init = || ColumnScratch {
            buf: vec![C64::new(0.0, 0.0); self.n_subcarriers + chirp.m_out()],
            fft: Vec::with_capacity(chirp.scratch_len()),
        };
        exec::collect_indexed_with(self.n_doppler, init, |s, d| {
            let (conj, out) = s.buf.split_at_mut(self.n_subcarriers);
            for (c, z) in conj.iter_mut().zip(self.column(d)) {
                *c = z.conj();
            }
            chirp.transform_into(conj, out, &mut s.fft);
            // |conj(z)|^2 = |z|^2, so only the map needs the final conjugate
            f(d, out)
        })
    }

    /// Chirp-Z range zoom over `window` for every Doppler bin.
    pub fn zoom_map(&self, window: &ZoomWindow, cfg: &OfdmConfig) -> Result<RangeDopplerMap> {
        let (chirp, axis) = self.zoom_columns(window, cfg)?;
        let cols = self.zoomed_columns(&chirp, |_, col| col.iter().map(|z| z.norm_sqr()).collect());
        self.assemble(cols, axis, MapSource::Zoom(*window))
    }

    /// Peak of [`DopplerSpectrum::zoom_map`] without materialising the map.
    pub fn zoom_peak(&self, window: &ZoomWindow, cfg: &OfdmConfig) -> Result<Peak> {
        let (chirp, axis) = self.zoom_columns(window, cfg)?;
        let bests = self.zoomed_columns(&chirp, |d, col| {
            let mut best = BestCell::none();
            for (r, z) in col.iter().enumerate() {
                best.offer(z.norm_sqr(), r, d);
            }
            best
        });
        merge(bests).into_peak(axis, self.velocity_axis)
    }

    fn assemble(&self, cols: Vec<Vec<f64>>, range_axis: Axis, source: MapSource) -> Result<RangeDopplerMap> {
        let n_range = cols.first().map_or(0, Vec::len);
        let n_doppler = cols.len();
        let mut power = vec![0.0; n_range * n_doppler];
        for (d, col) in cols.iter().enumerate() {
            for (r, p) in col.iter().enumerate() {
                power[r * n_doppler + d] = *p;
            }
        }
        RangeDopplerMap::new(power, n_range, n_doppler, range_axis, self.velocity_axis, source)
    }
}

fn merge(bests: Vec<BestCell>) -> BestCell {
    let mut best = BestCell::none();
    for b in bests {
        best.offer(b.power, b.range_bin, b.doppler_bin);
    }
    best
}

fn check_shape(y: &RatioMatrix, cfg: &OfdmConfig) -> Result<()> {
    if y.n_subcarriers() != cfg.n_subcarriers || y.n_symbols() != cfg.n_symbols {
        return Err(Error::invalid(format!(
            "ratio matrix is {}x{}, configuration expects {}x{}",
            y.n_subcarriers(),
            y.n_symbols(),
            cfg.n_subcarriers,
            cfg.n_symbols
        )));
    }
    Ok(())
}

/// Native range-Doppler map: FFT along rows, IFFT along columns.
pub fn compute_rdm(y: &RatioMatrix, cfg: &OfdmConfig) -> Result<RangeDopplerMap> {
    DopplerSpectrum::fft(y, cfg)?.range_map(1)
}

/// Range-Doppler map with each column zero-padded to `pad_factor * N`
/// before the range IFFT.
pub fn compute_rdm_zeropad(y: &RatioMatrix, pad_factor: usize, cfg: &OfdmConfig) -> Result<RangeDopplerMap> {
    DopplerSpectrum::fft(y, cfg)?.range_map(pad_factor)
}

/// Chirp-Z zoom of the range axis over `window`, with the Doppler axis
/// evaluated by a chirp-Z transform starting at -M/2 bins.
pub fn compute_zoom(y: &RatioMatrix, window: &ZoomWindow, cfg: &OfdmConfig) -> Result<RangeDopplerMap> {
    window.validate()?;
    DopplerSpectrum::czt(y, cfg, window.n_doppler_out)?.zoom_map(window, cfg)
}
