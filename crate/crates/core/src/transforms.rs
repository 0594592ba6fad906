//! Complex transform primitives.
//!
//! Plain DFTs are delegated to `rustfft` through a per-thread planner cache;
//! the chirp-Z transform is built on top of them with Bluestein's
//! convolution and radix-2 sized buffers.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }
}

/// Parameters of a chirp-Z transform evaluating
/// `out[k] = sum_n x[n] * a^(-n) * w^(n*k)` for `k < m_out`.
///
/// The contour points are `z_k = a * w^(-k)`; `a = 1, w = exp(-j*2*pi/N)`
/// with `m_out = N` is the forward DFT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CztParams {
    a: C64,
    w: C64,
    m_out: usize,
}

impl CztParams {
    pub fn new(a: C64, w: C64, m_out: usize) -> Result<Self> {
        if m_out == 0 {
            return Err(Error::invalid("chirp-Z output length must be at least 1"));
        }
        for (name, v) in [("a", a), ("w", w)] {
            if !(v.norm() > 0.0) || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::invalid(format!(
                    "chirp-Z parameter {name} must be finite and nonzero, got {v}"
                )));
            }
        }
        Ok(Self { a, w, m_out })
    }

    /// Parameters reproducing the forward DFT of length `n`.
    pub fn dft(n: usize) -> Result<Self> {
        Self::new(
            C64::new(1.0, 0.0),
            C64::from_polar(1.0, -2.0 * std::f64::consts::PI / n as f64),
            n,
        )
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn w(&self) -> C64 {
        self.w
    }

    pub fn m_out(&self) -> usize {
        self.m_out
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Forward (`e^{-j2πnk/N}`) or inverse (conjugate kernel, scaled by `1/N`)
/// DFT of `x`.
pub fn fft_1d(x: &[C64], inverse: bool) -> Result<Vec<C64>> {
    if x.is_empty() {
        return Err(Error::invalid("cannot transform an empty vector"));
    }
    let mut buf = x.to_vec();
    fft_in_place(&mut buf, inverse);
    Ok(buf)
}

/// In-place DFT with the same conventions as [`fft_1d`].
pub fn fft_in_place(buf: &mut [C64], inverse: bool) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), inverse).process(buf);
    if inverse {
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }
}

/// `z^t` for real `t` on the principal branch.
fn real_power(z: C64, t: f64) -> C64 {
    let (r, theta) = z.to_polar();
    C64::from_polar(r.powf(t), theta * t)
}

/// A chirp-Z transform prepared for a fixed input length.
///
/// Holds the pre/post chirps and the transformed convolution kernel so the
/// same zoom can be applied to many rows or columns.
pub struct ChirpZ {
    n_in: usize,
    m_out: usize,
    pre: Vec<C64>,
    post: Vec<C64>,
    kernel: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fft_scratch: usize,
}

impl std::fmt::Debug for ChirpZ {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChirpZ")
            .field("n_in", &self.n_in)
            .field("m_out", &self.m_out)
            .field("fft_len", &self.fft_len())
            .finish()
    }
}

impl ChirpZ {
    pub fn new(n_in: usize, params: CztParams) -> Result<Self> {
        if n_in == 0 {
            return Err(Error::invalid("chirp-Z input must be non-empty"));
        }
        let m_out = params.m_out;
        let len = (n_in + m_out - 1).next_power_of_two();
        let a_inv = params.a.inv();
        let w = params.w;

        let pre = (0..n_in)
            .map(|n| {
                let nf = n as f64;
                real_power(a_inv, nf) * real_power(w, nf * nf / 2.0)
            })
            .collect();
        let post = (0..m_out)
            .map(|k| {
                let kf = k as f64;
                real_power(w, kf * kf / 2.0)
            })
            .collect();

        // circular layout of h[m] = w^(-m^2/2), m in -(n_in-1)..m_out
        let mut kernel = vec![C64::new(0.0, 0.0); len];
        for (m, slot) in kernel.iter_mut().enumerate().take(m_out) {
            let mf = m as f64;
            *slot = real_power(w, -mf * mf / 2.0);
        }
        for m in 1..n_in {
            let mf = m as f64;
            kernel[len - m] = real_power(w, -mf * mf / 2.0);
        }
        let fwd = plan(len, false);
        let inv = plan(len, true);
        fwd.process(&mut kernel);
        let scale = 1.0 / len as f64;
        kernel.iter_mut().for_each(|z| *z *= scale);

        let fft_scratch = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ok(Self {
            n_in,
            m_out,
            pre,
            post,
            kernel,
            fwd,
            inv,
            fft_scratch,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn m_out(&self) -> usize {
        self.m_out
    }

    pub fn fft_len(&self) -> usize {
        self.kernel.len()
    }

    /// Length of the scratch buffer used by [`ChirpZ::transform_into`].
    pub fn scratch_len(&self) -> usize {
        self.kernel.len() + self.fft_scratch
    }

    /// Transforms `x` (length `n_in`) into `out` (length `m_out`). `scratch`
    /// is resized to [`ChirpZ::scratch_len`] and can be reused across calls.
    pub fn transform_into(&self, x: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        assert_eq!(x.len(), self.n_in, "chirp-Z input length mismatch");
        assert_eq!(out.len(), self.m_out, "chirp-Z output length mismatch");
        let zero = C64::new(0.0, 0.0);
        scratch.resize(self.scratch_len(), zero);
        let (buf, fft_scratch) = scratch.split_at_mut(self.kernel.len());
        for (b, (x, p)) in buf.iter_mut().zip(x.iter().zip(&self.pre)) {
            *b = x * p;
        }
        buf[self.n_in..].fill(zero);
        self.fwd.process_with_scratch(buf, fft_scratch);
        buf.iter_mut().zip(&self.kernel).for_each(|(s, k)| *s *= k);
        self.inv.process_with_scratch(buf, fft_scratch);
        for ((o, s), p) in out.iter_mut().zip(buf.iter()).zip(&self.post) {
            *o = s * p;
        }
    }

    pub fn transform(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.m_out];
        let mut scratch = Vec::new();
        self.transform_into(x, &mut out, &mut scratch);
        out
    }
}

/// One-shot chirp-Z transform of `x`.
pub fn czt(x: &[C64], params: CztParams) -> Result<Vec<C64>> {
    if x.is_empty() {
        return Err(Error::invalid("chirp-Z input must be non-empty"));
    }
    Ok(ChirpZ::new(x.len(), params)?.transform(x))
}

/// Analytic FLOP count of a length-`n` FFT, `5 n log2 n`.
pub fn flops_fft(n: usize) -> u64 {
    let n = n.max(1) as f64;
    (5.0 * n * n.log2()).round() as u64
}

/// Analytic FLOP count of a chirp-Z transform with `n` inputs and outputs,
/// `75 (2n log2 2n)`; the factor covers the chirp exponentiations on top
/// of the underlying FFTs.
pub fn flops_czt(n: usize) -> u64 {
    let two_n = 2.0 * n.max(1) as f64;
    (75.0 * two_n * two_n.log2()).round() as u64
}
