//! Sequential 1D transforms.
//!
//! All transforms are unnormalized in both directions, so a forward transform
//! followed by an inverse one scales the signal by `N`. Lengths must be powers
//! of two except for [`dft_oracle`], which is the O(N^2) reference sum and
//! accepts any non-empty input.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_pow2, FftError, Result};

/// Element type of every spectrum.
pub type ComplexSample = Complex64;

/// Base case used when the caller does not pick one.
pub const DEFAULT_BASE_CASE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Exponent `-2πi/N`.
    Forward,
    /// Exponent `+2πi/N`.
    Inverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

#[inline]
fn root(j: usize, n: usize, dir: Direction) -> ComplexSample {
    let angle = dir.sign() * 2.0 * PI * (j as f64) / (n as f64);
    let (s, c) = angle.sin_cos();
    ComplexSample::new(c, s)
}

fn roots_of_unity(n: usize, dir: Direction) -> Vec<ComplexSample> {
    (0..n).map(|j| root(j, n, dir)).collect()
}

/// `out[k] = sum_n input[n] * roots[(k * n) mod N]`.
///
/// Shared by the oracle and the kernel base case, so a kernel whose base case
/// covers the whole input reproduces the oracle bit for bit.
fn direct_sum(input: &[ComplexSample], roots: &[ComplexSample], out: &mut [ComplexSample]) {
    let n = input.len();
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = ComplexSample::new(0.0, 0.0);
        let mut idx = 0usize;
        for x in input {
            acc += x * roots[idx];
            idx += k;
            if idx >= n {
                idx -= n;
            }
        }
        *slot = acc;
    }
}

/// Brute-force discrete Fourier transform of any non-empty signal.
pub fn dft_oracle(x: &[ComplexSample], dir: Direction) -> Result<Vec<ComplexSample>> {
    if x.is_empty() {
        return Err(FftError::invalid("dft_oracle: empty input"));
    }
    let roots = roots_of_unity(x.len(), dir);
    let mut out = vec![ComplexSample::default(); x.len()];
    direct_sum(x, &roots, &mut out);
    Ok(out)
}

/// Roots of unity `e^{∓2πi j/N}` for `j < N/2`.
pub fn twiddle_table(n: usize, dir: Direction) -> Result<Vec<ComplexSample>> {
    require_pow2("twiddle table length", n)?;
    Ok((0..n / 2).map(|j| root(j, n, dir)).collect())
}

fn bit_reverse(mut v: usize, bits: u32) -> usize {
    if bits == 0 {
        return 0;
    }
    v = v.reverse_bits();
    v >> (usize::BITS - bits)
}

/// A radix-2 decimation-in-time transform of one fixed length.
///
/// Twiddles and the input permutation are computed once and reused for every
/// row handed to [`Fft1d::process`]. Sub-transforms of `base_case` samples are
/// evaluated with the direct sum; butterflies combine them above that size.
#[derive(Debug, Clone)]
pub struct Fft1d {
    len: usize,
    direction: Direction,
    base_case: usize,
    twiddles: Vec<ComplexSample>,
    base_roots: Vec<ComplexSample>,
    gather: Vec<usize>,
}

impl Fft1d {
    pub fn new(len: usize, direction: Direction, base_case: usize) -> Result<Self> {
        require_pow2("transform length", len)?;
        require_pow2("base case", base_case)?;
        if base_case > len {
            return Err(FftError::invalid(format!(
                "base case {base_case} exceeds transform length {len}"
            )));
        }
        let blocks = len / base_case;
        let block_bits = blocks.trailing_zeros();
        let gather = (0..len)
            .map(|p| bit_reverse(p / base_case, block_bits) + (p % base_case) * blocks)
            .collect();
        Ok(Fft1d {
            len,
            direction,
            base_case,
            twiddles: twiddle_table(len, direction)?,
            base_roots: roots_of_unity(base_case, direction),
            gather,
        })
    }

    /// Same as [`Fft1d::new`] but clamps the base case to the length.
    pub fn clamped(len: usize, direction: Direction, base_case: usize) -> Result<Self> {
        Self::new(len, direction, base_case.min(len.max(1)))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn base_case(&self) -> usize {
        self.base_case
    }

    /// Transforms `data` in place. `scratch` must hold at least `len` samples.
    pub fn process(&self, data: &mut [ComplexSample], scratch: &mut [ComplexSample]) {
        let n = self.len;
        assert_eq!(data.len(), n, "row length does not match the transform");
        let scratch = &mut scratch[..n];
        for (dst, &src) in scratch.iter_mut().zip(&self.gather) {
            *dst = data[src];
        }
        for (input, out) in scratch
            .chunks_exact(self.base_case)
            .zip(data.chunks_exact_mut(self.base_case))
        {
            direct_sum(input, &self.base_roots, out);
        }

        let mut size = self.base_case * 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for group in data.chunks_exact_mut(size) {
                let (lo, hi) = group.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *b * self.twiddles[j * stride];
                    *b = *a - t;
                    *a += t;
                }
            }
            size *= 2;
        }
    }

    /// Forward transform of a real row, keeping the `N/2 + 1` non-redundant
    /// coefficients. `buf` and `scratch` must each hold `len` samples.
    pub fn r2c_into(
        &self,
        input: &[f64],
        out: &mut [ComplexSample],
        buf: &mut [ComplexSample],
        scratch: &mut [ComplexSample],
    ) {
        debug_assert_eq!(self.direction, Direction::Forward);
        let n = self.len;
        assert_eq!(input.len(), n);
        assert_eq!(out.len(), n / 2 + 1);
        let buf = &mut buf[..n];
        for (b, &x) in buf.iter_mut().zip(input) {
            *b = ComplexSample::new(x, 0.0);
        }
        self.process(buf, scratch);
        out.copy_from_slice(&buf[..n / 2 + 1]);
        // DC and Nyquist bins of a real signal are real.
        out[0].im = 0.0;
        out[n / 2].im = 0.0;
    }
}

/// Complex-to-complex FFT of a power-of-two signal.
pub fn fft_c2c(
    x: &[ComplexSample],
    dir: Direction,
    base_case: usize,
) -> Result<Vec<ComplexSample>> {
    let plan = Fft1d::new(x.len(), dir, base_case)?;
    let mut data = x.to_vec();
    let mut scratch = vec![ComplexSample::default(); x.len()];
    plan.process(&mut data, &mut scratch);
    Ok(data)
}

/// Real-to-complex forward FFT; returns `N/2 + 1` coefficients.
pub fn fft_r2c(x: &[f64]) -> Result<Vec<ComplexSample>> {
    fft_r2c_with_base(x, DEFAULT_BASE_CASE)
}

pub fn fft_r2c_with_base(x: &[f64], base_case: usize) -> Result<Vec<ComplexSample>> {
    require_pow2("transform length", x.len())?;
    if x.len() < 2 {
        return Err(FftError::invalid("fft_r2c needs at least two samples"));
    }
    let plan = Fft1d::clamped(x.len(), Direction::Forward, base_case)?;
    let n = x.len();
    let mut out = vec![ComplexSample::default(); n / 2 + 1];
    let mut buf = vec![ComplexSample::default(); n];
    let mut scratch = vec![ComplexSample::default(); n];
    plan.r2c_into(x, &mut out, &mut buf, &mut scratch);
    Ok(out)
}
