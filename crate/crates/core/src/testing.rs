//! Seeded inputs, the brute-force 2D transform and error metrics used by
//! the test suites and the benchmark verification gate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::{dft_oracle, ComplexSample, Direction};
use crate::layout::{ComplexGrid, RealGrid};

pub fn random_real_grid(rows: usize, cols: usize, seed: u64) -> RealGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealGrid::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_signal(len: usize, seed: u64) -> Vec<ComplexSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| ComplexSample::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// 2D DFT by brute force: the direct sum along every row, then along every
/// column, keeping the first `cols/2 + 1` columns.
pub fn dft2d_oracle(input: &RealGrid) -> ComplexGrid {
    let (rows, cols) = input.dims();
    let half = cols / 2 + 1;
    let row_spectra: Vec<Vec<ComplexSample>> = (0..rows)
        .map(|i| {
            let row: Vec<_> = input
                .row(i)
                .iter()
                .map(|&x| ComplexSample::new(x, 0.0))
                .collect();
            dft_oracle(&row, Direction::Forward).expect("non-empty row")
        })
        .collect();
    let mut out = ComplexGrid::zeros(rows, half);
    for j in 0..half {
        let column: Vec<_> = row_spectra.iter().map(|r| r[j]).collect();
        let spectrum = dft_oracle(&column, Direction::Forward).expect("non-empty column");
        for (i, v) in spectrum.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    out
}

/// `max |a - b| / max |b|`, or the plain maximum difference when `b` is zero.
pub fn max_relative_error(a: &[ComplexSample], b: &[ComplexSample]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = max_abs_error(a, b);
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn max_abs_error(a: &[ComplexSample], b: &[ComplexSample]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
