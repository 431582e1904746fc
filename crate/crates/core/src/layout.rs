//! Row-major grids and the transposes between pipeline steps.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{require_pow2, FftError, Result};
use crate::kernel::{ComplexSample, Direction, Fft1d};

/// Default transpose tile edge: a 64x64 tile of complex doubles is 64 KiB.
pub const DEFAULT_TRANSPOSE_BLOCK: usize = 64;

/// Row-major 2D array with an explicit row stride.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    row_stride: usize,
    data: Vec<T>,
}

pub type RealGrid = Grid<f64>;
pub type ComplexGrid = Grid<ComplexSample>;

impl<T: Copy + Default> Grid<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            row_stride: cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::with_stride(rows, cols, cols, data)
    }

    pub fn with_stride(rows: usize, cols: usize, row_stride: usize, data: Vec<T>) -> Result<Self> {
        if row_stride < cols {
            return Err(FftError::invalid(format!(
                "row stride {row_stride} is smaller than column count {cols}"
            )));
        }
        if data.len() != rows * row_stride {
            return Err(FftError::invalid(format!(
                "grid data holds {} elements, expected {rows} x {row_stride}",
                data.len()
            )));
        }
        Ok(Grid {
            rows,
            cols,
            row_stride,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Grid {
            rows,
            cols,
            row_stride: cols,
            data,
        }
    }

    /// Copy with `row_stride == cols`.
    pub fn compact(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.row_stride + j]
    }
}

impl<T> Grid<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_stride(&self) -> usize {
        self.row_stride
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Backing storage including any stride padding.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        let start = i * self.row_stride;
        &self.data[start..start + self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let start = i * self.row_stride;
        &mut self.data[start..start + self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data
            .chunks(self.row_stride.max(1))
            .take(self.rows)
            .map(move |r| &r[..self.cols])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.row_stride + j] = value;
    }
}

/// Element-by-element transpose, walking the destination row by row.
pub fn transpose_naive<T: Copy + Default>(src: &Grid<T>) -> Grid<T> {
    let mut out = Grid::zeros(src.cols, src.rows);
    transpose_rows_into(src, 0..src.cols, out.as_mut_slice());
    out
}

/// Writes rows `dst_rows` of `transpose(src)` into `dst`, a compact buffer of
/// `dst_rows.len() * src.rows()` elements.
pub(crate) fn transpose_rows_into<T: Copy>(src: &Grid<T>, dst_rows: Range<usize>, dst: &mut [T]) {
    let width = src.rows;
    for (j, out_row) in dst_rows.zip(dst.chunks_exact_mut(width.max(1))) {
        for (i, slot) in out_row.iter_mut().enumerate() {
            *slot = src.data[i * src.row_stride + j];
        }
    }
}

/// Tiled transpose with `block x block` tiles; edge tiles may be partial.
pub fn transpose_blocked<T: Copy + Default>(src: &Grid<T>, block: usize) -> Result<Grid<T>> {
    if block == 0 {
        return Err(FftError::invalid("transpose block must be at least 1"));
    }
    let mut out = Grid::zeros(src.cols, src.rows);
    let out_stride = out.row_stride;
    blocked_tile_copy(
        &src.data,
        src.row_stride,
        0..src.rows,
        0..src.cols,
        out.as_mut_slice(),
        out_stride,
        0,
        block,
    );
    Ok(out)
}

/// Copies `src[i][j]` to `dst[(j - dst_row_origin) * dst_stride + i]` for the
/// given source row/column ranges, tile by tile.
#[allow(clippy::too_many_arguments)]
pub(crate) fn blocked_tile_copy<T: Copy>(
    src: &[T],
    src_stride: usize,
    src_rows: Range<usize>,
    src_cols: Range<usize>,
    dst: &mut [T],
    dst_stride: usize,
    dst_row_origin: usize,
    block: usize,
) {
    if src_rows.is_empty() || src_cols.is_empty() {
        return;
    }
    let last = (src_cols.end - 1 - dst_row_origin) * dst_stride + src_rows.end - 1;
    assert!(last < dst.len(), "tile copy overruns destination");
    // SAFETY: every written index is at most `last`, checked above.
    unsafe {
        blocked_tile_copy_raw(
            src,
            src_stride,
            src_rows,
            src_cols,
            dst.as_mut_ptr(),
            dst_stride,
            dst_row_origin,
            block,
        )
    }
}

/// Pointer form of [`blocked_tile_copy`] for destinations shared by
/// concurrent tasks writing disjoint elements.
///
/// # Safety
/// Every index `(j - dst_row_origin) * dst_stride + i` must be in bounds of
/// `dst` and not accessed by any other thread during the call.
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn blocked_tile_copy_raw<T: Copy>(
    src: &[T],
    src_stride: usize,
    src_rows: Range<usize>,
    src_cols: Range<usize>,
    dst: *mut T,
    dst_stride: usize,
    dst_row_origin: usize,
    block: usize,
) {
    let mut ib = src_rows.start;
    while ib < src_rows.end {
        let ie = (ib + block).min(src_rows.end);
        let mut jb = src_cols.start;
        while jb < src_cols.end {
            let je = (jb + block).min(src_cols.end);
            for i in ib..ie {
                let src_row = &src[i * src_stride + jb..i * src_stride + je];
                for (j, &v) in (jb..je).zip(src_row) {
                    *dst.add((j - dst_row_origin) * dst_stride + i) = v;
                }
            }
            jb = je;
        }
        ib = ie;
    }
}

/// Block distribution of `total` items over `parts`: the first
/// `total % parts` parts get one extra item. Returns `(start, len)`.
pub(crate) fn block_partition(total: usize, parts: usize, index: usize) -> (usize, usize) {
    let base = total / parts;
    let extra = total % parts;
    let len = base + usize::from(index < extra);
    let start = index * base + index.min(extra);
    (start, len)
}

pub(crate) fn block_range(total: usize, parts: usize, index: usize) -> Range<usize> {
    let (start, len) = block_partition(total, parts, index);
    start..start + len
}

/// Transforms every column in place through strided index offsets instead of
/// a transpose.
pub fn strided_column_fft(
    grid: &ComplexGrid,
    dir: Direction,
    base_case: usize,
) -> Result<ComplexGrid> {
    require_pow2("column length", grid.rows)?;
    let fft = Fft1d::clamped(grid.rows, dir, base_case)?;
    let mut out = grid.clone();
    let mut column = vec![ComplexSample::default(); grid.rows];
    let mut scratch = vec![ComplexSample::default(); grid.rows];
    for j in 0..grid.cols {
        strided_column_apply(
            &fft,
            &mut out.data,
            out.row_stride,
            j,
            &mut column,
            &mut scratch,
        );
    }
    Ok(out)
}

pub(crate) fn strided_column_apply(
    fft: &Fft1d,
    data: &mut [ComplexSample],
    stride: usize,
    col: usize,
    column: &mut [ComplexSample],
    scratch: &mut [ComplexSample],
) {
    for (i, slot) in column.iter_mut().enumerate() {
        *slot = data[i * stride + col];
    }
    fft.process(column, scratch);
    for (i, v) in column.iter().enumerate() {
        data[i * stride + col] = *v;
    }
}
