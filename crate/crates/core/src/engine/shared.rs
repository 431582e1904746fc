//! Shared-buffer plumbing for tasks that write disjoint regions of one grid.

use std::cell::RefCell;
use std::marker::PhantomData;
use std::ops::Range;

use crate::kernel::ComplexSample;

/// A mutable buffer handed to many tasks at once. Every accessor is unsafe:
/// callers guarantee that concurrently live borrows never overlap a region
/// another task is writing.
pub(crate) struct SharedBuf<'a, T> {
    ptr: *mut T,
    len: usize,
    _marker: PhantomData<&'a mut [T]>,
}

unsafe impl<T: Send> Send for SharedBuf<'_, T> {}
unsafe impl<T: Send> Sync for SharedBuf<'_, T> {}

impl<'a, T: Copy> SharedBuf<'a, T> {
    pub(crate) fn new(slice: &'a mut [T]) -> Self {
        SharedBuf {
            ptr: slice.as_mut_ptr(),
            len: slice.len(),
            _marker: PhantomData,
        }
    }

    /// # Safety
    /// No other live reference may overlap `range`.
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn slice_mut(&self, range: Range<usize>) -> &mut [T] {
        assert!(range.start <= range.end && range.end <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(range.start), range.len())
    }

    /// # Safety
    /// No task may be writing inside `range` while the slice is alive.
    pub(crate) unsafe fn slice(&self, range: Range<usize>) -> &[T] {
        assert!(range.start <= range.end && range.end <= self.len);
        std::slice::from_raw_parts(self.ptr.add(range.start), range.len())
    }

    /// # Safety
    /// No other task may access element `idx` concurrently.
    pub(crate) unsafe fn read(&self, idx: usize) -> T {
        assert!(idx < self.len);
        *self.ptr.add(idx)
    }

    /// # Safety
    /// No other task may access element `idx` concurrently.
    pub(crate) unsafe fn write(&self, idx: usize, value: T) {
        assert!(idx < self.len);
        *self.ptr.add(idx) = value;
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn as_ptr(&self) -> *mut T {
        self.ptr
    }
}

thread_local! {
    static SCRATCH: RefCell<(Vec<ComplexSample>, Vec<ComplexSample>)> =
        const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Runs `f` with two per-thread buffers of `n` samples each.
pub(crate) fn with_scratch<R>(
    n: usize,
    f: impl FnOnce(&mut [ComplexSample], &mut [ComplexSample]) -> R,
) -> R {
    SCRATCH.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (a, b) = &mut *guard;
        if a.len() < n {
            a.resize(n, ComplexSample::default());
            b.resize(n, ComplexSample::default());
        }
        f(&mut a[..n], &mut b[..n])
    })
}
