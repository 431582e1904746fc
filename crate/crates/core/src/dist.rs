//! Slab-distributed execution over in-process ranks.
//!
//! Each rank owns a contiguous block of rows. Transposes become an
//! all-to-all exchange: every rank packs the columns destined for each peer,
//! the collective swaps them, and every rank stitches the received blocks
//! into its rows of the transposed grid.

use std::cell::{Cell, RefCell};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use crate::engine::shared::SharedBuf;
use crate::engine::{Engine, Pipeline, TimingBreakdown};
use crate::error::{FftError, Result};
use crate::kernel::ComplexSample;
use crate::layout::{block_partition, ComplexGrid, Grid, RealGrid};
use crate::planner::{Plan, TimerSource};

pub const DEFAULT_COLLECTIVE_TIMEOUT: Duration = Duration::from_secs(60);

/// Rows owned by `rank` under the block distribution: the first
/// `global_rows % nranks` ranks get one extra row. Returns `(row_start,
/// local_rows)`.
pub fn local_slab(global_rows: usize, rank: usize, nranks: usize) -> Result<(usize, usize)> {
    if nranks == 0 || rank >= nranks {
        return Err(FftError::UnsupportedDecomposition(format!(
            "rank {rank} is outside a communicator of {nranks}"
        )));
    }
    if nranks > global_rows {
        return Err(FftError::UnsupportedDecomposition(format!(
            "{nranks} ranks cannot split {global_rows} rows"
        )));
    }
    Ok(block_partition(global_rows, nranks, rank))
}

/// A group of ranks that can exchange buffers collectively.
pub trait Communicator {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;

    /// `send[j]` goes to rank `j`; the result's entry `i` came from rank `i`.
    /// Every rank must call this, each with exactly `size()` buffers.
    fn all_to_all(&self, send: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>>;
}

#[derive(Debug)]
enum Body {
    Data(Vec<u8>),
    Abort { reason: String },
}

#[derive(Debug)]
struct Message {
    round: u64,
    from: usize,
    body: Body,
}

/// Channel-backed endpoint of an in-process communicator.
pub struct LocalCommunicator {
    rank: usize,
    size: usize,
    peers: Vec<Sender<Message>>,
    inbox: Receiver<Message>,
    round: Cell<u64>,
    early: RefCell<Vec<Message>>,
    timeout: Duration,
}

impl std::fmt::Debug for LocalCommunicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalCommunicator")
            .field("rank", &self.rank)
            .field("size", &self.size)
            .finish()
    }
}

impl LocalCommunicator {
    /// One endpoint per rank, in rank order.
    pub fn create(size: usize) -> Vec<LocalCommunicator> {
        Self::create_with_timeout(size, DEFAULT_COLLECTIVE_TIMEOUT)
    }

    pub fn create_with_timeout(size: usize, timeout: Duration) -> Vec<LocalCommunicator> {
        let (senders, receivers): (Vec<_>, Vec<_>) = (0..size).map(|_| channel()).unzip();
        receivers
            .into_iter()
            .enumerate()
            .map(|(rank, inbox)| LocalCommunicator {
                rank,
                size,
                peers: senders.clone(),
                inbox,
                round: Cell::new(0),
                early: RefCell::new(Vec::new()),
                timeout,
            })
            .collect()
    }

    fn post(&self, to: usize, msg: Message) -> Result<()> {
        self.peers[to]
            .send(msg)
            .map_err(|_| FftError::Protocol(format!("rank {to} left the communicator")))
    }

    fn next_message(&self, round: u64) -> Result<Message> {
        let mut early = self.early.borrow_mut();
        if let Some(pos) = early.iter().position(|m| m.round == round) {
            return Ok(early.remove(pos));
        }
        loop {
            let msg = self.inbox.recv_timeout(self.timeout).map_err(|e| match e {
                RecvTimeoutError::Timeout => FftError::Protocol(format!(
                    "rank {} timed out after {:?} waiting in all_to_all",
                    self.rank, self.timeout
                )),
                RecvTimeoutError::Disconnected => {
                    FftError::Protocol("communicator disconnected".into())
                }
            })?;
            if msg.round == round {
                return Ok(msg);
            }
            // A peer already finished this round and started the next one.
            early.push(msg);
        }
    }
}

impl Communicator for LocalCommunicator {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn all_to_all(&self, send: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>> {
        let round = self.round.get();
        self.round.set(round + 1);

        // Every rank posts exactly one message to every rank per round, data
        // or abort, so a bad contribution fails the round on all ranks
        // without leaving anyone blocked.
        let mut local_error = None;
        if send.len() != self.size {
            let reason = format!(
                "rank {} supplied {} buffers, expected {}",
                self.rank,
                send.len(),
                self.size
            );
            for to in 0..self.size {
                self.post(
                    to,
                    Message {
                        round,
                        from: self.rank,
                        body: Body::Abort {
                            reason: reason.clone(),
                        },
                    },
                )?;
            }
            local_error = Some(reason);
        } else {
            for (to, buf) in send.into_iter().enumerate() {
                self.post(
                    to,
                    Message {
                        round,
                        from: self.rank,
                        body: Body::Data(buf),
                    },
                )?;
            }
        }

        let mut recv: Vec<Option<Vec<u8>>> = (0..self.size).map(|_| None).collect();
        let mut aborts = Vec::new();
        for _ in 0..self.size {
            let msg = self.next_message(round)?;
            if msg.from >= self.size || recv[msg.from].is_some() {
                return Err(FftError::Protocol(format!(
                    "duplicate or unknown sender {} in round {round}",
                    msg.from
                )));
            }
            match msg.body {
                Body::Data(buf) => recv[msg.from] = Some(buf),
                Body::Abort { reason } => {
                    recv[msg.from] = Some(Vec::new());
                    aborts.push(reason);
                }
            }
        }
        if let Some(reason) = local_error.or_else(|| aborts.into_iter().next()) {
            return Err(FftError::Protocol(format!("all_to_all aborted: {reason}")));
        }
        Ok(recv
            .into_iter()
            .map(|b| b.expect("one buffer per rank"))
            .collect())
    }
}

/// Runs `f` once per rank, each on its own thread, and returns the results in
/// rank order.
pub fn run_ranks<R, F>(nranks: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(LocalCommunicator) -> R + Sync,
{
    let comms = LocalCommunicator::create(nranks);
    std::thread::scope(|s| {
        let handles: Vec<_> = comms
            .into_iter()
            .map(|comm| {
                let f = &f;
                s.spawn(move || f(comm))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank panicked"))
            .collect()
    })
}

/// Rows `[global_row_start, global_row_start + local_rows)` of a global grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab<T> {
    pub owner_rank: usize,
    pub global_row_start: usize,
    pub local_rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Default> Slab<T> {
    /// This rank's block of `grid`.
    pub fn from_global(grid: &Grid<T>, rank: usize, nranks: usize) -> Result<Self> {
        let (start, len) = local_slab(grid.rows(), rank, nranks)?;
        let mut data = Vec::with_capacity(len * grid.cols());
        for i in start..start + len {
            data.extend_from_slice(grid.row(i));
        }
        Ok(Slab {
            owner_rank: rank,
            global_row_start: start,
            local_rows: len,
            cols: grid.cols(),
            data,
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn check(&self, global_rows: usize, nranks: usize) -> Result<()> {
        let (start, len) = local_slab(global_rows, self.owner_rank, nranks)?;
        if (start, len) != (self.global_row_start, self.local_rows)
            || self.data.len() != self.local_rows * self.cols
        {
            return Err(FftError::invalid(format!(
                "slab of rank {} holds rows {}..{} ({} elements), expected rows {start}..{} of {} columns",
                self.owner_rank,
                self.global_row_start,
                self.global_row_start + self.local_rows,
                self.data.len(),
                start + len,
                self.cols
            )));
        }
        Ok(())
    }
}

/// Reassembles a global grid from every rank's slab.
pub fn gather<T: Copy + Default>(slabs: &[Slab<T>]) -> Result<Grid<T>> {
    let mut sorted: Vec<&Slab<T>> = slabs.iter().collect();
    sorted.sort_by_key(|s| s.global_row_start);
    let cols = sorted.first().map_or(0, |s| s.cols);
    let mut data = Vec::new();
    let mut next = 0;
    for s in sorted {
        if s.global_row_start != next || s.cols != cols {
            return Err(FftError::invalid("slabs do not tile the row range"));
        }
        data.extend_from_slice(&s.data);
        next += s.local_rows;
    }
    Grid::from_vec(next, cols, data)
}

pub fn pack_complex(values: &[ComplexSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn unpack_complex(bytes: &[u8]) -> Result<Vec<ComplexSample>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(FftError::Protocol(format!(
            "payload of {} bytes is not a whole number of complex samples",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            ComplexSample::new(re, im)
        })
        .collect())
}

/// Transposes a distributed `global_rows x global_cols` grid. The result is
/// this rank's slab of the `global_cols x global_rows` transposed grid.
pub fn distributed_transpose(
    comm: &dyn Communicator,
    slab: &Slab<ComplexSample>,
    global_rows: usize,
    global_cols: usize,
) -> Result<Slab<ComplexSample>> {
    let nranks = comm.size();
    let me = comm.rank();
    if slab.owner_rank != me || slab.cols != global_cols {
        return Err(FftError::invalid(format!(
            "rank {me} was handed a slab of rank {} with {} columns (expected {global_cols})",
            slab.owner_rank, slab.cols
        )));
    }
    slab.check(global_rows, nranks)?;
    if global_cols < nranks {
        return Err(FftError::UnsupportedDecomposition(format!(
            "transposed grid has {global_cols} rows, fewer than {nranks} ranks"
        )));
    }

    let local = slab.local_rows;
    let send = (0..nranks)
        .map(|peer| {
            let (start, len) = block_partition(global_cols, nranks, peer);
            let mut block = Vec::with_capacity(len * local);
            for t in start..start + len {
                block.extend((0..local).map(|i| slab.data[i * global_cols + t]));
            }
            pack_complex(&block)
        })
        .collect();
    let recv = comm.all_to_all(send)?;

    let (my_start, my_len) = block_partition(global_cols, nranks, me);
    let mut data = vec![ComplexSample::default(); my_len * global_rows];
    for (src, bytes) in recv.iter().enumerate() {
        let (row_start, rows) = block_partition(global_rows, nranks, src);
        let block = unpack_complex(bytes)?;
        if block.len() != my_len * rows {
            return Err(FftError::Protocol(format!(
                "rank {src} sent {} samples, expected {}",
                block.len(),
                my_len * rows
            )));
        }
        for (t, piece) in block.chunks_exact(rows.max(1)).enumerate().take(my_len) {
            let dst = t * global_rows + row_start;
            data[dst..dst + rows].copy_from_slice(&piece[..rows]);
        }
    }
    Ok(Slab {
        owner_rank: me,
        global_row_start: my_start,
        local_rows: my_len,
        cols: global_rows,
        data,
    })
}

fn apply_rows(
    engine: Option<&Engine>,
    data: &mut [ComplexSample],
    width: usize,
    f: &(dyn Fn(usize, &mut [ComplexSample]) + Sync),
) {
    let rows = data.len().checked_div(width).unwrap_or(0);
    match engine {
        None => data
            .chunks_exact_mut(width.max(1))
            .enumerate()
            .for_each(|(i, row)| f(i, row)),
        Some(engine) => {
            let shared = SharedBuf::new(data);
            engine.for_loop(rows, &|range| {
                for i in range {
                    // SAFETY: for_loop hands out disjoint row ranges.
                    let row = unsafe { shared.slice_mut(i * width..(i + 1) * width) };
                    f(i, row);
                }
            });
        }
    }
}

/// Four-step 2D r2c transform of a row-distributed grid. Row transforms run
/// on `threads_per_rank` workers per rank (fork-join when more than one);
/// both transposes go through [`distributed_transpose`]. The result is this
/// rank's rows of the `N1 x (N2/2 + 1)` spectrum.
pub fn fft2d_distributed(
    comm: &dyn Communicator,
    input: &Slab<f64>,
    plan: &Plan,
    threads_per_rank: usize,
) -> Result<Slab<ComplexSample>> {
    distributed_pipeline(comm, input, plan, threads_per_rank, None).map(|(slab, _)| slab)
}

/// [`fft2d_distributed`] with phase boundaries read from `timer` on this
/// rank. Transpose phases include waiting for peers.
pub fn fft2d_distributed_timed(
    comm: &dyn Communicator,
    input: &Slab<f64>,
    plan: &Plan,
    threads_per_rank: usize,
    timer: &dyn TimerSource,
) -> Result<(Slab<ComplexSample>, TimingBreakdown)> {
    let (slab, marks) = distributed_pipeline(comm, input, plan, threads_per_rank, Some(timer))?;
    Ok((
        slab,
        TimingBreakdown::from_marks(&marks.expect("timer given")),
    ))
}

fn distributed_pipeline(
    comm: &dyn Communicator,
    input: &Slab<f64>,
    plan: &Plan,
    threads_per_rank: usize,
    timer: Option<&dyn TimerSource>,
) -> Result<(Slab<ComplexSample>, Option<[Duration; 5]>)> {
    let mut marks = [Duration::ZERO; 5];
    let mut mark = |i: usize| -> Result<()> {
        if let Some(t) = timer {
            marks[i] = t.now()?;
        }
        Ok(())
    };
    plan.validate()?;
    if threads_per_rank == 0 {
        return Err(FftError::invalid("threads_per_rank must be at least 1"));
    }
    if input.owner_rank != comm.rank() || input.cols != plan.cols {
        return Err(FftError::invalid(format!(
            "input slab (rank {}, {} columns) does not match rank {} of a {}x{} plan",
            input.owner_rank,
            input.cols,
            comm.rank(),
            plan.rows,
            plan.cols
        )));
    }
    input.check(plan.rows, comm.size())?;

    let p = Pipeline::for_dims(plan.rows, plan.cols, plan)?;
    let engine = if threads_per_rank > 1 {
        Some(Engine::new(threads_per_rank)?)
    } else {
        None
    };

    mark(0)?;
    let mut spectrum = vec![ComplexSample::default(); input.local_rows * p.half];
    apply_rows(engine.as_ref(), &mut spectrum, p.half, &|i, out| {
        p.r2c_row(input.row(i), out)
    });
    let rows_slab = Slab {
        owner_rank: comm.rank(),
        global_row_start: input.global_row_start,
        local_rows: input.local_rows,
        cols: p.half,
        data: spectrum,
    };

    mark(1)?;
    let mut transposed = distributed_transpose(comm, &rows_slab, p.rows, p.half)?;
    drop(rows_slab);
    mark(2)?;
    apply_rows(engine.as_ref(), &mut transposed.data, p.rows, &|_, row| {
        p.c2c_row(row)
    });
    mark(3)?;
    let out = distributed_transpose(comm, &transposed, p.half, p.rows)?;
    mark(4)?;
    Ok((out, timer.map(|_| marks)))
}

/// Scatters `input` over `nranks` in-process ranks, runs
/// [`fft2d_distributed`] on each, and gathers the spectrum.
pub fn fft2d_distributed_local(
    input: &RealGrid,
    plan: &Plan,
    nranks: usize,
    threads_per_rank: usize,
) -> Result<ComplexGrid> {
    let slabs = run_ranks(nranks, |comm| {
        let slab = Slab::from_global(input, comm.rank(), nranks)?;
        fft2d_distributed(&comm, &slab, plan, threads_per_rank)
    });
    let slabs = slabs.into_iter().collect::<Result<Vec<_>>>()?;
    gather(&slabs)
}

/// [`fft2d_distributed_local`] returning rank 0's phase breakdown. Only
/// rank 0 reads `timer`.
pub fn fft2d_distributed_local_timed(
    input: &RealGrid,
    plan: &Plan,
    nranks: usize,
    threads_per_rank: usize,
    timer: &dyn TimerSource,
) -> Result<(ComplexGrid, TimingBreakdown)> {
    let results = run_ranks(nranks, |comm| {
        let slab = Slab::from_global(input, comm.rank(), nranks)?;
        let t = (comm.rank() == 0).then_some(timer);
        distributed_pipeline(&comm, &slab, plan, threads_per_rank, t)
    });
    let mut breakdown = TimingBreakdown::default();
    let mut slabs = Vec::with_capacity(nranks);
    for r in results {
        let (slab, marks) = r?;
        if let Some(m) = marks {
            breakdown = TimingBreakdown::from_marks(&m);
        }
        slabs.push(slab);
    }
    Ok((gather(&slabs)?, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slab_examples() {
        assert_eq!(local_slab(8, 1, 4).unwrap(), (2, 2));
        assert_eq!(local_slab(10, 0, 4).unwrap(), (0, 3));
        assert_eq!(local_slab(10, 3, 4).unwrap(), (8, 2));
        assert!(matches!(
            local_slab(3, 0, 4),
            Err(FftError::UnsupportedDecomposition(_))
        ));
        assert!(local_slab(8, 4, 4).is_err());
    }

    #[test]
    fn self_exchange() {
        let out = run_ranks(1, |comm| comm.all_to_all(vec![b"x".to_vec()]).unwrap());
        assert_eq!(out, vec![vec![b"x".to_vec()]]);
    }

    #[test]
    fn two_rank_exchange() {
        let out = run_ranks(2, |comm| {
            let send = if comm.rank() == 0 {
                vec![b"a".to_vec(), b"b".to_vec()]
            } else {
                vec![b"c".to_vec(), b"d".to_vec()]
            };
            comm.all_to_all(send).unwrap()
        });
        assert_eq!(out[0], vec![b"a".to_vec(), b"c".to_vec()]);
        assert_eq!(out[1], vec![b"b".to_vec(), b"d".to_vec()]);
    }

    #[test]
    fn wrong_buffer_count_aborts_everyone() {
        let out = run_ranks(3, |comm| {
            let n = if comm.rank() == 1 { 2 } else { 3 };
            comm.all_to_all(vec![vec![0u8]; n])
        });
        for r in out {
            match r {
                Err(FftError::Protocol(msg)) => assert!(msg.contains("rank 1"), "{msg}"),
                other => panic!("expected protocol error, got {other:?}"),
            }
        }
    }

    #[test]
    fn rounds_stay_separate() {
        // Rank 0 is slow to enter the second round; faster ranks must not
        // mix their second-round messages into the first.
        let out = run_ranks(4, |comm| {
            let mut got = Vec::new();
            for round in 0..3u8 {
                if comm.rank() == 0 && round == 1 {
                    std::thread::sleep(Duration::from_millis(20));
                }
                let send = (0..4)
                    .map(|to| vec![round, comm.rank() as u8, to])
                    .collect();
                got.push(comm.all_to_all(send).unwrap());
            }
            got
        });
        for (me, rounds) in out.iter().enumerate() {
            for (round, recv) in rounds.iter().enumerate() {
                for (from, buf) in recv.iter().enumerate() {
                    assert_eq!(buf, &vec![round as u8, from as u8, me as u8]);
                }
            }
        }
    }

    #[test]
    fn missing_rank_times_out() {
        let mut comms = LocalCommunicator::create_with_timeout(2, Duration::from_millis(50));
        let lonely = comms.remove(0);
        let err = lonely.all_to_all(vec![vec![], vec![]]).unwrap_err();
        assert!(matches!(err, FftError::Protocol(_)));
        drop(comms);
    }

    #[test]
    fn pack_round_trip() {
        let v = vec![
            ComplexSample::new(1.5, -0.25),
            ComplexSample::new(f64::MIN_POSITIVE, 3e300),
        ];
        assert_eq!(unpack_complex(&pack_complex(&v)).unwrap(), v);
        assert!(unpack_complex(&[0u8; 15]).is_err());
    }

    #[test]
    fn transpose_four_by_four_on_two_ranks() {
        let grid = ComplexGrid::from_fn(4, 4, |i, j| ComplexSample::new((i * 4 + j) as f64, 0.0));
        let out = run_ranks(2, |comm| {
            let slab = Slab::from_global(&grid, comm.rank(), 2).unwrap();
            distributed_transpose(&comm, &slab, 4, 4).unwrap()
        });
        let rank0: Vec<f64> = out[0].data.iter().map(|c| c.re).collect();
        assert_eq!(rank0, vec![0.0, 4.0, 8.0, 12.0, 1.0, 5.0, 9.0, 13.0]);
        assert_eq!(out[0].global_row_start, 0);
        assert_eq!(out[1].global_row_start, 2);
    }

    #[test]
    fn mismatched_slab_is_rejected() {
        let grid = ComplexGrid::zeros(4, 4);
        let out = run_ranks(2, |comm| {
            let slab = Slab::from_global(&grid, 0, 2).unwrap();
            // Rank 1 passes rank 0's slab; fail before communicating.
            if comm.rank() == 1 {
                distributed_transpose(&comm, &slab, 4, 4).map(|_| ())
            } else {
                Ok(())
            }
        });
        assert!(out[1].is_err());
    }
}
