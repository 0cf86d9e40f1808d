//! Separable multi-axis DFT passes.
//!
//! Each pass transforms along the current leading axis and writes the result
//! with that axis rotated to the end, so lines are gathered strided but
//! written contiguously and the line loop parallelizes without aliasing.
//! Processing the original axes in order restores the layout after a full
//! cycle. All-zero lines are skipped; spectrally sparse fields (dyadically
//! localized data) transform much faster that way.

use super::{Field, GridError, Space};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::Fft;
use std::sync::Arc;

const PAR_THRESHOLD: usize = 1 << 15;

/// Lines gathered together per sweep when the axis is long; keeps the input
/// reads sequential and the write streams few enough to sit in L1.
const TILE: usize = 8;
/// Below this axis length the plain per-line gather is faster.
const TILE_MIN_AXIS: usize = 1024;

/// One rotate-pass along the current leading axis of extent `d0`.
/// `pre = true` multiplies by `fac` before the FFT (inverse transforms),
/// otherwise after (forward transforms).
fn rotate_pass(
    input: &[Complex64],
    output: &mut [Complex64],
    d0: usize,
    fac: &[f64],
    pre: bool,
    plan: &Arc<dyn Fft<f64>>,
) {
    let lines = input.len() / d0;
    debug_assert_eq!(fac.len(), d0);
    debug_assert_eq!(input.len() % d0, 0);
    let tile = if d0 >= TILE_MIN_AXIS || lines >= 4096 { TILE } else { 1 };

    // one sequential sweep marks the all-zero lines so their strided
    // gathers (the expensive part for band-limited spectra) are skipped
    let mut line_nonzero = vec![false; lines];
    for t in 0..d0 {
        let row = &input[t * lines..(t + 1) * lines];
        for (line, v) in row.iter().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                line_nonzero[line] = true;
            }
        }
    }
    let line_nonzero = &line_nonzero;

    // a block holds `width <= tile` consecutive lines; the gather sweeps the
    // input once per block, reading `width` contiguous values per step
    let work = |block: usize, chunk: &mut [Complex64], scratch: &mut Vec<Complex64>| {
        let first = block * tile;
        let width = chunk.len() / d0;
        if line_nonzero[first..first + width].iter().all(|&nz| !nz) {
            chunk.fill(Complex64::new(0.0, 0.0));
            return;
        }
        for t in 0..d0 {
            let src = &input[t * lines + first..t * lines + first + width];
            let f = fac[t];
            for (b, &v) in src.iter().enumerate() {
                chunk[b * d0 + t] = if pre { v.scale(f) } else { v };
            }
        }
        for b in 0..width {
            if !line_nonzero[first + b] {
                continue;
            }
            let line = &mut chunk[b * d0..(b + 1) * d0];
            plan.process_with_scratch(line, scratch);
            if !pre {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = slot.scale(fac[t]);
                }
            }
        }
    };

    if input.len() >= PAR_THRESHOLD {
        output
            .par_chunks_mut(d0 * tile)
            .enumerate()
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
                |scratch, (block, chunk)| work(block, chunk, scratch),
            );
    } else {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for (block, chunk) in output.chunks_mut(d0 * tile).enumerate() {
            work(block, chunk, &mut scratch);
        }
    }
}

fn run_passes(field: &mut Field, forward: bool) {
    let grid = Arc::clone(field.grid());
    let len = grid.len();
    let naxes = grid.naxes();
    let mut cur = std::mem::take(&mut field.values).into_boxed_slice();
    let mut aux = vec![Complex64::new(0.0, 0.0); len].into_boxed_slice();
    for axis in 0..naxes {
        let (d0, fac, plan): (usize, &[f64], &Arc<dyn Fft<f64>>) = if axis < grid.d {
            (
                grid.nx,
                if forward { &grid.fx_fwd } else { &grid.fx_inv },
                if forward { &grid.plan_fwd_x } else { &grid.plan_inv_x },
            )
        } else {
            (
                grid.ny,
                if forward { &grid.fy_fwd } else { &grid.fy_inv },
                if forward {
                    grid.plan_fwd_y.as_ref().unwrap()
                } else {
                    grid.plan_inv_y.as_ref().unwrap()
                },
            )
        };
        rotate_pass(&cur, &mut aux, d0, fac, !forward, plan);
        std::mem::swap(&mut cur, &mut aux);
    }
    field.values = cur.into_vec();
}

impl Field {
    /// Physical → spectral. `û(k) = Σ_z u(z) e^{-ik·z} Δz`.
    pub fn forward_transform(&self) -> Result<Field, GridError> {
        let mut out = self.clone();
        out.forward_in_place()?;
        Ok(out)
    }

    /// Spectral → physical. Exact inverse of [`Field::forward_transform`].
    pub fn inverse_transform(&self) -> Result<Field, GridError> {
        let mut out = self.clone();
        out.inverse_in_place()?;
        Ok(out)
    }

    pub fn forward_in_place(&mut self) -> Result<(), GridError> {
        self.expect_space(Space::Physical)?;
        run_passes(self, true);
        self.set_space(Space::Spectral);
        Ok(())
    }

    pub fn inverse_in_place(&mut self) -> Result<(), GridError> {
        self.expect_space(Space::Spectral)?;
        run_passes(self, false);
        self.set_space(Space::Physical);
        Ok(())
    }

    /// A copy in the requested space, transforming when needed.
    pub fn in_space(&self, space: Space) -> Result<Field, GridError> {
        if self.space() == space {
            return Ok(self.clone());
        }
        match space {
            Space::Spectral => self.forward_transform(),
            Space::Physical => self.inverse_transform(),
        }
    }
}

/// Layout-preserving serial DFT along one axis. Used for partial transforms
/// (e.g. torus axes only); not parallel, intended for modest grids.
pub(crate) fn dft_axis_in_place(
    values: &mut [Complex64],
    dims: &[usize],
    strides: &[usize],
    axis: usize,
    fac: &[f64],
    pre: bool,
    plan: &Arc<dyn Fft<f64>>,
) {
    let dim = dims[axis];
    let stride = strides[axis];
    let lines = values.len() / dim;
    let mut chunk = vec![Complex64::new(0.0, 0.0); dim];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for line in 0..lines {
        let base = (line / stride) * dim * stride + line % stride;
        let mut nonzero = false;
        for (t, slot) in chunk.iter_mut().enumerate() {
            let v = values[base + t * stride];
            nonzero |= v.re != 0.0 || v.im != 0.0;
            *slot = if pre { v.scale(fac[t]) } else { v };
        }
        if !nonzero {
            continue;
        }
        plan.process_with_scratch(&mut chunk, &mut scratch);
        for (t, slot) in chunk.iter().enumerate() {
            values[base + t * stride] = if pre { *slot } else { slot.scale(fac[t]) };
        }
    }
}

/// Forward transform along the torus axes only: output is physical in x,
/// spectral bins in η, same row-major layout. Input must be physical.
pub(crate) fn torus_forward_values(field: &Field) -> Result<Vec<Complex64>, GridError> {
    field.expect_space(Space::Physical)?;
    let grid = field.grid();
    let mut values = field.values().to_vec();
    for axis in grid.d..grid.d + grid.n {
        dft_axis_in_place(
            &mut values,
            &grid.dims,
            &grid.strides,
            axis,
            &grid.fy_fwd,
            false,
            grid.plan_fwd_y.as_ref().unwrap(),
        );
    }
    Ok(values)
}
