//! Discretized waveguide domain `[-L, L)^d × [0, 2π)^n` and fields on it.
//!
//! The Euclidean box stands in for ℝ^d; every claim that belongs to the
//! unbounded domain is trusted only while [`boundary_leak`] stays below a
//! configured threshold. The torus period is fixed to 2π so the dual torus
//! lattice is exactly ℤ^n.
//!
//! Transform normalization (one convention, asserted by tests):
//!
//! - forward carries the cell volume, `û(k) = Σ u(z) e^{-ik·z} Δz`, so it
//!   approximates the continuum integral;
//! - inverse carries the dual measure `(2L)^{-d} (2π)^{-n}`;
//! - Plancherel then holds without mode-count factors:
//!   `Σ |u|² Δz = (2L)^{-d}(2π)^{-n} Σ |û|²`.
//!
//! Frequencies are stored in FFT bin order: bin `m` of an axis of length `q`
//! holds `m` for `m < q/2` and `m - q` otherwise. Values are row-major with
//! the Euclidean axes first, then the torus axes; bit-exact checkpoints rely
//! on this order.

mod checkpoint;
mod transform;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
pub(crate) use transform::torus_forward_values;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{axis} resolution must be even and >= 8, got {value}")]
    BadResolution { axis: &'static str, value: usize },
    #[error("half-length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("need d >= 1 Euclidean axes (got d={d}, n={n})")]
    BadDimension { d: usize, n: usize },
    #[error("field is in {found:?} space, expected {expected:?}")]
    SpaceMismatch { expected: Space, found: Space },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("value buffer has length {found}, grid needs {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("window fraction must lie in (0,1), got {0}")]
    BadWindow(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Physical,
    Spectral,
}

/// Discretization of `[-L, L)^d × [0, 2π)^n` together with its dual lattice
/// and cached FFT plans. Immutable after construction; share via `Arc`.
pub struct WaveguideGrid {
    d: usize,
    n: usize,
    half_length: f64,
    nx: usize,
    ny: usize,
    /// ξ values of one Euclidean axis, FFT bin order: (π/L)·{0,…,nx/2-1,-nx/2,…,-1}.
    euclid_freqs: Vec<f64>,
    /// η values of one torus axis, FFT bin order; empty when n = 0.
    torus_freqs: Vec<i64>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    cell_volume: f64,
    spectral_weight: f64,
    // per-axis-kind transform factors, FFT bin order
    fx_fwd: Vec<f64>,
    fx_inv: Vec<f64>,
    fy_fwd: Vec<f64>,
    fy_inv: Vec<f64>,
    plan_fwd_x: Arc<dyn Fft<f64>>,
    plan_inv_x: Arc<dyn Fft<f64>>,
    plan_fwd_y: Option<Arc<dyn Fft<f64>>>,
    plan_inv_y: Option<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for WaveguideGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveguideGrid")
            .field("d", &self.d)
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

/// Builds the grid, its dual lattice and transform plans.
pub fn make_grid(
    d: usize,
    n: usize,
    half_length: f64,
    nx: usize,
    ny: usize,
) -> Result<Arc<WaveguideGrid>, GridError> {
    if d < 1 {
        return Err(GridError::BadDimension { d, n });
    }
    if !(half_length > 0.0) || !half_length.is_finite() {
        return Err(GridError::BadLength(half_length));
    }
    if nx < 8 || !nx.is_multiple_of(2) {
        return Err(GridError::BadResolution { axis: "nx", value: nx });
    }
    if n > 0 && (ny < 8 || !ny.is_multiple_of(2)) {
        return Err(GridError::BadResolution { axis: "ny", value: ny });
    }
    let ny = if n == 0 { 0 } else { ny };

    let mut dims = vec![nx; d];
    dims.extend(std::iter::repeat_n(ny, n));
    let len: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }

    let hx = 2.0 * half_length / nx as f64;
    let hy = if n > 0 { 2.0 * PI / ny as f64 } else { 1.0 };
    let cell_volume = hx.powi(d as i32) * hy.powi(n as i32);
    let spectral_weight =
        (2.0 * half_length).powi(-(d as i32)) * (2.0 * PI).powi(-(n as i32));

    let bin = |m: usize, q: usize| -> i64 {
        if m < q / 2 {
            m as i64
        } else {
            m as i64 - q as i64
        }
    };
    let euclid_freqs: Vec<f64> = (0..nx)
        .map(|m| PI / half_length * bin(m, nx) as f64)
        .collect();
    let torus_freqs: Vec<i64> = (0..ny).map(|m| bin(m, ny)).collect();

    // the alternating sign accounts for the box starting at -L rather than 0
    let fx_fwd: Vec<f64> = (0..nx)
        .map(|m| hx * if m % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let fx_inv: Vec<f64> = (0..nx)
        .map(|m| (if m % 2 == 0 { 1.0 } else { -1.0 }) / (2.0 * half_length))
        .collect();
    let fy_fwd = vec![hy; ny];
    let fy_inv = vec![1.0 / (2.0 * PI); ny];

    let mut planner = FftPlanner::new();
    let plan_fwd_x = planner.plan_fft_forward(nx);
    let plan_inv_x = planner.plan_fft_inverse(nx);
    let (plan_fwd_y, plan_inv_y) = if n > 0 {
        (
            Some(planner.plan_fft_forward(ny)),
            Some(planner.plan_fft_inverse(ny)),
        )
    } else {
        (None, None)
    };

    Ok(Arc::new(WaveguideGrid {
        d,
        n,
        half_length,
        nx,
        ny,
        euclid_freqs,
        torus_freqs,
        dims,
        strides,
        len,
        cell_volume,
        spectral_weight,
        fx_fwd,
        fx_inv,
        fy_fwd,
        fy_inv,
        plan_fwd_x,
        plan_inv_x,
        plan_fwd_y,
        plan_inv_y,
    }))
}

impl WaveguideGrid {
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn half_length(&self) -> f64 {
        self.half_length
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn naxes(&self) -> usize {
        self.d + self.n
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }
    /// Plancherel weight: `‖u‖₂² = spectral_weight · Σ|û|²`.
    pub fn spectral_weight(&self) -> f64 {
        self.spectral_weight
    }
    pub fn euclid_freqs(&self) -> &[f64] {
        &self.euclid_freqs
    }
    pub fn torus_freqs(&self) -> &[i64] {
        &self.torus_freqs
    }
    /// Euclidean grid spacing 2L/nx.
    pub fn spacing_x(&self) -> f64 {
        2.0 * self.half_length / self.nx as f64
    }
    /// Largest representable |ξ| on a Euclidean axis.
    pub fn nyquist_x(&self) -> f64 {
        PI / self.half_length * (self.nx / 2) as f64
    }
    /// Largest representable |η| on a torus axis (0 when n = 0).
    pub fn nyquist_y(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.ny / 2) as f64
        }
    }

    /// Physical coordinate of index `j` along `axis`.
    pub fn axis_coord(&self, axis: usize, j: usize) -> f64 {
        if axis < self.d {
            -self.half_length + j as f64 * self.spacing_x()
        } else {
            j as f64 * 2.0 * PI / self.ny as f64
        }
    }

    /// Dual-lattice frequency of bin `m` along `axis`.
    pub fn axis_freq(&self, axis: usize, m: usize) -> f64 {
        if axis < self.d {
            self.euclid_freqs[m]
        } else {
            self.torus_freqs[m] as f64
        }
    }

    /// Bin index along `axis` of the flat index `flat`.
    #[inline]
    pub fn axis_bin(&self, axis: usize, flat: usize) -> usize {
        (flat / self.strides[axis]) % self.dims[axis]
    }

    fn x_block_len(&self) -> usize {
        self.nx.pow(self.d as u32)
    }
    fn y_block_len(&self) -> usize {
        if self.n == 0 {
            1
        } else {
            self.ny.pow(self.n as u32)
        }
    }

    /// |ξ|² over the Euclidean frequency block (length nx^d), bin order.
    pub fn xi_sq_lattice(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.x_block_len()];
        let mut idx = vec![0usize; self.d];
        for slot in out.iter_mut() {
            *slot = idx.iter().map(|&m| self.euclid_freqs[m].powi(2)).sum();
            for a in (0..self.d).rev() {
                idx[a] += 1;
                if idx[a] < self.nx {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }

    /// |η|² over the torus frequency block (length ny^n; `[0.0]` when n = 0).
    pub fn eta_sq_lattice(&self) -> Vec<f64> {
        if self.n == 0 {
            return vec![0.0];
        }
        let mut out = vec![0.0; self.y_block_len()];
        let mut idx = vec![0usize; self.n];
        for slot in out.iter_mut() {
            *slot = idx
                .iter()
                .map(|&m| (self.torus_freqs[m] * self.torus_freqs[m]) as f64)
                .sum();
            for a in (0..self.n).rev() {
                idx[a] += 1;
                if idx[a] < self.ny {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }

    /// Full-lattice symbol table from a function of (|ξ|², |η|²).
    pub fn build_symbol(&self, mut f: impl FnMut(f64, f64) -> f64) -> Vec<f64> {
        let xi2 = self.xi_sq_lattice();
        let eta2 = self.eta_sq_lattice();
        let mut out = Vec::with_capacity(self.len);
        for &a in &xi2 {
            for &b in &eta2 {
                out.push(f(a, b));
            }
        }
        debug_assert_eq!(out.len(), self.len);
        out
    }

    /// Visits every grid point: flat index, Euclidean coords, torus coords.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64], &[f64])) {
        let naxes = self.naxes();
        let mut idx = vec![0usize; naxes];
        let mut x = vec![-self.half_length; self.d];
        let mut y = vec![0.0f64; self.n];
        for flat in 0..self.len {
            f(flat, &x, &y);
            for a in (0..naxes).rev() {
                idx[a] += 1;
                if idx[a] < self.dims[a] {
                    if a < self.d {
                        x[a] = self.axis_coord(a, idx[a]);
                    } else {
                        y[a - self.d] = self.axis_coord(a, idx[a]);
                    }
                    break;
                }
                idx[a] = 0;
                if a < self.d {
                    x[a] = -self.half_length;
                } else {
                    y[a - self.d] = 0.0;
                }
            }
        }
    }
}

/// Complex state on a [`WaveguideGrid`], tagged with the space it lives in.
#[derive(Clone)]
pub struct Field {
    grid: Arc<WaveguideGrid>,
    space: Space,
    values: Vec<Complex64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("space", &self.space)
            .field("len", &self.values.len())
            .finish()
    }
}

impl Field {
    pub fn zeros(grid: &Arc<WaveguideGrid>, space: Space) -> Field {
        Field {
            grid: Arc::clone(grid),
            space,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(
        grid: &Arc<WaveguideGrid>,
        space: Space,
        values: Vec<Complex64>,
    ) -> Result<Field, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Field {
            grid: Arc::clone(grid),
            space,
            values,
        })
    }

    pub fn grid(&self) -> &Arc<WaveguideGrid> {
        &self.grid
    }
    pub fn space(&self) -> Space {
        self.space
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub(crate) fn set_space(&mut self, space: Space) {
        self.space = space;
    }

    /// Same grid object or a structurally identical one (fields read back
    /// from checkpoints live on fresh but equivalent grids).
    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.d == other.grid.d
                && self.grid.n == other.grid.n
                && self.grid.half_length.to_bits() == other.grid.half_length.to_bits()
                && self.grid.nx == other.grid.nx
                && self.grid.ny == other.grid.ny)
    }

    pub fn expect_space(&self, expected: Space) -> Result<(), GridError> {
        if self.space != expected {
            return Err(GridError::SpaceMismatch {
                expected,
                found: self.space,
            });
        }
        Ok(())
    }

    /// L² norm in the field's own space; Plancherel makes the two agree.
    pub fn l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        let w = match self.space {
            Space::Physical => self.grid.cell_volume(),
            Space::Spectral => self.grid.spectral_weight(),
        };
        (w * s).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// `self += c * other`; both fields must share grid and space.
    pub fn add_scaled(&mut self, other: &Field, c: Complex64) -> Result<(), GridError> {
        if !self.same_grid(other) {
            return Err(GridError::GridMismatch);
        }
        if self.space != other.space {
            return Err(GridError::SpaceMismatch {
                expected: self.space,
                found: other.space,
            });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// ‖self − other‖₂ in the shared space.
    pub fn distance_l2(&self, other: &Field) -> Result<f64, GridError> {
        if !self.same_grid(other) {
            return Err(GridError::GridMismatch);
        }
        if self.space != other.space {
            return Err(GridError::SpaceMismatch {
                expected: self.space,
                found: other.space,
            });
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let w = match self.space {
            Space::Physical => self.grid.cell_volume(),
            Space::Spectral => self.grid.spectral_weight(),
        };
        Ok((w * s).sqrt())
    }
}

/// Pointwise evaluation of a closure at the grid nodes; physical space.
pub fn sample_function(
    grid: &Arc<WaveguideGrid>,
    f: impl Fn(&[f64], &[f64]) -> Complex64,
) -> Field {
    let mut field = Field::zeros(grid, Space::Physical);
    let values = field.values_mut();
    grid.for_each_point(|flat, x, y| {
        values[flat] = f(x, y);
    });
    field
}

/// Fraction of mass outside the centered window covering `window_fraction`
/// of each Euclidean axis (torus axes are always inside). The window is the
/// half-open box `[-wL, wL)^d`, matching the domain convention, so a uniform
/// field with w = 1/2 in d = 1 leaks exactly 1/2.
pub fn boundary_leak(field: &Field, window_fraction: f64) -> Result<f64, GridError> {
    field.expect_space(Space::Physical)?;
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(GridError::BadWindow(window_fraction));
    }
    let grid = field.grid();
    let w = window_fraction * grid.half_length();
    // per-axis inside mask for one Euclidean axis (all x axes are identical)
    let inside_x: Vec<bool> = (0..grid.nx())
        .map(|j| {
            let x = grid.axis_coord(0, j);
            x >= -w && x < w
        })
        .collect();
    let mut total = 0.0f64;
    let mut outside = 0.0f64;
    let strides = grid.strides();
    let dims = grid.dims();
    for (flat, v) in field.values().iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        let mut is_in = true;
        for a in 0..grid.d() {
            let j = (flat / strides[a]) % dims[a];
            if !inside_x[j] {
                is_in = false;
                break;
            }
        }
        if !is_in {
            outside += m;
        }
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(outside / total)
}

#[cfg(test)]
mod tests;
