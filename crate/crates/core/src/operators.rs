//! Fourier-multiplier calculus.
//!
//! The dispersion symbol splits by direction group,
//! `𝔪(ξ,η) = |ξ|^{2σ} + |η|^{2σ}`, with |ξ|² summed over the Euclidean axes
//! and |η|² over the torus axes. Everything here is a pure spectral
//! multiplier, so all operators commute; tables are immutable caches safe to
//! share across threads.
//!
//! The fractional Laplacian admits the resolvent representation
//!
//! ```text
//!   λ^σ = sin(πσ)/π ∫₀^∞ m^{σ-1} λ/(λ+m) dm ,   σ ∈ (0,1),
//! ```
//!
//! realized here by trapezoid quadrature after the substitution m = e^s. The
//! integrand then decays like e^{-σ|s|} on the left and e^{-(1-σ)s} on the
//! right, which fixes the window and node count for a requested tolerance.

use crate::diagnostics::WeightSpec;
use crate::grid::{Field, GridError, Space, WaveguideGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("sigma must lie in {requires}, got {sigma}")]
    SigmaOutOfRange { sigma: f64, requires: &'static str },
    #[error("spectral shift must be positive, got {0}")]
    NonpositiveShift(f64),
    #[error("mu must be -1, 0 or +1, got {0}")]
    BadMu(i64),
    #[error("nonlinearity power must be positive and finite, got {0}")]
    BadPower(f64),
    #[error("symbol table has {found} entries, grid needs {expected}")]
    SymbolShape { expected: usize, found: usize },
    #[error("dyadic scale must be a power of two, got {0}")]
    NotDyadic(f64),
    #[error(
        "quadrature window too small: tail estimate {estimated:.3e} exceeds requested {requested:.3e}"
    )]
    QuadratureTolerance { requested: f64, estimated: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Model parameters of the evolution `i u_t + ((-Δ_x)^σ + (-∂_y²)^σ) u = μ|u|^p u`.
///
/// `mu = 0` switches the nonlinearity off, which several linear cross-checks
/// rely on; the physical model uses ±1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma: f64,
    pub mu: i64,
    pub p: f64,
    pub d: usize,
    pub n: usize,
}

impl ModelParams {
    pub fn new(sigma: f64, mu: i64, p: f64, d: usize, n: usize) -> Result<Self, OperatorError> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(OperatorError::SigmaOutOfRange {
                sigma,
                requires: "(0, 1]",
            });
        }
        if !(-1..=1).contains(&mu) {
            return Err(OperatorError::BadMu(mu));
        }
        if !(p > 0.0) || !p.is_finite() {
            return Err(OperatorError::BadPower(p));
        }
        Ok(ModelParams { sigma, mu, p, d, n })
    }

    /// (4σ/d, 4σ/(d+1-2σ)): mass-critical and energy-critical endpoints.
    /// The upper bound is +∞ when d+1-2σ ≤ 0 (only d=1, σ=1).
    pub fn window_bounds(&self) -> (f64, f64) {
        let lo = 4.0 * self.sigma / self.d as f64;
        let denom = self.d as f64 + 1.0 - 2.0 * self.sigma;
        let hi = if denom > 0.0 {
            4.0 * self.sigma / denom
        } else {
            f64::INFINITY
        };
        (lo, hi)
    }

    /// Informational: p strictly inside the subcritical window, σ > 1/2.
    pub fn subcritical_window(&self) -> bool {
        let (lo, hi) = self.window_bounds();
        self.sigma > 0.5 && self.p > lo && self.p < hi
    }

    /// Radial Strichartz machinery needs σ > 1/2.
    pub fn radial_strichartz_ok(&self) -> bool {
        self.sigma > 0.5
    }
}

/// Precomputed dispersion tables over the full spectral lattice.
pub struct Multiplier {
    grid: Arc<WaveguideGrid>,
    sigma: f64,
    m_total: Vec<f64>,
    m_x: Vec<f64>,
    m_y: Vec<f64>,
}

impl Multiplier {
    /// σ ∈ (0, 1]; σ = 1 is admitted as the classical-Laplacian cross-check.
    pub fn new(grid: &Arc<WaveguideGrid>, sigma: f64) -> Result<Multiplier, OperatorError> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(OperatorError::SigmaOutOfRange {
                sigma,
                requires: "(0, 1]",
            });
        }
        let pow = |b: f64| if sigma == 1.0 { b } else { b.powf(sigma) };
        let m_x = grid.build_symbol(|xi2, _| pow(xi2));
        let m_y = grid.build_symbol(|_, eta2| pow(eta2));
        let m_total: Vec<f64> = m_x.iter().zip(&m_y).map(|(a, b)| a + b).collect();
        Ok(Multiplier {
            grid: Arc::clone(grid),
            sigma,
            m_total,
            m_x,
            m_y,
        })
    }

    pub fn grid(&self) -> &Arc<WaveguideGrid> {
        &self.grid
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    /// 𝔪(ξ,η) = |ξ|^{2σ} + |η|^{2σ}.
    pub fn total(&self) -> &[f64] {
        &self.m_total
    }
    /// |ξ|^{2σ}.
    pub fn x_part(&self) -> &[f64] {
        &self.m_x
    }
    /// |η|^{2σ}.
    pub fn y_part(&self) -> &[f64] {
        &self.m_y
    }

    /// Dumps a symbol table through the checkpoint format (real part holds
    /// the symbol); handy when debugging multiplier construction.
    pub fn export_checkpoint<W: std::io::Write>(
        &self,
        w: &mut W,
        which: MultiplierPart,
    ) -> Result<(), GridError> {
        let table = match which {
            MultiplierPart::Total => &self.m_total,
            MultiplierPart::X => &self.m_x,
            MultiplierPart::Y => &self.m_y,
        };
        let values: Vec<Complex64> = table.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let field = Field::from_values(&self.grid, Space::Spectral, values)?;
        crate::grid::write_checkpoint(w, &field, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierPart {
    Total,
    X,
    Y,
}

/// Multiplies the spectrum by `scale * symbol` pointwise. The field may be
/// handed over in either space; the result comes back in the space it
/// arrived in.
pub fn apply_multiplier(
    field: &Field,
    symbol: &[f64],
    scale: Complex64,
) -> Result<Field, OperatorError> {
    let grid = field.grid();
    if symbol.len() != grid.len() {
        return Err(OperatorError::SymbolShape {
            expected: grid.len(),
            found: symbol.len(),
        });
    }
    let original = field.space();
    let mut hat = field.in_space(Space::Spectral)?;
    for (v, &s) in hat.values_mut().iter_mut().zip(symbol) {
        *v *= scale * s;
    }
    Ok(hat.in_space(original)?)
}

/// Phase rotation `û(k) ↦ e^{i t · symbol(k)} û(k)`; unimodular, so every
/// mode magnitude and hence every H^s norm is preserved exactly.
pub fn apply_phase(field: &Field, symbol: &[f64], t: f64) -> Result<Field, OperatorError> {
    let grid = field.grid();
    if symbol.len() != grid.len() {
        return Err(OperatorError::SymbolShape {
            expected: grid.len(),
            found: symbol.len(),
        });
    }
    let original = field.space();
    let mut hat = field.in_space(Space::Spectral)?;
    hat.values_mut()
        .par_iter_mut()
        .zip(symbol.par_iter())
        .for_each(|(v, &s)| {
            *v *= Complex64::from_polar(1.0, t * s);
        });
    Ok(hat.in_space(original)?)
}

/// Log-substitution trapezoid rule for the Balakrishnan integrals:
/// `s ∈ [-s_max, s_max]`, `m = e^s`, `nodes` equispaced points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub s_max: f64,
    pub nodes: usize,
    /// Per-mode relative tolerance the window is expected to meet; checked
    /// against the tail estimate before use when present.
    pub requested_tol: Option<f64>,
}

impl QuadratureSpec {
    pub fn new(s_max: f64, nodes: usize) -> QuadratureSpec {
        QuadratureSpec {
            s_max,
            nodes: nodes.max(2),
            requested_tol: None,
        }
    }

    /// Chooses window and node count so the symbol error stays below
    /// `rel_tol` relative to λ^σ across λ ∈ [1, lambda_max].
    pub fn with_tolerance(sigma: f64, lambda_max: f64, rel_tol: f64) -> QuadratureSpec {
        let lambda_max = lambda_max.max(1.0);
        let scale = lambda_max.powf(sigma);
        let s_left = ((2.0 / (sigma * rel_tol * scale)).ln() / sigma).max(4.0);
        let s_right = ((2.0 * lambda_max.powf(1.0 - sigma) / ((1.0 - sigma) * rel_tol)).ln()
            / (1.0 - sigma))
            .max(4.0);
        let s_max = s_left.max(s_right);
        // trapezoid on an analytic integrand converges geometrically in the
        // node spacing; this spacing keeps discretization below the tails
        let h = (PI * PI / (20.0 / rel_tol).ln()).min(0.5);
        let nodes = (2.0 * s_max / h).ceil() as usize + 1;
        QuadratureSpec {
            s_max,
            nodes,
            requested_tol: Some(rel_tol),
        }
    }

    /// Upper bound on the neglected tails, relative to λ_max^σ.
    pub fn tail_estimate(&self, sigma: f64, lambda_max: f64) -> f64 {
        let lambda_max = lambda_max.max(1.0);
        let left = (-self.s_max * sigma).exp() / sigma;
        let right = lambda_max * (-self.s_max * (1.0 - sigma)).exp() / (1.0 - sigma);
        (left + right) / lambda_max.powf(sigma)
    }

    /// Nodes `s_i` with trapezoid weights (h, halved at the endpoints).
    pub fn nodes_weights(&self) -> Vec<(f64, f64)> {
        let h = 2.0 * self.s_max / (self.nodes - 1) as f64;
        (0..self.nodes)
            .map(|i| {
                let s = -self.s_max + i as f64 * h;
                let w = if i == 0 || i == self.nodes - 1 {
                    0.5 * h
                } else {
                    h
                };
                (s, w)
            })
            .collect()
    }
}

fn require_fractional(sigma: f64) -> Result<(), OperatorError> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(OperatorError::SigmaOutOfRange {
            sigma,
            requires: "(0, 1) strictly",
        });
    }
    Ok(())
}

/// Largest |ξ|² representable on the grid.
pub fn lambda_max(grid: &WaveguideGrid) -> f64 {
    grid.d() as f64 * grid.nyquist_x().powi(2)
}

/// The quadrature realization of the |ξ|^{2σ} symbol: per mode,
/// `sin(πσ)/π · Σ w_i e^{s_i σ} λ/(λ + e^{s_i})` with λ = |ξ|².
pub fn balakrishnan_symbol(
    grid: &Arc<WaveguideGrid>,
    sigma: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, OperatorError> {
    require_fractional(sigma)?;
    if let Some(tol) = spec.requested_tol {
        let est = spec.tail_estimate(sigma, lambda_max(grid));
        if est > tol {
            return Err(OperatorError::QuadratureTolerance {
                requested: tol,
                estimated: est,
            });
        }
    }
    let prefactor = (PI * sigma).sin() / PI;
    let nw: Vec<(f64, f64)> = spec
        .nodes_weights()
        .iter()
        .map(|&(s, w)| (s.exp(), w * (s * sigma).exp()))
        .collect();
    let lambda = grid.build_symbol(|xi2, _| xi2);
    let out: Vec<f64> = lambda
        .par_iter()
        .map(|&l| {
            if l == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for &(m, w) in &nw {
                acc += w * l / (l + m);
            }
            prefactor * acc
        })
        .collect();
    Ok(out)
}

/// Applies (-Δ_x)^σ through the resolvent quadrature; converges to the
/// direct |ξ|^{2σ} multiplier as the window and node count grow.
pub fn balakrishnan_apply(
    field: &Field,
    sigma: f64,
    spec: &QuadratureSpec,
) -> Result<Field, OperatorError> {
    let symbol = balakrishnan_symbol(field.grid(), sigma, spec)?;
    apply_multiplier(field, &symbol, Complex64::new(1.0, 0.0))
}

/// `u_m = c_σ (-Δ_x + m)^{-1} u` with `c_σ = √(sin(πσ)/π)`; acts on the
/// Euclidean frequencies only.
pub fn resolvent(field: &Field, sigma: f64, m: f64) -> Result<Field, OperatorError> {
    require_fractional(sigma)?;
    if !(m > 0.0) {
        return Err(OperatorError::NonpositiveShift(m));
    }
    let c = ((PI * sigma).sin() / PI).sqrt();
    let symbol = field.grid().build_symbol(|xi2, _| c / (xi2 + m));
    apply_multiplier(field, &symbol, Complex64::new(1.0, 0.0))
}

/// The fixed smooth cutoff: 1 on |t| ≤ 1, 0 on |t| ≥ 2, and
/// `exp(1 - 1/(1-s²))` with s = |t|-1 in between.
pub fn eta1(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let s = a - 1.0;
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectorKind {
    /// P_N = P_{≤N} - P_{≤N/2}
    Band,
    /// P_{≤N}
    LowPass,
    /// P_{>N} = Id - P_{≤N}
    HighPass,
}

/// Littlewood-Paley projector at dyadic scale N: the tensor product of 1D
/// cutoffs η₁(ξ_j/N) over every axis, Euclidean and torus alike.
pub struct DyadicProjector {
    grid: Arc<WaveguideGrid>,
    n_dyadic: f64,
    kind: ProjectorKind,
    profile: Vec<f64>,
    exceeds_nyquist: bool,
}

fn lowpass_profile(grid: &WaveguideGrid, scale: f64) -> Vec<f64> {
    let mut profile = vec![1.0f64];
    for axis in 0..grid.naxes() {
        let dim = grid.dims()[axis];
        let axis_vals: Vec<f64> = (0..dim)
            .map(|m| eta1(grid.axis_freq(axis, m) / scale))
            .collect();
        let mut next = Vec::with_capacity(profile.len() * dim);
        for &p in &profile {
            for &a in &axis_vals {
                next.push(p * a);
            }
        }
        profile = next;
    }
    profile
}

impl DyadicProjector {
    pub fn new(
        grid: &Arc<WaveguideGrid>,
        n_dyadic: f64,
        kind: ProjectorKind,
    ) -> Result<DyadicProjector, OperatorError> {
        if !(n_dyadic > 0.0) || (n_dyadic.log2() - n_dyadic.log2().round()).abs() > 1e-9 {
            return Err(OperatorError::NotDyadic(n_dyadic));
        }
        let mut nyq = grid.nyquist_x();
        if grid.n() > 0 {
            nyq = nyq.min(grid.nyquist_y());
        }
        let exceeds_nyquist = n_dyadic > nyq;
        let low = lowpass_profile(grid, n_dyadic);
        let profile = match kind {
            ProjectorKind::LowPass => low,
            ProjectorKind::HighPass => low.iter().map(|v| 1.0 - v).collect(),
            ProjectorKind::Band => {
                let half = lowpass_profile(grid, n_dyadic / 2.0);
                low.iter().zip(&half).map(|(a, b)| a - b).collect()
            }
        };
        Ok(DyadicProjector {
            grid: Arc::clone(grid),
            n_dyadic,
            kind,
            profile,
            exceeds_nyquist,
        })
    }

    pub fn scale(&self) -> f64 {
        self.n_dyadic
    }
    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }
    /// Set when N lies beyond the representable lattice; projection still
    /// works, the caller decides whether that is meaningful.
    pub fn exceeds_nyquist(&self) -> bool {
        self.exceeds_nyquist
    }
    pub fn grid(&self) -> &Arc<WaveguideGrid> {
        &self.grid
    }
}

pub fn lp_project(field: &Field, projector: &DyadicProjector) -> Result<Field, OperatorError> {
    apply_multiplier(field, projector.profile(), Complex64::new(1.0, 0.0))
}

/// Per-axis gradient symbol ξ_a with the unpaired Nyquist bin zeroed; an odd
/// symbol must not carry the mode that is its own negative.
pub(crate) fn gradient_axis_freq(grid: &WaveguideGrid, axis: usize, bin: usize) -> f64 {
    if bin == grid.dims()[axis] / 2 {
        0.0
    } else {
        grid.axis_freq(axis, bin)
    }
}

/// ∂_{x_a} u for every Euclidean axis, via the iξ_a multiplier.
pub fn gradient_x(field: &Field) -> Result<Vec<Field>, OperatorError> {
    let grid = field.grid();
    let original = field.space();
    let hat = field.in_space(Space::Spectral)?;
    let mut out = Vec::with_capacity(grid.d());
    for axis in 0..grid.d() {
        let stride = grid.strides()[axis];
        let dim = grid.dims()[axis];
        let freqs: Vec<f64> = (0..dim)
            .map(|m| gradient_axis_freq(grid, axis, m))
            .collect();
        let mut g = hat.clone();
        g.values_mut()
            .par_iter_mut()
            .enumerate()
            .for_each(|(flat, v)| {
                let m = (flat / stride) % dim;
                *v *= Complex64::new(0.0, freqs[m]);
            });
        out.push(g.in_space(original)?);
    }
    Ok(out)
}

/// (Hess φ)(x) · ∇u, evaluated pointwise in physical space. For the
/// half-square weight the Hessian is the identity and the gradient passes
/// through unchanged.
pub fn hessian_weight_apply(
    field: &Field,
    weight: &WeightSpec,
) -> Result<Vec<Field>, OperatorError> {
    let phys = field.in_space(Space::Physical)?;
    let grads = gradient_x(&phys)?;
    if weight.hessian_is_identity() {
        return Ok(grads);
    }
    let grid = field.grid();
    let d = grid.d();
    let mut out: Vec<Field> = grads.clone();
    let mut h = vec![0.0f64; d * d];
    let mut gvec = vec![Complex64::new(0.0, 0.0); d];
    grid.for_each_point(|flat, x, _| {
        weight.hessian(x, &mut h);
        for (k, g) in gvec.iter_mut().enumerate() {
            *g = grads[k].values()[flat];
        }
        for k in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, g) in gvec.iter().enumerate() {
                acc += h[k * d + l] * g;
            }
            out[k].values_mut()[flat] = acc;
        }
    });
    Ok(out)
}

/// Residual of the σ-admissibility relation `2σ/p + d/q = d/2 - γ`.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibleCheck {
    pub residual: f64,
    pub admissible: bool,
    /// Both exponents inside [2, ∞].
    pub in_range: bool,
}

pub fn admissible_check(p: f64, q: f64, gamma: f64, sigma: f64, d: usize) -> AdmissibleCheck {
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let residual = 2.0 * sigma * inv(p) + d as f64 * inv(q) - (d as f64 / 2.0 - gamma);
    AdmissibleCheck {
        residual,
        admissible: residual.abs() <= 1e-12,
        in_range: p >= 2.0 && q >= 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, sample_function};
    use crate::rng::CounterRng;

    fn random_field(grid: &Arc<WaveguideGrid>, seed: u64) -> Field {
        let mut rng = CounterRng::new(seed, 0);
        let mut f = Field::zeros(grid, Space::Physical);
        for v in f.values_mut() {
            let (re, im) = rng.next_complex_gaussian();
            *v = Complex64::new(re, im);
        }
        f
    }

    #[test]
    fn multiplier_additivity_is_exact() {
        let grid = make_grid(2, 1, 3.0, 8, 8).unwrap();
        let m = Multiplier::new(&grid, 0.6).unwrap();
        for i in 0..grid.len() {
            assert_eq!(m.total()[i], m.x_part()[i] + m.y_part()[i]);
            assert!(m.total()[i] >= 0.0);
        }
        let zero_count = m.total().iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zero_count, 1);
        assert_eq!(m.total()[0], 0.0);
    }

    #[test]
    fn sigma_one_is_the_classical_laplacian() {
        let grid = make_grid(2, 1, PI, 16, 8).unwrap();
        let m = Multiplier::new(&grid, 1.0).unwrap();
        let mut flat = 0;
        grid.build_symbol(|xi2, eta2| {
            let expect = xi2 + eta2;
            let got = m.total()[flat];
            if expect != 0.0 {
                assert!((got - expect).abs() <= 1e-14 * expect);
            } else {
                assert_eq!(got, 0.0);
            }
            flat += 1;
            0.0
        });
    }

    #[test]
    fn polynomial_case_on_a_plane_wave() {
        // σ=1 on e^{i(3x₁+4x₂)} e^{i2y}: 9 + 16 + 4 = 29
        let grid = make_grid(2, 1, PI, 16, 8).unwrap();
        let m = Multiplier::new(&grid, 1.0).unwrap();
        let flat = 3 * grid.strides()[0] + 4 * grid.strides()[1] + 2 * grid.strides()[2];
        assert!((m.total()[flat] - 29.0).abs() < 1e-12);

        // σ=0.5 eigenvalue on |k|=4 is |k|^{2σ} = 4
        let grid1 = make_grid(1, 0, PI, 16, 0).unwrap();
        let mh = Multiplier::new(&grid1, 0.5).unwrap();
        let wave = sample_function(&grid1, |x, _| Complex64::from_polar(1.0, 4.0 * x[0]));
        let applied = apply_multiplier(&wave, mh.x_part(), Complex64::new(1.0, 0.0)).unwrap();
        let ratio = applied.values()[3] / wave.values()[3];
        assert!((ratio - Complex64::new(4.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn unit_symbol_is_identity() {
        let grid = make_grid(1, 1, 2.0, 8, 8).unwrap();
        let f = random_field(&grid, 5);
        let sym = vec![1.0; grid.len()];
        let g = apply_multiplier(&f, &sym, Complex64::new(1.0, 0.0)).unwrap();
        assert!(g.distance_l2(&f).unwrap() <= 1e-13 * f.l2());
        assert!(apply_multiplier(&f, &sym[1..], Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn multiplier_operators_commute() {
        let grid = make_grid(1, 1, 2.0, 16, 8).unwrap();
        let f = random_field(&grid, 8);
        let m = Multiplier::new(&grid, 0.7).unwrap();
        let proj = DyadicProjector::new(&grid, 4.0, ProjectorKind::Band).unwrap();
        let ab = lp_project(
            &apply_multiplier(&f, m.total(), Complex64::new(1.0, 0.0)).unwrap(),
            &proj,
        )
        .unwrap();
        let ba = apply_multiplier(
            &lp_project(&f, &proj).unwrap(),
            m.total(),
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        assert!(ab.distance_l2(&ba).unwrap() <= 1e-12 * f.l2().max(1.0));
    }

    #[test]
    fn balakrishnan_single_mode_beta_integral() {
        // λ = 4, σ = 1/2: the representation integrates exactly to λ^σ = 2
        let grid = make_grid(1, 0, PI, 16, 0).unwrap();
        let spec = QuadratureSpec::with_tolerance(0.5, lambda_max(&grid), 1e-8);
        let sym = balakrishnan_symbol(&grid, 0.5, &spec).unwrap();
        // bin 2 carries ξ = 2, λ = 4
        assert!((sym[2] - 2.0).abs() < 1e-6, "got {}", sym[2]);

        let zero = Field::zeros(&grid, Space::Physical);
        let out = balakrishnan_apply(&zero, 0.5, &spec).unwrap();
        assert_eq!(out.l2(), 0.0);
    }

    #[test]
    fn balakrishnan_rejects_sigma_bounds_and_small_windows() {
        let grid = make_grid(1, 0, 1.0, 8, 0).unwrap();
        let f = random_field(&grid, 2);
        let spec = QuadratureSpec::new(10.0, 100);
        assert!(balakrishnan_apply(&f, 1.0, &spec).is_err());
        assert!(balakrishnan_apply(&f, 0.0, &spec).is_err());
        let mut tight = QuadratureSpec::new(2.0, 50);
        tight.requested_tol = Some(1e-10);
        match balakrishnan_apply(&f, 0.5, &tight) {
            Err(OperatorError::QuadratureTolerance { .. }) => {}
            other => panic!("expected tolerance report, got {other:?}"),
        }
    }

    #[test]
    fn balakrishnan_matches_direct_multiplier_on_band_limited_data() {
        let grid = make_grid(1, 1, PI, 16, 8).unwrap();
        let band = DyadicProjector::new(&grid, 2.0, ProjectorKind::Band).unwrap();
        let f = lp_project(&random_field(&grid, 3), &band).unwrap();
        for sigma in [0.25, 0.5, 0.75] {
            let direct = Multiplier::new(&grid, sigma).unwrap();
            let want = apply_multiplier(&f, direct.x_part(), Complex64::new(1.0, 0.0)).unwrap();
            let spec = QuadratureSpec::with_tolerance(sigma, lambda_max(&grid), 1e-8);
            let got = balakrishnan_apply(&f, sigma, &spec).unwrap();
            let rel = got.distance_l2(&want).unwrap() / want.l2();
            assert!(rel <= 1e-6, "sigma {sigma}: rel {rel}");
        }
    }

    #[test]
    fn balakrishnan_error_decreases_with_node_count() {
        let grid = make_grid(1, 0, PI, 16, 0).unwrap();
        let band = DyadicProjector::new(&grid, 2.0, ProjectorKind::Band).unwrap();
        let f = lp_project(&random_field(&grid, 4), &band).unwrap();
        let sigma = 0.75;
        let direct = Multiplier::new(&grid, sigma).unwrap();
        let want = apply_multiplier(&f, direct.x_part(), Complex64::new(1.0, 0.0)).unwrap();
        let mut last = f64::INFINITY;
        for nodes in [80, 160, 320, 640] {
            let spec = QuadratureSpec::new(80.0, nodes);
            let got = balakrishnan_apply(&f, sigma, &spec).unwrap();
            let err = got.distance_l2(&want).unwrap() / want.l2();
            assert!(err < last, "nodes {nodes}: {err} !< {last}");
            last = err;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn resolvent_matches_per_mode_oracle() {
        let grid = make_grid(1, 1, 2.0, 8, 8).unwrap();
        let f = random_field(&grid, 6);
        let sigma = 0.5;
        let m = 1.3;
        let got = resolvent(&f, sigma, m).unwrap();
        // independent oracle: explicit per-mode division in a hand-rolled loop
        let c = ((PI * sigma).sin() / PI).sqrt();
        let hat = f.forward_transform().unwrap();
        let mut oracle = hat.clone();
        for (flat, v) in oracle.values_mut().iter_mut().enumerate() {
            let bin = grid.axis_bin(0, flat);
            let xi = grid.euclid_freqs()[bin];
            *v = hat.values()[flat] * c / (xi * xi + m);
        }
        let oracle = oracle.inverse_transform().unwrap();
        assert!(got.distance_l2(&oracle).unwrap() <= 1e-13 * f.l2());
        assert!(resolvent(&f, sigma, 0.0).is_err());
        assert!(resolvent(&f, sigma, -1.0).is_err());
    }

    #[test]
    fn resolvent_single_mode_amplitude() {
        // |k|² = 1, m = 1, σ = 1/2: factor c_σ/2 with c_σ = √(1/π)
        let grid = make_grid(1, 0, PI, 16, 0).unwrap();
        let wave = sample_function(&grid, |x, _| Complex64::from_polar(1.0, x[0]));
        let out = resolvent(&wave, 0.5, 1.0).unwrap();
        let expect = (1.0 / PI).sqrt() / 2.0;
        let ratio = out.values()[5] / wave.values()[5];
        assert!((ratio.re - expect).abs() < 1e-12 && ratio.im.abs() < 1e-12);
        // large-m limit: ‖u_m‖ ≈ c_σ ‖u‖ / m
        let big = resolvent(&wave, 0.5, 1e6).unwrap();
        let expect_norm = (1.0 / PI).sqrt() * wave.l2() / 1e6;
        assert!((big.l2() - expect_norm).abs() < 1e-5 * expect_norm);
    }

    #[test]
    fn cutoff_profile_shape() {
        assert_eq!(eta1(0.5), 1.0);
        assert_eq!(eta1(-1.0), 1.0);
        assert_eq!(eta1(2.0), 0.0);
        assert_eq!(eta1(5.0), 0.0);
        let mid = eta1(1.5);
        assert!(mid > 0.0 && mid < 1.0);
        assert_eq!(eta1(1.5), eta1(-1.5));
    }

    #[test]
    fn projector_telescoping_recovers_identity() {
        let grid = make_grid(1, 1, PI, 16, 16).unwrap();
        let f = random_field(&grid, 12);
        // P_{≤1} + Σ_{N=2,4,8} P_N = P_{≤8} = identity on this lattice
        let mut acc = lp_project(
            &f,
            &DyadicProjector::new(&grid, 1.0, ProjectorKind::LowPass).unwrap(),
        )
        .unwrap();
        for n in [2.0, 4.0, 8.0] {
            let piece = lp_project(
                &f,
                &DyadicProjector::new(&grid, n, ProjectorKind::Band).unwrap(),
            )
            .unwrap();
            acc.add_scaled(&piece, Complex64::new(1.0, 0.0)).unwrap();
        }
        assert!(acc.distance_l2(&f).unwrap() <= 1e-12 * f.l2());
    }

    #[test]
    fn separated_bands_annihilate() {
        let grid = make_grid(1, 1, PI, 32, 16).unwrap();
        let f = random_field(&grid, 13);
        let pn = DyadicProjector::new(&grid, 8.0, ProjectorKind::Band).unwrap();
        let pm = DyadicProjector::new(&grid, 2.0, ProjectorKind::Band).unwrap();
        let both = lp_project(&lp_project(&f, &pn).unwrap(), &pm).unwrap();
        assert!(both.l2() <= 1e-12 * f.l2());
        // corner mode |ξ_j| = N on every axis has band weight in [0, 1]
        let corner = 8 * grid.strides()[0] + 8 * grid.strides()[1];
        let w = pn.profile()[corner];
        assert!((0.0..=1.0).contains(&w), "corner weight {w}");
        assert!(DyadicProjector::new(&grid, 3.0, ProjectorKind::Band).is_err());
        assert!(DyadicProjector::new(&grid, 64.0, ProjectorKind::Band)
            .unwrap()
            .exceeds_nyquist());
    }

    #[test]
    fn high_pass_complements_low_pass() {
        let grid = make_grid(1, 0, 2.0, 16, 0).unwrap();
        let f = random_field(&grid, 14);
        let lo = lp_project(
            &f,
            &DyadicProjector::new(&grid, 4.0, ProjectorKind::LowPass).unwrap(),
        )
        .unwrap();
        let hi = lp_project(
            &f,
            &DyadicProjector::new(&grid, 4.0, ProjectorKind::HighPass).unwrap(),
        )
        .unwrap();
        let mut sum = lo.clone();
        sum.add_scaled(&hi, Complex64::new(1.0, 0.0)).unwrap();
        assert!(sum.distance_l2(&f).unwrap() <= 1e-12 * f.l2());
    }

    #[test]
    fn gradient_of_plane_wave() {
        let grid = make_grid(2, 0, PI, 16, 0).unwrap();
        let (k1, k2) = (3.0, -2.0);
        let wave = sample_function(&grid, |x, _| {
            Complex64::from_polar(1.0, k1 * x[0] + k2 * x[1])
        });
        let grads = gradient_x(&wave).unwrap();
        for (g, k) in grads.iter().zip([k1, k2]) {
            let expect = Complex64::new(0.0, k);
            for (a, b) in g.values().iter().zip(wave.values()) {
                assert!((a - expect * b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn spectral_gradient_beats_finite_differences() {
        // centered differences are the oracle; their order must come out ≈ 2
        // and the spectral gradient must sit below their error
        let l = 8.0;
        let analytic = |x: f64| -2.0 * x * (-x * x).exp();
        let mut fd_errs = Vec::new();
        let mut spec_errs = Vec::new();
        for nx in [64usize, 128] {
            let grid = make_grid(1, 0, l, nx, 0).unwrap();
            let f = sample_function(&grid, |x, _| Complex64::new((-x[0] * x[0]).exp(), 0.0));
            let h = grid.spacing_x();
            let vals = f.values();
            let mut fd_err: f64 = 0.0;
            for j in 0..nx {
                let plus = vals[(j + 1) % nx].re;
                let minus = vals[(j + nx - 1) % nx].re;
                let fd = (plus - minus) / (2.0 * h);
                fd_err = fd_err.max((fd - analytic(grid.axis_coord(0, j))).abs());
            }
            fd_errs.push(fd_err);
            let g = &gradient_x(&f).unwrap()[0];
            let mut sp_err: f64 = 0.0;
            for j in 0..nx {
                sp_err = sp_err.max((g.values()[j].re - analytic(grid.axis_coord(0, j))).abs());
            }
            spec_errs.push(sp_err);
        }
        let order = (fd_errs[0] / fd_errs[1]).log2();
        assert!((1.8..=2.2).contains(&order), "fd order {order}");
        assert!(spec_errs[0] <= fd_errs[0]);
        assert!(spec_errs[1] <= fd_errs[1]);
    }

    #[test]
    fn admissible_relation_examples() {
        let c = admissible_check(f64::INFINITY, 2.0, 0.0, 0.8, 3);
        assert!(c.admissible && c.residual.abs() <= 1e-12);

        let c = admissible_check(2.0, 6.0, 0.0, 1.0, 3);
        assert!(c.admissible, "residual {}", c.residual);

        // σ=0.75, d=3, q=2, γ=0 forces p=∞; any finite p fails
        for p in [2.0, 4.0, 100.0] {
            let c = admissible_check(p, 2.0, 0.0, 0.75, 3);
            assert!(!c.admissible);
        }
        let c = admissible_check(f64::INFINITY, 2.0, 0.0, 0.75, 3);
        assert!(c.admissible);
    }

    #[test]
    fn multiplier_tables_export_as_checkpoints() {
        let grid = make_grid(1, 1, 2.0, 8, 8).unwrap();
        let m = Multiplier::new(&grid, 0.6).unwrap();
        let mut buf = Vec::new();
        m.export_checkpoint(&mut buf, MultiplierPart::Total).unwrap();
        let (field, header) = crate::grid::read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(header.space, "spectral");
        for (v, &want) in field.values().iter().zip(m.total()) {
            assert_eq!(v.re, want);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn model_params_validation_and_window() {
        assert!(ModelParams::new(0.75, -1, 1.5, 3, 1).is_ok());
        assert!(ModelParams::new(0.0, -1, 1.5, 3, 1).is_err());
        assert!(ModelParams::new(1.1, -1, 1.5, 3, 1).is_err());
        assert!(ModelParams::new(0.75, 2, 1.5, 3, 1).is_err());
        assert!(ModelParams::new(0.75, -1, 0.0, 3, 1).is_err());

        // σ=0.6, d=3: window (0.8, 6/7); narrow but nonempty
        let p = ModelParams::new(0.6, -1, 0.83, 3, 1).unwrap();
        let (lo, hi) = p.window_bounds();
        assert!((lo - 0.8).abs() < 1e-12);
        assert!((hi - 2.4 / 2.8).abs() < 1e-12);
        assert!(p.subcritical_window());

        // σ=0.75, d=3: p=1.5 sits above the window (1, 1.2)
        let p = ModelParams::new(0.75, -1, 1.5, 3, 1).unwrap();
        assert!(!p.subcritical_window());
        assert!(p.radial_strichartz_ok());
        let p = ModelParams::new(0.5, -1, 1.0, 3, 1).unwrap();
        assert!(!p.radial_strichartz_ok());
    }
}
