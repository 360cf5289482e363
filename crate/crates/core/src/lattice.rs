//! The discrete periodic 4-torus and the fields that live on it.
//!
//! Fourier convention: a field is the trigonometric series
//! `f(x) = Σ_k f̂_k exp(i ξ_k·x)` with `ξ_k = 2πk/L` and `k ∈ [-n/2, n/2)^4`,
//! sampled at `x = (L/n)·j`. With this convention the discrete Plancherel
//! identity reads `Σ_x |f(x)|² (L/n)^4 = L^4 Σ_k |f̂_k|²`, so continuum norm
//! formulas transcribe directly.
//!
//! Nonlinear products are formed on a grid refined by two per axis (enough
//! for exact cubic products) and truncated back; see [`dealias`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIM: usize = 4;

/// Geometry of the discrete torus `(ℝ/Lℤ)^4` sampled with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n_per_axis: usize,
    box_length: f64,
}

impl GridSpec {
    pub fn new(n_per_axis: usize, box_length: f64) -> Result<Self> {
        if n_per_axis < 4 || !n_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_per_axis must be a power of two >= 4, got {n_per_axis}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive and finite, got {box_length}"
            )));
        }
        Ok(Self {
            n_per_axis,
            box_length,
        })
    }

    /// Grid with the default box `L = 2π`, so that wavevectors are integers.
    pub fn periodic(n_per_axis: usize) -> Result<Self> {
        Self::new(n_per_axis, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Total number of samples, `n^4`.
    pub fn len(&self) -> usize {
        self.n_per_axis.pow(DIM as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(DIM as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(DIM as i32)
    }

    pub(crate) fn half(&self) -> i64 {
        (self.n_per_axis / 2) as i64
    }

    /// Same box, `factor` times more samples per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.n_per_axis * factor, self.box_length)
    }

    /// Flat storage index of the Fourier mode `k`.
    pub fn mode_index(&self, k: [i64; 4]) -> Result<usize> {
        let half = self.half();
        if k.iter().any(|&c| c < -half || c >= half) {
            return Err(Error::ModeOutOfRange { index: k, half });
        }
        let n = self.n_per_axis as i64;
        Ok(k.iter()
            .fold(0usize, |acc, &c| acc * self.n_per_axis + c.rem_euclid(n) as usize))
    }

    /// Signed mode indices stored at flat position `flat`.
    pub fn mode_of(&self, flat: usize) -> [i64; 4] {
        let n = self.n_per_axis;
        let half = self.half();
        let mut out = [0i64; 4];
        let mut rest = flat;
        for axis in (0..DIM).rev() {
            let c = (rest % n) as i64;
            rest /= n;
            out[axis] = if c >= half { c - n as i64 } else { c };
        }
        out
    }

    /// Sample coordinates at flat position `flat` (row-major over x¹..x⁴).
    pub fn position(&self, flat: usize) -> [f64; 4] {
        let n = self.n_per_axis;
        let h = self.spacing();
        let mut out = [0.0; 4];
        let mut rest = flat;
        for axis in (0..DIM).rev() {
            out[axis] = (rest % n) as f64 * h;
            rest /= n;
        }
        out
    }

    pub fn wavevector(&self, k: [i64; 4]) -> Result<[f64; 4]> {
        wavevector(k, self)
    }

    pub(crate) fn modes(&self) -> Arc<ModeTable> {
        ModeTable::for_grid(self)
    }
}

/// `ξ = 2π·k/L` for a retained mode index.
pub fn wavevector(k: [i64; 4], grid: &GridSpec) -> Result<[f64; 4]> {
    let half = grid.half();
    if k.iter().any(|&c| c < -half || c >= half) {
        return Err(Error::ModeOutOfRange { index: k, half });
    }
    let scale = 2.0 * PI / grid.box_length();
    Ok(k.map(|c| scale * c as f64))
}

/// Per-grid table of the symbol wavevectors. Components at the unpaired
/// Nyquist index are zeroed so that every multiplier maps real fields to
/// real fields and the symbol calculus stays self-consistent.
pub(crate) struct ModeTable {
    pub xi: Vec<[f64; 4]>,
    pub xi_sq: Vec<f64>,
    pub nyquist_free: Vec<bool>,
}

impl ModeTable {
    fn for_grid(grid: &GridSpec) -> Arc<ModeTable> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<ModeTable>>>> = OnceLock::new();
        let key = (grid.n(), grid.box_length().to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("mode table cache poisoned");
        guard
            .entry(key)
            .or_insert_with(|| Arc::new(ModeTable::build(grid)))
            .clone()
    }

    fn build(grid: &GridSpec) -> ModeTable {
        let half = grid.half();
        let scale = 2.0 * PI / grid.box_length();
        let len = grid.len();
        let mut xi = Vec::with_capacity(len);
        let mut xi_sq = Vec::with_capacity(len);
        let mut nyquist_free = Vec::with_capacity(len);
        for flat in 0..len {
            let k = grid.mode_of(flat);
            let v = k.map(|c| if c == -half { 0.0 } else { scale * c as f64 });
            xi_sq.push(v.iter().map(|c| c * c).sum());
            xi.push(v);
            nyquist_free.push(k.iter().all(|&c| c != -half));
        }
        ModeTable {
            xi,
            xi_sq,
            nyquist_free,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Position,
    Spectral,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Position => "position",
            Domain::Spectral => "spectral",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A sampled field on the torus, in either representation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<Complex64>,
    domain: Domain,
    real: bool,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec, domain: Domain, real: bool) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            domain,
            real,
        }
    }

    pub fn from_position(grid: GridSpec, values: Vec<Complex64>, real: bool) -> Result<Self> {
        Self::from_values(grid, values, Domain::Position, real)
    }

    pub fn from_spectral(grid: GridSpec, values: Vec<Complex64>, real: bool) -> Result<Self> {
        Self::from_values(grid, values, Domain::Spectral, real)
    }

    pub fn from_real_position(grid: GridSpec, values: &[f64]) -> Result<Self> {
        Self::from_position(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            true,
        )
    }

    fn from_values(
        grid: GridSpec,
        values: Vec<Complex64>,
        domain: Domain,
        real: bool,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            domain,
            real,
        })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(grid: GridSpec, real: bool, f: F) -> Self
    where
        F: Fn([f64; 4]) -> Complex64,
    {
        let values = (0..grid.len())
            .map(|i| {
                let v = f(grid.position(i));
                if real {
                    Complex64::new(v.re, 0.0)
                } else {
                    v
                }
            })
            .collect();
        Self {
            grid,
            values,
            domain: Domain::Position,
            real,
        }
    }

    /// `amplitude · exp(i ξ_k·x)`, stored spectrally.
    pub fn plane_wave(grid: GridSpec, k: [i64; 4], amplitude: Complex64) -> Result<Self> {
        let mut f = Self::zeros(grid, Domain::Spectral, false);
        let idx = grid.mode_index(k)?;
        f.values[idx] = amplitude;
        Ok(f)
    }

    /// Real cosine mode `amplitude · cos(ξ_k·x + phase)`.
    pub fn cosine_wave(grid: GridSpec, k: [i64; 4], amplitude: f64, phase: f64) -> Result<Self> {
        let mut f = Self::zeros(grid, Domain::Spectral, true);
        let c = Complex64::from_polar(0.5 * amplitude, phase);
        let neg = k.map(|c| -c);
        let i = grid.mode_index(k)?;
        let j = grid.mode_index(neg)?;
        if i == j {
            f.values[i] += Complex64::new(amplitude * phase.cos(), 0.0);
        } else {
            f.values[i] += c;
            f.values[j] += c.conj();
        }
        Ok(f)
    }

    pub fn constant(grid: GridSpec, value: Complex64) -> Self {
        let mut f = Self::zeros(grid, Domain::Spectral, value.im == 0.0);
        f.values[0] = value;
        f
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Exact discrete Fourier series transform; `self` must be in the
    /// domain opposite to the requested direction.
    pub fn transform(&self, direction: Direction) -> Result<ScalarField> {
        let (expected, target) = match direction {
            Direction::Forward => (Domain::Position, Domain::Spectral),
            Direction::Inverse => (Domain::Spectral, Domain::Position),
        };
        if self.domain != expected {
            return Err(Error::DomainMismatch {
                expected: expected.name(),
                found: self.domain.name(),
            });
        }
        let mut values = self.values.clone();
        fft4(&mut values, self.grid.n(), direction);
        if direction == Direction::Inverse && self.real {
            for v in &mut values {
                v.im = 0.0;
            }
        }
        Ok(ScalarField {
            grid: self.grid,
            values,
            domain: target,
            real: self.real,
        })
    }

    /// Spectral copy (transforming if needed).
    pub fn spectral(&self) -> ScalarField {
        match self.domain {
            Domain::Spectral => self.clone(),
            Domain::Position => self
                .transform(Direction::Forward)
                .expect("domain checked"),
        }
    }

    /// Position-domain copy (transforming if needed).
    pub fn position(&self) -> ScalarField {
        match self.domain {
            Domain::Position => self.clone(),
            Domain::Spectral => self
                .transform(Direction::Inverse)
                .expect("domain checked"),
        }
    }

    pub fn into_spectral(self) -> ScalarField {
        match self.domain {
            Domain::Spectral => self,
            Domain::Position => self.spectral(),
        }
    }

    /// Fourier coefficient `f̂_k`.
    pub fn coefficient(&self, k: [i64; 4]) -> Result<Complex64> {
        let idx = self.grid.mode_index(k)?;
        Ok(match self.domain {
            Domain::Spectral => self.values[idx],
            Domain::Position => self.spectral().values[idx],
        })
    }

    /// Spatial mean (the zero-mode coefficient).
    pub fn mean(&self) -> Complex64 {
        match self.domain {
            Domain::Spectral => self.values[0],
            Domain::Position => {
                let re: Vec<f64> = self.values.iter().map(|v| v.re).collect();
                let im: Vec<f64> = self.values.iter().map(|v| v.im).collect();
                Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) / self.grid.len() as f64
            }
        }
    }

    pub fn without_mean(&self) -> ScalarField {
        let mut f = self.spectral();
        f.values[0] = Complex64::new(0.0, 0.0);
        f
    }

    /// Largest modulus among the Nyquist coefficients.
    pub fn nyquist_content(&self) -> f64 {
        let f = self.spectral();
        let table = self.grid.modes();
        f.values
            .iter()
            .zip(&table.nyquist_free)
            .filter(|(_, &free)| !free)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    }

    /// `‖f‖²_{L²}` over the torus.
    pub fn l2_norm_squared(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        let s = pairwise_sum(&sq);
        match self.domain {
            Domain::Spectral => s * self.grid.volume(),
            Domain::Position => s * self.grid.cell_volume(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.position()
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest position-domain imaginary part.
    pub fn max_abs_imag(&self) -> f64 {
        let p = match self.domain {
            Domain::Position => self.clone(),
            Domain::Spectral => {
                let mut v = self.values.clone();
                fft4(&mut v, self.grid.n(), Direction::Inverse);
                ScalarField {
                    values: v,
                    domain: Domain::Position,
                    ..self.clone()
                }
            }
        };
        p.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// Real part as a real field.
    pub fn re(&self) -> ScalarField {
        let p = self.position();
        ScalarField {
            values: p.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect(),
            real: true,
            ..p
        }
        .into_spectral()
    }

    /// Imaginary part as a real field.
    pub fn im(&self) -> ScalarField {
        let p = self.position();
        ScalarField {
            values: p.values.iter().map(|v| Complex64::new(v.im, 0.0)).collect(),
            real: true,
            ..p
        }
        .into_spectral()
    }

    /// Complex conjugate.
    pub fn conj(&self) -> ScalarField {
        let p = self.position();
        ScalarField {
            values: p.values.iter().map(|v| v.conj()).collect(),
            ..p
        }
        .into_spectral()
    }

    pub fn scale(&self, c: Complex64) -> ScalarField {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out.real = self.real && c.im == 0.0;
        out
    }

    /// Marks the field as unconstrained complex.
    pub fn as_complex(mut self) -> ScalarField {
        self.real = false;
        self
    }

    /// Declares the field real, dropping any imaginary position part.
    pub fn into_real(self) -> ScalarField {
        let domain = self.domain;
        let mut p = self.position();
        for v in &mut p.values {
            v.im = 0.0;
        }
        p.real = true;
        match domain {
            Domain::Position => p,
            Domain::Spectral => p.spectral(),
        }
    }

    /// `self + alpha·other`, in the domain of `self`.
    pub fn axpy(&self, alpha: Complex64, other: &ScalarField) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let rhs = match (self.domain, other.domain) {
            (a, b) if a == b => std::borrow::Cow::Borrowed(other),
            (Domain::Spectral, _) => std::borrow::Cow::Owned(other.spectral()),
            (Domain::Position, _) => std::borrow::Cow::Owned(other.position()),
        };
        let values = self
            .values
            .iter()
            .zip(rhs.values.iter())
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            values,
            domain: self.domain,
            real: self.real && other.real && alpha.im == 0.0,
        })
    }

    /// Applies a per-mode map to the spectral coefficients.
    pub(crate) fn map_modes<F>(&self, real: bool, f: F) -> ScalarField
    where
        F: Fn(usize, Complex64) -> Complex64,
    {
        let s = self.spectral();
        let values = s.values.iter().enumerate().map(|(i, &c)| f(i, c)).collect();
        ScalarField {
            grid: self.grid,
            values,
            domain: Domain::Spectral,
            real,
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(Complex64::new(1.0, 0.0), rhs)
            .expect("fields on the same grid")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(Complex64::new(-1.0, 0.0), rhs)
            .expect("fields on the same grid")
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Mul<Complex64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: Complex64) -> ScalarField {
        self.scale(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// The spatial vector potential `(A_1, …, A_4)`: four real fields on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: [ScalarField; 4],
}

impl VectorField {
    pub fn new(components: [ScalarField; 4]) -> Result<Self> {
        let g = *components[0].grid();
        if components.iter().any(|c| *c.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            components: std::array::from_fn(|_| ScalarField::zeros(grid, Domain::Spectral, true)),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[ScalarField; 4] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &ScalarField {
        &self.components[j]
    }

    pub fn into_components(self) -> [ScalarField; 4] {
        self.components
    }

    pub fn map<F>(&self, f: F) -> VectorField
    where
        F: Fn(&ScalarField) -> ScalarField,
    {
        VectorField {
            components: std::array::from_fn(|j| f(&self.components[j])),
        }
    }

    pub fn zip_with<F>(&self, other: &VectorField, f: F) -> VectorField
    where
        F: Fn(&ScalarField, &ScalarField) -> ScalarField,
    {
        VectorField {
            components: std::array::from_fn(|j| f(&self.components[j], &other.components[j])),
        }
    }

    pub fn spectral(&self) -> VectorField {
        self.map(ScalarField::spectral)
    }

    /// `(Σ_j ‖A_j‖²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(ScalarField::l2_norm_squared)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(ScalarField::is_zero)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &VectorField {
    type Output = VectorField;
    fn mul(self, rhs: f64) -> VectorField {
        self.map(|c| c * rhs)
    }
}

/// Sum with a fixed pairwise reduction tree, independent of thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn plan(n: usize, direction: Direction) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let forward = direction == Direction::Forward;
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// In-place 4-D transform of an `n^4` row-major array.
///
/// Forward returns the series coefficients (scaled by `1/n^4`); inverse
/// evaluates the series at the sample points. Each pass transforms the
/// contiguous axis and rotates the axis order by one, so four passes
/// restore the original layout.
pub(crate) fn fft4(data: &mut Vec<Complex64>, n: usize, direction: Direction) {
    fft4_banded(data, n, direction, None);
}

/// [`fft4`] restricted to a cube of modes `|k| <= band` on every axis.
///
/// Inverse: the input must vanish outside the cube. Forward: only outputs
/// inside the cube are computed; the remaining entries are unspecified.
pub(crate) fn fft4_banded(
    data: &mut Vec<Complex64>,
    n: usize,
    direction: Direction,
    band: Option<usize>,
) {
    let len = data.len();
    debug_assert_eq!(len, n.pow(4));
    let fft = plan(n, direction);
    let rows = len / n;
    let in_band = |i: usize| band.map_or(true, |b| i <= b || i + b >= n);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for pass in 0..DIM {
        // Lines are indexed by three digits, slowest first. Inverse: the
        // trailing untransformed digits must lie in the band. Forward: the
        // leading transformed digits must.
        let constrained: [bool; 3] = std::array::from_fn(|d| match (band, direction) {
            (None, _) => false,
            (Some(_), Direction::Inverse) => d >= pass,
            (Some(_), Direction::Forward) => d < pass,
        });
        let runs: Vec<std::ops::Range<usize>> = match band {
            Some(b) if constrained[2] => vec![0..b + 1, n - b..n],
            _ => vec![0..n],
        };
        data.par_chunks_mut(n * n * n).enumerate().for_each_init(
            || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            |scratch, (outer, slab)| {
                if constrained[0] && !in_band(outer) {
                    return;
                }
                for (inner, lines) in slab.chunks_mut(n * n).enumerate() {
                    if constrained[1] && !in_band(inner) {
                        continue;
                    }
                    for run in &runs {
                        fft.process_with_scratch(&mut lines[run.start * n..run.end * n], scratch);
                    }
                }
            },
        );
        transpose(data, &mut buf, rows, n);
        std::mem::swap(data, &mut buf);
    }
    if direction == Direction::Forward {
        let scale = 1.0 / len as f64;
        data.par_chunks_mut(rows)
            .for_each(|c| c.iter_mut().for_each(|v| *v *= scale));
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`, in cache-sized tiles.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 16;
    let strip = TILE.min(cols);
    dst.par_chunks_mut(rows * strip)
        .enumerate()
        .for_each(|(block, out)| {
            let c0 = block * strip;
            let width = out.len() / rows;
            for r0 in (0..rows).step_by(TILE) {
                let r1 = (r0 + TILE).min(rows);
                for dc in 0..width {
                    let c = c0 + dc;
                    let row = &mut out[dc * rows..(dc + 1) * rows];
                    for r in r0..r1 {
                        row[r] = src[r * cols + c];
                    }
                }
            }
        });
}

/// Exact products of band-limited fields via a grid refined by two per axis.
pub mod dealias {
    use super::*;

    /// Fine grid used for products of fields on `grid`.
    pub fn fine_grid(grid: &GridSpec) -> GridSpec {
        grid.refined(2).expect("refining a valid grid")
    }

    fn fine_index(k: &[i64; 4], fine_n: usize) -> usize {
        k.iter().fold(0usize, |acc, &m| {
            acc * fine_n + m.rem_euclid(fine_n as i64) as usize
        })
    }

    /// Places the coefficients of `grid` on the refined spectrum and
    /// evaluates the series at the fine sample points.
    fn spread(grid: &GridSpec, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = grid.n();
        let half = grid.half();
        let fine_n = 2 * n;
        let mut fine = vec![Complex64::new(0.0, 0.0); fine_n.pow(4)];
        for (flat, &c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let k = grid.mode_of(flat);
            let targets: [Vec<(i64, f64)>; 4] = std::array::from_fn(|a| {
                if k[a] == -half {
                    vec![(-half, 0.5), (half, 0.5)]
                } else {
                    vec![(k[a], 1.0)]
                }
            });
            for &(k0, w0) in &targets[0] {
                for &(k1, w1) in &targets[1] {
                    for &(k2, w2) in &targets[2] {
                        for &(k3, w3) in &targets[3] {
                            let idx = fine_index(&[k0, k1, k2, k3], fine_n);
                            fine[idx] += c * (w0 * w1 * w2 * w3);
                        }
                    }
                }
            }
        }
        fft4_banded(&mut fine, fine_n, Direction::Inverse, Some(half as usize));
        fine
    }

    /// Samples of `f` on the refined grid. Nyquist coefficients are split
    /// evenly between `±n/2` so real fields stay real.
    pub fn to_fine(f: &ScalarField) -> Vec<Complex64> {
        let spec = f.spectral();
        let mut fine = spread(f.grid(), spec.values());
        if f.is_real() {
            for v in &mut fine {
                v.im = 0.0;
            }
        }
        fine
    }

    /// [`to_fine`] of two real fields with one transform.
    pub fn to_fine_pair(u: &ScalarField, v: &ScalarField) -> (Vec<Complex64>, Vec<Complex64>) {
        debug_assert!(u.is_real() && v.is_real());
        let (us, vs) = (u.spectral(), v.spectral());
        let coeffs: Vec<Complex64> = us
            .values()
            .iter()
            .zip(vs.values())
            .map(|(a, b)| a + Complex64::new(-b.im, b.re))
            .collect();
        let fine = spread(u.grid(), &coeffs);
        let re = fine.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        let im = fine.iter().map(|z| Complex64::new(z.im, 0.0)).collect();
        (re, im)
    }

    /// Truncates fine-grid samples back to `grid`, discarding the Nyquist
    /// band. Returns a spectral field.
    pub fn from_fine(grid: &GridSpec, mut fine: Vec<Complex64>, real: bool) -> ScalarField {
        let fine_n = 2 * grid.n();
        if real {
            for v in &mut fine {
                v.im = 0.0;
            }
        }
        fft4_banded(&mut fine, fine_n, Direction::Forward, Some(grid.n() / 2));
        let table = grid.modes();
        let values = (0..grid.len())
            .map(|flat| {
                if !table.nyquist_free[flat] {
                    return Complex64::new(0.0, 0.0);
                }
                fine[fine_index(&grid.mode_of(flat), fine_n)]
            })
            .collect();
        ScalarField {
            grid: *grid,
            values,
            domain: Domain::Spectral,
            real,
        }
    }

    /// [`from_fine`] of two real sample sets with one transform. Only the
    /// real parts of `p` and `q` are used.
    pub fn from_fine_pair(
        grid: &GridSpec,
        p: &[Complex64],
        q: &[Complex64],
    ) -> (ScalarField, ScalarField) {
        let fine_n = 2 * grid.n();
        let mut fine: Vec<Complex64> =
            p.iter().zip(q).map(|(a, b)| Complex64::new(a.re, b.re)).collect();
        fft4_banded(&mut fine, fine_n, Direction::Forward, Some(grid.n() / 2));
        let table = grid.modes();
        let mut pv = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut qv = vec![Complex64::new(0.0, 0.0); grid.len()];
        for flat in 0..grid.len() {
            if !table.nyquist_free[flat] {
                continue;
            }
            let k = grid.mode_of(flat);
            let z = fine[fine_index(&k, fine_n)];
            let zm = fine[fine_index(&k.map(|m| -m), fine_n)].conj();
            pv[flat] = (z + zm) * 0.5;
            qv[flat] = (z - zm) * Complex64::new(0.0, -0.5);
        }
        let field = |values| ScalarField {
            grid: *grid,
            values,
            domain: Domain::Spectral,
            real: true,
        };
        (field(pv), field(qv))
    }

    /// `∫ g dx` for fine-grid samples `g` (exact for products up to cubic).
    pub fn integrate(grid: &GridSpec, fine: &[f64]) -> f64 {
        pairwise_sum(fine) * fine_grid(grid).cell_volume()
    }

    /// Pointwise product of two fields, truncated to the grid.
    pub fn product(u: &ScalarField, v: &ScalarField) -> ScalarField {
        let a = to_fine(u);
        let b = to_fine(v);
        let prod = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        from_fine(u.grid(), prod, u.is_real() && v.is_real())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(grid: GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len())
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ScalarField::from_position(grid, v, false).unwrap()
    }

    #[test]
    fn paired_transforms_match_single_ones() {
        let g = GridSpec::new(8, 3.0).unwrap();
        let u = random_field(g, 11).into_real().spectral();
        let v = random_field(g, 12).into_real().spectral();
        let (fu, fv) = dealias::to_fine_pair(&u, &v);
        let (su, sv) = (dealias::to_fine(&u), dealias::to_fine(&v));
        let diff = |a: &[Complex64], b: &[Complex64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        };
        assert!(diff(&fu, &su) < 1e-13);
        assert!(diff(&fv, &sv) < 1e-13);
        let p: Vec<Complex64> = fu.iter().zip(&fv).map(|(a, b)| a * b).collect();
        let q: Vec<Complex64> = fu.iter().map(|a| a * a).collect();
        let (pp, pq) = dealias::from_fine_pair(&g, &p, &q);
        let sp = dealias::from_fine(&g, p, true);
        let sq = dealias::from_fine(&g, q, true);
        assert!((&pp - &sp).l2_norm() < 1e-13 * sp.l2_norm());
        assert!((&pq - &sq).l2_norm() < 1e-13 * sq.l2_norm());
        assert!(pp.is_real() && pq.is_real());
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(GridSpec::periodic(2).is_err());
        assert!(GridSpec::periodic(6).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        assert!(GridSpec::periodic(8).is_ok());
    }

    #[test]
    fn mode_index_roundtrip() {
        let g = GridSpec::periodic(8).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.mode_index(g.mode_of(flat)).unwrap(), flat);
        }
        assert!(g.mode_index([4, 0, 0, 0]).is_err());
        assert!(g.mode_index([-5, 0, 0, 0]).is_err());
    }

    #[test]
    fn wavevector_examples() {
        let g = GridSpec::periodic(8).unwrap();
        assert_eq!(wavevector([0, 0, 0, 0], &g).unwrap(), [0.0; 4]);
        let xi = wavevector([1, 0, 0, 0], &g).unwrap();
        assert!((xi[0] - 1.0).abs() < 1e-15);
        let g = GridSpec::new(8, PI).unwrap();
        let xi = wavevector([1, 1, 0, 0], &g).unwrap();
        assert!((xi[0] - 2.0).abs() < 1e-15 && (xi[1] - 2.0).abs() < 1e-15);
        assert_eq!(xi[2], 0.0);
        assert!(wavevector([0, 4, 0, 0], &g).is_err());
    }

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = GridSpec::periodic(4).unwrap();
        let f = ScalarField::from_fn(g, true, |_| c(1.0, 0.0));
        let s = f.transform(Direction::Forward).unwrap();
        assert!((s.values()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(s.values()[1..].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn basis_function_has_single_coefficient() {
        let g = GridSpec::periodic(8).unwrap();
        let k = [1, -2, 3, 0];
        let xi = g.wavevector(k).unwrap();
        let f = ScalarField::from_fn(g, false, |x| {
            let ph: f64 = (0..4).map(|a| xi[a] * x[a]).sum();
            Complex64::from_polar(1.0, ph)
        });
        let s = f.transform(Direction::Forward).unwrap();
        let idx = g.mode_index(k).unwrap();
        for (i, v) in s.values().iter().enumerate() {
            let expect = if i == idx { 1.0 } else { 0.0 };
            assert!((v - c(expect, 0.0)).norm() < 1e-13, "mode {i}: {v}");
        }
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let g = GridSpec::periodic(4).unwrap();
        let f = ScalarField::zeros(g, Domain::Spectral, true);
        assert!(matches!(
            f.transform(Direction::Forward),
            Err(Error::DomainMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_and_plancherel() {
        for n in [4, 8, 16] {
            let g = GridSpec::new(n, 3.7).unwrap();
            let f = random_field(g, n as u64);
            let s = f.transform(Direction::Forward).unwrap();
            let back = s.transform(Direction::Inverse).unwrap();
            let err = (&back - &f).l2_norm() / f.l2_norm();
            assert!(err < 1e-13, "n={n}: round trip {err}");
            let lhs = f.l2_norm_squared();
            let rhs = s.l2_norm_squared();
            assert!(((lhs - rhs) / lhs).abs() < 1e-13, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn transform_is_linear() {
        let g = GridSpec::periodic(8).unwrap();
        let f = random_field(g, 1);
        let h = random_field(g, 2);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
        let combo = f.scale(a).axpy(b, &h).unwrap();
        let lhs = combo.transform(Direction::Forward).unwrap();
        let rhs = f
            .transform(Direction::Forward)
            .unwrap()
            .scale(a)
            .axpy(b, &h.transform(Direction::Forward).unwrap())
            .unwrap();
        assert!((&lhs - &rhs).l2_norm() / lhs.l2_norm() < 1e-13);
    }

    #[test]
    fn real_fields_stay_real() {
        let g = GridSpec::periodic(8).unwrap();
        let f = random_field(g, 3).re();
        assert!(f.is_real());
        assert!(f.max_abs_imag() <= 1e-13 * f.max_abs());
    }

    #[test]
    fn dealiased_cubic_product_is_exact() {
        let g = GridSpec::periodic(8).unwrap();
        let u = ScalarField::plane_wave(g, [3, 0, -3, 1], c(1.0, 0.0)).unwrap();
        let v = ScalarField::plane_wave(g, [2, 1, 0, 0], c(0.5, 0.0)).unwrap();
        let w = ScalarField::plane_wave(g, [-3, 1, 2, 0], c(2.0, 0.0)).unwrap();
        let (fu, fv, fw) = (dealias::to_fine(&u), dealias::to_fine(&v), dealias::to_fine(&w));
        let triple = (0..fu.len()).map(|i| fu[i] * fv[i] * fw[i]).collect();
        let p = dealias::from_fine(&g, triple, false);
        // (3+2-3, 0+1+1, -3+0+2, 1) = (2, 2, -1, 1)
        let idx = g.mode_index([2, 2, -1, 1]).unwrap();
        for (i, val) in p.values().iter().enumerate() {
            let expect = if i == idx { 1.0 } else { 0.0 };
            assert!((val - c(expect, 0.0)).norm() < 1e-13);
        }
        // (3+2, ...) leaves the band: truncated, not aliased.
        let q = dealias::product(&u, &v.scale(c(2.0, 0.0)));
        assert!(q.l2_norm() < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
    }
}
