//! Function-space norms, exponent bookkeeping, the scaling check and
//! empirical probes of the bilinear estimate.
//!
//! Space-time norms act on a [`FieldSeries`] sampled uniformly over a finite
//! window. The temporal transform is a DFT of the series multiplied by a
//! half-cosine taper on the first and last tenth of the window, so
//! `‖u‖²_{H^{s,θ}} = T·L⁴·Σ_{τ,k} Λ^{2s}Λ_−^{2θ}|ũ(τ,k)|²` reduces to the
//! tapered rectangle-rule space-time norm when `s = θ = 0`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{free_evolution, InitialData};
use crate::lattice::{dealias, pairwise_sum, GridSpec, ScalarField, VectorField};

/// Fraction of the window covered by each half of the taper.
pub const TAPER_FRACTION: f64 = 0.1;
pub const MAX_Q: f64 = 1024.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub s: f64,
    pub theta: f64,
    pub eps: f64,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl NormParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        let tol = 1e-12;
        if !(self.s > 1.0 && self.s < 2.0) {
            return fail(format!("s = {} outside (1, 2)", self.s));
        }
        if !(self.theta > 0.5 && self.theta < 0.75_f64.min(self.s / 2.0)) {
            return fail(format!("theta = {} outside (1/2, min(3/4, s/2))", self.theta));
        }
        let eps_max = 0.25 * (0.75 - self.theta).min(self.s / 2.0 - self.theta);
        if !(self.eps > 0.0 && self.eps < eps_max) {
            return fail(format!("eps = {} outside (0, {eps_max})", self.eps));
        }
        if (self.gamma - (self.theta - 0.5 - 3.0 * self.eps)).abs() > tol {
            return fail(format!("gamma = {} inconsistent", self.gamma));
        }
        if (1.0 / self.p - (1.5 - self.theta - 2.0 * self.eps)).abs() > tol {
            return fail(format!("p = {} inconsistent", self.p));
        }
        if (1.0 / self.r - (1.0 - self.theta - 2.0 * self.eps)).abs() > tol {
            return fail(format!("r = {} inconsistent", self.r));
        }
        if !(4.0 / self.q < q_bound(self.theta, self.p)) {
            return fail(format!("q = {} too small", self.q));
        }
        Ok(())
    }
}

fn q_bound(theta: f64, p: f64) -> f64 {
    (2.0 * theta - 1.0).min(1.0 - 1.0 / p)
}

/// Canonical exponents for regularity `s ∈ (1, 2)`.
pub fn select_parameters(s: f64) -> Result<NormParams> {
    if !(s > 1.0 && s < 2.0) {
        return Err(Error::InvalidParameter(format!("s = {s} outside (1, 2)")));
    }
    let theta = 0.5 * (0.5 + 0.75_f64.min(s / 2.0));
    let eps = 0.5 * 0.25 * (0.75 - theta).min(s / 2.0 - theta);
    let gamma = theta - 0.5 - 3.0 * eps;
    let p = 1.0 / (1.5 - theta - 2.0 * eps);
    let r = 1.0 / (1.0 - theta - 2.0 * eps);
    let bound = q_bound(theta, p);
    let mut q = 1.0;
    while !(4.0 / q < bound) {
        q *= 2.0;
        if q > MAX_Q {
            return Err(Error::InvalidParameter(format!(
                "s = {s} needs q > {MAX_Q}"
            )));
        }
    }
    let np = NormParams {
        s,
        theta,
        eps,
        gamma,
        p,
        q,
        r,
    };
    np.validate()?;
    Ok(np)
}

/// `(L⁴ Σ w(ξ)|f̂|²)^{1/2}` for a radial weight.
fn weighted_norm<W: Fn(f64) -> f64>(f: &ScalarField, weight: W) -> f64 {
    let grid = f.grid();
    let table = grid.modes();
    let spec = f.spectral();
    let terms: Vec<f64> = spec
        .values()
        .iter()
        .enumerate()
        .map(|(i, c)| weight(table.xi_sq[i]) * c.norm_sqr())
        .collect();
    (grid.volume() * pairwise_sum(&terms)).sqrt()
}

/// `‖Λ^s f‖_{L²}`.
pub fn sobolev_norm(f: &ScalarField, s: f64) -> f64 {
    weighted_norm(f, |xi_sq| (1.0 + xi_sq).powf(s))
}

/// `‖(−Δ)^{α/2} f‖_{L²}`; the zero mode is excluded.
pub fn hdot_norm(f: &ScalarField, alpha: f64) -> f64 {
    weighted_norm(f, |xi_sq| if xi_sq == 0.0 { 0.0 } else { xi_sq.powf(alpha) })
}

pub fn vector_sobolev_norm(x: &VectorField, s: f64) -> f64 {
    x.components()
        .iter()
        .map(|c| sobolev_norm(c, s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `(∫|f|^p dx)^{1/p}` by the grid rule; `p = ∞` is the grid maximum.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("L^p needs p >= 1, got {p}")));
    }
    let pos = f.position();
    let abs: Vec<f64> = pos.values().iter().map(|v| v.norm()).collect();
    Ok(lp_of_samples(&abs, f.grid().cell_volume(), p))
}

/// Scaled evaluation so large exponents cannot overflow.
fn lp_of_samples(abs: &[f64], cell: f64, p: f64) -> f64 {
    let max = abs.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return max;
    }
    let terms: Vec<f64> = abs.iter().map(|v| (v / max).powf(p)).collect();
    max * (cell * pairwise_sum(&terms)).powf(1.0 / p)
}

/// Uniformly sampled fields `u(t_0 + i·dt)`.
#[derive(Clone, Debug)]
pub struct FieldSeries {
    pub dt: f64,
    pub fields: Vec<ScalarField>,
}

impl FieldSeries {
    pub fn new(dt: f64, fields: Vec<ScalarField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidParameter("empty field series".into()));
        }
        if !(dt > 0.0) && fields.len() > 1 {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        let grid = *fields[0].grid();
        if fields.iter().any(|f| *f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { dt, fields })
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn window(&self) -> f64 {
        self.dt * self.fields.len() as f64
    }
}

/// Half-cosine taper weights for `len` samples.
pub fn taper(len: usize) -> Vec<f64> {
    if len < 3 {
        return vec![1.0; len];
    }
    let last = (len - 1) as f64;
    (0..len)
        .map(|i| {
            let u = i as f64 / last;
            let edge = u.min(1.0 - u);
            if edge < TAPER_FRACTION {
                0.5 * (1.0 - (std::f64::consts::PI * edge / TAPER_FRACTION).cos())
            } else {
                1.0
            }
        })
        .collect()
}

/// Temporal frequencies `τ_m = 2πm/T`, `m ∈ [−N/2, N/2)`, in DFT order.
fn temporal_frequencies(len: usize, window: f64) -> Vec<f64> {
    (0..len)
        .map(|m| {
            let signed = if m < len.div_ceil(2) {
                m as i64
            } else {
                m as i64 - len as i64
            };
            2.0 * std::f64::consts::PI * signed as f64 / window
        })
        .collect()
}

/// Space-time coefficients `ũ(τ_m, k)`, indexed `[m][k]`.
fn space_time_coefficients(series: &FieldSeries) -> Vec<Vec<Complex64>> {
    let nt = series.len();
    let nk = series.grid().len();
    let w = taper(nt);
    let spectra: Vec<ScalarField> = series.fields.iter().map(|f| f.spectral()).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nt);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); nk]; nt];
    let mut line = vec![Complex64::new(0.0, 0.0); nt];
    for k in 0..nk {
        for t in 0..nt {
            line[t] = spectra[t].values()[k] * w[t];
        }
        fft.process(&mut line);
        for m in 0..nt {
            out[m][k] = line[m] / nt as f64;
        }
    }
    out
}

/// `Λ_−^α(τ, ξ) = (1 + (τ² − |ξ|²)²/(1 + τ² + |ξ|²))^{α/2}`.
pub fn lambda_minus(tau: f64, xi_sq: f64, alpha: f64) -> f64 {
    let t2 = tau * tau;
    (1.0 + (t2 - xi_sq).powi(2) / (1.0 + t2 + xi_sq)).powf(0.5 * alpha)
}

/// `Λ_+^α(τ, ξ) = (1 + τ² + |ξ|²)^{α/2}`.
pub fn lambda_plus(tau: f64, xi_sq: f64, alpha: f64) -> f64 {
    (1.0 + tau * tau + xi_sq).powf(0.5 * alpha)
}

/// `‖Λ^s Λ_−^θ u‖_{L²_{t,x}}` over the tapered window.
pub fn wave_sobolev_norm(series: &FieldSeries, s: f64, theta: f64) -> f64 {
    let grid = *series.grid();
    let table = grid.modes();
    let coeffs = space_time_coefficients(series);
    let taus = temporal_frequencies(series.len(), series.window());
    let terms: Vec<f64> = coeffs
        .iter()
        .zip(&taus)
        .map(|(row, &tau)| {
            let t: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let xs = table.xi_sq[k];
                    (1.0 + xs).powf(s) * lambda_minus(tau, xs, 2.0 * theta) * c.norm_sqr()
                })
                .collect();
            pairwise_sum(&t)
        })
        .collect();
    (series.window() * grid.volume() * pairwise_sum(&terms)).sqrt()
}

/// `‖u‖_{H^{s,θ}} + ‖∂_tu‖_{H^{s−1,θ}}`.
pub fn wave_energy_norm(u: &FieldSeries, ut: &FieldSeries, s: f64, theta: f64) -> f64 {
    wave_sobolev_norm(u, s, theta) + wave_sobolev_norm(ut, s - 1.0, theta)
}

/// `‖u‖_{L^p_t L^q_x}` with the trapezoid rule in time.
pub fn mixed_norm(series: &FieldSeries, p: f64, q: f64) -> Result<f64> {
    let inner: Vec<f64> = series
        .fields
        .iter()
        .map(|f| lp_norm(f, q))
        .collect::<Result<_>>()?;
    Ok(time_lp(&inner, series.dt, p))
}

fn time_lp(values: &[f64], dt: f64, p: f64) -> f64 {
    if values.len() == 1 {
        return values[0];
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return max;
    }
    let last = values.len() - 1;
    let terms: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            w * (v / max).powf(p)
        })
        .collect();
    max * (dt * pairwise_sum(&terms)).powf(1.0 / p)
}

/// Mixed norm of the field whose Fourier coefficients are `|û|`.
pub fn mixed_norm_abs_fourier(series: &FieldSeries, p: f64, q: f64) -> Result<f64> {
    let fields: Vec<ScalarField> = series
        .fields
        .iter()
        .map(|f| {
            let spec = f.spectral();
            let vals = spec.values().iter().map(|c| Complex64::new(c.norm(), 0.0)).collect();
            ScalarField::from_spectral(*f.grid(), vals, false).expect("grid length")
        })
        .collect();
    mixed_norm(&FieldSeries::new(series.dt, fields)?, p, q)
}

/// `E_k = ‖a‖_{H^{s+k}} + ‖b‖_{H^{s+k−1}} + ‖φ₀‖_{H^{s+k}} + ‖φ₁‖_{H^{s+k−1}}`.
pub fn data_norm(data: &InitialData, s: f64, k: u32) -> f64 {
    let sk = s + k as f64;
    vector_sobolev_norm(&data.a, sk)
        + vector_sobolev_norm(&data.b, sk - 1.0)
        + sobolev_norm(&data.phi0, sk)
        + sobolev_norm(&data.phi1, sk - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Sobolev { s: f64 },
    Hdot { alpha: f64 },
    Lp { p: f64 },
    Mixed { p: f64, q: f64 },
    WaveSobolev { s: f64, theta: f64 },
    DataNorm { s: f64, k: u32 },
}

#[derive(Clone, Copy)]
pub enum NormInput<'a> {
    Field(&'a ScalarField),
    Series(&'a FieldSeries),
    Data(&'a InitialData),
}

/// Dispatches a norm by kind, rejecting inputs of the wrong shape.
pub fn norm(input: NormInput<'_>, kind: NormKind) -> Result<f64> {
    let mismatch = |what: &str| {
        Err(Error::InvalidParameter(format!(
            "norm kind {kind:?} cannot be applied to {what}"
        )))
    };
    match (input, kind) {
        (NormInput::Field(f), NormKind::Sobolev { s }) => Ok(sobolev_norm(f, s)),
        (NormInput::Field(f), NormKind::Hdot { alpha }) => Ok(hdot_norm(f, alpha)),
        (NormInput::Field(f), NormKind::Lp { p }) => lp_norm(f, p),
        (NormInput::Series(u), NormKind::Mixed { p, q }) => mixed_norm(u, p, q),
        (NormInput::Series(u), NormKind::WaveSobolev { s, theta }) => {
            Ok(wave_sobolev_norm(u, s, theta))
        }
        (NormInput::Data(d), NormKind::DataNorm { s, k }) => Ok(data_norm(d, s, k)),
        (NormInput::Field(_), _) => mismatch("a single field"),
        (NormInput::Series(_), _) => mismatch("a field series"),
        (NormInput::Data(_), _) => mismatch("initial data"),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub exponent: f64,
    pub relative_error: f64,
}

/// `λ f(λx)` realized on the box shrunk by `λ`: same mode indices, so each
/// wavevector is multiplied by `λ`, amplitude multiplied by `λ`.
pub fn rescale(f: &ScalarField, lambda: u32) -> Result<ScalarField> {
    if lambda < 2 {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 2")));
    }
    let grid = f.grid();
    let small = GridSpec::new(grid.n(), grid.box_length() / lambda as f64)?;
    let vals = f.spectral().values().iter().map(|c| c * lambda as f64).collect();
    ScalarField::from_spectral(small, vals, f.is_real())
}

/// Both sides of `‖λf(λx)‖_{Ḣ^s} = λ^{s−1}‖f‖_{Ḣ^s}`.
pub fn scaling_check(f: &ScalarField, s: f64, lambda: u32) -> Result<ScalingCheck> {
    let scaled = rescale(f, lambda)?;
    let lhs = hdot_norm(&scaled, s);
    let rhs = hdot_norm(f, s);
    let exponent = s - 1.0;
    let predicted = (lambda as f64).powf(exponent) * rhs;
    let relative_error = if predicted > 0.0 {
        (lhs - predicted).abs() / predicted
    } else {
        lhs
    };
    Ok(ScalingCheck {
        lhs,
        rhs,
        exponent,
        relative_error,
    })
}

/// Band limit (per axis) of the probe ensembles, half the Nyquist index at `n = 8`.
pub const PROBE_BAND: i64 = 2;
pub const PROBE_SAMPLES_IN_TIME: usize = 32;
pub const PROBE_WINDOW: f64 = 1.0;

/// Random coefficients on `[−B, B]⁴` in canonical order, so the same seed
/// gives the same function on every grid that resolves the band.
pub fn band_limited_field(
    grid: GridSpec,
    rng: &mut ChaCha8Rng,
    band: i64,
    decay: f64,
) -> Result<ScalarField> {
    if 2 * band >= grid.n() as i64 {
        return Err(Error::InvalidParameter(format!(
            "band {band} not resolved by n = {}",
            grid.n()
        )));
    }
    let mut vals = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in band_modes(band) {
        let amp: f64 = (1.0 + k.iter().map(|c| (c * c) as f64).sum::<f64>()).powf(-0.5 * decay);
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        vals[grid.mode_index(k)?] = Complex64::new(re, im) * amp;
    }
    ScalarField::from_spectral(grid, vals, false)
}

pub(crate) fn band_modes(band: i64) -> impl Iterator<Item = [i64; 4]> {
    let r = -band..=band;
    let r1 = r.clone();
    r.flat_map(move |a| {
        let r2 = r1.clone();
        r1.clone().flat_map(move |b| {
            let r3 = r2.clone();
            r2.clone()
                .flat_map(move |c| r3.clone().map(move |d| [a, b, c, d]))
        })
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioStatistics {
    pub ratios: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub skipped: usize,
    /// Ten equal bins on `[0, max]`.
    pub histogram: Vec<usize>,
}

impl RatioStatistics {
    pub fn from_ratios(ratios: Vec<f64>, skipped: usize) -> Self {
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let mean = if ratios.is_empty() {
            0.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        let mut histogram = vec![0; 10];
        for r in &ratios {
            let bin = if max > 0.0 {
                ((r / max) * 10.0).floor() as usize
            } else {
                0
            };
            histogram[bin.min(9)] += 1;
        }
        Self {
            ratios,
            max,
            mean,
            skipped,
            histogram,
        }
    }
}

/// `‖Λ^{s−1}(−Δ)^{−1}(uv)‖_{L^p_tL^q_x} / (‖u‖_{H^{s,θ}}‖v‖_{H^{s−1,θ}})`, or
/// `None` when the denominator vanishes.
pub fn bilinear_ratio(u: &FieldSeries, v: &FieldSeries, np: &NormParams) -> Result<Option<f64>> {
    let denom =
        wave_sobolev_norm(u, np.s, np.theta) * wave_sobolev_norm(v, np.s - 1.0, np.theta);
    if denom == 0.0 {
        return Ok(None);
    }
    let s = np.s;
    let products = u
        .fields
        .iter()
        .zip(&v.fields)
        .map(|(a, b)| {
            let prod = dealias::product(a, b);
            crate::spectral::apply_symbol(&prod, true, |_, xi_sq| {
                if xi_sq == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new((1.0 + xi_sq).powf(0.5 * (s - 1.0)) / xi_sq, 0.0)
                }
            })
        })
        .collect();
    let num = mixed_norm(&FieldSeries::new(u.dt, products)?, np.p, np.q)?;
    Ok(Some(num / denom))
}

/// Free waves `u(t) = cos(t|∇|)f + sin(t|∇|)/|∇| g` sampled on the probe window.
pub fn free_wave_series(f: &ScalarField, g: &ScalarField, samples: usize, window: f64) -> FieldSeries {
    let dt = window / (samples - 1) as f64;
    let fields = (0..samples)
        .map(|i| free_evolution(f, g, i as f64 * dt))
        .collect();
    FieldSeries { dt, fields }
}

/// Ensemble statistics of [`bilinear_ratio`] on seeded free waves.
pub fn bilinear_ratio_probe(
    seed: u64,
    count: usize,
    np: &NormParams,
    n: usize,
) -> Result<RatioStatistics> {
    np.validate()?;
    let grid = GridSpec::periodic(n)?;
    let mut ratios = Vec::with_capacity(count);
    let mut skipped = 0;
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
        let fields: Vec<ScalarField> = (0..4)
            .map(|_| band_limited_field(grid, &mut rng, PROBE_BAND, 2.0))
            .collect::<Result<_>>()?;
        let u = free_wave_series(&fields[0], &fields[1], PROBE_SAMPLES_IN_TIME, PROBE_WINDOW);
        let v = free_wave_series(&fields[2], &fields[3], PROBE_SAMPLES_IN_TIME, PROBE_WINDOW);
        match bilinear_ratio(&u, &v, np)? {
            Some(r) => ratios.push(r),
            None => skipped += 1,
        }
    }
    Ok(RatioStatistics::from_ratios(ratios, skipped))
}

/// Largest `‖f‖_{L⁴}/‖f‖_{Ḣ¹}` over a seeded mean-zero ensemble.
pub fn l4_hdot1_constant(seed: u64, count: usize, n: usize) -> Result<f64> {
    let grid = GridSpec::periodic(n)?;
    let mut best: f64 = 0.0;
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let f = band_limited_field(grid, &mut rng, PROBE_BAND, 1.0)?.without_mean();
        let h = hdot_norm(&f, 1.0);
        if h > 0.0 {
            best = best.max(lp_norm(&f, 4.0)? / h);
        }
    }
    Ok(best)
}

#[cfg(test)]
pub(crate) fn zero_series(grid: GridSpec, samples: usize, dt: f64) -> FieldSeries {
    FieldSeries {
        dt,
        fields: vec![ScalarField::zeros(grid, crate::lattice::Domain::Spectral, false); samples],
    }
}
