//! Time evolution of the Coulomb-gauge wave system
//!
//! ```text
//! □A_j = 𝓜_j(A, φ),   □φ = 𝓝(A, φ),   □ = −∂_t² + Δ,
//! ```
//!
//! by classical RK4 on the first-order system or by Picard iteration of the
//! Duhamel formula. `𝓜_j = 2R^k(−Δ)^{−1/2}Q_jk(Reφ, Imφ) + 𝒫(|φ|²A)_j` and
//! `𝓝 = 𝓝₁ + … + 𝓝₆` with
//!
//! ```text
//! 𝓝₁ = −iQ_jk(φ, (−Δ)^{−1/2}[R^jA^k − R^kA^j])   𝓝₄ = −A₀²φ
//! 𝓝₂ = 2iA₀∂_tφ                                  𝓝₅ = |A|²φ
//! 𝓝₃ = iB₀φ                                      𝓝₆ = m²φ
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{sobolev_norm, vector_sobolev_norm, FieldSeries};
use crate::elliptic::{self, EllipticSolveReport, ScreenedOperator, SolveOptions};
use crate::error::{Error, Result};
use crate::lattice::{dealias, Domain, GridSpec, ScalarField, VectorField, DIM};
use crate::spectral;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default bound on `‖div A‖_{L²}` along an evolution.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;
/// Elliptic tolerance used inside time steppers.
pub const STEPPER_ELLIPTIC_TOLERANCE: f64 = 1e-12;
/// CFL factor: `dt ≤ CFL_FACTOR · L/n`.
pub const CFL_FACTOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub mass: f64,
}

impl PhysParams {
    pub fn new(mass: f64) -> Result<Self> {
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::InvalidParameter(format!("mass = {mass} must be finite and >= 0")));
        }
        Ok(Self { mass })
    }

    pub fn massless() -> Self {
        Self { mass: 0.0 }
    }
}

/// Cauchy data `(A, ∂_tA, φ, ∂_tφ)(0) = (a, b, φ₀, φ₁)`.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub a: VectorField,
    pub b: VectorField,
    pub phi0: ScalarField,
    pub phi1: ScalarField,
}

impl InitialData {
    pub fn new(a: VectorField, b: VectorField, phi0: ScalarField, phi1: ScalarField) -> Result<Self> {
        let grid = *a.grid();
        if *b.grid() != grid || *phi0.grid() != grid || *phi1.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let real = |x: &VectorField| x.components().iter().all(ScalarField::is_real);
        if !real(&a) || !real(&b) {
            return Err(Error::InvalidParameter("gauge potential data must be real".into()));
        }
        Ok(Self {
            a: a.spectral(),
            b: b.spectral(),
            phi0: phi0.spectral().as_complex(),
            phi1: phi1.spectral().as_complex(),
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let z = ScalarField::zeros(grid, Domain::Spectral, false);
        Self {
            a: VectorField::zeros(grid),
            b: VectorField::zeros(grid),
            phi0: z.clone(),
            phi1: z,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.a.grid()
    }

    /// `max(‖div a‖, ‖div b‖)`.
    pub fn divergence_residual(&self) -> f64 {
        spectral::divergence(&self.a)
            .l2_norm()
            .max(spectral::divergence(&self.b).l2_norm())
    }
}

#[derive(Clone, Debug)]
pub struct State {
    pub t: f64,
    pub a: VectorField,
    pub at: VectorField,
    pub phi: ScalarField,
    pub phit: ScalarField,
    /// Last computed `A₀`, reused as a Krylov warm start.
    pub(crate) a0_hint: Option<ScalarField>,
}

impl State {
    pub fn new(
        t: f64,
        a: VectorField,
        at: VectorField,
        phi: ScalarField,
        phit: ScalarField,
    ) -> Result<Self> {
        let d = InitialData::new(a, at, phi, phit)?;
        Ok(Self::from_data(&d, t))
    }

    pub fn from_data(data: &InitialData, t: f64) -> Self {
        Self {
            t,
            a: data.a.clone(),
            at: data.b.clone(),
            phi: data.phi0.clone(),
            phit: data.phi1.clone(),
            a0_hint: None,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.a.grid()
    }

    pub fn data(&self) -> InitialData {
        InitialData {
            a: self.a.clone(),
            b: self.at.clone(),
            phi0: self.phi.clone(),
            phi1: self.phit.clone(),
        }
    }

    pub fn a0(&self, tol: f64) -> Result<EllipticSolveReport> {
        elliptic::compute_a0_with(
            &self.phi,
            &self.phit,
            &SolveOptions::with_tol(tol).warm_start(self.a0_hint.clone()),
        )
    }

    pub fn b0(&self) -> ScalarField {
        elliptic::compute_b0(&self.a, &self.phi)
    }

    pub fn divergence_residual(&self) -> f64 {
        spectral::divergence(&self.a).l2_norm()
    }

    /// `self + h·d` for the first-order system.
    fn advance(&self, d: &Derivative, h: f64) -> State {
        State {
            t: self.t + h,
            a: &self.a + &(&d.a * h),
            at: &self.at + &(&d.at * h),
            phi: &self.phi + &(&d.phi * h),
            phit: &self.phit + &(&d.phit * h),
            a0_hint: d.a0.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub params: PhysParams,
    pub dt: f64,
    pub monitor: RhsMonitor,
}

/// Statistics gathered at every right-hand-side evaluation of a solve.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct RhsMonitor {
    pub evaluations: usize,
    /// Largest `‖∂^j𝓜_j‖_{L²}`.
    pub max_m_divergence: f64,
}

impl RhsMonitor {
    fn record(&mut self, m: &VectorField) {
        self.evaluations += 1;
        self.max_m_divergence = self.max_m_divergence.max(spectral::divergence(m).l2_norm());
    }
}

impl Trajectory {
    pub fn new(states: Vec<State>, params: PhysParams, dt: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter("trajectory needs at least one state".into()));
        }
        for w in states.windows(2) {
            let step = w[1].t - w[0].t;
            if !(step > 0.0) || (step - dt).abs() > 1e-12 * dt.max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "non-uniform trajectory spacing {step} vs dt {dt}"
                )));
            }
        }
        Ok(Self {
            states,
            params,
            dt,
            monitor: RhsMonitor::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        self.states[0].grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("non-empty trajectory")
    }

    /// One scalar component as a uniformly sampled series.
    pub fn series<F: Fn(&State) -> ScalarField>(&self, f: F) -> FieldSeries {
        FieldSeries {
            dt: self.dt,
            fields: self.states.iter().map(f).collect(),
        }
    }
}

/// Fine-grid samples shared by `𝓜` and `𝓝`.
struct FineState {
    grid: GridSpec,
    phi: Vec<Complex64>,
    dphi: [Vec<Complex64>; 4],
    phit: Vec<Complex64>,
    a: [Vec<Complex64>; 4],
    weight: Vec<f64>,
}

impl FineState {
    fn new(s: &State) -> Self {
        let phi = dealias::to_fine(&s.phi);
        let dphi = std::array::from_fn(|j| dealias::to_fine(&spectral::derivative(&s.phi, j)));
        let phit = dealias::to_fine(&s.phit);
        let (a0, a1) = dealias::to_fine_pair(s.a.component(0), s.a.component(1));
        let (a2, a3) = dealias::to_fine_pair(s.a.component(2), s.a.component(3));
        let a = [a0, a1, a2, a3];
        let weight = phi.iter().map(|v| v.norm_sqr()).collect();
        Self {
            grid: *s.grid(),
            phi,
            dphi,
            phit,
            a,
            weight,
        }
    }

    fn project(&self, vals: Vec<Complex64>, real: bool) -> ScalarField {
        dealias::from_fine(&self.grid, vals, real)
    }
}

fn is_zero_samples(v: &[Complex64]) -> bool {
    v.iter().all(|c| c.re == 0.0 && c.im == 0.0)
}

fn m_from_fine(fs: &FineState) -> VectorField {
    let grid = fs.grid;
    let table = grid.modes();
    let len = fs.phi.len();
    let zero = || ScalarField::zeros(grid, Domain::Spectral, true);

    // 𝓜_{j,1} = 2 Σ_k R^k(−Δ)^{−1/2} Q_jk(Reφ, Imφ).
    let mut m1: [Vec<Complex64>; 4] =
        std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); grid.len()]);
    if !is_zero_samples(&fs.phi) {
        let pairs: Vec<(usize, usize)> =
            (0..DIM).flat_map(|j| ((j + 1)..DIM).map(move |k| (j, k))).collect();
        let q_samples = |j: usize, k: usize| -> Vec<Complex64> {
            (0..len)
                .map(|i| {
                    let (uj, vj) = (fs.dphi[j][i].re, fs.dphi[j][i].im);
                    let (uk, vk) = (fs.dphi[k][i].re, fs.dphi[k][i].im);
                    Complex64::new(uj * vk - uk * vj, 0.0)
                })
                .collect()
        };
        for two in pairs.chunks(2) {
            let [(j1, k1), (j2, k2)] = [two[0], two[1]];
            let (q1, q2) = dealias::from_fine_pair(&grid, &q_samples(j1, k1), &q_samples(j2, k2));
            for ((j, k), q) in [((j1, k1), q1), ((j2, k2), q2)] {
                for (i, c) in q.values().iter().enumerate() {
                    let xi_sq = table.xi_sq[i];
                    if xi_sq == 0.0 {
                        continue;
                    }
                    let xi = &table.xi[i];
                    // Q_kj = −Q_jk.
                    m1[j][i] += 2.0 * I * (xi[k] / xi_sq) * c;
                    m1[k][i] -= 2.0 * I * (xi[j] / xi_sq) * c;
                }
            }
        }
    }
    let m1 = VectorField::new(std::array::from_fn(|j| {
        ScalarField::from_spectral(grid, std::mem::take(&mut m1[j]), true).expect("grid length")
    }))
    .expect("shared grid");

    // 𝓜_{j,2} = 𝒫(|φ|²A)_j.
    let wa: [ScalarField; 4] = if is_zero_samples(&fs.phi) {
        std::array::from_fn(|_| zero())
    } else {
        let samples = |j: usize| -> Vec<Complex64> {
            (0..len)
                .map(|i| Complex64::new(fs.weight[i] * fs.a[j][i].re, 0.0))
                .collect()
        };
        let (w0, w1) = dealias::from_fine_pair(&grid, &samples(0), &samples(1));
        let (w2, w3) = dealias::from_fine_pair(&grid, &samples(2), &samples(3));
        [w0, w1, w2, w3]
    };
    let m2 = spectral::leray_project(&VectorField::new(wa).expect("shared grid"));
    &m1 + &m2
}

/// `𝓜(A, φ)`.
pub fn rhs_m(s: &State) -> VectorField {
    m_from_fine(&FineState::new(s))
}

/// The six terms of `𝓝` with the elliptic variables they used.
#[derive(Clone, Debug)]
pub struct NonlinearTerms {
    pub terms: [ScalarField; 6],
    pub a0: EllipticSolveReport,
    pub b0: ScalarField,
}

impl NonlinearTerms {
    pub fn total(&self) -> ScalarField {
        Self::sum(&self.terms)
    }

    fn sum(terms: &[ScalarField; 6]) -> ScalarField {
        let mut acc = terms[0].clone();
        for t in &terms[1..] {
            acc = &acc + t;
        }
        acc
    }
}

/// `𝓝` term by term, or summed on the fine grid with a single projection.
enum Assembled {
    Terms([ScalarField; 6]),
    Total(ScalarField),
}

fn n_from_fine(
    s: &State,
    fs: &FineState,
    p: &PhysParams,
    opts: &SolveOptions,
    split: bool,
) -> Result<(Assembled, EllipticSolveReport, ScalarField)> {
    let grid = fs.grid;
    let len = fs.phi.len();
    let op = ScreenedOperator::from_fine_weight(grid, fs.weight.clone());
    let source = fs.project(
        (0..len)
            .map(|i| Complex64::new(-(fs.phi[i] * fs.phit[i].conj()).im, 0.0))
            .collect(),
        true,
    );
    let mut a0 = op.solve(&source, opts).map_err(|e| Error::Elliptic {
        term: "A0 (N2, N4)",
        source: Box::new(e),
    })?;
    elliptic::attach_bound(&mut a0, &s.phit);
    let b0 = elliptic::b0_from_fine(&grid, &fs.phi, &fs.dphi, &fs.a);
    let mass = s.phi.scale(Complex64::new(p.mass * p.mass, 0.0));

    if is_zero_samples(&fs.phi) {
        let zero = ScalarField::zeros(grid, Domain::Spectral, false);
        let out = if split {
            Assembled::Terms(std::array::from_fn(|_| zero.clone()))
        } else {
            Assembled::Total(zero)
        };
        return Ok((out, a0, b0));
    }

    // Σ_{j,k} Q_jk(φ, Ψ_jk) = 2 Σ_j ∂_jφ V_j, V_j = ∂^kΨ_jk.
    let v = spectral::leray_project(&s.a);
    let v_mean_free: [ScalarField; 4] = std::array::from_fn(|j| v.component(j).without_mean());
    let (v0, v1) = dealias::to_fine_pair(&v_mean_free[0], &v_mean_free[1]);
    let (v2, v3) = dealias::to_fine_pair(&v_mean_free[2], &v_mean_free[3]);
    let v_fine = [v0, v1, v2, v3];
    let (a0_fine, b0_fine) = dealias::to_fine_pair(&a0.solution, &b0);

    let term = |i: usize| -> [Complex64; 5] {
        let phi = fs.phi[i];
        let grad_v: Complex64 = (0..DIM).map(|j| fs.dphi[j][i] * v_fine[j][i].re).sum();
        let a0v = a0_fine[i].re;
        let a_sq: f64 = (0..DIM).map(|j| fs.a[j][i].re * fs.a[j][i].re).sum();
        [
            -2.0 * I * grad_v,
            2.0 * I * a0v * fs.phit[i],
            I * b0_fine[i].re * phi,
            -(a0v * a0v) * phi,
            a_sq * phi,
        ]
    };
    let out = if split {
        let mut t: [Vec<Complex64>; 5] = std::array::from_fn(|_| Vec::with_capacity(len));
        for i in 0..len {
            for (dst, v) in t.iter_mut().zip(term(i)) {
                dst.push(v);
            }
        }
        let [t1, t2, t3, t4, t5] = t;
        Assembled::Terms([
            fs.project(t1, false),
            fs.project(t2, false),
            fs.project(t3, false),
            fs.project(t4, false),
            fs.project(t5, false),
            mass,
        ])
    } else {
        let sum = (0..len).map(|i| term(i).iter().sum()).collect();
        Assembled::Total(&fs.project(sum, false) + &mass)
    };
    Ok((out, a0, b0))
}

/// Term-by-term `𝓝₁ … 𝓝₆`.
pub fn rhs_n_terms(s: &State, p: &PhysParams, opts: &SolveOptions) -> Result<NonlinearTerms> {
    let (out, a0, b0) = n_from_fine(s, &FineState::new(s), p, opts, true)?;
    let Assembled::Terms(terms) = out else {
        unreachable!("split assembly returns terms")
    };
    Ok(NonlinearTerms { terms, a0, b0 })
}

/// `𝓝(A, φ)`.
pub fn rhs_n(s: &State, p: &PhysParams, tol: f64) -> Result<ScalarField> {
    let opts = SolveOptions::with_tol(tol).warm_start(s.a0_hint.clone());
    Ok(rhs_total(s, p, &opts)?.1)
}

/// `(𝓜, 𝓝)` sharing one set of fine-grid samples.
pub fn rhs(
    s: &State,
    p: &PhysParams,
    opts: &SolveOptions,
) -> Result<(VectorField, NonlinearTerms)> {
    let fs = FineState::new(s);
    let m = m_from_fine(&fs);
    let (out, a0, b0) = n_from_fine(s, &fs, p, opts, true)?;
    let Assembled::Terms(terms) = out else {
        unreachable!("split assembly returns terms")
    };
    Ok((m, NonlinearTerms { terms, a0, b0 }))
}

/// `(𝓜, 𝓝, A₀)` with `𝓝` summed before projection.
fn rhs_total(
    s: &State,
    p: &PhysParams,
    opts: &SolveOptions,
) -> Result<(VectorField, ScalarField, EllipticSolveReport)> {
    let fs = FineState::new(s);
    let m = m_from_fine(&fs);
    let (out, a0, _) = n_from_fine(s, &fs, p, opts, false)?;
    let n = match out {
        Assembled::Total(n) => n,
        Assembled::Terms(t) => NonlinearTerms::sum(&t),
    };
    Ok((m, n, a0))
}

/// `(u, ∂_tu)(t)` for the free wave with data `(f, g)`.
pub fn free_evolution_pair(f: &ScalarField, g: &ScalarField, t: f64) -> (ScalarField, ScalarField) {
    let grid = *f.grid();
    let table = grid.modes();
    let fs = f.spectral();
    let gs = g.spectral();
    let real = f.is_real() && g.is_real();
    let mut u = Vec::with_capacity(grid.len());
    let mut ut = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let w = table.xi_sq[i].sqrt();
        let (fc, gc) = (fs.values()[i], gs.values()[i]);
        if w == 0.0 {
            u.push(fc + gc * t);
            ut.push(gc);
        } else {
            let (sn, cs) = (w * t).sin_cos();
            u.push(fc * cs + gc * (sn / w));
            ut.push(-fc * (w * sn) + gc * cs);
        }
    }
    (
        ScalarField::from_spectral(grid, u, real).expect("grid length"),
        ScalarField::from_spectral(grid, ut, real).expect("grid length"),
    )
}

/// `cos(t|∇|)f + sin(t|∇|)/|∇| g`, with `t·g` on the zero mode.
pub fn free_evolution(f: &ScalarField, g: &ScalarField, t: f64) -> ScalarField {
    free_evolution_pair(f, g, t).0
}

fn free_vector(a: &VectorField, b: &VectorField, t: f64) -> (VectorField, VectorField) {
    let pairs: [(ScalarField, ScalarField); 4] =
        std::array::from_fn(|j| free_evolution_pair(a.component(j), b.component(j), t));
    let [p0, p1, p2, p3] = pairs;
    (
        VectorField::new([p0.0, p1.0, p2.0, p3.0]).expect("shared grid"),
        VectorField::new([p0.1, p1.1, p2.1, p3.1]).expect("shared grid"),
    )
}

/// Free evolution of full Cauchy data.
pub fn free_state(data: &InitialData, t: f64) -> State {
    let (a, at) = free_vector(&data.a, &data.b, t);
    let (phi, phit) = free_evolution_pair(&data.phi0, &data.phi1, t);
    State {
        t,
        a,
        at,
        phi,
        phit,
        a0_hint: None,
    }
}

/// Largest admissible step, `CFL_FACTOR · L/n`.
pub fn cfl_limit(grid: &GridSpec) -> f64 {
    CFL_FACTOR * grid.spacing()
}

struct Derivative {
    a: VectorField,
    at: VectorField,
    phi: ScalarField,
    phit: ScalarField,
    a0: Option<ScalarField>,
}

fn derivative(
    s: &State,
    p: &PhysParams,
    tol: f64,
    linearized: bool,
    monitor: &mut RhsMonitor,
) -> Result<Derivative> {
    let lap_a = s.a.map(spectral::laplacian);
    let lap_phi = spectral::laplacian(&s.phi);
    if linearized {
        let mass = s.phi.scale(Complex64::new(p.mass * p.mass, 0.0));
        return Ok(Derivative {
            a: s.at.clone(),
            at: lap_a,
            phi: s.phit.clone(),
            phit: &lap_phi - &mass,
            a0: None,
        });
    }
    let opts = SolveOptions::with_tol(tol).warm_start(s.a0_hint.clone());
    let (m, n, a0) = rhs_total(s, p, &opts)?;
    monitor.record(&m);
    Ok(Derivative {
        a: s.at.clone(),
        at: &lap_a - &m,
        phi: s.phit.clone(),
        phit: &lap_phi - &n,
        a0: Some(a0.solution),
    })
}

/// One classical RK4 step of `(A, ∂_tA, φ, ∂_tφ)`.
pub fn step_rk4(s: &State, p: &PhysParams, dt: f64) -> Result<State> {
    step_rk4_with_tol(s, p, dt, STEPPER_ELLIPTIC_TOLERANCE)
}

pub fn step_rk4_with_tol(s: &State, p: &PhysParams, dt: f64, tol: f64) -> Result<State> {
    step(s, p, dt, tol, false, &mut RhsMonitor::default())
}

fn step(
    s: &State,
    p: &PhysParams,
    dt: f64,
    tol: f64,
    linearized: bool,
    monitor: &mut RhsMonitor,
) -> Result<State> {
    let limit = cfl_limit(s.grid());
    if !(dt > 0.0) || dt > limit {
        return Err(Error::CflViolation { dt, suggested: limit });
    }
    let k1 = derivative(s, p, tol, linearized, monitor)?;
    let k2 = derivative(&s.advance(&k1, 0.5 * dt), p, tol, linearized, monitor)?;
    let k3 = derivative(&s.advance(&k2, 0.5 * dt), p, tol, linearized, monitor)?;
    let k4 = derivative(&s.advance(&k3, dt), p, tol, linearized, monitor)?;
    let w = dt / 6.0;
    let comb_v = |x: &VectorField, f: fn(&Derivative) -> &VectorField| {
        let sum = &(&(f(&k1) + &(f(&k2) * 2.0)) + &(f(&k3) * 2.0)) + f(&k4);
        x + &(&sum * w)
    };
    let comb_s = |x: &ScalarField, f: fn(&Derivative) -> &ScalarField| {
        let sum = &(&(f(&k1) + &(f(&k2) * 2.0)) + &(f(&k3) * 2.0)) + f(&k4);
        x + &(&sum * w)
    };
    Ok(State {
        t: s.t + dt,
        a: comb_v(&s.a, |d| &d.a),
        at: comb_v(&s.at, |d| &d.at),
        phi: comb_s(&s.phi, |d| &d.phi),
        phit: comb_s(&s.phit, |d| &d.phit),
        a0_hint: k1.a0,
    })
}

/// Cumulative `∫₀^{t_i} g` on uniform samples: Simpson over an even number
/// of intervals, a 3/8 panel closing odd counts, and a third-order start.
pub fn cumulative_simpson(g: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = g.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = (g[0] + g[1]) * (0.5 * h);
        return out;
    }
    out[1] = (g[0] * 5.0 + g[1] * 8.0 - g[2]) * (h / 12.0);
    let mut even = vec![Complex64::new(0.0, 0.0); n];
    for i in (2..n).step_by(2) {
        even[i] = even[i - 2] + (g[i - 2] + g[i - 1] * 4.0 + g[i]) * (h / 3.0);
        out[i] = even[i];
    }
    for i in (3..n).step_by(2) {
        out[i] = even[i - 3]
            + (g[i - 3] + g[i - 2] * 3.0 + g[i - 1] * 3.0 + g[i]) * (3.0 * h / 8.0);
    }
    out
}

/// `W_T F` and `∂_t W_T F` at every sample of `F`, where `W_T F` solves
/// `□u = F` with vanishing data:
/// `u(t) = −∫₀ᵗ sin((t−s)|ξ|)/|ξ| F̂(s) ds`.
pub fn duhamel_series(f: &FieldSeries) -> (Vec<ScalarField>, Vec<ScalarField>) {
    let grid = *f.grid();
    let table = grid.modes();
    let nt = f.len();
    let h = f.dt;
    let real = f.fields.iter().all(ScalarField::is_real);
    let spectra: Vec<ScalarField> = f.fields.iter().map(|x| x.spectral()).collect();
    let mut u = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; nt];
    let mut ut = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; nt];
    let mut cos_line = vec![Complex64::new(0.0, 0.0); nt];
    let mut sin_line = vec![Complex64::new(0.0, 0.0); nt];
    for k in 0..grid.len() {
        if spectra.iter().all(|x| x.values()[k] == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let w = table.xi_sq[k].sqrt();
        for i in 0..nt {
            let t = i as f64 * h;
            let c = spectra[i].values()[k];
            if w == 0.0 {
                cos_line[i] = c;
                sin_line[i] = c * t;
            } else {
                let (sn, cs) = (w * t).sin_cos();
                cos_line[i] = c * cs;
                sin_line[i] = c * sn;
            }
        }
        let ci = cumulative_simpson(&cos_line, h);
        let si = cumulative_simpson(&sin_line, h);
        for i in 0..nt {
            let t = i as f64 * h;
            if w == 0.0 {
                // Kernel (t − s).
                u[i][k] = -(ci[i] * t - si[i]);
                ut[i][k] = -ci[i];
            } else {
                let (sn, cs) = (w * t).sin_cos();
                u[i][k] = -(ci[i] * sn - si[i] * cs) / w;
                ut[i][k] = -(ci[i] * cs + si[i] * sn);
            }
        }
    }
    let wrap = |rows: Vec<Vec<Complex64>>| -> Vec<ScalarField> {
        rows.into_iter()
            .map(|v| ScalarField::from_spectral(grid, v, real).expect("grid length"))
            .collect()
    };
    (wrap(u), wrap(ut))
}

/// `W_T F` evaluated at a stored sample time.
pub fn duhamel_wt(f: &FieldSeries, t: f64) -> Result<ScalarField> {
    let t_max = f.dt * (f.len() - 1) as f64;
    let idx = (t / f.dt).round();
    if !(t >= 0.0) || t > t_max * (1.0 + 1e-12) || (idx * f.dt - t).abs() > 1e-9 * f.dt {
        return Err(Error::TimeOutOfRange { t, t_max });
    }
    let idx = idx as usize;
    let truncated = FieldSeries {
        dt: f.dt,
        fields: f.fields[..=idx].to_vec(),
    };
    let (mut u, _) = duhamel_series(&truncated);
    Ok(u.pop().expect("non-empty"))
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub iterate_count: usize,
    pub omega: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    /// `sup_t` L² residual of the integral equations at the returned iterate.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct PicardOptions {
    pub max_m: usize,
    pub tol: f64,
    /// Regularity of the `ω` norm.
    pub s: f64,
    pub elliptic_tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            max_m: 30,
            tol: 1e-10,
            s: 1.25,
            elliptic_tol: STEPPER_ELLIPTIC_TOLERANCE,
        }
    }
}

fn sample_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need T >= 0 and dt > 0, got T = {t_final}, dt = {dt}"
        )));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * dt.max(t_final) {
        return Err(Error::InvalidParameter(format!(
            "T = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    Ok(steps as usize + 1)
}

struct Iterate {
    states: Vec<State>,
}

fn picard_map(
    zeroth: &[State],
    current: &Iterate,
    p: &PhysParams,
    dt: f64,
    elliptic_tol: f64,
    monitor: &mut RhsMonitor,
) -> Result<Iterate> {
    let grid = *zeroth[0].grid();
    let nt = zeroth.len();
    let mut m_series: [Vec<ScalarField>; 4] = std::array::from_fn(|_| Vec::with_capacity(nt));
    let mut n_series = Vec::with_capacity(nt);
    let mut a0_hints = Vec::with_capacity(nt);
    for s in &current.states {
        let opts = SolveOptions::with_tol(elliptic_tol).warm_start(s.a0_hint.clone());
        let (m, n, a0) = rhs_total(s, p, &opts)?;
        monitor.record(&m);
        for (j, c) in m.into_components().into_iter().enumerate() {
            m_series[j].push(c);
        }
        n_series.push(n);
        a0_hints.push(a0.solution);
    }
    let wa: [(Vec<ScalarField>, Vec<ScalarField>); 4] = std::array::from_fn(|j| {
        duhamel_series(&FieldSeries {
            dt,
            fields: std::mem::take(&mut m_series[j]),
        })
    });
    let (wphi, wphit) = duhamel_series(&FieldSeries {
        dt,
        fields: n_series,
    });
    let states = (0..nt)
        .map(|i| {
            let z = &zeroth[i];
            let a = VectorField::new(std::array::from_fn(|j| &z.a.components()[j] + &wa[j].0[i]))
                .expect("shared grid");
            let at = VectorField::new(std::array::from_fn(|j| &z.at.components()[j] + &wa[j].1[i]))
                .expect("shared grid");
            State {
                t: z.t,
                a,
                at,
                phi: &z.phi + &wphi[i],
                phit: &z.phit + &wphit[i],
                a0_hint: Some(a0_hints[i].clone()),
            }
        })
        .collect();
    let _ = grid;
    Ok(Iterate { states })
}

fn iterate_distance(x: &Iterate, y: &Iterate, s: f64) -> f64 {
    x.states
        .iter()
        .zip(&y.states)
        .map(|(a, b)| {
            vector_sobolev_norm(&(&a.a - &b.a), s)
                + sobolev_norm(&(&a.phi - &b.phi), s)
                + vector_sobolev_norm(&(&a.at - &b.at), s - 1.0)
                + sobolev_norm(&(&a.phit - &b.phit), s - 1.0)
        })
        .fold(0.0, f64::max)
}

fn iterate_l2_distance(x: &Iterate, y: &Iterate) -> f64 {
    x.states
        .iter()
        .zip(&y.states)
        .map(|(a, b)| (&a.a - &b.a).l2_norm() + (&a.phi - &b.phi).l2_norm())
        .fold(0.0, f64::max)
}

/// Picard iteration `u^{(m+1)} = u^{(0)} + W_T F(u^{(m)})` from the free
/// evolution of the data.
pub fn picard_solve(
    data: &InitialData,
    p: &PhysParams,
    t_final: f64,
    dt: f64,
    max_m: usize,
    tol: f64,
) -> Result<(Trajectory, PicardReport)> {
    let opts = PicardOptions {
        max_m,
        tol,
        ..PicardOptions::default()
    };
    picard_solve_with(data, p, t_final, dt, &opts)
}

pub fn picard_solve_with(
    data: &InitialData,
    p: &PhysParams,
    t_final: f64,
    dt: f64,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {} must be positive", opts.tol)));
    }
    let nt = sample_count(t_final, dt)?;
    let zeroth: Vec<State> = (0..nt).map(|i| free_state(data, i as f64 * dt)).collect();
    let mut current = Iterate {
        states: zeroth.clone(),
    };
    let mut omega: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut growth = 0;
    let mut monitor = RhsMonitor::default();
    for _ in 0..opts.max_m {
        let next = picard_map(&zeroth, &current, p, dt, opts.elliptic_tol, &mut monitor)?;
        let w = iterate_distance(&next, &current, opts.s);
        if let Some(&prev) = omega.last() {
            if w > prev {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        omega.push(w);
        current = next;
        if w <= opts.tol {
            converged = true;
            break;
        }
        if growth >= 3 {
            return Err(Error::PicardDivergence {
                last_omega: w,
                suggested_t: 0.5 * t_final,
            });
        }
    }
    let contraction_ratios = omega
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let residual = {
        let image = picard_map(&zeroth, &current, p, dt, opts.elliptic_tol, &mut monitor)?;
        iterate_l2_distance(&image, &current)
    };
    let iterate_count = if converged {
        omega.len() - 1
    } else {
        omega.len()
    };
    let mut traj = Trajectory::new(current.states, *p, dt)?;
    traj.monitor = monitor;
    Ok((
        traj,
        PicardReport {
            iterate_count,
            omega,
            contraction_ratios,
            converged,
            residual,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Picard,
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub constraint_tol: f64,
    pub elliptic_tol: f64,
    pub picard: PicardOptions,
    /// Drop `𝓜` and `𝓝₁ … 𝓝₅` (free wave and Klein–Gordon equations).
    pub linearized: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            constraint_tol: CONSTRAINT_TOLERANCE,
            elliptic_tol: STEPPER_ELLIPTIC_TOLERANCE,
            picard: PicardOptions::default(),
            linearized: false,
        }
    }
}

fn check_constraint(s: &State, tol: f64) -> Result<()> {
    let r = s.divergence_residual();
    if r > tol {
        return Err(Error::ConstraintViolation {
            t: s.t,
            residual: r,
            tolerance: tol,
        });
    }
    Ok(())
}

/// Evolves the data to `T` with either backend, storing every step.
pub fn evolve(
    data: &InitialData,
    p: &PhysParams,
    t_final: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory> {
    evolve_with(data, p, t_final, dt, method, &EvolveOptions::default())
}

pub fn evolve_with(
    data: &InitialData,
    p: &PhysParams,
    t_final: f64,
    dt: f64,
    method: Method,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let nt = sample_count(t_final, dt)?;
    let initial = State::from_data(data, 0.0);
    check_constraint(&initial, opts.constraint_tol)?;
    if nt == 1 {
        return Trajectory::new(vec![initial], *p, dt);
    }
    let traj = match method {
        Method::Rk4 => {
            let mut states = Vec::with_capacity(nt);
            let mut monitor = RhsMonitor::default();
            states.push(initial);
            for i in 1..nt {
                let last = states.last().expect("non-empty");
                let mut next = step(last, p, dt, opts.elliptic_tol, opts.linearized, &mut monitor)?;
                next.t = i as f64 * dt;
                check_constraint(&next, opts.constraint_tol)?;
                states.push(next);
            }
            let mut traj = Trajectory::new(states, *p, dt)?;
            traj.monitor = monitor;
            traj
        }
        Method::Picard if opts.linearized => {
            return Err(Error::InvalidParameter(
                "the linearized system is only integrated with rk4".into(),
            ));
        }
        Method::Picard => {
            let (traj, _) = picard_solve_with(data, p, t_final, dt, &opts.picard)?;
            for s in &traj.states {
                check_constraint(s, opts.constraint_tol)?;
            }
            traj
        }
    };
    Ok(traj)
}

/// First Picard iterate of `A` for data `(0, 0, φ₀, 0)` with `m = 0`.
pub fn first_iterate_a(phi0: &ScalarField, t_final: f64, dt: f64) -> Result<Vec<VectorField>> {
    let grid = *phi0.grid();
    let z = ScalarField::zeros(grid, Domain::Spectral, false);
    let data = InitialData::new(VectorField::zeros(grid), VectorField::zeros(grid), phi0.clone(), z)?;
    let nt = sample_count(t_final, dt)?;
    let zeroth: Vec<State> = (0..nt).map(|i| free_state(&data, i as f64 * dt)).collect();
    let m: Vec<VectorField> = zeroth.iter().map(rhs_m).collect();
    let comps: [Vec<ScalarField>; 4] = std::array::from_fn(|j| {
        duhamel_series(&FieldSeries {
            dt,
            fields: m.iter().map(|v| v.component(j).clone()).collect(),
        })
        .0
    });
    Ok((0..nt)
        .map(|i| VectorField::new(std::array::from_fn(|j| comps[j][i].clone())).expect("shared grid"))
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct FirstIterateScaling {
    pub lambda: u32,
    pub relative_error: f64,
    pub samples: usize,
}

/// Compares the first iterate built from `φ₀` on `(n, dt)` with the one
/// built from `λφ₀(λx)` on `(λn, dt/λ)`: coefficient `λk` of the latter at
/// time `t/λ` must equal `λ` times coefficient `k` of the former at `t`.
pub fn first_iterate_scaling(
    phi0: &ScalarField,
    lambda: u32,
    t_final: f64,
    dt: f64,
) -> Result<FirstIterateScaling> {
    if lambda < 2 {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 2")));
    }
    let grid = *phi0.grid();
    let l = lambda as i64;
    let fine = GridSpec::new(grid.n() * lambda as usize, grid.box_length())?;
    let coarse_spec = phi0.spectral();
    let mut vals = vec![Complex64::new(0.0, 0.0); fine.len()];
    for (flat, c) in coarse_spec.values().iter().enumerate() {
        let k = grid.mode_of(flat);
        vals[fine.mode_index(k.map(|v| v * l))?] = c * lambda as f64;
    }
    let scaled = ScalarField::from_spectral(fine, vals, phi0.is_real())?;
    let coarse = first_iterate_a(phi0, t_final, dt)?;
    let refined = first_iterate_a(&scaled, t_final / lambda as f64, dt / lambda as f64)?;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (c, f) in coarse.iter().zip(&refined) {
        for j in 0..DIM {
            let cs = c.component(j).spectral();
            let fs = f.component(j).spectral();
            let mut covered = vec![false; fine.len()];
            for (flat, cv) in cs.values().iter().enumerate() {
                let k = grid.mode_of(flat);
                let idx = fine.mode_index(k.map(|v| v * l))?;
                covered[idx] = true;
                err = err.max((fs.values()[idx] - cv * lambda as f64).norm());
                scale = scale.max(cv.norm() * lambda as f64);
            }
            for (idx, fv) in fs.values().iter().enumerate() {
                if !covered[idx] {
                    err = err.max(fv.norm());
                }
            }
        }
    }
    Ok(FirstIterateScaling {
        lambda,
        relative_error: if scale > 0.0 { err / scale } else { err },
        samples: coarse.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::band_limited_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn g8() -> GridSpec {
        GridSpec::periodic(8).unwrap()
    }

    fn random_state(seed: u64, amp: f64) -> State {
        let g = g8();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = |real: bool| {
            let f = band_limited_field(g, &mut rng, 2, 1.0).unwrap().scale(c(amp, 0.0));
            if real {
                f.into_real()
            } else {
                f
            }
        };
        let a = spectral::leray_project(&VectorField::new(std::array::from_fn(|_| field(true))).unwrap());
        let at = spectral::leray_project(&VectorField::new(std::array::from_fn(|_| field(true))).unwrap());
        State::new(0.0, a, at, field(false), field(false)).unwrap()
    }

    #[test]
    fn mass_must_be_nonnegative() {
        assert!(PhysParams::new(-1.0).is_err());
        assert!(PhysParams::new(f64::NAN).is_err());
        assert!(PhysParams::new(0.5).is_ok());
    }

    #[test]
    fn m_vanishes_without_charge_field() {
        let g = g8();
        let mut s = random_state(1, 1.0);
        s.phi = ScalarField::zeros(g, Domain::Spectral, false);
        let m0 = rhs_m(&s);
        assert!(m0.is_zero(), "{}", m0.l2_norm());
        let mut s = random_state(2, 1.0);
        s.a = VectorField::zeros(g);
        s.phi = s.phi.re().as_complex();
        let m = rhs_m(&s).l2_norm();
        assert!(m < 1e-13 * s.phi.l2_norm_squared(), "{m}");
    }

    #[test]
    fn m_is_divergence_free() {
        let s = random_state(3, 1.0);
        let m = rhs_m(&s);
        let d = spectral::divergence(&m).l2_norm();
        assert!(d <= 1e-10 * m.l2_norm(), "{d}");
    }

    #[test]
    fn m_matches_explicit_null_forms() {
        let s = random_state(4, 1.0);
        let re = s.phi.re();
        let im = s.phi.im();
        let grid = *s.grid();
        let mut expect: Vec<ScalarField> = (0..DIM)
            .map(|_| ScalarField::zeros(grid, Domain::Spectral, true))
            .collect();
        for j in 0..DIM {
            for k in 0..DIM {
                let q = spectral::null_form_q(&re, &im, j, k);
                expect[j] = &expect[j] + &spectral::riesz_inv_sqrt(&q, k).scale(c(2.0, 0.0)).re();
            }
        }
        let phi_f = dealias::to_fine(&s.phi);
        let wa = s.a.map(|a| {
            let a_f = dealias::to_fine(a);
            let v = phi_f.iter().zip(&a_f).map(|(p, x)| p.norm_sqr() * x).collect();
            dealias::from_fine(&grid, v, true)
        });
        let m2 = spectral::leray_project(&wa);
        let m = rhs_m(&s);
        for j in 0..DIM {
            let e = &expect[j] + m2.component(j);
            assert!((m.component(j) - &e).l2_norm() < 1e-12 * e.l2_norm());
        }
    }

    #[test]
    fn n1_matches_explicit_null_form_sum() {
        let s = random_state(5, 1.0);
        let terms = rhs_n_terms(&s, &PhysParams::massless(), &SolveOptions::with_tol(1e-12)).unwrap();
        let grid = *s.grid();
        let mut sum = ScalarField::zeros(grid, Domain::Spectral, false);
        for j in 0..DIM {
            for k in 0..DIM {
                let rj = spectral::riesz(s.a.component(k), j);
                let rk = spectral::riesz(s.a.component(j), k);
                let psi = spectral::inv_sqrt_neg_laplacian(&(&rj - &rk));
                sum = &sum + &spectral::null_form_q(&s.phi, &psi, j, k);
            }
        }
        let expect = sum.scale(c(0.0, -1.0));
        let diff = (&terms.terms[0] - &expect).l2_norm();
        assert!(diff < 1e-11 * expect.l2_norm(), "{diff}");
    }

    #[test]
    fn n_terms_for_plane_wave() {
        let g = g8();
        let phi = ScalarField::plane_wave(g, [1, 0, 0, 0], c(0.5, 0.0)).unwrap();
        let phit = ScalarField::plane_wave(g, [0, 1, 0, 0], c(0.0, 0.3)).unwrap();
        let s = State::new(0.0, VectorField::zeros(g), VectorField::zeros(g), phi.clone(), phit.clone())
            .unwrap();
        let t = rhs_n_terms(&s, &PhysParams::massless(), &SolveOptions::with_tol(1e-13)).unwrap();
        assert!(t.terms[0].l2_norm() < 1e-14);
        assert!(t.terms[4].l2_norm() < 1e-14);
        assert!(t.terms[5].is_zero());
        let a0 = elliptic::compute_a0(&phi, &phit, 1e-13).unwrap().solution;
        let b0 = elliptic::compute_b0(&VectorField::zeros(g), &phi);
        let n2 = dealias::product(&a0.clone().as_complex(), &phit).scale(c(0.0, 2.0));
        let n3 = dealias::product(&b0.as_complex(), &phi).scale(c(0.0, 1.0));
        let a0sq = dealias::product(&a0, &a0);
        let n4 = -&dealias::product(&a0sq.as_complex(), &phi);
        for (got, want) in [(&t.terms[1], n2), (&t.terms[2], n3), (&t.terms[3], n4)] {
            assert!((got - &want).l2_norm() <= 1e-11 * want.l2_norm().max(1.0));
        }
    }

    #[test]
    fn n_vanishes_for_zero_field() {
        let mut s = random_state(6, 1.0);
        s.phi = ScalarField::zeros(*s.grid(), Domain::Spectral, false);
        s.phit = s.phi.clone();
        let n = rhs_n(&s, &PhysParams::new(2.0).unwrap(), 1e-10).unwrap();
        assert!(n.is_zero());
    }

    #[test]
    fn mass_term_is_linear() {
        let g = g8();
        let phi = ScalarField::plane_wave(g, [1, 1, 0, 0], c(1e-3, 0.0)).unwrap();
        let z = ScalarField::zeros(g, Domain::Spectral, false);
        let s = State::new(0.0, VectorField::zeros(g), VectorField::zeros(g), phi.clone(), z).unwrap();
        let t = rhs_n_terms(&s, &PhysParams::new(0.7).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(t.terms[5], phi.scale(c(0.49, 0.0)));
    }

    #[test]
    fn free_evolution_examples() {
        let g = g8();
        let f = ScalarField::plane_wave(g, [1, 0, 0, 0], c(1.0, 0.0)).unwrap();
        let z = ScalarField::zeros(g, Domain::Spectral, false);
        let u = free_evolution(&f, &z, PI);
        assert!((&u + &f).l2_norm() < 1e-12);
        let one = ScalarField::constant(g, c(1.0, 0.0));
        let u = free_evolution(&z, &one, 2.0);
        assert!((&u - &one.scale(c(2.0, 0.0))).l2_norm() < 1e-12);
    }

    #[test]
    fn free_evolution_conserves_energy() {
        let g = g8();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = band_limited_field(g, &mut rng, 3, 1.0).unwrap();
        let h = band_limited_field(g, &mut rng, 3, 1.0).unwrap();
        let energy = |t: f64| {
            let (u, ut) = free_evolution_pair(&f, &h, t);
            0.5 * (ut.without_mean().l2_norm_squared()
                + spectral::gradient(&u).iter().map(|d| d.l2_norm_squared()).sum::<f64>())
        };
        let e0 = energy(0.0);
        for t in [0.3, 1.7, 10.0] {
            assert!((energy(t) - e0).abs() < 1e-12 * e0);
        }
    }

    #[test]
    fn duhamel_examples() {
        let g = GridSpec::periodic(4).unwrap();
        let dt = 0.01;
        let cst = ScalarField::constant(g, c(2.0, 0.0));
        let series = FieldSeries::new(dt, vec![cst; 101]).unwrap();
        let u = duhamel_wt(&series, 1.0).unwrap();
        assert!((u.mean().re + 1.0).abs() < 1e-12);
        let f = ScalarField::plane_wave(g, [0, 0, 0, 1], c(1.0, 0.0)).unwrap();
        let series = FieldSeries::new(dt, vec![f.clone(); 101]).unwrap();
        for (t, idx) in [(0.5, 50), (0.73, 73), (1.0, 100)] {
            let u = duhamel_wt(&series, t).unwrap();
            let want = -(1.0 - f64::cos(t));
            let got = u.coefficient([0, 0, 0, 1]).unwrap();
            assert!((got.re - want).abs() < 1e-9, "{idx}: {got} vs {want}");
        }
        let z = FieldSeries::new(dt, vec![ScalarField::zeros(g, Domain::Spectral, false); 5]).unwrap();
        assert!(duhamel_wt(&z, 0.02).unwrap().is_zero());
        assert!(matches!(duhamel_wt(&z, 0.5), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(duhamel_wt(&z, 0.015), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn cumulative_simpson_is_exact_for_cubics() {
        let h = 0.1;
        let g: Vec<Complex64> = (0..9).map(|i| c((i as f64 * h).powi(3), 0.0)).collect();
        let out = cumulative_simpson(&g, h);
        for (i, v) in out.iter().enumerate().skip(2) {
            let t = i as f64 * h;
            assert!((v.re - t.powi(4) / 4.0).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn cfl_guard_refuses_large_steps() {
        let s = random_state(7, 0.1);
        let limit = cfl_limit(s.grid());
        match step_rk4(&s, &PhysParams::massless(), 2.0 * limit) {
            Err(Error::CflViolation { suggested, .. }) => assert_eq!(suggested, limit),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rk4_tracks_free_propagator_for_gauge_field() {
        let g = g8();
        let mut s = random_state(8, 1.0);
        s.phi = ScalarField::zeros(g, Domain::Spectral, false);
        s.phit = s.phi.clone();
        let p = PhysParams::massless();
        let data = s.data();
        let err_at = |dt: f64| {
            let traj = evolve(&data, &p, 0.4, dt, Method::Rk4).unwrap();
            let exact = free_state(&data, 0.4);
            (&traj.last().a - &exact.a).l2_norm()
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        assert!(e1 / e2 > 14.0, "order ratio {}", e1 / e2);
    }

    #[test]
    fn evolve_zero_time_returns_initial_state() {
        let s = random_state(9, 0.1);
        let traj = evolve(&s.data(), &PhysParams::massless(), 0.0, 0.1, Method::Rk4).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0].t, 0.0);
    }

    #[test]
    fn picard_zero_data_converges_immediately() {
        let data = InitialData::zeros(g8());
        let (traj, rep) = picard_solve(&data, &PhysParams::massless(), 0.2, 0.05, 10, 1e-10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterate_count, 0);
        assert_eq!(traj.len(), 5);
        assert!(traj.last().phi.is_zero());
    }

    #[test]
    fn first_iterate_rescales_exactly() {
        let g = g8();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi0 = band_limited_field(g, &mut rng, 1, 1.0).unwrap();
        let r = first_iterate_scaling(&phi0, 2, 0.2, 0.05).unwrap();
        assert!(r.relative_error < 1e-8, "{}", r.relative_error);
    }
}
