//! Reduced modified Riemannian cubics: the IVP on `G × 𝔤³` and the
//! two-point boundary value problem solved by shooting.
//!
//! In left-trivialised form the cubic equation reads
//!
//! ```text
//! ġ    = g ξ⁰
//! ξ̇⁰   = ξ¹ − ∇_{ξ⁰}ξ⁰
//! ξ̇¹   = ξ² − ∇_{ξ⁰}ξ¹
//! ξ̇²   = −∇_{ξ⁰}ξ² − R(ξ¹, ξ⁰)ξ⁰ − grad₁V_ext(e, h),     h = g⁻¹g₀
//! ```
//!
//! The `ξ` components are advanced by classical RK4 and the group factor by
//! RKMK4, whose stages move through `Exp`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::{GroupElement, GroupModel, LieAlgebraElement};
use crate::error::{Error, Result};
use crate::numerics::derivative_stencil;
use crate::potential::PotentialSpec;

/// Smallest number of grid intervals accepted by the fixed-step integrators.
pub const MIN_INTERVALS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct CubicState {
    pub g: GroupElement,
    pub xi0: LieAlgebraElement,
    pub xi1: LieAlgebraElement,
    pub xi2: LieAlgebraElement,
}

impl CubicState {
    pub fn new(g: GroupElement, xi0: LieAlgebraElement, xi1: LieAlgebraElement, xi2: LieAlgebraElement) -> Self {
        Self { g, xi0, xi1, xi2 }
    }

    pub fn validate(&self, model: &GroupModel) -> Result<()> {
        model.check_element(&self.g)?;
        for x in [&self.xi0, &self.xi1, &self.xi2] {
            model.check_dim(x)?;
            if !x.is_finite() {
                return Err(Error::InvalidArgument("state has non-finite algebra components".into()));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.g.is_finite() && self.xi0.is_finite() && self.xi1.is_finite() && self.xi2.is_finite()
    }
}

/// Time derivative of a [`CubicState`]. The group part is `ġ = g ξ⁰` and is
/// carried by `state.xi0` itself.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicRate {
    pub xi0: LieAlgebraElement,
    pub xi1: LieAlgebraElement,
    pub xi2: LieAlgebraElement,
}

/// Right-hand side of the reduced cubic equation.
pub fn cubic_rhs(model: &GroupModel, spec: &PotentialSpec, s: &CubicState) -> Result<CubicRate> {
    s.validate(model)?;
    let h = spec.relative(&s.g);
    rhs_with_h(model, spec, s, &h)
}

fn rhs_with_h(model: &GroupModel, spec: &PotentialSpec, s: &CubicState, h: &GroupElement) -> Result<CubicRate> {
    let grad = spec.grad1_vext(model, h)?;
    let w0 = &s.xi0;
    Ok(CubicRate {
        xi0: &s.xi1 - model.nab(w0, w0),
        xi1: &s.xi2 - model.nab(w0, &s.xi1),
        xi2: -model.nab(w0, &s.xi2) - model.curv(&s.xi1, w0, w0) - grad,
    })
}

fn eval_at(model: &GroupModel, spec: &PotentialSpec, s: &CubicState, t: f64) -> Result<CubicRate> {
    let h = spec.relative(&s.g);
    rhs_with_h(model, spec, s, &h).map_err(|e| match e {
        Error::LogNearCutLocus { .. } | Error::StepUnderflow { .. } => Error::CutLocusDuringIntegration { t },
        other => other,
    })
}

/// One RKMK4 step. Returns the new state, the increment `Ω` with
/// `g_new = g Exp(Ω)`, and the rate at the start of the step.
fn rkmk4_step(
    model: &GroupModel,
    spec: &PotentialSpec,
    s: &CubicState,
    t: f64,
    dt: f64,
    k1: Option<CubicRate>,
) -> Result<(CubicState, LieAlgebraElement, CubicRate)> {
    let stage = |omega: &LieAlgebraElement, k: &CubicRate, c: f64| CubicState {
        g: s.g.compose(&model.exp_unchecked(omega)),
        xi0: &s.xi0 + &k.xi0 * (c * dt),
        xi1: &s.xi1 + &k.xi1 * (c * dt),
        xi2: &s.xi2 + &k.xi2 * (c * dt),
    };

    let k1 = match k1 {
        Some(k) => k,
        None => eval_at(model, spec, s, t)?,
    };
    let om1 = s.xi0.clone();

    let o2 = &om1 * (0.5 * dt);
    let s2 = stage(&o2, &k1, 0.5);
    let k2 = eval_at(model, spec, &s2, t + 0.5 * dt)?;
    let om2 = model.dexp_inv_right(&o2, &s2.xi0);

    let o3 = &om2 * (0.5 * dt);
    let s3 = stage(&o3, &k2, 0.5);
    let k3 = eval_at(model, spec, &s3, t + 0.5 * dt)?;
    let om3 = model.dexp_inv_right(&o3, &s3.xi0);

    let o4 = &om3 * dt;
    let s4 = stage(&o4, &k3, 1.0);
    let k4 = eval_at(model, spec, &s4, t + dt)?;
    let om4 = model.dexp_inv_right(&o4, &s4.xi0);

    let w = dt / 6.0;
    let omega = (om1 + om2 * 2.0 + om3 * 2.0 + om4) * w;
    let combine = |a: &LieAlgebraElement, b1, b2, b3, b4| a + (b1 + b2 * 2.0 + b3 * 2.0 + b4) * w;
    let next = CubicState {
        g: s.g.compose(&model.exp_unchecked(&omega)).renormalized(),
        xi0: combine(&s.xi0, k1.xi0.clone(), k2.xi0, k3.xi0, k4.xi0),
        xi1: combine(&s.xi1, k1.xi1.clone(), k2.xi1, k3.xi1, k4.xi1),
        xi2: combine(&s.xi2, k1.xi2.clone(), k2.xi2, k3.xi2, k4.xi2),
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState { t: t + dt });
    }
    Ok((next, omega, k1))
}

/// Advances `init` from `t0` to `t1` in `steps` equal RKMK4 steps.
/// `t1 < t0` integrates backwards in time.
pub fn propagate(
    model: &GroupModel,
    spec: &PotentialSpec,
    init: &CubicState,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<CubicState> {
    init.validate(model)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut s = init.clone();
    for k in 0..steps {
        s = rkmk4_step(model, spec, &s, t0 + k as f64 * dt, dt, None)?.0;
    }
    Ok(s)
}

/// Dense, uniformly sampled solution of the cubic IVP.
#[derive(Clone, Debug)]
pub struct CubicTrajectory {
    times: Vec<f64>,
    states: Vec<CubicState>,
    h: Vec<GroupElement>,
    rates: Vec<CubicRate>,
    /// `Ω_k` with `g_{k+1} = g_k Exp(Ω_k)` up to re-projection.
    increments: Vec<LieAlgebraElement>,
    /// `dΩ/dt` at the right end of each step.
    end_slopes: Vec<LieAlgebraElement>,
}

/// Integrates the cubic IVP on `[a, b]` with `intervals` uniform steps.
pub fn integrate_cubic(
    model: &GroupModel,
    spec: &PotentialSpec,
    init: &CubicState,
    a: f64,
    b: f64,
    intervals: usize,
) -> Result<CubicTrajectory> {
    init.validate(model)?;
    if intervals < MIN_INTERVALS {
        return Err(Error::GridTooCoarse { nodes: intervals });
    }
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::InvalidArgument(format!("interval [{a}, {b}] must satisfy b > a")));
    }
    let dt = (b - a) / intervals as f64;
    let mut times = Vec::with_capacity(intervals + 1);
    let mut states = Vec::with_capacity(intervals + 1);
    let mut rates = Vec::with_capacity(intervals + 1);
    let mut increments = Vec::with_capacity(intervals);
    let mut end_slopes = Vec::with_capacity(intervals);

    let mut s = init.clone();
    let mut k1 = None;
    for k in 0..intervals {
        let t = a + k as f64 * dt;
        let (next, omega, rate) = rkmk4_step(model, spec, &s, t, dt, k1.take())?;
        times.push(t);
        states.push(s);
        rates.push(rate);
        end_slopes.push(model.dexp_inv_right(&omega, &next.xi0));
        increments.push(omega);
        s = next;
    }
    let last_rate = eval_at(model, spec, &s, b)?;
    times.push(b);
    states.push(s);
    rates.push(last_rate);
    let h = states.iter().map(|s| spec.relative(&s.g)).collect();
    Ok(CubicTrajectory { times, states, h, rates, increments, end_slopes })
}

fn hermite(
    p0: &LieAlgebraElement,
    m0: &LieAlgebraElement,
    p1: &LieAlgebraElement,
    m1: &LieAlgebraElement,
    dt: f64,
    s: f64,
) -> LieAlgebraElement {
    let s2 = s * s;
    let s3 = s2 * s;
    p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m0 * ((s3 - 2.0 * s2 + s) * dt)
        + p1 * (-2.0 * s3 + 3.0 * s2)
        + m1 * ((s3 - s2) * dt)
}

impl CubicTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[CubicState] {
        &self.states
    }

    /// `h_k = g_k⁻¹g₀` at every node.
    pub fn h_samples(&self) -> &[GroupElement] {
        &self.h
    }

    pub fn rates(&self) -> &[CubicRate] {
        &self.rates
    }

    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn dt(&self) -> f64 {
        (self.end() - self.start()) / self.intervals() as f64
    }

    pub fn initial(&self) -> &CubicState {
        &self.states[0]
    }

    pub fn last(&self) -> &CubicState {
        &self.states[self.states.len() - 1]
    }

    /// Index `k` of the step containing `t` and the offset `t − t_k`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let dt = self.dt();
        let raw = ((t - self.start()) / dt).floor();
        let k = if raw < 0.0 { 0 } else { (raw as usize).min(self.intervals() - 1) };
        (k, t - self.times[k])
    }

    /// State at an arbitrary time, by cubic Hermite interpolation of the
    /// algebra components and of the step increment in the exponential chart.
    pub fn state_at(&self, model: &GroupModel, t: f64) -> CubicState {
        let (k, tau) = self.locate(t);
        if tau == 0.0 {
            return self.states[k].clone();
        }
        let dt = self.dt();
        let s = tau / dt;
        let (a, b) = (&self.states[k], &self.states[k + 1]);
        let (ra, rb) = (&self.rates[k], &self.rates[k + 1]);
        let zero = LieAlgebraElement::zeros(model.dim());
        let omega = hermite(&zero, &a.xi0, &self.increments[k], &self.end_slopes[k], dt, s);
        CubicState {
            g: a.g.compose(&model.exp_unchecked(&omega)).renormalized(),
            xi0: hermite(&a.xi0, &ra.xi0, &b.xi0, &rb.xi0, dt, s),
            xi1: hermite(&a.xi1, &ra.xi1, &b.xi1, &rb.xi1, dt, s),
            xi2: hermite(&a.xi2, &ra.xi2, &b.xi2, &rb.xi2, dt, s),
        }
    }

    /// Largest violation at interior nodes of `ξ̇ⁱ = ξⁱ⁺¹ − ∇_{ξ⁰}ξⁱ`
    /// (`i = 0, 1`), with `ξ̇ⁱ` from fourth-order finite differences.
    pub fn recursion_residual(&self, model: &GroupModel) -> f64 {
        let len = self.states.len();
        let dt = self.dt();
        let mut worst: f64 = 0.0;
        for k in 2..len - 2 {
            let (start, w) = derivative_stencil(k, len);
            for i in 0..2 {
                let pick = |s: &CubicState| if i == 0 { s.xi0.clone() } else { s.xi1.clone() };
                let mut d = LieAlgebraElement::zeros(model.dim());
                for (j, &wj) in w.iter().enumerate() {
                    if wj != 0.0 {
                        d += pick(&self.states[start + j]) * (wj / (12.0 * dt));
                    }
                }
                let s = &self.states[k];
                let next = if i == 0 { &s.xi1 } else { &s.xi2 };
                let expected = next - model.nab(&s.xi0, &pick(s));
                worst = worst.max((d - expected).norm());
            }
        }
        worst
    }
}

/// Endpoint data of the two-point problem: positions and body velocities
/// at `a` and `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Boundary {
    pub a: f64,
    pub b: f64,
    pub g_a: GroupElement,
    pub xi0_a: LieAlgebraElement,
    pub g_b: GroupElement,
    pub xi0_b: LieAlgebraElement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BvpOptions {
    /// Grid intervals for each shooting integration.
    pub intervals: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub lambda0: f64,
    pub fd_step: f64,
    /// Random restarts tried after the supplied guess and the zero guess.
    pub random_restarts: usize,
    pub seed: u64,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self { intervals: 200, tol: 1e-8, max_iters: 100, lambda0: 1e-3, fd_step: 1e-6, random_restarts: 4, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BvpSolution {
    /// Full state at `t = a`.
    pub initial: CubicState,
    pub residual: f64,
    pub iterations: usize,
    /// Index of the starting guess that converged (0 is the caller's guess).
    pub attempt: usize,
}

fn residual_vector(
    model: &GroupModel,
    spec: &PotentialSpec,
    boundary: &Boundary,
    intervals: usize,
    p: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = model.dim();
    let init = CubicState {
        g: boundary.g_a.clone(),
        xi0: boundary.xi0_a.clone(),
        xi1: LieAlgebraElement::from_slice(&p.as_slice()[..n]),
        xi2: LieAlgebraElement::from_slice(&p.as_slice()[n..]),
    };
    let end = propagate(model, spec, &init, boundary.a, boundary.b, intervals)?;
    let miss = model.log(&end.g.inverse().compose(&boundary.g_b))?;
    let dv = &end.xi0 - &boundary.xi0_b;
    let mut r = DVector::zeros(2 * n);
    r.rows_mut(0, n).copy_from(miss.coords());
    r.rows_mut(n, n).copy_from(dv.coords());
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { t: boundary.b });
    }
    Ok(r)
}

fn fd_jacobian(
    model: &GroupModel,
    spec: &PotentialSpec,
    boundary: &Boundary,
    opts: &BvpOptions,
    p: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let m = p.len();
    let cols: Vec<Result<DVector<f64>>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[j] += opts.fd_step;
            pm[j] -= opts.fd_step;
            let rp = residual_vector(model, spec, boundary, opts.intervals, &pp)?;
            let rm = residual_vector(model, spec, boundary, opts.intervals, &pm)?;
            Ok((rp - rm) / (2.0 * opts.fd_step))
        })
        .collect();
    let mut jac = DMatrix::zeros(m, m);
    for (j, col) in cols.into_iter().enumerate() {
        jac.set_column(j, &col?);
    }
    Ok(jac)
}

struct Attempt {
    p: DVector<f64>,
    residual: f64,
    iterations: usize,
}

fn levenberg_marquardt(
    model: &GroupModel,
    spec: &PotentialSpec,
    boundary: &Boundary,
    opts: &BvpOptions,
    p0: DVector<f64>,
) -> Result<Attempt> {
    let m = p0.len();
    let mut p = p0;
    let mut r = residual_vector(model, spec, boundary, opts.intervals, &p)?;
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    while r.norm() > opts.tol && iterations < opts.max_iters {
        iterations += 1;
        let jac = fd_jacobian(model, spec, boundary, opts, &p)?;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..12 {
            let lhs = &jtj + DMatrix::identity(m, m) * lambda;
            let Some(step) = lhs.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &p + step;
            match residual_vector(model, spec, boundary, opts.intervals, &trial) {
                Ok(rt) if rt.norm() < r.norm() => {
                    p = trial;
                    r = rt;
                    lambda = (lambda / 10.0).max(1e-15);
                    improved = true;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    if r.norm() <= opts.tol {
        // Gauss-Newton polish: the damped steps stop just below the tolerance.
        for _ in 0..3 {
            let jac = fd_jacobian(model, spec, boundary, opts, &p)?;
            let Some(step) = jac.lu().solve(&(-&r)) else { break };
            let trial = &p + step;
            match residual_vector(model, spec, boundary, opts.intervals, &trial) {
                Ok(rt) if rt.norm() < r.norm() => {
                    p = trial;
                    r = rt;
                }
                _ => break,
            }
        }
    }
    Ok(Attempt { residual: r.norm(), p, iterations })
}

/// Solves the two-point problem for the unknown `(ξ¹(a), ξ²(a))` by damped
/// Levenberg–Marquardt shooting. The supplied guess is tried first, then
/// the zero guess, then seeded random guesses.
pub fn shoot_bvp(
    model: &GroupModel,
    spec: &PotentialSpec,
    boundary: &Boundary,
    guess: (&LieAlgebraElement, &LieAlgebraElement),
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    let n = model.dim();
    model.check_element(&boundary.g_a)?;
    model.check_element(&boundary.g_b)?;
    for x in [&boundary.xi0_a, &boundary.xi0_b, guess.0, guess.1] {
        model.check_dim(x)?;
        if !x.is_finite() {
            return Err(Error::InvalidArgument("boundary data and guess must be finite".into()));
        }
    }
    if boundary.b.partial_cmp(&boundary.a) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidArgument("boundary interval must satisfy b > a".into()));
    }
    if opts.intervals == 0 {
        return Err(Error::InvalidArgument("shooting needs at least one step".into()));
    }

    let mut starts = Vec::new();
    let mut first = DVector::zeros(2 * n);
    first.rows_mut(0, n).copy_from(guess.0.coords());
    first.rows_mut(n, n).copy_from(guess.1.coords());
    let zero_is_new = first.iter().any(|&x| x != 0.0);
    starts.push(first);
    if zero_is_new {
        starts.push(DVector::zeros(2 * n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let span = boundary.b - boundary.a;
    for _ in 0..opts.random_restarts {
        starts.push(DVector::from_fn(2 * n, |i, _| {
            let scale = if i < n { 1.0 / span } else { 1.0 / (span * span) };
            rng.random_range(-1.0..1.0) * scale
        }));
    }

    let mut best: Option<(f64, usize)> = None;
    let mut last_error = None;
    let mut total_iterations = 0;
    for (attempt, p0) in starts.into_iter().enumerate() {
        match levenberg_marquardt(model, spec, boundary, opts, p0) {
            Ok(found) => {
                total_iterations += found.iterations;
                if found.residual <= opts.tol {
                    return Ok(BvpSolution {
                        initial: CubicState {
                            g: boundary.g_a.clone(),
                            xi0: boundary.xi0_a.clone(),
                            xi1: LieAlgebraElement::from_slice(&found.p.as_slice()[..n]),
                            xi2: LieAlgebraElement::from_slice(&found.p.as_slice()[n..]),
                        },
                        residual: found.residual,
                        iterations: found.iterations,
                        attempt,
                    });
                }
                if best.is_none_or(|(r, _)| found.residual < r) {
                    best = Some((found.residual, attempt));
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    match (best, last_error) {
        (None, Some(e)) => Err(e),
        (best, _) => {
            Err(Error::NoConvergence { iterations: total_iterations, residual: best.map_or(f64::INFINITY, |b| b.0) })
        }
    }
}
