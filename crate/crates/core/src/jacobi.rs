//! Reduced bi-Jacobi fields along a modified cubic, the curvature tensor
//! `ℱ` that drives them, and the reduced index form.
//!
//! A variation field `X = g 𝒳⁰` is described by the jets
//! `𝒳ⁱ⁺¹ = 𝒳̇ⁱ + ∇_{ξ⁰}𝒳ⁱ`. It is a bi-Jacobi field when
//!
//! ```text
//! 𝒳̇³ + ∇_{ξ⁰}𝒳³ + ℱ(𝒳⁰, 𝒳¹, 𝒳², ξ⁰, ξ¹, ξ²) + (D_{𝒳⁰} + ∇_{𝒳⁰}) grad₁V_ext(e, h) = 0.
//! ```

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algebra::{GroupElement, GroupModel, LieAlgebraElement};
use crate::dynamics::{CubicState, CubicTrajectory, MIN_INTERVALS};
use crate::error::{Error, Result};
use crate::numerics::{differentiate, simpson};
use crate::potential::PotentialSpec;

/// Relative tolerance on `𝒳⁰(a)`, `𝒳⁰(b)` for admissible variation fields.
pub const ENDPOINT_VALUE_TOL: f64 = 1e-6;
/// Relative tolerance on `𝒳̇⁰` at the endpoints, scaled by `sup‖𝒳⁰‖ / (b − a)`.
pub const ENDPOINT_SLOPE_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct JacobiState {
    pub x0: LieAlgebraElement,
    pub x1: LieAlgebraElement,
    pub x2: LieAlgebraElement,
    pub x3: LieAlgebraElement,
}

impl JacobiState {
    pub fn zeros(n: usize) -> Self {
        let z = LieAlgebraElement::zeros(n);
        Self { x0: z.clone(), x1: z.clone(), x2: z.clone(), x3: z }
    }

    /// Seed with `𝒳^(slot) = v` and the other jets zero.
    pub fn seed(slot: usize, v: LieAlgebraElement) -> Self {
        let mut s = Self::zeros(v.dim());
        match slot {
            0 => s.x0 = v,
            1 => s.x1 = v,
            2 => s.x2 = v,
            3 => s.x3 = v,
            _ => panic!("jet slot {slot} out of range"),
        }
        s
    }

    pub fn to_vector(&self) -> nalgebra::DVector<f64> {
        let n = self.x0.dim();
        let mut out = nalgebra::DVector::zeros(4 * n);
        for (i, x) in [&self.x0, &self.x1, &self.x2, &self.x3].into_iter().enumerate() {
            out.rows_mut(i * n, n).copy_from(x.coords());
        }
        out
    }

    pub fn from_vector(v: &nalgebra::DVector<f64>) -> Self {
        let n = v.len() / 4;
        let part = |i: usize| LieAlgebraElement::from(v.rows(i * n, n).into_owned());
        Self { x0: part(0), x1: part(1), x2: part(2), x3: part(3) }
    }

    pub fn is_finite(&self) -> bool {
        self.x0.is_finite() && self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }
}

/// `(∇_w R)(a, b)c` for left-invariant fields with values `w, a, b, c`.
pub fn curvature_derivative(
    model: &GroupModel,
    w: &LieAlgebraElement,
    a: &LieAlgebraElement,
    b: &LieAlgebraElement,
    c: &LieAlgebraElement,
) -> LieAlgebraElement {
    let r = |x: &LieAlgebraElement, y: &LieAlgebraElement, z: &LieAlgebraElement| model.curv(x, y, z);
    model.nab(w, &r(a, b, c)) - r(&model.nab(w, a), b, c) - r(a, &model.nab(w, b), c) - r(a, b, &model.nab(w, c))
}

/// `(D_t²R)(a, b)c` along a curve with body velocity `w0` and
/// `ẇ0 = w1 − ∇_{w0}w0`.
fn second_time_derivative(
    model: &GroupModel,
    w0: &LieAlgebraElement,
    w0_dot: &LieAlgebraElement,
    a: &LieAlgebraElement,
    b: &LieAlgebraElement,
    c: &LieAlgebraElement,
) -> LieAlgebraElement {
    let dr =
        |x: &LieAlgebraElement, y: &LieAlgebraElement, z: &LieAlgebraElement| curvature_derivative(model, w0, x, y, z);
    model.nab(w0, &dr(a, b, c))
        - dr(&model.nab(w0, a), b, c)
        - dr(a, &model.nab(w0, b), c)
        - dr(a, b, &model.nab(w0, c))
        + curvature_derivative(model, w0_dot, a, b, c)
}

/// Reduced curvature tensor `ℱ(𝒳⁰, 𝒳¹, 𝒳², ξ⁰, ξ¹, ξ²)`, linear in the
/// `𝒳` jets.
pub fn f_reduced(
    model: &GroupModel,
    x: [&LieAlgebraElement; 3],
    xi: [&LieAlgebraElement; 3],
) -> Result<LieAlgebraElement> {
    for v in x.iter().chain(xi.iter()) {
        model.check_dim(v)?;
    }
    Ok(f_unchecked(model, x, xi))
}

fn f_unchecked(model: &GroupModel, x: [&LieAlgebraElement; 3], xi: [&LieAlgebraElement; 3]) -> LieAlgebraElement {
    let [x0, x1, x2] = x;
    let [w0, w1, w2] = xi;
    let r = |a: &LieAlgebraElement, b: &LieAlgebraElement, c: &LieAlgebraElement| model.curv(a, b, c);
    let dr = |w: &LieAlgebraElement, a: &LieAlgebraElement, b: &LieAlgebraElement, c: &LieAlgebraElement| {
        curvature_derivative(model, w, a, b, c)
    };
    let w0_dot = w1 - model.nab(w0, w0);

    let mut out = second_time_derivative(model, w0, &w0_dot, x0, w0, w0);
    out += dr(x0, w1, w0, w0);
    out += r(&r(x0, w0, w0), w0, w0);
    out += r(x0, w2, w0);
    out += r(x1, w0, w1) * 4.0;
    out += (dr(w0, x1, w0, w0) + dr(w0, x0, w1, w0) + r(x2, w0, w0)) * 2.0;
    out += (dr(w0, x0, w0, w1) + r(x0, w0, w2) + r(x0, w1, w1)) * 3.0;
    out
}

/// Right-hand side of the reduced bi-Jacobi equation along `base`.
pub fn bijacobi_rhs(
    model: &GroupModel,
    spec: &PotentialSpec,
    base: &CubicState,
    j: &JacobiState,
) -> Result<JacobiState> {
    base.validate(model)?;
    for v in [&j.x0, &j.x1, &j.x2, &j.x3] {
        model.check_dim(v)?;
    }
    let h = spec.relative(&base.g);
    let w0 = &base.xi0;
    let f = f_unchecked(model, [&j.x0, &j.x1, &j.x2], [w0, &base.xi1, &base.xi2]);
    let hess = spec.hessian_term(model, &h, &j.x0)?;
    Ok(JacobiState {
        x0: &j.x1 - model.nab(w0, &j.x0),
        x1: &j.x2 - model.nab(w0, &j.x1),
        x2: &j.x3 - model.nab(w0, &j.x2),
        x3: -model.nab(w0, &j.x3) - f - hess,
    })
}

/// Matrix of `x ↦ ∇_w x`.
fn nabla_matrix(model: &GroupModel, w: &LieAlgebraElement) -> DMatrix<f64> {
    let n = model.dim();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m.set_column(i, model.nab(w, &LieAlgebraElement::basis(n, i)).coords());
    }
    m
}

/// The bi-Jacobi equation at one instant, as a `4n × 4n` linear system
/// acting on the stacked jets `(𝒳⁰, 𝒳¹, 𝒳², 𝒳³)`.
fn system_matrix(model: &GroupModel, spec: &PotentialSpec, s: &CubicState, h: &GroupElement) -> Result<DMatrix<f64>> {
    let n = model.dim();
    let nw = nabla_matrix(model, &s.xi0);
    let hess = spec.hessian_matrix(model, h)?;
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    for blk in 0..4 {
        m.view_mut((blk * n, blk * n), (n, n)).copy_from(&(-&nw));
        if blk < 3 {
            m.view_mut((blk * n, (blk + 1) * n), (n, n)).fill_with_identity();
        }
    }
    let zero = LieAlgebraElement::zeros(n);
    for slot in 0..3 {
        for i in 0..n {
            let e = LieAlgebraElement::basis(n, i);
            let mut x = [&zero, &zero, &zero];
            x[slot] = &e;
            let f = f_unchecked(model, x, [&s.xi0, &s.xi1, &s.xi2]);
            for k in 0..n {
                m[(3 * n + k, slot * n + i)] -= f[k];
            }
        }
    }
    let mut block = m.view_mut((3 * n, 0), (n, n));
    block -= hess;
    Ok(m)
}

fn cut_locus_at(t: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::LogNearCutLocus { .. } | Error::StepUnderflow { .. } => Error::CutLocusDuringIntegration { t },
        other => other,
    }
}

/// Linearised dynamics sampled along a base trajectory at the grid nodes
/// and step midpoints, ready for RK4.
#[derive(Clone, Debug)]
pub struct JacobiBase {
    model: GroupModel,
    spec: PotentialSpec,
    traj: CubicTrajectory,
    nodes: Vec<DMatrix<f64>>,
    mids: Vec<DMatrix<f64>>,
}

impl JacobiBase {
    pub fn new(model: &GroupModel, spec: &PotentialSpec, traj: &CubicTrajectory) -> Result<Self> {
        let n_steps = traj.intervals();
        let dt = traj.dt();
        let nodes = (0..=n_steps)
            .into_par_iter()
            .map(|k| {
                let t = traj.times()[k];
                system_matrix(model, spec, &traj.states()[k], &traj.h_samples()[k]).map_err(cut_locus_at(t))
            })
            .collect::<Result<Vec<_>>>()?;
        let mids = (0..n_steps)
            .into_par_iter()
            .map(|k| {
                let t = traj.times()[k] + 0.5 * dt;
                let s = traj.state_at(model, t);
                system_matrix(model, spec, &s, &spec.relative(&s.g)).map_err(cut_locus_at(t))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model: model.clone(), spec: spec.clone(), traj: traj.clone(), nodes, mids })
    }

    pub fn trajectory(&self) -> &CubicTrajectory {
        &self.traj
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// System matrix at an arbitrary time, from the interpolated base.
    pub fn system_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let s = self.traj.state_at(&self.model, t);
        system_matrix(&self.model, &self.spec, &s, &self.spec.relative(&s.g)).map_err(cut_locus_at(t))
    }

    /// Integrates the stacked jets (one column per solution) over the grid,
    /// returning the jets at every node.
    pub fn propagate(&self, init: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        let dt = self.traj.dt();
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut x = init.clone();
        for k in 0..self.mids.len() {
            let k1 = &self.nodes[k] * &x;
            let k2 = &self.mids[k] * (&x + &k1 * (0.5 * dt));
            let k3 = &self.mids[k] * (&x + &k2 * (0.5 * dt));
            let k4 = &self.nodes[k + 1] * (&x + &k3 * dt);
            let next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            out.push(x);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t: self.traj.times()[k + 1] });
            }
            x = next;
        }
        out.push(x);
        Ok(out)
    }

    /// One RK4 step of length `tau` from node `k` with jets `x`.
    pub fn step_from_node(&self, k: usize, x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
        if tau == 0.0 {
            return Ok(x.clone());
        }
        let t = self.traj.times()[k];
        let start = &self.nodes[k];
        let mid = self.system_at(t + 0.5 * tau)?;
        let end = self.system_at(t + tau)?;
        let k1 = start * x;
        let k2 = &mid * (x + &k1 * (0.5 * tau));
        let k3 = &mid * (x + &k2 * (0.5 * tau));
        let k4 = end * (x + &k3 * tau);
        Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (tau / 6.0))
    }

    pub fn integrate(&self, init: &JacobiState) -> Result<JacobiField> {
        for v in [&init.x0, &init.x1, &init.x2, &init.x3] {
            self.model.check_dim(v)?;
        }
        if !init.is_finite() {
            return Err(Error::InvalidArgument("initial jets must be finite".into()));
        }
        let col = DMatrix::from_column_slice(4 * self.dim(), 1, init.to_vector().as_slice());
        let states =
            self.propagate(&col)?.into_iter().map(|m| JacobiState::from_vector(&m.column(0).into_owned())).collect();
        Ok(JacobiField { times: self.traj.times().to_vec(), states })
    }
}

/// A bi-Jacobi field sampled on the base grid.
#[derive(Clone, Debug)]
pub struct JacobiField {
    times: Vec<f64>,
    states: Vec<JacobiState>,
}

impl JacobiField {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[JacobiState] {
        &self.states
    }

    pub fn x0_samples(&self) -> Vec<LieAlgebraElement> {
        self.states.iter().map(|s| s.x0.clone()).collect()
    }
}

/// Integrates a reduced bi-Jacobi field along `base` on its grid.
pub fn integrate_bijacobi(
    model: &GroupModel,
    spec: &PotentialSpec,
    base: &CubicTrajectory,
    init: &JacobiState,
) -> Result<JacobiField> {
    JacobiBase::new(model, spec, base)?.integrate(init)
}

/// Admissible variation `𝒳⁰` sampled on a trajectory grid: it vanishes
/// together with its first derivative at both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationField {
    a: f64,
    b: f64,
    values: Vec<LieAlgebraElement>,
}

impl VariationField {
    pub fn new(model: &GroupModel, base: &CubicTrajectory, values: Vec<LieAlgebraElement>) -> Result<Self> {
        let len = base.times().len();
        if values.len() != len {
            return Err(Error::InvalidArgument(format!("expected {len} samples, found {}", values.len())));
        }
        for v in &values {
            model.check_dim(v)?;
            if !v.is_finite() {
                return Err(Error::InvalidArgument("variation samples must be finite".into()));
            }
        }
        let (a, b) = (base.start(), base.end());
        let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if sup > 0.0 {
            let ends = values[0].norm().max(values[len - 1].norm());
            if ends > ENDPOINT_VALUE_TOL * sup {
                return Err(Error::EndpointViolation(format!(
                    "endpoint value {ends:e} exceeds {ENDPOINT_VALUE_TOL:e} of sup {sup:e}"
                )));
            }
            if len >= 5 {
                let d = differentiate(&values, base.dt());
                let slope = d[0].norm().max(d[len - 1].norm());
                let limit = ENDPOINT_SLOPE_TOL * sup / (b - a);
                if slope > limit {
                    return Err(Error::EndpointViolation(format!("endpoint slope {slope:e} exceeds {limit:e}")));
                }
            }
        }
        Ok(Self { a, b, values })
    }

    /// Samples `f` on the base grid.
    pub fn from_fn(model: &GroupModel, base: &CubicTrajectory, f: impl Fn(f64) -> LieAlgebraElement) -> Result<Self> {
        Self::new(model, base, base.times().iter().map(|&t| f(t)).collect())
    }

    /// Samples `16 s²(1 − s)² f(t)` with `s = (t − a)/(b − a)`, which is
    /// admissible for any smooth `f`.
    pub fn windowed(model: &GroupModel, base: &CubicTrajectory, f: impl Fn(f64) -> LieAlgebraElement) -> Result<Self> {
        let (a, b) = (base.start(), base.end());
        Self::from_fn(model, base, |t| {
            let s = (t - a) / (b - a);
            f(t) * (16.0 * s * s * (1.0 - s) * (1.0 - s))
        })
    }

    /// `𝒳⁰` of a bi-Jacobi field, accepted only if it is admissible.
    pub fn from_jacobi(model: &GroupModel, base: &CubicTrajectory, field: &JacobiField) -> Result<Self> {
        Self::new(model, base, field.x0_samples())
    }

    pub fn zeros(model: &GroupModel, base: &CubicTrajectory) -> Self {
        let values = vec![LieAlgebraElement::zeros(model.dim()); base.times().len()];
        Self { a: base.start(), b: base.end(), values }
    }

    pub fn values(&self) -> &[LieAlgebraElement] {
        &self.values
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `𝒳¹` and `𝒳²` along `base`, from finite differences.
    pub fn jets(&self, model: &GroupModel, base: &CubicTrajectory) -> [Vec<LieAlgebraElement>; 3] {
        let dt = base.dt();
        let w0: Vec<&LieAlgebraElement> = base.states().iter().map(|s| &s.xi0).collect();
        let lift = |x: &[LieAlgebraElement]| -> Vec<LieAlgebraElement> {
            differentiate(x, dt).into_iter().zip(x.iter().zip(&w0)).map(|(d, (x, w))| d + model.nab(w, x)).collect()
        };
        let x1 = lift(&self.values);
        let x2 = lift(&x1);
        [self.values.clone(), x1, x2]
    }

    fn check_grid(&self, base: &CubicTrajectory) -> Result<()> {
        if self.values.len() != base.times().len() || self.a != base.start() || self.b != base.end() {
            return Err(Error::InvalidArgument("variation field is sampled on a different grid".into()));
        }
        Ok(())
    }
}

/// `√∫ (‖𝒳⁰‖² + ‖𝒳¹‖² + ‖𝒳²‖²)_M dt`.
pub fn h2_norm(model: &GroupModel, base: &CubicTrajectory, x: &VariationField) -> Result<f64> {
    x.check_grid(base)?;
    let [x0, x1, x2] = x.jets(model, base);
    let vals: Vec<f64> = (0..x0.len())
        .map(|k| model.inner(&x0[k], &x0[k]) + model.inner(&x1[k], &x1[k]) + model.inner(&x2[k], &x2[k]))
        .collect();
    Ok(simpson(&vals, base.dt()).max(0.0).sqrt())
}

/// Reduced index form with its per-node data precomputed, for evaluating
/// many pairs along one base.
#[derive(Clone, Debug)]
pub struct IndexForm {
    model: GroupModel,
    base: CubicTrajectory,
    hessians: Vec<DMatrix<f64>>,
}

impl IndexForm {
    pub fn new(model: &GroupModel, spec: &PotentialSpec, base: &CubicTrajectory) -> Result<Self> {
        if base.intervals() < MIN_INTERVALS {
            return Err(Error::GridTooCoarse { nodes: base.intervals() });
        }
        let hessians = base
            .h_samples()
            .par_iter()
            .zip(base.times())
            .map(|(h, &t)| spec.hessian_matrix(model, h).map_err(cut_locus_at(t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model: model.clone(), base: base.clone(), hessians })
    }

    pub fn evaluate(&self, x: &VariationField, y: &VariationField) -> Result<f64> {
        x.check_grid(&self.base)?;
        y.check_grid(&self.base)?;
        let model = &self.model;
        let [x0, x1, x2] = x.jets(model, &self.base);
        let [y0, _, y2] = y.jets(model, &self.base);
        let vals: Vec<f64> = self
            .base
            .states()
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let f = f_unchecked(model, [&x0[k], &x1[k], &x2[k]], [&s.xi0, &s.xi1, &s.xi2]);
                let hx: LieAlgebraElement = (&self.hessians[k] * x0[k].coords()).into();
                model.inner(&x2[k], &y2[k]) + model.inner(&y0[k], &(f + hx))
            })
            .collect();
        Ok(simpson(&vals, self.base.dt()))
    }
}

/// `ℐ(𝒳, 𝒴)` by composite Simpson quadrature on the base grid.
pub fn index_form(
    model: &GroupModel,
    spec: &PotentialSpec,
    base: &CubicTrajectory,
    x: &VariationField,
    y: &VariationField,
) -> Result<f64> {
    IndexForm::new(model, spec, base)?.evaluate(x, y)
}

/// Discrete action of `t ↦ g(t) Exp(s 𝒳⁰(t))` on the base grid.
fn perturbed_action(
    model: &GroupModel,
    spec: &PotentialSpec,
    base: &CubicTrajectory,
    x: &VariationField,
    s: f64,
) -> Result<f64> {
    let dt = base.dt();
    let len = base.times().len();
    let curve: Vec<GroupElement> =
        base.states().iter().zip(x.values()).map(|(st, v)| st.g.compose(&model.exp_unchecked(&(v * s)))).collect();
    let mut xi0 = Vec::with_capacity(len);
    for k in 0..len {
        let (start, w) = crate::numerics::derivative_stencil(k, len);
        let inv = curve[k].inverse();
        let mut acc = LieAlgebraElement::zeros(model.dim());
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 && start + j != k {
                acc += model.log(&inv.compose(&curve[start + j]))? * wj;
            }
        }
        xi0.push(acc * (1.0 / (12.0 * dt)));
    }
    let xi1: Vec<LieAlgebraElement> =
        differentiate(&xi0, dt).into_iter().zip(&xi0).map(|(d, w)| d + model.nab(w, w)).collect();
    let mut vals = Vec::with_capacity(len);
    for (k, g) in curve.iter().enumerate() {
        let v = spec.value(model, g)?;
        let e = 0.5 * model.inner(&xi1[k], &xi1[k]) + v;
        if !e.is_finite() {
            return Err(Error::NonFiniteState { t: base.times()[k] });
        }
        vals.push(e);
    }
    Ok(simpson(&vals, dt))
}

/// Central second difference of the discrete action along `g Exp(s𝒳⁰)`.
pub fn second_variation_fd(
    model: &GroupModel,
    spec: &PotentialSpec,
    base: &CubicTrajectory,
    x: &VariationField,
    eps: f64,
) -> Result<f64> {
    if !(1e-4..=1e-2).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in [1e-4, 1e-2]")));
    }
    x.check_grid(base)?;
    if base.intervals() < MIN_INTERVALS {
        return Err(Error::GridTooCoarse { nodes: base.intervals() });
    }
    let f = |s| perturbed_action(model, spec, base, x, s);
    Ok((f(eps)? - 2.0 * f(0.0)? + f(-eps)?) / (eps * eps))
}
