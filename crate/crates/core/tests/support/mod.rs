//! Shared oracles and scenarios for the integration tests.
#![allow(dead_code)]

use std::rc::Rc;

use cubicavoid::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const T_STAR_UNIT: f64 = 4.730_040_744_862_704;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn v(c: &[f64]) -> LieAlgebraElement {
    LieAlgebraElement::from_slice(c)
}

pub fn random_element(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> LieAlgebraElement {
    LieAlgebraElement::from_vec((0..n).map(|_| rng.random_range(-scale..scale)).collect())
}

pub fn rest_state(model: &GroupModel, g: GroupElement) -> CubicState {
    let z = LieAlgebraElement::zeros(model.dim());
    CubicState::new(g, z.clone(), z.clone(), z)
}

/// Time at which the bump `X'''' = k⁴ X` first admits a biconjugate point.
pub fn rest_biconjugate_time(tau: f64, sigma2: f64, inertia: f64) -> f64 {
    T_STAR_UNIT / (2.0 * tau / (sigma2 * inertia)).powf(0.25)
}

type Field<'a> = Rc<dyn Fn(f64) -> LieAlgebraElement + 'a>;

const FD_STEP: f64 = 5e-3;

fn d5(f: &dyn Fn(f64) -> LieAlgebraElement, t: f64) -> LieAlgebraElement {
    let h = FD_STEP;
    (f(t - 2.0 * h) - f(t - h) * 8.0 + f(t + h) * 8.0 - f(t + 2.0 * h)) * (1.0 / (12.0 * h))
}

struct Curve<'a> {
    model: &'a GroupModel,
    vel: Field<'a>,
}

impl<'a> Curve<'a> {
    fn nab(&self, a: &LieAlgebraElement, b: &LieAlgebraElement) -> LieAlgebraElement {
        self.model.nabla_g(a, b).unwrap()
    }

    fn curv(&self, a: &LieAlgebraElement, b: &LieAlgebraElement, c: &LieAlgebraElement) -> LieAlgebraElement {
        self.model.curvature_g(a, b, c).unwrap()
    }

    /// `𝒟W = Ẇ + ∇_{ξ⁰}W` as a new field.
    fn cov(&self, f: Field<'a>) -> Field<'a> {
        let vel = self.vel.clone();
        let model = self.model;
        Rc::new(move |t| d5(&*f, t) + model.nabla_g(&vel(t), &f(t)).unwrap())
    }

    /// `(D_t R)(A, B)C` as a field.
    fn dt_r(&self, a: Field<'a>, b: Field<'a>, c: Field<'a>) -> Field<'a> {
        let model = self.model;
        let rabc: Field<'a> = {
            let (a, b, c) = (a.clone(), b.clone(), c.clone());
            Rc::new(move |s| model.curvature_g(&a(s), &b(s), &c(s)).unwrap())
        };
        let (da, db, dc, drabc) = (self.cov(a.clone()), self.cov(b.clone()), self.cov(c.clone()), self.cov(rabc));
        Rc::new(move |t| {
            let r = |x: &LieAlgebraElement, y: &LieAlgebraElement, z: &LieAlgebraElement| {
                model.curvature_g(x, y, z).unwrap()
            };
            drabc(t) - r(&da(t), &b(t), &c(t)) - r(&a(t), &db(t), &c(t)) - r(&a(t), &b(t), &dc(t))
        })
    }

    /// `(D_t² R)(A, B)C` at `t`, differentiating `D_t R` once more.
    fn dt2_r(&self, a: Field<'a>, b: Field<'a>, c: Field<'a>, t: f64) -> LieAlgebraElement {
        let outer = self.dt_r(a.clone(), b.clone(), c.clone());
        let d_outer = self.cov(outer)(t);
        d_outer
            - self.dt_r(self.cov(a.clone()), b.clone(), c.clone())(t)
            - self.dt_r(a.clone(), self.cov(b.clone()), c.clone())(t)
            - self.dt_r(a, b, self.cov(c))(t)
    }
}

/// Finite-difference assembly of the `ℱ` tensor at `t = 0` from its
/// definition as a sum of covariant derivatives of the curvature.
///
/// The base curve has body velocity `ξ⁰(t) = w0 + t a1 + t²/2 a2` and the
/// variation `𝒳(t) = x0 + t b1 + t²/2 b2`, with coefficients chosen so the
/// jets at `t = 0` are the given ones. Covariant derivatives along the
/// curve use `𝒟W = Ẇ + ∇_{ξ⁰}W`; the derivative along `X` uses the curve
/// `s ↦ g Exp(s 𝒳⁰)` with arbitrary field extensions.
pub fn f_oracle(
    model: &GroupModel,
    x: [&LieAlgebraElement; 3],
    xi: [&LieAlgebraElement; 3],
    rng: &mut ChaCha8Rng,
) -> LieAlgebraElement {
    let n = model.dim();
    let nab = |a: &LieAlgebraElement, b: &LieAlgebraElement| model.nabla_g(a, b).unwrap();
    let [x0, x1, x2] = x.map(|e| e.clone());
    let [w0, w1, w2] = xi.map(|e| e.clone());

    let a1 = &w1 - nab(&w0, &w0);
    let a2 = &w2 - nab(&w0, &w1) - nab(&a1, &w0) - nab(&w0, &a1);
    let b1 = &x1 - nab(&w0, &x0);
    let b2 = &x2 - nab(&w0, &x1) - nab(&a1, &x0) - nab(&w0, &b1);

    let y: Field = {
        let (w0, a1, a2) = (w0.clone(), a1.clone(), a2.clone());
        Rc::new(move |t| &w0 + &a1 * t + &a2 * (0.5 * t * t))
    };
    let xf: Field = Rc::new(move |t| &x0 + &b1 * t + &b2 * (0.5 * t * t));
    let curve = Curve { model, vel: y.clone() };
    let ny = curve.cov(y.clone());
    let nny = curve.cov(ny.clone());
    let nx = curve.cov(xf.clone());
    let nnx = curve.cov(nx.clone());
    let r = |a: &LieAlgebraElement, b: &LieAlgebraElement, c: &LieAlgebraElement| curve.curv(a, b, c);
    let dt_r = |a: &Field, b: &Field, c: &Field| curve.dt_r(a.clone(), b.clone(), c.clone())(0.0);

    // (∇_X R)(∇_Y Y, Y)Y along s ↦ g Exp(s 𝒳⁰) with random extensions.
    let nabla_x_r = {
        let u = xf(0.0);
        let mut ext = |base: LieAlgebraElement| -> Field {
            let r1 = random_element(rng, n, 1.0);
            let r2 = random_element(rng, n, 1.0);
            Rc::new(move |s| &base + &r1 * s + &r2 * (s * s))
        };
        let (a, b, c) = (ext(ny(0.0)), ext(w0.clone()), ext(w0.clone()));
        let cov_s = |f: &Field| d5(&**f, 0.0) + nab(&u, &f(0.0));
        let rabc: Field = {
            let (a, b, c) = (a.clone(), b.clone(), c.clone());
            Rc::new(move |s| model.curvature_g(&a(s), &b(s), &c(s)).unwrap())
        };
        cov_s(&rabc)
            - r(&cov_s(&a), &b(0.0), &c(0.0))
            - r(&a(0.0), &cov_s(&b), &c(0.0))
            - r(&a(0.0), &b(0.0), &cov_s(&c))
    };

    let (y0, ny0, nny0) = (y(0.0), ny(0.0), nny(0.0));
    let (x00, nx0, nnx0) = (xf(0.0), nx(0.0), nnx(0.0));

    let mut out = curve.dt2_r(xf.clone(), y.clone(), y.clone(), 0.0);
    out += nabla_x_r;
    out += r(&r(&x00, &y0, &y0), &y0, &y0);
    out += r(&x00, &nny0, &y0);
    out += r(&nx0, &y0, &ny0) * 4.0;
    out += (dt_r(&nx, &y, &y) + dt_r(&xf, &ny, &y) + r(&nnx0, &y0, &y0)) * 2.0;
    out += (dt_r(&xf, &y, &ny) + r(&x00, &y0, &nny0) + r(&x00, &ny0, &ny0)) * 3.0;
    out
}

/// Null combination of the fundamental fields at the end of `base`:
/// initial jets `(0, 0, c_first, c_second)` of a bi-Jacobi field whose
/// value and first jet vanish at both ends (up to the conditioning of A(b)).
pub fn admissible_jacobi_seed(scan: &ConjugacyScan, n: usize) -> (JacobiState, f64) {
    let a_end: &DMatrix<f64> = scan.a_samples().last().unwrap();
    let svd = a_end.transpose().svd(false, true);
    let v_t = svd.v_t.unwrap();
    let sv = &svd.singular_values;
    let (imin, _) = sv.argmin();
    let c = v_t.row(imin).transpose();
    let seed = JacobiState {
        x0: LieAlgebraElement::zeros(n),
        x1: LieAlgebraElement::zeros(n),
        x2: LieAlgebraElement::from_vec(c.rows(0, n).iter().copied().collect()),
        x3: LieAlgebraElement::from_vec(c.rows(n, n).iter().copied().collect()),
    };
    (seed, sv.min() / sv.max())
}

/// Random admissible variation: windowed sum of a few random modes.
pub fn random_variation(
    model: &GroupModel,
    base: &CubicTrajectory,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> VariationField {
    let n = model.dim();
    let (a, b) = (base.start(), base.end());
    let modes: Vec<(LieAlgebraElement, LieAlgebraElement, f64)> = (0..3)
        .map(|_| (random_element(rng, n, amplitude), random_element(rng, n, amplitude), rng.random_range(0.5..3.0)))
        .collect();
    VariationField::windowed(model, base, move |t| {
        let s = (t - a) / (b - a);
        let mut out = LieAlgebraElement::zeros(n);
        for (c, d, f) in &modes {
            out += c * (std::f64::consts::PI * f * s).sin() + d * (std::f64::consts::PI * f * s).cos();
        }
        out
    })
    .unwrap()
}
