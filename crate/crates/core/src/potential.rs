//! Artificial obstacle potentials `V(g) = f(d²(g, g₀))`.
//!
//! The distance is always measured with the bi-invariant inner product `B`,
//! so that `d(g, g₀) = ‖Log(g⁻¹g₀)‖_B` whenever `h = g⁻¹g₀` stays inside the
//! convex neighbourhood of the identity. All gradients are expressed in the
//! left trivialisation and with respect to the kinetic metric `M`.
//!
//! Sign convention: moving `g` to `g·Exp(sζ)` moves `h` to `Exp(−sζ)h`, and
//! `d/ds ‖Log(Exp(−sζ)h)‖²_B = −2⟨Log h, ζ⟩_B`. Hence
//!
//! ```text
//! grad₁V_ext(e, h) = −2 f'(‖Log h‖²_B) β(Log h),     β = M⁻¹B.
//! ```
//!
//! This is the sign that agrees with finite differences of `V`; the
//! gradient points away from the obstacle for increasing `f`.
//!
//! The directional operator `D_𝒳 grad₁V_ext(e, h)` is evaluated as
//! `d/ds|₀ grad₁V_ext(e, Exp(−s𝒳)h)` by central differences.

use nalgebra::DMatrix;

use crate::algebra::{GroupElement, GroupKind, GroupModel, LieAlgebraElement};
use crate::error::{Error, Result};

/// Profile `f` applied to the squared distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// `f(s) = τ / (s + ρ)`
    InverseShift {
        tau: f64,
        rho: f64,
    },
    /// `f(s) = τ exp(−s / σ²)`
    GaussianBump {
        tau: f64,
        sigma2: f64,
    },
    /// `f(s) = τ s`
    Quadratic {
        tau: f64,
    },
    Zero,
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidPotential(msg.to_string()));
        match *self {
            Shape::InverseShift { tau, rho } => {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return bad("tau must be finite and non-negative");
                }
                if !(rho > 0.0 && rho.is_finite()) {
                    return bad("rho must be positive");
                }
            }
            Shape::GaussianBump { tau, sigma2 } => {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return bad("tau must be finite and non-negative");
                }
                if !(sigma2 > 0.0 && sigma2.is_finite()) {
                    return bad("sigma2 must be positive");
                }
            }
            Shape::Quadratic { tau } => {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return bad("tau must be finite and non-negative");
                }
            }
            Shape::Zero => {}
        }
        Ok(())
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Shape::InverseShift { tau, rho } => tau / (s + rho),
            Shape::GaussianBump { tau, sigma2 } => tau * (-s / sigma2).exp(),
            Shape::Quadratic { tau } => tau * s,
            Shape::Zero => 0.0,
        }
    }

    /// `f'(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Shape::InverseShift { tau, rho } => -tau / ((s + rho) * (s + rho)),
            Shape::GaussianBump { tau, sigma2 } => -tau / sigma2 * (-s / sigma2).exp(),
            Shape::Quadratic { tau } => tau,
            Shape::Zero => 0.0,
        }
    }
}

/// Finite-difference settings for `D_𝒳`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    /// Step is `step_scale · (1 + ‖Log h‖_B)`.
    pub step_scale: f64,
    /// Combine steps `δ` and `δ/2` by Richardson extrapolation.
    pub richardson: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { step_scale: 1e-5, richardson: false }
    }
}

/// A point obstacle with its potential profile.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub obstacle: GroupElement,
    pub shape: Shape,
    pub fd: FdConfig,
}

impl PotentialSpec {
    pub fn new(model: &GroupModel, obstacle: GroupElement, shape: Shape) -> Result<Self> {
        model.check_element(&obstacle)?;
        shape.validate()?;
        Ok(Self { obstacle, shape, fd: FdConfig::default() })
    }

    /// `V ≡ 0` with the obstacle parked at the identity.
    pub fn zero(model: &GroupModel) -> Self {
        Self { obstacle: model.identity(), shape: Shape::Zero, fd: FdConfig::default() }
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn is_zero(&self) -> bool {
        match self.shape {
            Shape::Zero => true,
            Shape::InverseShift { tau, .. } | Shape::GaussianBump { tau, .. } | Shape::Quadratic { tau } => tau == 0.0,
        }
    }

    /// `h = g⁻¹g₀`.
    pub fn relative(&self, g: &GroupElement) -> GroupElement {
        g.inverse().compose(&self.obstacle)
    }

    /// `V_ext(e, h) = f(‖Log h‖²_B)`.
    pub fn value_ext(&self, model: &GroupModel, h: &GroupElement) -> Result<f64> {
        if matches!(self.shape, Shape::Zero) {
            return Ok(0.0);
        }
        let log_h = model.log(h)?;
        Ok(self.shape.value(model.bi_inner(&log_h, &log_h)))
    }

    /// `V(g)`.
    pub fn value(&self, model: &GroupModel, g: &GroupElement) -> Result<f64> {
        self.value_ext(model, &self.relative(g))
    }

    /// Bi-invariant distance `d(g, g₀) = ‖Log(g⁻¹g₀)‖_B`.
    pub fn distance(&self, model: &GroupModel, g: &GroupElement) -> Result<f64> {
        Ok(model.bi_norm(&model.log(&self.relative(g))?))
    }

    /// `grad₁V_ext(e, h)` in basis coordinates.
    pub fn grad1_vext(&self, model: &GroupModel, h: &GroupElement) -> Result<LieAlgebraElement> {
        if matches!(self.shape, Shape::Zero) {
            model.check_element(h)?;
            return Ok(LieAlgebraElement::zeros(model.dim()));
        }
        let log_h = model.log(h)?;
        let fp = self.shape.derivative(model.bi_inner(&log_h, &log_h));
        Ok(model.apply_beta(&log_h) * (-2.0 * fp))
    }

    fn fd_step(&self, model: &GroupModel, h: &GroupElement) -> Result<f64> {
        let log_h = model.log(h)?;
        Ok(self.fd.step_scale * (1.0 + model.bi_norm(&log_h)))
    }

    /// Central difference of `s ↦ grad₁V_ext(e, Exp(−s u)h)` with step `delta`.
    fn directional(
        &self,
        model: &GroupModel,
        h: &GroupElement,
        u: &LieAlgebraElement,
        delta: f64,
    ) -> Result<LieAlgebraElement> {
        if model.kind() == GroupKind::So3 {
            let angle = model.angle(h);
            if angle + delta * u.norm() >= std::f64::consts::PI - model.cut_locus_tol() {
                return Err(Error::StepUnderflow { step: delta, angle });
            }
        }
        let shifted = |s: f64| model.exp_unchecked(&(u * (-s))).compose(h);
        let plus = self.grad1_vext(model, &shifted(delta))?;
        let minus = self.grad1_vext(model, &shifted(-delta))?;
        Ok((plus - minus) * (0.5 / delta))
    }

    fn directional_default(
        &self,
        model: &GroupModel,
        h: &GroupElement,
        u: &LieAlgebraElement,
    ) -> Result<LieAlgebraElement> {
        let delta = self.fd_step(model, h)?;
        let coarse = self.directional(model, h, u, delta)?;
        if !self.fd.richardson {
            return Ok(coarse);
        }
        let fine = self.directional(model, h, u, 0.5 * delta)?;
        Ok((fine * 4.0 - coarse) * (1.0 / 3.0))
    }

    /// Matrix of `𝒳 ↦ D_𝒳 grad₁V_ext(e, h)` in basis coordinates.
    pub fn d_matrix(&self, model: &GroupModel, h: &GroupElement) -> Result<DMatrix<f64>> {
        let n = model.dim();
        let mut out = DMatrix::zeros(n, n);
        if self.is_zero() {
            model.check_element(h)?;
            return Ok(out);
        }
        for i in 0..n {
            let col = self.directional_default(model, h, &LieAlgebraElement::basis(n, i))?;
            out.set_column(i, col.coords());
        }
        Ok(out)
    }

    /// `D_𝒳 grad₁V_ext(e, h)`, linear in `𝒳`.
    pub fn dx_grad1_vext(
        &self,
        model: &GroupModel,
        h: &GroupElement,
        x: &LieAlgebraElement,
    ) -> Result<LieAlgebraElement> {
        model.check_dim(x)?;
        Ok((self.d_matrix(model, h)? * x.coords()).into())
    }

    /// Matrix of the full potential contribution
    /// `𝒳 ↦ (D_𝒳 + ∇^𝔤_𝒳) grad₁V_ext(e, h)`.
    pub fn hessian_matrix(&self, model: &GroupModel, h: &GroupElement) -> Result<DMatrix<f64>> {
        let mut out = self.d_matrix(model, h)?;
        if self.is_zero() {
            return Ok(out);
        }
        let grad = self.grad1_vext(model, h)?;
        let n = model.dim();
        for i in 0..n {
            let col = model.nab(&LieAlgebraElement::basis(n, i), &grad);
            for k in 0..n {
                out[(k, i)] += col[k];
            }
        }
        Ok(out)
    }

    /// `(D_𝒳 + ∇^𝔤_𝒳) grad₁V_ext(e, h)`.
    pub fn hessian_term(
        &self,
        model: &GroupModel,
        h: &GroupElement,
        x: &LieAlgebraElement,
    ) -> Result<LieAlgebraElement> {
        model.check_dim(x)?;
        Ok((self.hessian_matrix(model, h)? * x.coords()).into())
    }
}
