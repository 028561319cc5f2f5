//! Modified Riemannian cubics on Lie groups with obstacle-avoidance
//! potentials, and a biconjugate-point test for local optimality.
//!
//! The pipeline is: build a [`GroupModel`] and a [`PotentialSpec`],
//! integrate or shoot a cubic with [`integrate_cubic`] / [`shoot_bvp`], then
//! scan it with [`fundamental_scan`] and [`detect_biconjugate`] to obtain a
//! [`Verdict`].
//!
//! ```
//! use cubicavoid::*;
//!
//! let model = GroupModel::abelian(1).unwrap();
//! let spec = PotentialSpec::zero(&model);
//! let z = LieAlgebraElement::zeros(1);
//! let init = CubicState::new(model.identity(), z.clone(), LieAlgebraElement::from_slice(&[1.0]), z);
//! let traj = integrate_cubic(&model, &spec, &init, 0.0, 1.0, 32).unwrap();
//! let scan = fundamental_scan(&model, &spec, &traj).unwrap();
//! let found = detect_biconjugate(&scan, &DetectOptions::default());
//! assert_eq!(verdict(&scan, &found), Verdict::OmegaLocalMinimizer);
//! ```

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod jacobi;
pub mod numerics;
pub mod optimality;
pub mod potential;

pub use algebra::{GroupElement, GroupKind, GroupModel, LieAlgebraElement};
pub use dynamics::{
    cubic_rhs, integrate_cubic, propagate, shoot_bvp, Boundary, BvpOptions, BvpSolution, CubicRate, CubicState,
    CubicTrajectory,
};
pub use error::{Error, Result};
pub use jacobi::{
    bijacobi_rhs, f_reduced, h2_norm, index_form, integrate_bijacobi, second_variation_fd, IndexForm, JacobiBase,
    JacobiField, JacobiState, VariationField,
};
pub use optimality::{
    detect_biconjugate, detect_sign_changes, detect_singular_values, first_biconjugate, fundamental_scan, verdict,
    ConjugacyScan, DetectOptions, Detection, DetectionCriterion, DetectionStatus, Verdict,
};
pub use potential::{FdConfig, PotentialSpec, Shape};
