//! Shared scenarios for the benchmarks.

use cubicavoid::{CubicState, GroupModel, LieAlgebraElement, PotentialSpec, Shape};

/// SO(3) with inertia `diag(1, 2, 3)`, a Gaussian obstacle near the
/// identity and a slowly turning initial state.
pub fn so3_bump() -> (GroupModel, PotentialSpec, CubicState) {
    let model = GroupModel::so3_diagonal([1.0, 2.0, 3.0]).expect("positive inertia");
    let obstacle = model.exp(&LieAlgebraElement::from_slice(&[0.05, 0.1, -0.05])).expect("small rotation");
    let spec =
        PotentialSpec::new(&model, obstacle, Shape::GaussianBump { tau: 8.0, sigma2: 0.5 }).expect("valid shape");
    let init = CubicState::new(
        model.identity(),
        LieAlgebraElement::from_slice(&[0.2, 0.1, -0.06]),
        LieAlgebraElement::zeros(3),
        LieAlgebraElement::zeros(3),
    );
    (model, spec, init)
}
