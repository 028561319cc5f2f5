//! Finite-difference stencils and quadrature on uniform grids.

use crate::algebra::LieAlgebraElement;

/// Fourth-order first-derivative weights for node `k` of a grid with
/// `len` nodes: central where possible, one-sided near the ends.
/// Returns the offset of the first stencil node and the five weights
/// (to be divided by `12 h`).
pub fn derivative_stencil(k: usize, len: usize) -> (usize, [f64; 5]) {
    assert!(len >= 5, "fourth-order stencils need at least five nodes");
    match k {
        0 => (0, [-25.0, 48.0, -36.0, 16.0, -3.0]),
        1 => (0, [-3.0, -10.0, 18.0, -6.0, 1.0]),
        _ if k == len - 1 => (len - 5, [3.0, -16.0, 36.0, -48.0, 25.0]),
        _ if k == len - 2 => (len - 5, [-1.0, 6.0, -18.0, 10.0, 3.0]),
        _ => (k - 2, [1.0, -8.0, 0.0, 8.0, -1.0]),
    }
}

/// Time derivative of uniformly sampled algebra-valued data.
pub fn differentiate(values: &[LieAlgebraElement], dt: f64) -> Vec<LieAlgebraElement> {
    let len = values.len();
    let n = values[0].dim();
    (0..len)
        .map(|k| {
            let (start, w) = derivative_stencil(k, len);
            let mut acc = LieAlgebraElement::zeros(n);
            for (j, &wj) in w.iter().enumerate() {
                if wj != 0.0 {
                    acc += &values[start + j] * wj;
                }
            }
            acc * (1.0 / (12.0 * dt))
        })
        .collect()
}

/// Scalar version of [`differentiate`].
pub fn differentiate_scalar(values: &[f64], dt: f64) -> Vec<f64> {
    let len = values.len();
    (0..len)
        .map(|k| {
            let (start, w) = derivative_stencil(k, len);
            w.iter().enumerate().map(|(j, wj)| wj * values[start + j]).sum::<f64>() / (12.0 * dt)
        })
        .collect()
}

/// Composite Simpson rule on a uniform grid. An odd number of intervals
/// closes with Simpson's 3/8 rule on the last three.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let intervals = values.len().saturating_sub(1);
    match intervals {
        0 => 0.0,
        1 => 0.5 * dt * (values[0] + values[1]),
        _ => {
            let even = if intervals % 2 == 0 { intervals } else { intervals - 3 };
            let mut sum = 0.0;
            let mut k = 0;
            while k < even {
                sum += values[k] + 4.0 * values[k + 1] + values[k + 2];
                k += 2;
            }
            let mut total = sum * dt / 3.0;
            if even < intervals {
                let v = &values[even..];
                total += 3.0 * dt / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

/// Five-point central derivative of a scalar function.
pub fn central_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}
