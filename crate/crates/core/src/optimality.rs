//! Biconjugate-point scan along a modified cubic.
//!
//! The `2n` fundamental bi-Jacobi fields start from `𝒳⁰(a) = 𝒳¹(a) = 0`
//! with `𝒳²(a) = A_i` (first family) or `𝒳³(a) = A_i` (second family).
//! Row `i` of `A(t)` holds `(𝒳⁰_i(t), 𝒳¹_i(t))`. The cubic is an Ω-local
//! minimizer exactly when `A(t)` stays nonsingular on `(a, b]`.
//!
//! Two detectors run on the sampled `A(t)`: a sign change of `det A` and a
//! dip of `σ_min / σ_max` below a relative tolerance. The determinant alone
//! cannot be thresholded since it grows like `(t − a)⁴ⁿ`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algebra::GroupModel;
use crate::dynamics::CubicTrajectory;
use crate::error::{Error, Result};
use crate::jacobi::JacobiBase;
use crate::potential::PotentialSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    OmegaLocalMinimizer,
    NotMinimizer,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::OmegaLocalMinimizer => "OmegaLocalMinimizer",
            Verdict::NotMinimizer => "NotMinimizer",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Evaluates `A(t)` at arbitrary times inside the scanned interval.
pub type Refiner = Arc<dyn Fn(f64) -> Option<DMatrix<f64>> + Send + Sync>;

/// Sampled fundamental matrix with its determinant and conditioning.
#[derive(Clone)]
pub struct ConjugacyScan {
    times: Vec<f64>,
    a_samples: Vec<DMatrix<f64>>,
    det_values: Vec<f64>,
    sv_ratio: Vec<f64>,
    refiner: Option<Refiner>,
}

impl fmt::Debug for ConjugacyScan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConjugacyScan")
            .field("nodes", &self.times.len())
            .field("det_values", &self.det_values)
            .field("sv_ratio", &self.sv_ratio)
            .field("refinable", &self.refiner.is_some())
            .finish()
    }
}

/// `(det A, σ_min / σ_max)`, with ratio zero for the zero matrix.
fn measures(a: &DMatrix<f64>) -> (f64, f64) {
    let det = a.determinant();
    let sv = a.singular_values();
    let max = sv.max();
    let ratio = if max > 0.0 { sv.min() / max } else { 0.0 };
    (det, ratio)
}

impl ConjugacyScan {
    /// Builds a scan from precomputed samples on a uniform grid.
    pub fn from_samples(times: Vec<f64>, a_samples: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.len() != a_samples.len() || times.len() < 2 {
            return Err(Error::InvalidArgument("scan needs matching times and samples (at least two)".into()));
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidArgument("scan times must be strictly increasing".into()));
        }
        let m = a_samples[0].nrows();
        if a_samples.iter().any(|a| a.nrows() != m || a.ncols() != m) {
            return Err(Error::InvalidArgument("scan samples must be square of equal size".into()));
        }
        if a_samples.iter().any(|a| a.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument("scan samples must be finite".into()));
        }
        let (det_values, sv_ratio) = a_samples.iter().map(measures).unzip();
        Ok(Self { times, a_samples, det_values, sv_ratio, refiner: None })
    }

    /// Samples `f` on `times` and keeps it for refinement.
    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Result<Self> {
        let samples = times.iter().map(|&t| f(t)).collect();
        Ok(Self::from_samples(times, samples)?.with_refiner(Arc::new(move |t| Some(f(t)))))
    }

    pub fn with_refiner(mut self, refiner: Refiner) -> Self {
        self.refiner = Some(refiner);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn a_samples(&self) -> &[DMatrix<f64>] {
        &self.a_samples
    }

    pub fn det_values(&self) -> &[f64] {
        &self.det_values
    }

    pub fn sv_ratio(&self) -> &[f64] {
        &self.sv_ratio
    }

    pub fn dt(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    pub fn min_sv_ratio(&self, burn_in: usize) -> f64 {
        self.sv_ratio.iter().skip(burn_in).copied().fold(f64::INFINITY, f64::min)
    }

    /// `A(t)` off the grid, when the scan carries a refiner.
    pub fn sample_at(&self, t: f64) -> Option<DMatrix<f64>> {
        self.refiner.as_ref().and_then(|r| r(t))
    }

    fn eval(&self, t: f64) -> Option<(f64, f64)> {
        self.sample_at(t).map(|a| measures(&a))
    }
}

/// Integrates the `2n` fundamental bi-Jacobi fields along `base` and
/// samples `A(t)` at every grid node.
pub fn fundamental_scan(model: &GroupModel, spec: &PotentialSpec, base: &CubicTrajectory) -> Result<ConjugacyScan> {
    let jb = Arc::new(JacobiBase::new(model, spec, base)?);
    let n = model.dim();
    let columns = (0..2 * n)
        .into_par_iter()
        .map(|i| {
            let mut seed = DMatrix::zeros(4 * n, 1);
            seed[(if i < n { 2 * n + i } else { 3 * n + i - n }, 0)] = 1.0;
            jb.propagate(&seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let len = base.times().len();
    let jets: Vec<DMatrix<f64>> =
        (0..len).map(|k| DMatrix::from_fn(4 * n, 2 * n, |r, c| columns[c][k][(r, 0)])).collect();
    let samples = jets.iter().map(|x| fundamental_matrix(x, n)).collect();
    let scan = ConjugacyScan::from_samples(base.times().to_vec(), samples)?;

    let jets = Arc::new(jets);
    let refiner: Refiner = Arc::new(move |t| {
        let (k, tau) = jb.trajectory().locate(t);
        let x = jb.step_from_node(k, &jets[k], tau).ok()?;
        Some(fundamental_matrix(&x, n))
    });
    Ok(scan.with_refiner(refiner))
}

/// Rows are solutions, columns `(𝒳⁰, 𝒳¹)` coordinates.
fn fundamental_matrix(jets: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    jets.rows(0, 2 * n).transpose()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectOptions {
    pub rel_tol: f64,
    /// Nodes after `a` excluded from detection.
    pub burn_in: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, burn_in: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectionCriterion {
    SignChange,
    SingularValue,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectionStatus {
    Confirmed,
    /// The ratio dipped below `10 · rel_tol` but could not be pushed below
    /// `rel_tol`.
    Unresolved,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    /// Best estimate of the biconjugate time.
    pub t: f64,
    /// Bracket containing the event.
    pub lo: f64,
    pub hi: f64,
    /// First grid node past a sign change, or the grid node closest to a
    /// singular-value minimum.
    pub node: usize,
    pub criterion: DetectionCriterion,
    pub status: DetectionStatus,
    /// Smallest `σ_min / σ_max` seen while refining.
    pub sv_ratio: f64,
}

fn nearest_node(scan: &ConjugacyScan, t: f64) -> usize {
    let k = ((t - scan.times[0]) / scan.dt()).round();
    (k.max(0.0) as usize).min(scan.times.len() - 1)
}

/// Brackets of strict sign changes of `det A`, narrowed by bisection to
/// width `dt / 16` when the scan can be refined.
pub fn detect_sign_changes(scan: &ConjugacyScan, opts: &DetectOptions) -> Vec<Detection> {
    let dt = scan.dt();
    let mut out = Vec::new();
    for k in (opts.burn_in + 1)..scan.times.len() {
        let (d0, d1) = (scan.det_values[k - 1], scan.det_values[k]);
        if !(d0 * d1 < 0.0 || (d1 == 0.0 && d0 != 0.0)) {
            continue;
        }
        let (mut lo, mut hi) = (scan.times[k - 1], scan.times[k]);
        let mut sign_lo = d0.signum();
        let mut ratio = scan.sv_ratio[k - 1].min(scan.sv_ratio[k]);
        if scan.refiner.is_some() {
            while hi - lo > dt / 16.0 * (1.0 + 1e-9) {
                let mid = 0.5 * (lo + hi);
                let Some((d, r)) = scan.eval(mid) else { break };
                ratio = ratio.min(r);
                if d.signum() == sign_lo && d != 0.0 {
                    lo = mid;
                    sign_lo = d.signum();
                } else {
                    hi = mid;
                }
            }
        }
        out.push(Detection {
            t: 0.5 * (lo + hi),
            lo,
            hi,
            node: k,
            criterion: DetectionCriterion::SignChange,
            status: DetectionStatus::Confirmed,
            sv_ratio: ratio,
        });
    }
    out
}

/// Golden-section minimisation of `σ_min / σ_max` on `[lo, hi]`.
fn golden_min(scan: &ConjugacyScan, mut lo: f64, mut hi: f64, tol: f64) -> Option<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let ratio = |t: f64| scan.eval(t).map(|(_, r)| r);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = ratio(x1)?;
    let mut f2 = ratio(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = ratio(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = ratio(x2)?;
        }
    }
    Some(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Local minima of `σ_min / σ_max` that reach zero within `rel_tol`.
///
/// With a refiner every grid minimum is refined by golden-section search;
/// otherwise grid values are classified directly.
pub fn detect_singular_values(scan: &ConjugacyScan, opts: &DetectOptions) -> Vec<Detection> {
    let dt = scan.dt();
    let sv = &scan.sv_ratio;
    let last = sv.len() - 1;
    let mut out = Vec::new();
    for k in opts.burn_in.max(1)..=last {
        let left_ok = sv[k] <= sv[k - 1];
        let right_ok = k == last || sv[k] < sv[k + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let (t, ratio, lo, hi) = if scan.refiner.is_some() {
            let lo = scan.times[k - 1].max(scan.times[opts.burn_in.min(last)]);
            let hi = scan.times[(k + 1).min(last)];
            match golden_min(scan, lo, hi, dt * 1e-9) {
                Some((t, r)) if r <= sv[k] => (t, r, t, t),
                _ => (scan.times[k], sv[k], scan.times[k], scan.times[k]),
            }
        } else {
            (scan.times[k], sv[k], scan.times[k], scan.times[k])
        };
        let status = if ratio < opts.rel_tol {
            DetectionStatus::Confirmed
        } else if ratio < 10.0 * opts.rel_tol {
            DetectionStatus::Unresolved
        } else {
            continue;
        };
        out.push(Detection {
            t,
            lo: lo - 0.5 * dt / 16.0,
            hi: hi + 0.5 * dt / 16.0,
            node: nearest_node(scan, t),
            criterion: DetectionCriterion::SingularValue,
            status,
            sv_ratio: ratio,
        });
    }
    out
}

/// Runs both detectors and merges events closer than one grid step.
pub fn detect_biconjugate(scan: &ConjugacyScan, opts: &DetectOptions) -> Vec<Detection> {
    let dt = scan.dt();
    let mut merged = detect_sign_changes(scan, opts);
    for sv in detect_singular_values(scan, opts) {
        match merged.iter_mut().find(|d| (d.t - sv.t).abs() <= dt) {
            Some(d) => {
                if d.lo <= sv.t && sv.t <= d.hi {
                    d.t = sv.t;
                }
                d.criterion = DetectionCriterion::Both;
                d.sv_ratio = d.sv_ratio.min(sv.sv_ratio);
            }
            None => merged.push(sv),
        }
    }
    merged.sort_by(|a, b| a.t.total_cmp(&b.t));
    merged
}

pub fn verdict(_scan: &ConjugacyScan, detections: &[Detection]) -> Verdict {
    if detections.iter().any(|d| d.status == DetectionStatus::Confirmed) {
        Verdict::NotMinimizer
    } else if detections.is_empty() {
        Verdict::OmegaLocalMinimizer
    } else {
        Verdict::Inconclusive
    }
}

/// Earliest confirmed biconjugate time.
pub fn first_biconjugate(detections: &[Detection]) -> Option<f64> {
    detections.iter().filter(|d| d.status == DetectionStatus::Confirmed).map(|d| d.t).min_by(f64::total_cmp)
}
