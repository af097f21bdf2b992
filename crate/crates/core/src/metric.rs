//! Distances on the state manifolds and the least-squares residual form used
//! by the one-step fits.
//!
//! Every chart distance is a weighted sum of block norms
//! `dist(x, y) = Σ_b c_b ‖r_b‖`:
//!
//! - point clouds: one block per particle, `c_b = 1/N` (mean particle distance);
//! - polar: one block, the Cartesian difference of the two points (the flat
//!   metric `dq₁² + q₁² dq₂²` written in Cartesian coordinates);
//! - grid: one block, the discrete L² difference `√h·(u − v)`.
//!
//! For Levenberg–Marquardt these are rewritten as `‖r̃‖²` with
//! `r̃_b = √c_b · r_b / s_b^{1/4}`, `s_b = ‖r_b‖² + ε²`. The Jacobian freezes
//! the weights `s_b` at the linearisation point (iteratively reweighted least
//! squares), which keeps Gauss–Newton steps well behaved near zero residual.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::actions::{Chart, StatePoint};
use crate::error::{invalid, Result};

/// Smoothing of the block norms; far below any residual of interest.
pub const NORM_SMOOTHING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    Mean,
    Max,
}

fn particle_norms(p: &StatePoint, q: &StatePoint) -> Result<Vec<f64>> {
    let (Some(n), Some(m)) = (p.particles(), q.particles()) else {
        return Err(invalid("cloud_distance needs two point clouds"));
    };
    if n != m {
        return Err(invalid(alloc::format!("particle count mismatch: {n} vs {m}")));
    }
    Ok(p.coords()
        .chunks_exact(3)
        .zip(q.coords().chunks_exact(3))
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
        .collect())
}

/// Mean or max over particles of the Euclidean particle displacement.
pub fn cloud_distance(p: &StatePoint, q: &StatePoint, mode: DistanceMode) -> Result<f64> {
    let norms = particle_norms(p, q)?;
    if norms.is_empty() {
        return Ok(0.0);
    }
    Ok(match mode {
        DistanceMode::Mean => norms.iter().sum::<f64>() / norms.len() as f64,
        DistanceMode::Max => norms.iter().copied().fold(0.0, f64::max),
    })
}

fn polar_to_cartesian(q: &[f64]) -> [f64; 2] {
    [q[0] * q[1].cos(), q[0] * q[1].sin()]
}

/// Chart distance: mean particle distance, polar Euclidean distance, or
/// discrete L² distance on a periodic grid.
pub fn state_distance(a: &StatePoint, b: &StatePoint) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(invalid("state_distance: states differ in chart or shape"));
    }
    match a.chart() {
        Chart::PointCloud { .. } => cloud_distance(a, b, DistanceMode::Mean),
        Chart::Polar => {
            let (p, q) = (polar_to_cartesian(a.coords()), polar_to_cartesian(b.coords()));
            Ok(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
        }
        Chart::Grid { period } => {
            let h = period / a.dim() as f64;
            let ss: f64 = a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).powi(2)).sum();
            Ok((h * ss).sqrt())
        }
    }
}

/// Diagonal of the Riemannian metric at `x` in chart coordinates, scaled so
/// that point clouds average over particles and grids integrate over the period.
pub fn metric_weights(x: &StatePoint) -> Vec<f64> {
    match x.chart() {
        Chart::PointCloud { particles } => alloc::vec![1.0 / particles.max(1) as f64; x.dim()],
        Chart::Polar => alloc::vec![1.0, x.coords()[0].powi(2)],
        Chart::Grid { period } => alloc::vec![period / x.dim() as f64; x.dim()],
    }
}

/// `‖v‖²` in the metric at `x`.
pub fn tangent_norm_sq(x: &StatePoint, v: &[f64]) -> f64 {
    metric_weights(x).iter().zip(v).map(|(w, vi)| w * vi * vi).sum()
}

/// Block structure of the distance between `target` and a predicted state:
/// raw difference blocks (`target − predicted`, mapped into the block space)
/// plus the map from predicted-state perturbations to block perturbations.
struct Blocks {
    diffs: Vec<f64>,
    block_len: usize,
    weight: f64,
}

fn blocks(target: &StatePoint, predicted: &StatePoint) -> Result<Blocks> {
    if !target.same_shape(predicted) {
        return Err(invalid("residuals: states differ in chart or shape"));
    }
    Ok(match target.chart() {
        Chart::PointCloud { particles } => Blocks {
            diffs: target.coords().iter().zip(predicted.coords()).map(|(t, p)| t - p).collect(),
            block_len: 3,
            weight: 1.0 / particles.max(1) as f64,
        },
        Chart::Polar => {
            let (t, p) = (polar_to_cartesian(target.coords()), polar_to_cartesian(predicted.coords()));
            Blocks {
                diffs: alloc::vec![t[0] - p[0], t[1] - p[1]],
                block_len: 2,
                weight: 1.0,
            }
        }
        Chart::Grid { period } => {
            let sh = (period / target.dim() as f64).sqrt();
            Blocks {
                diffs: target.coords().iter().zip(predicted.coords()).map(|(t, p)| sh * (t - p)).collect(),
                block_len: target.dim(),
                weight: 1.0,
            }
        }
    })
}

fn block_scales(b: &Blocks) -> Vec<f64> {
    b.diffs
        .chunks(b.block_len)
        .map(|r| {
            let s = r.iter().map(|v| v * v).sum::<f64>() + NORM_SMOOTHING * NORM_SMOOTHING;
            b.weight.sqrt() / s.sqrt().sqrt()
        })
        .collect()
}

/// Residual vector `r̃` with `‖r̃‖² ≈ state_distance(target, predicted)`.
pub fn distance_residuals(target: &StatePoint, predicted: &StatePoint) -> Result<Vec<f64>> {
    let b = blocks(target, predicted)?;
    let scales = block_scales(&b);
    Ok(b.diffs
        .chunks(b.block_len)
        .zip(&scales)
        .flat_map(|(r, s)| r.iter().map(move |v| v * s))
        .collect())
}

/// Jacobian of [`distance_residuals`] (weights frozen) given the derivative
/// `dpred` (`dim(ℳ) × n_params`) of the predicted state.
pub fn distance_residual_jacobian(target: &StatePoint, predicted: &StatePoint, dpred: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b = blocks(target, predicted)?;
    let scales = block_scales(&b);
    let np = dpred.ncols();
    let mut out = DMatrix::zeros(b.diffs.len(), np);
    match predicted.chart() {
        Chart::PointCloud { .. } => {
            for (row, _) in b.diffs.iter().enumerate() {
                let s = scales[row / 3];
                for c in 0..np {
                    out[(row, c)] = -s * dpred[(row, c)];
                }
            }
        }
        Chart::Polar => {
            let (q1, q2) = (predicted.coords()[0], predicted.coords()[1]);
            let jac = [[q2.cos(), -q1 * q2.sin()], [q2.sin(), q1 * q2.cos()]];
            for r in 0..2 {
                for c in 0..np {
                    out[(r, c)] = -scales[0] * (jac[r][0] * dpred[(0, c)] + jac[r][1] * dpred[(1, c)]);
                }
            }
        }
        Chart::Grid { period } => {
            let sh = (period / predicted.dim() as f64).sqrt();
            for r in 0..b.diffs.len() {
                for c in 0..np {
                    out[(r, c)] = -scales[0] * sh * dpred[(r, c)];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(points: &[[f64; 3]]) -> StatePoint {
        StatePoint::from_points(points)
    }

    #[test]
    fn examples() {
        let a = cloud(&[[0.0; 3], [1.0, 2.0, 3.0]]);
        assert_eq!(cloud_distance(&a, &a, DistanceMode::Mean).unwrap(), 0.0);
        let p = cloud(&[[0.0; 3]]);
        let q = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(cloud_distance(&p, &q, DistanceMode::Mean).unwrap(), 1.0);
        let p = cloud(&[[0.0; 3], [0.0; 3]]);
        let q = cloud(&[[0.0, 1.0, 0.0], [0.0, 0.0, 3.0]]);
        assert_eq!(cloud_distance(&p, &q, DistanceMode::Mean).unwrap(), 2.0);
        assert_eq!(cloud_distance(&p, &q, DistanceMode::Max).unwrap(), 3.0);
        assert!(cloud_distance(&p, &cloud(&[[0.0; 3]]), DistanceMode::Mean).is_err());
    }

    #[test]
    fn squared_residuals_reproduce_distances() {
        let p = cloud(&[[0.0; 3], [0.0; 3], [1.0; 3]]);
        let q = cloud(&[[0.0, 1.0, 0.0], [0.0, 0.0, 3.0], [1.0, 1.5, 0.2]]);
        let r = distance_residuals(&p, &q).unwrap();
        let d = state_distance(&p, &q).unwrap();
        assert!((r.iter().map(|v| v * v).sum::<f64>() - d).abs() < 1e-12);

        let a = StatePoint::polar(2.0, 0.3).unwrap();
        let b = StatePoint::polar(1.5, 1.1).unwrap();
        let r = distance_residuals(&a, &b).unwrap();
        assert!((r.iter().map(|v| v * v).sum::<f64>() - state_distance(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn polar_distance_matches_metric_for_small_steps() {
        let a = StatePoint::polar(2.0, 0.3).unwrap();
        let v = [1e-6, 2e-6];
        let b = StatePoint::polar(2.0 + v[0], 0.3 + v[1]).unwrap();
        let d = state_distance(&a, &b).unwrap();
        assert!((d * d - tangent_norm_sq(&a, &v)).abs() < 1e-5 * d * d);
    }

    #[test]
    fn residual_jacobian_matches_frozen_weight_difference() {
        // A translation of every particle by t along a fixed direction.
        let target = cloud(&[[0.3, 0.1, 0.0], [1.0, -0.5, 0.2]]);
        let base = cloud(&[[0.0; 3], [1.0, 0.0, 0.0]]);
        let dir = [0.2, -0.1, 0.4];
        let shifted = |t: f64| StatePoint::point_cloud(base.coords().iter().enumerate().map(|(i, v)| v + t * dir[i % 3]).collect()).unwrap();
        let dpred = DMatrix::from_fn(6, 1, |r, _| dir[r % 3]);
        let j = distance_residual_jacobian(&target, &base, &dpred).unwrap();
        let b0 = blocks(&target, &base).unwrap();
        let scales = block_scales(&b0);
        let h = 1e-6;
        let b1 = blocks(&target, &shifted(h)).unwrap();
        for r in 0..6 {
            let fd = scales[r / 3] * (b1.diffs[r] - b0.diffs[r]) / h;
            assert!((fd - j[(r, 0)]).abs() < 1e-8);
        }
    }

    fn arb_cloud() -> impl Strategy<Value = StatePoint> {
        proptest::collection::vec(-5.0..5.0f64, 12).prop_map(|v| StatePoint::point_cloud(v).unwrap())
    }

    proptest! {
        #[test]
        fn mean_distance_is_a_metric(a in arb_cloud(), b in arb_cloud(), c in arb_cloud()) {
            let d = |x: &StatePoint, y: &StatePoint| cloud_distance(x, y, DistanceMode::Mean).unwrap();
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
            prop_assert_eq!(d(&a, &a), 0.0);
            if a != b {
                prop_assert!(d(&a, &b) > 0.0);
            }
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }
    }
}
