//! Error curves, the POD baseline and empirical orbit widths.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::actions::{apply_action, ActionKind, ActionSpec, Chart, StatePoint};
use crate::clustering::affine_registration;
use crate::error::{invalid, Result};
use crate::fitting::fit_one_step;
use crate::lie::{log_map, GroupElement};
use crate::lm::LmConfig;
use crate::metric::{cloud_distance, state_distance, DistanceMode};
use crate::rom::{integrate_action_group, integrate_rom, Integrator, Provenance, RomModel, Trajectory};
use crate::snapshots::{Snapshot, SnapshotSet};
use crate::subalgebra::energy_rank;

/// One snapshot trajectory as a full-order [`Trajectory`].
pub fn trajectory_from_snapshots(traj: &[Snapshot]) -> Trajectory {
    Trajectory {
        times: traj.iter().map(|s| s.time).collect(),
        group_path: None,
        states: traj.iter().map(|s| s.state.clone()).collect(),
        provenance: Provenance::Fom,
    }
}

fn distance(a: &StatePoint, b: &StatePoint, mode: DistanceMode) -> Result<f64> {
    match (a.chart(), mode) {
        (Chart::PointCloud { .. }, _) => cloud_distance(a, b, mode),
        _ => state_distance(a, b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// One reconstruction from `x₀` against the whole trajectory.
    Full,
    /// The ROM restarted at every data state and compared one step later.
    StepAhead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ErrorCurve {
    pub fn max(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.errors.is_empty() {
            0.0
        } else {
            self.errors.iter().sum::<f64>() / self.errors.len() as f64
        }
    }
}

/// Distance between data and ROM over time. Full mode integrates the model
/// from its own `x₀` on the data times; step-ahead mode restarts the ROM at
/// every `x(t_k)` and reports the error at `t_{k+1}`.
pub fn trajectory_errors(fom: &Trajectory, model: &RomModel, mode: ErrorMode, method: Integrator, dist: DistanceMode) -> Result<ErrorCurve> {
    if fom.times.len() != fom.states.len() || fom.is_empty() {
        return Err(invalid("trajectory_errors: empty or inconsistent trajectory"));
    }
    match mode {
        ErrorMode::Full => {
            let rom = integrate_rom(model, &fom.times, method)?;
            let errors = rom
                .states
                .iter()
                .zip(&fom.states)
                .map(|(a, b)| distance(a, b, dist))
                .collect::<Result<Vec<_>>>()?;
            Ok(ErrorCurve {
                times: fom.times.clone(),
                errors,
            })
        }
        ErrorMode::StepAhead => {
            let mut times = Vec::with_capacity(fom.len().saturating_sub(1));
            let mut errors = Vec::with_capacity(times.capacity());
            for k in 0..fom.len().saturating_sub(1) {
                let grid = [fom.times[k], fom.times[k + 1]];
                if !(grid[1] > grid[0]) {
                    return Err(invalid("trajectory_errors: times must strictly increase"));
                }
                let path = integrate_action_group(&model.action, &model.rho, &grid, method)?;
                let pred = apply_action(&model.action, &path[1], &fom.states[k])?;
                times.push(grid[1]);
                errors.push(distance(&pred, &fom.states[k + 1], dist)?);
            }
            Ok(ErrorCurve { times, errors })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PodOptions {
    /// Subtract the mean snapshot first.
    pub center: bool,
    /// Append the snapshot time as an extra row.
    pub include_time: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodResult {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Left singular vectors, one per column.
    pub modes: DMatrix<f64>,
    pub mean: Option<DVector<f64>>,
    pub options: PodOptions,
}

impl PodResult {
    /// Smallest mode count whose singular-value sum exceeds `a` of the total.
    pub fn energy_rank(&self, a: f64) -> usize {
        energy_rank(&self.singular_values, a)
    }

    /// Numerical rank (`σ > 1e-12·σ_max·max(m, n)`).
    pub fn rank(&self) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        let tol = 1e-12 * smax * self.modes.nrows().max(self.singular_values.len()).max(1) as f64;
        self.singular_values.iter().filter(|s| **s > tol).count()
    }
}

fn snapshot_matrix(set: &SnapshotSet, include_time: bool) -> DMatrix<f64> {
    let dim = set.first_state().dim();
    let rows = dim + include_time as usize;
    let mut m = DMatrix::zeros(rows, set.len());
    for (j, s) in set.iter().enumerate() {
        m.view_mut((0, j), (dim, 1)).copy_from_slice(s.state.coords());
        if include_time {
            m[(dim, j)] = s.time;
        }
    }
    m
}

/// SVD of the snapshot matrix (states as columns, one per snapshot).
pub fn pod_svd(set: &SnapshotSet, options: PodOptions) -> Result<PodResult> {
    let mut m = snapshot_matrix(set, options.include_time);
    let mean = if options.center {
        let mean = m.column_mean();
        for mut col in m.column_iter_mut() {
            col -= &mean;
        }
        Some(mean)
    } else {
        None
    };
    let svd = m.svd(true, false);
    let u = svd.u.ok_or_else(|| invalid("pod_svd: SVD did not return modes"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let modes = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    Ok(PodResult {
        singular_values: order.iter().map(|i| svd.singular_values[*i]).collect(),
        modes,
        mean,
        options,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionError {
    pub sup: f64,
    pub mean: f64,
}

/// Distance between every snapshot and its projection onto the leading
/// `n_modes` POD modes (plus the mean when centred).
pub fn pod_reconstruct_error(set: &SnapshotSet, n_modes: usize, center: bool) -> Result<ProjectionError> {
    let pod = pod_svd(set, PodOptions { center, include_time: false })?;
    let rank = pod.rank();
    if n_modes > rank {
        return Err(invalid(alloc::format!(
            "pod_reconstruct_error: {n_modes} modes requested, rank is {rank}"
        )));
    }
    let basis = pod.modes.columns(0, n_modes).into_owned();
    projection_error(set, &basis, pod.mean.as_ref())
}

/// Projection error onto the span of the orthonormal columns of `basis`,
/// offset by `mean`.
pub fn projection_error(set: &SnapshotSet, basis: &DMatrix<f64>, mean: Option<&DVector<f64>>) -> Result<ProjectionError> {
    let (mut sup, mut sum) = (0.0f64, 0.0);
    for s in set.iter() {
        let mut x = DVector::from_column_slice(s.state.coords());
        if let Some(m) = mean {
            x -= m;
        }
        let mut proj = basis * (basis.transpose() * &x);
        if let Some(m) = mean {
            proj += m;
        }
        let d = state_distance(&s.state, &s.state.with_coords(proj.iter().copied().collect())?)?;
        sup = sup.max(d);
        sum += d;
    }
    Ok(ProjectionError {
        sup,
        mean: sum / set.len() as f64,
    })
}

/// Which state each snapshot's orbit distance is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    Fixed(StatePoint),
    /// The first snapshot of the snapshot's own trajectory.
    TrajectoryStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthConfig {
    pub lm: LmConfig,
    /// Only snapshots with `t − t_start ≤ horizon` count.
    pub horizon: Option<f64>,
    /// Extra algebra coordinates tried as starting points.
    pub extra_starts: Vec<Vec<f64>>,
}

impl Default for WidthConfig {
    fn default() -> Self {
        Self {
            lm: LmConfig {
                max_iters: 100,
                ..LmConfig::default()
            },
            horizon: None,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthReport {
    /// Sup over the window of the per-snapshot orbit distances.
    pub width: f64,
    /// `(traj, step, distance)` for every snapshot in the window.
    pub per_snapshot: Vec<(usize, usize, f64)>,
    /// Snapshots whose best start did not converge.
    pub flagged: Vec<(usize, usize)>,
}

// Starting points from the log of a transform registering `anchor` to `x`.
fn registration_start(spec: &ActionSpec, anchor: &StatePoint, x: &StatePoint) -> Option<Vec<f64>> {
    let basis = spec.basis();
    let g = match spec.kind() {
        ActionKind::AffineCloud => {
            let all: Vec<usize> = (0..anchor.particles()?).collect();
            affine_registration(anchor, x, &all)?
        }
        ActionKind::ClusteredAffine => {
            let blocks = (0..spec.n_clusters())
                .map(|c| {
                    let members: Vec<usize> = (0..spec.assignment().len()).filter(|i| spec.assignment()[*i] == c).collect();
                    affine_registration(anchor, x, &members)
                })
                .collect::<Option<Vec<_>>>()?;
            GroupElement::block_diag(&blocks)
        }
        ActionKind::GridTranslation => {
            let (a, b) = (anchor.coords(), x.coords());
            let n = a.len();
            let Chart::Grid { period } = anchor.chart() else { return None };
            // Integer shift maximising the correlation of Φ(s, anchor) with x.
            let best = (0..n)
                .map(|m| (m, (0..n).map(|i| a[(i + m) % n] * b[i]).sum::<f64>()))
                .max_by(|p, q| p.1.total_cmp(&q.1).then(q.0.cmp(&p.0)))?
                .0;
            let m = if best > n / 2 { best as f64 - n as f64 } else { best as f64 };
            GroupElement::line(m * period / n as f64)
        }
        ActionKind::So2Polar => GroupElement::line(x.coords()[1] - anchor.coords()[1]),
    };
    let log = log_map(&g).ok()?;
    basis.coordinates(&log).ok()
}

/// `inf_g dist(x, Φ(g, anchor))` by Levenberg–Marquardt from several starts.
/// Returns the best distance, its coordinates and whether that start
/// converged.
pub fn orbit_distance(spec: &ActionSpec, anchor: &StatePoint, x: &StatePoint, starts: &[Vec<f64>], lm: &LmConfig) -> Result<(f64, Vec<f64>, bool)> {
    let dim = spec.group_dim();
    if dim == 0 {
        return Ok((state_distance(x, anchor)?, Vec::new(), true));
    }
    let mut candidates: Vec<Vec<f64>> = alloc::vec![alloc::vec![0.0; dim]];
    candidates.extend(registration_start(spec, anchor, x));
    candidates.extend(starts.iter().filter(|s| s.len() == dim).cloned());
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for start in candidates {
        let fit = fit_one_step(spec, anchor, x, 1.0, &start, lm)?;
        if best.as_ref().is_none_or(|b| fit.cost < b.0) {
            best = Some((fit.cost, fit.coeffs, fit.converged));
        }
    }
    Ok(best.expect("at least the identity start"))
}

/// Orbit widths of one trajectory; the previous snapshot's optimum is an
/// extra start for the next.
pub fn trajectory_width(spec: &ActionSpec, anchor: &Anchor, traj: &[Snapshot], cfg: &WidthConfig) -> Result<WidthReport> {
    let mut report = WidthReport {
        width: 0.0,
        per_snapshot: Vec::new(),
        flagged: Vec::new(),
    };
    let Some(first) = traj.first() else {
        return Ok(report);
    };
    let anchor = match anchor {
        Anchor::Fixed(a) => a,
        Anchor::TrajectoryStart => &first.state,
    };
    let mut prev: Option<Vec<f64>> = None;
    for s in traj {
        if cfg.horizon.is_some_and(|h| s.time - first.time > h) {
            break;
        }
        let mut starts = cfg.extra_starts.clone();
        starts.extend(prev.take());
        let (d, coeffs, converged) = orbit_distance(spec, anchor, &s.state, &starts, &cfg.lm)?;
        if !converged {
            report.flagged.push((s.traj, s.step));
        }
        report.width = report.width.max(d);
        report.per_snapshot.push((s.traj, s.step, d));
        prev = Some(coeffs);
    }
    Ok(report)
}

/// Merge per-trajectory reports (in trajectory order).
pub fn merge_width_reports(parts: Vec<WidthReport>) -> WidthReport {
    let mut out = WidthReport {
        width: 0.0,
        per_snapshot: Vec::new(),
        flagged: Vec::new(),
    };
    for p in parts {
        out.width = out.width.max(p.width);
        out.per_snapshot.extend(p.per_snapshot);
        out.flagged.extend(p.flagged);
    }
    out
}

/// Empirical orbit width of `set` for the fixed action `spec`: the sup over
/// snapshots of the best distance to the anchor's orbit found by LM. This is
/// an upper bound on the exact width.
pub fn estimate_group_width(set: &SnapshotSet, spec: &ActionSpec, anchor: &Anchor, cfg: &WidthConfig) -> Result<WidthReport> {
    let parts = set
        .trajectories()
        .map(|t| trajectory_width(spec, anchor, t, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_width_reports(parts))
}
