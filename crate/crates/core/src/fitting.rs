//! Reduced vector fields from known vector fields or from snapshot data.
//!
//! Column times: every fitted algebra element describes the motion over one
//! interval `[t_k, t_k + Δt_k]`, so it is tagged with `t_k` and `Δt_k` and
//! regressed at the interval midpoint when a time curve `ρ_θ(t)` is fitted.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::actions::{action_differential, apply_action, generator_matrix_at, ActionKind, ActionSpec, StatePoint};
use crate::error::{invalid, Result};
use crate::hermite::{uniform_knots, HermiteCurve};
use crate::lie::{exp_map, AlgebraBasis, AlgebraElement};
use crate::lm::{levenberg_marquardt, LeastSquaresProblem, LmConfig};
use crate::matfun::expm_frechet;
use crate::metric::{distance_residual_jacobian, distance_residuals, metric_weights, state_distance, tangent_norm_sq};
use crate::snapshots::{finite_difference_velocities, Snapshot, SnapshotSet};

/// Relative singular-value cutoff for generator pseudo-inverses.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Algebra coordinates in the action's basis.
    pub rho: Vec<f64>,
    /// `v − X·rho`, metric-orthogonal to the distribution.
    pub residual: Vec<f64>,
    pub rank_deficient: bool,
}

/// Metric least-squares projection of the tangent vector `v` at `x` onto the
/// distribution, `rho = X† Π v`. Rank-deficient generator matrices give the
/// minimum-norm solution and set the flag.
pub fn project_vector_field(spec: &ActionSpec, x: &StatePoint, v: &[f64]) -> Result<Projection> {
    if v.len() != x.dim() {
        return Err(invalid(alloc::format!("tangent vector has length {}, state has {}", v.len(), x.dim())));
    }
    let dim = spec.group_dim();
    if dim == 0 {
        return Ok(Projection {
            rho: Vec::new(),
            residual: v.to_vec(),
            rank_deficient: false,
        });
    }
    let x_mat = generator_matrix_at(spec, x)?;
    let sw: Vec<f64> = metric_weights(x).iter().map(|w| w.sqrt()).collect();
    let weighted = DMatrix::from_fn(x_mat.nrows(), dim, |r, c| sw[r] * x_mat[(r, c)]);
    let rhs = DVector::from_iterator(v.len(), v.iter().zip(&sw).map(|(vi, s)| vi * s));
    let svd = weighted.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|s| **s > RANK_TOL * smax).count();
    let rho = if smax == 0.0 {
        DVector::zeros(dim)
    } else {
        svd.solve(&rhs, RANK_TOL * smax).map_err(|e| invalid(alloc::format!("projection: {e}")))?
    };
    let fitted = &x_mat * &rho;
    Ok(Projection {
        residual: v.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect(),
        rho: rho.iter().copied().collect(),
        rank_deficient: rank < dim,
    })
}

/// Pointwise intrusive fit: project a known vector field at sample states.
pub fn fit_intrusive<F>(spec: &ActionSpec, states: &[StatePoint], field: F) -> Result<Vec<Projection>>
where
    F: Fn(&StatePoint) -> Vec<f64>,
{
    states.iter().map(|x| project_vector_field(spec, x, &field(x))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedColumn {
    pub traj: usize,
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub coeffs: Vec<f64>,
    /// Per-column cost of the fit that produced it.
    pub cost: f64,
    pub converged: bool,
}

impl ReducedColumn {
    pub fn midpoint(&self) -> f64 {
        self.time + 0.5 * self.dt
    }
}

/// One fitted algebra element per snapshot or transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSnapshotMatrix {
    pub basis: AlgebraBasis,
    pub columns: Vec<ReducedColumn>,
    /// Trajectories skipped for having fewer than two snapshots.
    pub skipped: Vec<usize>,
    /// Number of columns whose generator matrix was rank deficient.
    pub rank_deficient: usize,
}

impl ReducedSnapshotMatrix {
    pub fn new(basis: AlgebraBasis, columns: Vec<ReducedColumn>) -> Result<Self> {
        if columns
            .iter()
            .any(|c| c.coeffs.len() != basis.dim() || c.coeffs.iter().any(|v| !v.is_finite()))
        {
            return Err(invalid("reduced columns must be finite and match the basis dimension"));
        }
        let mut columns = columns;
        columns.sort_by(|a, b| a.traj.cmp(&b.traj).then(a.step.cmp(&b.step)));
        Ok(Self {
            basis,
            columns,
            skipped: Vec::new(),
            rank_deficient: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `dim(𝔤) × n_columns`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.basis.dim(), self.columns.len());
        for (j, c) in self.columns.iter().enumerate() {
            m.column_mut(j).copy_from_slice(&c.coeffs);
        }
        m
    }

    pub fn total_cost(&self) -> f64 {
        self.columns.iter().map(|c| c.cost).sum()
    }

    pub fn n_unconverged(&self) -> usize {
        self.columns.iter().filter(|c| !c.converged).count()
    }

    /// Column `j` as an algebra element.
    pub fn element(&self, j: usize) -> Result<AlgebraElement> {
        self.basis.combine(&self.columns[j].coeffs)
    }

    /// The same columns re-expressed in another basis by Frobenius
    /// projection (exact when the columns lie in its span).
    pub fn reexpress(&self, basis: &AlgebraBasis) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                Ok(ReducedColumn {
                    coeffs: basis.coordinates(&self.basis.combine(&c.coeffs)?)?,
                    ..c.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basis: basis.clone(),
            columns,
            skipped: self.skipped.clone(),
            rank_deficient: self.rank_deficient,
        })
    }

    /// Columns restricted to the given basis indices, expressed in `basis`
    /// (used to split product-group fits per factor).
    pub fn select(&self, indices: &[usize], basis: AlgebraBasis) -> Result<Self> {
        if basis.dim() != indices.len() {
            return Err(invalid("select: basis dimension must equal the index count"));
        }
        let columns = self
            .columns
            .iter()
            .map(|c| ReducedColumn {
                coeffs: indices.iter().map(|i| c.coeffs[*i]).collect(),
                ..c.clone()
            })
            .collect();
        Ok(Self {
            basis,
            columns,
            skipped: self.skipped.clone(),
            rank_deficient: self.rank_deficient,
        })
    }
}

/// Velocity-based fit: forward-difference velocities projected onto the
/// distribution at every snapshot that has a successor.
pub fn fit_velocity_based(spec: &ActionSpec, set: &SnapshotSet) -> Result<ReducedSnapshotMatrix> {
    let (samples, skipped) = finite_difference_velocities(set, 1)?;
    let mut columns = Vec::with_capacity(samples.len());
    let mut rank_deficient = 0;
    for s in samples {
        let p = project_vector_field(spec, &s.state, &s.velocity)?;
        rank_deficient += p.rank_deficient as usize;
        columns.push(ReducedColumn {
            traj: s.traj,
            step: s.step,
            time: s.time,
            dt: s.dt,
            cost: tangent_norm_sq(&s.state, &p.residual).sqrt(),
            coeffs: p.rho,
            converged: true,
        });
    }
    let mut out = ReducedSnapshotMatrix::new(spec.basis().clone(), columns)?;
    out.skipped = skipped;
    out.rank_deficient = rank_deficient;
    Ok(out)
}

/// `dist(x_{k+1}, Φ(exp(Ã Δt), x_k))` with `Ã` given by coordinates.
pub fn one_step_cost(spec: &ActionSpec, x: &StatePoint, target: &StatePoint, coeffs: &[f64], dt: f64) -> Result<f64> {
    let g = exp_map(&spec.basis().combine(coeffs)?.scaled(dt))?;
    state_distance(target, &apply_action(spec, &g, x)?)
}

struct OneStep<'a> {
    spec: &'a ActionSpec,
    x: &'a StatePoint,
    target: &'a StatePoint,
    dt: f64,
}

impl OneStep<'_> {
    fn generator(&self, params: &[f64]) -> Result<AlgebraElement> {
        Ok(self.spec.basis().combine(params)?.scaled(self.dt))
    }
}

impl LeastSquaresProblem for OneStep<'_> {
    fn n_params(&self) -> usize {
        self.spec.group_dim()
    }

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>> {
        let g = exp_map(&self.generator(params)?)?;
        distance_residuals(self.target, &apply_action(self.spec, &g, self.x)?)
    }

    fn jacobian(&self, params: &[f64], _residuals: &[f64]) -> Result<DMatrix<f64>> {
        let a = self.generator(params)?;
        let g = exp_map(&a)?;
        let predicted = apply_action(self.spec, &g, self.x)?;
        let mut dpred = DMatrix::zeros(self.x.dim(), self.n_params());
        for (l, e) in self.spec.basis().elements().iter().enumerate() {
            let dg = expm_frechet(a.matrix(), &(e.matrix() * self.dt))?;
            let col = action_differential(self.spec, &g, &dg, self.x)?;
            dpred.column_mut(l).copy_from_slice(&col);
        }
        distance_residual_jacobian(self.target, &predicted, &dpred)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneStepFit {
    pub coeffs: Vec<f64>,
    pub cost: f64,
    /// Cost after each accepted LM step.
    pub cost_history: Vec<f64>,
    pub converged: bool,
}

/// Minimise the one-step cost over `Ã ∈ 𝔤` by Levenberg–Marquardt in algebra
/// coordinates, starting from `init`.
pub fn fit_one_step(spec: &ActionSpec, x: &StatePoint, target: &StatePoint, dt: f64, init: &[f64], cfg: &LmConfig) -> Result<OneStepFit> {
    if !(dt > 0.0) {
        return Err(invalid("one-step fit needs a positive time step"));
    }
    let problem = OneStep { spec, x, target, dt };
    let out = levenberg_marquardt(&problem, init, cfg)?;
    Ok(OneStepFit {
        cost: one_step_cost(spec, x, target, &out.params, dt)?,
        coeffs: out.params,
        cost_history: out.cost_history,
        converged: out.converged,
    })
}

// Velocity-based estimate used to start the first transition.
fn initial_guess(spec: &ActionSpec, a: &Snapshot, b: &Snapshot) -> Result<Vec<f64>> {
    let dt = b.time - a.time;
    let v: Vec<f64> = a.state.coords().iter().zip(b.state.coords()).map(|(x, y)| (y - x) / dt).collect();
    Ok(project_vector_field(spec, &a.state, &v)?.rho)
}

fn fit_transitions(spec: &ActionSpec, traj: &[Snapshot], cfg: &LmConfig) -> Result<Vec<OneStepFit>> {
    let mut fits = Vec::with_capacity(traj.len().saturating_sub(1));
    let mut init = match traj {
        [a, b, ..] => initial_guess(spec, a, b)?,
        _ => return Ok(fits),
    };
    for w in traj.windows(2) {
        let fit = fit_one_step(spec, &w[0].state, &w[1].state, w[1].time - w[0].time, &init, cfg)?;
        init.clone_from(&fit.coeffs);
        fits.push(fit);
    }
    Ok(fits)
}

/// Velocity-free fit of one trajectory, warm-starting every transition from
/// the previous one. Product actions whose basis splits by cluster are solved
/// cluster by cluster, since the mean particle distance separates.
pub fn fit_velocity_free_trajectory(spec: &ActionSpec, traj: &[Snapshot], cfg: &LmConfig) -> Result<Vec<ReducedColumn>> {
    let split = match spec.kind() {
        ActionKind::ClusteredAffine => spec.factor_split(),
        _ => None,
    };
    let n_steps = traj.len().saturating_sub(1);
    let mut coeffs = alloc::vec![alloc::vec![0.0; spec.group_dim()]; n_steps];
    let mut costs = alloc::vec![0.0; n_steps];
    let mut converged = alloc::vec![true; n_steps];
    match split {
        Some(groups) if spec.n_clusters() > 1 => {
            let n_total = spec.assignment().len() as f64;
            for (c, idx) in groups.iter().enumerate() {
                let particles: Vec<usize> = (0..spec.assignment().len()).filter(|i| spec.assignment()[*i] == c).collect();
                let sub_spec = ActionSpec::affine_cloud(spec.factor_basis(c, idx)?)?;
                let sub_traj: Vec<Snapshot> = traj
                    .iter()
                    .map(|s| {
                        Ok(Snapshot {
                            state: StatePoint::point_cloud(particles.iter().flat_map(|p| s.state.point(*p)).collect())?,
                            ..s.clone()
                        })
                    })
                    .collect::<Result<_>>()?;
                let weight = particles.len() as f64 / n_total;
                for (k, fit) in fit_transitions(&sub_spec, &sub_traj, cfg)?.into_iter().enumerate() {
                    for (i, v) in idx.iter().zip(&fit.coeffs) {
                        coeffs[k][*i] = *v;
                    }
                    costs[k] += weight * fit.cost;
                    converged[k] &= fit.converged;
                }
            }
        }
        _ => {
            for (k, fit) in fit_transitions(spec, traj, cfg)?.into_iter().enumerate() {
                coeffs[k] = fit.coeffs;
                costs[k] = fit.cost;
                converged[k] = fit.converged;
            }
        }
    }
    Ok(traj
        .windows(2)
        .enumerate()
        .map(|(k, w)| ReducedColumn {
            traj: w[0].traj,
            step: w[0].step,
            time: w[0].time,
            dt: w[1].time - w[0].time,
            coeffs: core::mem::take(&mut coeffs[k]),
            cost: costs[k],
            converged: converged[k],
        })
        .collect())
}

/// Assemble per-trajectory velocity-free columns (possibly computed in
/// parallel) into a reduced snapshot matrix.
pub fn assemble_velocity_free(spec: &ActionSpec, set: &SnapshotSet, per_traj: Vec<Vec<ReducedColumn>>) -> Result<ReducedSnapshotMatrix> {
    let skipped = set.trajectories().filter(|t| t.len() < 2).map(|t| t[0].traj).collect();
    let mut out = ReducedSnapshotMatrix::new(spec.basis().clone(), per_traj.into_iter().flatten().collect())?;
    out.skipped = skipped;
    Ok(out)
}

/// Velocity-free fit of every transition in `set`.
pub fn fit_velocity_free(spec: &ActionSpec, set: &SnapshotSet, cfg: &LmConfig) -> Result<ReducedSnapshotMatrix> {
    let per_traj = set
        .trajectories()
        .map(|t| fit_velocity_free_trajectory(spec, t, cfg))
        .collect::<Result<Vec<_>>>()?;
    assemble_velocity_free(spec, set, per_traj)
}

/// Sum of one-step costs of the given columns on `set` (velocity-free metric).
pub fn columns_one_step_cost(spec: &ActionSpec, set: &SnapshotSet, sg: &ReducedSnapshotMatrix) -> Result<f64> {
    let mut total = 0.0;
    for c in &sg.columns {
        let traj = set
            .trajectory_by_id(c.traj)
            .ok_or_else(|| invalid(alloc::format!("column refers to unknown trajectory {}", c.traj)))?;
        if c.step + 1 >= traj.len() {
            return Err(invalid("column refers to a step without successor"));
        }
        let coeffs = spec.basis().coordinates(&sg.basis.combine(&c.coeffs)?)?;
        total += one_step_cost(spec, &traj[c.step].state, &traj[c.step + 1].state, &coeffs, c.dt)?;
    }
    Ok(total)
}

/// Time-parameterised reduced vector field `ρ_θ(t) ∈ 𝔤`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVectorField {
    pub basis: AlgebraBasis,
    pub curve: HermiteCurve,
    /// RMSE of the least-squares fit that produced the curve (0 if constructed).
    pub fit_rmse: f64,
}

impl ReducedVectorField {
    pub fn new(basis: AlgebraBasis, curve: HermiteCurve) -> Result<Self> {
        if curve.channels() != basis.dim() {
            return Err(invalid("reduced vector field: one curve channel per basis element"));
        }
        Ok(Self { basis, curve, fit_rmse: 0.0 })
    }

    /// `ρ(t) = coeffs` on `[t0, t1]`.
    pub fn constant(basis: AlgebraBasis, coeffs: &[f64], t0: f64, t1: f64) -> Result<Self> {
        let values = DMatrix::from_fn(2, coeffs.len(), |_, c| coeffs[c]);
        Self::new(
            basis,
            HermiteCurve::from_parts(alloc::vec![t0, t1], values, DMatrix::zeros(2, coeffs.len()))?,
        )
    }

    pub fn domain(&self) -> (f64, f64) {
        self.curve.domain()
    }

    pub fn coefficients(&self, t: f64) -> Result<Vec<f64>> {
        self.curve.eval(t).ok_or_else(|| {
            let (a, b) = self.domain();
            invalid(alloc::format!("t = {t} is outside the reduced field domain [{a}, {b}]"))
        })
    }

    pub fn eval(&self, t: f64) -> Result<AlgebraElement> {
        self.basis.combine(&self.coefficients(t)?)
    }
}

/// Averaged, subsampled reduced columns ready for curve fitting.
fn averaged_series(sg: &ReducedSnapshotMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = sg.basis.dim();
    let mut trajs: Vec<Vec<&ReducedColumn>> = Vec::new();
    for c in &sg.columns {
        match trajs.last_mut() {
            Some(t) if t[0].traj == c.traj => t.push(c),
            _ => trajs.push(alloc::vec![c]),
        }
    }
    let aligned = trajs
        .iter()
        .all(|t| t.len() == trajs[0].len() && t.iter().zip(&trajs[0]).all(|(a, b)| a.step == b.step && a.time == b.time && a.dt == b.dt));
    if aligned {
        let n = trajs.len() as f64;
        let times = trajs[0].iter().map(|c| c.midpoint()).collect();
        let data = DMatrix::from_fn(trajs[0].len(), dim, |k, ch| trajs.iter().map(|t| t[k].coeffs[ch]).sum::<f64>() / n);
        return Ok((times, data));
    }
    // Time bins of the median step width, anchored at the earliest column.
    let mut dts: Vec<f64> = sg.columns.iter().map(|c| c.dt).collect();
    dts.sort_by(f64::total_cmp);
    let width = dts[dts.len() / 2];
    let t0 = sg.columns.iter().map(|c| c.time).fold(f64::INFINITY, f64::min);
    let mut bins: alloc::collections::BTreeMap<i64, (f64, Vec<f64>, usize)> = alloc::collections::BTreeMap::new();
    for c in &sg.columns {
        let key = ((c.midpoint() - t0) / width).floor() as i64;
        let e = bins.entry(key).or_insert((0.0, alloc::vec![0.0; dim], 0));
        e.0 += c.midpoint();
        for (acc, v) in e.1.iter_mut().zip(&c.coeffs) {
            *acc += v;
        }
        e.2 += 1;
    }
    let times = bins.values().map(|(t, _, n)| t / *n as f64).collect();
    let rows: Vec<&(f64, Vec<f64>, usize)> = bins.values().collect();
    let data = DMatrix::from_fn(rows.len(), dim, |r, ch| rows[r].1[ch] / rows[r].2 as f64);
    Ok((times, data))
}

/// Fit `ρ_θ(t)` by least squares: columns are averaged across trajectories
/// (shared time grid) or over time bins (otherwise), every `stride`-th
/// average is kept (plus the last one), and a Hermite curve with
/// `n_segments` uniform segments over `[first column time, last column end]`
/// is fitted channel by channel.
pub fn fit_rho_theta(sg: &ReducedSnapshotMatrix, n_segments: usize, stride: usize) -> Result<ReducedVectorField> {
    if sg.is_empty() {
        return Err(crate::Error::Empty("reduced snapshot matrix has no columns".into()));
    }
    if n_segments == 0 || stride == 0 {
        return Err(invalid("fit_rho_theta: n_segments and stride must be positive"));
    }
    let (times, data) = averaged_series(sg)?;
    let mut keep: Vec<usize> = (0..times.len()).step_by(stride).collect();
    if *keep.last().unwrap() != times.len() - 1 {
        keep.push(times.len() - 1);
    }
    if keep.len() < n_segments + 1 {
        return Err(invalid(alloc::format!(
            "fit_rho_theta: {} time points cannot determine {} segments",
            keep.len(),
            n_segments
        )));
    }
    let sub_times: Vec<f64> = keep.iter().map(|i| times[*i]).collect();
    let sub_data = DMatrix::from_fn(keep.len(), data.ncols(), |r, c| data[(keep[r], c)]);
    let lo = sg.columns.iter().map(|c| c.time).fold(f64::INFINITY, f64::min);
    let hi = sg.columns.iter().map(|c| c.time + c.dt).fold(f64::NEG_INFINITY, f64::max);
    let (curve, rmse) = HermiteCurve::fit_least_squares(uniform_knots(lo, hi, n_segments), &sub_times, &sub_data)?;
    let mut field = ReducedVectorField::new(sg.basis.clone(), curve)?;
    field.fit_rmse = rmse;
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    VelocityBased,
    VelocityFree,
}

/// Summed cost of `rho` on `set`. `ρ` is evaluated at interval midpoints.
pub fn evaluate_cost(spec: &ActionSpec, set: &SnapshotSet, rho: &ReducedVectorField, mode: CostMode) -> Result<f64> {
    let (lo, hi) = set.time_range();
    let (a, b) = rho.domain();
    let slack = 1e-9 * (b - a).abs().max(1.0);
    if lo < a - slack || hi > b + slack {
        return Err(invalid(alloc::format!("snapshot times [{lo}, {hi}] exceed the field domain [{a}, {b}]")));
    }
    let mut total = 0.0;
    for traj in set.trajectories() {
        for w in traj.windows(2) {
            let dt = w[1].time - w[0].time;
            let coeffs = spec.basis().coordinates(&rho.eval(w[0].time + 0.5 * dt)?)?;
            total += match mode {
                CostMode::VelocityFree => one_step_cost(spec, &w[0].state, &w[1].state, &coeffs, dt)?,
                CostMode::VelocityBased => {
                    let v: Vec<f64> = w[0].state.coords().iter().zip(w[1].state.coords()).map(|(x, y)| (y - x) / dt).collect();
                    let xr = generator_matrix_at(spec, &w[0].state)? * DVector::from_column_slice(&coeffs);
                    let r: Vec<f64> = v.iter().zip(xr.iter()).map(|(a, b)| a - b).collect();
                    tangent_norm_sq(&w[0].state, &r).sqrt()
                }
            };
        }
    }
    Ok(total)
}
