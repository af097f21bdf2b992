//! Splitting particle trajectories into clusters that each move under one
//! affine motion.
//!
//! Motion is sampled by secants: for every trajectory the frames
//! `k = 0, s, 2s, …` are paired with `k + s`. A generator track holds one
//! aff(3) element per pair with `exp(Ã·(t_{k+s} − t_k))` mapping frame `k` to
//! frame `k + s`. A particle follows a track when its secant velocity
//! residual stays below `residual_tol` times the median particle speed.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix4};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actions::ActionSpec;
use crate::error::{invalid, Result};
use crate::lie::{exp_map, log_map, AlgebraBasis, AlgebraElement, GroupElement};
use crate::snapshots::SnapshotSet;

pub const DEFAULT_NEIGHBORS: usize = 8;
pub const DEFAULT_RESIDUAL_TOL: f64 = 0.15;
pub const MAX_RESEEDS: usize = 10;
const MAX_REFITS: usize = 20;

/// Secant stride spanning the whole trajectory. Secants are registered as
/// exact affine maps, so longer secants only add signal over the noise.
pub fn default_stride(n_snapshots: usize) -> usize {
    n_snapshots.saturating_sub(1).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSample {
    /// Trajectory index (position in id order).
    pub traj: usize,
    pub step: usize,
    pub dt: f64,
    pub generator: AlgebraElement,
}

/// Per-secant aff(3) generators.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTrack {
    pub stride: usize,
    pub samples: Vec<GeneratorSample>,
}

impl GeneratorTrack {
    /// Generator coordinates in the aff(3) basis, one row per sample.
    pub fn coefficients(&self) -> Result<DMatrix<f64>> {
        let basis = AlgebraBasis::aff3();
        let mut out = DMatrix::zeros(self.samples.len(), basis.dim());
        for (r, s) in self.samples.iter().enumerate() {
            for (c, v) in basis.coordinates(&s.generator)?.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        Ok(out)
    }
}

fn secant_pairs(set: &SnapshotSet, stride: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (j, traj) in set.trajectories().enumerate() {
        let mut k = 0;
        while k + stride < traj.len() {
            pairs.push((j, k));
            k += stride;
        }
    }
    pairs
}

fn check_input(set: &SnapshotSet, stride: usize) -> Result<usize> {
    let n = set
        .first_state()
        .particles()
        .ok_or_else(|| invalid("clustering needs point-cloud snapshots"))?;
    if stride == 0 {
        return Err(invalid("clustering: stride must be positive"));
    }
    if set.trajectories().any(|t| t.len() < 2) {
        return Err(invalid("clustering: every trajectory needs at least two snapshots"));
    }
    Ok(n)
}

/// Least-squares affine map taking `from` to `to` for the given particles,
/// or `None` when the particles do not determine it.
pub(crate) fn affine_registration(from: &crate::StatePoint, to: &crate::StatePoint, particles: &[usize]) -> Option<GroupElement> {
    if particles.len() < 4 {
        return None;
    }
    let design = DMatrix::from_fn(particles.len(), 4, |r, c| if c == 3 { 1.0 } else { from.point(particles[r])[c] });
    let rhs = DMatrix::from_fn(particles.len(), 3, |r, c| to.point(particles[r])[c]);
    let svd = design.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-8 * smax) {
        return None;
    }
    let x = svd.solve(&rhs, 0.0).ok()?;
    let mut m = Matrix4::identity();
    for r in 0..3 {
        for c in 0..4 {
            m[(r, c)] = x[(c, r)];
        }
    }
    GroupElement::new(DMatrix::from_iterator(4, 4, m.iter().copied())).ok()
}

/// Generator track explaining the motion of `particles`, `None` if the
/// particles are degenerate or a secant map has no real logarithm.
pub fn fit_generator_track(set: &SnapshotSet, particles: &[usize], stride: usize) -> Result<Option<GeneratorTrack>> {
    check_input(set, stride)?;
    let mut samples = Vec::new();
    for (j, k) in secant_pairs(set, stride) {
        let traj = set.trajectory(j);
        let (a, b) = (&traj[k], &traj[k + stride]);
        let Some(g) = affine_registration(&a.state, &b.state, particles) else {
            return Ok(None);
        };
        let dt = b.time - a.time;
        let Ok(log) = log_map(&g) else {
            return Ok(None);
        };
        samples.push(GeneratorSample {
            traj: j,
            step: k,
            dt,
            generator: log.scaled(1.0 / dt),
        });
    }
    Ok(Some(GeneratorTrack { stride, samples }))
}

/// Median over particles and secants of `‖x_{k+s} − x_k‖ / (t_{k+s} − t_k)`.
pub fn median_speed(set: &SnapshotSet, stride: usize) -> Result<f64> {
    let n = check_input(set, stride)?;
    let mut speeds = Vec::new();
    for (j, k) in secant_pairs(set, stride) {
        let traj = set.trajectory(j);
        let (a, b) = (&traj[k], &traj[k + stride]);
        let dt = b.time - a.time;
        for i in 0..n {
            let (p, q) = (a.state.point(i), b.state.point(i));
            speeds.push(((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt() / dt);
        }
    }
    if speeds.is_empty() {
        return Err(invalid("clustering: no secant fits inside the trajectories"));
    }
    speeds.sort_by(f64::total_cmp);
    Ok(speeds[speeds.len() / 2])
}

/// Largest secant velocity residual of every particle against `track`,
/// divided by `speed_scale`.
pub fn relative_residuals(set: &SnapshotSet, track: &GeneratorTrack, speed_scale: f64) -> Result<Vec<f64>> {
    let n = check_input(set, track.stride)?;
    let mut worst = alloc::vec![0.0f64; n];
    for s in &track.samples {
        let traj = set.trajectory(s.traj);
        if s.step + track.stride >= traj.len() {
            return Err(invalid("generator track does not cover the snapshot set"));
        }
        let (a, b) = (&traj[s.step], &traj[s.step + track.stride]);
        let m = exp_map(&s.generator.scaled(s.dt))?;
        let m = m.matrix();
        for (i, w) in worst.iter_mut().enumerate() {
            let (p, q) = (a.state.point(i), b.state.point(i));
            let mut r2 = 0.0;
            for r in 0..3 {
                let pred = m[(r, 0)] * p[0] + m[(r, 1)] * p[1] + m[(r, 2)] * p[2] + m[(r, 3)];
                r2 += (q[r] - pred).powi(2);
            }
            *w = w.max(r2.sqrt() / s.dt / speed_scale);
        }
    }
    Ok(worst)
}

/// Particles whose largest relative velocity residual against `track` is
/// below `residual_tol`. A zero median speed compares absolute residuals.
pub fn filter_by_generator(set: &SnapshotSet, track: &GeneratorTrack, residual_tol: f64) -> Result<Vec<usize>> {
    let speed = median_speed(set, track.stride)?;
    let scale = if speed > 0.0 { speed } else { 1.0 };
    Ok(relative_residuals(set, track, scale)?
        .into_iter()
        .enumerate()
        .filter(|(_, r)| *r < residual_tol)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub n_neighbors: usize,
    pub residual_tol: f64,
    pub seed: u64,
    /// Secant stride; `None` picks [`default_stride`].
    pub stride: Option<usize>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_neighbors: DEFAULT_NEIGHBORS,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            seed: 0,
            stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub n_clusters: usize,
    pub assignment: Vec<usize>,
    /// Final track of every cluster; `None` for singleton fallbacks.
    pub generators: Vec<Option<GeneratorTrack>>,
    pub stride: usize,
    pub reseeds: usize,
    pub singletons: usize,
}

impl ClusterResult {
    /// Product action with one aff(3) factor per cluster.
    pub fn action(&self) -> Result<ActionSpec> {
        let factors = alloc::vec![AlgebraBasis::aff3(); self.n_clusters];
        ActionSpec::clustered_affine(&factors, self.assignment.clone())
    }
}

fn neighbors(x0: &crate::StatePoint, seed: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let p = x0.point(seed);
    let mut by_dist: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|i| **i != seed)
        .map(|i| {
            let q = x0.point(*i);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2), *i)
        })
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = core::iter::once(seed).chain(by_dist.into_iter().take(k).map(|(_, i)| i)).collect();
    out.sort_unstable();
    out
}

/// Grow a cluster from `members`: fit, filter the unassigned particles, refit
/// on the accepted ones until the membership stops changing.
fn grow(
    set: &SnapshotSet,
    members: Vec<usize>,
    unassigned: &[bool],
    stride: usize,
    residual_tol: f64,
    scale: f64,
) -> Result<Option<(Vec<usize>, GeneratorTrack)>> {
    let mut members = members;
    let mut last = None;
    for _ in 0..MAX_REFITS {
        let Some(track) = fit_generator_track(set, &members, stride)? else {
            return Ok(last);
        };
        let accepted: Vec<usize> = relative_residuals(set, &track, scale)?
            .into_iter()
            .enumerate()
            .filter(|(i, r)| unassigned[*i] && *r < residual_tol)
            .map(|(i, _)| i)
            .collect();
        if accepted.is_empty() {
            return Ok(last);
        }
        let done = accepted == members;
        last = Some((accepted.clone(), track));
        if done {
            break;
        }
        members = accepted;
    }
    Ok(last)
}

/// Greedy clustering: seed a cluster at a random unassigned particle and its
/// nearest unassigned neighbours in the first frame of the first trajectory,
/// fit its generator track, claim every unassigned particle the track
/// explains, repeat. Seeds whose fit fails are redrawn up to [`MAX_RESEEDS`]
/// times; after that the seed particle becomes a singleton cluster.
pub fn cluster_search(set: &SnapshotSet, cfg: &ClusterConfig) -> Result<ClusterResult> {
    if cfg.n_neighbors < 4 {
        return Err(invalid("clustering: at least 4 neighbours are needed to fit an affine motion"));
    }
    if !(cfg.residual_tol > 0.0) {
        return Err(invalid("clustering: residual tolerance must be positive"));
    }
    let stride = cfg.stride.unwrap_or_else(|| default_stride(set.trajectory(0).len()));
    let n = check_input(set, stride)?;
    let stride = stride.min(set.trajectories().map(|t| t.len() - 1).min().unwrap_or(1));
    let speed = median_speed(set, stride)?;
    let scale = if speed > 0.0 { speed } else { 1.0 };
    let x0 = &set.trajectory(0)[0].state;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut assignment = alloc::vec![usize::MAX; n];
    let mut generators = Vec::new();
    let (mut reseeds, mut singletons) = (0, 0);
    loop {
        let unassigned: Vec<bool> = assignment.iter().map(|a| *a == usize::MAX).collect();
        let free: Vec<usize> = (0..n).filter(|i| unassigned[*i]).collect();
        if free.is_empty() {
            break;
        }
        let mut claimed = None;
        let mut seed = free[0];
        for attempt in 0..=MAX_RESEEDS {
            seed = free[rng.random_range(0..free.len())];
            let start = neighbors(x0, seed, &free, cfg.n_neighbors);
            if let Some((members, track)) = grow(set, start, &unassigned, stride, cfg.residual_tol, scale)? {
                claimed = Some((members, track));
                break;
            }
            if attempt < MAX_RESEEDS {
                reseeds += 1;
            }
        }
        let cluster = generators.len();
        match claimed {
            Some((members, track)) => {
                for i in members {
                    assignment[i] = cluster;
                }
                generators.push(Some(track));
            }
            None => {
                assignment[seed] = cluster;
                generators.push(None);
                singletons += 1;
            }
        }
    }
    Ok(ClusterResult {
        n_clusters: generators.len(),
        assignment,
        generators,
        stride,
        reseeds,
        singletons,
    })
}

/// Fraction of particles labelled correctly under the best matching of
/// predicted to true cluster labels (greedy on the contingency table).
pub fn assignment_accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(invalid("assignment_accuracy: label vectors must be non-empty and equally long"));
    }
    let np = predicted.iter().max().unwrap() + 1;
    let nt = truth.iter().max().unwrap() + 1;
    let mut table = alloc::vec![alloc::vec![0usize; nt]; np];
    for (p, t) in predicted.iter().zip(truth) {
        table[*p][*t] += 1;
    }
    let mut cells: Vec<(usize, usize, usize)> = (0..np).flat_map(|p| (0..nt).map(move |t| (p, t, 0))).collect();
    for c in &mut cells {
        c.2 = table[c.0][c.1];
    }
    cells.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let (mut used_p, mut used_t) = (alloc::vec![false; np], alloc::vec![false; nt]);
    let mut correct = 0;
    for (p, t, count) in cells {
        if !used_p[p] && !used_t[t] {
            used_p[p] = true;
            used_t[t] = true;
            correct += count;
        }
    }
    Ok(correct as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_rigid_cloud, gen_sheering_clouds, BenchmarkConfig};

    fn sheering(sizes: &[usize], sigma: f64, seed: u64) -> (SnapshotSet, crate::datagen::SheeringTruth) {
        let cfg = BenchmarkConfig {
            n_traj: 3,
            n_steps: 201,
            sigma,
            seed,
            cluster_sizes: sizes.to_vec(),
            ..BenchmarkConfig::sheering()
        };
        gen_sheering_clouds(&cfg).unwrap()
    }

    #[test]
    fn two_clusters_recovered() {
        let (set, truth) = sheering(&[40, 40], 0.01, 3);
        let res = cluster_search(&set, &ClusterConfig::default()).unwrap();
        assert_eq!(res.n_clusters, 2);
        assert!(assignment_accuracy(&res.assignment, &truth.assignment).unwrap() >= 0.95);
        let spec = res.action().unwrap();
        assert_eq!(spec.group_dim(), 24);
    }

    #[test]
    fn three_clusters_recovered() {
        let (set, truth) = sheering(&[30, 30, 30], 0.0, 5);
        let res = cluster_search(&set, &ClusterConfig::default()).unwrap();
        assert_eq!(res.n_clusters, 3);
        assert_eq!(assignment_accuracy(&res.assignment, &truth.assignment).unwrap(), 1.0);
    }

    #[test]
    fn rigid_cloud_is_one_cluster() {
        let cfg = BenchmarkConfig {
            n_traj: 3,
            n_particles: 60,
            n_steps: 201,
            ..BenchmarkConfig::rigid()
        };
        let (set, _) = gen_rigid_cloud(&cfg).unwrap();
        let res = cluster_search(&set, &ClusterConfig::default()).unwrap();
        assert_eq!(res.n_clusters, 1);
        assert!(res.assignment.iter().all(|c| *c == 0));
    }

    #[test]
    fn partition_and_determinism() {
        let (set, _) = sheering(&[25, 25], 0.02, 8);
        let cfg = ClusterConfig {
            seed: 11,
            ..Default::default()
        };
        let a = cluster_search(&set, &cfg).unwrap();
        let b = cluster_search(&set, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.assignment.iter().all(|c| *c < a.n_clusters));
        for c in 0..a.n_clusters {
            assert!(a.assignment.contains(&c));
        }
    }

    #[test]
    fn filter_examples() {
        let (set, truth) = sheering(&[30, 30], 0.01, 2);
        let stride = default_stride(set.trajectory(0).len());
        let all: Vec<usize> = (0..60).collect();
        let first: Vec<usize> = (0..30).collect();
        let track = fit_generator_track(&set, &first, stride).unwrap().unwrap();
        assert_eq!(filter_by_generator(&set, &track, DEFAULT_RESIDUAL_TOL).unwrap(), first);

        let (clean, _) = sheering(&[30, 30], 0.0, 2);
        let second: Vec<usize> = (30..60).collect();
        let t2 = fit_generator_track(&clean, &second, stride).unwrap().unwrap();
        let t1 = fit_generator_track(&clean, &first, stride).unwrap().unwrap();
        let mut both = filter_by_generator(&clean, &t1, 1e-6).unwrap();
        both.extend(filter_by_generator(&clean, &t2, 1e-6).unwrap());
        assert_eq!(both, all);

        let zero = GeneratorTrack {
            stride,
            samples: track
                .samples
                .iter()
                .map(|s| GeneratorSample {
                    generator: AlgebraElement::zeros(4),
                    ..s.clone()
                })
                .collect(),
        };
        assert!(filter_by_generator(&clean, &zero, DEFAULT_RESIDUAL_TOL).unwrap().is_empty());
        let _ = truth;
    }

    #[test]
    fn refinement_is_idempotent() {
        let (set, _) = sheering(&[40, 40], 0.01, 4);
        let res = cluster_search(&set, &ClusterConfig::default()).unwrap();
        let speed = median_speed(&set, res.stride).unwrap();
        for c in 0..res.n_clusters {
            let members: Vec<usize> = (0..80).filter(|i| res.assignment[*i] == c).collect();
            let track = fit_generator_track(&set, &members, res.stride).unwrap().unwrap();
            let kept: Vec<usize> = relative_residuals(&set, &track, speed)
                .unwrap()
                .into_iter()
                .enumerate()
                .filter(|(i, r)| res.assignment[*i] == c && *r < DEFAULT_RESIDUAL_TOL)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(kept, members);
        }
    }

    #[test]
    fn degenerate_seeds_become_singletons() {
        // Five coplanar particles never determine an affine motion.
        let mut snaps = Vec::new();
        for k in 0..5 {
            let pts: Vec<[f64; 3]> = (0..5).map(|i| [i as f64 + 0.1 * k as f64, (i * i) as f64, 0.0]).collect();
            snaps.push(crate::Snapshot::new(0, k as f64, crate::StatePoint::from_points(&pts)));
        }
        let set = SnapshotSet::new(snaps).unwrap();
        let res = cluster_search(
            &set,
            &ClusterConfig {
                n_neighbors: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(res.n_clusters, 5);
        assert_eq!(res.singletons, 5);
        assert!(res.reseeds >= MAX_RESEEDS);
    }

    #[test]
    fn accuracy_matches_labels_up_to_permutation() {
        assert_eq!(assignment_accuracy(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(assignment_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(assignment_accuracy(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.25);
    }
}
