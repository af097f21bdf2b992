//! Deterministic synthetic benchmarks: rigid and piecewise-affine point
//! clouds, the radial oscillator and linear transport.
//!
//! Randomness comes from ChaCha8 streams of one master seed: stream 0 draws
//! the shared motion (twist or generator splines), stream `j + 1` draws the
//! initial cloud and the measurement noise of trajectory `j`. Each trajectory
//! can therefore be generated on its own without changing the others.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::actions::StatePoint;
use crate::error::{invalid, Result};
use crate::fitting::ReducedVectorField;
use crate::hermite::{uniform_knots, HermiteCurve};
use crate::lie::{AlgebraBasis, AlgebraElement, GroupElement};
use crate::rom::{integrate_group, integrate_reference_fom, FnField, FomField, Integrator, RADIAL_A, RADIAL_B};
use crate::snapshots::{Snapshot, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Rigid,
    Sheering,
    Radial,
    Transport,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rigid => "rigid",
            Family::Sheering => "sheering",
            Family::Radial => "radial",
            Family::Transport => "transport",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rigid" => Some(Family::Rigid),
            "sheering" => Some(Family::Sheering),
            "radial" => Some(Family::Radial),
            "transport" => Some(Family::Transport),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub family: Family,
    pub n_traj: usize,
    /// Particles per trajectory (rigid); ignored by the other families.
    pub n_particles: usize,
    /// Snapshots per trajectory, including `t = 0`.
    pub n_steps: usize,
    pub horizon: f64,
    /// Standard deviation of the additive Gaussian measurement noise.
    pub sigma: f64,
    pub seed: u64,
    /// Knots of the random motion splines.
    pub n_knots: usize,
    pub rotation_amp: f64,
    pub translation_amp: f64,
    pub shear_amp: f64,
    /// Particles per cluster (sheering).
    pub cluster_sizes: Vec<usize>,
    /// Shift along x between the unit boxes of consecutive clusters.
    pub cluster_offset: f64,
    /// Radial oscillator: one trajectory per `μ`.
    pub radial_mu: Vec<f64>,
    pub radial_a: f64,
    pub radial_b: f64,
    pub radial_q0: [f64; 2],
    /// Linear transport: one trajectory per `(μ₁, μ₂)` pair.
    pub transport_mu1: Vec<f64>,
    pub transport_mu2: Vec<f64>,
    pub grid_size: usize,
}

impl BenchmarkConfig {
    pub fn rigid() -> Self {
        Self {
            family: Family::Rigid,
            n_traj: 10,
            n_particles: 100,
            n_steps: 1000,
            horizon: 5.0,
            sigma: 0.01,
            seed: 0,
            n_knots: 5,
            rotation_amp: 0.5,
            translation_amp: 0.3,
            shear_amp: 0.2,
            cluster_sizes: alloc::vec![100, 100],
            cluster_offset: 3.0,
            radial_mu: alloc::vec![0.5, 1.0, 1.5, 2.0],
            radial_a: RADIAL_A,
            radial_b: RADIAL_B,
            radial_q0: [1.0, 0.0],
            transport_mu1: alloc::vec![-1.0, 0.5, 2.0],
            transport_mu2: alloc::vec![1.0, 2.0, 3.0],
            grid_size: 256,
        }
    }

    pub fn sheering() -> Self {
        Self {
            family: Family::Sheering,
            ..Self::rigid()
        }
    }

    pub fn radial() -> Self {
        Self {
            family: Family::Radial,
            n_traj: 4,
            n_steps: 1001,
            horizon: 10.0,
            sigma: 0.0,
            ..Self::rigid()
        }
    }

    pub fn transport() -> Self {
        Self {
            family: Family::Transport,
            n_traj: 9,
            n_steps: 101,
            horizon: 5.0,
            sigma: 0.0,
            ..Self::rigid()
        }
    }

    pub fn defaults(family: Family) -> Self {
        match family {
            Family::Rigid => Self::rigid(),
            Family::Sheering => Self::sheering(),
            Family::Radial => Self::radial(),
            Family::Transport => Self::transport(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 || self.n_particles == 0 || self.n_steps == 0 {
            return Err(invalid("benchmark: trajectory, particle and step counts must be at least 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("benchmark: horizon must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("benchmark: sigma must be non-negative"));
        }
        if self.n_knots < 2 {
            return Err(invalid("benchmark: motion splines need at least two knots"));
        }
        if self.family == Family::Sheering && (self.cluster_sizes.is_empty() || self.cluster_sizes.contains(&0)) {
            return Err(invalid("benchmark: every cluster needs at least one particle"));
        }
        Ok(())
    }

    /// `t_k = T·k/(N_k − 1)`; a single step sits at `t = 0`.
    pub fn times(&self) -> Vec<f64> {
        if self.n_steps == 1 {
            return alloc::vec![0.0];
        }
        let last = self.n_steps - 1;
        (0..self.n_steps)
            .map(|k| {
                if k == last {
                    self.horizon
                } else {
                    self.horizon * k as f64 / last as f64
                }
            })
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn noise(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative")
}

fn unit_box(rng: &mut ChaCha8Rng, n: usize, shift: [f64; 3]) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            [
                rng.random::<f64>() + shift[0],
                rng.random::<f64>() + shift[1],
                rng.random::<f64>() + shift[2],
            ]
        })
        .collect()
}

/// C¹ random spline: values uniform in `±amps[ch]` at `n_knots` knots on
/// `[0, T]`, Catmull–Rom slopes.
fn random_spline(rng: &mut ChaCha8Rng, horizon: f64, n_knots: usize, amps: &[f64]) -> Result<HermiteCurve> {
    let mut values = DMatrix::zeros(n_knots, amps.len());
    for k in 0..n_knots {
        for (ch, a) in amps.iter().enumerate() {
            values[(k, ch)] = a * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    HermiteCurve::catmull_rom(uniform_knots(0.0, horizon, n_knots - 1), values)
}

fn curve_at(curve: &HermiteCurve, t: f64) -> Vec<f64> {
    let (a, b) = curve.domain();
    curve.eval(t.clamp(a, b)).expect("clamped into the curve domain")
}

fn twist_from(c: &[f64]) -> AlgebraElement {
    AlgebraElement::twist([c[0], c[1], c[2]], [c[3], c[4], c[5]])
}

// Channels: 3 rotation rates, 6 symmetric (stretch/shear) rates, 3 translations.
fn affine_from(c: &[f64]) -> AlgebraElement {
    let (w, s, v) = (&c[0..3], &c[3..9], &c[9..12]);
    AlgebraElement::affine(
        [
            [s[0], s[3] - w[2], s[4] + w[1]],
            [s[3] + w[2], s[1], s[5] - w[0]],
            [s[4] - w[1], s[5] + w[0], s[2]],
        ],
        [v[0], v[1], v[2]],
    )
}

/// Path of `ġ = ξ(t)·g` sampled on the snapshot grid, integrated with RKMK4 on
/// `substeps` steps per interval.
fn sampled_path(xi: FnField, times: &[f64], substeps: usize) -> Result<Vec<GroupElement>> {
    if times.len() < 2 {
        return Ok(alloc::vec![GroupElement::identity(4); times.len()]);
    }
    let mut fine = Vec::with_capacity((times.len() - 1) * substeps + 1);
    for w in times.windows(2) {
        for s in 0..substeps {
            fine.push(w[0] + (w[1] - w[0]) * s as f64 / substeps as f64);
        }
    }
    fine.push(*times.last().unwrap());
    let path = integrate_group(&xi, &fine, Integrator::Rkmk4)?;
    Ok(path.into_iter().step_by(substeps).collect())
}

/// Spatial generator `ξ_k = Ḣ H⁻¹` sampled on `times`, interpolated by a
/// not-a-knot spline in the given basis.
fn spatial_field(basis: AlgebraBasis, times: &[f64], elements: &[AlgebraElement]) -> Result<ReducedVectorField> {
    let mut data = DMatrix::zeros(times.len(), basis.dim());
    for (k, e) in elements.iter().enumerate() {
        for (ch, v) in basis.coordinates(e)?.into_iter().enumerate() {
            data[(k, ch)] = v;
        }
    }
    ReducedVectorField::new(basis, HermiteCurve::spline_interpolant(times.to_vec(), data)?)
}

fn measured(points: &[[f64; 3]], g: &GroupElement, rng: &mut ChaCha8Rng, dist: &Normal<f64>) -> Result<StatePoint> {
    let m = g.matrix();
    let mut coords = Vec::with_capacity(3 * points.len());
    for p in points {
        for r in 0..3 {
            let clean = m[(r, 0)] * p[0] + m[(r, 1)] * p[1] + m[(r, 2)] * p[2] + m[(r, 3)];
            coords.push(clean + dist.sample(rng));
        }
    }
    StatePoint::point_cloud(coords)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidTruth {
    pub times: Vec<f64>,
    /// `H(t_k)`, shared by all trajectories: `p_{j,k} = H(t_k) p_{j,0} + η`.
    pub group_path: Vec<GroupElement>,
    /// Body twist `T̃(t)` with `Ḣ = H T̃` (channels ω, v).
    pub body_twist: HermiteCurve,
    /// Spatial twist `Ḣ H⁻¹` in se(3) coordinates.
    pub spatial_field: ReducedVectorField,
    pub initial_clouds: Vec<StatePoint>,
}

/// Rigid motion of `n_traj` random unit-box clouds under one smooth twist.
pub fn gen_rigid_cloud(cfg: &BenchmarkConfig) -> Result<(SnapshotSet, RigidTruth)> {
    cfg.validate()?;
    let times = cfg.times();
    let (r, v) = (cfg.rotation_amp, cfg.translation_amp);
    let body = random_spline(&mut stream(cfg.seed, 0), cfg.horizon, cfg.n_knots, &[r, r, r, v, v, v])?;
    // K = H⁻¹ solves K̇ = −T̃ K.
    let neg = body.clone();
    let xi = FnField::new(4, (0.0, cfg.horizon), move |t| twist_from(&curve_at(&neg, t)).scaled(-1.0));
    let group_path = sampled_path(xi, &times, 4)?
        .into_iter()
        .map(|k| k.inverse())
        .collect::<Result<Vec<_>>>()?;
    let spatial: Vec<AlgebraElement> = times
        .iter()
        .zip(&group_path)
        .map(|(t, h)| {
            let tw = twist_from(&curve_at(&body, *t));
            AlgebraElement::new(h.matrix() * tw.matrix() * h.inverse()?.matrix())
        })
        .collect::<Result<_>>()?;
    let spatial_field = spatial_field(AlgebraBasis::se3(), &times, &spatial)?;

    let dist = noise(cfg.sigma);
    let mut snapshots = Vec::with_capacity(cfg.n_traj * times.len());
    let mut initial_clouds = Vec::with_capacity(cfg.n_traj);
    for j in 0..cfg.n_traj {
        let mut rng = stream(cfg.seed, j as u64 + 1);
        let p0 = unit_box(&mut rng, cfg.n_particles, [0.0; 3]);
        initial_clouds.push(StatePoint::from_points(&p0));
        for (t, h) in times.iter().zip(&group_path) {
            snapshots.push(Snapshot::new(j, *t, measured(&p0, h, &mut rng, &dist)?));
        }
    }
    Ok((
        SnapshotSet::new(snapshots)?,
        RigidTruth {
            times,
            group_path,
            body_twist: body,
            spatial_field,
            initial_clouds,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SheeringTruth {
    pub times: Vec<f64>,
    /// Per-cluster `g_c(t_k)` with `ġ_c = Ã_c(t) g_c`.
    pub cluster_paths: Vec<Vec<GroupElement>>,
    /// Per-cluster generators in aff(3) coordinates.
    pub fields: Vec<ReducedVectorField>,
    /// Cluster of every particle.
    pub assignment: Vec<usize>,
    pub initial_clouds: Vec<StatePoint>,
}

/// Clusters of particles moving under distinct affine motions. Cluster `c`
/// starts in the unit box shifted by `c·offset` along x.
pub fn gen_sheering_clouds(cfg: &BenchmarkConfig) -> Result<(SnapshotSet, SheeringTruth)> {
    cfg.validate()?;
    if cfg.cluster_sizes.is_empty() {
        return Err(invalid("benchmark: at least one cluster required"));
    }
    let times = cfg.times();
    let (r, s, v) = (cfg.rotation_amp, cfg.shear_amp, cfg.translation_amp);
    let amps = [r, r, r, s, s, s, s, s, s, v, v, v];
    let mut motion_rng = stream(cfg.seed, 0);
    let mut cluster_paths = Vec::new();
    let mut fields = Vec::new();
    for _ in &cfg.cluster_sizes {
        let curve = random_spline(&mut motion_rng, cfg.horizon, cfg.n_knots, &amps)?;
        let c2 = curve.clone();
        let xi = FnField::new(4, (0.0, cfg.horizon), move |t| affine_from(&curve_at(&c2, t)));
        cluster_paths.push(sampled_path(xi, &times, 4)?);
        let elements: Vec<AlgebraElement> = times.iter().map(|t| affine_from(&curve_at(&curve, *t))).collect();
        fields.push(spatial_field(AlgebraBasis::aff3(), &times, &elements)?);
    }
    let assignment: Vec<usize> = cfg
        .cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, n)| core::iter::repeat(c).take(*n))
        .collect();

    let dist = noise(cfg.sigma);
    let mut snapshots = Vec::with_capacity(cfg.n_traj * times.len());
    let mut initial_clouds = Vec::with_capacity(cfg.n_traj);
    for j in 0..cfg.n_traj {
        let mut rng = stream(cfg.seed, j as u64 + 1);
        let clusters: Vec<Vec<[f64; 3]>> = cfg
            .cluster_sizes
            .iter()
            .enumerate()
            .map(|(c, n)| unit_box(&mut rng, *n, [c as f64 * cfg.cluster_offset, 0.0, 0.0]))
            .collect();
        initial_clouds.push(StatePoint::from_points(&clusters.concat()));
        for (k, t) in times.iter().enumerate() {
            let mut coords = Vec::with_capacity(3 * assignment.len());
            for (c, pts) in clusters.iter().enumerate() {
                coords.extend(measured(pts, &cluster_paths[c][k], &mut rng, &dist)?.into_coords());
            }
            snapshots.push(Snapshot::new(j, *t, StatePoint::point_cloud(coords)?));
        }
    }
    Ok((
        SnapshotSet::new(snapshots)?,
        SheeringTruth {
            times,
            cluster_paths,
            fields,
            assignment,
            initial_clouds,
        },
    ))
}

/// Radial oscillator trajectories, one per `μ` in `cfg.radial_mu`, from
/// `cfg.radial_q0`. An infinite `radial_a` decouples the radius.
pub fn gen_radial_oscillator(cfg: &BenchmarkConfig) -> Result<SnapshotSet> {
    cfg.validate()?;
    if cfg.radial_mu.is_empty() {
        return Err(invalid("radial benchmark: no μ values"));
    }
    let times = cfg.times();
    let x0 = StatePoint::polar(cfg.radial_q0[0], cfg.radial_q0[1])?;
    let mut snapshots = Vec::new();
    for (j, mu) in cfg.radial_mu.iter().enumerate() {
        let field = FomField::RadialOscillator {
            a: cfg.radial_a,
            b: cfg.radial_b,
            mu: *mu,
        };
        let states = if times.len() == 1 {
            alloc::vec![x0.clone()]
        } else {
            integrate_reference_fom(field, &x0, &times, 1e-10)?.states
        };
        for (t, s) in times.iter().zip(states) {
            snapshots.push(Snapshot::new(j, *t, s).with_param(alloc::vec![*mu]));
        }
    }
    SnapshotSet::new(snapshots)
}

/// Grid coordinates `x_i = 2π i/N` of the periodic transport domain.
pub fn transport_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * core::f64::consts::PI * i as f64 / n as f64).collect()
}

/// Closed-form transport solutions `u(x, t) = sin(μ₂ (x − μ₁ t))` on a
/// `2π`-periodic grid, one trajectory per `(μ₁, μ₂)` pair (μ₁ major).
pub fn gen_linear_transport(cfg: &BenchmarkConfig) -> Result<SnapshotSet> {
    cfg.validate()?;
    if !cfg.grid_size.is_power_of_two() || cfg.grid_size < 2 {
        return Err(invalid("transport benchmark: grid size must be a power of two"));
    }
    if let Some(bad) = cfg.transport_mu2.iter().find(|m| m.fract() != 0.0 || !m.is_finite()) {
        return Err(invalid(alloc::format!("transport benchmark: μ₂ = {bad} is not periodic on [0, 2π)")));
    }
    if cfg.transport_mu1.is_empty() || cfg.transport_mu2.is_empty() {
        return Err(invalid("transport benchmark: empty μ grid"));
    }
    let period = 2.0 * core::f64::consts::PI;
    let xs = transport_grid(cfg.grid_size);
    let times = cfg.times();
    let mut snapshots = Vec::new();
    let mut j = 0;
    for mu1 in &cfg.transport_mu1 {
        for mu2 in &cfg.transport_mu2 {
            for t in &times {
                let u = xs.iter().map(|x| (mu2 * (x - mu1 * t)).sin()).collect();
                snapshots.push(Snapshot::new(j, *t, StatePoint::grid(u, period)?).with_param(alloc::vec![*mu1, *mu2]));
            }
            j += 1;
        }
    }
    SnapshotSet::new(snapshots)
}

/// Ground truth of a generated benchmark.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Rigid(RigidTruth),
    Sheering(SheeringTruth),
    /// Snapshots are the reference solution itself.
    Radial,
    Transport,
}

pub fn generate(cfg: &BenchmarkConfig) -> Result<(SnapshotSet, Truth)> {
    Ok(match cfg.family {
        Family::Rigid => {
            let (s, t) = gen_rigid_cloud(cfg)?;
            (s, Truth::Rigid(t))
        }
        Family::Sheering => {
            let (s, t) = gen_sheering_clouds(cfg)?;
            (s, Truth::Sheering(t))
        }
        Family::Radial => (gen_radial_oscillator(cfg)?, Truth::Radial),
        Family::Transport => (gen_linear_transport(cfg)?, Truth::Transport),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::exp_map;

    fn small(family: Family) -> BenchmarkConfig {
        BenchmarkConfig {
            n_traj: 2,
            n_particles: 20,
            n_steps: 101,
            cluster_sizes: alloc::vec![20, 20],
            ..BenchmarkConfig::defaults(family)
        }
    }

    #[test]
    fn full_size_defaults() {
        let c = BenchmarkConfig::rigid();
        assert_eq!((c.n_traj, c.n_particles, c.n_steps, c.horizon), (10, 100, 1000, 5.0));
        assert_eq!(BenchmarkConfig::sheering().cluster_sizes, [100, 100]);
        let t = c.times();
        assert_eq!((t[0], t[999]), (0.0, 5.0));
    }

    #[test]
    fn still_noiseless_clouds_stay_put() {
        let cfg = BenchmarkConfig {
            sigma: 0.0,
            rotation_amp: 0.0,
            translation_amp: 0.0,
            ..small(Family::Rigid)
        };
        let (set, truth) = gen_rigid_cloud(&cfg).unwrap();
        for traj in set.trajectories() {
            assert!(traj.iter().all(|s| s.state == traj[0].state));
        }
        assert_eq!(truth.initial_clouds[0], set.trajectory(0)[0].state);
    }

    #[test]
    fn constant_twist_relative_transforms() {
        let cfg = small(Family::Rigid);
        // Constant twist checked directly: H(t) = exp(T̃ t) for a fixed T̃.
        let a = AlgebraElement::twist([0.4, -0.2, 0.3], [0.1, 0.2, -0.3]);
        let a2 = a.clone();
        let times = cfg.times();
        let path = sampled_path(FnField::new(4, (0.0, cfg.horizon), move |_| a2.clone()), &times, 4).unwrap();
        let step = exp_map(&a.scaled(times[1])).unwrap();
        for w in path.windows(2) {
            let rel = w[1].compose(&w[0].inverse().unwrap());
            assert!((rel.matrix() - step.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn rigid_truth_is_consistent() {
        let cfg = BenchmarkConfig {
            sigma: 0.0,
            ..small(Family::Rigid)
        };
        let (set, truth) = gen_rigid_cloud(&cfg).unwrap();
        assert!(truth.group_path.iter().all(|h| h.is_se3(1e-10)));
        for (k, s) in set.trajectory(1).iter().enumerate() {
            let expect = crate::actions::apply_action(&crate::ActionSpec::aff3_cloud(), &truth.group_path[k], &truth.initial_clouds[1]).unwrap();
            for (a, b) in s.state.coords().iter().zip(expect.coords()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // All six twist channels move.
        for ch in 0..6 {
            let vals: Vec<f64> = truth.times.iter().map(|t| curve_at(&truth.body_twist, *t)[ch]).collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            assert!(hi - lo > 1e-3);
        }
        // Spatial twist reproduces the sampled path.
        let t = truth.times.clone();
        let path = integrate_group(&truth.spatial_field, &t, Integrator::Rkmk4).unwrap();
        assert!((path.last().unwrap().matrix() - truth.group_path.last().unwrap().matrix()).norm() < 1e-6);
    }

    #[test]
    fn deterministic_and_stream_independent() {
        let cfg = small(Family::Rigid);
        let (a, _) = gen_rigid_cloud(&cfg).unwrap();
        let (b, _) = gen_rigid_cloud(&cfg).unwrap();
        assert_eq!(a, b);
        let more = BenchmarkConfig { n_traj: 3, ..cfg.clone() };
        let (c, _) = gen_rigid_cloud(&more).unwrap();
        assert_eq!(a.trajectory(1), c.trajectory(1));
        let other = BenchmarkConfig { seed: 1, ..cfg };
        assert_ne!(a, gen_rigid_cloud(&other).unwrap().0);
    }

    #[test]
    fn noise_statistics() {
        let cfg = BenchmarkConfig {
            n_traj: 1,
            n_particles: 50,
            n_steps: 100,
            sigma: 0.01,
            ..BenchmarkConfig::rigid()
        };
        let (set, truth) = gen_rigid_cloud(&cfg).unwrap();
        let spec = crate::ActionSpec::aff3_cloud();
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut n = 0.0;
        for (k, s) in set.trajectory(0).iter().enumerate() {
            let clean = crate::actions::apply_action(&spec, &truth.group_path[k], &truth.initial_clouds[0]).unwrap();
            for (a, b) in s.state.coords().iter().zip(clean.coords()) {
                sum += a - b;
                sq += (a - b) * (a - b);
                n += 1.0;
            }
        }
        let std = (sq / n - (sum / n).powi(2)).sqrt();
        assert!((std / 0.01 - 1.0).abs() < 0.05, "{std}");
    }

    #[test]
    fn sheering_truth() {
        let cfg = BenchmarkConfig {
            sigma: 0.0,
            ..small(Family::Sheering)
        };
        let (set, truth) = gen_sheering_clouds(&cfg).unwrap();
        assert_eq!(set.first_state().particles(), Some(40));
        assert_eq!(truth.assignment.iter().filter(|c| **c == 1).count(), 20);
        assert!(truth.cluster_paths.iter().flatten().all(|g| g.is_aff3()));
        // Relative transform over one step ≈ exp of the generator integral
        // (Simpson), up to the O(Δt³) commutator term.
        let fine = BenchmarkConfig {
            n_steps: 1000,
            ..cfg.clone()
        };
        let (_, truth_fine) = gen_sheering_clouds(&fine).unwrap();
        let dt = truth_fine.times[1];
        for (c, path) in truth_fine.cluster_paths.iter().enumerate() {
            for k in [0usize, 500, 998] {
                let t = truth_fine.times[k];
                let f = |s: f64| truth_fine.fields[c].eval(s).unwrap().into_matrix();
                let integral = (f(t) + f(t + 0.5 * dt) * 4.0 + f(t + dt)) * (dt / 6.0);
                let rel = path[k + 1].compose(&path[k].inverse().unwrap());
                let step = exp_map(&AlgebraElement::new(integral).unwrap()).unwrap();
                assert!((rel.matrix() - step.matrix()).norm() < 1e-8);
            }
        }
        let x0 = &truth.initial_clouds[0];
        assert!(x0.point(0)[0] < 1.0 && x0.point(20)[0] >= 3.0);
    }

    #[test]
    fn one_cluster_without_shear_is_rigid() {
        let cfg = BenchmarkConfig {
            shear_amp: 0.0,
            cluster_sizes: alloc::vec![15],
            ..small(Family::Sheering)
        };
        let (_, truth) = gen_sheering_clouds(&cfg).unwrap();
        assert!(truth.cluster_paths[0].iter().all(|g| g.is_se3(1e-10)));
    }

    #[test]
    fn radial_family() {
        let cfg = BenchmarkConfig {
            radial_mu: alloc::vec![0.0],
            radial_q0: [1.0, 0.0],
            n_steps: 11,
            ..BenchmarkConfig::radial()
        };
        let set = gen_radial_oscillator(&cfg).unwrap();
        assert!(set.iter().all(|s| s.state.coords() == [1.0, 0.0]));

        let decoupled = BenchmarkConfig {
            radial_a: f64::INFINITY,
            radial_mu: alloc::vec![1.0],
            radial_q0: [2.0, 0.1],
            ..cfg
        };
        let set = gen_radial_oscillator(&decoupled).unwrap();
        assert!(set.iter().all(|s| s.state.coords()[0] == 2.0));
        assert_eq!(set.snapshots()[0].param, [1.0]);
    }

    #[test]
    fn transport_family() {
        let cfg = BenchmarkConfig {
            transport_mu1: alloc::vec![0.0, 1.0],
            transport_mu2: alloc::vec![1.0],
            grid_size: 64,
            horizon: 2.0 * core::f64::consts::PI,
            n_steps: 5,
            ..BenchmarkConfig::transport()
        };
        let set = gen_linear_transport(&cfg).unwrap();
        let still = set.trajectory(0);
        assert!(still.iter().all(|s| s.state == still[0].state));
        let moving = set.trajectory(1);
        let xs = transport_grid(64);
        // Quarter period: sin(x − π/2) = −cos x.
        for (x, u) in xs.iter().zip(moving[1].state.coords()) {
            assert!((u + x.cos()).abs() < 1e-12);
        }
        // Full period returns to the start.
        for (a, b) in moving[4].state.coords().iter().zip(moving[0].state.coords()) {
            assert!((a - b).abs() < 1e-12);
        }
        let bad = BenchmarkConfig {
            transport_mu2: alloc::vec![1.5],
            ..cfg.clone()
        };
        assert!(gen_linear_transport(&bad).is_err());
        assert!(gen_linear_transport(&BenchmarkConfig { grid_size: 100, ..cfg }).is_err());
    }
}
