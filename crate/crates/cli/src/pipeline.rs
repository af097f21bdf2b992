//! Pipeline stages. Each stage is a plain function over in-memory data; the
//! subcommands wrap them with file loading and saving, and `run_pipeline`
//! chains them in one process.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use morlie_core::baselines::{
    merge_width_reports, pod_svd, projection_error, trajectory_width, Anchor, ErrorCurve, PodOptions, PodResult, WidthConfig, WidthReport,
};
use morlie_core::clustering::{assignment_accuracy, cluster_search, ClusterConfig, ClusterResult};
use morlie_core::datagen::{self, Family};
use morlie_core::fitting::{
    assemble_velocity_free, columns_one_step_cost, fit_rho_theta, fit_velocity_based, fit_velocity_free_trajectory, ReducedSnapshotMatrix,
};
use morlie_core::lie::AlgebraBasis;
use morlie_core::lm::LmConfig;
use morlie_core::metric::state_distance;
use morlie_core::rom::{integrate_rom, Integrator, RomModel, Trajectory};
use morlie_core::subalgebra::{library, subalgebra_search, SearchReport};
use morlie_core::{ActionKind, ActionSpec, Chart, Snapshot, SnapshotSet};
use rayon::prelude::*;

use crate::config::{ActionChoice, FitMode, RhoScope, RunConfig};
use crate::io::{self, RhoSet, TruthRecord};
use crate::report::{self, OverlayRow};
use crate::summary::*;

pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const BASIS_FULL_FILE: &str = "basis_full.csv";
pub const SG_FILE: &str = "sg.csv";
pub const SUBALGEBRA_FILE: &str = "subalgebra.csv";
pub const SG_REDUCED_FILE: &str = "sg_reduced.csv";
pub const RHO_FILE: &str = "rho.csv";
pub const ROM_FILE: &str = "rom.csv";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Flagged,
}

impl Outcome {
    pub fn of(summary: &Summary) -> Self {
        if summary.flags.is_empty() {
            Outcome::Clean
        } else {
            Outcome::Flagged
        }
    }
}

fn integrator_name(m: Integrator) -> &'static str {
    match m {
        Integrator::Rkmk4 => "rkmk4",
        Integrator::LieEuler => "lie_euler",
    }
}

fn chart_name(c: Chart) -> &'static str {
    match c {
        Chart::PointCloud { .. } => "pointcloud3d",
        Chart::Polar => "polar2d",
        Chart::Grid { .. } => "grid1d",
    }
}

// ---------------------------------------------------------------- data

/// Generate the configured benchmark, or ingest `cfg.input`.
pub fn acquire(cfg: &RunConfig) -> Result<(SnapshotSet, Option<TruthRecord>, String)> {
    match &cfg.input {
        Some(p) => {
            let set = io::read_snapshots(p)?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((set, None, name))
        }
        None => {
            let (set, truth) = datagen::generate(&cfg.bench)?;
            Ok((set, TruthRecord::from_truth(&truth), "generated".into()))
        }
    }
}

pub fn data_summary(set: &SnapshotSet) -> DataSummary {
    let (t_start, t_end) = set.time_range();
    DataSummary {
        chart: chart_name(set.first_state().chart()).into(),
        n_trajectories: set.n_trajectories(),
        n_snapshots: set.len(),
        state_dim: set.first_state().dim(),
        t_start,
        t_end,
    }
}

/// The action choice after resolving `auto` against the data chart.
pub fn resolved_action(cfg: &RunConfig, set: &SnapshotSet) -> ActionChoice {
    match (cfg.action, set.first_state().chart()) {
        (ActionChoice::Auto, Chart::PointCloud { .. }) if cfg.bench.family == Family::Sheering => ActionChoice::Clustered,
        (ActionChoice::Auto, Chart::PointCloud { .. }) => ActionChoice::Aff3,
        (ActionChoice::Auto, Chart::Grid { .. }) => ActionChoice::Grid,
        (ActionChoice::Auto, Chart::Polar) => ActionChoice::Polar,
        (c, _) => c,
    }
}

pub fn build_action(choice: ActionChoice, assignment: Option<&[usize]>) -> Result<ActionSpec> {
    Ok(match choice {
        ActionChoice::Auto => bail!("action must be resolved before it is built"),
        ActionChoice::Aff3 => ActionSpec::aff3_cloud(),
        ActionChoice::Se3 => ActionSpec::affine_cloud(AlgebraBasis::se3())?,
        ActionChoice::Translations => ActionSpec::affine_cloud(AlgebraBasis::translations3())?,
        ActionChoice::Clustered => {
            let a = assignment.ok_or_else(|| anyhow!("the clustered action needs a cluster assignment (run `cluster` first)"))?;
            let n = a.iter().max().map_or(0, |m| m + 1);
            ActionSpec::clustered_affine(&vec![AlgebraBasis::aff3(); n], a.to_vec())?
        }
        ActionChoice::Grid => ActionSpec::grid_translation(),
        ActionChoice::Polar => ActionSpec::so2_polar(),
    })
}

pub fn action_summary(a: &ActionSpec) -> ActionSummary {
    ActionSummary {
        kind: a.kind().name().into(),
        group_dim: a.group_dim(),
        n_clusters: a.n_clusters(),
    }
}

// ---------------------------------------------------------------- clustering

pub fn run_clustering(cfg: &RunConfig, set: &SnapshotSet, truth: Option<&TruthRecord>) -> Result<(ClusterResult, ClusterSummary)> {
    let ccfg = ClusterConfig {
        n_neighbors: cfg.n_neighbors,
        residual_tol: cfg.residual_tol,
        seed: cfg.bench.seed,
        stride: cfg.cluster_stride,
    };
    let res = cluster_search(set, &ccfg)?;
    let mut sizes = vec![0; res.n_clusters];
    for c in &res.assignment {
        sizes[*c] += 1;
    }
    let accuracy = match truth.and_then(|t| t.assignment.as_ref()) {
        Some(a) if a.len() == res.assignment.len() => Some(assignment_accuracy(&res.assignment, a)?),
        _ => None,
    };
    let summary = ClusterSummary {
        n_clusters: res.n_clusters,
        sizes,
        stride: res.stride,
        reseeds: res.reseeds,
        singletons: res.singletons,
        accuracy,
    };
    Ok((res, summary))
}

// ---------------------------------------------------------------- fitting

/// Velocity-free fit with trajectories spread over the worker pool.
pub fn fit_velocity_free_parallel(spec: &ActionSpec, set: &SnapshotSet, lm: &LmConfig) -> Result<ReducedSnapshotMatrix> {
    let trajs: Vec<&[Snapshot]> = set.trajectories().collect();
    let per = trajs
        .par_iter()
        .map(|t| fit_velocity_free_trajectory(spec, t, lm))
        .collect::<morlie_core::Result<Vec<_>>>()?;
    Ok(assemble_velocity_free(spec, set, per)?)
}

pub fn fit_one_mode(spec: &ActionSpec, set: &SnapshotSet, velocity_free: bool) -> Result<ReducedSnapshotMatrix> {
    if velocity_free {
        fit_velocity_free_parallel(spec, set, &LmConfig::default())
    } else {
        Ok(fit_velocity_based(spec, set)?)
    }
}

pub fn fit_summary(mode: &str, spec: &ActionSpec, set: &SnapshotSet, sg: &ReducedSnapshotMatrix) -> Result<FitSummary> {
    Ok(FitSummary {
        mode: mode.into(),
        basis_dim: sg.basis.dim(),
        columns: sg.len(),
        total_cost: sg.total_cost(),
        one_step_cost: columns_one_step_cost(spec, set, sg)?,
        unconverged: sg.n_unconverged(),
        rank_deficient: sg.rank_deficient,
    })
}

fn mode_name(velocity_free: bool) -> &'static str {
    if velocity_free {
        "velocity_free"
    } else {
        "velocity_based"
    }
}

/// Fit in the configured mode(s). The first returned matrix feeds the
/// downstream stages.
pub fn run_fits(cfg: &RunConfig, spec: &ActionSpec, set: &SnapshotSet) -> Result<(ReducedSnapshotMatrix, Vec<FitSummary>)> {
    let modes: &[bool] = match cfg.fit_mode {
        FitMode::VelocityBased => &[false],
        FitMode::VelocityFree => &[true],
        FitMode::Both => &[true, false],
    };
    let mut primary = None;
    let mut summaries = Vec::new();
    for &vf in modes {
        let sg = fit_one_mode(spec, set, vf)?;
        summaries.push(fit_summary(mode_name(vf), spec, set, &sg)?);
        primary.get_or_insert(sg);
    }
    Ok((primary.expect("at least one mode"), summaries))
}

pub fn primary_is_velocity_free(cfg: &RunConfig) -> bool {
    cfg.fit_mode != FitMode::VelocityBased
}

// ---------------------------------------------------------------- subalgebra

fn named_basis(report: &SearchReport, parent: &AlgebraBasis) -> AlgebraBasis {
    if report.subalgebra.dim() == parent.dim() {
        return parent.clone();
    }
    match report.library_match {
        Some(name) => library()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, b)| b)
            .expect("matched name is in the library"),
        None => report.subalgebra.basis.clone(),
    }
}

fn block_summary(r: &SearchReport) -> BlockSubalgebra {
    BlockSubalgebra {
        k: r.k,
        dim: r.subalgebra.dim(),
        captured_energy: r.captured_energy,
        closed: r.closure.closed,
        rounds: r.closure.rounds,
        closure_residual: r.subalgebra.closure_residual,
        library_match: r.library_match.map(str::to_string),
        singular_values: r.singular_values.clone(),
    }
}

/// Subalgebra search on the fitted reduced snapshots; product actions are
/// searched factor by factor. Returns the restricted action.
pub fn run_subalgebra(cfg: &RunConfig, spec: &ActionSpec, sg: &ReducedSnapshotMatrix) -> Result<(ActionSpec, Vec<SearchReport>, SubalgebraSummary)> {
    let split = match spec.kind() {
        ActionKind::ClusteredAffine if spec.n_clusters() > 1 => spec.factor_split(),
        _ => None,
    };
    let (action, reports) = match split {
        Some(groups) => {
            let mut factors = Vec::new();
            let mut reports = Vec::new();
            for (c, idx) in groups.iter().enumerate() {
                let fb = spec.factor_basis(c, idx)?;
                let sub = sg.select(idx, fb.clone())?;
                let r = subalgebra_search(&sub, cfg.energy_fraction, cfg.closure_tol)?;
                factors.push(named_basis(&r, &fb));
                reports.push(r);
            }
            (ActionSpec::clustered_affine(&factors, spec.assignment().to_vec())?, reports)
        }
        None => {
            let r = subalgebra_search(sg, cfg.energy_fraction, cfg.closure_tol)?;
            (spec.with_basis(named_basis(&r, spec.basis()))?, vec![r])
        }
    };
    let summary = SubalgebraSummary {
        energy_fraction: cfg.energy_fraction,
        dim: action.group_dim(),
        blocks: reports.iter().map(block_summary).collect(),
    };
    Ok((action, reports, summary))
}

// ---------------------------------------------------------------- ρ

fn kept_points(n: usize, stride: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let k = (n - 1) / stride + 1;
    k + usize::from((n - 1) % stride != 0)
}

fn rho_for(sg: &ReducedSnapshotMatrix, n_points: usize, cfg: &RunConfig) -> Result<(morlie_core::fitting::ReducedVectorField, usize)> {
    let kept = kept_points(n_points, cfg.rho_stride);
    if kept < 2 {
        bail!("rho: {kept} time points are too few to fit a curve");
    }
    let segments = cfg.rho_segments.min(kept - 1);
    Ok((fit_rho_theta(sg, segments, cfg.rho_stride)?, segments))
}

pub fn rho_per_trajectory(cfg: &RunConfig, set: &SnapshotSet) -> bool {
    match cfg.rho_scope {
        RhoScope::Shared => false,
        RhoScope::PerTrajectory => true,
        RhoScope::Auto => set.iter().any(|s| !s.param.is_empty()),
    }
}

pub fn run_rho(cfg: &RunConfig, set: &SnapshotSet, sg: &ReducedSnapshotMatrix) -> Result<(RhoSet, RhoSummary)> {
    let per_traj = rho_per_trajectory(cfg, set);
    let mut rhos: RhoSet = Vec::new();
    let mut segments = cfg.rho_segments;
    if per_traj {
        let ids: Vec<usize> = set.trajectory_ids();
        for id in ids {
            let cols: Vec<_> = sg.columns.iter().filter(|c| c.traj == id).cloned().collect();
            if cols.is_empty() {
                continue;
            }
            let n = cols.len();
            let sub = ReducedSnapshotMatrix::new(sg.basis.clone(), cols)?;
            let (rho, s) = rho_for(&sub, n, cfg)?;
            segments = segments.min(s);
            rhos.push((Some(id), rho));
        }
    } else {
        let n = set.trajectories().map(|t| t.len().saturating_sub(1)).max().unwrap_or(0);
        let (rho, s) = rho_for(sg, n, cfg)?;
        segments = s;
        rhos.push((None, rho));
    }
    let summary = RhoSummary {
        scope: if per_traj { "per_trajectory" } else { "shared" }.into(),
        segments,
        stride: cfg.rho_stride,
        curves: rhos.len(),
        fit_rmse_max: rhos.iter().map(|(_, r)| r.fit_rmse).fold(0.0, f64::max),
    };
    Ok((rhos, summary))
}

fn rho_of<'a>(rhos: &'a RhoSet, traj: usize) -> Result<&'a morlie_core::fitting::ReducedVectorField> {
    rhos.iter()
        .find(|(id, _)| *id == Some(traj))
        .or_else(|| rhos.iter().find(|(id, _)| id.is_none()))
        .map(|(_, r)| r)
        .ok_or_else(|| anyhow!("no fitted rho for trajectory {traj}"))
}

// ---------------------------------------------------------------- ROM

/// ROM reconstruction of every trajectory from its first snapshot on the
/// data times.
pub fn simulate(action: &ActionSpec, rhos: &RhoSet, set: &SnapshotSet, method: Integrator) -> Result<Vec<(usize, Trajectory)>> {
    let trajs: Vec<&[Snapshot]> = set.trajectories().collect();
    trajs
        .par_iter()
        .map(|t| {
            let id = t[0].traj;
            let model = RomModel::new(action.clone(), rho_of(rhos, id)?.clone(), t[0].state.clone())?;
            let times: Vec<f64> = t.iter().map(|s| s.time).collect();
            Ok((id, integrate_rom(&model, &times, method)?))
        })
        .collect()
}

pub fn reconstruction_set(set: &SnapshotSet, roms: &[(usize, Trajectory)]) -> Result<SnapshotSet> {
    let mut out = Vec::new();
    for (id, traj) in roms {
        let param = set.trajectory_by_id(*id).map(|t| t[0].param.clone()).unwrap_or_default();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            out.push(Snapshot::new(*id, *t, x.clone()).with_param(param.clone()));
        }
    }
    Ok(SnapshotSet::new(out)?)
}

/// Errors of a reconstruction against the data, matched by trajectory and step.
pub fn evaluate_errors(set: &SnapshotSet, rom: &SnapshotSet) -> Result<Vec<(usize, ErrorCurve)>> {
    set.trajectories()
        .map(|t| {
            let id = t[0].traj;
            let r = rom.trajectory_by_id(id).ok_or_else(|| anyhow!("reconstruction lacks trajectory {id}"))?;
            if r.len() != t.len() {
                bail!("reconstruction of trajectory {id} has {} snapshots, data has {}", r.len(), t.len());
            }
            let errors = t
                .iter()
                .zip(r)
                .map(|(a, b)| state_distance(&a.state, &b.state))
                .collect::<morlie_core::Result<Vec<_>>>()?;
            Ok((
                id,
                ErrorCurve {
                    times: t.iter().map(|s| s.time).collect(),
                    errors,
                },
            ))
        })
        .collect()
}

pub fn rom_summary(method: Integrator, curves: &[(usize, ErrorCurve)]) -> RomSummary {
    let all: Vec<f64> = curves.iter().flat_map(|(_, c)| c.errors.iter().copied()).collect();
    let finals: Vec<f64> = curves.iter().filter_map(|(_, c)| c.errors.last().copied()).collect();
    RomSummary {
        integrator: integrator_name(method).into(),
        error_max: all.iter().copied().fold(0.0, f64::max),
        error_mean: if all.is_empty() {
            0.0
        } else {
            all.iter().sum::<f64>() / all.len() as f64
        },
        initial_error_max: curves.iter().filter_map(|(_, c)| c.errors.first().copied()).fold(0.0, f64::max),
        final_error_mean: if finals.is_empty() {
            0.0
        } else {
            finals.iter().sum::<f64>() / finals.len() as f64
        },
        per_trajectory_max: curves.iter().map(|(_, c)| c.max()).collect(),
    }
}

/// Data and reconstruction of the first trajectory at its first, middle and last snapshot.
pub fn overlay(set: &SnapshotSet, rom: &SnapshotSet) -> Result<Vec<OverlayRow>> {
    let data = set.trajectory(0);
    let r = rom
        .trajectory_by_id(data[0].traj)
        .ok_or_else(|| anyhow!("reconstruction lacks the first trajectory"))?;
    let n = data.len().min(r.len());
    let mut idx = vec![0, n / 2, n - 1];
    idx.dedup();
    Ok(idx
        .into_iter()
        .flat_map(|k| report::overlay_rows(data[k].time, &data[k].state, &r[k].state))
        .collect())
}

// ---------------------------------------------------------------- POD and width

pub fn run_pod(cfg: &RunConfig, set: &SnapshotSet, subalgebra_dim: usize) -> Result<(PodResult, PodSummary)> {
    let pod = pod_svd(set, PodOptions::default())?;
    let k = subalgebra_dim.min(pod.modes.ncols());
    let err = projection_error(set, &pod.modes.columns(0, k).into_owned(), None)?;
    let summary = PodSummary {
        energy_fraction: cfg.pod_energy,
        rank: pod.rank(),
        modes_for_energy: pod.energy_rank(cfg.pod_energy),
        subalgebra_dim,
        projection_sup_at_dim: err.sup,
        projection_mean_at_dim: err.mean,
    };
    Ok((pod, summary))
}

pub fn width_enabled(cfg: &RunConfig, set: &SnapshotSet) -> bool {
    cfg.width.unwrap_or(matches!(set.first_state().chart(), Chart::Grid { .. }))
}

pub fn run_width(cfg: &RunConfig, spec: &ActionSpec, set: &SnapshotSet) -> Result<(WidthReport, WidthSummary)> {
    let wcfg = WidthConfig {
        horizon: cfg.width_horizon,
        ..WidthConfig::default()
    };
    let trajs: Vec<&[Snapshot]> = set.trajectories().collect();
    let parts = trajs
        .par_iter()
        .map(|t| trajectory_width(spec, &Anchor::TrajectoryStart, t, &wcfg))
        .collect::<morlie_core::Result<Vec<_>>>()?;
    let rep = merge_width_reports(parts);
    let summary = WidthSummary {
        width: rep.width,
        evaluated: rep.per_snapshot.len(),
        flagged: rep.flagged.len(),
    };
    Ok((rep, summary))
}

// ---------------------------------------------------------------- run directory

/// Output directory plus the accumulated summary and timings.
pub struct RunDir {
    pub dir: PathBuf,
    pub summary: Summary,
    pub timings: Timings,
}

impl RunDir {
    pub fn open(cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating output directory {}", cfg.out.display()))?;
        let mut summary = Summary::load_or_default(&cfg.out)?;
        summary.family = cfg.bench.family.name().into();
        summary.seed = cfg.bench.seed;
        Ok(Self {
            dir: cfg.out.clone(),
            summary,
            timings: Timings::load_or_default(&cfg.out)?,
        })
    }

    pub fn fresh(cfg: &RunConfig) -> Result<Self> {
        let mut rd = Self::open(cfg)?;
        rd.summary = Summary {
            family: cfg.bench.family.name().into(),
            seed: cfg.bench.seed,
            ..Summary::default()
        };
        rd.timings = Timings::default();
        Ok(rd)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        info!("stage {name}");
        let start = Instant::now();
        let out = f().with_context(|| format!("stage {name} failed"));
        self.timings.record(name, start.elapsed().as_secs_f64());
        out
    }

    /// Write summary (with recomputed flags) and timings.
    pub fn save(&mut self) -> Result<Outcome> {
        self.summary.flags = self.summary.compute_flags();
        self.summary.write(&self.path(SUMMARY_FILE))?;
        self.timings.write(&self.path(TIMINGS_FILE))?;
        Ok(Outcome::of(&self.summary))
    }
}

/// Snapshots for a stage subcommand: `input` if set, else the run directory's copy.
pub fn load_snapshots(cfg: &RunConfig, rd: &RunDir) -> Result<SnapshotSet> {
    let p = cfg.input.clone().unwrap_or_else(|| rd.path(SNAPSHOTS_FILE));
    if !p.exists() {
        bail!("no snapshots: {} does not exist (run `generate` or pass --input)", p.display());
    }
    io::read_snapshots(&p)
}

fn load_truth(rd: &RunDir) -> Result<Option<TruthRecord>> {
    let p = rd.path(TRUTH_FILE);
    if p.exists() {
        Ok(Some(io::read_truth(&p)?))
    } else {
        Ok(None)
    }
}

/// The full action of the run directory (reads the assignment if clustered).
fn load_action(cfg: &RunConfig, rd: &RunDir, set: &SnapshotSet) -> Result<ActionSpec> {
    let choice = resolved_action(cfg, set);
    let assignment = if choice == ActionChoice::Clustered {
        Some(io::read_assignment(&rd.path(ASSIGNMENT_FILE))?)
    } else {
        None
    };
    build_action(choice, assignment.as_deref())
}

fn load_reduced_action(cfg: &RunConfig, rd: &RunDir, set: &SnapshotSet) -> Result<ActionSpec> {
    let full = load_action(cfg, rd, set)?;
    let p = rd.path(SUBALGEBRA_FILE);
    if p.exists() {
        Ok(full.with_basis(io::read_basis(&p)?)?)
    } else {
        Ok(full)
    }
}

// ---------------------------------------------------------------- subcommands

pub fn cmd_generate(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::fresh(cfg)?;
    let (set, truth, source) = rd.stage("generate", || acquire(cfg))?;
    io::write_snapshots(&rd.path(SNAPSHOTS_FILE), &set)?;
    if let Some(t) = &truth {
        io::write_truth(&rd.path(TRUTH_FILE), t)?;
    }
    std::fs::write(rd.path(CONFIG_FILE), cfg.to_text())?;
    rd.summary.source = source;
    rd.summary.data = Some(data_summary(&set));
    rd.save()
}

pub fn cmd_cluster(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::open(cfg)?;
    let set = load_snapshots(cfg, &rd)?;
    let truth = load_truth(&rd)?;
    let (res, summary) = rd.stage("cluster", || run_clustering(cfg, &set, truth.as_ref()))?;
    io::write_assignment(&rd.path(ASSIGNMENT_FILE), &res.assignment)?;
    rd.summary.clustering = Some(summary);
    rd.save()
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::open(cfg)?;
    let set = load_snapshots(cfg, &rd)?;
    let action = load_action(cfg, &rd, &set)?;
    let (sg, fits) = rd.stage("fit", || run_fits(cfg, &action, &set))?;
    io::write_basis(&rd.path(BASIS_FULL_FILE), action.basis())?;
    io::write_sg(&rd.path(SG_FILE), &sg)?;
    rd.summary.data = Some(data_summary(&set));
    rd.summary.action = Some(action_summary(&action));
    rd.summary.fits = fits;
    rd.save()
}

pub fn cmd_reduce(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::open(cfg)?;
    let set = load_snapshots(cfg, &rd)?;
    let action = load_action(cfg, &rd, &set)?;
    let sg = io::read_sg(&rd.path(SG_FILE), io::read_basis(&rd.path(BASIS_FULL_FILE))?)?;
    let (action_h, reports, summary) = rd.stage("subalgebra", || run_subalgebra(cfg, &action, &sg))?;
    io::write_basis(&rd.path(SUBALGEBRA_FILE), action_h.basis())?;
    report::write_spectrum_sg(
        &rd.path(report::SPECTRUM_SG_FILE),
        &reports.iter().map(|r| r.singular_values.clone()).collect::<Vec<_>>(),
    )?;
    let vf = primary_is_velocity_free(cfg);
    let sg_h = rd.stage("refit", || fit_one_mode(&action_h, &set, vf))?;
    io::write_sg(&rd.path(SG_REDUCED_FILE), &sg_h)?;
    rd.summary.refit = Some(fit_summary(mode_name(vf), &action_h, &set, &sg_h)?);
    rd.summary.subalgebra = Some(summary);
    rd.save()
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::open(cfg)?;
    let set = load_snapshots(cfg, &rd)?;
    let action_h = load_reduced_action(cfg, &rd, &set)?;
    let sg_name = if rd.path(SG_REDUCED_FILE).exists() { SG_REDUCED_FILE } else { SG_FILE };
    let sg = io::read_sg(&rd.path(sg_name), action_h.basis().clone())?;
    let (rhos, rho_summary) = rd.stage("rho", || run_rho(cfg, &set, &sg))?;
    io::write_rho(&rd.path(RHO_FILE), &rhos)?;
    let roms = rd.stage("rom", || simulate(&action_h, &rhos, &set, cfg.integrator))?;
    io::write_snapshots(&rd.path(ROM_FILE), &reconstruction_set(&set, &roms)?)?;
    rd.summary.rho = Some(rho_summary);
    rd.save()
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::open(cfg)?;
    let set = load_snapshots(cfg, &rd)?;
    let rom = io::read_snapshots(&rd.path(ROM_FILE))?;
    let curves = rd.stage("evaluate", || evaluate_errors(&set, &rom))?;
    report::write_errors(&rd.path(report::ERRORS_FILE), &curves)?;
    report::write_overlay(&rd.path(report::OVERLAY_FILE), &overlay(&set, &rom)?)?;
    rd.summary.rom = Some(rom_summary(cfg.integrator, &curves));
    let dim = load_reduced_action(cfg, &rd, &set)?.group_dim();
    let (pod, pod_summary) = rd.stage("pod", || run_pod(cfg, &set, dim))?;
    report::write_spectrum_pod(&rd.path(report::SPECTRUM_POD_FILE), &pod.singular_values)?;
    rd.summary.pod = Some(pod_summary);
    rd.save()
}

pub fn cmd_width(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::open(cfg)?;
    let set = load_snapshots(cfg, &rd)?;
    let action = load_reduced_action(cfg, &rd, &set)?;
    let (rep, summary) = rd.stage("width", || run_width(cfg, &action, &set))?;
    report::write_width(&rd.path(report::WIDTH_FILE), Some(&rep))?;
    rd.summary.width = Some(summary);
    rd.save()
}

pub fn cmd_report(cfg: &RunConfig) -> Result<Outcome> {
    let mut rd = RunDir::open(cfg)?;
    report::render_svgs(&rd.dir)?;
    rd.save()
}

/// Every stage in one process. On failure the files written so far and a
/// summary carrying the error stay in the output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(Outcome, Summary)> {
    cfg.validate()?;
    let mut rd = RunDir::fresh(cfg)?;
    std::fs::write(rd.path(CONFIG_FILE), cfg.to_text())?;
    let result = pipeline_stages(cfg, &mut rd);
    if let Err(e) = &result {
        rd.summary.error = Some(format!("{e:#}"));
    }
    report::render_svgs(&rd.dir)?;
    let outcome = rd.save()?;
    result.map(|_| (outcome, rd.summary.clone()))
}

fn pipeline_stages(cfg: &RunConfig, rd: &mut RunDir) -> Result<()> {
    let (set, truth, source) = rd.stage("generate", || acquire(cfg))?;
    rd.summary.source = source;
    rd.summary.data = Some(data_summary(&set));
    if cfg.save_states {
        io::write_snapshots(&rd.path(SNAPSHOTS_FILE), &set)?;
        if let Some(t) = &truth {
            io::write_truth(&rd.path(TRUTH_FILE), t)?;
        }
    }

    let choice = resolved_action(cfg, &set);
    let assignment = if choice == ActionChoice::Clustered {
        let (res, summary) = rd.stage("cluster", || run_clustering(cfg, &set, truth.as_ref()))?;
        io::write_assignment(&rd.path(ASSIGNMENT_FILE), &res.assignment)?;
        rd.summary.clustering = Some(summary);
        Some(res.assignment)
    } else {
        None
    };
    let action = build_action(choice, assignment.as_deref())?;
    rd.summary.action = Some(action_summary(&action));

    let (sg, fits) = rd.stage("fit", || run_fits(cfg, &action, &set))?;
    io::write_basis(&rd.path(BASIS_FULL_FILE), action.basis())?;
    io::write_sg(&rd.path(SG_FILE), &sg)?;
    rd.summary.fits = fits;

    let (action_h, reports, sub_summary) = rd.stage("subalgebra", || run_subalgebra(cfg, &action, &sg))?;
    io::write_basis(&rd.path(SUBALGEBRA_FILE), action_h.basis())?;
    report::write_spectrum_sg(
        &rd.path(report::SPECTRUM_SG_FILE),
        &reports.iter().map(|r| r.singular_values.clone()).collect::<Vec<_>>(),
    )?;
    rd.summary.subalgebra = Some(sub_summary);

    let vf = primary_is_velocity_free(cfg);
    let sg_h = rd.stage("refit", || fit_one_mode(&action_h, &set, vf))?;
    io::write_sg(&rd.path(SG_REDUCED_FILE), &sg_h)?;
    rd.summary.refit = Some(fit_summary(mode_name(vf), &action_h, &set, &sg_h)?);

    let (rhos, rho_summary) = rd.stage("rho", || run_rho(cfg, &set, &sg_h))?;
    io::write_rho(&rd.path(RHO_FILE), &rhos)?;
    rd.summary.rho = Some(rho_summary);

    let roms = rd.stage("rom", || simulate(&action_h, &rhos, &set, cfg.integrator))?;
    let rom_set = reconstruction_set(&set, &roms)?;
    if cfg.save_states {
        io::write_snapshots(&rd.path(ROM_FILE), &rom_set)?;
    }
    let curves = rd.stage("evaluate", || evaluate_errors(&set, &rom_set))?;
    report::write_errors(&rd.path(report::ERRORS_FILE), &curves)?;
    report::write_overlay(&rd.path(report::OVERLAY_FILE), &overlay(&set, &rom_set)?)?;
    rd.summary.rom = Some(rom_summary(cfg.integrator, &curves));

    let (pod, pod_summary) = rd.stage("pod", || run_pod(cfg, &set, action_h.group_dim()))?;
    report::write_spectrum_pod(&rd.path(report::SPECTRUM_POD_FILE), &pod.singular_values)?;
    rd.summary.pod = Some(pod_summary);

    if width_enabled(cfg, &set) {
        let (rep, summary) = rd.stage("width", || run_width(cfg, &action_h, &set))?;
        report::write_width(&rd.path(report::WIDTH_FILE), Some(&rep))?;
        rd.summary.width = Some(summary);
    }
    Ok(())
}

/// Worker count from `MORLIE_WORKERS` (unset or 0: one per core).
pub fn workers_from_env() -> Result<usize> {
    match std::env::var("MORLIE_WORKERS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|e| anyhow!("MORLIE_WORKERS={v:?}: {e}")),
        Err(_) => Ok(0),
    }
}
