//! Flat `key = value` run configuration. Every key doubles as a `--key value` flag.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use morlie_core::datagen::{BenchmarkConfig, Family};
use morlie_core::rom::Integrator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    VelocityBased,
    VelocityFree,
    /// Fit both; downstream stages use the velocity-free result.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionChoice {
    /// By family: clustered for sheering, aff(3) for clouds, shift for grids, rotation for polar data.
    Auto,
    Aff3,
    Se3,
    Translations,
    Clustered,
    Grid,
    Polar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoScope {
    /// Per trajectory when snapshots carry parameters, shared otherwise.
    Auto,
    Shared,
    PerTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bench: BenchmarkConfig,
    /// Snapshot CSV to ingest instead of generating.
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub fit_mode: FitMode,
    pub action: ActionChoice,
    pub energy_fraction: f64,
    pub closure_tol: f64,
    pub n_neighbors: usize,
    pub residual_tol: f64,
    pub cluster_stride: Option<usize>,
    pub integrator: Integrator,
    pub rho_segments: usize,
    pub rho_stride: usize,
    pub rho_scope: RhoScope,
    /// `None`: only for the transport family.
    pub width: Option<bool>,
    pub width_horizon: Option<f64>,
    pub pod_energy: f64,
    /// Write full snapshot and reconstruction CSVs from `pipeline`.
    pub save_states: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bench: BenchmarkConfig::rigid(),
            input: None,
            out: PathBuf::from("morlie-out"),
            fit_mode: FitMode::VelocityFree,
            action: ActionChoice::Auto,
            energy_fraction: 0.99,
            closure_tol: morlie_core::lie::DEFAULT_CLOSURE_TOL,
            n_neighbors: morlie_core::clustering::DEFAULT_NEIGHBORS,
            residual_tol: morlie_core::clustering::DEFAULT_RESIDUAL_TOL,
            cluster_stride: None,
            integrator: Integrator::Rkmk4,
            rho_segments: 50,
            rho_stride: 1,
            rho_scope: RhoScope::Auto,
            width: None,
            width_horizon: None,
            pod_energy: 0.99,
            save_states: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "family",
    "n_traj",
    "n_particles",
    "n_steps",
    "horizon",
    "sigma",
    "seed",
    "n_knots",
    "rotation_amp",
    "translation_amp",
    "shear_amp",
    "cluster_sizes",
    "cluster_offset",
    "radial_mu",
    "radial_a",
    "radial_b",
    "radial_q0",
    "transport_mu1",
    "transport_mu2",
    "grid_size",
    "input",
    "out",
    "fit_mode",
    "action",
    "energy_fraction",
    "closure_tol",
    "n_neighbors",
    "residual_tol",
    "cluster_stride",
    "integrator",
    "rho_segments",
    "rho_stride",
    "rho_scope",
    "width",
    "width_horizon",
    "pod_energy",
    "save_states",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn auto_bool(key: &str, v: &str) -> Result<Option<bool>> {
    match v {
        "auto" => Ok(None),
        _ => Ok(Some(num(key, v)?)),
    }
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn for_family(family: Family) -> Self {
        Self {
            bench: BenchmarkConfig::defaults(family),
            ..Self::default()
        }
    }

    /// Apply one setting. `family` resets the benchmark fields to that
    /// family's defaults, so it should come first.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let b = &mut self.bench;
        match key {
            "family" => {
                let f = Family::parse(v).ok_or_else(|| anyhow!("family: unknown benchmark {v:?}"))?;
                let seed = b.seed;
                *b = BenchmarkConfig::defaults(f);
                b.seed = seed;
            }
            "n_traj" => b.n_traj = num(key, v)?,
            "n_particles" => b.n_particles = num(key, v)?,
            "n_steps" => b.n_steps = num(key, v)?,
            "horizon" => b.horizon = num(key, v)?,
            "sigma" => b.sigma = num(key, v)?,
            "seed" => b.seed = num(key, v)?,
            "n_knots" => b.n_knots = num(key, v)?,
            "rotation_amp" => b.rotation_amp = num(key, v)?,
            "translation_amp" => b.translation_amp = num(key, v)?,
            "shear_amp" => b.shear_amp = num(key, v)?,
            "cluster_sizes" => b.cluster_sizes = list(key, v)?,
            "cluster_offset" => b.cluster_offset = num(key, v)?,
            "radial_mu" => b.radial_mu = list(key, v)?,
            "radial_a" => b.radial_a = num(key, v)?,
            "radial_b" => b.radial_b = num(key, v)?,
            "radial_q0" => {
                let q: Vec<f64> = list(key, v)?;
                if q.len() != 2 {
                    bail!("radial_q0: expected two values");
                }
                b.radial_q0 = [q[0], q[1]];
            }
            "transport_mu1" => b.transport_mu1 = list(key, v)?,
            "transport_mu2" => b.transport_mu2 = list(key, v)?,
            "grid_size" => b.grid_size = num(key, v)?,
            "input" => self.input = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "out" => self.out = PathBuf::from(v),
            "fit_mode" => {
                self.fit_mode = match v {
                    "velocity_based" => FitMode::VelocityBased,
                    "velocity_free" => FitMode::VelocityFree,
                    "both" => FitMode::Both,
                    _ => bail!("fit_mode: expected velocity_based, velocity_free or both"),
                }
            }
            "action" => {
                self.action = match v {
                    "auto" => ActionChoice::Auto,
                    "aff3" => ActionChoice::Aff3,
                    "se3" => ActionChoice::Se3,
                    "translations" => ActionChoice::Translations,
                    "clustered" => ActionChoice::Clustered,
                    "grid" => ActionChoice::Grid,
                    "polar" => ActionChoice::Polar,
                    _ => bail!("action: unknown action {v:?}"),
                }
            }
            "energy_fraction" => self.energy_fraction = num(key, v)?,
            "closure_tol" => self.closure_tol = num(key, v)?,
            "n_neighbors" => self.n_neighbors = num(key, v)?,
            "residual_tol" => self.residual_tol = num(key, v)?,
            "cluster_stride" => self.cluster_stride = if v == "auto" { None } else { Some(num(key, v)?) },
            "integrator" => {
                self.integrator = match v {
                    "rkmk4" => Integrator::Rkmk4,
                    "lie_euler" => Integrator::LieEuler,
                    _ => bail!("integrator: expected rkmk4 or lie_euler"),
                }
            }
            "rho_segments" => self.rho_segments = num(key, v)?,
            "rho_stride" => self.rho_stride = num(key, v)?,
            "rho_scope" => {
                self.rho_scope = match v {
                    "auto" => RhoScope::Auto,
                    "shared" => RhoScope::Shared,
                    "per_trajectory" => RhoScope::PerTrajectory,
                    _ => bail!("rho_scope: expected auto, shared or per_trajectory"),
                }
            }
            "width" => self.width = auto_bool(key, v)?,
            "width_horizon" => self.width_horizon = if v == "none" { None } else { Some(num(key, v)?) },
            "pod_energy" => self.pod_energy = num(key, v)?,
            "save_states" => self.save_states = num(key, v)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Settings from `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        // `family` resets the benchmark block, so apply it before anything else.
        pairs.sort_by_key(|(_, k, _)| k != "family");
        for (line, k, v) in pairs {
            self.set(&k, &v).with_context(|| format!("line {line}"))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
    }

    /// `--key value` pairs (also `--key=value`), applied after any file.
    pub fn apply_flags(&mut self, args: &[String]) -> Result<()> {
        let mut pairs = Vec::new();
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let Some(flag) = a.strip_prefix("--") else {
                bail!("unexpected argument {a:?}; settings are given as --key value");
            };
            let (k, v) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| anyhow!("--{flag} needs a value"))?;
                    (flag.to_string(), v.clone())
                }
            };
            pairs.push((k.replace('-', "_"), v));
        }
        pairs.sort_by_key(|(k, _)| k != "family");
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.bench.validate()?;
        if let Some(p) = &self.input {
            if !p.exists() {
                bail!("input {} does not exist", p.display());
            }
        }
        if !(self.energy_fraction > 0.0 && self.energy_fraction < 1.0) {
            bail!("energy_fraction must lie in (0, 1)");
        }
        if !(self.pod_energy > 0.0 && self.pod_energy <= 1.0) {
            bail!("pod_energy must lie in (0, 1]");
        }
        if !(self.closure_tol > 0.0) || !(self.residual_tol > 0.0) {
            bail!("closure_tol and residual_tol must be positive");
        }
        if self.n_neighbors == 0 || self.rho_segments == 0 || self.rho_stride == 0 {
            bail!("n_neighbors, rho_segments and rho_stride must be positive");
        }
        if self.cluster_stride == Some(0) {
            bail!("cluster_stride must be positive");
        }
        Ok(())
    }

    /// Canonical text form; `apply_text` of it reproduces `self`.
    pub fn to_text(&self) -> String {
        let b = &self.bench;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("family", b.family.name().into());
        kv("n_traj", b.n_traj.to_string());
        kv("n_particles", b.n_particles.to_string());
        kv("n_steps", b.n_steps.to_string());
        kv("horizon", b.horizon.to_string());
        kv("sigma", b.sigma.to_string());
        kv("seed", b.seed.to_string());
        kv("n_knots", b.n_knots.to_string());
        kv("rotation_amp", b.rotation_amp.to_string());
        kv("translation_amp", b.translation_amp.to_string());
        kv("shear_amp", b.shear_amp.to_string());
        kv("cluster_sizes", join(&b.cluster_sizes));
        kv("cluster_offset", b.cluster_offset.to_string());
        kv("radial_mu", join(&b.radial_mu));
        kv("radial_a", b.radial_a.to_string());
        kv("radial_b", b.radial_b.to_string());
        kv("radial_q0", join(&b.radial_q0));
        kv("transport_mu1", join(&b.transport_mu1));
        kv("transport_mu2", join(&b.transport_mu2));
        kv("grid_size", b.grid_size.to_string());
        kv("input", self.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        kv("out", self.out.display().to_string());
        kv(
            "fit_mode",
            match self.fit_mode {
                FitMode::VelocityBased => "velocity_based",
                FitMode::VelocityFree => "velocity_free",
                FitMode::Both => "both",
            }
            .into(),
        );
        kv(
            "action",
            match self.action {
                ActionChoice::Auto => "auto",
                ActionChoice::Aff3 => "aff3",
                ActionChoice::Se3 => "se3",
                ActionChoice::Translations => "translations",
                ActionChoice::Clustered => "clustered",
                ActionChoice::Grid => "grid",
                ActionChoice::Polar => "polar",
            }
            .into(),
        );
        kv("energy_fraction", self.energy_fraction.to_string());
        kv("closure_tol", self.closure_tol.to_string());
        kv("n_neighbors", self.n_neighbors.to_string());
        kv("residual_tol", self.residual_tol.to_string());
        kv("cluster_stride", self.cluster_stride.map(|s| s.to_string()).unwrap_or("auto".into()));
        kv(
            "integrator",
            match self.integrator {
                Integrator::Rkmk4 => "rkmk4",
                Integrator::LieEuler => "lie_euler",
            }
            .into(),
        );
        kv("rho_segments", self.rho_segments.to_string());
        kv("rho_stride", self.rho_stride.to_string());
        kv(
            "rho_scope",
            match self.rho_scope {
                RhoScope::Auto => "auto",
                RhoScope::Shared => "shared",
                RhoScope::PerTrajectory => "per_trajectory",
            }
            .into(),
        );
        kv("width", self.width.map(|w| w.to_string()).unwrap_or("auto".into()));
        kv("width_horizon", self.width_horizon.map(|h| h.to_string()).unwrap_or("none".into()));
        kv("pod_energy", self.pod_energy.to_string());
        kv("save_states", self.save_states.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::for_family(Family::Sheering);
        c.set("sigma", "0.025").unwrap();
        c.set("cluster_sizes", "30,40,50").unwrap();
        c.set("width", "true").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn flags_override_file() {
        let mut c = RunConfig::default();
        c.apply_text("sigma = 0.5\nfamily = radial # comment\nseed = 4\n").unwrap();
        assert_eq!(c.bench.family, Family::Radial);
        assert_eq!(c.bench.sigma, 0.5);
        c.apply_flags(&["--sigma".into(), "0.1".into(), "--n-steps=11".into()]).unwrap();
        assert_eq!(c.bench.sigma, 0.1);
        assert_eq!(c.bench.n_steps, 11);
        assert_eq!(c.bench.seed, 4);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = RunConfig::default();
        assert!(c.set("sigmaa", "1").is_err());
        assert!(c.apply_text("no equals sign").is_err());
        assert!(c.apply_flags(&["--seed".into()]).is_err());
    }

    #[test]
    fn every_key_is_settable_from_text() {
        let text = RunConfig::default().to_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        assert_eq!(keys, KEYS);
    }
}
