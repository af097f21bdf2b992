//! Machine-readable run summary. Timings live in a separate file so that
//! repeated runs produce identical summaries.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub family: String,
    /// `generated` or the ingested file name.
    pub source: String,
    pub seed: u64,
    pub data: Option<DataSummary>,
    pub action: Option<ActionSummary>,
    pub clustering: Option<ClusterSummary>,
    /// One entry per fitted mode, primary first.
    pub fits: Vec<FitSummary>,
    pub subalgebra: Option<SubalgebraSummary>,
    pub refit: Option<FitSummary>,
    pub rho: Option<RhoSummary>,
    pub rom: Option<RomSummary>,
    pub pod: Option<PodSummary>,
    pub width: Option<WidthSummary>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub chart: String,
    pub n_trajectories: usize,
    pub n_snapshots: usize,
    pub state_dim: usize,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSummary {
    pub kind: String,
    pub group_dim: usize,
    pub n_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub n_clusters: usize,
    pub sizes: Vec<usize>,
    pub stride: usize,
    pub reseeds: usize,
    pub singletons: usize,
    /// Fraction of particles matched to the true clusters, when known.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub mode: String,
    pub basis_dim: usize,
    pub columns: usize,
    /// Sum of the per-column costs reported by the fit.
    pub total_cost: f64,
    /// Sum over columns of the one-step distance cost.
    pub one_step_cost: f64,
    pub unconverged: usize,
    pub rank_deficient: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSubalgebra {
    pub k: usize,
    pub dim: usize,
    pub captured_energy: f64,
    pub closed: bool,
    pub rounds: usize,
    pub closure_residual: f64,
    pub library_match: Option<String>,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubalgebraSummary {
    pub energy_fraction: f64,
    pub dim: usize,
    /// One entry per product factor (a single one for unclustered actions).
    pub blocks: Vec<BlockSubalgebra>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSummary {
    pub scope: String,
    pub segments: usize,
    pub stride: usize,
    pub curves: usize,
    pub fit_rmse_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomSummary {
    pub integrator: String,
    pub error_max: f64,
    pub error_mean: f64,
    /// Largest error at the first snapshot; zero up to rounding.
    pub initial_error_max: f64,
    pub final_error_mean: f64,
    pub per_trajectory_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodSummary {
    pub energy_fraction: f64,
    pub rank: usize,
    pub modes_for_energy: usize,
    pub subalgebra_dim: usize,
    /// POD projection error with as many modes as the subalgebra has dimensions.
    pub projection_sup_at_dim: f64,
    pub projection_mean_at_dim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSummary {
    pub width: f64,
    pub evaluated: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

impl Summary {
    /// Conditions that make a run count as not clean.
    pub fn compute_flags(&self) -> Vec<String> {
        let mut flags = Vec::new();
        if let Some(c) = &self.clustering {
            if c.singletons > 0 {
                flags.push(format!("clustering: {} particles left as singleton clusters", c.singletons));
            }
        }
        for f in self.fits.iter().chain(self.refit.iter()) {
            if f.unconverged > 0 {
                flags.push(format!("fit ({}): {} columns did not converge", f.mode, f.unconverged));
            }
            if f.rank_deficient > 0 {
                flags.push(format!("fit ({}): {} rank-deficient columns", f.mode, f.rank_deficient));
            }
        }
        if let Some(s) = &self.subalgebra {
            for (i, b) in s.blocks.iter().enumerate() {
                if !b.closed {
                    flags.push(format!("subalgebra: block {i} did not close under the bracket"));
                }
            }
        }
        if let Some(w) = &self.width {
            if w.flagged > 0 {
                flags.push(format!("width: {} orbit distances did not converge", w.flagged));
            }
        }
        flags
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The summary in `dir`, or an empty one.
    pub fn load_or_default(dir: &Path) -> Result<Self> {
        let p = dir.join(SUMMARY_FILE);
        if p.exists() {
            Self::read(&p)
        } else {
            Ok(Self::default())
        }
    }
}

impl Timings {
    pub fn record(&mut self, stage: &str, seconds: f64) {
        self.stages.retain(|(s, _)| s != stage);
        self.stages.push((stage.to_string(), seconds));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load_or_default(dir: &Path) -> Result<Self> {
        let p = dir.join(TIMINGS_FILE);
        if p.exists() {
            Ok(serde_json::from_str(&std::fs::read_to_string(&p)?)?)
        } else {
            Ok(Self::default())
        }
    }
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.json";
