//! Solution snapshots `(x_{j,k}, t_{j,k}, μ_j)` grouped by trajectory.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::ops::Range;

use crate::actions::StatePoint;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub traj: usize,
    /// Position within the trajectory after sorting by time.
    pub step: usize,
    pub time: f64,
    pub state: StatePoint,
    pub param: Vec<f64>,
}

impl Snapshot {
    pub fn new(traj: usize, time: f64, state: StatePoint) -> Self {
        Self {
            traj,
            step: 0,
            time,
            state,
            param: Vec::new(),
        }
    }

    pub fn with_param(mut self, param: Vec<f64>) -> Self {
        self.param = param;
        self
    }
}

/// Snapshots sorted by `(traj, time)`; steps are renumbered `0..` per
/// trajectory. Times strictly increase within a trajectory and all states
/// share one chart and shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    snapshots: Vec<Snapshot>,
    ranges: Vec<(usize, Range<usize>)>,
}

impl SnapshotSet {
    pub fn new(mut snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Empty("snapshot set has no records".to_string()));
        }
        for s in &snapshots {
            if !s.time.is_finite() || s.state.coords().iter().any(|v| !v.is_finite()) {
                return Err(invalid(alloc::format!(
                    "snapshot (traj {}, t = {}) has non-finite values",
                    s.traj,
                    s.time
                )));
            }
        }
        let first = snapshots[0].state.clone();
        if let Some(bad) = snapshots.iter().find(|s| !s.state.same_shape(&first)) {
            return Err(invalid(alloc::format!(
                "snapshot (traj {}, t = {}) differs in chart or shape",
                bad.traj,
                bad.time
            )));
        }
        snapshots.sort_by(|a, b| a.traj.cmp(&b.traj).then(a.time.total_cmp(&b.time)));
        let mut ranges: Vec<(usize, Range<usize>)> = Vec::new();
        for i in 0..snapshots.len() {
            let traj = snapshots[i].traj;
            match ranges.last_mut() {
                Some((t, r)) if *t == traj => {
                    if snapshots[i].time <= snapshots[i - 1].time {
                        return Err(invalid(alloc::format!(
                            "trajectory {traj}: times must strictly increase (repeated t = {})",
                            snapshots[i].time
                        )));
                    }
                    r.end = i + 1;
                }
                _ => ranges.push((traj, i..i + 1)),
            }
        }
        for (_, r) in &ranges {
            for (k, i) in r.clone().enumerate() {
                snapshots[i].step = k;
            }
        }
        Ok(Self { snapshots, ranges })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Snapshot> {
        self.snapshots.iter()
    }

    pub fn n_trajectories(&self) -> usize {
        self.ranges.len()
    }

    pub fn trajectory_ids(&self) -> Vec<usize> {
        self.ranges.iter().map(|(t, _)| *t).collect()
    }

    /// Snapshots of the `index`-th trajectory (in id order).
    pub fn trajectory(&self, index: usize) -> &[Snapshot] {
        &self.snapshots[self.ranges[index].1.clone()]
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &[Snapshot]> {
        self.ranges.iter().map(|(_, r)| &self.snapshots[r.clone()])
    }

    /// Snapshots of trajectory id `traj`, if present.
    pub fn trajectory_by_id(&self, traj: usize) -> Option<&[Snapshot]> {
        self.ranges.iter().find(|(t, _)| *t == traj).map(|(_, r)| &self.snapshots[r.clone()])
    }

    pub fn first_state(&self) -> &StatePoint {
        &self.snapshots[0].state
    }

    pub fn time_range(&self) -> (f64, f64) {
        self.snapshots
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.time), hi.max(s.time)))
    }

    /// Number of consecutive pairs over all trajectories.
    pub fn n_transitions(&self) -> usize {
        self.ranges.iter().map(|(_, r)| r.len().saturating_sub(1)).sum()
    }

    /// True when every trajectory has the same time stamps.
    pub fn shared_time_grid(&self) -> bool {
        let first = self.trajectory(0);
        self.trajectories()
            .all(|t| t.len() == first.len() && t.iter().zip(first).all(|(a, b)| a.time == b.time))
    }

    /// The same snapshots restricted to the given particles (point clouds only).
    pub fn restrict_particles(&self, particles: &[usize]) -> Result<Self> {
        let n = self
            .first_state()
            .particles()
            .ok_or_else(|| invalid("restrict_particles needs point-cloud snapshots"))?;
        if particles.is_empty() || particles.iter().any(|p| *p >= n) {
            return Err(invalid("restrict_particles: empty or out-of-range particle list"));
        }
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| {
                let coords = particles.iter().flat_map(|p| s.state.point(*p)).collect();
                Ok(Snapshot {
                    state: StatePoint::point_cloud(coords)?,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            snapshots,
            ranges: self.ranges.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySample {
    pub traj: usize,
    pub step: usize,
    pub time: f64,
    /// Difference interval `t_{k+s} − t_k`.
    pub dt: f64,
    pub state: StatePoint,
    pub velocity: Vec<f64>,
    pub param: Vec<f64>,
}

/// Forward-difference velocities `(x_{k+s} − x_k)/(t_{k+s} − t_k)` at every
/// step `k` with `k + s` inside the trajectory, `s = stride`. Trajectories
/// with fewer than two snapshots are skipped and their ids returned.
pub fn finite_difference_velocities(set: &SnapshotSet, stride: usize) -> Result<(Vec<VelocitySample>, Vec<usize>)> {
    if stride == 0 {
        return Err(invalid("finite_difference_velocities: stride must be positive"));
    }
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for traj in set.trajectories() {
        if traj.len() < 2 {
            skipped.push(traj[0].traj);
            continue;
        }
        let s = stride.min(traj.len() - 1);
        for k in 0..traj.len() - s {
            let (a, b) = (&traj[k], &traj[k + s]);
            let dt = b.time - a.time;
            samples.push(VelocitySample {
                traj: a.traj,
                step: a.step,
                time: a.time,
                dt,
                state: a.state.clone(),
                velocity: a.state.coords().iter().zip(b.state.coords()).map(|(x, y)| (y - x) / dt).collect(),
                param: a.param.clone(),
            });
        }
    }
    Ok((samples, skipped))
}
