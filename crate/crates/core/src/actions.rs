//! Group actions on state manifolds and their infinitesimal generators.
//!
//! Four kinds are supported:
//!
//! - `AffineCloud`: a subgroup of `Aff(3)` acting on every particle, `p ↦ A p + b`.
//! - `ClusteredAffine`: a product of affine groups, block diagonal, where
//!   cluster `c` moves the particles assigned to it by block `c`.
//! - `GridTranslation`: `(ℝ, +)` shifting a periodic sampled function,
//!   `Φ(s, u)(x) = u(x + s)`, evaluated by trigonometric interpolation.
//! - `So2Polar`: `(ℝ, +)` rotating a point given in polar coordinates,
//!   `Φ(α, (q₁, q₂)) = (q₁, q₂ + α)`.
//!
//! The two one-dimensional kinds use the unipotent matrix `[[1, s], [0, 1]]`
//! for the group element, so the angle of `So2Polar` lives on the universal
//! cover and the homomorphism property holds without wrapping.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::fft;
use crate::lie::{AlgebraBasis, AlgebraElement, GroupElement};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart {
    /// `3·particles` coordinates `(x, y, z)` per particle.
    PointCloud { particles: usize },
    /// `(q₁, q₂)` with `q₁ > 0`.
    Polar,
    /// Uniform periodic grid on `[0, period)`.
    Grid { period: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChartTag {
    PointCloud3d,
    Polar2d,
    Grid1d,
}

impl Chart {
    pub fn tag(&self) -> ChartTag {
        match self {
            Chart::PointCloud { .. } => ChartTag::PointCloud3d,
            Chart::Polar => ChartTag::Polar2d,
            Chart::Grid { .. } => ChartTag::Grid1d,
        }
    }
}

/// A point of the state manifold in its global chart.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint {
    coords: Vec<f64>,
    chart: Chart,
}

impl StatePoint {
    pub fn point_cloud(coords: Vec<f64>) -> Result<Self> {
        if coords.len() % 3 != 0 {
            return Err(invalid(alloc::format!("point cloud needs 3·N coordinates, got {}", coords.len())));
        }
        let particles = coords.len() / 3;
        Ok(Self {
            coords,
            chart: Chart::PointCloud { particles },
        })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Self {
        Self {
            coords: points.iter().flatten().copied().collect(),
            chart: Chart::PointCloud { particles: points.len() },
        }
    }

    pub fn polar(q1: f64, q2: f64) -> Result<Self> {
        if !(q1 > 0.0) {
            return Err(invalid(alloc::format!("polar state needs q1 > 0, got {q1}")));
        }
        Ok(Self {
            coords: alloc::vec![q1, q2],
            chart: Chart::Polar,
        })
    }

    pub fn grid(values: Vec<f64>, period: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("grid state needs at least one sample"));
        }
        if !(period > 0.0) {
            return Err(invalid("grid period must be positive"));
        }
        Ok(Self {
            coords: values,
            chart: Chart::Grid { period },
        })
    }

    /// Same chart as `self`, new coordinates of identical length.
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(invalid("coordinate length does not match the chart"));
        }
        Ok(Self { coords, chart: self.chart })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn chart_tag(&self) -> ChartTag {
        self.chart.tag()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn particles(&self) -> Option<usize> {
        match self.chart {
            Chart::PointCloud { particles } => Some(particles),
            _ => None,
        }
    }

    /// Particle `i` of a point cloud.
    pub fn point(&self, i: usize) -> [f64; 3] {
        [self.coords[3 * i], self.coords[3 * i + 1], self.coords[3 * i + 2]]
    }

    /// True when both states share chart kind and shape.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.coords.len() == other.coords.len()
            && match (self.chart, other.chart) {
                (Chart::Grid { period: a }, Chart::Grid { period: b }) => a == b,
                (a, b) => a.tag() == b.tag(),
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    AffineCloud,
    ClusteredAffine,
    GridTranslation,
    So2Polar,
}

impl ActionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActionKind::AffineCloud => "affine_cloud",
            ActionKind::ClusteredAffine => "clustered_affine",
            ActionKind::GridTranslation => "grid_translation",
            ActionKind::So2Polar => "so2_polar",
        }
    }
}

/// A concrete action `Φ: G × ℳ → ℳ` together with a basis of the acting algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    kind: ActionKind,
    basis: AlgebraBasis,
    // Particle → cluster; clustered kind only.
    assignment: Vec<usize>,
    n_clusters: usize,
}

fn check_affine_basis(basis: &AlgebraBasis, block: usize, n_blocks: usize) -> Result<()> {
    if basis.ambient_dim() != 4 * n_blocks {
        return Err(invalid("affine actions need 4×4 (per cluster) algebra elements"));
    }
    for e in basis.elements() {
        let m = e.matrix();
        for b in 0..n_blocks {
            if b != block && block != usize::MAX {
                continue;
            }
            for j in 0..4 * n_blocks {
                if m[(4 * b + 3, j)] != 0.0 {
                    return Err(invalid("aff(3) elements need an exactly zero bottom row"));
                }
            }
        }
    }
    Ok(())
}

impl ActionSpec {
    /// Affine action of the subgroup of `Aff(3)` spanned by `basis`.
    pub fn affine_cloud(basis: AlgebraBasis) -> Result<Self> {
        check_affine_basis(&basis, usize::MAX, 1)?;
        Ok(Self {
            kind: ActionKind::AffineCloud,
            basis,
            assignment: Vec::new(),
            n_clusters: 1,
        })
    }

    /// Full `Aff(3)` acting on a cloud.
    pub fn aff3_cloud() -> Self {
        Self::affine_cloud(AlgebraBasis::aff3()).expect("aff(3) basis is affine")
    }

    /// The trivial group acting on a cloud.
    pub fn trivial_cloud() -> Self {
        Self::affine_cloud(AlgebraBasis::empty(4)).expect("empty basis is affine")
    }

    /// Product of affine groups, one per cluster. `factors[c]` is a basis of
    /// a subalgebra of `aff(3)` (4×4) and `assignment[i]` the cluster of particle `i`.
    pub fn clustered_affine(factors: &[AlgebraBasis], assignment: Vec<usize>) -> Result<Self> {
        let n = factors.len();
        if n == 0 {
            return Err(invalid("clustered action needs at least one cluster"));
        }
        for f in factors {
            check_affine_basis(f, usize::MAX, 1)?;
        }
        let embedded: Vec<_> = factors.iter().enumerate().map(|(c, f)| f.block_embed(c, n)).collect();
        let basis = AlgebraBasis::concat(&embedded)?;
        Self::clustered_with_basis(basis, assignment, n)
    }

    fn clustered_with_basis(basis: AlgebraBasis, assignment: Vec<usize>, n_clusters: usize) -> Result<Self> {
        let used: BTreeSet<usize> = assignment.iter().copied().collect();
        if assignment.iter().any(|c| *c >= n_clusters) {
            return Err(invalid("cluster index out of range"));
        }
        if used.len() != n_clusters {
            return Err(invalid("cluster assignment must use every cluster"));
        }
        if basis.ambient_dim() != 4 * n_clusters {
            return Err(invalid("clustered basis must be 4·n_clusters square"));
        }
        check_affine_basis(&basis, usize::MAX, n_clusters)?;
        Ok(Self {
            kind: ActionKind::ClusteredAffine,
            basis,
            assignment,
            n_clusters,
        })
    }

    pub fn grid_translation() -> Self {
        Self {
            kind: ActionKind::GridTranslation,
            basis: AlgebraBasis::line(),
            assignment: Vec::new(),
            n_clusters: 1,
        }
    }

    pub fn so2_polar() -> Self {
        Self {
            kind: ActionKind::So2Polar,
            basis: AlgebraBasis::line(),
            assignment: Vec::new(),
            n_clusters: 1,
        }
    }

    /// Same action restricted to (or re-expressed in) another basis of a
    /// subspace of the same ambient algebra.
    pub fn with_basis(&self, basis: AlgebraBasis) -> Result<Self> {
        if basis.ambient_dim() != self.basis.ambient_dim() {
            return Err(invalid("with_basis: ambient dimension mismatch"));
        }
        match self.kind {
            ActionKind::AffineCloud | ActionKind::ClusteredAffine => check_affine_basis(&basis, usize::MAX, self.n_clusters)?,
            _ => {}
        }
        Ok(Self { basis, ..self.clone() })
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn basis(&self) -> &AlgebraBasis {
        &self.basis
    }

    pub fn group_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ambient_dim()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Size of one diagonal block of the group matrices.
    pub fn block_size(&self) -> usize {
        self.ambient_dim() / self.n_clusters
    }

    /// For block-diagonal kinds: the basis indices living in each block, or
    /// `None` if some basis element couples blocks.
    pub fn factor_split(&self) -> Option<Vec<Vec<usize>>> {
        let k = self.block_size();
        let mut groups = alloc::vec![Vec::new(); self.n_clusters];
        for (idx, e) in self.basis.elements().iter().enumerate() {
            let m = e.matrix();
            let mut owner = None;
            for b in 0..self.n_clusters {
                let nonzero = m
                    .view((b * k, 0), (k, m.ncols()))
                    .iter()
                    .chain(m.view((0, b * k), (m.nrows(), k)).iter())
                    .any(|v| *v != 0.0);
                if nonzero {
                    if owner.is_some() {
                        return None;
                    }
                    owner = Some(b);
                }
            }
            groups[owner.unwrap_or(0)].push(idx);
        }
        Some(groups)
    }

    /// Basis of block `block` (as `block_size` square matrices), restricted
    /// to the given basis indices.
    pub fn factor_basis(&self, block: usize, indices: &[usize]) -> Result<AlgebraBasis> {
        let k = self.block_size();
        if indices.is_empty() {
            return Ok(AlgebraBasis::empty(k));
        }
        let elements: Vec<_> = indices
            .iter()
            .map(|i| AlgebraElement::new(self.basis.element(*i).matrix().view((block * k, block * k), (k, k)).into_owned()))
            .collect::<Result<_>>()?;
        let labels = indices
            .iter()
            .map(|i| self.basis.label(*i).map(alloc::string::ToString::to_string))
            .collect();
        AlgebraBasis::new(elements, labels)
    }

    fn check_state(&self, x: &StatePoint) -> Result<()> {
        let ok = match (self.kind, x.chart()) {
            (ActionKind::AffineCloud, Chart::PointCloud { .. }) => true,
            (ActionKind::ClusteredAffine, Chart::PointCloud { particles }) => particles == self.assignment.len(),
            (ActionKind::GridTranslation, Chart::Grid { .. }) => true,
            (ActionKind::So2Polar, Chart::Polar) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(alloc::format!(
                "{} action is incompatible with a {:?} state of dimension {}",
                self.kind.name(),
                x.chart_tag(),
                x.dim()
            )))
        }
    }

    fn check_matrix(&self, m: &DMatrix<f64>, what: &str) -> Result<()> {
        if m.nrows() != self.ambient_dim() || m.ncols() != self.ambient_dim() {
            return Err(invalid(alloc::format!(
                "{what}: expected {}×{} matrix for {} action, got {}×{}",
                self.ambient_dim(),
                self.ambient_dim(),
                self.kind.name(),
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }
}

// `m` acts on homogeneous particle coordinates; `offset` selects the block.
// `translate` is 1 for group/algebra elements and 0 for purely linear use.
fn affine_apply_particle(m: &DMatrix<f64>, offset: usize, p: [f64; 3], out: &mut [f64]) {
    for r in 0..3 {
        let mut v = m[(offset + r, offset + 3)];
        for c in 0..3 {
            v += m[(offset + r, offset + c)] * p[c];
        }
        out[r] = v;
    }
}

fn cloud_map(spec: &ActionSpec, m: &DMatrix<f64>, x: &StatePoint) -> Vec<f64> {
    let n = x.particles().unwrap_or(0);
    let mut out = alloc::vec![0.0; 3 * n];
    for i in 0..n {
        let offset = match spec.kind {
            ActionKind::ClusteredAffine => 4 * spec.assignment[i],
            _ => 0,
        };
        affine_apply_particle(m, offset, x.point(i), &mut out[3 * i..3 * i + 3]);
    }
    out
}

/// `Φ(g, x)`.
pub fn apply_action(spec: &ActionSpec, g: &GroupElement, x: &StatePoint) -> Result<StatePoint> {
    spec.check_state(x)?;
    let m = g.matrix();
    spec.check_matrix(m, "apply_action")?;
    let coords = match spec.kind {
        ActionKind::AffineCloud | ActionKind::ClusteredAffine => cloud_map(spec, m, x),
        ActionKind::GridTranslation => {
            let Chart::Grid { period } = x.chart() else { unreachable!() };
            fft::spectral_shift(x.coords(), period, m[(0, 1)])
        }
        ActionKind::So2Polar => alloc::vec![x.coords()[0], x.coords()[1] + m[(0, 1)]],
    };
    x.with_coords(coords)
}

/// `X_a(x) = d/dt Φ(exp(a t), x)` at `t = 0`, in closed form.
pub fn infinitesimal_generator(spec: &ActionSpec, a: &AlgebraElement, x: &StatePoint) -> Result<Vec<f64>> {
    spec.check_state(x)?;
    let m = a.matrix();
    spec.check_matrix(m, "infinitesimal_generator")?;
    Ok(match spec.kind {
        ActionKind::AffineCloud | ActionKind::ClusteredAffine => cloud_map(spec, m, x),
        ActionKind::GridTranslation => {
            let Chart::Grid { period } = x.chart() else { unreachable!() };
            let rate = m[(0, 1)];
            if rate == 0.0 {
                alloc::vec![0.0; x.dim()]
            } else {
                fft::spectral_derivative(x.coords(), period).into_iter().map(|d| rate * d).collect()
            }
        }
        ActionKind::So2Polar => alloc::vec![0.0, m[(0, 1)]],
    })
}

/// Generator for algebra coordinates `coeffs` in the spec's basis.
pub fn generator_from_coeffs(spec: &ActionSpec, coeffs: &[f64], x: &StatePoint) -> Result<Vec<f64>> {
    let a = spec.basis().combine(coeffs)?;
    infinitesimal_generator(spec, &a, x)
}

/// The linear map `𝔤 → T_xℳ` as a dense `dim(ℳ) × dim(𝔤)` matrix; its
/// column span is the induced distribution at `x`.
pub fn generator_matrix_at(spec: &ActionSpec, x: &StatePoint) -> Result<DMatrix<f64>> {
    spec.check_state(x)?;
    let mut out = DMatrix::zeros(x.dim(), spec.group_dim());
    match spec.kind {
        ActionKind::GridTranslation => {
            let Chart::Grid { period } = x.chart() else { unreachable!() };
            let d = fft::spectral_derivative(x.coords(), period);
            for (k, e) in spec.basis().elements().iter().enumerate() {
                let rate = e.matrix()[(0, 1)];
                for (i, v) in d.iter().enumerate() {
                    out[(i, k)] = rate * v;
                }
            }
        }
        _ => {
            for (k, e) in spec.basis().elements().iter().enumerate() {
                let col = infinitesimal_generator(spec, e, x)?;
                out.column_mut(k).copy_from_slice(&col);
            }
        }
    }
    Ok(out)
}

/// `d/dε Φ(g + ε·dg, x)` at `ε = 0`: the differential of the action in its
/// group argument along an ambient matrix direction `dg`.
pub fn action_differential(spec: &ActionSpec, g: &GroupElement, dg: &DMatrix<f64>, x: &StatePoint) -> Result<Vec<f64>> {
    spec.check_state(x)?;
    spec.check_matrix(dg, "action_differential")?;
    Ok(match spec.kind {
        ActionKind::AffineCloud | ActionKind::ClusteredAffine => cloud_map(spec, dg, x),
        ActionKind::GridTranslation => {
            let Chart::Grid { period } = x.chart() else { unreachable!() };
            let rate = dg[(0, 1)];
            fft::spectral_shifted_derivative(x.coords(), period, g.matrix()[(0, 1)])
                .into_iter()
                .map(|d| rate * d)
                .collect()
        }
        ActionKind::So2Polar => alloc::vec![0.0, dg[(0, 1)]],
    })
}

/// One factor of a commuting product: an affine action and the particles of
/// the combined cloud it moves.
#[derive(Debug, Clone)]
pub struct ProductComponent {
    pub spec: ActionSpec,
    pub particles: Vec<usize>,
}

/// Product of affine actions on disjoint particle blocks of an
/// `n_particles` cloud. Disjointness makes the factors commute.
///
/// Components with a zero-dimensional group and no particles are dropped; a
/// single remaining component covering every particle is returned unchanged.
pub fn product_commuting(components: &[ProductComponent], n_particles: usize) -> Result<ActionSpec> {
    let kept: Vec<&ProductComponent> = components
        .iter()
        .filter(|c| !(c.spec.group_dim() == 0 && c.particles.is_empty()))
        .collect();
    if kept.is_empty() {
        return Err(invalid("product_commuting: no components"));
    }
    let mut owner = alloc::vec![usize::MAX; n_particles];
    for (c, comp) in kept.iter().enumerate() {
        if comp.spec.kind() != ActionKind::AffineCloud {
            return Err(invalid("product_commuting: only affine cloud components are supported"));
        }
        for &p in &comp.particles {
            if p >= n_particles {
                return Err(invalid(alloc::format!("particle {p} out of range")));
            }
            if owner[p] != usize::MAX {
                return Err(invalid(alloc::format!(
                    "particle {p} is claimed by two components; commutativity is not guaranteed"
                )));
            }
            owner[p] = c;
        }
    }
    if let Some(p) = owner.iter().position(|o| *o == usize::MAX) {
        return Err(invalid(alloc::format!("particle {p} is not covered by any component")));
    }
    if kept.len() == 1 {
        return Ok(kept[0].spec.clone());
    }
    let factors: Vec<AlgebraBasis> = kept.iter().map(|c| c.spec.basis().clone()).collect();
    ActionSpec::clustered_affine(&factors, owner)
}
