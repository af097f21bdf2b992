//! Reduced dynamics on the group, reconstruction, and reference full-order
//! integrators.
//!
//! The group path solves `ġ = ρ(t)·g`, `g(t₀) = e`, and the reconstruction is
//! `x̄(t) = Φ(g(t), x₀)`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::actions::{apply_action, infinitesimal_generator, ActionKind, ActionSpec, StatePoint};
use crate::error::{invalid, Error, Result};
use crate::fft::spectral_shift;
use crate::fitting::ReducedVectorField;
use crate::lie::{exp_map, AlgebraElement, GroupElement};
use crate::metric::tangent_norm_sq;

/// A time-dependent algebra element `ρ(t)` on a closed domain.
pub trait TimeField {
    fn ambient_dim(&self) -> usize;
    fn domain(&self) -> (f64, f64);
    fn element(&self, t: f64) -> Result<AlgebraElement>;
}

impl TimeField for ReducedVectorField {
    fn ambient_dim(&self) -> usize {
        self.basis.ambient_dim()
    }
    fn domain(&self) -> (f64, f64) {
        ReducedVectorField::domain(self)
    }
    fn element(&self, t: f64) -> Result<AlgebraElement> {
        self.eval(t)
    }
}

/// `ρ(t) = a` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField(pub AlgebraElement);

impl TimeField for ConstantField {
    fn ambient_dim(&self) -> usize {
        self.0.ambient_dim()
    }
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn element(&self, _t: f64) -> Result<AlgebraElement> {
        Ok(self.0.clone())
    }
}

/// Field given by a closure over an explicit domain.
pub struct FnField {
    ambient_dim: usize,
    domain: (f64, f64),
    f: Box<dyn Fn(f64) -> AlgebraElement + Send + Sync>,
}

impl FnField {
    pub fn new(ambient_dim: usize, domain: (f64, f64), f: impl Fn(f64) -> AlgebraElement + Send + Sync + 'static) -> Self {
        Self {
            ambient_dim,
            domain,
            f: Box::new(f),
        }
    }
}

impl TimeField for FnField {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn element(&self, t: f64) -> Result<AlgebraElement> {
        let (a, b) = self.domain;
        let slack = 1e-9 * (b - a).abs().max(1.0);
        if !(t >= a - slack && t <= b + slack) {
            return Err(invalid(alloc::format!("t = {t} is outside the field domain [{a}, {b}]")));
        }
        Ok((self.f)(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    LieEuler,
    Rkmk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Fom,
    Rom,
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub group_path: Option<Vec<GroupElement>>,
    pub states: Vec<StatePoint>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&StatePoint> {
        self.states.last()
    }
}

/// `(G, Φ, ρ_θ, x₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RomModel {
    pub action: ActionSpec,
    pub rho: ReducedVectorField,
    pub x0: StatePoint,
}

impl RomModel {
    pub fn new(action: ActionSpec, rho: ReducedVectorField, x0: StatePoint) -> Result<Self> {
        if rho.basis.dim() != action.group_dim() || rho.basis.ambient_dim() != action.ambient_dim() {
            return Err(invalid("ROM: field basis does not match the action's algebra"));
        }
        // Validates chart compatibility.
        apply_action(&action, &GroupElement::identity(action.ambient_dim()), &x0)?;
        Ok(Self { action, rho, x0 })
    }

    pub fn group_dim(&self) -> usize {
        self.action.group_dim()
    }

    /// Same model started from another state.
    pub fn with_initial_state(&self, x0: StatePoint) -> Result<Self> {
        Self::new(self.action.clone(), self.rho.clone(), x0)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("time grid must be finite and strictly increasing"));
    }
    Ok(())
}

// Truncated inverse of the derivative of exp: v − ½[u,v] + 1/12 [u,[u,v]].
fn dexpinv(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let uv = u * v - v * u;
    let uuv = u * &uv - &uv * u;
    v - uv * 0.5 + uuv * (1.0 / 12.0)
}

type Xi<'a> = dyn Fn(f64) -> Result<DMatrix<f64>> + 'a;

fn increment(xi: &Xi<'_>, method: Integrator, t: f64, h: f64) -> Result<DMatrix<f64>> {
    Ok(match method {
        Integrator::LieEuler => xi(t)? * h,
        Integrator::Rkmk4 => {
            let k1 = xi(t)? * h;
            let mid = xi(t + 0.5 * h)?;
            let k2 = dexpinv(&(&k1 * 0.5), &mid) * h;
            let k3 = dexpinv(&(&k2 * 0.5), &mid) * h;
            let k4 = dexpinv(&k3, &xi(t + h)?) * h;
            (k1 + (k2 + k3) * 2.0 + k4) * (1.0 / 6.0)
        }
    })
}

fn integrate_matrix(xi: &Xi<'_>, n: usize, t_grid: &[f64], method: Integrator) -> Result<Vec<DMatrix<f64>>> {
    let mut path = Vec::with_capacity(t_grid.len());
    let mut g = DMatrix::identity(n, n);
    path.push(g.clone());
    for w in t_grid.windows(2) {
        let omega = increment(xi, method, w[0], w[1] - w[0])?;
        g = exp_map(&AlgebraElement::new(omega)?)?.matrix() * g;
        path.push(g.clone());
    }
    Ok(path)
}

/// Group path of `ġ = ρ(t)·g`, `g(t_grid[0]) = e`, one step per grid interval.
pub fn integrate_group(field: &dyn TimeField, t_grid: &[f64], method: Integrator) -> Result<Vec<GroupElement>> {
    check_grid(t_grid)?;
    let xi = |t: f64| field.element(t).map(AlgebraElement::into_matrix);
    integrate_matrix(&xi, field.ambient_dim(), t_grid, method)?
        .into_iter()
        .map(GroupElement::new)
        .collect()
}

/// Group path for an action; product groups are advanced factor by factor.
pub fn integrate_action_group(action: &ActionSpec, field: &dyn TimeField, t_grid: &[f64], method: Integrator) -> Result<Vec<GroupElement>> {
    if action.kind() != ActionKind::ClusteredAffine || action.n_clusters() == 1 || action.factor_split().is_none() {
        return integrate_group(field, t_grid, method);
    }
    check_grid(t_grid)?;
    let k = action.block_size();
    let mut factors = Vec::with_capacity(action.n_clusters());
    for c in 0..action.n_clusters() {
        let xi = move |t: f64| field.element(t).map(|e| e.matrix().view((c * k, c * k), (k, k)).into_owned());
        factors.push(integrate_matrix(&xi, k, t_grid, method)?);
    }
    (0..t_grid.len())
        .map(|i| {
            let blocks = factors.iter().map(|f| GroupElement::new(f[i].clone())).collect::<Result<Vec<_>>>()?;
            Ok(GroupElement::block_diag(&blocks))
        })
        .collect()
}

/// States `Φ(g_k, x₀)`.
pub fn reconstruct(action: &ActionSpec, times: &[f64], group_path: &[GroupElement], x0: &StatePoint) -> Result<Trajectory> {
    if times.len() != group_path.len() {
        return Err(invalid("reconstruct: one group element per time required"));
    }
    let states = group_path.iter().map(|g| apply_action(action, g, x0)).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: times.to_vec(),
        group_path: Some(group_path.to_vec()),
        states,
        provenance: Provenance::Reconstruction,
    })
}

/// Integrate the reduced model and reconstruct on `t_grid`.
pub fn integrate_rom(model: &RomModel, t_grid: &[f64], method: Integrator) -> Result<Trajectory> {
    let path = integrate_action_group(&model.action, &model.rho, t_grid, method)?;
    let mut traj = reconstruct(&model.action, t_grid, &path, &model.x0)?;
    // Exact initial state, independent of the action's arithmetic.
    traj.states[0] = model.x0.clone();
    Ok(traj)
}

/// Largest metric norm of `(x̄_{k+1} − x̄_{k−1})/(t_{k+1} − t_{k−1}) − X_{ρ(t_k)}(x̄_k)`
/// over interior points: the reconstruction solves `x̄˙ = X_{ρ}(x̄)` up to the
/// finite-difference error.
pub fn consistency_residual(action: &ActionSpec, field: &dyn TimeField, traj: &Trajectory) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 1..traj.len().saturating_sub(1) {
        let dt = traj.times[k + 1] - traj.times[k - 1];
        let gen = infinitesimal_generator(action, &field.element(traj.times[k])?, &traj.states[k])?;
        let diff: Vec<f64> = traj.states[k + 1]
            .coords()
            .iter()
            .zip(traj.states[k - 1].coords())
            .zip(&gen)
            .map(|((a, b), g)| (a - b) / dt - g)
            .collect();
        worst = worst.max(tangent_norm_sq(&traj.states[k], &diff).sqrt());
    }
    Ok(worst)
}

fn rk4_step<F>(f: &F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(x, h, &k3))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Classic RK4 on the chart for `x̄˙ = X_{ρ(t)}(x̄)`, with `substeps` steps
/// per grid interval.
pub fn integrate_chart_rk4(action: &ActionSpec, field: &dyn TimeField, x0: &StatePoint, t_grid: &[f64], substeps: usize) -> Result<Trajectory> {
    check_grid(t_grid)?;
    let substeps = substeps.max(1);
    let f = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let state = x0.with_coords(x.to_vec())?;
        infinitesimal_generator(action, &field.element(t)?, &state)
    };
    let mut states = alloc::vec![x0.clone()];
    let mut x = x0.coords().to_vec();
    for w in t_grid.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for s in 0..substeps {
            x = rk4_step(&f, w[0] + s as f64 * h, &x, h)?;
        }
        states.push(x0.with_coords(x.clone())?);
    }
    Ok(Trajectory {
        times: t_grid.to_vec(),
        group_path: None,
        states,
        provenance: Provenance::Rom,
    })
}

/// Analytic full-order vector fields with reference integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FomField {
    /// `q̇₁ = (q₁/a) sin(b q₂)`, `q̇₂ = μ`.
    RadialOscillator { a: f64, b: f64, mu: f64 },
    /// `u_t + μ₁ u_x = 0` on a periodic grid.
    LinearTransport { mu1: f64 },
}

pub const RADIAL_A: f64 = 100.0;
pub const RADIAL_B: f64 = 40.0;

impl FomField {
    pub fn radial(mu: f64) -> Self {
        FomField::RadialOscillator {
            a: RADIAL_A,
            b: RADIAL_B,
            mu,
        }
    }

    /// `X_μ(x)`.
    pub fn vector(&self, x: &StatePoint) -> Result<Vec<f64>> {
        match (*self, x.chart()) {
            (FomField::RadialOscillator { a, b, mu }, crate::actions::Chart::Polar) => {
                let (q1, q2) = (x.coords()[0], x.coords()[1]);
                Ok(alloc::vec![q1 / a * (b * q2).sin(), mu])
            }
            (FomField::LinearTransport { mu1 }, crate::actions::Chart::Grid { period }) => Ok(crate::fft::spectral_derivative(x.coords(), period)
                .into_iter()
                .map(|d| -mu1 * d)
                .collect()),
            _ => Err(invalid("vector field does not match the state's chart")),
        }
    }
}

fn radial_rhs(a: f64, b: f64, mu: f64) -> impl Fn(f64, &[f64]) -> Result<Vec<f64>> {
    move |_t, x| Ok(alloc::vec![x[0] / a * (b * x[1]).sin(), mu])
}

fn rk4_fixed<F>(f: &F, t0: f64, x: &[f64], h_total: f64, n: usize) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let h = h_total / n as f64;
    let mut y = x.to_vec();
    for i in 0..n {
        y = rk4_step(f, t0 + i as f64 * h, &y, h)?;
    }
    Ok(y)
}

/// Reference solution of `ẋ = X_μ(x)` on `t_grid`. The radial oscillator is
/// integrated with RK4, halving the step on every grid interval until two
/// successive results agree to `rel_tol`; linear transport is sampled from
/// its closed form `u₀(x − μ₁ t)`.
pub fn integrate_reference_fom(field: FomField, x0: &StatePoint, t_grid: &[f64], rel_tol: f64) -> Result<Trajectory> {
    check_grid(t_grid)?;
    let t0 = t_grid[0];
    let states = match field {
        FomField::RadialOscillator { a, b, mu } => {
            if x0.chart() != crate::actions::Chart::Polar {
                return Err(invalid("radial oscillator needs a polar state"));
            }
            let f = radial_rhs(a, b, mu);
            let mut states = alloc::vec![x0.clone()];
            let mut x = x0.coords().to_vec();
            let mut n = 1usize;
            for w in t_grid.windows(2) {
                let h = w[1] - w[0];
                let mut coarse = rk4_fixed(&f, w[0], &x, h, n)?;
                loop {
                    let fine = rk4_fixed(&f, w[0], &x, h, 2 * n)?;
                    let scale = 1.0 + fine.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    let err = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    n *= 2;
                    coarse = fine;
                    if err <= rel_tol * scale || n > 1 << 20 {
                        break;
                    }
                }
                // Let the next interval try a coarser step again.
                n = (n / 4).max(1);
                x = coarse;
                if !(x[0] > 0.0) {
                    return Err(Error::ChartBreakdown { time: w[1], q1: x[0] });
                }
                states.push(x0.with_coords(x.clone())?);
            }
            states
        }
        FomField::LinearTransport { mu1 } => {
            let crate::actions::Chart::Grid { period } = x0.chart() else {
                return Err(invalid("linear transport needs a grid state"));
            };
            t_grid
                .iter()
                .map(|t| x0.with_coords(spectral_shift(x0.coords(), period, -mu1 * (t - t0))))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(Trajectory {
        times: t_grid.to_vec(),
        group_path: None,
        states,
        provenance: Provenance::Fom,
    })
}

/// Exact radial-oscillator solution, used as an oracle:
/// `q₂ = q₂₀ + μt`, `q₁ = q₁₀·exp((cos(b q₂₀) − cos(b q₂))/(a b μ))`.
pub fn radial_exact(a: f64, b: f64, mu: f64, q10: f64, q20: f64, t: f64) -> (f64, f64) {
    let q2 = q20 + mu * t;
    let growth = if mu == 0.0 {
        (b * q20).sin() * t / a
    } else {
        ((b * q20).cos() - (b * q2).cos()) / (a * b * mu)
    };
    (q10 * growth.exp(), q2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{log_map, AlgebraBasis};
    use crate::metric::{cloud_distance, DistanceMode};

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn random_cloud(seed: u64, n: usize) -> StatePoint {
        let mut s = seed;
        StatePoint::point_cloud((0..3 * n).map(|_| lcg(&mut s)).collect()).unwrap()
    }

    fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 }).collect()
    }

    fn twisting(t: f64) -> AlgebraElement {
        AlgebraElement::twist([1.0 + t.sin(), 0.8 * (2.0 * t).cos(), 0.5 * t], [0.3, -t, 0.2 * t * t])
    }

    #[test]
    fn constant_field_flow() {
        let a = AlgebraElement::twist([0.3, -0.1, 0.7], [0.2, 0.0, -0.4]);
        let t = grid(0.0, 2.0, 40);
        for method in [Integrator::LieEuler, Integrator::Rkmk4] {
            let path = integrate_group(&ConstantField(a.clone()), &t, method).unwrap();
            let exact = exp_map(&a.scaled(2.0)).unwrap();
            assert!((path.last().unwrap().matrix() - exact.matrix()).norm() < 1e-12);
        }
    }

    fn endpoint(h: f64, method: Integrator) -> DMatrix<f64> {
        let t = grid(0.0, 2.0, (2.0 / h).round() as usize);
        let field = FnField::new(4, (0.0, 2.0), twisting);
        integrate_group(&field, &t, method).unwrap().last().unwrap().matrix().clone()
    }

    #[test]
    fn observed_orders() {
        let reference = endpoint(1e-4, Integrator::Rkmk4);
        let hs = [1e-2, 5e-3, 2.5e-3];
        let rk: Vec<f64> = hs.iter().map(|h| (endpoint(*h, Integrator::Rkmk4) - &reference).norm()).collect();
        let eu: Vec<f64> = hs.iter().map(|h| (endpoint(*h, Integrator::LieEuler) - &reference).norm()).collect();
        let order = |e: &[f64]| (e[0] / e[2]).log2() / 2.0;
        assert!(order(&rk) >= 3.7, "rkmk4 order {} from {rk:?}", order(&rk));
        assert!((order(&eu) - 1.0).abs() < 0.2, "euler order {}", order(&eu));
    }

    #[test]
    fn rkmk4_stays_on_se3() {
        let t = grid(0.0, 5.0, 1000);
        let field = FnField::new(4, (0.0, 5.0), twisting);
        let path = integrate_group(&field, &t, Integrator::Rkmk4).unwrap();
        assert!(path.iter().all(|g| g.is_se3(1e-8)));
    }

    #[test]
    fn radial_rom_is_exact_and_fom_is_converged() {
        let (a, b, mu) = (RADIAL_A, RADIAL_B, 1.0);
        let x0 = StatePoint::polar(1.0, 0.3).unwrap();
        let t = grid(0.0, 10.0, 200);
        let rho = ReducedVectorField::constant(AlgebraBasis::line(), &[mu], 0.0, 10.0).unwrap();
        let model = RomModel::new(ActionSpec::so2_polar(), rho, x0.clone()).unwrap();
        let rom = integrate_rom(&model, &t, Integrator::LieEuler).unwrap();
        for (ti, s) in t.iter().zip(&rom.states) {
            assert_eq!(s.coords()[0], 1.0);
            assert!((s.coords()[1] - (0.3 + mu * ti)).abs() < 1e-12);
        }

        let fom = integrate_reference_fom(FomField::radial(mu), &x0, &t, 1e-10).unwrap();
        for (ti, s) in t.iter().zip(&fom.states) {
            let (q1, q2) = radial_exact(a, b, mu, 1.0, 0.3, *ti);
            assert!((s.coords()[0] - q1).abs() < 1e-8 && (s.coords()[1] - q2).abs() < 1e-9);
        }
        let fine = integrate_reference_fom(FomField::radial(mu), &x0, &grid(0.0, 10.0, 400), 1e-10).unwrap();
        let (e1, e2) = (fom.final_state().unwrap().coords(), fine.final_state().unwrap().coords());
        assert!((e1[0] - e2[0]).abs() < 1e-9 && (e1[1] - e2[1]).abs() < 1e-9);
    }

    #[test]
    fn radial_equilibrium() {
        let q20 = core::f64::consts::PI / RADIAL_B;
        let x0 = StatePoint::polar(2.0, q20).unwrap();
        let fom = integrate_reference_fom(FomField::radial(0.0), &x0, &grid(0.0, 1.0, 10), 1e-10).unwrap();
        for s in &fom.states {
            assert!((s.coords()[0] - 2.0).abs() < 1e-12 && s.coords()[1] == q20);
        }
    }

    #[test]
    fn transport_rom_matches_closed_form() {
        let n = 128;
        let period = 2.0 * core::f64::consts::PI;
        let xs: Vec<f64> = (0..n).map(|i| period * i as f64 / n as f64).collect();
        let u0 = StatePoint::grid(xs.iter().map(|x| (2.0 * x).sin()).collect(), period).unwrap();
        let mu1 = 0.7;
        let t = grid(0.0, 3.0, 30);
        let rho = ReducedVectorField::constant(AlgebraBasis::line(), &[-mu1], 0.0, 3.0).unwrap();
        let model = RomModel::new(ActionSpec::grid_translation(), rho, u0.clone()).unwrap();
        let rom = integrate_rom(&model, &t, Integrator::Rkmk4).unwrap();
        let fom = integrate_reference_fom(FomField::LinearTransport { mu1 }, &u0, &t, 1e-10).unwrap();
        for ((ti, r), f) in t.iter().zip(&rom.states).zip(&fom.states) {
            for (i, x) in xs.iter().enumerate() {
                let exact = (2.0 * (x - mu1 * ti)).sin();
                assert!((r.coords()[i] - exact).abs() < 1e-10 && (f.coords()[i] - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reconstruction_properties() {
        let spec = ActionSpec::aff3_cloud();
        let x0 = random_cloud(2, 6);
        let t = grid(0.0, 5.0, 1000);
        let field = FnField::new(4, (0.0, 5.0), twisting);
        let path = integrate_group(&field, &t, Integrator::Rkmk4).unwrap();
        let traj = reconstruct(&spec, &t, &path, &x0).unwrap();
        let pd = |s: &StatePoint, i: usize, j: usize| {
            let (p, q) = (s.point(i), s.point(j));
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        for s in traj.states.iter().step_by(50) {
            for i in 0..6 {
                for j in 0..i {
                    assert!((pd(s, i, j) - pd(&x0, i, j)).abs() < 1e-9);
                }
            }
        }
        assert!(consistency_residual(&spec, &field, &traj).unwrap() < 1e-3);

        let identity = alloc::vec![GroupElement::identity(4); 3];
        let still = reconstruct(&spec, &[0.0, 1.0, 2.0], &identity, &x0).unwrap();
        assert!(still.states.iter().all(|s| *s == x0));
    }

    #[test]
    fn chart_rk4_agrees_with_group_reconstruction() {
        let spec = ActionSpec::aff3_cloud();
        let x0 = random_cloud(9, 10);
        let t = grid(0.0, 5.0, 1000);
        let field = FnField::new(4, (0.0, 5.0), twisting);
        let basis = AlgebraBasis::aff3();
        let coeffs: Vec<f64> = basis.coordinates(&twisting(0.0)).unwrap();
        let rho = ReducedVectorField::constant(basis, &coeffs, 0.0, 5.0).unwrap();
        let model = RomModel::new(spec.clone(), rho, x0.clone()).unwrap();
        let _ = model.group_dim();
        let rom = reconstruct(&spec, &t, &integrate_group(&field, &t, Integrator::Rkmk4).unwrap(), &x0).unwrap();
        let chart = integrate_chart_rk4(&spec, &field, &x0, &t, 1).unwrap();
        let d = cloud_distance(rom.final_state().unwrap(), chart.final_state().unwrap(), DistanceMode::Mean).unwrap();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn product_integration_matches_factors() {
        let a0 = AlgebraElement::twist([0.3, 0.1, 0.0], [0.1, 0.0, 0.0]);
        let a1 = AlgebraElement::affine([[0.1, 0.2, 0.0], [0.0, -0.1, 0.0], [0.0, 0.3, 0.0]], [0.0, 0.2, 0.1]);
        let spec = ActionSpec::clustered_affine(&[AlgebraBasis::aff3(), AlgebraBasis::aff3()], alloc::vec![0, 1, 0, 1, 1]).unwrap();
        let joint = {
            let mut m = DMatrix::zeros(8, 8);
            m.view_mut((0, 0), (4, 4)).copy_from(a0.matrix());
            m.view_mut((4, 4), (4, 4)).copy_from(a1.matrix());
            m
        };
        let field_joint = FnField::new(8, (0.0, 1.0), move |t| AlgebraElement::new(&joint * (1.0 + t)).unwrap());
        let t = grid(0.0, 1.0, 50);
        let joint_path = integrate_action_group(&spec, &field_joint, &t, Integrator::Rkmk4).unwrap();
        let (b0, b1) = (a0.clone(), a1.clone());
        let p0 = integrate_group(&FnField::new(4, (0.0, 1.0), move |t| b0.scaled(1.0 + t)), &t, Integrator::Rkmk4).unwrap();
        let p1 = integrate_group(&FnField::new(4, (0.0, 1.0), move |t| b1.scaled(1.0 + t)), &t, Integrator::Rkmk4).unwrap();
        let x0 = random_cloud(4, 5);
        for k in 0..t.len() {
            let per_factor = GroupElement::block_diag(&[p0[k].clone(), p1[k].clone()]);
            assert_eq!(per_factor, joint_path[k]);
            assert_eq!(
                apply_action(&spec, &per_factor, &x0).unwrap(),
                apply_action(&spec, &joint_path[k], &x0).unwrap()
            );
        }
        let _ = log_map(&p0[1]).unwrap();
    }

    #[test]
    fn initial_state_is_exact_and_domain_is_checked() {
        let x0 = random_cloud(1, 4);
        let rho = ReducedVectorField::constant(AlgebraBasis::aff3(), &[0.1; 12], 0.0, 1.0).unwrap();
        let model = RomModel::new(ActionSpec::aff3_cloud(), rho, x0.clone()).unwrap();
        let traj = integrate_rom(&model, &grid(0.0, 1.0, 10), Integrator::Rkmk4).unwrap();
        assert_eq!(traj.states[0].coords(), x0.coords());
        assert!(integrate_rom(&model, &grid(0.0, 2.0, 10), Integrator::Rkmk4).is_err());
    }
}
