//! Acceptance suite. Every test prints one `PASS`/`FAIL` line with the
//! measured values, then asserts. Run with
//! `cargo test -p morlie-cli --test acceptance -- --nocapture --test-threads 1`.

use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use morlie_cli::pipeline::{run_pipeline, SUBALGEBRA_FILE};
use morlie_cli::{io, RunConfig, Summary};
use morlie_core::actions::{apply_action, infinitesimal_generator};
use morlie_core::baselines::{pod_svd, PodOptions};
use morlie_core::clustering::{assignment_accuracy, cluster_search, ClusterConfig};
use morlie_core::datagen::{gen_rigid_cloud, gen_sheering_clouds, BenchmarkConfig, RigidTruth};
use morlie_core::fitting::{fit_velocity_free, ReducedVectorField};
use morlie_core::lie::{bracket, exp_map, log_map, subspace_angle};
use morlie_core::lm::LmConfig;
use morlie_core::metric::{cloud_distance, state_distance, DistanceMode};
use morlie_core::rom::{integrate_chart_rk4, integrate_group, integrate_reference_fom, integrate_rom, FnField, FomField, Integrator, RomModel};
use morlie_core::subalgebra::{bracket_closure, subalgebra_search, DEFAULT_MAX_ROUNDS};
use morlie_core::{lie::DEFAULT_CLOSURE_TOL, ActionSpec, AlgebraBasis, AlgebraElement, GroupElement, SnapshotSet, StatePoint};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn run_in(dir: &Path, settings: &[(&str, &str)]) -> (Summary, f64) {
    let mut cfg = RunConfig::default();
    for (k, v) in settings {
        cfg.set(k, v).unwrap();
    }
    cfg.out = dir.to_path_buf();
    let start = Instant::now();
    let (_, summary) = run_pipeline(&cfg).unwrap();
    (summary, start.elapsed().as_secs_f64())
}

struct RigidRun {
    summary: Summary,
    seconds: f64,
    se3_angle: f64,
}

/// Full pipeline on the rigid defaults with both fit modes, shared by the
/// criteria that look at it.
fn rigid_run() -> &'static RigidRun {
    static RUN: OnceLock<RigidRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let (summary, seconds) = run_in(dir.path(), &[("family", "rigid"), ("fit_mode", "both")]);
        let found = io::read_basis(&dir.path().join(SUBALGEBRA_FILE)).unwrap();
        let se3_angle = if found.dim() == 6 {
            subspace_angle(&found, &AlgebraBasis::se3()).unwrap()
        } else {
            f64::INFINITY
        };
        RigidRun { summary, seconds, se3_angle }
    })
}

#[test]
fn c1_rigid_subalgebra_is_se3() {
    let run = rigid_run();
    let sub = run.summary.subalgebra.as_ref().unwrap();
    let block = &sub.blocks[0];
    let pass = sub.dim == 6 && block.library_match.as_deref() == Some("se(3)") && run.se3_angle < 1e-6 && run.seconds < 60.0;
    let sv: Vec<String> = block.singular_values.iter().map(|s| format!("{s:.3}")).collect();
    let ok = verdict(
        "c1 subalgebra recovery",
        pass,
        &format!(
            "dim {} (k {}), match {:?}, angle to se(3) {:.2e}, pipeline {:.1} s, singular values [{}]",
            sub.dim,
            block.k,
            block.library_match,
            run.se3_angle,
            run.seconds,
            sv.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn c2_sheering_cluster_count() {
    let cfg = BenchmarkConfig::sheering();
    let start = Instant::now();
    let (set, truth) = gen_sheering_clouds(&cfg).unwrap();
    let res = cluster_search(
        &set,
        &ClusterConfig {
            seed: cfg.seed,
            ..ClusterConfig::default()
        },
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let acc = assignment_accuracy(&res.assignment, &truth.assignment).unwrap();
    let ok = verdict(
        "c2 cluster count",
        res.n_clusters == 2 && acc >= 0.95 && secs < 90.0,
        &format!("n_G {}, accuracy {acc:.4}, {secs:.1} s", res.n_clusters),
    );
    assert!(ok);
}

#[test]
fn c3_pod_needs_ten_times_more_modes() {
    let mut all = true;
    let mut detail = Vec::new();
    for seed in [0u64, 1, 2] {
        let cfg = BenchmarkConfig {
            seed,
            ..BenchmarkConfig::rigid()
        };
        let (set, _) = gen_rigid_cloud(&cfg).unwrap();
        let pod = pod_svd(&set, PodOptions::default()).unwrap();
        let n_pod = pod.energy_rank(0.99);
        let dim = if seed == 0 {
            rigid_run().summary.subalgebra.as_ref().unwrap().dim
        } else {
            let spec = ActionSpec::aff3_cloud();
            let sg = fit_velocity_free(&spec, &set, &LmConfig::default()).unwrap();
            subalgebra_search(&sg, 0.99, DEFAULT_CLOSURE_TOL).unwrap().subalgebra.dim()
        };
        all &= n_pod >= 10 * dim;
        detail.push(format!("seed {seed}: POD {n_pod} vs subalgebra {dim}"));
    }
    let ok = verdict("c3 kolmogorov contrast", all, &detail.join("; "));
    assert!(ok);
}

/// Summed one-step cost of the true motion on the noisy data.
fn truth_floor(set: &SnapshotSet, truth: &RigidTruth) -> f64 {
    let spec = ActionSpec::aff3_cloud();
    let mut total = 0.0;
    for traj in set.trajectories() {
        for w in traj.windows(2) {
            let g = truth.group_path[w[1].step].compose(&truth.group_path[w[0].step].inverse().unwrap());
            total += state_distance(&w[1].state, &apply_action(&spec, &g, &w[0].state).unwrap()).unwrap();
        }
    }
    total
}

#[test]
fn c4_velocity_free_beats_velocity_based() {
    let run = rigid_run();
    let cost = |mode: &str| run.summary.fits.iter().find(|f| f.mode == mode).unwrap().one_step_cost;
    let (vf, vb) = (cost("velocity_free"), cost("velocity_based"));
    let (set, truth) = gen_rigid_cloud(&BenchmarkConfig::rigid()).unwrap();
    let floor = truth_floor(&set, &truth);
    let ok = verdict(
        "c4 noise robustness",
        vf <= vb && vf <= 3.0 * floor && vb <= 3.0 * floor,
        &format!(
            "velocity-free {vf:.4}, velocity-based {vb:.4}, truth floor {floor:.4} (ratios {:.3}, {:.3})",
            vf / floor,
            vb / floor
        ),
    );
    assert!(ok);
}

#[test]
fn c5_radial_oscillator() {
    let (a, mu, q10, q20) = (100.0, 1.0, 1.0, 0.0);
    let t: Vec<f64> = (0..=1000).map(|k| 10.0 * k as f64 / 1000.0).collect();
    let x0 = StatePoint::polar(q10, q20).unwrap();
    let rho = ReducedVectorField::constant(AlgebraBasis::line(), &[mu], 0.0, 10.0).unwrap();
    let rom = integrate_rom(&RomModel::new(ActionSpec::so2_polar(), rho, x0.clone()).unwrap(), &t, Integrator::Rkmk4).unwrap();
    let exact_dev = t
        .iter()
        .zip(&rom.states)
        .map(|(ti, s)| (s.coords()[0] - q10).abs().max((s.coords()[1] - (q20 + mu * ti)).abs()))
        .fold(0.0, f64::max);
    let fom = integrate_reference_fom(FomField::radial(mu), &x0, &t, 1e-10).unwrap();
    let amplitude = fom
        .states
        .iter()
        .zip(&rom.states)
        .map(|(f, r)| state_distance(f, r).unwrap())
        .fold(0.0, f64::max);
    let bound = q10 * 2.0 / a;

    let dir = tempfile::tempdir().unwrap();
    let (summary, _) = run_in(dir.path(), &[("family", "radial")]);
    let learned = summary.rom.as_ref().unwrap().error_max;
    let ok = verdict(
        "c5 radial oscillator",
        exact_dev < 1e-12 && amplitude <= bound && learned <= bound,
        &format!("exact-flow deviation {exact_dev:.1e}, FOM-ROM error {amplitude:.3e}, learned ROM error {learned:.3e}, bound {bound}"),
    );
    assert!(ok);
}

#[test]
fn c6_linear_transport_width() {
    let dir = tempfile::tempdir().unwrap();
    let (summary, _) = run_in(
        dir.path(),
        &[
            ("family", "transport"),
            ("transport_mu1", "-1,0.5,2"),
            ("transport_mu2", "1,2,3"),
            ("grid_size", "256"),
        ],
    );
    let width = summary.width.as_ref().unwrap().width;
    let err = summary.rom.as_ref().unwrap().error_max;
    let ok = verdict(
        "c6 transport width",
        width <= 1e-8 && err <= 1e-10,
        &format!("width {width:.2e}, ROM error {err:.2e}"),
    );
    assert!(ok);
}

#[test]
fn c7_group_and_chart_integration_agree() {
    let cfg = BenchmarkConfig {
        sigma: 0.0,
        n_traj: 1,
        ..BenchmarkConfig::rigid()
    };
    let (_, truth) = gen_rigid_cloud(&cfg).unwrap();
    let x0 = truth.initial_clouds[0].clone();
    let t: Vec<f64> = (0..=1000).map(|k| 5e-3 * k as f64).collect();
    let action = ActionSpec::affine_cloud(AlgebraBasis::se3()).unwrap();
    let model = RomModel::new(action.clone(), truth.spatial_field.clone(), x0.clone()).unwrap();
    let rom = integrate_rom(&model, &t, Integrator::Rkmk4).unwrap();
    let chart = integrate_chart_rk4(&action, &truth.spatial_field, &x0, &t, 1).unwrap();
    let d = cloud_distance(rom.states.last().unwrap(), chart.states.last().unwrap(), DistanceMode::Mean).unwrap();
    let ok = verdict(
        "c7 group vs chart integration",
        d <= 1e-6,
        &format!("mean cloud distance at T = 5: {d:.2e}"),
    );
    assert!(ok);
}

fn random_aff3(rng: &mut ChaCha8Rng, scale: f64) -> AlgebraElement {
    let mut a = [[0.0; 3]; 3];
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v = scale * rng.random_range(-1.0..1.0);
        }
    }
    let b = [0; 3].map(|_| scale * rng.random_range(-1.0..1.0));
    AlgebraElement::affine(a, b)
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> StatePoint {
    StatePoint::point_cloud((0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_exp_log(rng: &mut ChaCha8Rng) -> f64 {
    (0..200)
        .map(|_| {
            let a = random_aff3(rng, 0.3);
            (log_map(&exp_map(&a).unwrap()).unwrap().matrix() - a.matrix()).norm()
        })
        .fold(0.0, f64::max)
}

fn check_jacobi(rng: &mut ChaCha8Rng) -> f64 {
    (0..200)
        .map(|_| {
            let (a, b, c) = (random_aff3(rng, 1.0), random_aff3(rng, 1.0), random_aff3(rng, 1.0));
            let br = |x: &AlgebraElement, y: &AlgebraElement| bracket(x, y).unwrap();
            (br(&a, &br(&b, &c)).matrix() + br(&b, &br(&c, &a)).matrix() + br(&c, &br(&a, &b)).matrix()).norm()
        })
        .fold(0.0, f64::max)
}

fn check_homomorphism(rng: &mut ChaCha8Rng) -> f64 {
    let spec = ActionSpec::aff3_cloud();
    (0..100)
        .map(|_| {
            let x = random_cloud(rng, 10);
            let g = exp_map(&random_aff3(rng, 0.5)).unwrap();
            let h = exp_map(&random_aff3(rng, 0.5)).unwrap();
            let lhs = apply_action(&spec, &g.compose(&h), &x).unwrap();
            let rhs = apply_action(&spec, &g, &apply_action(&spec, &h, &x).unwrap()).unwrap();
            max_abs(lhs.coords(), rhs.coords())
        })
        .fold(0.0, f64::max)
}

fn check_generator(rng: &mut ChaCha8Rng) -> f64 {
    let spec = ActionSpec::aff3_cloud();
    let h = 1e-5;
    (0..50)
        .map(|_| {
            let x = random_cloud(rng, 8);
            let a = random_aff3(rng, 1.0);
            let exact = infinitesimal_generator(&spec, &a, &x).unwrap();
            let plus = apply_action(&spec, &exp_map(&a.scaled(h)).unwrap(), &x).unwrap();
            let minus = apply_action(&spec, &exp_map(&a.scaled(-h)).unwrap(), &x).unwrap();
            let fd: Vec<f64> = plus.coords().iter().zip(minus.coords()).map(|(p, m)| (p - m) / (2.0 * h)).collect();
            let scale = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
            max_abs(&exact, &fd) / scale
        })
        .fold(0.0, f64::max)
}

fn rkmk4_order() -> f64 {
    let endpoint = |n: usize| {
        let t: Vec<f64> = (0..=n).map(|k| 2.0 * k as f64 / n as f64).collect();
        let field = FnField::new(4, (0.0, 2.0), |t: f64| {
            AlgebraElement::twist([1.0 + t.sin(), 0.8 * (2.0 * t).cos(), 0.5 * t], [0.3, -t, 0.2 * t * t])
        });
        integrate_group(&field, &t, Integrator::Rkmk4).unwrap().pop().unwrap()
    };
    let reference = endpoint(20_000);
    let err = |g: GroupElement| (g.matrix() - reference.matrix()).norm();
    let (coarse, fine) = (err(endpoint(200)), err(endpoint(800)));
    (coarse / fine).log2() / 2.0
}

/// Largest amount by which a random orthonormal basis beats the POD basis.
fn eckart_young_gap(rng: &mut ChaCha8Rng) -> f64 {
    let states: Vec<StatePoint> = (0..5).map(|_| random_cloud(rng, 4)).collect();
    let set = SnapshotSet::new(
        states
            .into_iter()
            .enumerate()
            .map(|(k, s)| morlie_core::Snapshot::new(0, k as f64, s))
            .collect(),
    )
    .unwrap();
    let opts = PodOptions {
        center: false,
        include_time: false,
    };
    let pod = pod_svd(&set, opts).unwrap();
    let s = DMatrix::from_fn(12, 5, |r, c| set.snapshots()[c].state.coords()[r]);
    let residual = |b: &DMatrix<f64>| (&s - b * (b.transpose() * &s)).norm();
    let mut gap = f64::NEG_INFINITY;
    for n in 1..5 {
        let best = residual(&pod.modes.columns(0, n).into_owned());
        for _ in 0..200 {
            let q = DMatrix::from_fn(12, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
            gap = gap.max(best - residual(&q));
        }
    }
    gap
}

fn closure_monotone(rng: &mut ChaCha8Rng) -> bool {
    (0..20).all(|_| {
        let basis = AlgebraBasis::new(vec![random_aff3(rng, 1.0), random_aff3(rng, 1.0)], vec![None, None]).unwrap();
        let out = bracket_closure(&basis, DEFAULT_CLOSURE_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        out.closed && out.dims.windows(2).all(|w| w[1] >= w[0])
    })
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .filter(|(n, _)| n != "timings.json")
        .collect();
    out.sort();
    out
}

fn pipeline_is_deterministic() -> bool {
    let small: [(&str, &str); 5] = [
        ("family", "rigid"),
        ("n_traj", "2"),
        ("n_particles", "20"),
        ("n_steps", "101"),
        ("save_states", "true"),
    ];
    // Same directory both times: config.txt records the output path.
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &small);
    let fa = dir_files(dir.path());
    run_in(dir.path(), &small);
    let fb = dir_files(dir.path());
    !fa.is_empty() && fa == fb
}

#[test]
fn c8_property_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let exp_log = check_exp_log(&mut rng);
    let jacobi = check_jacobi(&mut rng);
    let homo = check_homomorphism(&mut rng);
    let gen = check_generator(&mut rng);
    let order = rkmk4_order();
    let gap = eckart_young_gap(&mut rng);
    let monotone = closure_monotone(&mut rng);
    let deterministic = pipeline_is_deterministic();
    let checks = [
        ("exp/log roundtrip", exp_log <= 1e-9, format!("{exp_log:.1e}")),
        ("jacobi identity", jacobi <= 1e-10, format!("{jacobi:.1e}")),
        ("action homomorphism", homo <= 1e-10, format!("{homo:.1e}")),
        ("generator vs finite differences", gen <= 1e-7, format!("{gen:.1e} relative")),
        ("rkmk4 order", order >= 3.7, format!("{order:.3}")),
        ("eckart-young", gap <= 1e-12, format!("best random basis beats POD by {gap:.1e}")),
        ("closure monotone", monotone, String::new()),
        ("pipeline determinism", deterministic, String::new()),
    ];
    let mut all = true;
    for (name, pass, detail) in &checks {
        all &= verdict(&format!("c8 {name}"), *pass, detail);
    }
    assert!(all);
}
