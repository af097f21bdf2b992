use morlie_core::actions::apply_action;
use morlie_core::baselines::pod_reconstruct_error;
use morlie_core::datagen::{gen_rigid_cloud, BenchmarkConfig};
use morlie_core::fitting::fit_velocity_free;
use morlie_core::lie::{exp_map, log_map, DEFAULT_CLOSURE_TOL};
use morlie_core::lm::LmConfig;
use morlie_core::metric::state_distance;
use morlie_core::subalgebra::{energy_rank, subalgebra_search};
use morlie_core::{ActionSpec, AlgebraElement, GroupElement, StatePoint};
use proptest::prelude::*;

fn twist() -> impl Strategy<Value = AlgebraElement> {
    (prop::array::uniform3(-1.0f64..1.0), prop::array::uniform3(-2.0f64..2.0)).prop_map(|(w, v)| AlgebraElement::twist(w, v))
}

fn cloud(n: usize) -> impl Strategy<Value = StatePoint> {
    prop::collection::vec(-3.0f64..3.0, 3 * n).prop_map(|c| StatePoint::point_cloud(c).unwrap())
}

proptest! {
    #[test]
    fn rigid_motions_stay_rigid(a in twist()) {
        let g = exp_map(&a).unwrap();
        prop_assert!(g.is_se3(1e-10));
        let back = log_map(&g).unwrap();
        prop_assert!((back.matrix() - a.matrix()).norm() <= 1e-9);
    }

    #[test]
    fn rigid_action_preserves_distances(a in twist(), x in cloud(5), y in cloud(5)) {
        let spec = ActionSpec::aff3_cloud();
        let g = exp_map(&a).unwrap();
        let d0 = state_distance(&x, &y).unwrap();
        let d1 = state_distance(&apply_action(&spec, &g, &x).unwrap(), &apply_action(&spec, &g, &y).unwrap()).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-10 * (1.0 + d0));
    }

    #[test]
    fn identity_acts_trivially(x in cloud(4)) {
        let y = apply_action(&ActionSpec::aff3_cloud(), &GroupElement::identity(4), &x).unwrap();
        prop_assert_eq!(x.coords(), y.coords());
    }

    #[test]
    fn distance_is_a_metric(x in cloud(3), y in cloud(3), z in cloud(3)) {
        let d = |a: &StatePoint, b: &StatePoint| state_distance(a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-15);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
    }

    #[test]
    fn energy_rank_grows_with_the_fraction(mut sv in prop::collection::vec(0.0f64..10.0, 1..20), a in 0.01f64..0.98) {
        sv.sort_by(|p, q| q.total_cmp(p));
        let lo = energy_rank(&sv, a);
        let hi = energy_rank(&sv, a + 0.01);
        prop_assert!(lo <= hi && hi <= sv.len());
    }
}

#[test]
fn noiseless_rigid_data_lands_in_se3() {
    let cfg = BenchmarkConfig {
        n_traj: 3,
        n_particles: 20,
        n_steps: 200,
        sigma: 0.0,
        ..BenchmarkConfig::rigid()
    };
    let (set, _) = gen_rigid_cloud(&cfg).unwrap();
    let sg = fit_velocity_free(&ActionSpec::aff3_cloud(), &set, &LmConfig::default()).unwrap();
    let report = subalgebra_search(&sg, 0.99, DEFAULT_CLOSURE_TOL).unwrap();
    assert!(report.closure.closed);
    assert_eq!(report.library_match, Some("se(3)"), "dim {}", report.subalgebra.dim());
}

#[test]
fn pod_error_vanishes_with_a_full_basis() {
    let cfg = BenchmarkConfig {
        n_traj: 2,
        n_particles: 10,
        n_steps: 30,
        ..BenchmarkConfig::rigid()
    };
    let (set, _) = gen_rigid_cloud(&cfg).unwrap();
    let none = pod_reconstruct_error(&set, 0, true).unwrap();
    let some = pod_reconstruct_error(&set, 6, true).unwrap();
    let all = pod_reconstruct_error(&set, set.first_state().dim(), true).unwrap();
    assert!(none.mean > some.mean && some.mean > all.mean);
    assert!(all.sup < 1e-10, "{}", all.sup);
}
