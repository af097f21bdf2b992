use std::process::Command;

use morlie_cli::io::{parse_snapshots, read_snapshots, write_snapshots, write_snapshots_to};
use morlie_cli::pipeline::{Outcome, SNAPSHOTS_FILE};
use morlie_cli::report::{read_rows, OVERLAY_FILE};
use morlie_cli::summary::{ClusterSummary, SUMMARY_FILE};
use morlie_cli::{run_pipeline, RunConfig, Summary};
use morlie_core::datagen::{generate, BenchmarkConfig};

fn small_rigid() -> BenchmarkConfig {
    BenchmarkConfig {
        n_traj: 3,
        n_particles: 15,
        n_steps: 40,
        ..BenchmarkConfig::rigid()
    }
}

#[test]
fn rigid_export_then_ingest_is_bit_exact() {
    let (set, _) = generate(&small_rigid()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(SNAPSHOTS_FILE);
    write_snapshots(&path, &set).unwrap();
    let back = read_snapshots(&path).unwrap();
    assert_eq!(back.len(), set.len());
    for (a, b) in set.iter().zip(back.iter()) {
        assert_eq!((a.traj, a.step, a.time.to_bits()), (b.traj, b.step, b.time.to_bits()));
        let bits = |s: &[f64]| s.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.state.coords()), bits(b.state.coords()));
    }
}

#[test]
fn transport_export_keeps_period_and_parameters() {
    let cfg = BenchmarkConfig {
        grid_size: 32,
        n_steps: 5,
        ..BenchmarkConfig::transport()
    };
    let (set, _) = generate(&cfg).unwrap();
    let mut buf = Vec::new();
    write_snapshots_to(&mut buf, &set).unwrap();
    let back = parse_snapshots(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.first_state().chart(), set.first_state().chart());
    for (a, b) in set.iter().zip(back.iter()) {
        assert_eq!(a.param, b.param);
        assert_eq!(a.state.coords(), b.state.coords());
    }
}

#[test]
fn nan_value_names_the_row() {
    let text = "#morlie-snapshots v1\ntraj,time,q1,q2\n0,0.0,1.0,0.0\n0,0.1,NaN,0.1\n";
    let err = format!("{:#}", parse_snapshots(text).unwrap_err());
    assert!(err.contains("line 4") && err.contains("data row 2") && err.contains("q1"), "{err}");
}

#[test]
fn empty_data_section_is_an_error() {
    let err = format!("{:#}", parse_snapshots("#morlie-snapshots v1\ntraj,time,q1,q2\n").unwrap_err());
    assert!(err.contains("no data rows"), "{err}");
    assert!(parse_snapshots("").is_err());
}

#[test]
fn decreasing_time_is_rejected() {
    let text = "#morlie-snapshots v1\ntraj,time,q1,q2\n0,0.2,1.0,0.0\n0,0.1,1.0,0.1\n";
    let err = format!("{:#}", parse_snapshots(text).unwrap_err());
    assert!(err.contains("precedes"), "{err}");
}

fn small_pipeline(dir: &std::path::Path) -> (Outcome, Summary) {
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("family", "rigid"),
        ("n_traj", "2"),
        ("n_particles", "12"),
        ("n_steps", "41"),
        ("horizon", "1"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg.out = dir.to_path_buf();
    run_pipeline(&cfg).unwrap()
}

#[test]
fn summary_file_matches_the_returned_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (outcome, summary) = small_pipeline(dir.path());
    let on_disk = Summary::read(&dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(on_disk, summary);
    assert_eq!(outcome, Outcome::of(&summary));
    assert!(summary.error.is_none());
}

#[test]
fn overlay_starts_with_zero_offset() {
    let dir = tempfile::tempdir().unwrap();
    let (_, summary) = small_pipeline(dir.path());
    assert_eq!(summary.rom.as_ref().unwrap().initial_error_max, 0.0);
    let rows = read_rows(&dir.path().join(OVERLAY_FILE)).unwrap();
    let t0 = &rows[0][0];
    let pick = |source: &str| -> Vec<(String, String)> {
        rows.iter()
            .filter(|r| &r[0] == t0 && r[1] == source)
            .map(|r| (r[3].clone(), r[4].clone()))
            .collect()
    };
    let (data, rom) = (pick("data"), pick("rom"));
    assert!(!data.is_empty());
    assert_eq!(data, rom);
}

#[test]
fn flags_decide_the_outcome() {
    let mut s = Summary::default();
    assert_eq!(Outcome::of(&s), Outcome::Clean);
    s.clustering = Some(ClusterSummary {
        n_clusters: 3,
        sizes: vec![10, 9, 1],
        stride: 1,
        reseeds: 0,
        singletons: 1,
        accuracy: None,
    });
    s.flags = s.compute_flags();
    assert_eq!(s.flags.len(), 1);
    assert_eq!(Outcome::of(&s), Outcome::Flagged);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_morlie");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(exe)
        .args(["pipeline", "--out"])
        .arg(dir.path())
        .args(["--", "--family", "radial", "--radial-mu", "1", "--n-steps", "201"])
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    assert!(dir.path().join(SUMMARY_FILE).exists());

    let bad = Command::new(exe)
        .args(["pipeline", "--out"])
        .arg(dir.path())
        .args(["--", "--sigma", "-1"])
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(1));

    let missing = dir.path().join("nope.csv");
    let bad_input = Command::new(exe)
        .args(["fit", "--out"])
        .arg(dir.path())
        .args(["--", "--input"])
        .arg(&missing)
        .status()
        .unwrap();
    assert_eq!(bad_input.code(), Some(1));
}
