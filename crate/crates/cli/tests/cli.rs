//! Integration tests driving the installed binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lpq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpq"))
        .args(args)
        .output()
        .expect("failed to spawn lpq")
}

fn run_ok(args: &[&str]) -> String {
    let out = lpq(args);
    assert!(
        out.status.success(),
        "`lpq {}` failed:\nstdout: {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tree_files(root: &Path) -> Vec<PathBuf> {
    let mut acc = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                acc.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    acc.sort();
    acc
}

fn assert_trees_identical(a: &Path, b: &Path) -> usize {
    let files_a = tree_files(a);
    let files_b = tree_files(b);
    assert_eq!(files_a, files_b, "directory trees differ in file names");
    for rel in &files_a {
        let bytes_a = fs::read(a.join(rel)).unwrap();
        let bytes_b = fs::read(b.join(rel)).unwrap();
        assert_eq!(
            bytes_a,
            bytes_b,
            "file {} differs between {} and {}",
            rel.display(),
            a.display(),
            b.display()
        );
    }
    files_a.len()
}

#[test]
fn subcommand_chain_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).display().to_string();

    run_ok(&["mesh", "--level", "1", "--out", &p("m.off")]);
    let mesh = lpq::io::read_off(tmp.path().join("m.off")).unwrap();
    assert_eq!(mesh.n_vertices(), 42);
    assert_eq!(mesh.n_faces(), 80);

    run_ok(&[
        "simulate-cgle",
        "--preset",
        "defect-turbulence",
        "--seed",
        "3",
        "--width",
        "16",
        "--height",
        "16",
        "--t-end",
        "40",
        "--stride",
        "0.5",
        "--scalar",
        "abs",
        "--out",
        &p("sim"),
    ]);
    run_ok(&[
        "gradient",
        "--in",
        &p("sim"),
        "--out",
        &p("grad"),
        "--boundary",
        "periodic",
    ]);
    run_ok(&[
        "distmat",
        "--in",
        &p("grad"),
        "--out",
        &p("d.dmsd"),
        "--p",
        "2",
        "--q",
        "2",
    ]);
    let out = run_ok(&[
        "mds",
        "--in",
        &p("d.dmsd"),
        "--out",
        &p("e.dmse"),
        "--spectrum",
        &p("spec.csv"),
        "--coords",
        &p("coords.csv"),
    ]);
    assert!(out.contains("retained"), "mds summary missing: {out}");
    run_ok(&[
        "reconstruct",
        "--series",
        &p("grad"),
        "--embedding",
        &p("e.dmse"),
        "--k",
        "2",
        "--out",
        &p("rec"),
    ]);
    let out = run_ok(&[
        "lyapunov",
        "--embedding",
        &p("e.dmse"),
        "--coord",
        "1",
        "--dt",
        "0.5",
        "--curve",
        &p("curve.csv"),
    ]);
    assert!(out.contains("per time unit"), "lyapunov summary missing: {out}");

    for name in [
        "spec.csv",
        "coords.csv",
        "curve.csv",
        "rec/reconstruction_errors.csv",
        "rec/mode_01.dmsf",
    ] {
        assert!(tmp.path().join(name).exists(), "missing {name}");
    }

    // The stored distance matrix round-trips through the library API.
    let dm = lpq::io::read_distance_matrix(tmp.path().join("d.dmsd")).unwrap();
    assert_eq!(dm.n(), 81);
}

#[test]
fn simulate_gs_species_view() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("gs");
    run_ok(&[
        "simulate-gs",
        "--preset",
        "dots",
        "--level",
        "1",
        "--t-end",
        "5",
        "--stride",
        "1",
        "--species",
        "u",
        "--out",
        &out_dir.display().to_string(),
    ]);
    let series = lpq::io::read_series(&out_dir).unwrap();
    assert_eq!(series.rank(), 1);
    assert_eq!(series.n_frames(), 6);
    assert!(matches!(
        series.space().kind(),
        lpq::SpaceKind::TriMesh(_)
    ));
}

#[test]
fn errors_are_stage_tagged_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let out = lpq(&[
        "distmat",
        "--in",
        &missing.display().to_string(),
        "--out",
        &tmp.path().join("d.dmsd").display().to_string(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("stage `distmat` failed"),
        "stderr not stage-tagged: {stderr}"
    );

    let out = lpq(&["simulate-cgle", "--preset", "nope", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `simulate-cgle`"));
}

/// Determinism: two `pipeline` runs from one manifest produce bitwise-identical
/// output trees.
#[test]
fn acceptance_pipeline_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "[input]\n\
         kind = \"cgle-preset\"\n\
         preset = \"defect-turbulence\"\n\
         seed = 11\n\
         width = 16\n\
         height = 16\n\
         t_end = 3.0\n\
         stride = 0.5\n\n\
         [analysis]\n\
         scalar = \"abs\"\n\n\
         [reconstruct]\n\
         enabled = true\n\
         k = 2\n",
    )
    .unwrap();

    let dir_a = tmp.path().join("a");
    run_ok(&[
        "pipeline",
        "--config",
        &config.display().to_string(),
        "--out",
        &dir_a.display().to_string(),
    ]);
    let manifest = dir_a.join("run_manifest.toml");
    assert!(manifest.exists());

    // Two further runs, each driven by the first run's manifest alone.
    let dir_b = tmp.path().join("b");
    let dir_c = tmp.path().join("c");
    for dir in [&dir_b, &dir_c] {
        run_ok(&[
            "pipeline",
            "--config",
            &manifest.display().to_string(),
            "--out",
            &dir.display().to_string(),
        ]);
    }

    let n = assert_trees_identical(&dir_b, &dir_c);
    // The manifest-driven rerun also reproduces the original tree.
    assert_trees_identical(&dir_a, &dir_b);
    println!(
        "criterion 10: PASS — two pipeline runs from one manifest are bitwise-identical \
         ({n} files compared, third tree matches the original run)"
    );
}
