use std::fs;
use std::path::Path;
use std::process::Command;

use rsp_core::config::RunConfig;
use rsp_core::disorder::sample_couplings;
use rsp_core::entropy::tsallis_singlet_entropy;
use rsp_core::pipeline::{self, read_entropy_csv, run_ensemble, simulate, Checkpoint};

fn rsp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rsp"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn four_site_chain_matches_hand_trace() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        rsp()
            .args(["simulate", "--seed", "31", "--workers", "1", "--out"])
            .arg(dir.path())
            .args([
                "--set",
                "sites=4",
                "--set",
                "configurations=1",
                "--set",
                "blocks.sizes=1,2,3",
                "--set",
                "q.values=-1,0.5,1,2",
                "--set",
                "scaling.fit_min=1",
                "--set",
                "scaling.fit_max=3",
            ]),
    );
    let rows = read_entropy_csv(&dir.path().join("entropy.csv")).unwrap();

    // Strongest bond (i, i+1) forms a singlet; the other two sites pair up.
    let cfg = RunConfig::default();
    let mut spec = cfg.disorder;
    spec.master_seed = 31;
    let j = sample_couplings(&spec, 4, 0).unwrap();
    let i = (0..4)
        .max_by(|&a, &b| j[a].total_cmp(&j[b]).then(b.cmp(&a)))
        .unwrap();
    let n_of = |l: usize| -> u32 {
        match l {
            2 if i % 2 == 0 => 0,
            2 => 2,
            _ => 1,
        }
    };
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let want = tsallis_singlet_entropy(n_of(r.l), r.q, 1).unwrap();
        assert!(
            (r.mean - want).abs() <= 1e-12 * want.abs().max(1.0),
            "{r:?} vs {want}"
        );
        assert_eq!(r.m, 1);
        assert_eq!(r.stderr, 0.0);
    }
}

#[test]
fn resume_reproduces_an_uninterrupted_run() {
    let mut cfg = RunConfig {
        sites: 512,
        configurations: 40,
        workers: 2,
        checkpoint_every: 16,
        ..Default::default()
    };
    cfg.disorder.master_seed = 5;
    let full = run_ensemble(&cfg, None, |_| Ok(())).unwrap();

    let mut first: Option<Checkpoint> = None;
    let _ = run_ensemble(&cfg, None, |cp| {
        first.get_or_insert_with(|| cp.clone());
        Err(rsp_core::Error::Invariant("interrupted".into()))
    });
    let cp = first.unwrap();
    assert_eq!(cp.state.next_index, 16);
    let resumed = run_ensemble(&cfg, Some(cp), |_| Ok(())).unwrap();

    let (mut a, mut b) = (Vec::new(), Vec::new());
    full.table.write_csv(&mut a).unwrap();
    resumed.table.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resume_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        sites: 256,
        configurations: 24,
        workers: 1,
        checkpoint_every: 8,
        ..Default::default()
    };
    cfg.disorder.master_seed = 8;
    simulate(&cfg, dir.path(), false).unwrap();
    let fresh = fs::read(dir.path().join("entropy.csv")).unwrap();
    // A finished checkpoint resumes to the same table.
    simulate(&cfg, dir.path(), true).unwrap();
    assert_eq!(fresh, fs::read(dir.path().join("entropy.csv")).unwrap());

    let other = RunConfig {
        sites: 128,
        ..cfg.clone()
    };
    assert!(simulate(&other, dir.path(), true).is_err());
}

fn small_run(dir: &Path, two_s: u32, seed: u64) {
    run_ok(
        rsp()
            .args(["simulate", "--seed", &seed.to_string(), "--out"])
            .arg(dir)
            .args([
                "--set",
                &format!("two_s={two_s}"),
                "--set",
                "sites=2048",
                "--set",
                "configurations=64",
            ]),
    );
}

#[test]
fn simulate_analyze_sweep_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for two_s in 1..=3 {
        let d = root.path().join(format!("s{two_s}"));
        small_run(&d, two_s, 3);
        let line = run_ok(
            rsp()
                .args(["analyze", "--in"])
                .arg(d.join("entropy.csv"))
                .arg("--out")
                .arg(d.join("fit.json")),
        );
        assert!(line.starts_with("q_ext = "), "{line}");
        let fit = pipeline::read_fit(&d.join("fit.json")).unwrap();
        assert_eq!(fit.two_s, two_s);
        assert_eq!(fit.gamma_points.len(), 11);
        assert!(fit.q_ext.is_finite() && fit.delta_q_ext > 0.0);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
        for key in [
            "model",
            "two_s",
            "gamma_points",
            "u",
            "v",
            "w",
            "q_ext",
            "delta_q_ext",
            "c_eff",
            "q_ext_linear_pred",
            "trio_fraction",
        ] {
            assert!(json.get(key).is_some(), "fit.json lacks {key}");
        }
        dirs.push(d);
    }
    let sweep_csv = root.path().join("sweep.csv");
    let line = run_ok(
        rsp()
            .args(["sweep", "--out"])
            .arg(&sweep_csv)
            .arg("--in")
            .args(&dirs),
    );
    assert!(line.contains("k = "), "{line}");
    let text = fs::read_to_string(&sweep_csv).unwrap();
    assert_eq!(text.lines().next(), Some("c_eff,q_ext,delta_q_ext,model"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn analyze_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("entropy.csv");
    fs::write(&csv, "").unwrap();
    let out = rsp()
        .args(["analyze", "--two-s", "1", "--in"])
        .arg(&csv)
        .arg("--out")
        .arg(dir.path().join("fit.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    fs::write(&csv, "q,L,mean,stderr,M\n").unwrap();
    assert!(!rsp()
        .args(["analyze", "--two-s", "1", "--in"])
        .arg(&csv)
        .arg("--out")
        .arg(dir.path().join("fit.json"))
        .output()
        .unwrap()
        .status
        .success());
}

#[test]
fn sweep_needs_two_models() {
    let root = tempfile::tempdir().unwrap();
    let d = root.path().join("one");
    small_run(&d, 1, 4);
    run_ok(
        rsp()
            .args(["analyze", "--in"])
            .arg(d.join("entropy.csv"))
            .arg("--out")
            .arg(d.join("fit.json")),
    );
    let out = rsp()
        .args(["sweep", "--out"])
        .arg(root.path().join("sweep.csv"))
        .arg("--in")
        .arg(&d)
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn selftest_passes() {
    let text = run_ok(rsp().arg("selftest"));
    assert_eq!(
        text.lines().filter(|l| l.starts_with("[PASS]")).count(),
        4,
        "{text}"
    );
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.conf");
    fs::write(
        &cfg_path,
        "# small spin-1 run\nmodel = heisenberg\ntwo_s = 2\nsites = 256\nconfigurations = 8\nseed = 2\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    run_ok(
        rsp()
            .args(["simulate", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .args(["--set", "configurations=16", "--dump-events", "3"]),
    );
    let meta = pipeline::read_meta(&out.join("meta.json")).unwrap();
    assert_eq!(meta.configurations_done, 16);
    assert_eq!(meta.config.model.two_s(), 2);
    let log = fs::read_to_string(out.join("events_3.txt")).unwrap();
    assert!(log.lines().count() > 100);

    fs::write(&cfg_path, "sites = 256\nbogus = 1\n").unwrap();
    assert!(!rsp()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("bad"))
        .output()
        .unwrap()
        .status
        .success());
}
