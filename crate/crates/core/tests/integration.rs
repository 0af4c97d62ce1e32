use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use linecert::certify::{certify, DrConfig};
use linecert::irls::{run_irls, IrlsConfig};
use linecert::lifting::{alpha_from_residual, build_lifted, DEFAULT_EPS};
use linecert::oracle::{grid_search, OracleConfig};
use linecert::report::Report;
use linecert::sdp::{build_sdp, extract_rank1, solve_sdp, Relaxation, SdpSettings};
use linecert::synth::{generate, SyntheticSpec};
use linecert::tls::solve_tls;
use linecert::{gm_cost, residual, tls_cost, LineParams};

fn linecert(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linecert"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn report(dir: &Path, name: &str) -> Report {
    Report::from_json(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn random_lines(seed: u64, count: usize, c_range: f64) -> Vec<LineParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            LineParams::from_angle(
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(-c_range..c_range),
            )
        })
        .collect()
}

#[test]
fn sdp_is_a_lower_bound_and_recovers_alphas() {
    let d = generate(&SyntheticSpec::golden(0)).unwrap().dataset;
    let sol = solve_sdp(
        &build_sdp(&build_lifted(&d, DEFAULT_EPS).unwrap(), Relaxation::Redundant),
        &SdpSettings::default(),
    )
    .unwrap();
    let with_prior = |l: &LineParams| gm_cost(l, &d) + DEFAULT_EPS * l.c * l.c;

    let oracle = grid_search(&d, &OracleConfig::default()).unwrap();
    let irls = run_irls(&d, &IrlsConfig::default(), None).unwrap();
    let tol = 1e-6;
    assert!(sol.cost <= with_prior(&oracle.line) + tol);
    assert!(sol.cost <= with_prior(&irls.line) + tol);
    for l in random_lines(11, 100, 6.0) {
        assert!(sol.cost <= with_prior(&l) + tol);
    }
    assert!((oracle.cost - sol.cost_without_prior).abs() <= 1e-4);

    let (_, line, alpha) = extract_rank1(&sol).unwrap();
    for (p, a) in d.iter().zip(&alpha.alpha) {
        assert!(*a > 0.0 && *a <= 1.0 + 1e-6);
        assert!((a - alpha_from_residual(residual(&line, p))).abs() <= 1e-3);
    }
}

#[test]
fn certified_candidates_beat_random_lines() {
    for seed in [0, 1, 2] {
        let d = generate(&SyntheticSpec::golden(seed)).unwrap().dataset;
        let line = run_irls(&d, &IrlsConfig::for_certification(DEFAULT_EPS), None).unwrap().line;
        let cfg = DrConfig::default();
        let res = certify(&d, &line, DEFAULT_EPS, &cfg).unwrap();
        if !res.certified {
            continue;
        }
        let slack = cfg.cert_tol * (1.0 + d.len() as f64);
        for l in random_lines(seed + 100, 100, 6.0) {
            assert!(gm_cost(&line, &d) <= gm_cost(&l, &d) + slack);
        }
    }
}

#[test]
fn dr_iterates_stay_bounded() {
    let d = generate(&SyntheticSpec::golden(0)).unwrap().dataset;
    let line = run_irls(&d, &IrlsConfig::for_certification(DEFAULT_EPS), None).unwrap().line;
    for beta in [0.3, 1.0, 1.5, 1.9] {
        let cfg = DrConfig {
            beta,
            stop_when_certified: false,
            ..DrConfig::default()
        };
        let res = certify(&d, &line, DEFAULT_EPS, &cfg).unwrap();
        assert!(!res.diverged);
        assert!(res.k_final.norm() <= 10.0 * (1.0 + res.m_norm));
    }
}

#[test]
fn clean_data_is_recovered_exactly() {
    let truth = LineParams::new(1.0, 2.0, 0.7).unwrap();
    let spec = SyntheticSpec {
        n_total: 12,
        n_outliers: 0,
        true_line: truth,
        inlier_noise_sigma: 0.0,
        outlier_box: 3.0,
        seed: 5,
    };
    let d = generate(&spec).unwrap().dataset;
    let sol = solve_tls(&d, None).unwrap();
    assert!(tls_cost(&truth, &d).unwrap() <= 1e-20);
    assert!(sol.line.approx_eq(&truth, 1e-9));

    let two = generate(&SyntheticSpec {
        n_total: 2,
        inlier_noise_sigma: 0.05,
        ..spec
    })
    .unwrap()
    .dataset;
    assert_eq!(two.len(), 2);
    assert!(tls_cost(&solve_tls(&two, None).unwrap().line, &two).unwrap() <= 1e-20);
}

#[test]
fn cli_golden_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (seed, name) in [("0", "pass"), ("17", "fail")] {
        let csv = format!("{name}.csv");
        assert!(linecert(&["gen", "--out", &csv, "--seed", seed], p).status.success());
        let out = format!("{name}.json");
        let o = linecert(
            &["fit", "--input", &csv, "--method", "irls", "--certify", "--oracle", "--out", &out],
            p,
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let pass = report(p, "pass.json");
    assert!(pass.certificate.unwrap().certified);
    assert!(pass.weights.is_some() && pass.alphas.is_none());
    let fail = report(p, "fail.json");
    assert!(!fail.certificate.unwrap().certified);
    assert!(fail.oracle.unwrap().cost < fail.gm_cost);

    let line = format!("{},{},{}", pass.line.a, pass.line.b, pass.line.c);
    let o = linecert(&["certify", "--input", "pass.csv", "--line", &line, "--out", "given.json"], p);
    assert!(o.status.success());
    let given = report(p, "given.json");
    assert!(given.certificate.unwrap().certified);
}

#[test]
fn cli_reports_to_stdout_and_tls_on_collinear_data() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("line.csv"), "x,y\n0,1\n1,3\n2,5\n3,7\n").unwrap();
    let o = linecert(&["fit", "--input", "line.csv", "--method", "tls"], p);
    assert!(o.status.success());
    let r = Report::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(r.tls_cost < 1e-20 && r.gm_cost < 1e-20);
    assert!(r.timings.is_empty());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let code = |args: &[&str]| linecert(args, p).status.code();

    assert_eq!(code(&["fit", "--input", "missing.csv"]), Some(1));
    assert_eq!(code(&["fit", "--no-such-flag"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));

    std::fs::write(p.join("bad.csv"), "x,y\n1,2\n3,oops\n").unwrap();
    let o = linecert(&["fit", "--input", "bad.csv"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let big: String = (0..30).map(|i| format!("{i},{}\n", (i * 7) % 5)).collect();
    std::fs::write(p.join("big.csv"), big).unwrap();
    assert_eq!(code(&["fit", "--input", "big.csv", "--method", "sdp"]), Some(1));
    assert_eq!(code(&["sdp-export", "--input", "big.csv", "--out", "x.dat-s"]), Some(1));
    assert_eq!(code(&["fit", "--input", "big.csv", "--method", "irls"]), Some(0));

    assert_eq!(code(&["gen", "--out", "g.csv", "--n", "3", "--outliers", "4"]), Some(1));
    assert_eq!(code(&["certify", "--input", "big.csv", "--line", "0,0,1"]), Some(1));
    assert_eq!(code(&["fit", "--input", "big.csv", "--beta", "2.5", "--certify"]), Some(1));
}

#[test]
fn plot_overlays_from_reports() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(linecert(&["gen", "--out", "d.csv", "--truth", "t.csv"], p).status.success());
    for m in ["tls", "irls", "sdp"] {
        let out = format!("{m}.json");
        assert!(linecert(&["fit", "--input", "d.csv", "--method", m, "--out", &out], p)
            .status
            .success());
    }
    let o = linecert(
        &["plot", "--input", "d.csv", "--truth", "t.csv", "--report", "tls.json", "--report", "irls.json",
          "--report", "sdp.json", "--out", "fig.svg"],
        p,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(p.join("fig.svg")).unwrap();
    for label in ["truth", "tls", "irls", "sdp"] {
        assert!(svg.contains(&format!("<title>{label}</title>")), "{label} missing");
    }

    assert!(linecert(&["plot", "--input", "d.csv", "--out", "bare.svg"], p).status.success());
    let bare = std::fs::read_to_string(p.join("bare.svg")).unwrap();
    assert_eq!(bare.matches("<circle").count(), 10);
    assert!(!bare.contains("<line"));

    std::fs::write(p.join("other.csv"), "1,2\n3,4\n").unwrap();
    let o = linecert(&["plot", "--input", "other.csv", "--report", "irls.json", "--out", "x.svg"], p);
    assert_eq!(o.status.code(), Some(1));
}
