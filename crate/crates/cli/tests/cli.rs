use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtomo::dataset;
use qtomo_core::reconstruct::{analytic_1q, pinv_reconstruct};
use qtomo_core::MeasurementRecord;
use qtomo_eval::errormap::error_maps_from_csv;
use qtomo_eval::report::sweeps_from_csv;
use tempfile::TempDir;

fn qtomo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtomo"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qtomo(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    qtomo(dir, args).status.code().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn gen_is_deterministic_and_checked() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "1",
            "--count",
            "100",
            "--seed",
            "7",
            "--out",
            "a.qtds",
        ],
    );
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "1",
            "--count",
            "100",
            "--seed",
            "7",
            "--out",
            "b.qtds",
        ],
    );
    let a = std::fs::read(path(d, "a.qtds")).unwrap();
    assert_eq!(a, std::fs::read(path(d, "b.qtds")).unwrap());
    let (h, states) = dataset::load(&path(d, "a.qtds")).unwrap();
    assert_eq!((h.n_qubits, states.len()), (1, 100));
    assert!(states.iter().all(|s| s.dim() == 2));

    ok(d, &["gen", "--count", "0", "--out", "empty.qtds"]);
    assert_eq!(dataset::load(&path(d, "empty.qtds")).unwrap().1.len(), 0);

    let mut bad = a.clone();
    bad[100] ^= 0x10;
    std::fs::write(path(d, "bad.qtds"), bad).unwrap();
    assert_eq!(code(d, &["inspect", "bad.qtds"]), 2);
    assert_eq!(
        code(
            d,
            &["sweep", "--method", "pinv", "--data", "bad.qtds", "--out", "x.csv"]
        ),
        2
    );

    assert_eq!(
        code(
            d,
            &[
                "gen",
                "--ensemble",
                "x-state",
                "--n-qubits",
                "1",
                "--out",
                "x.qtds"
            ]
        ),
        1
    );
    ok(
        d,
        &[
            "gen",
            "--ensemble",
            "x-state",
            "--n-qubits",
            "2",
            "--count",
            "5",
            "--out",
            "x.qtds",
        ],
    );
}

#[test]
fn exit_codes() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    assert_eq!(code(d, &[]), 1);
    assert_eq!(code(d, &["--help"]), 0);
    assert_eq!(code(d, &["sweep", "--help"]), 0);
    assert_eq!(code(d, &["frobnicate"]), 1);
    assert_eq!(code(d, &["gen", "--count", "ten", "--out", "a"]), 1);
    assert_eq!(
        code(
            d,
            &[
                "sweep",
                "--method",
                "pinv",
                "--data",
                "missing.qtds",
                "--out",
                "x.csv"
            ]
        ),
        2
    );
    assert_eq!(code(d, &["inspect", "missing"]), 2);
}

#[test]
fn help_documents_defaults() {
    let t = TempDir::new().unwrap();
    let help = ok(t.path(), &["train", "--help"]);
    for needle in [
        "[default: 64]",
        "[default: 0.001]",
        "[default: 100]",
        "[default: 4^N]",
        "[default: 256]",
    ] {
        assert!(help.contains(needle), "missing {needle}");
    }
}

#[test]
fn config_files_and_flag_precedence() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    std::fs::write(
        path(d, "gen.cfg"),
        "schema_version = 1\n# comment\nn_qubits = 2\ncount = 12\nseed = 5\nout = cfg.qtds\n",
    )
    .unwrap();
    ok(d, &["gen", "--config", "gen.cfg"]);
    let (h, _) = dataset::load(&path(d, "cfg.qtds")).unwrap();
    assert_eq!((h.n_qubits, h.count), (2, 12));
    ok(d, &["gen", "--config", "gen.cfg", "--count", "3"]);
    assert_eq!(dataset::load(&path(d, "cfg.qtds")).unwrap().0.count, 3);
    ok(
        d,
        &[
            "gen",
            "--count",
            "3",
            "--config=gen.cfg",
            "--n-qubits",
            "2",
            "--seed",
            "5",
            "--out",
            "flag.qtds",
        ],
    );
    assert_eq!(
        std::fs::read(path(d, "cfg.qtds")).unwrap(),
        std::fs::read(path(d, "flag.qtds")).unwrap()
    );

    std::fs::write(path(d, "unknown.cfg"), "schema_version = 1\ncolour = red\n").unwrap();
    assert_eq!(
        code(d, &["gen", "--config", "unknown.cfg", "--out", "u.qtds"]),
        1
    );
    std::fs::write(path(d, "noschema.cfg"), "count = 3\n").unwrap();
    assert_eq!(
        code(d, &["gen", "--config", "noschema.cfg", "--out", "u.qtds"]),
        1
    );
    std::fs::write(path(d, "wrongcmd.cfg"), "schema_version = 1\nepochs = 3\n").unwrap();
    assert_eq!(
        code(d, &["gen", "--config", "wrongcmd.cfg", "--out", "u.qtds"]),
        1
    );
    assert_eq!(
        code(d, &["gen", "--config", "nowhere.cfg", "--out", "u.qtds"]),
        2
    );
}

#[test]
fn pinv_and_mle_sweeps() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "1",
            "--count",
            "300",
            "--seed",
            "1",
            "--out",
            "test.qtds",
        ],
    );
    ok(
        d,
        &[
            "sweep",
            "--method",
            "pinv",
            "--data",
            "test.qtds",
            "--m",
            "1-4",
            "--collections",
            "10",
            "--out",
            "p.csv",
            "--svg",
            "p.svg",
        ],
    );
    let results = sweeps_from_csv(&read(d, "p.csv")).unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0].rows.len(), 4);
    assert!(results[0].rows[3].mean_bures < 1e-6);
    assert!(read(d, "p.csv")
        .lines()
        .any(|l| l.starts_with("# config_hash=")));
    assert!(read(d, "p.svg").contains("<polyline"));

    ok(
        d,
        &[
            "sweep",
            "--method",
            "mle",
            "--data",
            "test.qtds",
            "--m",
            "2",
            "--collections",
            "3",
            "--out",
            "m.csv",
        ],
    );
    assert_eq!(sweeps_from_csv(&read(d, "m.csv")).unwrap()[0].method, "mle");
    assert_eq!(
        code(
            d,
            &[
                "sweep",
                "--method",
                "corrector",
                "--data",
                "test.qtds",
                "--out",
                "c.csv"
            ]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &[
                "sweep",
                "--method",
                "lstm",
                "--data",
                "test.qtds",
                "--out",
                "c.csv"
            ]
        ),
        2
    );
}

#[test]
fn sweeps_are_byte_reproducible() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "2",
            "--count",
            "60",
            "--seed",
            "4",
            "--out",
            "t.qtds",
        ],
    );
    let run = |out: &str, jobs: &str| {
        ok(
            d,
            &[
                "sweep",
                "--method",
                "pinv,mle",
                "--data",
                "t.qtds",
                "--m",
                "0,3,8",
                "--collections",
                "5",
                "--seed",
                "9",
                "--mle-max-iters",
                "200",
                "--jobs",
                jobs,
                "--out",
                out,
            ],
        );
        std::fs::read(path(d, out)).unwrap()
    };
    let a = run("a.csv", "1");
    assert_eq!(a, run("b.csv", "1"));
    assert_eq!(a, run("c.csv", "3"));
    ok(
        d,
        &[
            "sweep", "--method", "pinv", "--data", "t.qtds", "--m", "3", "--seed", "10", "--out",
            "d.csv",
        ],
    );
    assert_ne!(read(d, "a.csv"), read(d, "d.csv"));
}

/// Mean Frobenius distance of a fixed-pair reconstructor, the corrector's loss.
fn pair_loss(
    states: &[qtomo_core::DensityMatrix],
    f: impl Fn(&MeasurementRecord) -> qtomo_core::ComplexMatrix,
) -> f64 {
    states
        .iter()
        .map(|s| {
            let rec = MeasurementRecord::measure(s, &[1, 3]).unwrap();
            let diff = &f(&rec) - s.matrix();
            diff.as_slice()
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / states.len() as f64
}

#[test]
fn train_corrector_resume_and_use() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "1",
            "--count",
            "2000",
            "--seed",
            "3",
            "--out",
            "train.qtds",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--model",
            "corrector_full_m",
            "--data",
            "train.qtds",
            "--subset",
            "1,3",
            "--out",
            "c.ckpt",
        ],
    );
    let log = read(d, "c.ckpt.log.csv");
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch,step,loss,ortho_residual");
    assert_eq!(lines.len(), 11);
    let last: Vec<&str> = lines[10].split(',').collect();
    assert_eq!((last[0], last[1]), ("10", "320"));
    let final_loss: f64 = last[2].parse().unwrap();

    // The analytic pair formula sets the scale of what is learnable here.
    let (_, states) = dataset::load(&path(d, "train.qtds")).unwrap();
    let analytic = pair_loss(&states, |r| {
        analytic_1q((1, 3), [r.outcomes[0], r.outcomes[1]]).unwrap()
    });
    let pinv = pair_loss(&states, |r| pinv_reconstruct(r, 1).unwrap());
    assert!(final_loss < pinv, "{final_loss} vs pinv {pinv}");
    assert!(
        (final_loss - analytic).abs() < 0.1 * analytic,
        "{final_loss} vs analytic {analytic}"
    );

    ok(
        d,
        &[
            "train",
            "--model",
            "corrector_full_m",
            "--data",
            "train.qtds",
            "--resume",
            "c.ckpt",
            "--epochs",
            "2",
            "--out",
            "c2.ckpt",
            "--log",
            "c.ckpt.log.csv",
        ],
    );
    let log = read(d, "c.ckpt.log.csv");
    let tail: Vec<&str> = log.lines().skip(11).collect();
    assert_eq!(tail.len(), 2);
    assert!(tail[0].starts_with("11,352,") && tail[1].starts_with("12,384,"));
    assert!(ok(d, &["inspect", "c2.ckpt"]).contains("train.steps_total = 384"));

    assert_eq!(
        code(
            d,
            &[
                "train",
                "--model",
                "corrector_pi_only",
                "--data",
                "train.qtds",
                "--resume",
                "c.ckpt",
                "--out",
                "x.ckpt"
            ]
        ),
        1
    );
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--model",
                "corrector_full_m",
                "--data",
                "train.qtds",
                "--out",
                "x.ckpt"
            ]
        ),
        1
    );

    ok(
        d,
        &[
            "sweep",
            "--method",
            "corrector,pinv",
            "--data",
            "train.qtds",
            "--m",
            "2",
            "--checkpoint",
            "c.ckpt",
            "--out",
            "s.csv",
        ],
    );
    let results = sweeps_from_csv(&read(d, "s.csv")).unwrap();
    assert_eq!(results[0].method, "corrector_full_m");
    assert!(read(d, "s.csv").contains("# checkpoint=c.ckpt:"));
    assert_eq!(
        code(
            d,
            &[
                "sweep",
                "--method",
                "corrector",
                "--data",
                "train.qtds",
                "--m",
                "3",
                "--checkpoint",
                "c.ckpt",
                "--out",
                "s.csv"
            ]
        ),
        2
    );

    ok(
        d,
        &[
            "errormap",
            "--method",
            "corrector",
            "--data",
            "train.qtds",
            "--subsets",
            "1,3",
            "--checkpoint",
            "c.ckpt",
            "--out",
            "em.csv",
        ],
    );
    let maps = error_maps_from_csv(&read(d, "em.csv")).unwrap();
    assert_eq!(maps.len(), 1);
    assert!(maps[0].values.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn mismatched_qubits_fail_before_training() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "1",
            "--count",
            "50",
            "--out",
            "one.qtds",
        ],
    );
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "2",
            "--count",
            "50",
            "--out",
            "two.qtds",
        ],
    );
    let out = qtomo(
        d,
        &[
            "train",
            "--model",
            "corrector_full_m",
            "--data",
            "two.qtds",
            "--n-qubits",
            "1",
            "--m",
            "2",
            "--out",
            "x.ckpt",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shape mismatch"));
    assert!(!path(d, "x.ckpt").exists());
    ok(
        d,
        &[
            "train",
            "--model",
            "corrector_full_m",
            "--data",
            "one.qtds",
            "--m",
            "2",
            "--epochs",
            "1",
            "--collections",
            "3",
            "--out",
            "one.ckpt",
        ],
    );
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--model",
                "corrector_full_m",
                "--data",
                "two.qtds",
                "--resume",
                "one.ckpt",
                "--out",
                "x.ckpt"
            ]
        ),
        2
    );
    assert!(!path(d, "x.ckpt").exists());
    assert_eq!(
        code(
            d,
            &[
                "sweep",
                "--method",
                "corrector",
                "--data",
                "two.qtds",
                "--checkpoint",
                "one.ckpt",
                "--out",
                "s.csv"
            ]
        ),
        2
    );
}

#[test]
fn lstm_train_sweep_and_psdstats() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "1",
            "--count",
            "64",
            "--seed",
            "2",
            "--out",
            "t.qtds",
        ],
    );
    for model in ["lstm_random", "lstm_predefined", "lstm_custom"] {
        ok(
            d,
            &[
                "train",
                "--model",
                model,
                "--data",
                "t.qtds",
                "--lstm-hidden",
                "8",
                "--episode-len",
                "3",
                "--epochs",
                "1",
                "--batch-size",
                "16",
                "--out",
                "l.ckpt",
            ],
        );
        let log = read(d, "l.ckpt.log.csv");
        assert!(
            log.lines().nth(1).unwrap().starts_with("1,4,")
                && log.lines().nth(1).unwrap().ends_with(',')
        );
        ok(
            d,
            &[
                "sweep",
                "--method",
                "lstm",
                "--data",
                "t.qtds",
                "--m",
                "0-3",
                "--checkpoint",
                "l.ckpt",
                "--out",
                "s.csv",
            ],
        );
        let r = sweeps_from_csv(&read(d, "s.csv")).unwrap();
        assert_eq!(r[0].method, format!("lstm_{}", &model[5..]));
        assert_eq!(r[0].rows.len(), 4);
    }
    assert!(ok(d, &["inspect", "l.ckpt"]).contains("LSTM_CUS"));
    assert_eq!(
        code(
            d,
            &[
                "errormap",
                "--method",
                "lstm",
                "--data",
                "t.qtds",
                "--checkpoint",
                "l.ckpt",
                "--out",
                "e.csv"
            ]
        ),
        2
    );

    ok(
        d,
        &[
            "psdstats",
            "--method",
            "pinv,mle,lstm",
            "--data",
            "t.qtds",
            "--m",
            "1,2",
            "--collections",
            "4",
            "--checkpoint",
            "l.ckpt",
            "--out",
            "p.csv",
        ],
    );
    let text = read(d, "p.csv");
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows[0],
        "method,n_qubits,M,lowest_mean,lowest_std,second_mean,second_std,n_samples,seed"
    );
    assert_eq!(rows.len(), 7);
    let mle_lowest: f64 = rows
        .iter()
        .find(|r| r.starts_with("mle,1,2,"))
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!(mle_lowest >= -1e-9);
}

#[test]
fn errormap_defaults_to_all_single_qubit_pairs() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "1",
            "--count",
            "200",
            "--out",
            "t.qtds",
        ],
    );
    ok(
        d,
        &[
            "errormap", "--method", "pinv", "--data", "t.qtds", "--out", "e.csv",
        ],
    );
    let maps = error_maps_from_csv(&read(d, "e.csv")).unwrap();
    assert_eq!(maps.len(), 6);
    let m12 = maps.iter().find(|m| m.subset == [1, 2]).unwrap();
    assert!(m12.get(0, 0) < 1e-12 && m12.get(0, 1) > 0.1);
    ok(
        d,
        &[
            "gen",
            "--n-qubits",
            "2",
            "--count",
            "20",
            "--out",
            "two.qtds",
        ],
    );
    assert_eq!(
        code(
            d,
            &["errormap", "--method", "pinv", "--data", "two.qtds", "--out", "e.csv"]
        ),
        1
    );
    ok(
        d,
        &[
            "errormap",
            "--method",
            "pinv",
            "--data",
            "two.qtds",
            "--subsets",
            "1,2,3;4,5",
            "--out",
            "e.csv",
        ],
    );
    assert_eq!(error_maps_from_csv(&read(d, "e.csv")).unwrap().len(), 2);
}
