//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 6 and 9 execute the full default experiments through the binary,
//! so this target takes several minutes.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use umaxent::experiment::{
    check_dual_gradient, check_em_guarantees, check_forward_backward, check_identity_reduction, check_infinite_data,
    check_irl_self_consistency, check_maxent_inversion, check_partition_reduction, unregularized_irl, Check,
};

const SEED: u64 = 0;

fn umaxent(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_umaxent"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn from_checks(checks: &[Check], limit: Option<Duration>, took: Duration) -> (bool, String) {
    let mut passed = checks.iter().all(|c| c.passed);
    let mut detail: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if let Some(limit) = limit {
        if took > limit {
            passed = false;
            detail.push(format!("runtime {took:.1?} over {limit:?}"));
        }
    }
    (passed, detail.join("; "))
}

/// Runs a default experiment with `--strict` and reports its printed verdict lines.
fn default_experiment(name: &str) -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = umaxent(dir.path(), &["--experiment", name, "--seed", "0", "--strict"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL "))
        .collect();
    let passed = out.status.success() && text.contains("verdict: PASS");
    if lines.is_empty() {
        return (passed, String::from_utf8_lossy(&out.stderr).trim().to_string());
    }
    (passed, lines.join("; "))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> (bool, String) {
    let runs: [&[&str]; 3] = [
        &[
            "--experiment",
            "figure1",
            "--trials",
            "4",
            "--grid",
            "10,100,1000",
            "--seed",
            "11",
        ],
        &[
            "--experiment",
            "fugitive",
            "--trials",
            "2",
            "--grid",
            "1,4",
            "--seed",
            "11",
        ],
        &["--experiment", "properties", "--instances", "10", "--seed", "11"],
    ];
    let mut passed = true;
    let mut detail = Vec::new();
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = umaxent(a.path(), args);
        let mut again = args.to_vec();
        again.extend(["--workers", "1"]);
        let second = umaxent(b.path(), &again);
        let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
        let same = first.status.success() && second.status.success() && !fa.is_empty() && fa == fb;
        passed &= same;
        detail.push(format!(
            "{} {} files {}",
            args[1],
            fa.len(),
            if same { "identical" } else { "differ" }
        ));
    }
    (passed, detail.join(", "))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Box<dyn Fn() -> (bool, String)>);
    let criteria: Vec<Criterion> = vec![
        (
            "dual-gradient correctness",
            Box::new(|| {
                let t = Instant::now();
                let c = check_dual_gradient(100, SEED, 0.0);
                from_checks(&[c], Some(Duration::from_secs(10)), t.elapsed())
            }),
        ),
        (
            "maxent inversion",
            Box::new(|| {
                let t = Instant::now();
                let c = check_maxent_inversion(50, SEED);
                from_checks(&[c], Some(Duration::from_secs(30)), t.elapsed())
            }),
        ),
        (
            "reduction suite",
            Box::new(|| {
                let cs = [check_identity_reduction(50, SEED), check_partition_reduction(50, SEED)];
                from_checks(&cs, None, Duration::ZERO)
            }),
        ),
        (
            "EM guarantees",
            Box::new(|| from_checks(&[check_em_guarantees(50, SEED)], None, Duration::ZERO)),
        ),
        (
            "infinite-data consistency",
            Box::new(|| from_checks(&[check_infinite_data(100, SEED)], None, Duration::ZERO)),
        ),
        (
            "random-program KLD ordering",
            Box::new(|| {
                let t = Instant::now();
                let (ok, detail) = default_experiment("figure1");
                (
                    ok && t.elapsed() < Duration::from_secs(15 * 60),
                    format!("{detail}; {:.1?}", t.elapsed()),
                )
            }),
        ),
        (
            "forward-backward oracle",
            Box::new(|| {
                let t = Instant::now();
                let c = check_forward_backward(200, SEED);
                from_checks(&[c], Some(Duration::from_secs(60)), t.elapsed())
            }),
        ),
        (
            "IRL self-consistency",
            Box::new(|| {
                from_checks(
                    &[check_irl_self_consistency(10_000, SEED, &unregularized_irl())],
                    None,
                    Duration::ZERO,
                )
            }),
        ),
        (
            "fugitive ILE ordering",
            Box::new(|| {
                let t = Instant::now();
                let (ok, detail) = default_experiment("fugitive");
                (
                    ok && t.elapsed() < Duration::from_secs(30 * 60),
                    format!("{detail}; {:.1?}", t.elapsed()),
                )
            }),
        ),
        ("determinism", Box::new(determinism)),
    ];

    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (passed, detail) = run();
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {}: {name} ({detail})",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
