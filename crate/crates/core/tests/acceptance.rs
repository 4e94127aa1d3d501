//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nbesov::norms::Verdict;
use nbesov::verify::{run_experiment, ExperimentId, ExperimentSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn experiment(id: ExperimentId, limit: Duration) -> Outcome {
    match run_experiment(&ExperimentSpec::new(id)) {
        Ok(r) => {
            let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            let in_time = r.runtime < limit;
            let mut detail = format!("{id}: {} checks, verdict {}, {:.2?} (limit {:?})", r.checks.len(), r.verdict, r.runtime, limit);
            if !failed.is_empty() {
                detail.push_str(&format!("; failed: {}", failed.join(" | ")));
            }
            if !r.notes.is_empty() && r.verdict != Verdict::Pass {
                detail.push_str(&format!("; notes: {}", r.notes.join(" | ")));
            }
            Outcome { pass: r.verdict == Verdict::Pass && in_time, detail }
        }
        Err(e) => Outcome { pass: false, detail: format!("{id}: error {e}") },
    }
}

/// Every negative control must make the CLI exit with the failed-verdict
/// code.
fn negative_controls() -> Outcome {
    let out = tempfile::tempdir().expect("temp dir");
    let mut bad = Vec::new();
    for id in ExperimentId::ALL {
        let status = Command::new(env!("CARGO_BIN_EXE_nbesov"))
            .args(["verify", "--negative-control", "--only", id.name(), "--out"])
            .arg(out.path())
            .output()
            .expect("run nbesov");
        let code = status.status.code();
        if code != Some(3) {
            bad.push(format!("{id} exited {code:?}"));
        }
    }
    let detail = if bad.is_empty() {
        format!("all {} controls exit 3 (broken partition, fake low eigenvalue, reversed inequalities, ...)", ExperimentId::ALL.len())
    } else {
        bad.join("; ")
    };
    Outcome { pass: bad.is_empty(), detail }
}

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn main() {
    use ExperimentId::*;
    let s = Duration::from_secs;
    let criteria: Vec<Criterion> = vec![
        ("partition identities", Box::new(move || experiment(Partition, s(1)))),
        ("reconstruction", Box::new(move || experiment(Reconstruction, s(30)))),
        ("projected semigroup decay", Box::new(move || experiment(ProjectedSemigroup, s(1)))),
        ("multiplier scaling", Box::new(move || experiment(MultiplierScaling, s(120)))),
        ("heat Gaussian bound", Box::new(move || experiment(HeatGaussian, s(120)))),
        ("gradient bounds", Box::new(move || experiment(Gradient, s(120)))),
        ("partition independence", Box::new(move || experiment(PartitionIndependence, s(120)))),
        ("fractional Leibniz", Box::new(move || experiment(Leibniz, s(300)))),
        ("amalgam and resolvent slopes", Box::new(move || experiment(Amalgam, s(180)))),
        ("moment decay equivalence", Box::new(move || experiment(MomentDecay, s(60)))),
        ("resolvent Gamma formula", Box::new(move || experiment(ResolventGamma, s(10)))),
        ("negative controls", Box::new(negative_controls)),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!("{} criterion {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria pass ({:.1?})", criteria.len() - failures, criteria.len(), start.elapsed());
    if failures > 0 {
        std::process::exit(1);
    }
}
