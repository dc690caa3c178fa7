//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use binconf::cli::{main_with_args, simulate_online, trajectory_csv, OnlineConfig};
use binconf::eval::{auroc_values, efficiency, mixture, region_distribution, scored_accuracy, validity, BothScoring, RegionCounts};
use binconf::icp::{build_calibration_table, predict_set, region, CalibrationTable};
use binconf::nonconformity::{score_dataset, Measure, TrainingBag};
use binconf::report::parse_report_json;
use binconf::synth::{generate_synthetic, SyntheticSpec};
use binconf::{Label, PredictionRegion, ScorePair, SignificanceLevel};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("binconf").chain(args.iter().copied());
    match main_with_args(argv, &mut out, &mut err) {
        0 => Ok(out),
        code => Err(format!("exit {code}: {}", String::from_utf8_lossy(&err).trim())),
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    check(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))?;
    Ok(elapsed)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let out = run_cli(&[
        "evaluate",
        "--calibration",
        &fixture("figure1.csv"),
        "--positive-class",
        "B",
        "--format",
        "json",
    ])?;
    let elapsed = within_time(start, Duration::from_secs(1))?;
    let report = parse_report_json(&out).map_err(|e| e.to_string())?;
    let auroc = report.calibration.auroc.ok_or("no AUROC")?;
    let accuracy = report.calibration.accuracy.ok_or("no accuracy")?;
    check((auroc - 0.527).abs() <= 0.0005, format!("AUROC {auroc}"))?;
    check((accuracy - 0.524).abs() <= 0.0005, format!("accuracy {accuracy}"))?;
    Ok(format!("AUROC {auroc:.4}, accuracy {accuracy:.4}, {elapsed:?}"))
}

fn criterion_2() -> Outcome {
    let err = |e: binconf::Error| e.to_string();
    let (regions, truths) = mixture(0, 0, 950, 50);
    let v = validity(&regions, &truths).map_err(err)?;
    check(v == 0.95, format!("950 both + 50 empty: validity {v}"))?;

    let (regions, truths) = mixture(0, 0, 100, 0);
    let v = validity(&regions, &truths).map_err(err)?;
    let e = efficiency(&regions).map_err(err)?;
    check(v == 1.0 && e == 0.0, format!("all both: validity {v}, efficiency {e}"))?;

    let (regions, truths) = mixture(36, 10, 50, 4);
    let v = validity(&regions, &truths).map_err(err)?;
    let bc = scored_accuracy(BothScoring::BothCorrect, &regions, &truths).map_err(err)?;
    let bw = scored_accuracy(BothScoring::BothWrong, &regions, &truths).map_err(err)?;
    check(v == 0.86 && bc == 0.86 && bw == 0.36, format!("case 2: validity {v}, both-correct {bc}, both-wrong {bw}"))?;
    Ok("0.95 / 1.0 & 0.0 / 0.86, 0.86, 0.36".into())
}

fn random_regions(rng: &mut ChaCha8Rng, n: usize) -> (Vec<PredictionRegion>, Vec<Label>) {
    let kinds = [
        PredictionRegion::SinglePositive,
        PredictionRegion::SingleNegative,
        PredictionRegion::Both,
        PredictionRegion::Empty,
    ];
    let regions = (0..n).map(|_| kinds[rng.random_range(0..4)]).collect();
    let truths = (0..n).map(|_| Label::BOTH[rng.random_range(0..2)]).collect();
    (regions, truths)
}

/// Identities are checked exactly on the underlying counts (every reported
/// rate is count / n), and on the rates themselves to within one rounding.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..1000 {
        let n = rng.random_range(1..=300);
        let (regions, truths) = random_regions(&mut rng, n);
        let fail = |what: &str| format!("trial {trial} (n {n}): {what}");
        let c = RegionCounts::tally(&regions, &truths).map_err(|e| e.to_string())?;
        let d = region_distribution(&regions, &truths).map_err(|e| e.to_string())?;
        let v = validity(&regions, &truths).map_err(|e| e.to_string())?;
        let e = efficiency(&regions).map_err(|e| e.to_string())?;
        let bc = scored_accuracy(BothScoring::BothCorrect, &regions, &truths).map_err(|e| e.to_string())?;
        let bw = scored_accuracy(BothScoring::BothWrong, &regions, &truths).map_err(|e| e.to_string())?;
        let nf = n as f64;

        let covered = regions.iter().zip(&truths).filter(|(r, t)| r.contains(**t)).count();
        let singles = regions.iter().filter(|r| r.is_singleton()).count();
        check(covered == c.both + c.correct_single, fail("covered count"))?;
        check(singles == c.correct_single + c.false_single, fail("singleton count"))?;
        check(c.total() == n, fail("counts total"))?;

        check(v == covered as f64 / nf, fail("validity rate"))?;
        check(e == singles as f64 / nf, fail("efficiency rate"))?;
        check(bc == (c.correct_single + c.both) as f64 / nf, fail("both-correct rate"))?;
        check(bw == c.correct_single as f64 / nf, fail("both-wrong rate"))?;
        check(d.frac_both == c.both as f64 / nf, fail("frac_both"))?;

        let tol = 4.0 * f64::EPSILON;
        check((v - (d.frac_both + d.frac_correct_single)).abs() <= tol, fail("validity sum"))?;
        check(((bc - bw) - d.frac_both).abs() <= tol, fail("scored accuracy gap"))?;
        check((e - (d.frac_correct_single + d.frac_false_single)).abs() <= tol, fail("efficiency sum"))?;
    }
    Ok("1000 randomized sets".into())
}

fn random_score(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        rng.random_range(0..10) as f64 / 10.0
    } else {
        rng.random::<f64>()
    }
}

fn oracle_p(calibration: &[f64], score: f64) -> f64 {
    let mut at_most = 0;
    for &c in calibration {
        if c <= score {
            at_most += 1;
        }
    }
    (at_most + 1) as f64 / (calibration.len() + 1) as f64
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid: Vec<SignificanceLevel> = (0..=100)
        .map(|i| SignificanceLevel::new(i as f64 / 100.0).unwrap())
        .collect();
    let mut compared = 0;
    for table_id in 0..200 {
        let pos: Vec<f64> = (0..rng.random_range(1..=50)).map(|_| random_score(&mut rng)).collect();
        let neg: Vec<f64> = (0..rng.random_range(1..=50)).map(|_| random_score(&mut rng)).collect();
        let table = CalibrationTable::from_class_scores(pos.clone(), neg.clone()).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let (sp, sn) = (random_score(&mut rng), random_score(&mut rng));
            let scores = ScorePair::conformity(sp, sn).map_err(|e| e.to_string())?;
            let p = table.p_values(&scores);
            check(
                p.pos == oracle_p(&pos, sp) && p.neg == oracle_p(&neg, sn),
                format!("table {table_id}: p-values ({}, {}) differ from oracle", p.pos, p.neg),
            )?;
            compared += 1;
            let regions: Vec<PredictionRegion> = grid.iter().map(|&eps| region(&p, eps)).collect();
            for w in regions.windows(2) {
                check(w[1].is_subset_of(w[0]), format!("table {table_id}: regions not nested"))?;
            }
        }
    }
    Ok(format!("200 tables, {compared} score pairs, 101-point grid"))
}

/// Per-class error bound for each ε, with `n_class` taken as the class's
/// calibration count and, for information, its test count.
fn coverage_seed(seed: u64, eps_values: &[f64]) -> Result<Vec<(bool, bool)>, String> {
    let synth = |n_per_class, offset: u64| {
        generate_synthetic(&SyntheticSpec { n_per_class, dim: 2, separation: 1.5, noise: 1.0, seed: seed * 3 + offset })
    };
    let proper = synth(250, 0).map_err(|e| e.to_string())?;
    let calibration = synth(500, 1).map_err(|e| e.to_string())?;
    let test = synth(1000, 2).map_err(|e| e.to_string())?;
    let measure = Measure::KnnRatio { k: 1 };
    let bag = TrainingBag::from_dataset(&proper).map_err(|e| e.to_string())?;
    let calibration = score_dataset(measure, Some(&bag), &calibration).map_err(|e| e.to_string())?;
    let test = score_dataset(measure, Some(&bag), &test).map_err(|e| e.to_string())?;
    let table = build_calibration_table(&calibration, true).map_err(|e| e.to_string())?;
    let truths = test.labels().map_err(|e| e.to_string())?;

    let mut ok = Vec::new();
    for &eps in eps_values {
        let preds = predict_set(&table, &test, SignificanceLevel::new(eps).unwrap()).map_err(|e| e.to_string())?;
        let bound = |n: f64| eps + 3.0 * (eps * (1.0 - eps) / n).sqrt();
        let (mut by_cal, mut by_test) = (true, true);
        for class in Label::BOTH {
            let members: Vec<_> = preds.iter().zip(&truths).filter(|(_, &t)| t == class).collect();
            let n = members.len() as f64;
            let rate = members.iter().filter(|(p, _)| !p.region.contains(class)).count() as f64 / n;
            by_cal &= rate <= bound(calibration.count_label(class) as f64);
            by_test &= rate <= bound(n);
        }
        ok.push((by_cal, by_test));
    }
    Ok(ok)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let eps_values = [0.1, 0.2];
    let mut passing = [0; 2];
    let mut passing_test_n = [0; 2];
    for seed in 0..20 {
        for (slot, (by_cal, by_test)) in coverage_seed(seed, &eps_values)?.into_iter().enumerate() {
            passing[slot] += by_cal as usize;
            passing_test_n[slot] += by_test as usize;
        }
    }
    let elapsed = within_time(start, Duration::from_secs(60))?;
    let summary = format!(
        "seeds within bound: eps 0.1 {}/20, eps 0.2 {}/20; with test-set class counts {}/20, {}/20",
        passing[0], passing[1], passing_test_n[0], passing_test_n[1]
    );
    check(passing.iter().all(|&p| p >= 19), summary.clone())?;
    Ok(format!("{summary}, {elapsed:?}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let eps = 0.2;
    let config = OnlineConfig { initial: 10, k: 1, epsilon: SignificanceLevel::new(eps).unwrap() };
    let mut finals = Vec::new();
    for seed in 0..20 {
        let data = generate_synthetic(&SyntheticSpec { n_per_class: 255, dim: 2, separation: 1.5, noise: 1.0, seed })
            .map_err(|e| e.to_string())?;
        let trajectory = simulate_online(&data, &config).map_err(|e| e.to_string())?;
        check(trajectory.len() == 500, format!("seed {seed}: {} rounds", trajectory.len()))?;
        finals.push(trajectory.last().unwrap().cumulative_error_rate);
    }
    let elapsed = within_time(start, Duration::from_secs(120))?;
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let bound = eps + 3.0 * (eps * (1.0 - eps) / 500.0).sqrt();
    check(mean <= bound, format!("mean final error {mean} > {bound}"))?;
    Ok(format!("mean final error {mean:.4} <= {bound:.4}, {elapsed:?}"))
}

fn brute_force_auroc(values: &[f64], truths: &[Label]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0usize;
    for (i, &vp) in values.iter().enumerate() {
        if truths[i] != Label::Positive {
            continue;
        }
        for (j, &vn) in values.iter().enumerate() {
            if truths[j] != Label::Negative {
                continue;
            }
            pairs += 1;
            if vp > vn {
                credit += 1.0;
            } else if vp == vn {
                credit += 0.5;
            }
        }
    }
    credit / pairs as f64
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut instances: Vec<(Vec<f64>, Vec<Label>)> = vec![
        (vec![0.3, 0.3], vec![Label::Positive, Label::Negative]),
        (vec![0.9, 0.1], vec![Label::Positive, Label::Negative]),
        (vec![0.1, 0.9], vec![Label::Positive, Label::Negative]),
        (vec![0.5; 200], (0..200).map(|i| Label::BOTH[i % 2]).collect()),
    ];
    while instances.len() < 500 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..=20);
        let mut truths: Vec<Label> = (0..n).map(|_| Label::BOTH[rng.random_range(0..2)]).collect();
        truths[0] = Label::Positive;
        truths[1] = Label::Negative;
        let values = (0..n)
            .map(|_| if rng.random_bool(0.5) { rng.random_range(0..levels) as f64 } else { rng.random::<f64>() })
            .collect();
        instances.push((values, truths));
    }
    for (i, (values, truths)) in instances.iter().enumerate() {
        let ranked = auroc_values(values, truths).map_err(|e| e.to_string())?;
        let brute = brute_force_auroc(values, truths);
        check(ranked == brute, format!("instance {i}: rank {ranked} vs pairs {brute}"))?;
    }
    Ok("500 instances incl. all-tied and single-pair".into())
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.csv");
    let test = dir.path().join("test.csv");
    run_cli(&["synth", "--n-per-class", "80", "--seed", "11", "--out", data.to_str().unwrap()])?;
    run_cli(&["synth", "--n-per-class", "40", "--seed", "12", "--out", test.to_str().unwrap()])?;
    let evaluate = [
        "evaluate", "--data", data.to_str().unwrap(), "--test", test.to_str().unwrap(), "--positive-class",
        "positive", "--measure", "knn-ratio", "--stratified", "--seed", "5", "--epsilon", "0.05,0.1,0.2", "--format",
        "json",
    ];
    let first = run_cli(&evaluate)?;
    check(first == run_cli(&evaluate)?, "JSON reports differ between runs")?;

    let online = ["simulate-online", "--n-per-class", "60", "--seed", "13", "--epsilon", "0.2"];
    let a = run_cli(&online)?;
    check(a == run_cli(&online)?, "trajectory CSVs differ between runs")?;

    let dataset = generate_synthetic(&SyntheticSpec { n_per_class: 30, dim: 3, separation: 1.0, noise: 1.0, seed: 2 })
        .map_err(|e| e.to_string())?;
    let config = OnlineConfig { initial: 5, k: 2, epsilon: SignificanceLevel::new(0.1).unwrap() };
    let t1 = trajectory_csv(&simulate_online(&dataset, &config).map_err(|e| e.to_string())?);
    let t2 = trajectory_csv(&simulate_online(&dataset, &config).map_err(|e| e.to_string())?);
    check(t1 == t2, "library trajectories differ between runs")?;
    Ok(format!("{} report bytes, {} trajectory bytes identical", first.len(), a.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("fixture calibration AUROC and accuracy", criterion_1),
        ("validity arithmetic", criterion_2),
        ("decomposition identities", criterion_3),
        ("p-values against oracle, nestedness", criterion_4),
        ("Mondrian per-class coverage", criterion_5),
        ("on-line validity", criterion_6),
        ("AUROC against all-pairs oracle", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("[PASS] criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failures += 1;
                println!("[FAIL] criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
