//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! and then asserts. Seeds are fixed, so every run sees the same numbers.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::path::Path;
use std::process::Command;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use theta_framework::experiments::{
    geometric_sweep, run_accuracy_profile, run_comparative_variance, run_estimator_trials,
    run_per_item_covariance, Estimator, StreamOrder, StreamSpec,
};
use theta_framework::goodness::{
    check_one_goodness, one_goodness_instances, two_goodness_instance, Subcondition, ThresholdFn,
};
use theta_framework::io::{deserialize_sketch, serialize_sketch, write_stream};
use theta_framework::oracles::{
    alpha_estimator_variance, g_closed, hip_mean_var, kmv_subpop_variance, kmv_variance,
    LevelDistributions,
};
use theta_framework::tcf::sample_below;
use theta_framework::{
    hash_identifier, sketch_stream, theta_intersect, theta_union, HashSeed, Predicate,
    SamplerConfig, SamplerKind, Tcf, ThetaSketch,
};

/// Writes to the stderr handle directly so the line survives the test
/// harness's output capture.
fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let line = format!("criterion {id:>2} {verdict} {name}: {detail}\n");
    std::io::Write::write_all(&mut std::io::stderr(), line.as_bytes()).unwrap();
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn ids(range: std::ops::Range<usize>) -> Vec<String> {
    range.map(|i| i.to_string()).collect()
}

#[test]
fn c01_kmv_unbiased_with_known_variance() {
    let cfg = SamplerConfig::kmv(128, HashSeed(101)).with_ids(true);
    let s = run_estimator_trials(
        &cfg,
        &StreamSpec::single(4096),
        &Predicate::All,
        Estimator::Framework,
        20_000,
    )
    .unwrap();
    let want = kmv_variance(128, 4096).unwrap();
    let z = s.z_score();
    let dv = rel_err(s.sample_variance, want);
    report(
        1,
        "KMV mean and variance",
        z.abs() <= 4.0 && dv <= 0.08,
        &format!(
            "mean {:.2} (z {z:.2}), variance {:.1} vs {want:.1} ({:+.2}%)",
            s.mean,
            s.sample_variance,
            100.0 * (s.sample_variance / want - 1.0)
        ),
    );
}

#[test]
fn c02_kmv_subpopulation() {
    let cfg = SamplerConfig::kmv(128, HashSeed(101)).with_ids(true);
    let members: Vec<String> = (0..4096).step_by(10).map(|i: usize| i.to_string()).collect();
    assert_eq!(members.len(), 410);
    let s = run_estimator_trials(
        &cfg,
        &StreamSpec::single(4096),
        &Predicate::member_set(&members),
        Estimator::Framework,
        20_000,
    )
    .unwrap();
    assert_eq!(s.truth, 410.0);
    let want = kmv_subpop_variance(128, 4096, 410).unwrap();
    let z = s.z_score();
    let dv = rel_err(s.sample_variance, want);
    report(
        2,
        "KMV subpopulation",
        z.abs() <= 4.0 && dv <= 0.10,
        &format!(
            "mean {:.3} (z {z:.2}), variance {:.1} vs {want:.1} ({:+.2}%)",
            s.mean,
            s.sample_variance,
            100.0 * (s.sample_variance / want - 1.0)
        ),
    );
}

#[test]
fn c03_alpha_framework_estimator() {
    let cfg = SamplerConfig::alpha(128, HashSeed(103));
    let spec = StreamSpec::single(4096).with_order(StreamOrder::Shuffled);
    let est = run_estimator_trials(&cfg, &spec, &Predicate::All, Estimator::Framework, 20_000)
        .unwrap();
    let size = run_estimator_trials(&cfg, &spec, &Predicate::All, Estimator::SampleSize, 20_000)
        .unwrap();
    let want = alpha_estimator_variance(128, 4096).unwrap();
    let dv = rel_err(est.sample_variance, want);
    report(
        3,
        "Alpha sketch estimator",
        est.z_score().abs() <= 4.0 && dv <= 0.10 && size.z_score().abs() <= 4.0,
        &format!(
            "mean {:.2} (z {:.2}), variance {:.1} vs {want:.1} ({:+.2}%), mean |S| {:.3} (z {:.2})",
            est.mean,
            est.z_score(),
            est.sample_variance,
            100.0 * (est.sample_variance / want - 1.0),
            size.mean,
            size.z_score()
        ),
    );
}

#[test]
fn c04_alpha_hip_estimator() {
    let cfg = SamplerConfig::alpha(128, HashSeed(104));
    let spec = StreamSpec::single(4096).with_order(StreamOrder::Shuffled);
    let s = run_estimator_trials(&cfg, &spec, &Predicate::All, Estimator::Hip, 20_000).unwrap();
    let (_, want) = hip_mean_var(128, 4096).unwrap();
    let dv = rel_err(s.sample_variance, want);
    report(
        4,
        "Alpha HIP estimator",
        s.z_score().abs() <= 4.0 && dv <= 0.10,
        &format!(
            "mean {:.2} (z {:.2}), variance {:.1} vs {want:.1} ({:+.2}%)",
            s.mean,
            s.z_score(),
            s.sample_variance,
            100.0 * (s.sample_variance / want - 1.0)
        ),
    );
}

#[test]
fn c05_level_distribution_oracle() {
    let mut worst_sum = 0.0f64;
    let mut worst_g = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut worst_mean = 0.0f64;
    let mut variance_ok = true;
    let mut rows = 0;
    for k in 1..=64usize {
        for dist in LevelDistributions::new(k, 512).unwrap() {
            rows += 1;
            let u = dist.u();
            worst_sum = worst_sum.max((dist.probs().iter().sum::<f64>() - 1.0).abs());
            for q in 0..=2 {
                let dp = dist.g(q);
                worst_g = worst_g.max(rel_err(dp, g_closed(q, k, u).unwrap()));
            }
            let (kf, uf) = (k as f64, u as f64);
            let lhs = kf * kf * dist.g(2) - (kf + uf) * (kf + uf);
            let rhs = uf * (uf - 1.0) / (2.0 * kf);
            worst_identity = worst_identity.max((lhs - rhs).abs() / rhs.max(1.0));
            let (mean, var) = dist.sample_size_moments();
            worst_mean = worst_mean.max((mean - kf).abs());
            variance_ok &= var < kf / 2.0 + 0.25;
        }
    }
    report(
        5,
        "exact level distribution",
        worst_sum <= 1e-12 && worst_g <= 1e-9 && worst_identity <= 1e-9 && worst_mean <= 1e-9
            && variance_ok,
        &format!(
            "{rows} rows; max |sum-1| {worst_sum:.1e}, g rel {worst_g:.1e}, \
             identity rel {worst_identity:.1e}, |E|S|-k| {worst_mean:.1e}, Var|S| < k/2+1/4: {variance_ok}"
        ),
    );
}

/// Minimum of member thresholds over contiguous, possibly overlapping, parts
/// of the stream.
type Slice = fn(usize) -> std::ops::Range<usize>;

struct SlicedUnion(Vec<(Tcf, Slice)>);

impl ThresholdFn for SlicedUnion {
    fn threshold(&self, k: usize, stream: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(tcf, part)| tcf.threshold(k, &stream[part(stream.len())]))
            .fold(1.0, f64::min)
    }
}

#[test]
fn c06_goodness_suite() {
    const GRID: usize = 4096;
    const SEEDS: u64 = 20;
    const MAX_LEN: usize = 8;
    let rules: Vec<(&str, Box<dyn ThresholdFn>)> = vec![
        ("kmv", Box::new(Tcf::Kmv)),
        ("adaptive", Box::new(Tcf::Adaptive { beta: 0.5 })),
        ("pkmv", Box::new(Tcf::Pkmv { p: 0.3 })),
        ("fixed", Box::new(Tcf::Fixed { p: 0.3 })),
        ("alpha", Box::new(Tcf::Alpha)),
        (
            "union(kmv, alpha)",
            Box::new(SlicedUnion(vec![
                (Tcf::Kmv, |n| 0..2 * n / 3),
                (Tcf::Alpha, |n| n / 3..n),
            ])),
        ),
        (
            "union(adaptive, pkmv, fixed)",
            Box::new(SlicedUnion(vec![
                (Tcf::Adaptive { beta: 0.7 }, |n| 0..n / 2),
                (Tcf::Pkmv { p: 0.5 }, |n| n / 2..n),
                (Tcf::Fixed { p: 0.6 }, |n| 0..n),
            ])),
        ),
    ];
    let mut failures = Vec::new();
    let (mut one, mut two) = (0, 0);
    for (name, rule) in &rules {
        for seed in 0..SEEDS {
            for k in 1..=5 {
                for row in one_goodness_instances(rule.as_ref(), k, seed, MAX_LEN, GRID) {
                    one += 1;
                    if !row.report.satisfied {
                        failures.push(format!("{name} 1-good {row:?}"));
                    }
                }
            }
            let k = 1 + (seed as usize % 5);
            let row = two_goodness_instance(rule.as_ref(), k, seed, MAX_LEN, GRID);
            two += 1;
            if !row.report.satisfied {
                failures.push(format!("{name} 2-good {row:?}"));
            }
        }
    }
    let biased = check_one_goodness(&Tcf::Biased, 3, &[0.1, 0.2, 0.4, 0.7], 4, GRID);
    let caught = biased.counterexample.is_some_and(|c| {
        c.subcondition == Subcondition::B && c.x > 8.0 / 30.0 && c.x < 0.4
    });
    report(
        6,
        "goodness grid checks",
        failures.is_empty() && !biased.satisfied && caught,
        &format!(
            "{} rules, {one} univariate and {two} bivariate projections, {} failures; \
             biased rule counterexample {:?}",
            rules.len(),
            failures.len(),
            biased.counterexample
        ),
    );
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn c07_union_beats_concatenation() {
    const TRIALS: usize = 20_000;
    let disjoint = StreamSpec::disjoint(vec![1000; 4]).with_order(StreamOrder::Shuffled);
    let overlap = StreamSpec::overlapping(vec![1000; 4], 500).with_order(StreamOrder::Shuffled);
    let base = HashSeed(107);
    let configs = [
        SamplerConfig::kmv(64, base),
        SamplerConfig::new(SamplerKind::Adaptive, 64, base).with_beta(0.5),
        SamplerConfig::new(SamplerKind::Pkmv, 64, base).with_p(0.5),
    ];
    let mut cases: Vec<(SamplerConfig, &StreamSpec, bool)> = Vec::new();
    for cfg in &configs {
        cases.push((cfg.clone(), &disjoint, true));
        cases.push((cfg.clone(), &overlap, true));
    }
    cases.push((SamplerConfig::alpha(64, base), &disjoint, true));
    cases.push((SamplerConfig::alpha(64, base), &overlap, false));

    let mut ok = true;
    let mut lines = Vec::new();
    for (cfg, spec, asserted) in cases {
        let rec = run_comparative_variance(&cfg, spec, &Predicate::All, TRIALS).unwrap();
        let pass = rec.union.sample_variance <= 1.05 * rec.concat.sample_variance;
        if asserted {
            ok &= pass;
        }
        lines.push(format!(
            "{}/{} {:.4}{}",
            cfg.kind.name(),
            spec.layout_name(),
            rec.ratio(),
            if asserted { "" } else { " (report only)" }
        ));
    }
    report(7, "union variance vs concatenation", ok, &format!("var ratios: {}", lines.join(", ")));
}

#[test]
fn c08_intersection_equals_union_subpopulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let kinds = SamplerKind::ALL_UNBIASED;
    let mut mismatches = 0;
    let mut nontrivial = 0;
    for _ in 0..1000 {
        let seed = HashSeed(rng.random());
        let mut cfg = || {
            let kind = kinds[rng.random_range(0..kinds.len())];
            SamplerConfig::new(kind, rng.random_range(2..=64), seed)
                .with_beta(rng.random_range(0.3..0.9))
                .with_p(rng.random_range(0.2..=1.0))
                .with_ids(true)
        };
        let (c1, c2) = (cfg(), cfg());
        let size_a = rng.random_range(0..=2000);
        let size_b = rng.random_range(0..=2000);
        let shared = rng.random_range(0..=size_a.min(size_b));
        let a = ids(0..size_a);
        let b = ids(size_a - shared..size_a - shared + size_b);
        let sk1 = sketch_stream(c1, &a).unwrap();
        let sk2 = sketch_stream(c2, &b).unwrap();
        let both = Predicate::member_set(&a[size_a - shared..]);
        let inter = theta_intersect([&sk1, &sk2]).unwrap().estimate();
        let via_union = theta_union([&sk1, &sk2])
            .unwrap()
            .estimate_subpopulation(&both)
            .unwrap();
        if inter.to_bits() != via_union.to_bits() {
            mismatches += 1;
        }
        nontrivial += usize::from(inter > 0.0);
    }
    report(
        8,
        "intersection identity",
        mismatches == 0,
        &format!("1000 trials ({nontrivial} with non-zero estimate), {mismatches} bitwise mismatches"),
    );
}

#[test]
fn c09_per_item_covariance() {
    let mut ok = true;
    let mut lines = Vec::new();
    for cfg in [SamplerConfig::kmv(32, HashSeed(109)), SamplerConfig::alpha(32, HashSeed(109))] {
        let rec = run_per_item_covariance(&cfg, 500, (7, 411), 100_000).unwrap();
        let cov_z = rec.covariance.covariance / rec.covariance.stderr;
        ok &= cov_z.abs() <= 4.0 && rec.first.z_score().abs() <= 4.0 && rec.second.z_score().abs() <= 4.0;
        lines.push(format!(
            "{}: cov {:.3e} (z {cov_z:.2}), means {:.4} (z {:.2}) and {:.4} (z {:.2})",
            cfg.kind.name(),
            rec.covariance.covariance,
            rec.first.mean,
            rec.first.z_score(),
            rec.second.mean,
            rec.second.z_score()
        ));
    }
    report(9, "per-item covariance", ok, &lines.join("; "));
}

#[test]
fn c10_adaptive_oscillates_alpha_does_not() {
    let k = 128;
    let sweep = geometric_sweep(8 * k, 128 * k, 8).unwrap();
    let configs = [
        SamplerConfig::new(SamplerKind::Adaptive, k, HashSeed(110)).with_beta(0.5),
        SamplerConfig::alpha(k, HashSeed(110)),
    ];
    let rows = run_accuracy_profile(&configs, &sweep, 5000).unwrap();
    let spread = |kind: SamplerKind| {
        let r: Vec<f64> = rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.stats.rmse_over_truth)
            .collect();
        let max = r.iter().copied().fold(f64::MIN, f64::max);
        let min = r.iter().copied().fold(f64::MAX, f64::min);
        max / min
    };
    let adaptive: Vec<f64> = rows
        .iter()
        .filter(|r| r.kind == SamplerKind::Adaptive)
        .map(|r| r.stats.sample_variance / ((r.n * r.n) as f64 / (k - 1) as f64))
        .collect();
    let mean_norm = adaptive.iter().sum::<f64>() / adaptive.len() as f64;
    let (ad, al) = (spread(SamplerKind::Adaptive), spread(SamplerKind::Alpha));
    report(
        10,
        "accuracy profiles",
        (1.1..=1.8).contains(&mean_norm) && ad >= 1.1 && al <= 1.1,
        &format!(
            "{} lengths in [{}, {}]; adaptive mean variance {mean_norm:.3} n^2/(k-1), \
             rmse max/min {ad:.3}; alpha rmse max/min {al:.3}",
            sweep.len(),
            sweep[0],
            sweep[sweep.len() - 1]
        ),
    );
}

fn reference_sketch(cfg: &SamplerConfig, stream: &[String]) -> (u64, Vec<u64>) {
    let hashes: Vec<_> = stream
        .iter()
        .map(|id| hash_identifier(id.as_bytes(), cfg.seed))
        .collect();
    let theta = cfg.tcf().threshold(cfg.k, &hashes);
    let sample = sample_below(&hashes, theta).iter().map(|h| h.raw()).collect();
    (theta.to_bits(), sample)
}

fn theta(args: &[&std::ffi::OsStr]) {
    let status = Command::new(env!("CARGO_BIN_EXE_theta"))
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "theta {args:?} failed");
}

/// Sketches built and merged by the binary must match the library's bytes.
fn out_of_process_round(dir: &Path, rng: &mut ChaCha8Rng, round: usize) -> bool {
    let seed: u64 = rng.random();
    let kinds = SamplerKind::ALL_UNBIASED;
    let mut in_process: Vec<ThetaSketch> = Vec::new();
    let mut files = Vec::new();
    for j in 0..3 {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let k = rng.random_range(1..=40);
        let start = rng.random_range(0..500);
        let stream = ids(start..start + rng.random_range(0..700));
        let input = dir.join(format!("r{round}s{j}.txt"));
        write_stream(std::fs::File::create(&input).unwrap(), &stream).unwrap();
        let output = dir.join(format!("r{round}s{j}.sk"));
        theta(&[
            "sketch".as_ref(),
            "build".as_ref(),
            "--tcf".as_ref(),
            kind.name().as_ref(),
            "--k".as_ref(),
            k.to_string().as_ref(),
            "--p".as_ref(),
            "0.6".as_ref(),
            "--seed".as_ref(),
            seed.to_string().as_ref(),
            "--ids".as_ref(),
            "-i".as_ref(),
            input.as_os_str(),
            "-o".as_ref(),
            output.as_os_str(),
        ]);
        let cfg = SamplerConfig::new(kind, k, HashSeed(seed)).with_p(0.6).with_ids(true);
        let local = sketch_stream(cfg, &stream).unwrap();
        if std::fs::read(&output).unwrap() != serialize_sketch(&local) {
            return false;
        }
        in_process.push(local);
        files.push(output);
    }
    let merged = dir.join(format!("r{round}u.sk"));
    let mut args: Vec<&std::ffi::OsStr> = vec!["sketch".as_ref(), "union".as_ref()];
    args.extend(files.iter().map(|f| f.as_os_str()));
    args.extend(["-o".as_ref(), merged.as_os_str()]);
    theta(&args);
    std::fs::read(&merged).unwrap() == serialize_sketch(&theta_union(&in_process).unwrap())
}

#[test]
fn c11_streaming_matches_reference_and_files_round_trip() {
    const STREAMS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let kinds = [
        SamplerKind::Kmv,
        SamplerKind::Adaptive,
        SamplerKind::Pkmv,
        SamplerKind::Fixed,
        SamplerKind::Alpha,
        SamplerKind::Biased,
    ];
    let mut stream_mismatch = 0;
    let mut round_trip_mismatch = 0;
    for kind in kinds {
        for i in 0..STREAMS {
            let len = rng.random_range(0..=300);
            let universe = rng.random_range(1..=400);
            let stream: Vec<String> = (0..len)
                .map(|_| rng.random_range(0..universe).to_string())
                .collect();
            let cfg = SamplerConfig::new(kind, rng.random_range(1..=20), HashSeed(rng.random()))
                .with_beta(rng.random_range(0.3..0.9))
                .with_p(rng.random_range(0.05..=1.0))
                .with_ids(i % 2 == 0)
                .with_purge(i % 3 == 0);
            let sk = sketch_stream(cfg.clone(), &stream).unwrap();
            let got: Vec<u64> = sk.entries().iter().map(|e| e.hash.raw()).collect();
            if (sk.theta().to_bits(), got) != reference_sketch(&cfg, &stream) {
                stream_mismatch += 1;
            }
            let bytes = serialize_sketch(&sk);
            match deserialize_sketch(&bytes) {
                Ok(back) if back == sk && serialize_sketch(&back) == bytes => {}
                _ => round_trip_mismatch += 1,
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let rounds = 20;
    let process_ok = (0..rounds)
        .filter(|&r| out_of_process_round(dir.path(), &mut rng, r))
        .count();
    report(
        11,
        "streaming equivalence and files",
        stream_mismatch == 0 && round_trip_mismatch == 0 && process_ok == rounds,
        &format!(
            "{} kinds x {STREAMS} streams: {stream_mismatch} sampler/reference mismatches, \
             {round_trip_mismatch} round-trip mismatches; {process_ok}/{rounds} out-of-process \
             build+union rounds byte-identical",
            kinds.len()
        ),
    );
}
