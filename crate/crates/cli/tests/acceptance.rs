//! Acceptance checks. One line per criterion; exits nonzero if any fails.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use jitflow_core::corpus::{self, project_stats, total_stats};
use jitflow_core::learner::logistic::{mean_gradient, mean_loss};
use jitflow_core::learner::{FeatureEncoder, LogisticLearner, Optimizer};
use jitflow_core::llmbridge::INSTRUCTION;
use jitflow_core::localization::{effort_at, ifa, recall_at, top_k, top_k_legacy, LegacyTopK};
use jitflow_core::stream::{build_timeline, EventKind, StreamState};
use jitflow_core::synth::{generate, shifted_copy, SynthConfig};
use jitflow_core::{
    run, Commit, CommitRanking, FusedExample, LatencyConfig, LearnerHandle, OrbConfig, PoolLabel,
    PrequentialState, RankedLine, RunConfig, RunMode, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

// ---------------------------------------------------------------- 1

/// Published per-project counts: (project, defect-inducing, clean).
const DATASET_COUNTS: [(&str, usize, usize); 21] = [
    ("ant-ivy", 332, 1439),
    ("commons-bcel", 60, 765),
    ("commons-beanutils", 37, 574),
    ("commons-codec", 36, 725),
    ("commons-collections", 50, 1773),
    ("commons-compress", 178, 1452),
    ("commons-configuration", 155, 1683),
    ("commons-dbcp", 58, 979),
    ("commons-digester", 19, 1060),
    ("commons-io", 73, 1069),
    ("commons-jcs", 88, 743),
    ("commons-lang", 146, 2823),
    ("commons-math", 335, 3691),
    ("commons-net", 117, 1004),
    ("commons-scxml", 47, 497),
    ("commons-validator", 36, 562),
    ("commons-vfs", 114, 996),
    ("giraph", 163, 681),
    ("gora", 39, 514),
    ("opennlp", 91, 995),
    ("parquet-mr", 158, 962),
];

/// Reads `JIT_DEFECTS4J_CORPUS` (canonical JSONL, or metrics CSV with
/// optional `JIT_DEFECTS4J_DIFFS`).
fn public_corpus() -> Option<Result<Vec<Commit>, String>> {
    let path = PathBuf::from(std::env::var_os("JIT_DEFECTS4J_CORPUS")?);
    let load = || -> Result<Vec<Commit>, String> {
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let ingested = if is_csv {
            let features = File::open(&path).map_err(|e| e.to_string())?;
            let diffs = match std::env::var_os("JIT_DEFECTS4J_DIFFS") {
                Some(d) => Some(File::open(d).map_err(|e| e.to_string())?),
                None => None,
            };
            corpus::raw::convert(features, diffs)
        } else {
            corpus::ingest(&path)
        };
        ingested.map(|i| i.commits).map_err(|e| e.to_string())
    };
    Some(load())
}

fn dataset_fidelity() -> Outcome {
    let start = Instant::now();
    let commits = match public_corpus() {
        None => return Err("public corpus unavailable (set JIT_DEFECTS4J_CORPUS)".into()),
        Some(c) => c?,
    };
    let stats = project_stats(&commits);
    let got: BTreeMap<&str, (usize, usize)> = stats
        .iter()
        .map(|s| (s.project.as_str(), (s.defect_inducing_count, s.clean_count)))
        .collect();
    for (p, d, c) in DATASET_COUNTS {
        check(got.get(p) == Some(&(d, c)), || {
            format!("{p}: expected {d}/{c}, got {:?}", got.get(p))
        })?;
    }
    check(got.len() == DATASET_COUNTS.len(), || {
        format!("{} projects, expected {}", got.len(), DATASET_COUNTS.len())
    })?;
    let all = total_stats(&stats);
    check(
        (all.defect_inducing_count, all.clean_count) == (2332, 24987),
        || format!("ALL {}/{}", all.defect_inducing_count, all.clean_count),
    )?;
    check((all.ratio * 100.0 - 8.54).abs() <= 0.01, || {
        format!("ratio {:.4}%", all.ratio * 100.0)
    })?;
    within(start.elapsed(), 60)?;
    Ok(format!(
        "ALL {}/{} {:.2}%",
        all.defect_inducing_count,
        all.clean_count,
        all.ratio * 100.0
    ))
}

// ---------------------------------------------------------------- 2

fn random_ranking(rng: &mut ChaCha8Rng, id: usize) -> (CommitRanking, Vec<bool>, usize) {
    let n = rng.random_range(1..=50usize);
    let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.25)).collect();
    let unranked_total = rng.random_range(0..=10usize);
    let unranked_defective = rng.random_range(0..=unranked_total);
    let lines = flags
        .iter()
        .enumerate()
        .map(|(i, &d)| RankedLine {
            file: None,
            line_number: i as u32 + 1,
            content: String::new(),
            // distinct descending scores keep the generated order
            score: (n - i) as f64,
            source_rank: i,
            is_defective: d,
        })
        .collect();
    let defective = flags.iter().filter(|&&d| d).count() + unranked_defective;
    let total = n + unranked_total;
    (
        CommitRanking::new(format!("r{id}"), lines, total, defective),
        flags,
        total,
    )
}

/// Walks the list with integer arithmetic only; the 20% cut-offs are `ceil(x / 5)`.
fn brute(
    flags: &[bool],
    total_defective: usize,
    total_lines: usize,
) -> (usize, f64, f64, usize, [u8; 2], [f64; 2]) {
    let n = flags.len();
    let k = n.div_ceil(5);
    let mut found = 0;
    for &f in flags.iter().take(k) {
        if f {
            found += 1;
        }
    }
    let recall = found as f64 / total_defective as f64;
    let target = total_defective.div_ceil(5).max(1);
    let mut seen = 0;
    let mut inspected = n;
    for (i, &f) in flags.iter().enumerate() {
        if f {
            seen += 1;
            if seen == target {
                inspected = i + 1;
                break;
            }
        }
    }
    let effort = inspected as f64 / n as f64;
    let mut clean_before = 0;
    for &f in flags {
        if f {
            break;
        }
        clean_before += 1;
    }
    let mut top = [0u8; 2];
    let mut legacy = [0.0; 2];
    for (slot, k) in [5usize, 10].into_iter().enumerate() {
        let mut hits = 0;
        for &f in flags.iter().take(k) {
            if f {
                hits += 1;
            }
        }
        top[slot] = u8::from(hits > 0);
        legacy[slot] = hits as f64 / total_lines as f64;
    }
    (found, recall, effort, clean_before, top, legacy)
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut scored = 0;
    for id in 0..1000 {
        let (r, flags, total) = random_ranking(&mut rng, id);
        if r.defective_line_count == 0 {
            check(
                recall_at(&r, 0.2).is_none() && ifa(&r).is_none() && top_k(&r, 5).is_none(),
                || format!("r{id}: metrics defined without defective lines"),
            )?;
            continue;
        }
        scored += 1;
        let (_, recall, effort, first, top, legacy) = brute(&flags, r.defective_line_count, total);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        check(close(recall_at(&r, 0.2).unwrap(), recall), || {
            format!("r{id}: recall")
        })?;
        check(close(effort_at(&r, 0.2).unwrap(), effort), || {
            format!("r{id}: effort")
        })?;
        check(ifa(&r) == Some(first), || {
            format!("r{id}: ifa {:?} vs {first}", ifa(&r))
        })?;
        check(
            top_k(&r, 5) == Some(top[0]) && top_k(&r, 10) == Some(top[1]),
            || format!("r{id}: top-k"),
        )?;
        check(
            close(top_k_legacy(&r, 5, LegacyTopK::Capped).unwrap(), legacy[0]),
            || format!("r{id}: legacy top-5"),
        )?;
        check(
            close(top_k_legacy(&r, 10, LegacyTopK::Capped).unwrap(), legacy[1]),
            || format!("r{id}: legacy top-10"),
        )?;
    }
    within(start.elapsed(), 10)?;
    Ok(format!(
        "1000 rankings, {scored} with defective lines, all equal"
    ))
}

// ---------------------------------------------------------------- 3

fn prequential() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for stream in 0..5 {
        let mut s = PrequentialState::new(1.0).unwrap();
        let mut hits = [0u64; 2];
        let mut seen = [0u64; 2];
        for _ in 0..10_000 {
            let t = u8::from(rng.random_bool(0.2));
            let p = u8::from(rng.random_bool(0.5));
            s.update(t, p);
            seen[t as usize] += 1;
            hits[t as usize] += u64::from(t == p);
        }
        for c in 0..2u8 {
            let cumulative = hits[c as usize] as f64 / seen[c as usize] as f64;
            check((s.recall(c) - cumulative).abs() <= 1e-12, || {
                format!("stream {stream} class {c}: {} vs {cumulative}", s.recall(c))
            })?;
        }
    }
    let mut s = PrequentialState::new(0.99).unwrap();
    for p in [1, 0, 1] {
        s.update(1, p);
    }
    let r1 = s.recall(1);
    let formula = (0.99f64 * 0.99 + 1.0) / (0.99 * 0.99 + 0.99 + 1.0);
    check((r1 - 0.6656).abs() <= 1e-9, || {
        format!("theta=1 streams agree; worked example r1 = {r1:.9} (closed form {formula:.9}), pinned 0.6656 +/- 1e-9")
    })?;
    Ok(format!("theta=1 matches cumulative; r1 = {r1:.9}"))
}

// ---------------------------------------------------------------- 4

fn audit_corpus(
    name: &str,
    commits: &[Commit],
    latency: LatencyConfig,
) -> Result<(usize, usize), String> {
    let mut sorted = commits.to_vec();
    corpus::sort_chronologically(&mut sorted);
    let by_id: HashMap<&str, &Commit> = sorted.iter().map(|c| (c.commit_id.as_str(), c)).collect();
    let wait = latency.waiting_seconds();
    let mut checks = 0;
    let mut relabels = 0;
    let projects: Vec<String> = project_stats(&sorted)
        .into_iter()
        .map(|s| s.project)
        .collect();
    for p in &projects {
        let own: Vec<Commit> = sorted.iter().filter(|c| &c.project == p).cloned().collect();
        let events = build_timeline(&own, latency).map_err(|e| format!("{name}/{p}: {e}"))?;
        let mut state = StreamState::default();
        for ev in &events {
            let before = state.pool.get(&ev.commit_id);
            state.apply(ev).map_err(|e| format!("{name}/{p}: {e}"))?;
            if ev.kind == EventKind::Relabel {
                relabels += 1;
                check(
                    before == Some(PoolLabel::Negative)
                        && state.pool.get(&ev.commit_id) == Some(PoolLabel::Positive),
                    || {
                        format!(
                            "{name}/{p}: relabel of `{}` was not Negative->Positive",
                            ev.commit_id
                        )
                    },
                )?;
            }
            let now = ev.at;
            for (id, label) in state.pool.iter() {
                let c = by_id[id];
                checks += 1;
                match label {
                    PoolLabel::Negative => check(now >= c.author_timestamp + wait, || {
                        format!(
                            "{name}/{p}: `{id}` negative {}s after arrival",
                            now - c.author_timestamp
                        )
                    })?,
                    PoolLabel::Positive => {
                        check(c.first_fix_timestamp.is_some_and(|f| now >= f), || {
                            format!("{name}/{p}: `{id}` positive before its fix")
                        })?
                    }
                }
            }
        }
        for mode in [RunMode::Wp, RunMode::Cp] {
            let cfg = RunConfig {
                mode,
                project: p.clone(),
                latency,
                train: TrainConfig {
                    epochs: 1,
                    ..TrainConfig::default()
                },
                ..RunConfig::default()
            };
            let mut learner = LearnerHandle::builtin(cfg.joint_dim());
            let out = run(&sorted, &cfg, &mut learner).map_err(|e| format!("{name}/{p}: {e}"))?;
            check(out.audit.violations.is_empty(), || {
                format!("{name}/{p} {mode:?}: {:?}", out.audit.violations)
            })?;
        }
    }
    Ok((checks, relabels))
}

fn latency_soundness() -> Outcome {
    let latency = LatencyConfig::default();
    let mut corpora: Vec<(String, Vec<Commit>)> = vec![
        (
            "synthetic".into(),
            generate(&SynthConfig::default()).map_err(|e| e.to_string())?,
        ),
        (
            "localization fixture".into(),
            corpus::ingest(&fixture("loc_corpus.jsonl"))
                .map_err(|e| e.to_string())?
                .commits,
        ),
    ];
    let long_fixes = SynthConfig {
        projects: vec!["late".into()],
        min_fix_days: 30,
        max_fix_days: 400,
        seed: 3,
        ..SynthConfig::default()
    };
    corpora.push((
        "late-fix synthetic".into(),
        generate(&long_fixes).map_err(|e| e.to_string())?,
    ));
    let raw = corpus::raw::convert(
        File::open(fixture("raw_metrics.csv")).map_err(|e| e.to_string())?,
        Some(File::open(fixture("raw_diffs.jsonl")).map_err(|e| e.to_string())?),
    )
    .map_err(|e| e.to_string())?;
    corpora.push(("raw fixture".into(), raw.commits));
    if let Some(public) = public_corpus() {
        corpora.push(("public".into(), public?));
    }
    let (mut checks, mut relabels) = (0, 0);
    for (name, commits) in &corpora {
        let (c, r) = audit_corpus(name, commits, latency)?;
        checks += c;
        relabels += r;
    }
    check(relabels > 0, || "no relabel event was exercised".into())?;
    Ok(format!(
        "{} corpora, {checks} pool checks, {relabels} relabels, 0 violations",
        corpora.len()
    ))
}

// ---------------------------------------------------------------- 5

fn orb_properties() -> Outcome {
    let cfg = OrbConfig::default();
    let at_th = cfg.factors_for(cfg.th);
    check((at_th.obf0, at_th.obf1) == (1.0, 1.0), || {
        format!("at th: {at_th:?}")
    })?;
    let hi = cfg.factors_for(1.0);
    let lo = cfg.factors_for(0.0);
    check((hi.obf0 - 11.0).abs() < 1e-12 && hi.obf1 == 1.0, || {
        format!("at 1: {hi:?}")
    })?;
    check((lo.obf1 - 13.0).abs() < 1e-12 && lo.obf0 == 1.0, || {
        format!("at 0: {lo:?}")
    })?;
    let mut prev = cfg.factors_for(0.0);
    for i in 1..1000 {
        let ma = i as f64 / 999.0;
        let f = cfg.factors_for(ma);
        check(f.obf0 >= prev.obf0 && f.obf1 <= prev.obf1, || {
            format!("not monotone at ma = {ma}")
        })?;
        check(f.obf0 == 1.0 || f.obf1 == 1.0, || {
            format!("both classes boosted at ma = {ma}")
        })?;
        prev = f;
    }
    Ok("neutral at th, 11.0 / 13.0 at the extremes, monotone over 1000 points".into())
}

// ---------------------------------------------------------------- 6

fn learner_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 24;
    let mut worst: f64 = 0.0;
    for b in 0..100 {
        let n = rng.random_range(1..=32);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        let batch: Vec<(&[f64], u8)> = xs
            .iter()
            .map(Vec::as_slice)
            .zip(ys.iter().copied())
            .collect();
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bias = rng.random_range(-1.0..1.0);
        let (gw, gb) = mean_gradient(&w, bias, &batch);
        let h = 1e-6;
        let mut params: Vec<f64> = w.clone();
        params.push(bias);
        let analytic: Vec<f64> = gw.iter().copied().chain(std::iter::once(gb)).collect();
        for j in 0..=dim {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p[j] += delta;
                mean_loss(&p[..dim], p[dim], &batch)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            // components near zero are compared on an absolute floor
            let rel =
                (numeric - analytic[j]).abs() / analytic[j].abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
            check(rel <= 1e-4, || {
                format!("batch {b} param {j}: rel error {rel:e}")
            })?;
        }
    }
    let xs: Vec<FusedExample> = (0..64)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = u8::from(x[0] + 0.5 * x[1] > 0.2);
            FusedExample::from_joint(x).with_label(y)
        })
        .collect();
    for lr in [1e-3, 1e-2] {
        let cfg = TrainConfig {
            epochs: 1,
            minibatch: xs.len(),
            learning_rate: lr,
            optimizer: Optimizer::Sgd,
        };
        let mut l = LogisticLearner::new(dim);
        let mut prev = l.mean_loss_on(&xs);
        for epoch in 0..50 {
            l.train(&xs, &cfg);
            let now = l.mean_loss_on(&xs);
            check(now <= prev + 1e-6, || {
                format!("lr {lr}: loss rose at epoch {epoch}: {prev} -> {now}")
            })?;
            prev = now;
        }
    }
    Ok(format!(
        "worst relative gradient error {worst:.2e}; loss non-increasing"
    ))
}

// ---------------------------------------------------------------- 7

fn gmean_of(out: &jitflow_core::RunOutput) -> f64 {
    out.final_metrics.gmean
}

fn run_mode(
    corpus: &[Commit],
    mode: RunMode,
    project: &str,
    train: TrainConfig,
) -> Result<jitflow_core::RunOutput, String> {
    let cfg = RunConfig {
        mode,
        project: project.into(),
        train,
        ..RunConfig::default()
    };
    let mut learner = LearnerHandle::builtin(cfg.joint_dim());
    run(corpus, &cfg, &mut learner).map_err(|e| e.to_string())
}

/// Fits every commit of `project` with its final label and scores the same commits.
fn hindsight_gmean(corpus: &[Commit], project: &str) -> f64 {
    let cfg = RunConfig::default();
    let mut enc = FeatureEncoder::new(cfg.semantic_dim, cfg.lift_dim, 0);
    let own: Vec<&Commit> = corpus.iter().filter(|c| c.project == project).collect();
    for c in &own {
        enc.encode_and_observe(c).expect("encodes");
    }
    let xs: Vec<FusedExample> = own
        .iter()
        .map(|c| {
            enc.encode(c)
                .expect("encodes")
                .with_label(u8::from(c.is_defect_inducing))
        })
        .collect();
    let mut l = LogisticLearner::new(enc.joint_dim());
    l.train(
        &xs,
        &TrainConfig {
            epochs: 100,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        },
    );
    let mut s = PrequentialState::new(1.0).expect("valid");
    for (x, p) in xs.iter().zip(l.predict(&xs)) {
        s.update(x.label.expect("labeled"), p.label);
    }
    s.snapshot().gmean
}

fn learning_signal() -> Outcome {
    let start = Instant::now();
    let corpus = generate(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let long_run = TrainConfig {
        epochs: 100,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for p in ["alpha", "beta"] {
        let wp = gmean_of(&run_mode(&corpus, RunMode::Wp, p, TrainConfig::default())?);
        let mut cp_corpus: Vec<Commit> =
            corpus.iter().filter(|c| c.project == p).cloned().collect();
        cp_corpus.extend(shifted_copy(&corpus, p, &format!("{p}-copy"), 91));
        let cp = gmean_of(&run_mode(
            &cp_corpus,
            RunMode::Cp,
            p,
            TrainConfig::default(),
        )?);
        let oracle = gmean_of(&run_mode(&corpus, RunMode::Wp, p, long_run)?);
        let hindsight = hindsight_gmean(&corpus, p);
        lines.push(format!(
            "{p}: WP {wp:.4} CP {cp:.4} (long-run oracle {oracle:.4}, hindsight {hindsight:.4})"
        ));
        if wp < 0.80 {
            failures.push(format!("{p} WP {wp:.4} < 0.80"));
        }
        if cp < wp {
            failures.push(format!("{p} CP {cp:.4} < WP {wp:.4}"));
        }
    }
    within(start.elapsed(), 120)?;
    let detail = lines.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join(", ")))
    }
}

// ---------------------------------------------------------------- 8

fn jitflow(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_jitflow"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn snapshot(dir: &Path, files: &[&str]) -> Result<Vec<Vec<u8>>, String> {
    files
        .iter()
        .map(|f| fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}")))
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let corpus = dir.join("synth.jsonl");
    let c = corpus.to_str().unwrap();
    jitflow(&[
        "synth",
        "--out",
        c,
        "--commits-per-project",
        "300",
        "--seed",
        "11",
    ])?;
    let out = dir.join("out");
    let o = out.to_str().unwrap();
    let run_files = [
        "summary.json",
        "steps.jsonl",
        "metrics.csv",
        "predictions.csv",
    ];
    let mut compared = 0;
    for cmd in ["run-wp", "run-cp"] {
        let args = [
            cmd,
            "--corpus",
            c,
            "--project",
            "beta",
            "--seed",
            "17",
            "--out",
            o,
        ];
        jitflow(&args)?;
        let first = snapshot(&out, &run_files)?;
        jitflow(&args)?;
        check(first == snapshot(&out, &run_files)?, || {
            format!("{cmd} outputs differ")
        })?;
        compared += run_files.len();
    }
    let corpus_fx = fixture("loc_corpus.jsonl");
    let responses = fixture("responses");
    let preds = fixture("predictions.csv");
    let args = [
        "eval-loc",
        "--corpus",
        corpus_fx.to_str().unwrap(),
        "--responses",
        responses.to_str().unwrap(),
        "--predictions",
        preds.to_str().unwrap(),
        "--top-k",
        "3",
        "--out",
        o,
    ];
    let report_files = ["report.json", "report.csv"];
    jitflow(&args)?;
    let first = snapshot(&out, &report_files)?;
    jitflow(&args)?;
    check(first == snapshot(&out, &report_files)?, || {
        "eval-loc reports differ".into()
    })?;
    compared += report_files.len();
    Ok(format!(
        "{compared} files byte-identical across repeated runs"
    ))
}

// ---------------------------------------------------------------- 9

/// Hand-computed per-commit rows:
/// (id, ranked, top5, top10, top5 legacy, top10 legacy, recall@20%, effort@20%, ifa).
type Row = (&'static str, usize, f64, f64, f64, f64, f64, f64, f64);

const REPLAY_ROWS: [Row; 8] = [
    ("L01", 3, 1.0, 1.0, 0.2, 0.2, 1.0, 1.0 / 3.0, 0.0),
    ("L02", 4, 1.0, 1.0, 0.4, 0.4, 0.0, 0.5, 1.0),
    ("L03", 3, 1.0, 1.0, 0.2, 0.2, 1.0, 1.0 / 3.0, 0.0),
    ("L04", 2, 1.0, 1.0, 0.2, 0.2, 0.0, 1.0, 1.0),
    ("L05", 10, 0.0, 1.0, 0.0, 0.2, 0.0, 0.7, 6.0),
    ("L06", 2, 1.0, 1.0, 0.2, 0.2, 1.0, 0.5, 0.0),
    ("L09", 10, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 10.0),
    ("L10", 3, 1.0, 1.0, 0.4, 0.4, 0.5, 1.0 / 3.0, 0.0),
];

fn llm_replay() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = fixture("loc_corpus.jsonl");
    let responses = fixture("responses");
    jitflow(&[
        "replay",
        "--corpus",
        corpus.to_str().unwrap(),
        "--responses",
        responses.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ])?;
    let text = fs::read_to_string(tmp.path().join("report.json")).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let report: jitflow_core::LocalizationReport =
        serde_json::from_value(v["report"].clone()).map_err(|e| e.to_string())?;
    check(report.rows.len() == REPLAY_ROWS.len(), || {
        format!("{} rows", report.rows.len())
    })?;
    for (row, want) in report.rows.iter().zip(REPLAY_ROWS) {
        let (id, ranked, t5, t10, l5, l10, rec, eff, first) = want;
        let got = (
            row.commit_id.as_str(),
            row.ranked_lines,
            row.top5,
            row.top10,
            row.top5_legacy,
            row.top10_legacy,
            row.recall_at_20,
            row.effort_at_20,
            row.ifa,
        );
        check(
            got == (id, ranked, t5, t10, l5, l10, rec, eff, first),
            || format!("{got:?} != {want:?}"),
        )?;
    }
    let excluded: Vec<(&str, &str)> = report
        .excluded
        .iter()
        .map(|e| (e.commit_id.as_str(), e.reason.as_str()))
        .collect();
    check(
        excluded
            == [
                ("L07", "no ranked lines"),
                ("L08", "no ranked lines"),
                ("L11", "no defective lines"),
            ],
        || format!("excluded {excluded:?}"),
    )?;
    let means = report.means.ok_or("no means")?;
    let n = REPLAY_ROWS.len() as f64;
    let mean = |f: fn(&Row) -> f64| REPLAY_ROWS.iter().map(f).sum::<f64>() / n;
    let want = [
        mean(|r| r.2),
        mean(|r| r.3),
        mean(|r| r.4),
        mean(|r| r.5),
        mean(|r| r.6),
        mean(|r| r.7),
        mean(|r| r.8),
    ];
    let got = [
        means.top5,
        means.top10,
        means.top5_legacy,
        means.top10_legacy,
        means.recall_at_20,
        means.effort_at_20,
        means.ifa,
    ];
    check(got == want, || format!("means {got:?} != {want:?}"))?;
    let decimal = [0.75, 0.875, 0.2, 0.225, 0.4375, 0.5875, 2.25];
    check(
        got.iter().zip(decimal).all(|(g, d)| (g - d).abs() < 1e-12),
        || format!("means {got:?}"),
    )?;
    Ok(format!(
        "{} scored, {} excluded; means match the hand-computed table",
        report.rows.len(),
        report.excluded.len()
    ))
}

// ---------------------------------------------------------------- 10

fn prompt_golden() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_jitflow"))
        .args([
            "prompt",
            "--corpus",
            fixture("loc_corpus.jsonl").to_str().unwrap(),
            "--commit",
            "L02",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    let golden = fs::read(fixture("prompt_L02.txt")).map_err(|e| e.to_string())?;
    check(out.stdout == golden, || {
        "prompt differs from the golden file".into()
    })?;
    check(out.stdout.starts_with(INSTRUCTION.as_bytes()), || {
        "instruction text is not a byte-exact prefix".into()
    })?;
    Ok(format!(
        "{} bytes, instruction embedded verbatim",
        out.stdout.len()
    ))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("dataset fidelity", dataset_fidelity),
        ("metric oracle equivalence", metric_oracles),
        ("prequential correctness", prequential),
        ("latency soundness", latency_soundness),
        ("ORB properties", orb_properties),
        ("learner numerics", learner_numerics),
        ("end-to-end learning signal", learning_signal),
        ("determinism", determinism),
        ("LLM fixture replay", llm_replay),
        ("prompt golden file", prompt_golden),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
