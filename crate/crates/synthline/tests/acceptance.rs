//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p synthline --test acceptance`.
//!
//! Every check runs offline with the mock backend and the hashed embedder. The
//! real-corpus vocabulary check runs only when `SYNTHLINE_REAL_DATASET` points at
//! a CSV file (with `SYNTHLINE_REAL_MAPPING` naming its column mapping).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthline::store::{read_external, ColumnMapping};
use synthline_core::config::validate;
use synthline_core::metrics::{
    average_pairwise_similarity, ingf, intra_class_aps, similarity_histogram, vocabulary_stats, Embedder, HashEmbedder,
};
use synthline_core::resources::{defect_labels, synthline_model, reference_configuration, DEFECT_LABELS};
use synthline_core::sample::COLUMNS;
use synthline_core::{
    allocate_samples, deduplicate, expand_atomic_configurations, render_prompt, stratified_split, AttrValue,
    Configuration, Constraint, ConstraintKind, Dataset, DedupMode, Rule, SyntheticSample,
};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn atomic_expansion() -> Check {
    let atoms = expand_atomic_configurations(&synthline_model(), &reference_configuration()).map_err(|e| e.to_string())?;
    ensure(atoms.len() == 112, || format!("expected 112 atomic configurations, got {}", atoms.len()))?;
    let counts = allocate_samples(atoms.len(), 1120).map_err(|e| e.to_string())?;
    ensure(counts.iter().all(|&c| c == 10), || format!("allocation of 1120 is not 10 each: {counts:?}"))
}

fn allocation_law() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for case in 0..1000 {
        let k = rng.random_range(1..=500usize);
        let n = rng.random_range(1..=100_000usize);
        let got = allocate_samples(k, n).map_err(|e| e.to_string())?;
        // Deal samples one at a time, round robin from index 0.
        let mut oracle = vec![0usize; k];
        for i in 0..n {
            oracle[i % k] += 1;
        }
        let (lo, hi) = (got.iter().min().unwrap(), got.iter().max().unwrap());
        ensure(got.iter().sum::<usize>() == n && hi - lo <= 1 && got == oracle, || {
            format!("case {case}: K={k} N={n} disagrees with round robin")
        })?;
    }
    Ok(())
}

const GOLDEN: &str = include_str!("../../core/tests/fixtures/prompt_ambiguous_functions_healthcare.txt");

fn prompt_golden() -> Check {
    let config = reference_configuration()
        .deselect("UserInterfaces")
        .deselect("HardwareInterfaces")
        .deselect("Performance")
        .deselect("LogicalDatabase")
        .deselect("DesignConstraints")
        .deselect("SystemAttributes")
        .deselect("HighLevelSpecification")
        .deselect("BusinessManagers")
        .deselect("DevelopmentTeam")
        .deselect("RegulatoryBodies")
        .with_values("Domain", vec!["Healthcare".into()]);
    let atoms = expand_atomic_configurations(&synthline_model(), &config).map_err(|e| e.to_string())?;
    ensure(atoms.len() == 1, || format!("expected one atomic configuration, got {}", atoms.len()))?;
    let label = defect_labels().into_iter().find(|l| l.label == "Ambiguous").ok_or("no Ambiguous label")?;
    let text = render_prompt(&atoms[0], &label).map_err(|e| e.to_string())?.text;
    ensure(text.as_bytes() == GOLDEN.as_bytes(), || format!("rendered prompt differs from fixture:\n{text}"))
}

fn generate_into(dir: &Path, config: &Path, labels: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_synthline"))
        .args(["generate", "-c"])
        .arg(config)
        .arg("--labels")
        .arg(labels)
        .args(["--backend", "mock", "--seed", "2025", "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("generate failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        files.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&p).map_err(|e| e.to_string())?,
        );
    }
    Ok(files)
}

fn mock_end_to_end() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("config.json");
    let labels = tmp.path().join("labels.json");
    let c = reference_configuration().with_values("SubsetSize", vec![AttrValue::Number(24.0)]);
    std::fs::write(&config, c.to_json()).map_err(|e| e.to_string())?;
    std::fs::write(&labels, DEFECT_LABELS).map_err(|e| e.to_string())?;

    let first = generate_into(&tmp.path().join("a"), &config, &labels)?;
    let expected: Vec<String> = ["ambiguous", "directive", "non-atomic", "non-measurable", "optional", "uncertain"]
        .iter()
        .map(|s| format!("{s}.csv"))
        .collect();
    ensure(first.keys().cloned().collect::<Vec<_>>() == expected, || format!("files: {:?}", first.keys()))?;
    let header = COLUMNS.join(",");
    for (name, bytes) in &first {
        let text = String::from_utf8(bytes.clone()).map_err(|e| e.to_string())?;
        ensure(text.lines().next() == Some(header.as_str()), || format!("{name}: header mismatch"))?;
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let rows = reader.records().collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        ensure(rows.len() == 24, || format!("{name}: {} rows", rows.len()))?;
        ensure(rows.iter().all(|r| r.len() == 15), || format!("{name}: a row without 15 fields"))?;
    }
    let second = generate_into(&tmp.path().join("b"), &config, &labels)?;
    ensure(first == second, || "rerun with the same seed is not byte-identical".into())
}

// Brute-force references, written without the library's helpers.

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn mean_over_ordered_pairs(vs: &[&Vec<f64>]) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for i in 0..vs.len() {
        for j in 0..vs.len() {
            if i != j {
                s += cos(vs[i], vs[j]);
                n += 1.0;
            }
        }
    }
    s / n
}

fn words(t: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in t.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn ngram_mean(texts: &[&str], ns: &[usize]) -> f64 {
    let mut counts: HashMap<(usize, Vec<String>), f64> = HashMap::new();
    for t in texts {
        let w = words(t);
        for &n in ns {
            for win in w.windows(n) {
                *counts.entry((n, win.to_vec())).or_default() += 1.0;
            }
        }
    }
    counts.values().sum::<f64>() / counts.len() as f64
}

fn rel_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

const FIXTURE: [(&str, &str); 10] = [
    ("The system shall encrypt all stored patient data.", "Ambiguous"),
    ("The system shall respond quickly to user requests.", "Non-Measurable"),
    ("The waiter may optionally split the bill.", "Optional"),
    ("The system shall log in users and send a welcome email.", "Non-Atomic"),
    ("Refer to section 4 for the data model.", "Directive"),
    ("The system should probably support several languages.", "Uncertain"),
    ("The system shall encrypt all stored billing data.", "Ambiguous"),
    ("The report shall load fast enough for managers.", "Non-Measurable"),
    ("Staff can possibly override the reservation limit.", "Optional"),
    ("The system shall record orders and print kitchen tickets.", "Non-Atomic"),
];

fn metric_oracles() -> Check {
    let texts: Vec<&str> = FIXTURE.iter().map(|f| f.0).collect();
    let labels: Vec<&str> = FIXTURE.iter().map(|f| f.1).collect();
    let vectors = HashEmbedder::default().embed(&texts).map_err(|e| e.to_string())?;
    let raw: Vec<Vec<f64>> = vectors.iter().map(|v| v.values().to_vec()).collect();

    let aps = average_pairwise_similarity(&vectors).map_err(|e| e.to_string())?;
    let want = mean_over_ordered_pairs(&raw.iter().collect::<Vec<_>>());
    ensure(rel_close(aps, want), || format!("APS {aps} vs {want}"))?;

    let intra = intra_class_aps(&vectors, &labels).map_err(|e| e.to_string())?;
    let mut classes: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (v, l) in raw.iter().zip(&labels) {
        classes.entry(l).or_default().push(v);
    }
    let mut per_class = Vec::new();
    for (l, members) in &classes {
        if members.len() > 1 {
            let want = mean_over_ordered_pairs(members);
            let got = intra.per_class.get(*l).copied().unwrap_or(f64::NAN);
            ensure(rel_close(got, want), || format!("intra-class APS for {l}: {got} vs {want}"))?;
            per_class.push(want);
        }
    }
    let macro_want = per_class.iter().sum::<f64>() / per_class.len() as f64;
    ensure(rel_close(intra.macro_avg, macro_want), || format!("macro {} vs {macro_want}", intra.macro_avg))?;

    for ns in [vec![2], vec![2, 3], vec![2, 3, 4]] {
        let got = ingf(texts.iter().copied(), &ns).map_err(|e| e.to_string())?;
        let want = ngram_mean(&texts, &ns);
        ensure(rel_close(got, want), || format!("INGF {ns:?}: {got} vs {want}"))?;
    }

    let bins = 20;
    let h = similarity_histogram(&vectors, &labels, bins).map_err(|e| e.to_string())?;
    let mut want = vec![0usize; bins];
    for members in classes.values() {
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let s = cos(members[i], members[j]);
                let width = 2.0 / bins as f64;
                let b = (((s + 1.0) / width).floor() as usize).min(bins - 1);
                want[b] += 1;
            }
        }
    }
    let got: Vec<usize> = h.bins.iter().map(|b| b.count).collect();
    ensure(got == want, || format!("histogram {got:?} vs {want:?}"))
}

fn vocabulary_formula() -> Check {
    let docs: Vec<String> = (0..131)
        .map(|d| (0..566).filter(|t| t % 131 == d).map(|t| format!("term{t}")).collect::<Vec<_>>().join(" "))
        .collect();
    let v = vocabulary_stats(docs.iter().map(String::as_str)).map_err(|e| e.to_string())?;
    ensure(v.vocab_size == 566, || format!("vocab size {}", v.vocab_size))?;
    ensure(v.normalized == v.vocab_size as f64 / 131.0, || "normalized is not vocabSize / sampleCount".into())?;
    ensure(format!("{:.2}", v.normalized) == "4.32", || format!("normalized {:.2}", v.normalized))
}

/// `Ok(None)` when the corpus is not configured.
fn real_corpus_vocabulary() -> Result<Option<f64>, String> {
    let Ok(path) = std::env::var("SYNTHLINE_REAL_DATASET") else {
        return Ok(None);
    };
    let mapping = match std::env::var("SYNTHLINE_REAL_MAPPING") {
        Ok(m) => ColumnMapping::from_json(&std::fs::read_to_string(m).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?,
        Err(_) => ColumnMapping::default(),
    };
    let d = read_external(Path::new(&path), &mapping).map_err(|e| e.to_string())?;
    let v = vocabulary_stats(d.texts()).map_err(|e| e.to_string())?;
    ensure((3.7..=5.0).contains(&v.normalized), || format!("normalized vocabulary {:.2} outside [3.7, 5.0]", v.normalized))?;
    Ok(Some(v.normalized))
}

fn ds(texts: &[String]) -> Dataset {
    Dataset::new(
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| SyntheticSample::bare(format!("s{i}"), t.clone(), "L"))
            .collect(),
    )
    .unwrap()
}

fn dedup_properties() -> Check {
    let base = ["The system shall export reports.", "Users may reset passwords.", "The kiosk shall print receipts."];
    let mut texts: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    texts.push(base[0].to_string());
    texts.push(base[1].to_uppercase());
    texts.push(format!("  {}  ", base[2].replace(' ', "   ")));
    let d = ds(&texts);
    let (kept, removed) = deduplicate(&d, DedupMode::Normalized);
    ensure(removed == 3 && kept.texts().eq(base.iter().copied()), || format!("default mode removed {removed}"))?;
    let (_, removed) = deduplicate(&d, DedupMode::Exact);
    ensure(removed == 1, || format!("byte-exact mode removed {removed}, expected only the exact copy"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let alphabet = ['a', 'A', 'b', ' ', '\t'];
    for _ in 0..200 {
        let n = rng.random_range(0..30);
        let texts: Vec<String> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..6);
                let s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
                format!("x{s}")
            })
            .collect();
        let d = ds(&texts);
        for mode in [DedupMode::Normalized, DedupMode::Exact] {
            let (once, _) = deduplicate(&d, mode);
            let (twice, again) = deduplicate(&once, mode);
            ensure(again == 0 && twice == once, || format!("{mode:?} is not idempotent on {texts:?}"))?;
        }
    }
    Ok(())
}

fn fm_semantics() -> Check {
    let model = synthline_model();
    let reference = reference_configuration();
    ensure(validate(&model, &reference).valid, || format!("reference configuration rejected:\n{}", validate(&model, &reference)))?;

    let detect = |name: &str, m: &synthline_core::FeatureModel, c: &Configuration, rule: Rule| {
        let r = validate(m, c);
        ensure(!r.valid && r.has(rule), || format!("{name} not detected as {rule:?}: {r}"))
    };
    detect("missing Output", &model, &reference.clone().deselect("Output"), Rule::MandatoryMissing)?;
    detect("CSV and JSON", &model, &reference.clone().select(&["JSON"]), Rule::XorCardinality)?;
    let mut empty_or = reference.clone();
    for f in ["EndUsers", "BusinessManagers", "DevelopmentTeam", "RegulatoryBodies"] {
        empty_or = empty_or.deselect(f);
    }
    detect("no requirement source", &model, &empty_or, Rule::OrCardinality)?;

    let mut constrained = model.clone();
    constrained.constraints.push(Constraint {
        kind: ConstraintKind::Requires,
        lhs: "UseCase".into(),
        rhs: "EndUsers".into(),
    });
    constrained.constraints.push(Constraint {
        kind: ConstraintKind::Excludes,
        lhs: "DeepSeekV3".into(),
        rhs: "JSON".into(),
    });
    ensure(validate(&constrained, &reference).valid, || "the reference configuration violates the test constraints".into())?;
    detect("UseCase without EndUsers", &constrained, &reference.clone().select(&["UseCase"]).deselect("EndUsers"), Rule::Requires)?;
    let excl = reference.clone().deselect("GPT4o").deselect("CSV").select(&["DeepSeekV3", "JSON"]);
    detect("DeepSeekV3 with JSON", &constrained, &excl, Rule::Excludes)?;
    detect(
        "Temperature 3.5",
        &model,
        &reference.clone().with_values("Temperature", vec![AttrValue::Number(3.5)]),
        Rule::Range,
    )
}

fn split_law() -> Check {
    let dist = [("Ambiguous", 34), ("Directive", 4), ("Non-Measurable", 18), ("Optional", 31), ("Uncertain", 16), ("Non-Atomic", 28)];
    let mut samples = Vec::new();
    for (label, n) in dist {
        for i in 0..n {
            samples.push(SyntheticSample::bare(format!("{label}-{i}"), format!("requirement {i} of {label}"), label));
        }
    }
    let d = Dataset::new(samples).map_err(|e| e.to_string())?;
    let (train, test) = stratified_split(&d, 0.3, 42).map_err(|e| e.to_string())?;
    let stats = test.class_stats();
    let got: Vec<usize> = dist.iter().map(|(l, _)| stats.per_class.get(*l).copied().unwrap_or(0)).collect();
    // round(0.3 n) in integers: (3n + 5) / 10
    let oracle: Vec<usize> = dist.iter().map(|(_, n)| (3 * n + 5) / 10).collect();
    ensure(got == vec![10, 1, 5, 9, 5, 8] && got == oracle, || format!("test counts {got:?}"))?;
    ensure(train.len() + test.len() == 131, || "split lost samples".into())?;
    let (train2, test2) = stratified_split(&d, 0.3, 42).map_err(|e| e.to_string())?;
    ensure(train == train2 && test == test2, || "same seed gave a different split".into())?;
    let (_, test3) = stratified_split(&d, 0.3, 43).map_err(|e| e.to_string())?;
    ensure(test3 != test, || "different seeds gave the same split".into())
}

fn main() {
    let checks: [(&str, fn() -> Check, Duration); 9] = [
        ("atomic expansion: the reference configuration -> 112 configurations, 1120 -> 10 each", atomic_expansion, Duration::from_secs(1)),
        ("allocation law: 1000 random (K, N) match round robin", allocation_law, Duration::from_secs(5)),
        ("prompt golden: byte-identical to fixture", prompt_golden, Duration::from_secs(1)),
        ("mock end-to-end: 6 labels x 24 rows, 15 columns, seeded rerun identical", mock_end_to_end, Duration::from_secs(10)),
        ("metric oracles: APS, intra-class APS, INGF, histogram within 1e-9", metric_oracles, Duration::from_secs(1)),
        ("metric formula: 566 terms / 131 samples -> 4.32", vocabulary_formula, Duration::from_secs(1)),
        ("dedup properties: idempotent, variants removed, strict keeps variants", dedup_properties, Duration::from_secs(1)),
        ("FM semantics: six violation kinds detected, the reference configuration valid", fm_semantics, Duration::from_secs(1)),
        ("split law: 131-sample class mix at 0.3 -> [10,1,5,9,5,8], seed-deterministic", split_law, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (name, check, bound) in checks {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|()| {
            ensure(elapsed < bound, || format!("took {elapsed:?}, bound {bound:?}"))
        });
        match result {
            Ok(()) => println!("PASS  {name}  [{:.0} ms < {} ms]", elapsed.as_secs_f64() * 1e3, bound.as_millis()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}  [{:.0} ms]: {e}", elapsed.as_secs_f64() * 1e3);
            }
        }
    }
    match real_corpus_vocabulary() {
        Ok(None) => println!("SKIP  optional: real defect corpus vocabulary (set SYNTHLINE_REAL_DATASET)"),
        Ok(Some(v)) => println!("PASS  optional: real defect corpus normalized vocabulary {v:.2} in [3.7, 5.0]"),
        Err(e) => {
            failed += 1;
            println!("FAIL  optional: real defect corpus vocabulary: {e}");
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance checks passed");
}
