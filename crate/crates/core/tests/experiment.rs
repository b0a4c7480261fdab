use qld_core::experiment::{
    emit_results, parse_results_json, run_suite, ExperimentConfig, ExperimentId, Format, SuiteConfig,
};
use qld_core::randunitary::parse_seed;

fn small_suite(threads: usize) -> SuiteConfig {
    let mut exps = Vec::new();
    for (id, trials) in [
        (ExperimentId::Wg, None),
        (ExperimentId::Prop1, Some(300)),
        (ExperimentId::Prop2, Some(200)),
        (ExperimentId::Thm2, Some(400)),
        (ExperimentId::Purity, Some(300)),
    ] {
        let mut e = ExperimentConfig::new(id);
        if trials.is_some() {
            e.trials = trials;
        }
        exps.push(e);
    }
    let mut mr = ExperimentConfig::new(ExperimentId::Multiround);
    mr.rounds = Some(30);
    exps.push(mr);
    SuiteConfig {
        seed: None,
        threads: Some(threads),
        experiments: exps,
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let seed = parse_seed("5eed").unwrap();
    let a = run_suite(&small_suite(1), &seed, None).unwrap();
    let b = run_suite(&small_suite(3), &seed, None).unwrap();
    let ja = emit_results(&a, Format::Json).unwrap();
    let jb = emit_results(&b, Format::Json).unwrap();
    assert_eq!(ja, jb);
    let other = run_suite(&small_suite(1), &parse_seed("5eee").unwrap(), None).unwrap();
    assert_ne!(emit_results(&other, Format::Json).unwrap(), ja);
}

#[test]
fn suite_writes_reports_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_suite(2);
    cfg.experiments.truncate(2);
    let seed = parse_seed("abcd").unwrap();
    let r = run_suite(&cfg, &seed, Some(dir.path())).unwrap();
    for f in ["results.json", "results.csv", "report.md"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let json = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
    assert_eq!(parse_results_json(&json).unwrap(), r);
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), r.summaries.len() + 1);
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains(&r.config_hash));
    assert!(r.summaries.iter().any(|s| s.experiment == "wg"));
    assert!(r.summaries.iter().any(|s| s.experiment == "prop1"));
}

#[test]
fn config_hash_ignores_threads_only() {
    let a = small_suite(1);
    let b = small_suite(8);
    assert_eq!(a.hash(), b.hash());
    let mut c = small_suite(1);
    c.experiments[1].trials = Some(301);
    assert_ne!(a.hash(), c.hash());
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(SuiteConfig::parse(&json).unwrap(), a);
}

#[test]
fn invalid_experiments_are_rejected() {
    let mut cfg = small_suite(1);
    cfg.experiments[1].trials = Some(0);
    assert!(run_suite(&cfg, &parse_seed("01").unwrap(), None).is_err());
    assert!(SuiteConfig::parse("[[experiment]]\nexperiment = \"wg\"\nbogus = 1\n").is_err());
}
