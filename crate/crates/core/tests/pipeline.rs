use std::fs;
use std::path::Path;

use tracelens::encoding::Encoding;
use tracelens::pipeline::{run, InputSpec, PipelineConfig, Stage};
use tracelens::synth::{self, LeakKind, LeakSpec, SynthConfig};

fn small(leak: Option<LeakKind>) -> PipelineConfig {
    let synth = SynthConfig {
        n_traces: 200,
        unique_per_class: 60,
        leak: leak.map(|kind| LeakSpec {
            activity: "Payment".into(),
            kind,
        }),
        seed: 3,
        ..SynthConfig::default()
    };
    let mut cfg = PipelineConfig::new(InputSpec::Synth { synth });
    cfg.encodings = vec![Encoding::Unigram, Encoding::Bigram, Encoding::Tokens];
    cfg.cv.repeats = 2;
    cfg.attn.epochs = 3;
    cfg.relevance.permutation_repeats = 2;
    cfg
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn full_run_writes_every_stage_and_is_deterministic() {
    let cfg = small(None);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = run(&cfg, a.path(), Stage::Report).unwrap();
    let out_b = run(&cfg, b.path(), Stage::Report).unwrap();
    assert_eq!(out_a.completed, Stage::ALL);
    assert_eq!(out_a.results, out_b.results);
    assert_eq!(out_a.results.len(), 5);
    for stage in Stage::ALL {
        let dir = a.path().join(stage.as_str());
        assert!(dir.join("manifest.json").exists(), "{stage}");
        assert!(!dir.join("STALE").exists(), "{stage}");
    }
    for f in [
        "results.json",
        "results.txt",
        "train/lr-1gram.json",
        "train/attn-tokens.json",
        "reports/synthetic/lr-2gram/relevance.svg",
        "reports/synthetic/attn-tokens/attention.svg",
        "explain/dt-1gram-mdi.tsv",
    ] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
    let lr = out_a.result("lr", Encoding::Unigram).unwrap();
    assert_eq!(lr.fold_scores.len(), 10);
    assert!(lr.test_auroc > 0.5 && lr.test_auroc <= 1.0);
}

#[test]
fn unknown_model_fails_before_any_stage() {
    let mut cfg = small(None);
    cfg.models = vec!["lr".into(), "svm".into()];
    let dir = tempfile::tempdir().unwrap();
    let err = run(&cfg, dir.path(), Stage::Report).unwrap_err();
    assert_eq!(err.stage(), Some("config"));
    assert!(err.to_string().contains("unknown model 'svm'"), "{err}");
    assert!(!dir.path().join("ingest").exists());
    assert!(!dir.path().join("train").exists());
}

#[test]
fn partial_run_marks_later_stages_stale() {
    let cfg = small(None);
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, dir.path(), Stage::Report).unwrap();
    let out = run(&cfg, dir.path(), Stage::Split).unwrap();
    assert_eq!(
        out.completed,
        [Stage::Ingest, Stage::Label, Stage::Audit, Stage::Split]
    );
    assert!(out.results.is_empty());
    assert!(!dir.path().join("split/STALE").exists());
    for stage in [Stage::Encode, Stage::Train, Stage::Report] {
        let marker = read(dir.path().join(stage.as_str()).join("STALE"));
        assert!(marker.contains("not produced"), "{stage}: {marker}");
    }
}

#[test]
fn failing_stage_is_named_and_left_stale() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth::generate(&SynthConfig {
        n_traces: 60,
        ..SynthConfig::default()
    })
    .unwrap();
    let csv = dir.path().join("log.csv");
    synth::write_csv_events(&log, &csv).unwrap();
    let toml = r#"
        version = 1
        [input]
        format = "csv"
        path = "log.csv"
        [rule]
        kind = "contains_activity"
        activity = "Nonexistent"
    "#;
    let cfg_path = dir.path().join("cfg.toml");
    fs::write(&cfg_path, toml).unwrap();
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.dataset_name(), "log");
    let out = dir.path().join("out");
    let err = run(&cfg, &out, Stage::Report).unwrap_err();
    assert_eq!(err.stage(), Some("label"));
    assert!(err.to_string().starts_with("label stage failed"), "{err}");
    assert!(out.join("ingest/manifest.json").exists());
    assert!(read(out.join("label/STALE")).contains("positive"));
    assert!(!out.join("label/manifest.json").exists());
}

#[test]
fn detected_leak_is_removed_and_rows_relabelled() {
    let mut cfg = small(Some(LeakKind::ClassExclusive));
    cfg.models = vec!["lr".into()];
    cfg.encodings = vec![Encoding::Unigram];
    let dir = tempfile::tempdir().unwrap();
    let biased = {
        let mut c = cfg.clone();
        c.bias.remove_detected = false;
        run(&c, dir.path(), Stage::Evaluate).unwrap()
    };
    assert_eq!(biased.results[0].dataset, "synthetic");
    assert!((biased.results[0].test_auroc - 1.0).abs() < 1e-3);
    assert_eq!(biased.audit.as_ref().unwrap().findings.len(), 1);

    let cleaned = run(&cfg, dir.path(), Stage::Evaluate).unwrap();
    assert_eq!(cleaned.results[0].dataset, "synthetic-unbiased");
    let (spec, summary) = cleaned.removal.unwrap();
    assert!(!spec.is_empty());
    assert_eq!(summary.removed_events, 100);
    assert!(cleaned.results[0].test_auroc < 0.99);
    assert!(read(dir.path().join("audit/removal.json")).contains("Payment"));
}

#[test]
fn bundled_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["synthetic.toml", "synthetic-positional.toml", "bpic17.toml"] {
        let cfg = PipelineConfig::load(root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let bpic = PipelineConfig::load(root.join("bpic17.toml")).unwrap();
    assert_eq!(bpic.bias.removals.len(), 1);
    assert!(
        matches!(bpic.input, InputSpec::Xes { ref path } if path.is_absolute() || path.starts_with(&root))
    );
}
