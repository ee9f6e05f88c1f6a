use bequp::channel::NoiseKind;
use bequp::harness::{
    emit_csv, read_csv, run_matrix, summarize, write_csv, Algo, ExperimentConfig, ExperimentRecord, CSV_HEADER,
};
use bequp::qkd::Metric;
use bequp::trace::RoundRecord;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        algos: vec![Algo::BequpLink, Algo::UniformPath, Algo::SuccElim],
        noise_models: vec![NoiseKind::Depolarizing, NoiseKind::AmplitudeDamping],
        n_values: vec![2, 3],
        trials: 3,
        seed: 42,
        ..ExperimentConfig::default()
    }
}

fn without_time(mut records: Vec<ExperimentRecord>) -> Vec<ExperimentRecord> {
    for r in &mut records {
        r.wall_time_ms = 0;
    }
    records
}

fn csv_bytes(records: &[ExperimentRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).unwrap();
    buf
}

#[test]
fn csv_round_trip_keeps_every_field() {
    let records = run_matrix(&small_config()).unwrap();
    assert_eq!(records.len(), 3 * 2 * 2 * 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    emit_csv(&records, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(read_csv(&path).unwrap(), records);
}

#[test]
fn empty_record_list_gives_header_only() {
    let text = String::from_utf8(csv_bytes(&[])).unwrap();
    assert_eq!(text, format!("{CSV_HEADER}\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_csv(&[], &path).unwrap();
    assert!(read_csv(&path).unwrap().is_empty());
}

#[test]
fn failed_trial_leaves_output_path_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut records = run_matrix(&ExperimentConfig {
        trials: 1,
        n_values: vec![2],
        algos: vec![Algo::BequpLink],
        noise_models: vec![NoiseKind::Dephasing],
        ..ExperimentConfig::default()
    })
    .unwrap();
    records[0].output_path = None;
    records[0].success = false;
    emit_csv(&records, &path).unwrap();
    let row = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert_eq!(row.split(',').nth(8), Some(""));
    assert_eq!(read_csv(&path).unwrap(), records);
}

#[test]
fn same_seed_same_records() {
    let a = without_time(run_matrix(&small_config()).unwrap());
    let b = without_time(run_matrix(&small_config()).unwrap());
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    let other = without_time(
        run_matrix(&ExperimentConfig {
            seed: 43,
            ..small_config()
        })
        .unwrap(),
    );
    assert_ne!(a, other);
}

#[test]
fn records_are_sorted_and_successful() {
    let records = run_matrix(&small_config()).unwrap();
    let keys: Vec<_> = records.iter().map(|r| (r.algo, r.noise_model, r.n, r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for r in &records {
        assert_eq!(r.success, r.output_path == Some(r.true_best));
        assert_eq!(r.true_best, 0);
        assert!(r.resource_cost > 0);
    }
    for s in summarize(&records) {
        assert_eq!(s.trials, 3);
        assert!(s.success_rate > 0.6, "{s:?}");
    }
}

#[test]
fn traces_are_written_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        algos: vec![Algo::BequpLink, Algo::BequpPath],
        noise_models: vec![NoiseKind::BitFlip],
        n_values: vec![2],
        trials: 2,
        trace_dir: Some(dir.path().to_path_buf()),
        ..ExperimentConfig::default()
    };
    run_matrix(&cfg).unwrap();
    let link = dir.path().join("bequp-link_fidelity_bit_flip_n2_t1.jsonl");
    let text = std::fs::read_to_string(&link).unwrap();
    let rounds: Vec<RoundRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(matches!(rounds.last(), Some(RoundRecord::Link(r)) if r.chosen_link.is_none()));
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["t", "k_hat", "k_tilde", "chosen_link", "feedback", "N_after"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let path = dir.path().join("bequp-path_fidelity_bit_flip_n2_t0.jsonl");
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(path).unwrap().lines().next().unwrap()).unwrap();
    for key in ["h", "s", "|S|", "delta_hs", "eps_hs", "N"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn skf_runs_for_every_algorithm() {
    let cfg = ExperimentConfig {
        metric: Metric::Skf,
        ..small_config()
    };
    let records = run_matrix(&cfg).unwrap();
    assert!(records.iter().all(|r| r.metric == Metric::Skf));
    for algo in &cfg.algos {
        assert!(records.iter().any(|r| r.algo == *algo), "{algo}");
    }
}

#[test]
fn config_file_fields_override_defaults() {
    let cfg: ExperimentConfig =
        serde_json::from_str(r#"{"algos": ["succ-elim"], "noise_models": ["bit_flip"], "n_values": [4], "t0": 50}"#)
            .unwrap();
    assert_eq!(cfg.algos, vec![Algo::SuccElim]);
    assert_eq!(cfg.noise_models, vec![NoiseKind::BitFlip]);
    assert_eq!(cfg.bench_config(Algo::SuccElim).t0, 50);
    assert_eq!(cfg.trials, ExperimentConfig::default().trials);
}
