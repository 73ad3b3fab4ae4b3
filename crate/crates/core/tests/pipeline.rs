use std::fs;
use std::path::Path;

use presetpick::dataset::{generate_synthetic, split_dataset, SyntheticSpec};
use presetpick::featselect::retrain_with_selected;
use presetpick::features::{extract_features, CategoricalCodebook};
use presetpick::reference::sample_ground_truth;
use presetpick::regression::{evaluate_bundle, load_bundle, save_bundle, train_all_presets, Family, Hyperparams};
use presetpick::selector::{predict_times, select_preset, BudgetSpec};
use presetpick::simulate::load_ground_truth;
use presetpick::stats::read_chunk_stats;
use presetpick::Preset;

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn shipped_ground_truth_matches_reference() {
    let table = load_ground_truth(&data("sample_clip_ground_truth.csv")).unwrap();
    assert_eq!(table, sample_ground_truth());
}

#[test]
fn train_select_featsel_round_trip() {
    let ds = generate_synthetic(&SyntheticSpec {
        n_chunks: 80,
        noise_level: 0.02,
        seed: 21,
    })
    .unwrap();
    let (train, test) = split_dataset(&ds, 0.75, 21).unwrap();
    let zoo: Vec<Hyperparams> = [Family::Linear, Family::Ridge, Family::DecisionTree]
        .into_iter()
        .map(Hyperparams::default_for)
        .collect();
    let bundle = train_all_presets(&train, &zoo, 4, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bundle.json");
    save_bundle(&bundle, &path).unwrap();
    let loaded = load_bundle(&path).unwrap();
    let again = dir.path().join("again.json");
    save_bundle(&loaded, &again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());

    let held_out = evaluate_bundle(&loaded, &test).unwrap();
    assert!(held_out.mean.mape < 0.06, "{}", held_out.mean.mape);

    let chunk = read_chunk_stats(&data("chunk_sample.stats")).unwrap();
    let fv = extract_features(&chunk, 6000.0, &CategoricalCodebook::default()).unwrap();
    let times = predict_times(&loaded, &fv).unwrap();
    assert!(times.values().windows(2).all(|w| w[0] < w[1]), "{times:?}");
    let decision = select_preset(&times, &BudgetSpec::default()).unwrap();
    assert!(decision.feasible);

    let outcome = retrain_with_selected(&loaded, &train, 4, 21).unwrap();
    assert_eq!(outcome.report.rows.len(), Preset::COUNT);
    for row in &outcome.report.rows {
        assert!(row.mape_after <= row.mape_before + 1e-12, "{row:?}");
    }
    let reduced = outcome
        .bundle
        .entry(Preset::Medium)
        .feature_mask()
        .iter()
        .filter(|m| **m)
        .count();
    assert_eq!(reduced, outcome.report.rows[Preset::Medium.ordinal()].n_selected);
}
