use dynmap::sim::{
    evaluate, golden, read_records, run_scenario, write_records, PredictorKind, RecordsHeader, Scenario,
};
use dynmap::tracker::Label;

const EMPTY_ROOM: &str = r#"
format = "dynmap-scenario/1"
name = "empty room"
frame_rate = 30.0
duration = 2.0
seed = 5

[camera]
width = 160
height = 120
hfov_deg = 87.0
vfov_deg = 58.0
depth_min = 0.3
depth_max = 10.0
trajectory = [[0.0, 0.0, 0.0, 1.1, 0.0, 0.0]]

[map]
min = [-0.5, -4.0, 0.0]
max = [8.0, 4.0, 3.0]

[[static_box]]
min = [7.0, -3.5, 0.0]
max = [7.3, 3.5, 3.0]
"#;

fn short_field(seconds: f64) -> Scenario {
    let mut s = golden::field();
    s.duration = seconds;
    s
}

#[test]
fn no_agents_means_no_dynamic_tracks_or_predictions() {
    let s = Scenario::parse(EMPTY_ROOM).unwrap();
    let recs = run_scenario(&s, &s.pipeline_config(None).unwrap()).unwrap();
    assert_eq!(recs.len(), 60);
    for r in &recs {
        assert!(r.ground_truth.is_empty());
        assert!(r.predictions.is_empty());
        assert!(r.tracks.iter().all(|t| t.label == Label::Static));
    }
    let m = evaluate(&recs);
    assert_eq!(m.matched, 0);
    assert_eq!(m.predictions, 0);
    assert_eq!(m.confusion.static_as_dynamic, 0);
}

#[test]
fn single_walker_is_tracked_and_predicted() {
    let s = short_field(4.0);
    let recs = run_scenario(&s, &s.pipeline_config(None).unwrap()).unwrap();
    let m = evaluate(&recs);
    assert!(m.matched > 60, "matched {}", m.matched);
    assert!(m.position_rmse < 0.2, "position rmse {}", m.position_rmse);
    assert!(m.predictions > 0);
    assert!(m.confusion.dynamic_as_dynamic > m.confusion.dynamic_as_static);
}

#[test]
fn equal_seeds_give_equal_records() {
    let s = short_field(1.5);
    let cfg = s.pipeline_config(None).unwrap();
    let a = run_scenario(&s, &cfg).unwrap();
    let b = run_scenario(&s, &cfg).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.eq_ignoring_timing(y)));
}

#[test]
fn different_seeds_change_the_noise() {
    let mut s = short_field(0.5);
    let cfg = s.pipeline_config(None).unwrap();
    let a = run_scenario(&s, &cfg).unwrap();
    s.seed += 1;
    let b = run_scenario(&s, &cfg).unwrap();
    assert!(a.iter().zip(&b).any(|(x, y)| !x.eq_ignoring_timing(y)));
}

#[test]
fn records_round_trip_through_jsonl() {
    let s = short_field(1.0);
    let recs = run_scenario(&s, &s.pipeline_config(None).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    let header = RecordsHeader::new(&s.name, s.seed, PredictorKind::Markov);
    write_records(&path, &header, &recs).unwrap();
    let (h, back) = read_records(&path).unwrap();
    assert_eq!(h, header);
    assert_eq!(back, recs);
    assert_eq!(evaluate(&back).to_csv(), evaluate(&recs).to_csv());
}

#[test]
fn pipeline_table_selects_the_linear_predictor() {
    let mut s = short_field(2.0);
    s.pipeline.insert("predictor_kind".into(), toml::Value::String("linear".into()));
    let cfg = s.pipeline_config(None).unwrap();
    assert_eq!(cfg.predictor_kind, PredictorKind::Linear);
    let recs = run_scenario(&s, &cfg).unwrap();
    let preds: Vec<_> = recs.iter().flat_map(|r| &r.predictions).collect();
    assert!(!preds.is_empty());
    assert!(preds.iter().all(|p| p.method == PredictorKind::Linear && p.chosen.is_none()));
}

#[test]
fn bundled_scenarios_round_trip_through_toml() {
    for (_, s) in golden::all() {
        let back = Scenario::parse(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back.frame_count(), s.frame_count());
        assert_eq!(back.agents.len(), s.agents.len());
        assert_eq!(back.pipeline, s.pipeline);
    }
}
