use dynmap::geometry::{Frame, ObstacleBox};
use dynmap::tracker::{Label, Tracker, TrackerConfig};
use nalgebra::{Vector2, Vector3};

fn person(p: Vector2<f64>) -> ObstacleBox {
    ObstacleBox::new(Frame::Map, Vector3::new(p.x, p.y, 0.85), Vector3::new(0.4, 0.4, 1.7)).unwrap()
}

#[test]
fn exact_detections_give_exact_positions_and_converging_velocity() {
    let cfg = TrackerConfig::default();
    let v = Vector2::new(0.8, -0.5);
    let p0 = Vector2::new(2.0, 1.0);
    let mut tr = Tracker::new(cfg.clone()).unwrap();
    for s in 0..150u64 {
        tr.step(s, &[person(p0 + v * (s as f64 * cfg.dt))], None).unwrap();
    }
    let t = &tr.tracks()[0];
    let truth = p0 + v * (149.0 * cfg.dt);
    assert!((t.bx.center.xy() - truth).norm() < 1e-6);
    assert!((t.velocity() - v).norm() < 1e-6, "velocity {:?}", t.velocity());
    assert_eq!(t.label, Label::Dynamic);
    assert!(t.continuity.unwrap() > 0.999);
}

#[test]
fn two_crossing_walkers_keep_their_identities() {
    let cfg = TrackerConfig::default();
    let mut tr = Tracker::new(cfg.clone()).unwrap();
    let (a0, av) = (Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0));
    let (b0, bv) = (Vector2::new(0.0, 3.0), Vector2::new(1.0, 0.0));
    let mut ids = None;
    for s in 0..90u64 {
        let t = s as f64 * cfg.dt;
        let report = tr.step(s, &[person(a0 + av * t), person(b0 + bv * t)], None).unwrap();
        if s == 0 {
            ids = Some((report.spawned[0], report.spawned[1]));
        } else {
            assert!(report.spawned.is_empty() && report.retired.is_empty());
        }
    }
    let (ia, ib) = ids.unwrap();
    assert!(tr.track(ia).unwrap().bx.center.y < 1.0);
    assert!(tr.track(ib).unwrap().bx.center.y > 2.0);
}

#[test]
fn missing_detections_coast_then_retire() {
    let cfg = TrackerConfig::default();
    let mut tr = Tracker::new(cfg.clone()).unwrap();
    for s in 0..10u64 {
        tr.step(s, &[person(Vector2::new(1.0 + s as f64 * 0.03, 0.0))], None).unwrap();
    }
    let mut retired_at = None;
    for s in 10..40u64 {
        let report = tr.step(s, &[], None).unwrap();
        if !report.retired.is_empty() {
            retired_at = Some(s);
            break;
        }
    }
    // unmatched for more than k frames
    assert_eq!(retired_at, Some(10 + cfg.history_len as u64));
    assert!(tr.tracks().is_empty());
}

#[test]
fn stamps_must_increase() {
    let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
    tr.step(3, &[person(Vector2::new(1.0, 0.0))], None).unwrap();
    assert!(tr.step(3, &[person(Vector2::new(1.0, 0.0))], None).is_err());
}
