use std::cell::RefCell;

use brie_core::corpus::{generate_synthetic, Corpus, SplitAssignment, SyntheticSpec};
use brie_core::evaluation::{activity_sweep, build_test_cases, evaluate, EvalConfig};
use brie_core::models::{init_params, LearnedScorer, ModelConfig, ModelKind, ModelParams};
use brie_core::training::*;
use brie_core::{Error, Exec};
use proptest::prelude::*;

fn small() -> (Corpus, SplitAssignment) {
    generate_synthetic(&SyntheticSpec { n_users: 60, n_items: 12, n_photos: 900, ..SyntheticSpec::default() }).unwrap()
}

fn configs(kind: ModelKind, c: &Corpus, epochs: usize) -> (ModelConfig, TrainConfig) {
    let mut m = ModelConfig::new(kind, 8, c.feature_dim());
    m.mlp_hidden = vec![8, 4];
    m.seed = 21;
    let mut t = TrainConfig::new(LossKind::for_model(kind).unwrap());
    t.batch_size = 128;
    t.max_epochs = epochs;
    t.seed = 21;
    (m, t)
}

#[test]
fn zero_learning_rate_keeps_init() {
    let (c, s) = small();
    for kind in [ModelKind::Brie, ModelKind::MfElvis, ModelKind::Elvis] {
        let (m, mut t) = configs(kind, &c, 2);
        t.lr = 0.0;
        let out = train(&c, &s, &m, &t).unwrap();
        assert_eq!(out.params, init_params(&m, c.n_users()).unwrap(), "{kind}");
        assert_eq!(out.epochs.len(), 2);
    }
}

#[test]
fn training_is_deterministic_across_exec_modes() {
    let (c, s) = small();
    for kind in [ModelKind::Brie, ModelKind::MfElvis, ModelKind::Elvis] {
        let (m, mut t) = configs(kind, &c, 2);
        t.exec = Exec::Sequential;
        let a = train(&c, &s, &m, &t).unwrap();
        let b = train(&c, &s, &m, &t).unwrap();
        t.exec = Exec::Parallel;
        let p = train(&c, &s, &m, &t).unwrap();
        assert_eq!(a.params, b.params, "{kind}");
        assert_eq!(a.params, p.params, "{kind}");
        let losses = |o: &TrainOutcome| o.epochs.iter().map(|e| e.train_loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&p));
    }
}

#[test]
fn every_model_reduces_its_loss() {
    let (c, s) = small();
    for kind in [ModelKind::Brie, ModelKind::MfElvis, ModelKind::Elvis] {
        let (m, mut t) = configs(kind, &c, 8);
        t.lr = 5e-3;
        let out = train(&c, &s, &m, &t).unwrap();
        let first = out.epochs[0].train_loss;
        let last = out.epochs.last().unwrap().train_loss;
        assert!(last < first, "{kind}: {first} -> {last}");
        assert!(out.params.is_finite());
    }
}

#[test]
fn loss_must_match_model() {
    let (c, s) = small();
    let (m, mut t) = configs(ModelKind::Brie, &c, 1);
    t.loss = LossKind::Bce;
    assert!(matches!(train(&c, &s, &m, &t), Err(Error::InvalidConfig(_))));
    let m = ModelConfig::new(ModelKind::Cnt, 8, c.feature_dim());
    assert!(train(&c, &s, &m, &TrainConfig::new(LossKind::Bpr)).is_err());
}

#[test]
fn diverging_run_reports_non_finite_loss() {
    let (c, s) = small();
    let (m, mut t) = configs(ModelKind::MfElvis, &c, 50);
    t.lr = 1e300;
    match train(&c, &s, &m, &t) {
        Err(Error::NonFiniteLoss { .. }) => {}
        other => panic!("expected NonFiniteLoss, got {:?}", other.map(|o| o.epochs.len())),
    }
}

#[test]
fn resource_totals_accumulate() {
    let (c, s) = small();
    let (m, t) = configs(ModelKind::Brie, &c, 3);
    let out = train(&c, &s, &m, &t).unwrap();
    let secs: f64 = out.epochs.iter().map(|e| e.seconds).sum();
    let last = out.epochs.last().unwrap();
    assert!((last.cumulative_seconds - secs).abs() < 1e-9);
    assert!((last.cumulative_energy_j - secs * t.power.watts).abs() < 1e-6);
    assert!(last.cumulative_co2_g >= 0.0);
}

/// Scripted monitor: returns `values[epoch]` and snapshots the parameters.
fn scripted(values: &[f64], patience: usize) -> (TrainOutcome, Vec<ModelParams<f32>>) {
    let (c, s) = small();
    let (m, mut t) = configs(ModelKind::Brie, &c, 40);
    t.early_stop = EarlyStopConfig { enabled: true, patience, min_delta: 1e-3, cap: 100 };
    let snaps = RefCell::new(Vec::new());
    let out = train_with_monitor(&c, &s, &m, &t, |epoch, p| {
        snaps.borrow_mut().push(p.clone());
        Ok(Some(values[epoch]))
    })
    .unwrap();
    (out, snaps.into_inner())
}

#[test]
fn early_stop_restores_best_epoch() {
    let values = [0.60, 0.70, 0.7005, 0.69, 0.7008, 0.65, 0.7009, 0.99, 0.99];
    let (out, snaps) = scripted(&values, 5);
    // epoch 1 is the last gain above min_delta; epochs 2..=6 are stale
    assert!(out.stopped_early);
    assert_eq!(out.epochs.len(), 7);
    assert_eq!(out.best_epoch, Some(1));
    assert_eq!(out.params, snaps[1]);
    assert_ne!(out.params, snaps[6]);
    assert_eq!(out.epochs[3].val_mauc, Some(0.69));
}

#[test]
fn early_stop_cap_bounds_epochs() {
    let (c, s) = small();
    let (m, mut t) = configs(ModelKind::Brie, &c, 40);
    t.early_stop = EarlyStopConfig { enabled: true, patience: 5, min_delta: 1e-3, cap: 4 };
    let out = train_with_monitor(&c, &s, &m, &t, |e, _| Ok(Some(e as f64))).unwrap();
    assert_eq!(out.epochs.len(), 4);
    assert!(!out.stopped_early);
    assert_eq!(out.best_epoch, Some(3));
}

#[test]
fn validation_monitor_runs_by_default_when_enabled() {
    let (c, s) = small();
    let (m, mut t) = configs(ModelKind::Brie, &c, 3);
    t.early_stop.enabled = true;
    let out = train(&c, &s, &m, &t).unwrap();
    assert!(out.epochs.iter().all(|e| e.val_mauc.is_some_and(|v| (0.0..=1.0).contains(&v))));
}

/// MedPerc on a trained model should not get worse for more active
/// authors, within a few points of noise.
#[test]
fn medperc_improves_with_activity() {
    let (c, s) = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let (mut m, mut t) = configs(ModelKind::Brie, &c, 20);
    m.d = 16;
    t.batch_size = 1024;
    t.lr = 5e-3;
    let out = train(&c, &s, &m, &t).unwrap();
    let cases = build_test_cases(&c, &s);
    let scorer = LearnedScorer::new(&out.params, &c, Exec::default()).unwrap();
    let ev = evaluate(&cases, &scorer, &EvalConfig::default()).unwrap();
    let rows = activity_sweep(&cases, &ev.ranked, &[1, 5, 10, 15, 20]).unwrap();
    for w in rows.windows(2) {
        if let (Some(a), Some(b)) = (w[0].med_perc, w[1].med_perc) {
            assert!(b <= a + 5.0, "{rows:?}");
        }
    }
}

proptest! {
    #[test]
    fn bpr_is_shift_invariant(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
        prop_assert!((bpr_loss(a + c, b + c) - bpr_loss(a, b)).abs() < 1e-9);
    }

    #[test]
    fn adam_moves_against_gradient_sign(g in prop::collection::vec(-10.0f64..10.0, 1..16), lr in 1e-5f64..1e-1) {
        let mut x = vec![0.0f64; g.len()];
        let mut adam = AdamState::new([g.len()]);
        adam.step(vec![&mut x[..]], vec![&g[..]], lr);
        for (xi, gi) in x.iter().zip(&g) {
            if gi.abs() > 1e-6 {
                prop_assert!(xi * gi < 0.0);
                prop_assert!(xi.abs() <= lr * 1.0001);
            }
        }
    }
}
