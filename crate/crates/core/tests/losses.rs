mod common;

use common::fixtures::triple_loss_fd_trials;
use eusa::diffnum::{Tape, Tensor, Var};
use eusa::losses::*;
use eusa::tracker::HeadVars;
use proptest::prelude::*;

/// Components evaluate to `L_f = -1.3` (margin 0.5), `L_c = -1.8`, `L_d = -3.0`.
fn known_components(tape: &mut Tape<f64>) -> (Var, Var, HeadVars) {
    let clean = tape.constant(Tensor::new(&[2, 1, 2], vec![1.0, 0.0, 1.0, 0.0]).unwrap());
    let adv = tape.param(Tensor::new(&[2, 1, 2], vec![0.8, 0.6, -0.3, 0.91f64.sqrt()]).unwrap());
    let fg = tape.param(Tensor::new(&[3], vec![0.9, 0.2, 0.7]).unwrap());
    let reg = tape.param(Tensor::new(&[1, 4, 1, 1], vec![1.0, 1.0, 3.0, 4.0]).unwrap());
    let cls_logits = tape.constant(Tensor::zeros(&[1, 2, 1, 1]));
    (clean, adv, HeadVars { cls_logits, fg, reg })
}

#[test]
fn weighted_combination() {
    let mut tape = Tape::new();
    let (clean, adv, heads) = known_components(&mut tape);
    let cfg = TripleLossConfig { margin: 0.5, ..Default::default() };
    let loss = triple_loss(&mut tape, clean, adv, &heads, &cfg).unwrap();
    let v = |x: Option<Var>| tape.value(x.unwrap()).item();
    assert!((v(loss.feature) + 1.3).abs() < 1e-12);
    assert!((v(loss.confidence) + 1.8).abs() < 1e-12);
    assert!((v(loss.drift) + 3.0).abs() < 1e-12);
    assert!((tape.value(loss.total).item() + 5.02).abs() < 1e-12);
}

#[test]
fn zero_weights_leave_the_feature_term() {
    let mut tape = Tape::new();
    let (clean, adv, heads) = known_components(&mut tape);
    let cfg = TripleLossConfig { margin: 0.5, lambda1: 0.0, lambda2: 0.0, ..Default::default() };
    let loss = triple_loss(&mut tape, clean, adv, &heads, &cfg).unwrap();
    assert!((tape.value(loss.total).item() + 1.3).abs() < 1e-12);
}

#[test]
fn identical_features_give_minus_channel_count() {
    let mut tape = Tape::new();
    let f = Tensor::from_fn(&[5, 3, 3], |i| (i as f64 * 0.37).sin() + 0.1);
    let (clean, adv) = (tape.constant(f.clone()), tape.param(f));
    let (_, _, heads) = known_components(&mut tape);
    let cfg = TripleLossConfig { lambda1: 0.0, lambda2: 0.0, margin: 1.0, ..Default::default() };
    let loss = triple_loss(&mut tape, clean, adv, &heads, &cfg).unwrap();
    assert!((tape.value(loss.total).item() + 5.0).abs() < 1e-12);
}

#[test]
fn disabled_terms_are_absent() {
    let mut tape = Tape::new();
    let (clean, adv, heads) = known_components(&mut tape);
    let cfg = TripleLossConfig { terms: "d".parse().unwrap(), ..Default::default() };
    let loss = triple_loss(&mut tape, clean, adv, &heads, &cfg).unwrap();
    assert!(loss.feature.is_none() && loss.confidence.is_none());
    assert!((tape.value(loss.total).item() - 0.7 * -3.0).abs() < 1e-12);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        TripleLossConfig { lambda1: -0.1, ..Default::default() },
        TripleLossConfig { margin: 1.5, ..Default::default() },
        TripleLossConfig { beta: 2.0, ..Default::default() },
        TripleLossConfig { terms: LossTerms { feature: false, confidence: false, drift: false }, ..Default::default() },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}

#[test]
fn triple_loss_gradient_matches_finite_differences() {
    let err = triple_loss_fd_trials(4, 12, 0x7e57);
    assert!(err < 1e-4, "relative error {err:e}");
}

proptest! {
    #[test]
    fn feature_loss_is_bounded_by_margin(
        a in prop::collection::vec(-1.0f64..1.0, 12),
        b in prop::collection::vec(-1.0f64..1.0, 12),
        margin in 0.0f64..1.0,
    ) {
        let mut tape = Tape::new();
        let clean = tape.constant(Tensor::new(&[3, 2, 2], a).unwrap());
        let adv = tape.param(Tensor::new(&[3, 2, 2], b).unwrap());
        let l = feature_deflect_loss(&mut tape, clean, adv, margin).unwrap();
        prop_assert!(tape.value(l).item() <= -3.0 * margin + 1e-12);
        tape.backward(l).unwrap();
        prop_assert!(tape.grad(clean).is_none());
    }

    #[test]
    fn drift_loss_is_nonpositive(reg in prop::collection::vec(-3.0f64..3.0, 2 * 4 * 2 * 2), beta in 0.0f64..1.0) {
        let mut tape = Tape::new();
        let r = tape.param(Tensor::new(&[2, 4, 2, 2], reg).unwrap());
        let l = drift_loss(&mut tape, r, beta, [1.0, 1.0]).unwrap();
        prop_assert!(tape.value(l).item() <= 0.0);
    }

    #[test]
    fn confidence_loss_lies_in_open_interval(logits in prop::collection::vec(-20.0f64..20.0, 2 * 6)) {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[6, 2], logits).unwrap());
        let p = tape.softmax(x, 1).unwrap();
        let fg = tape.narrow(p, 1, 1, 1).unwrap();
        let fg = tape.reshape(fg, &[6]).unwrap();
        let l = confidence_loss(&mut tape, fg);
        let l = tape.value(l).item();
        prop_assert!(l > -6.0 && l < 0.0);
    }
}

#[test]
fn drift_loss_vanishes_only_at_target() {
    let mut tape = Tape::new();
    let at = tape.param(Tensor::new(&[1, 4, 1, 1], vec![1.0, 1.0, 0.0, 0.0]).unwrap());
    let l = drift_loss(&mut tape, at, 0.6, [1.0, 1.0]).unwrap();
    assert_eq!(tape.value(l).item(), 0.0);
    let off = tape.param(Tensor::new(&[1, 4, 1, 1], vec![0.0, 0.0, 0.0, 0.0]).unwrap());
    let l = drift_loss(&mut tape, off, 0.6, [1.0, 1.0]).unwrap();
    assert!((tape.value(l).item() + 2f64.sqrt()).abs() < 1e-12);
}
