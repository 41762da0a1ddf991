use crate::corpus::VideoSequence;
use crate::diffnum::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::losses::{triple_loss, TripleLossConfig};
use crate::scalar::Real;
use crate::tracker::{extract_template, template_embed, TrackerModel, PIXEL_MAX};

/// A video prepared for the attack: its first-frame template embedding.
#[derive(Clone, Debug)]
pub struct AttackTarget<'v, T: Real = f64> {
    pub video: &'v VideoSequence,
    pub template_feat: Tensor<T>,
}

impl<'v, T: Real> AttackTarget<'v, T> {
    pub fn new(model: &TrackerModel<T>, video: &'v VideoSequence) -> Result<Self> {
        if video.len() < 2 {
            return Err(Error::InvalidArgument(format!("video {} needs at least two frames", video.id)));
        }
        let z = extract_template::<T>(&video.frames[0], &video.gt[0])?;
        Ok(AttackTarget { video, template_feat: template_embed(&z, model)? })
    }
}

/// Values of the enabled loss terms before weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TermValues {
    pub feature: Option<f64>,
    pub confidence: Option<f64>,
    pub drift: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Objective<T: Real = f64> {
    pub loss: f64,
    pub terms: TermValues,
    /// `∂L/∂δ`, shaped like the search region.
    pub grad: Tensor<T>,
}

/// Triple loss of the perturbed search region `clamp(search + delta)` against
/// the clean one, with its gradient with respect to `delta`.
pub fn adversarial_objective<T: Real>(
    model: &TrackerModel<T>,
    template_feat: &Tensor<T>,
    search: &Tensor<T>,
    delta: &Tensor<T>,
    cfg: &TripleLossConfig,
) -> Result<Objective<T>> {
    if search.shape() != delta.shape() {
        return Err(Error::shape(
            "adversarial_objective",
            "perturbation",
            format!("{:?}", search.shape()),
            format!("{:?}", delta.shape()),
        ));
    }
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    let z = tape.constant(template_feat.clone());
    let s = tape.constant(search.clone());
    let d = tape.param(delta.clone());
    let x = tape.add(s, d)?;
    let x = tape.clamp(x, T::zero(), T::of(PIXEL_MAX));
    let f_clean = model.encode(&mut tape, &bound, s)?;
    let f_adv = model.encode(&mut tape, &bound, x)?;
    let heads = model.heads(&mut tape, &bound, z, f_adv)?;
    let loss = triple_loss(&mut tape, f_clean, f_adv, &heads, cfg)?;
    tape.backward(loss.total)?;
    let grad = match tape.grad(d) {
        Some(g) => Tensor::new(delta.shape(), g.to_vec())?,
        None => Tensor::zeros(delta.shape()),
    };
    let read = |v: Option<crate::diffnum::Var>| v.map(|v| tape.value(v).item().as_f64());
    Ok(Objective {
        loss: tape.value(loss.total).item().as_f64(),
        terms: TermValues { feature: read(loss.feature), confidence: read(loss.confidence), drift: read(loss.drift) },
        grad,
    })
}

/// `clip(δ + η·sign(g), -ε, ε)` with `sign(0) = 0`.
pub fn pgd_step<T: Real>(delta: &Tensor<T>, grad: &Tensor<T>, step: f64, epsilon: f64) -> Result<Tensor<T>> {
    if delta.shape() != grad.shape() {
        return Err(Error::shape(
            "pgd_step",
            "gradient",
            format!("{:?}", delta.shape()),
            format!("{:?}", grad.shape()),
        ));
    }
    let (eta, eps) = (T::of(step), T::of(epsilon));
    let values =
        delta.data().iter().zip(grad.data()).map(|(&d, &g)| (d + eta * g.sign0()).max(-eps).min(eps)).collect();
    Tensor::new(delta.shape(), values)
}
