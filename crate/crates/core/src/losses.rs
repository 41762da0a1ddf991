//! Feature-deflect, confidence and drift losses and their weighted sum.
//!
//! All terms are non-positive and are *maximised* by the attack.

use serde::{Deserialize, Serialize};

use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tracker::HeadVars;

/// Which of the three terms take part in [`triple_loss`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossTerms {
    pub feature: bool,
    pub confidence: bool,
    pub drift: bool,
}

impl LossTerms {
    pub const ALL: LossTerms = LossTerms { feature: true, confidence: true, drift: true };

    /// The seven non-empty subsets, singles first, full set last.
    pub fn subsets() -> [LossTerms; 7] {
        let t = |feature, confidence, drift| LossTerms { feature, confidence, drift };
        [
            t(true, false, false),
            t(false, true, false),
            t(false, false, true),
            t(true, true, false),
            t(true, false, true),
            t(false, true, true),
            t(true, true, true),
        ]
    }

    pub fn is_empty(&self) -> bool {
        !(self.feature || self.confidence || self.drift)
    }

    /// Compact label such as `f,c,d`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.feature {
            parts.push("f");
        }
        if self.confidence {
            parts.push("c");
        }
        if self.drift {
            parts.push("d");
        }
        parts.join(",")
    }
}

impl Default for LossTerms {
    fn default() -> Self {
        LossTerms::ALL
    }
}

impl std::str::FromStr for LossTerms {
    type Err = Error;

    /// Parses comma-separated subsets of `f`, `c`, `d`.
    fn from_str(s: &str) -> Result<Self> {
        let mut terms = LossTerms { feature: false, confidence: false, drift: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "f" => terms.feature = true,
                "c" => terms.confidence = true,
                "d" => terms.drift = true,
                other => {
                    return Err(Error::InvalidArgument(format!("unknown loss term {other:?}, expected f, c or d")))
                }
            }
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("at least one loss term is required".into()));
        }
        Ok(terms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripleLossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Cosine floor of the feature-deflect term.
    pub margin: f64,
    /// Weight of the shape part of the drift term.
    pub beta: f64,
    /// Target location offset, in anchor-normalised units.
    pub direction: [f64; 2],
    pub terms: LossTerms,
}

impl Default for TripleLossConfig {
    fn default() -> Self {
        TripleLossConfig {
            lambda1: 0.9,
            lambda2: 0.7,
            margin: 0.0,
            beta: 0.6,
            direction: [1.0, 1.0],
            terms: LossTerms::ALL,
        }
    }
}

impl TripleLossConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad(format!("lambda1/lambda2 must be >= 0, got {}/{}", self.lambda1, self.lambda2));
        }
        if !(-1.0..=1.0).contains(&self.margin) {
            return bad(format!("margin must lie in [-1, 1], got {}", self.margin));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if self.terms.is_empty() {
            return bad("at least one loss term is required".into());
        }
        Ok(())
    }
}

/// `-Σ_c max(m, cos(F_clean[c], F_adv[c]))`; no gradient reaches `f_clean`.
pub fn feature_deflect_loss<T: Real>(tape: &mut Tape<T>, f_clean: Var, f_adv: Var, margin: f64) -> Result<Var> {
    let (cs, as_) = (tape.shape(f_clean).to_vec(), tape.shape(f_adv).to_vec());
    if cs.first() != as_.first() {
        return Err(Error::shape("feature_deflect_loss", "channels", cs[0], as_[0]));
    }
    if cs != as_ {
        return Err(Error::shape("feature_deflect_loss", "feature map", format!("{cs:?}"), format!("{as_:?}")));
    }
    let clean = tape.detach(f_clean);
    let mut per_channel = Vec::with_capacity(cs[0]);
    for c in 0..cs[0] {
        let a = tape.narrow(clean, 0, c, 1)?;
        let b = tape.narrow(f_adv, 0, c, 1)?;
        let cos = tape.cosine_similarity(a, b)?;
        per_channel.push(tape.max_with_constant(cos, T::of(margin)));
    }
    let stacked = tape.stack(&per_channel)?;
    let total = tape.sum(stacked);
    Ok(tape.scale(total, -T::one()))
}

/// `-Σ_j C_j` over all foreground scores.
pub fn confidence_loss<T: Real>(tape: &mut Tape<T>, fg: Var) -> Var {
    let total = tape.sum(fg);
    tape.scale(total, -T::one())
}

/// `-β·‖R_shape‖₂ - ‖R_loc - D‖₂` for regression output `[A, 4, H, W]`.
pub fn drift_loss<T: Real>(tape: &mut Tape<T>, reg: Var, beta: f64, direction: [f64; 2]) -> Result<Var> {
    let shape = tape.shape(reg).to_vec();
    if shape.len() != 4 || shape[1] != 4 {
        return Err(Error::shape("drift_loss", "regression output", "[A, 4, H, W]", format!("{shape:?}")));
    }
    let loc = tape.narrow(reg, 1, 0, 2)?;
    let shp = tape.narrow(reg, 1, 2, 2)?;
    let cells = shape[2] * shape[3];
    let target = Tensor::from_fn(&[shape[0], 2, shape[2], shape[3]], |i| T::of(direction[(i / cells) % 2]));
    let target = tape.constant(target);
    let loc_err = tape.sub(loc, target)?;
    let loc_norm = tape.l2_norm(loc_err);
    let shp_norm = tape.l2_norm(shp);
    let a = tape.scale(shp_norm, T::of(-beta));
    let b = tape.scale(loc_norm, -T::one());
    tape.add(a, b)
}

/// Loss variables recorded by [`triple_loss`]; disabled terms are `None`.
#[derive(Clone, Copy, Debug)]
pub struct TripleLoss {
    pub total: Var,
    pub feature: Option<Var>,
    pub confidence: Option<Var>,
    pub drift: Option<Var>,
}

/// `L_f + λ1·L_c + λ2·L_d`, restricted to the enabled terms.
pub fn triple_loss<T: Real>(
    tape: &mut Tape<T>,
    f_clean: Var,
    f_adv: Var,
    heads: &HeadVars,
    cfg: &TripleLossConfig,
) -> Result<TripleLoss> {
    cfg.validate()?;
    let feature = if cfg.terms.feature { Some(feature_deflect_loss(tape, f_clean, f_adv, cfg.margin)?) } else { None };
    let confidence = cfg.terms.confidence.then(|| confidence_loss(tape, heads.fg));
    let drift = if cfg.terms.drift { Some(drift_loss(tape, heads.reg, cfg.beta, cfg.direction)?) } else { None };
    let weighted = [feature.map(|v| (v, 1.0)), confidence.map(|v| (v, cfg.lambda1)), drift.map(|v| (v, cfg.lambda2))];
    let mut total: Option<Var> = None;
    for (v, w) in weighted.into_iter().flatten() {
        let term = if w == 1.0 { v } else { tape.scale(v, T::of(w)) };
        total = Some(match total {
            None => term,
            Some(t) => tape.add(t, term)?,
        });
    }
    let total = total.expect("validated: at least one term");
    Ok(TripleLoss { total, feature, confidence, drift })
}
