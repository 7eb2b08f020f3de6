//! Localization error models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::robot::Vec2;
use crate::sampling::normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalizationModel {
    /// Slowly wandering bias: a per-step Gaussian random walk on each axis,
    /// reflected radially at `bound_mm`.
    RtkDrift { step_sigma_mm: f64, bound_mm: f64 },
    /// Independent Gaussian error on each axis at every update.
    LidarGaussian { sigma_mm: f64 },
}

impl LocalizationModel {
    pub const NONE: LocalizationModel = LocalizationModel::LidarGaussian { sigma_mm: 0.0 };

    pub fn is_zero(&self) -> bool {
        match *self {
            LocalizationModel::RtkDrift { step_sigma_mm, .. } => step_sigma_mm == 0.0,
            LocalizationModel::LidarGaussian { sigma_mm } => sigma_mm == 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            LocalizationModel::RtkDrift { step_sigma_mm, bound_mm } => {
                step_sigma_mm >= 0.0 && bound_mm > 0.0 && step_sigma_mm.is_finite() && bound_mm.is_finite()
            }
            LocalizationModel::LidarGaussian { sigma_mm } => sigma_mm >= 0.0 && sigma_mm.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid localization parameters {self:?}"))
        }
    }
}

/// Stateful error source; holds the drift bias between updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Localizer {
    model: LocalizationModel,
    bias: Vec2,
}

impl Localizer {
    pub fn new(model: LocalizationModel) -> Self {
        Localizer { model, bias: Vec2::ZERO }
    }

    pub fn model(&self) -> LocalizationModel {
        self.model
    }

    pub fn bias(&self) -> Vec2 {
        self.bias
    }

    /// Returns the believed position for `true_position`, advancing the
    /// error state by one step. `dt` only scales drift through the per-step
    /// sigma, which is defined at the nominal control period.
    pub fn update<R: Rng + ?Sized>(&mut self, true_position: Vec2, rng: &mut R) -> Vec2 {
        match self.model {
            LocalizationModel::RtkDrift { step_sigma_mm, bound_mm } => {
                let b = self.bias + Vec2::new(normal(rng, step_sigma_mm), normal(rng, step_sigma_mm));
                let r = b.norm();
                self.bias = if r > bound_mm {
                    let reflected = (2.0 * bound_mm - r).max(0.0);
                    b * (reflected / r)
                } else {
                    b
                };
                true_position + self.bias
            }
            LocalizationModel::LidarGaussian { sigma_mm } => {
                self.bias = Vec2::new(normal(rng, sigma_mm), normal(rng, sigma_mm));
                true_position + self.bias
            }
        }
    }
}

/// One-shot form: advances `localizer` and returns the believed position.
pub fn localization_update<R: Rng + ?Sized>(
    localizer: &mut Localizer,
    true_position: Vec2,
    dt: f64,
    rng: &mut R,
) -> Vec2 {
    debug_assert!(dt > 0.0);
    localizer.update(true_position, rng)
}
