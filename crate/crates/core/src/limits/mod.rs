//! Almost-sure limits of the product-limit MLE.

mod engine;
pub mod examples;
mod model;

use thiserror::Error;

use crate::quad::QuadratureFailure;

pub use engine::{default_tau, equidistant_grid, pop_h, pop_v, pop_vx, EvaluationWindow, LimitEngine};
pub use model::{AtomicDesign, ContinuousDesign, Design, Fn1, Fn2, MarkLaw, PopulationModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error(transparent)]
    QuadratureFailure(#[from] QuadratureFailure),
    #[error("x = {x} lies outside the window [0, {tau}]")]
    WindowViolation { x: f64, tau: f64 },
    #[error("H({tau}) = {h} is not below 1; pick a smaller tau")]
    WindowInvalid { tau: f64, h: f64 },
    #[error("V_X has no mass near x = {x} where V(., y) does")]
    DivisionByZeroMeasure { x: f64 },
    #[error("the current status route needs k = 1, the model has k = {0}")]
    NotCurrentStatus(usize),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// `Lambda_inf(x, y)` on a window.
pub fn pop_lambda(
    model: &PopulationModel,
    window: &EvaluationWindow,
    x: f64,
    y: f64,
    cfg: &crate::QuadratureConfig,
) -> Result<f64, LimitError> {
    LimitEngine::new(model, window, cfg)?.lambda(x, y)
}

/// `Lambda_Xinf(x)` on a window.
pub fn pop_lambda_x(
    model: &PopulationModel,
    window: &EvaluationWindow,
    x: f64,
    cfg: &crate::QuadratureConfig,
) -> Result<f64, LimitError> {
    LimitEngine::new(model, window, cfg)?.lambda_x(x)
}

/// `F^l_inf(x, y)` on a window.
pub fn pop_f_lim(
    model: &PopulationModel,
    window: &EvaluationWindow,
    x: f64,
    y: f64,
    cfg: &crate::QuadratureConfig,
) -> Result<f64, LimitError> {
    LimitEngine::new(model, window, cfg)?.f_lim(x, y)
}

/// `F^l_Xinf(x)` on a window.
pub fn pop_fx_lim(
    model: &PopulationModel,
    window: &EvaluationWindow,
    x: f64,
    cfg: &crate::QuadratureConfig,
) -> Result<f64, LimitError> {
    LimitEngine::new(model, window, cfg)?.fx_lim(x)
}

/// `F^l_inf(x, y)` through `P(Y <= y | X <= s)`; current status only.
pub fn pop_f_lim_current_status(
    model: &PopulationModel,
    window: &EvaluationWindow,
    x: f64,
    y: f64,
    cfg: &crate::QuadratureConfig,
) -> Result<f64, LimitError> {
    LimitEngine::new(model, window, cfg)?.f_lim_current_status(x, y)
}
