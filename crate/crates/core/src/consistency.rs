//! Does the MLE converge to the truth? Compares the limiting hazards with the
//! true ones, fits the logistic family that current status consistency would
//! force, and tabulates the bias of the uniform order-statistics design.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::limits::examples::order_stat_uniform_model;
use crate::limits::{equidistant_grid, EvaluationWindow, LimitEngine, LimitError, MarkLaw, PopulationModel};
use crate::quad::{integrate, QuadratureConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsistencyError {
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error("no grid point has 0 < F0X < 1 and G < 1")]
    EmptyGrid,
    #[error("the mark law has neither an x-density nor x-atoms, so its hazard is unavailable")]
    MissingDensity,
}

impl From<crate::quad::QuadratureFailure> for ConsistencyError {
    fn from(e: crate::quad::QuadratureFailure) -> Self {
        ConsistencyError::Limit(e.into())
    }
}

/// `Lambda_0(x, y) = int_[0,x] F0(ds, y) / (1 - F0X(s-))`; `y = inf` gives
/// `Lambda_0X`.
pub fn true_lambda(law: &MarkLaw, x: f64, y: f64, cfg: &QuadratureConfig) -> Result<f64, ConsistencyError> {
    if law.joint_x_density.is_none() && law.x_atoms.is_empty() {
        return Err(ConsistencyError::MissingDensity);
    }
    let mut total = 0.0;
    if x > 0.0 {
        if let (Some(fx), Some(fxy)) = (&law.x_density, &law.joint_x_density) {
            let mut points = law.x_breakpoints.clone();
            if y.is_finite() {
                points.push(y);
            }
            let density = |s: f64| if y == f64::INFINITY { fx(s) } else { fxy(s, y) };
            total += integrate(|s| density(s) / (1.0 - law.f0x(s)), 0.0, x, &points, cfg)?;
        }
    }
    for &(a, _) in law.x_atoms.iter().filter(|a| a.0 <= x) {
        let atom = law.joint_atom.as_ref().expect("atoms come with their joint masses");
        let mass = if y == f64::INFINITY {
            law.f0x(a) - law.f0x_left(a)
        } else {
            atom(a, y)
        };
        total += mass / (1.0 - law.f0x_left(a));
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ConsistentWithinTol,
    Inconsistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConsistentWithinTol => "consistent_within_tol",
            Verdict::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub model: String,
    pub grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// `Lambda_Xinf` on `grid`
    pub lambda_x_limit: Vec<f64>,
    /// `Lambda_0X` on `grid`
    pub lambda_x_true: Vec<f64>,
    pub hazard_x_gap: f64,
    pub hazard_x_gap_at: f64,
    pub hazard_xy_gap: f64,
    pub hazard_xy_gap_at: (f64, f64),
    pub threshold: f64,
    pub verdict: Verdict,
}

impl DiscrepancyReport {
    /// `(Lambda_Xinf(x), Lambda_0X(x))` at the grid point closest to `x`.
    pub fn hazards_near(&self, x: f64) -> Option<(f64, f64, f64)> {
        let i = (0..self.grid.len()).min_by(|&a, &b| (self.grid[a] - x).abs().total_cmp(&(self.grid[b] - x).abs()))?;
        Some((self.grid[i], self.lambda_x_limit[i], self.lambda_x_true[i]))
    }
}

impl fmt::Display for DiscrepancyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model: {}", self.model)?;
        writeln!(f, "verdict: {}", self.verdict)?;
        writeln!(f, "hazard_x_gap: {} at x = {}", self.hazard_x_gap, self.hazard_x_gap_at)?;
        writeln!(
            f,
            "hazard_xy_gap: {} at (x, y) = ({}, {})",
            self.hazard_xy_gap, self.hazard_xy_gap_at.0, self.hazard_xy_gap_at.1
        )?;
        writeln!(f, "threshold: {}", self.threshold)?;
        writeln!(f, "x,lambda_x_limit,lambda_x_true,gap")?;
        for ((x, a), b) in self.grid.iter().zip(&self.lambda_x_limit).zip(&self.lambda_x_true) {
            writeln!(f, "{x},{a},{b},{}", (a - b).abs())?;
        }
        Ok(())
    }
}

/// Sup-distance between limiting and true hazards over the window grid (an
/// equidistant 0.02 grid when the window has none) and `grid x y_grid`.
/// The verdict is inconsistent when either gap exceeds `10 * cfg.abs_tol`.
pub fn check_consistency(
    model: &PopulationModel,
    window: &EvaluationWindow,
    y_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<DiscrepancyReport, ConsistencyError> {
    check_consistency_with_threshold(model, window, y_grid, cfg, 10.0 * cfg.abs_tol)
}

pub fn check_consistency_with_threshold(
    model: &PopulationModel,
    window: &EvaluationWindow,
    y_grid: &[f64],
    cfg: &QuadratureConfig,
    threshold: f64,
) -> Result<DiscrepancyReport, ConsistencyError> {
    let engine = LimitEngine::new(model, window, cfg)?;
    let grid = if window.grid().is_empty() {
        equidistant_grid(0.0, window.tau(), 0.02)
    } else {
        window.grid().to_vec()
    };
    let pairs = grid
        .par_iter()
        .map(|&x| -> Result<(f64, f64), ConsistencyError> {
            Ok((engine.lambda_x(x)?, true_lambda(&model.law, x, f64::INFINITY, cfg)?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (lambda_x_limit, lambda_x_true): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (mut hazard_x_gap, mut hazard_x_gap_at) = (0.0, 0.0);
    for (i, &x) in grid.iter().enumerate() {
        let gap = (lambda_x_limit[i] - lambda_x_true[i]).abs();
        if gap > hazard_x_gap {
            hazard_x_gap = gap;
            hazard_x_gap_at = x;
        }
    }

    let points: Vec<(f64, f64)> = grid.iter().flat_map(|&x| y_grid.iter().map(move |&y| (x, y))).collect();
    let gaps = points
        .par_iter()
        .map(|&(x, y)| -> Result<f64, ConsistencyError> {
            Ok((engine.lambda(x, y)? - true_lambda(&model.law, x, y, cfg)?).abs())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mut hazard_xy_gap, mut hazard_xy_gap_at) = (0.0, (0.0, 0.0));
    for (p, g) in points.iter().zip(gaps) {
        if g > hazard_xy_gap {
            hazard_xy_gap = g;
            hazard_xy_gap_at = *p;
        }
    }
    let verdict = if hazard_x_gap > threshold || hazard_xy_gap > threshold {
        Verdict::Inconsistent
    } else {
        Verdict::ConsistentWithinTol
    };
    Ok(DiscrepancyReport {
        model: model.name.clone(),
        grid,
        y_grid: y_grid.to_vec(),
        lambda_x_limit,
        lambda_x_true,
        hazard_x_gap,
        hazard_x_gap_at,
        hazard_xy_gap,
        hazard_xy_gap_at,
        threshold,
        verdict,
    })
}

/// Outcome of fitting `F0X = [1 + exp(-C) (1 - G)]^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFamilyCheck {
    /// `inf {x : F0X(x) > 0}`
    pub gamma: f64,
    pub c_fit: Option<f64>,
    /// max over the grid of `|logit F0X + log(1 - G) - C|`
    pub max_fit_error: f64,
    /// max over the grid of `|F0X - F_C|`
    pub max_cdf_error: f64,
    /// `F_C(gamma)`, which is positive although `F0X(gamma) = 0`
    pub f_c_at_gamma: f64,
}

/// Current status consistency would need `F0X` in the logistic family
/// generated by `G`; this measures how far the model is from it.
pub fn logistic_family_check(
    g: &dyn Fn(f64) -> f64,
    f0x: &dyn Fn(f64) -> f64,
    grid: &[f64],
) -> Result<LogisticFamilyCheck, ConsistencyError> {
    let valid: Vec<(f64, f64)> = grid
        .iter()
        .filter_map(|&x| {
            let (f, gx) = (f0x(x), g(x));
            (f > 0.0 && f < 1.0 && gx < 1.0).then(|| (x, (f / (1.0 - f)).ln() + (1.0 - gx).ln()))
        })
        .collect();
    if valid.is_empty() {
        return Err(ConsistencyError::EmptyGrid);
    }
    let c = valid.iter().map(|v| v.1).sum::<f64>() / valid.len() as f64;
    let max_fit_error = valid.iter().map(|v| (v.1 - c).abs()).fold(0.0, f64::max);
    let family = |x: f64| 1.0 / (1.0 + (-c).exp() * (1.0 - g(x)));
    let max_cdf_error = valid.iter().map(|v| (f0x(v.0) - family(v.0)).abs()).fold(0.0, f64::max);

    // bisect for the left end of the support of F0X
    let first_positive = grid
        .iter()
        .copied()
        .filter(|&x| f0x(x) > 0.0)
        .fold(f64::INFINITY, f64::min);
    let gamma = if f0x(0.0) > 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, first_positive);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f0x(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(LogisticFamilyCheck {
        gamma,
        c_fit: Some(c),
        max_fit_error,
        max_cdf_error,
        f_c_at_gamma: family(gamma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasRow {
    pub k: usize,
    pub x: f64,
    pub lambda_k: f64,
    pub lambda_0: f64,
    pub gap: f64,
}

/// `|Lambda^k_Xinf(x) - Lambda_0X(x)|` for the uniform order-statistics
/// design over `k_list x x_list`, sorted by `k` then `x`.
pub fn bias_vs_k_study(
    law: &MarkLaw,
    theta: f64,
    k_list: &[usize],
    x_list: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<BiasRow>, ConsistencyError> {
    let tau = x_list.iter().copied().fold(0.0, f64::max);
    let truth = x_list
        .iter()
        .map(|&x| true_lambda(law, x, f64::INFINITY, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    let per_k = ks
        .par_iter()
        .map(|&k| -> Result<Vec<BiasRow>, ConsistencyError> {
            let model = order_stat_uniform_model(k, theta, law.clone())?;
            let window = EvaluationWindow::new(&model, tau, Vec::new(), cfg)?;
            let engine = LimitEngine::new(&model, &window, cfg)?;
            x_list
                .iter()
                .zip(&truth)
                .map(|(&x, &lambda_0)| {
                    let lambda_k = engine.lambda_x(x)?;
                    Ok(BiasRow {
                        k,
                        x,
                        lambda_k,
                        lambda_0,
                        gap: (lambda_k - lambda_0).abs(),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_k.into_iter().flatten().collect())
}
