//! Population functionals `V`, `H`, `Lambda` and the lower limits `F^l_inf`.
//!
//! Continuous designs go through adaptive quadrature, with `H` and
//! `Lambda_X` tabulated once per window so that the `F` limits only need one
//! level of nested integration. Atomic designs are exact finite sums.

use rayon::prelude::*;

use super::model::{AtomicDesign, ContinuousDesign, Design, MarkLaw, PopulationModel};
use super::LimitError;
use crate::cheb::ChebTable;
use crate::quad::{integrate, QuadratureConfig};

// Tables are built with quadrature this tight so that interpolation error,
// not integration noise, decides the refinement.
const TABLE_TOL: f64 = 1e-11;
const TABLE_QUAD_TOL: f64 = 1e-13;

fn breakpoints(law: &MarkLaw, design: &ContinuousDesign) -> Vec<f64> {
    let mut b: Vec<f64> = law.x_breakpoints.iter().chain(&design.breakpoints).copied().collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn continuous_v(
    law: &MarkLaw,
    d: &ContinuousDesign,
    x: f64,
    y: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, LimitError> {
    let top = x.min(d.t_max);
    if top <= 0.0 {
        return Ok(0.0);
    }
    let weight = |s: f64| match &d.pair_tail {
        Some(tail) => (d.marginal_sum)(s) - tail(s, x),
        None => (d.marginal_sum)(s),
    };
    Ok(integrate(
        |s| law.f0(s, y) * weight(s),
        0.0,
        top,
        &breakpoints(law, d),
        cfg,
    )?)
}

fn continuous_h(law: &MarkLaw, d: &ContinuousDesign, x: f64, cfg: &QuadratureConfig) -> Result<f64, LimitError> {
    let top = x.min(d.t_max);
    if top <= 0.0 {
        return Ok(0.0);
    }
    let vx = continuous_v(law, d, x, f64::INFINITY, cfg)?;
    let last = d.last();
    let censored = integrate(|s| (1.0 - law.f0x(s)) * last(s), 0.0, top, &breakpoints(law, d), cfg)?;
    Ok(vx + censored)
}

/// Density `V(dt, y) / dt`.
fn continuous_v_density(
    law: &MarkLaw,
    d: &ContinuousDesign,
    t: f64,
    y: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, LimitError> {
    let direct = (d.marginal_sum)(t) * law.f0(t, y);
    match &d.pair_sum {
        None => Ok(direct),
        Some(pair) => {
            let inner = integrate(|s| law.f0(s, y) * pair(s, t), 0.0, t, &breakpoints(law, d), cfg)?;
            Ok(direct - inner)
        }
    }
}

/// `(t, Delta V(t, y))` for the atoms of an atomic design with `t <= x`.
fn atomic_v_jumps(law: &MarkLaw, d: &AtomicDesign, x: f64, y: f64) -> Vec<(f64, f64)> {
    d.support()
        .into_iter()
        .filter(|&t| t <= x)
        .map(|t| {
            let mut jump = 0.0;
            for (times, w) in d.atoms() {
                for (j, &tj) in times.iter().enumerate() {
                    if tj == t {
                        let prev = if j == 0 { 0.0 } else { law.f0(times[j - 1], y) };
                        jump += w * (law.f0(tj, y) - prev);
                    }
                }
            }
            (t, jump)
        })
        .collect()
}

fn atomic_h_jump(law: &MarkLaw, d: &AtomicDesign, t: f64) -> f64 {
    let mut jump = 0.0;
    for (times, w) in d.atoms() {
        for (j, &tj) in times.iter().enumerate() {
            if tj == t {
                let prev = if j == 0 { 0.0 } else { law.f0x(times[j - 1]) };
                jump += w * (law.f0x(tj) - prev);
                if j + 1 == times.len() {
                    jump += w * (1.0 - law.f0x(tj));
                }
            }
        }
    }
    jump
}

fn atomic_h(law: &MarkLaw, d: &AtomicDesign, x: f64) -> f64 {
    d.support()
        .into_iter()
        .filter(|&t| t <= x)
        .map(|t| atomic_h_jump(law, d, t))
        .sum()
}

/// `V(x, y) = P(Delta_+ = 1, U <= x, Z <= y)`
pub fn pop_v(model: &PopulationModel, x: f64, y: f64, cfg: &QuadratureConfig) -> Result<f64, LimitError> {
    match &model.design {
        Design::Continuous(d) => continuous_v(&model.law, d, x, y, cfg),
        Design::Atomic(d) => Ok(atomic_v_jumps(&model.law, d, x, y).iter().map(|j| j.1).sum()),
    }
}

/// `V_X(x) = V(x, inf)`
pub fn pop_vx(model: &PopulationModel, x: f64, cfg: &QuadratureConfig) -> Result<f64, LimitError> {
    pop_v(model, x, f64::INFINITY, cfg)
}

/// `H(x) = P(U <= x)`
pub fn pop_h(model: &PopulationModel, x: f64, cfg: &QuadratureConfig) -> Result<f64, LimitError> {
    match &model.design {
        Design::Continuous(d) => continuous_h(&model.law, d, x, cfg),
        Design::Atomic(d) => Ok(atomic_h(&model.law, d, x)),
    }
}

/// Evaluation range `[0, tau]` with `H(tau) < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationWindow {
    tau: f64,
    grid: Vec<f64>,
}

impl EvaluationWindow {
    pub const MARGIN: f64 = 1e-6;

    pub fn new(model: &PopulationModel, tau: f64, grid: Vec<f64>, cfg: &QuadratureConfig) -> Result<Self, LimitError> {
        let h = pop_h(model, tau, cfg)?;
        if !(tau >= 0.0) || h > 1.0 - Self::MARGIN {
            return Err(LimitError::WindowInvalid { tau, h });
        }
        if let Some(&x) = grid.iter().find(|&&x| x > tau || x < 0.0) {
            return Err(LimitError::WindowViolation { x, tau });
        }
        Ok(EvaluationWindow { tau, grid })
    }

    /// Window on the equidistant grid `0, step, 2 step, ... <= tau`.
    pub fn with_step(model: &PopulationModel, tau: f64, step: f64, cfg: &QuadratureConfig) -> Result<Self, LimitError> {
        Self::new(model, tau, equidistant_grid(0.0, tau, step), cfg)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

/// `lo, lo + step, ...` up to `hi` (inclusive up to rounding).
pub fn equidistant_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect()
}

/// Largest grid point with `H <= 0.995`.
pub fn default_tau(model: &PopulationModel, grid: &[f64], cfg: &QuadratureConfig) -> Result<Option<f64>, LimitError> {
    let mut best = None;
    for &x in grid {
        if pop_h(model, x, cfg)? <= 0.995 {
            best = Some(best.map_or(x, |b: f64| b.max(x)));
        }
    }
    Ok(best)
}

struct Tables {
    h: ChebTable,
    lambda_x: ChebTable,
    edges: Vec<f64>,
}

/// Limits of the MLE on a fixed window.
pub struct LimitEngine {
    model: PopulationModel,
    window: EvaluationWindow,
    cfg: QuadratureConfig,
    tables: Option<Tables>,
}

impl LimitEngine {
    pub fn new(model: &PopulationModel, window: &EvaluationWindow, cfg: &QuadratureConfig) -> Result<Self, LimitError> {
        let tables = match &model.design {
            Design::Continuous(d) => Some(build_tables(&model.law, d, window.tau, cfg)?),
            Design::Atomic(_) => None,
        };
        Ok(LimitEngine {
            model: model.clone(),
            window: window.clone(),
            cfg: *cfg,
            tables,
        })
    }

    pub fn model(&self) -> &PopulationModel {
        &self.model
    }

    pub fn window(&self) -> &EvaluationWindow {
        &self.window
    }

    fn check(&self, x: f64) -> Result<(), LimitError> {
        if x > self.window.tau || x < 0.0 || x.is_nan() {
            Err(LimitError::WindowViolation {
                x,
                tau: self.window.tau,
            })
        } else {
            Ok(())
        }
    }

    fn design_c(&self) -> Option<(&ContinuousDesign, &Tables)> {
        match &self.model.design {
            Design::Continuous(d) => Some((d, self.tables.as_ref().expect("continuous designs carry tables"))),
            Design::Atomic(_) => None,
        }
    }

    fn atomic(&self) -> &AtomicDesign {
        match &self.model.design {
            Design::Atomic(d) => d,
            Design::Continuous(_) => unreachable!("checked by caller"),
        }
    }

    /// `H(t-)` on an atomic design.
    fn atomic_h_left(&self, t: f64) -> f64 {
        let d = self.atomic();
        atomic_h(&self.model.law, d, t) - atomic_h_jump(&self.model.law, d, t)
    }

    fn atomic_lambda_jumps(&self, x: f64, y: f64) -> Vec<(f64, f64)> {
        atomic_v_jumps(&self.model.law, self.atomic(), x, y)
            .into_iter()
            .map(|(t, dv)| (t, dv / (1.0 - self.atomic_h_left(t))))
            .collect()
    }

    /// `(t, F_Xinf(t-), Delta F_Xinf(t))` on an atomic design.
    fn atomic_fx_steps(&self, x: f64) -> Vec<(f64, f64, f64)> {
        let mut surv = 1.0;
        self.atomic_lambda_jumps(x, f64::INFINITY)
            .into_iter()
            .map(|(t, dl)| {
                let before = 1.0 - surv;
                let jump = surv * dl;
                surv *= 1.0 - dl;
                (t, before, jump)
            })
            .collect()
    }

    pub fn h(&self, x: f64) -> Result<f64, LimitError> {
        self.check(x)?;
        match self.design_c() {
            Some((_, t)) => Ok(if x == 0.0 { 0.0 } else { t.h.eval(x) }),
            None => Ok(atomic_h(&self.model.law, self.atomic(), x)),
        }
    }

    /// `Lambda_inf(x, y) = int_[0,x] V(ds, y) / (1 - H(s-))`
    pub fn lambda(&self, x: f64, y: f64) -> Result<f64, LimitError> {
        self.check(x)?;
        match self.design_c() {
            Some((d, t)) => {
                let law = &self.model.law;
                let mut err = None;
                let v = integrate(
                    |s| match continuous_v_density(law, d, s, y, &self.cfg) {
                        Ok(v) => v / (1.0 - t.h.eval(s)),
                        Err(e) => {
                            err.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    0.0,
                    x,
                    &t.edges,
                    &self.cfg,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                Ok(v?)
            }
            None => Ok(self.atomic_lambda_jumps(x, y).iter().map(|j| j.1).sum()),
        }
    }

    /// `Lambda_Xinf(x) = Lambda_inf(x, inf)`
    pub fn lambda_x(&self, x: f64) -> Result<f64, LimitError> {
        self.check(x)?;
        match self.design_c() {
            Some((_, t)) => Ok(if x == 0.0 { 0.0 } else { t.lambda_x.eval(x) }),
            None => Ok(self.atomic_lambda_jumps(x, f64::INFINITY).iter().map(|j| j.1).sum()),
        }
    }

    /// `F^l_Xinf(x) = 1 - prod_{s <= x} (1 - Lambda_Xinf(ds))`
    pub fn fx_lim(&self, x: f64) -> Result<f64, LimitError> {
        self.check(x)?;
        match self.design_c() {
            Some(_) => Ok(-(-self.lambda_x(x)?).exp_m1()),
            None => Ok(self
                .atomic_fx_steps(x)
                .last()
                .map_or(0.0, |&(_, before, jump)| before + jump)),
        }
    }

    /// `F^l_inf(x, y) = int_[0,x] (1 - F^l_Xinf(s-)) Lambda_inf(ds, y)`
    pub fn f_lim(&self, x: f64, y: f64) -> Result<f64, LimitError> {
        self.f_lim_between(0.0, x, y)
    }

    fn f_lim_between(&self, a: f64, b: f64, y: f64) -> Result<f64, LimitError> {
        self.check(b)?;
        match self.design_c() {
            Some((d, t)) => {
                let law = &self.model.law;
                let mut err = None;
                let v = integrate(
                    |s| match continuous_v_density(law, d, s, y, &self.cfg) {
                        Ok(v) => (-t.lambda_x.eval(s)).exp() * v / (1.0 - t.h.eval(s)),
                        Err(e) => {
                            err.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    a,
                    b,
                    &t.edges,
                    &self.cfg,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                Ok(v?)
            }
            None => {
                let steps = self.atomic_fx_steps(b);
                Ok(self
                    .atomic_lambda_jumps(b, y)
                    .into_iter()
                    .zip(steps)
                    .filter(|((t, _), _)| *t > a || (a == 0.0 && *t >= 0.0))
                    .map(|((_, dl), (_, before, _))| (1.0 - before) * dl)
                    .sum())
            }
        }
    }

    /// `dF^l_Xinf / ds` from the tabulated hazard.
    fn fx_density(&self, t: &Tables, s: f64) -> f64 {
        (-t.lambda_x.eval(s)).exp() * t.lambda_x.derivative(s)
    }

    /// Ratio route: `int_[0,x] (V(ds, y) / V_X(ds)) dF^l_Xinf(s)`.
    pub fn f_lim_ratio(&self, x: f64, y: f64) -> Result<f64, LimitError> {
        self.check(x)?;
        match self.design_c() {
            Some((d, t)) => {
                let law = &self.model.law;
                let mut err = None;
                let v = integrate(
                    |s| {
                        let ratio = continuous_v_density(law, d, s, y, &self.cfg).and_then(|v| {
                            let vx = continuous_v_density(law, d, s, f64::INFINITY, &self.cfg)?;
                            measure_ratio(v, vx, s)
                        });
                        match ratio {
                            Ok(r) => r * self.fx_density(t, s),
                            Err(e) => {
                                err.get_or_insert(e);
                                f64::NAN
                            }
                        }
                    },
                    0.0,
                    x,
                    &t.edges,
                    &self.cfg,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                Ok(v?)
            }
            None => {
                let law = &self.model.law;
                let vy = atomic_v_jumps(law, self.atomic(), x, y);
                let vx = atomic_v_jumps(law, self.atomic(), x, f64::INFINITY);
                let steps = self.atomic_fx_steps(x);
                let mut total = 0.0;
                for ((a, b), (t, _, jump)) in vy.iter().zip(&vx).zip(steps) {
                    total += measure_ratio(a.1, b.1, t)? * jump;
                }
                Ok(total)
            }
        }
    }

    /// Current-status route: `int_[0,x] (F0(s, y) / F0X(s)) dF^l_Xinf(s)`.
    pub fn f_lim_current_status(&self, x: f64, y: f64) -> Result<f64, LimitError> {
        self.check(x)?;
        if self.model.k() != 1 {
            return Err(LimitError::NotCurrentStatus(self.model.k()));
        }
        let law = &self.model.law;
        match self.design_c() {
            Some((_, t)) => {
                let mut err = None;
                let v = integrate(
                    |s| match measure_ratio(law.f0(s, y), law.f0x(s), s) {
                        Ok(r) => r * self.fx_density(t, s),
                        Err(e) => {
                            err.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    0.0,
                    x,
                    &t.edges,
                    &self.cfg,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                Ok(v?)
            }
            None => {
                let mut total = 0.0;
                for (t, _, jump) in self.atomic_fx_steps(x) {
                    if jump > 0.0 {
                        total += measure_ratio(law.f0(t, y), law.f0x(t), t)? * jump;
                    }
                }
                Ok(total)
            }
        }
    }

    /// `F^l_Xinf` at each point of `xs`.
    pub fn marginal(&self, xs: &[f64]) -> Result<Vec<f64>, LimitError> {
        xs.iter().map(|&x| self.fx_lim(x)).collect()
    }

    /// `F^l_inf` on `xs x ys` (`out[i][j]` at `(xs[i], ys[j])`). `xs` must be
    /// nondecreasing; each column is accumulated along `x`.
    pub fn surface(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<Vec<f64>>, LimitError> {
        if xs.windows(2).any(|w| w[1] < w[0]) {
            return Err(LimitError::InvalidModel("surface grid must be sorted in x".into()));
        }
        let columns = ys
            .par_iter()
            .map(|&y| -> Result<Vec<f64>, LimitError> {
                match self.design_c() {
                    Some(_) => {
                        let mut acc = 0.0;
                        let mut prev = 0.0;
                        xs.iter()
                            .map(|&x| {
                                acc += self.f_lim_between(prev, x, y)?;
                                prev = x;
                                Ok(acc)
                            })
                            .collect()
                    }
                    None => xs.iter().map(|&x| self.f_lim(x, y)).collect(),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..xs.len()).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
    }
}

fn measure_ratio(num: f64, den: f64, x: f64) -> Result<f64, LimitError> {
    if den > 0.0 {
        Ok(num / den)
    } else if num.abs() <= 1e-300 {
        Ok(0.0)
    } else {
        Err(LimitError::DivisionByZeroMeasure { x })
    }
}

fn build_tables(law: &MarkLaw, d: &ContinuousDesign, tau: f64, cfg: &QuadratureConfig) -> Result<Tables, LimitError> {
    let cfg = &QuadratureConfig {
        abs_tol: cfg.abs_tol.min(TABLE_QUAD_TOL),
        rel_tol: cfg.rel_tol.min(TABLE_QUAD_TOL),
        max_subdivisions: cfg.max_subdivisions,
    };
    let mut edges = vec![0.0];
    edges.extend(breakpoints(law, d).into_iter().filter(|&b| b > 0.0 && b < tau));
    edges.push(tau);
    let h = ChebTable::build(|x| continuous_h(law, d, x, cfg), &edges, TABLE_TOL)?;
    let h_edges = h.edges();
    let hazard = |x: f64| -> Result<f64, LimitError> {
        let mut err = None;
        let v = integrate(
            |s| match continuous_v_density(law, d, s, f64::INFINITY, cfg) {
                Ok(v) => v / (1.0 - h.eval(s)),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            x,
            &h_edges,
            cfg,
        );
        if let Some(e) = err {
            return Err(e);
        }
        Ok(v?)
    };
    let lambda_x = ChebTable::build(hazard, &edges, TABLE_TOL)?;
    let mut all = h_edges;
    all.extend(lambda_x.edges());
    all.sort_by(f64::total_cmp);
    all.dedup();
    Ok(Tables {
        h,
        lambda_x,
        edges: all,
    })
}
