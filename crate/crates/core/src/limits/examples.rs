//! Hard-coded models: the four simulation examples, the uniform
//! order-statistics design and a model without censoring of `X`.

use std::sync::Arc;

use super::model::{AtomicDesign, ContinuousDesign, Design, Fn1, Fn2, MarkLaw, PopulationModel};
use super::LimitError;
use crate::quad::{integrate, QuadratureConfig};

fn unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn indicator(lo: f64, hi: f64) -> Fn1 {
    Arc::new(move |t| if (lo..=hi).contains(&t) { 1.0 } else { 0.0 })
}

/// `X ~ Unif(0, 1)` and `Y ~ Exp(1)`, independent.
pub fn uniform_exp_law() -> MarkLaw {
    MarkLaw::new(
        Arc::new(|x, y| unit(x) * -(-y.max(0.0)).exp_m1()),
        Arc::new(unit),
        Arc::new(|y| -(-y.max(0.0)).exp_m1()),
    )
    .with_x_density(
        indicator(0.0, 1.0),
        Arc::new(|x, y| if x < 1.0 { -(-y.max(0.0)).exp_m1() } else { 0.0 }),
    )
    .with_breakpoints(vec![1.0])
}

/// `X ~ Unif(0, 1)`, `Y | X ~ Exp` with mean `2 / (2X + 1)`.
pub fn example2_law() -> MarkLaw {
    fn joint(x: f64, y: f64) -> f64 {
        let x = unit(x);
        if y <= 0.0 {
            return 0.0;
        }
        (x + (-0.5 * y).exp() * (-x * y).exp_m1() / y).max(0.0)
    }
    MarkLaw::new(Arc::new(joint), Arc::new(unit), Arc::new(|y| joint(1.0, y)))
        .with_x_density(
            indicator(0.0, 1.0),
            Arc::new(|x, y| {
                if x < 1.0 && y > 0.0 {
                    -(-(x + 0.5) * y).exp_m1()
                } else {
                    0.0
                }
            }),
        )
        .with_breakpoints(vec![1.0])
}

/// `X ~ Unif(0, 2)` and `Y = X`.
pub fn example3_law() -> MarkLaw {
    let half = |v: f64| v.clamp(0.0, 2.0) / 2.0;
    MarkLaw::new(Arc::new(move |x, y| half(x.min(y))), Arc::new(half), Arc::new(half))
        .with_x_density(
            Arc::new(|x| if (0.0..2.0).contains(&x) { 0.5 } else { 0.0 }),
            Arc::new(|x, y| if x < y && (0.0..2.0).contains(&x) { 0.5 } else { 0.0 }),
        )
        .with_breakpoints(vec![2.0])
}

/// `(X, Y)` uniform on the triangle `0 <= x <= y <= 1`.
pub fn example4_law() -> MarkLaw {
    fn joint(x: f64, y: f64) -> f64 {
        let (x, y) = (unit(x), unit(y));
        if x <= y {
            2.0 * x * y - x * x
        } else {
            y * y
        }
    }
    MarkLaw::new(
        Arc::new(joint),
        Arc::new(|x| {
            let x = unit(x);
            2.0 * x - x * x
        }),
        Arc::new(|y| unit(y) * unit(y)),
    )
    .with_x_density(
        Arc::new(|x| if (0.0..1.0).contains(&x) { 2.0 - 2.0 * x } else { 0.0 }),
        Arc::new(|x, y| {
            if (0.0..1.0).contains(&x) && x < y {
                2.0 * (y.min(1.0) - x)
            } else {
                0.0
            }
        }),
    )
    .with_breakpoints(vec![1.0])
}

/// Current status with `T ~ Unif(lo, hi)`.
pub fn uniform_current_status(lo: f64, hi: f64) -> ContinuousDesign {
    let density = 1.0 / (hi - lo);
    let g: Fn1 = Arc::new(move |t| if (lo..=hi).contains(&t) { density } else { 0.0 });
    ContinuousDesign::from_components(vec![g], Vec::new(), None, vec![lo, hi], hi)
        .expect("one marginal and no pairs is a valid design")
}

/// Per-example settings shared by the simulation harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleInfo {
    pub id: u8,
    pub tau: f64,
    pub y_max: f64,
    pub grid_step: f64,
}

pub fn example_info(id: u8) -> Option<ExampleInfo> {
    let (tau, y_max) = match id {
        1 => (0.45, 4.0),
        2 => (0.98, 4.0),
        3 => (1.9, 2.0),
        4 => (0.74, 1.0),
        _ => return None,
    };
    Some(ExampleInfo {
        id,
        tau,
        y_max,
        grid_step: 0.02,
    })
}

/// Population model of simulation example `id` (1 to 4).
pub fn example_model(id: u8) -> Result<PopulationModel, LimitError> {
    let (law, design, hint) = match id {
        1 => (
            uniform_exp_law(),
            Design::Continuous(uniform_current_status(0.0, 0.5)),
            (0.5, "current status, T ~ Unif(0, 0.5)"),
        ),
        2 => (
            example2_law(),
            Design::Continuous(uniform_current_status(0.0, 1.0)),
            (1.0, "current status, T ~ Unif(0, 1)"),
        ),
        3 => {
            let g1 = indicator(0.0, 1.0);
            let g2 = indicator(1.0, 2.0);
            let g12: Fn2 = Arc::new(|s, t| {
                if (0.0..=1.0).contains(&s) && (1.0..=2.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            });
            let tail: Fn2 = Arc::new(|s, x| {
                if (0.0..=1.0).contains(&s) {
                    (x - 1.0).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            });
            let design = ContinuousDesign::from_components(vec![g1, g2], vec![g12], Some(tail), vec![1.0, 2.0], 2.0)?;
            (
                example3_law(),
                Design::Continuous(design),
                (2.0, "case 2, (T1, T2) uniform on [0, 1] x [1, 2]"),
            )
        }
        4 => (
            example4_law(),
            Design::Atomic(AtomicDesign::new(vec![
                (vec![0.25, 0.5], 0.3),
                (vec![0.25, 0.75], 0.3),
                (vec![0.5, 0.75], 0.4),
            ])?),
            (0.75, "case 2, three atoms"),
        ),
        _ => return Err(LimitError::InvalidModel(format!("no example {id}; use 1 to 4"))),
    };
    Ok(PopulationModel {
        name: format!("example{id}"),
        law,
        design,
        support_hint: (hint.0, hint.1.to_string()),
    })
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Density of the `j`-th of `k` ordered `Unif(0, theta)` times.
pub fn order_stat_marginal(k: usize, j: usize, theta: f64) -> Fn1 {
    let c = k as f64 * binomial(k - 1, j - 1);
    Arc::new(move |t| {
        if !(0.0..=theta).contains(&t) {
            return 0.0;
        }
        let u = t / theta;
        c * u.powi(j as i32 - 1) * (1.0 - u).powi((k - j) as i32) / theta
    })
}

/// Joint density of the `(j-1)`-th and `j`-th of `k` ordered `Unif(0, theta)`.
pub fn order_stat_pair(k: usize, j: usize, theta: f64) -> Fn2 {
    let c = (k * (k - 1)) as f64 * binomial(k - 2, j - 2);
    Arc::new(move |s, t| {
        if !(0.0 <= s && s <= t && t <= theta) {
            return 0.0;
        }
        c * (s / theta).powi(j as i32 - 2) * (1.0 - t / theta).powi((k - j) as i32) / (theta * theta)
    })
}

/// `Q_x^k(s) = (1 - (x - s)/theta)^k - (1 - x/theta)^k`
pub fn q_x_k(k: usize, theta: f64, x: f64, s: f64) -> f64 {
    (1.0 - (x - s) / theta).powi(k as i32) - (1.0 - x / theta).powi(k as i32)
}

/// `V^k(x, y) = int_[0,x] F0(s, y) dQ_x^k(s)` for the uniform order-statistics
/// design.
pub fn order_stat_v_direct(
    law: &MarkLaw,
    k: usize,
    theta: f64,
    x: f64,
    y: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, LimitError> {
    let x = x.min(theta);
    let dq = |s: f64| k as f64 / theta * (1.0 - (x - s) / theta).powi(k as i32 - 1);
    Ok(integrate(|s| law.f0(s, y) * dq(s), 0.0, x, &law.x_breakpoints, cfg)?)
}

/// Case `k` design whose times are the order statistics of `k` independent
/// `Unif(0, theta)` variables.
pub fn order_stat_uniform_model(k: usize, theta: f64, law: MarkLaw) -> Result<PopulationModel, LimitError> {
    if k == 0 || !(theta > 0.0) {
        return Err(LimitError::InvalidModel(format!(
            "need k >= 1 and theta > 0, got k = {k}, theta = {theta}"
        )));
    }
    let kf = k as f64;
    let on = move |t: f64| (0.0..=theta).contains(&t);
    let marginal_sum: Fn1 = Arc::new(move |t| if on(t) { kf / theta } else { 0.0 });
    let (pair_sum, pair_tail): (Option<Fn2>, Option<Fn2>) = if k >= 2 {
        let ps: Fn2 = Arc::new(move |s, t| {
            if 0.0 <= s && s <= t && t <= theta {
                kf * (kf - 1.0) / (theta * theta) * (1.0 - (t - s) / theta).powi(k as i32 - 2)
            } else {
                0.0
            }
        });
        let pt: Fn2 = Arc::new(move |s, x| {
            let x = x.min(theta);
            if s < 0.0 || s > x {
                return 0.0;
            }
            kf / theta * (1.0 - (1.0 - (x - s) / theta).powi(k as i32 - 1))
        });
        (Some(ps), Some(pt))
    } else {
        (None, None)
    };
    let design = ContinuousDesign {
        k,
        marginals: (1..=k).map(|j| order_stat_marginal(k, j, theta)).collect(),
        pairs: (2..=k).map(|j| order_stat_pair(k, j, theta)).collect(),
        marginal_sum,
        pair_sum,
        pair_tail,
        breakpoints: vec![theta],
        t_max: theta,
    };
    Ok(PopulationModel {
        name: format!("orderstat:{k}:{theta}"),
        law,
        design: Design::Continuous(design),
        support_hint: (theta, format!("order statistics of {k} Unif(0, {theta})")),
    })
}

/// `X` uniform on `{0.2, 0.4, 0.6, 0.8}`, `Y ~ Exp(1)` independent, and a
/// deterministic design inspecting exactly at those atoms. Every `X` is then
/// observed exactly, so the MLE is consistent.
pub fn uncensored_atomic_model() -> PopulationModel {
    const ATOMS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
    let fx = |x: f64| ATOMS.iter().filter(|&&a| a <= x).count() as f64 * 0.25;
    let fy = |y: f64| -(-y.max(0.0)).exp_m1();
    let law = MarkLaw::new(Arc::new(move |x, y| fx(x) * fy(y)), Arc::new(fx), Arc::new(fy)).with_x_atoms(
        ATOMS.iter().map(|&a| (a, 0.25)).collect(),
        Arc::new(move |a, y| if ATOMS.contains(&a) { 0.25 * fy(y) } else { 0.0 }),
    );
    PopulationModel {
        name: "uncensored".into(),
        law,
        design: Design::Atomic(AtomicDesign::new(vec![(ATOMS.to_vec(), 1.0)]).expect("valid atom")),
        support_hint: (0.8, "X observed exactly at its atoms".into()),
    }
}

/// A named model and its default window end. Names: `example1` to
/// `example4`, `orderstat:K:THETA` (with `X ~ Unif(0, 1)`, `Y ~ Exp(1)`),
/// and `uncensored`.
pub fn model_by_name(name: &str) -> Result<(PopulationModel, f64), LimitError> {
    if let Some(id) = name.strip_prefix("example") {
        let id: u8 = id
            .parse()
            .map_err(|_| LimitError::InvalidModel(format!("bad example id in {name:?}")))?;
        let info = example_info(id).ok_or_else(|| LimitError::InvalidModel(format!("no example {id}")))?;
        return Ok((example_model(id)?, info.tau));
    }
    if let Some(rest) = name.strip_prefix("orderstat:") {
        let mut parts = rest.split(':');
        let k = parts.next().and_then(|s| s.parse::<usize>().ok());
        let theta = parts.next().and_then(|s| s.parse::<f64>().ok());
        return match (k, theta, parts.next()) {
            (Some(k), Some(theta), None) => {
                let model = order_stat_uniform_model(k, theta, uniform_exp_law())?;
                Ok((model, 0.9 * theta.min(1.0)))
            }
            _ => Err(LimitError::InvalidModel(format!(
                "expected orderstat:K:THETA, got {name:?}"
            ))),
        };
    }
    if name == "uncensored" {
        return Ok((uncensored_atomic_model(), 0.7));
    }
    Err(LimitError::InvalidModel(format!("unknown model {name:?}")))
}
