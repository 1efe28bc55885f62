//! Seeded generators for the four simulation examples and the study harness
//! comparing the MLE with its limit, the truth and the repaired MLE.
//!
//! Randomness comes from ChaCha20 seeded with `seed_from_u64(seed)`; stream
//! `r` of the generator drives replication `r`, so replications do not
//! depend on scheduling.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{order_dataset, DataError, Observation};
use crate::limits::examples::{example_info, example_model, ExampleInfo};
use crate::limits::{equidistant_grid, EvaluationWindow, LimitEngine, LimitError, PopulationModel};
use crate::plmle::{fit, Bound, MassVector, PlmleError};
use crate::quad::QuadratureConfig;
use crate::repaired::{
    discretize_marks, eval_repaired_f, fit_cr_mle, EmConfig, MarkGrid, RepairError, SubDistributionEstimate,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no simulation example {0}; expected 1 to 4")]
    UnknownExample(u8),
    #[error("sample size must be at least 1")]
    ZeroSamples,
    #[error("grid point {0} lies outside the example's window")]
    GridOutsideWindow(f64),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fit(#[from] PlmleError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Repair(#[from] RepairError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExampleSpec {
    pub id: u8,
    pub n: usize,
    pub seed: u64,
}

impl ExampleSpec {
    pub fn new(id: u8, n: usize, seed: u64) -> Result<Self, SimError> {
        if example_info(id).is_none() {
            return Err(SimError::UnknownExample(id));
        }
        if n == 0 {
            return Err(SimError::ZeroSamples);
        }
        Ok(ExampleSpec { id, n, seed })
    }

    pub fn info(&self) -> ExampleInfo {
        example_info(self.id).expect("validated on construction")
    }
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(Open01)
}

/// `Exp` with the given mean, by inversion.
fn exponential(rng: &mut ChaCha20Rng, mean: f64) -> f64 {
    -mean * uniform(rng).ln()
}

fn observe(x: f64, y: f64, times: Vec<f64>) -> Observation {
    let j = times.iter().position(|&t| x <= t);
    let (delta, mark) = match j {
        Some(j) => (j + 1, Some(y)),
        None => (times.len() + 1, None),
    };
    Observation::new(times, delta, mark).expect("generated records are valid")
}

fn draw(id: u8, rng: &mut ChaCha20Rng) -> Observation {
    match id {
        1 => {
            let x = uniform(rng);
            let y = exponential(rng, 1.0);
            let t = 0.5 * uniform(rng);
            observe(x, y, vec![t])
        }
        2 => {
            let x = uniform(rng);
            let y = exponential(rng, 2.0 / (2.0 * x + 1.0));
            let t = uniform(rng);
            observe(x, y, vec![t])
        }
        3 => {
            let x = 2.0 * uniform(rng);
            let t1 = uniform(rng);
            let t2 = 1.0 + uniform(rng);
            observe(x, x, vec![t1, t2])
        }
        4 => {
            let (a, b) = (uniform(rng), uniform(rng));
            let times = match uniform(rng) {
                u if u < 0.3 => vec![0.25, 0.5],
                u if u < 0.6 => vec![0.25, 0.75],
                _ => vec![0.5, 0.75],
            };
            observe(a.min(b), a.max(b), times)
        }
        _ => unreachable!("example ids are validated"),
    }
}

/// Dataset for replication `stream` of `spec`.
pub fn gen_example_stream(spec: &ExampleSpec, stream: u64) -> Vec<Observation> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    (0..spec.n).map(|_| draw(spec.id, &mut rng)).collect()
}

pub fn gen_example(spec: &ExampleSpec) -> Vec<Observation> {
    gen_example_stream(spec, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Include {
    pub mle_lower: bool,
    pub mle_upper: bool,
    pub limit_lower: bool,
    pub truth: bool,
    pub repaired: bool,
}

impl Default for Include {
    fn default() -> Self {
        Include {
            mle_lower: true,
            mle_upper: true,
            limit_lower: true,
            truth: true,
            repaired: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub example: ExampleSpec,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub include: Include,
    pub mark_grid_k: usize,
    pub em: EmConfig,
    pub quadrature: QuadratureConfig,
}

impl StudyConfig {
    /// Grids of step 0.02 on `[0, tau] x [0, y_max]` and `K = 20`.
    pub fn new(example: ExampleSpec) -> Self {
        let info = example.info();
        StudyConfig {
            example,
            x_grid: equidistant_grid(0.0, info.tau, info.grid_step),
            y_grid: equidistant_grid(0.0, info.y_max, info.grid_step),
            include: Include::default(),
            mark_grid_k: 20,
            em: EmConfig::default(),
            quadrature: QuadratureConfig::default(),
        }
    }

    /// The repaired fit's grid: `K` equidistant cutpoints on `(0, y_max]`.
    pub fn mark_grid(&self) -> Result<MarkGrid, SimError> {
        Ok(MarkGrid::equidistant(0.0, self.example.info().y_max, self.mark_grid_k)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRow {
    pub x: f64,
    pub mle_lower: Option<f64>,
    pub mle_upper: Option<f64>,
    pub limit_lower: Option<f64>,
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRow {
    pub x: f64,
    pub y: f64,
    pub mle_lower: Option<f64>,
    pub mle_upper: Option<f64>,
    pub limit_lower: Option<f64>,
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairedRow {
    pub x: f64,
    pub risk: usize,
    pub y: f64,
    pub lower: f64,
    pub upper: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySummary {
    pub example: u8,
    pub n: usize,
    pub seed: u64,
    pub replication: u64,
    pub events: usize,
    /// `sup_x |F^_X(x) - F^l_Xinf(x)|`
    pub sup_gap_limit: Option<f64>,
    /// `sup_x |F^_X(x) - F_0X(x)|`
    pub sup_gap_truth: Option<f64>,
    /// `max |F~(x, y_j) - F_0(x, y_j)|` over the x grid and `j <= K`
    pub sup_gap_repaired: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub dataset: Vec<Observation>,
    pub mle: MassVector,
    pub repaired: Option<SubDistributionEstimate>,
    pub marginal: Vec<MarginalRow>,
    pub surface: Vec<SurfaceRow>,
    pub repaired_rows: Vec<RepairedRow>,
    pub summary: StudySummary,
}

fn limit_engine(model: &PopulationModel, cfg: &StudyConfig) -> Result<LimitEngine, SimError> {
    let tau = cfg.example.info().tau;
    if let Some(&x) = cfg.x_grid.iter().find(|&&x| x < 0.0 || x > tau) {
        return Err(SimError::GridOutsideWindow(x));
    }
    let window = EvaluationWindow::new(model, tau, cfg.x_grid.clone(), &cfg.quadrature)?;
    Ok(LimitEngine::new(model, &window, &cfg.quadrature)?)
}

fn sup_gap(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    a.iter()
        .zip(b)
        .map(|(u, v)| Some((u.as_ref()? - v.as_ref()?).abs()))
        .try_fold(0.0f64, |m, g| g.map(|g| m.max(g)))
}

/// Runs replication 0.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult, SimError> {
    run_replication(cfg, 0)
}

pub fn run_replication(cfg: &StudyConfig, replication: u64) -> Result<StudyResult, SimError> {
    let model = example_model(cfg.example.id)?;
    let engine = if cfg.include.limit_lower {
        Some(limit_engine(&model, cfg)?)
    } else {
        None
    };
    run_with(cfg, replication, &model, engine.as_ref())
}

/// Summaries of `replications` independent replications, in order.
pub fn run_replications(cfg: &StudyConfig, replications: u64) -> Result<Vec<StudySummary>, SimError> {
    let model = example_model(cfg.example.id)?;
    let engine = if cfg.include.limit_lower {
        Some(limit_engine(&model, cfg)?)
    } else {
        None
    };
    (0..replications)
        .into_par_iter()
        .map(|r| Ok(run_with(cfg, r, &model, engine.as_ref())?.summary))
        .collect()
}

fn run_with(
    cfg: &StudyConfig,
    replication: u64,
    model: &PopulationModel,
    engine: Option<&LimitEngine>,
) -> Result<StudyResult, SimError> {
    let dataset = gen_example_stream(&cfg.example, replication);
    let ordered = order_dataset(&dataset)?;
    let mle = fit(&ordered)?;
    let (xs, ys) = (&cfg.x_grid, &cfg.y_grid);
    let inc = cfg.include;
    let law = &model.law;

    let pick = |on: bool, v: f64| on.then_some(v);
    let limit_marginal = match engine {
        Some(e) => Some(e.marginal(xs)?),
        None => None,
    };
    let marginal: Vec<MarginalRow> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| MarginalRow {
            x,
            mle_lower: pick(inc.mle_lower, mle.eval_fx(x, Bound::Lower)),
            mle_upper: pick(inc.mle_upper, mle.eval_fx(x, Bound::Upper)),
            limit_lower: limit_marginal.as_ref().map(|m| m[i]),
            truth: pick(inc.truth, law.f0x(x)),
        })
        .collect();

    let lower = inc.mle_lower.then(|| mle.eval_f_grid(xs, ys, Bound::Lower));
    let upper = inc.mle_upper.then(|| mle.eval_f_grid(xs, ys, Bound::Upper));
    let limit_surface = match engine {
        Some(e) => Some(e.surface(xs, ys)?),
        None => None,
    };
    let mut surface = Vec::with_capacity(xs.len() * ys.len());
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            surface.push(SurfaceRow {
                x,
                y,
                mle_lower: lower.as_ref().map(|g| g[i][j]),
                mle_upper: upper.as_ref().map(|g| g[i][j]),
                limit_lower: limit_surface.as_ref().map(|g| g[i][j]),
                truth: pick(inc.truth, law.f0(x, y)),
            });
        }
    }

    let (repaired, repaired_rows) = if inc.repaired {
        let grid = cfg.mark_grid()?;
        let est = fit_cr_mle(&discretize_marks(&dataset, &grid), &cfg.em)?;
        let mut rows = Vec::new();
        for &x in xs {
            for (j, &y) in grid.cutpoints().iter().enumerate() {
                rows.push(RepairedRow {
                    x,
                    risk: j + 1,
                    y,
                    lower: eval_repaired_f(&est, x, j + 1, Bound::Lower),
                    upper: eval_repaired_f(&est, x, j + 1, Bound::Upper),
                    truth: law.f0(x, y),
                });
            }
        }
        (Some(est), rows)
    } else {
        (None, Vec::new())
    };

    let mle_col: Vec<Option<f64>> = marginal.iter().map(|r| Some(mle.eval_fx(r.x, Bound::Lower))).collect();
    let limit_col: Vec<Option<f64>> = marginal.iter().map(|r| r.limit_lower).collect();
    let truth_col: Vec<Option<f64>> = marginal.iter().map(|r| Some(law.f0x(r.x))).collect();
    let summary = StudySummary {
        example: cfg.example.id,
        n: cfg.example.n,
        seed: cfg.example.seed,
        replication,
        events: dataset.iter().filter(|o| o.delta_plus()).count(),
        sup_gap_limit: if engine.is_some() {
            sup_gap(&mle_col, &limit_col)
        } else {
            None
        },
        sup_gap_truth: sup_gap(&mle_col, &truth_col),
        sup_gap_repaired: (!repaired_rows.is_empty()).then(|| {
            repaired_rows
                .iter()
                .map(|r| (r.lower - r.truth).abs())
                .fold(0.0, f64::max)
        }),
    };
    Ok(StudyResult {
        dataset,
        mle,
        repaired,
        marginal,
        surface,
        repaired_rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(matches!(ExampleSpec::new(5, 10, 1), Err(SimError::UnknownExample(5))));
        assert!(matches!(ExampleSpec::new(1, 0, 1), Err(SimError::ZeroSamples)));
    }

    #[test]
    fn same_seed_same_data() {
        let s = ExampleSpec::new(2, 500, 9).unwrap();
        assert_eq!(gen_example(&s), gen_example(&s));
        assert_ne!(gen_example_stream(&s, 0), gen_example_stream(&s, 1));
        let other = ExampleSpec::new(2, 500, 10).unwrap();
        assert_ne!(gen_example(&s), gen_example(&other));
    }

    #[test]
    fn prefix_stability() {
        // a longer sample extends the shorter one
        let short = gen_example(&ExampleSpec::new(1, 50, 3).unwrap());
        let long = gen_example(&ExampleSpec::new(1, 80, 3).unwrap());
        assert_eq!(short[..], long[..50]);
    }

    #[test]
    fn example3_marks_inside_interval() {
        let data = gen_example(&ExampleSpec::new(3, 2000, 11).unwrap());
        for o in data.iter().filter(|o| o.delta_plus()) {
            let e = o.endpoints();
            let z = o.mark().unwrap();
            assert!(e.left < z && e.right.ge(z));
        }
    }

    #[test]
    fn example4_uses_three_atoms() {
        let data = gen_example(&ExampleSpec::new(4, 3000, 5).unwrap());
        for o in &data {
            let t = o.times();
            assert!(matches!(t, [0.25, 0.5] | [0.25, 0.75] | [0.5, 0.75]));
            if let Some(z) = o.mark() {
                assert!((0.0..=1.0).contains(&z));
            }
        }
    }

    #[test]
    fn single_record_study() {
        let mut cfg = StudyConfig::new(ExampleSpec::new(1, 1, 42).unwrap());
        cfg.include.limit_lower = false;
        cfg.include.repaired = true;
        let r = run_study(&cfg).unwrap();
        assert_eq!(r.dataset.len(), 1);
        assert!((r.mle.total() - 1.0).abs() < 1e-15);
        assert_eq!(r.surface.len(), cfg.x_grid.len() * cfg.y_grid.len());
        assert_eq!(r.repaired_rows.len(), cfg.x_grid.len() * 20);
        assert!(r.summary.sup_gap_limit.is_none());
    }
}
