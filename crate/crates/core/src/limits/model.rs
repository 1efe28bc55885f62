//! Analytic description of `(F0, G)`.

use std::fmt;
use std::sync::Arc;

use super::LimitError;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Joint law of `(X, Y)`.
///
/// `x_density` and `joint_x_density` describe the absolutely continuous part
/// in `x`; `x_atoms` and `joint_atom` the atoms of `X`. They are only needed
/// for the true hazards, everything else goes through the CDFs.
#[derive(Clone)]
pub struct MarkLaw {
    joint: Fn2,
    marg_x: Fn1,
    marg_y: Fn1,
    pub x_density: Option<Fn1>,
    pub joint_x_density: Option<Fn2>,
    /// `(location, P(X = location))`
    pub x_atoms: Vec<(f64, f64)>,
    /// `(a, y) -> P(X = a, Y <= y)`
    pub joint_atom: Option<Fn2>,
    /// Points where the `x`-densities jump or kink.
    pub x_breakpoints: Vec<f64>,
}

impl fmt::Debug for MarkLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarkLaw")
            .field("x_atoms", &self.x_atoms)
            .field("x_breakpoints", &self.x_breakpoints)
            .finish_non_exhaustive()
    }
}

impl MarkLaw {
    pub fn new(joint: Fn2, marg_x: Fn1, marg_y: Fn1) -> Self {
        MarkLaw {
            joint,
            marg_x,
            marg_y,
            x_density: None,
            joint_x_density: None,
            x_atoms: Vec::new(),
            joint_atom: None,
            x_breakpoints: Vec::new(),
        }
    }

    pub fn with_x_density(mut self, marginal: Fn1, joint: Fn2) -> Self {
        self.x_density = Some(marginal);
        self.joint_x_density = Some(joint);
        self
    }

    pub fn with_x_atoms(mut self, atoms: Vec<(f64, f64)>, joint_atom: Fn2) -> Self {
        self.x_atoms = atoms;
        self.joint_atom = Some(joint_atom);
        self
    }

    pub fn with_breakpoints(mut self, points: Vec<f64>) -> Self {
        self.x_breakpoints = points;
        self
    }

    /// `F0(x, y)`; infinite `y` falls back to the marginal.
    pub fn f0(&self, x: f64, y: f64) -> f64 {
        if x <= 0.0 || y == f64::NEG_INFINITY {
            0.0
        } else if y == f64::INFINITY {
            self.f0x(x)
        } else {
            (self.joint)(x, y)
        }
    }

    pub fn f0x(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x == f64::INFINITY {
            1.0
        } else {
            (self.marg_x)(x)
        }
    }

    pub fn f0y(&self, y: f64) -> f64 {
        match y {
            f64::INFINITY => 1.0,
            f64::NEG_INFINITY => 0.0,
            _ => (self.marg_y)(y),
        }
    }

    /// `F0X(x-)`
    pub fn f0x_left(&self, x: f64) -> f64 {
        let atom: f64 = self.x_atoms.iter().filter(|a| a.0 == x).map(|a| a.1).sum();
        self.f0x(x) - atom
    }

    /// Checks monotonicity, rectangle nonnegativity and the marginals on the
    /// product grid.
    pub fn validate(&self, xs: &[f64], ys: &[f64], tol: f64) -> Result<(), LimitError> {
        let bad = |what: &str, x: f64, y: f64| Err(LimitError::InvalidModel(format!("{what} at ({x}, {y})")));
        for (i, &x) in xs.iter().enumerate() {
            if (self.f0(x, f64::INFINITY) - self.f0x(x)).abs() > tol {
                return bad("F0(x, inf) != F0X(x)", x, f64::INFINITY);
            }
            for (j, &y) in ys.iter().enumerate() {
                let v = self.f0(x, y);
                if !(-tol..=1.0 + tol).contains(&v) {
                    return bad("F0 outside [0, 1]", x, y);
                }
                if v > self.f0x(x) + tol || v > self.f0y(y) + tol {
                    return bad("F0 exceeds a marginal", x, y);
                }
                if i > 0 && j > 0 {
                    let (x0, y0) = (xs[i - 1], ys[j - 1]);
                    let rect = v - self.f0(x0, y) - self.f0(x, y0) + self.f0(x0, y0);
                    if rect < -tol {
                        return bad("negative rectangle mass", x, y);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Continuous observation-time law of `(T_1, ..., T_k)`, described by its
/// coordinate densities `g_j` and consecutive-pair densities `g_{j-1,j}`.
#[derive(Clone)]
pub struct ContinuousDesign {
    pub k: usize,
    /// `g_j`, `j = 1..k`
    pub marginals: Vec<Fn1>,
    /// `g_{j-1,j}(s, t)`, `j = 2..k`
    pub pairs: Vec<Fn2>,
    /// `sum_j g_j`
    pub marginal_sum: Fn1,
    /// `sum_j g_{j-1,j}`; `None` when `k = 1`
    pub pair_sum: Option<Fn2>,
    /// `(s, x) -> int_s^x sum_j g_{j-1,j}(s, t) dt`
    pub pair_tail: Option<Fn2>,
    /// Kinks and jumps of the densities.
    pub breakpoints: Vec<f64>,
    /// Right end of the support of `T_k`.
    pub t_max: f64,
}

impl ContinuousDesign {
    /// Sums the components. `pair_tail` must be supplied in closed form when
    /// `k >= 2`.
    pub fn from_components(
        marginals: Vec<Fn1>,
        pairs: Vec<Fn2>,
        pair_tail: Option<Fn2>,
        breakpoints: Vec<f64>,
        t_max: f64,
    ) -> Result<Self, LimitError> {
        let k = marginals.len();
        if k == 0 || pairs.len() + 1 != k {
            return Err(LimitError::InvalidModel(format!(
                "{k} marginal densities need {} pair densities, got {}",
                k.saturating_sub(1),
                pairs.len()
            )));
        }
        if k >= 2 && pair_tail.is_none() {
            return Err(LimitError::InvalidModel("pair_tail is required for k >= 2".into()));
        }
        let ms = marginals.clone();
        let marginal_sum: Fn1 = Arc::new(move |t| ms.iter().map(|g| g(t)).sum());
        let pair_sum: Option<Fn2> = (k >= 2).then(|| {
            let ps = pairs.clone();
            Arc::new(move |s: f64, t: f64| ps.iter().map(|g| g(s, t)).sum::<f64>()) as Fn2
        });
        Ok(ContinuousDesign {
            k,
            marginals,
            pairs,
            marginal_sum,
            pair_sum,
            pair_tail,
            breakpoints,
            t_max,
        })
    }

    /// Density of `T_k`.
    pub fn last(&self) -> &Fn1 {
        self.marginals.last().expect("k >= 1")
    }
}

/// Finitely many observation-time vectors with probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDesign {
    atoms: Vec<(Vec<f64>, f64)>,
}

impl AtomicDesign {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>) -> Result<Self, LimitError> {
        let k = atoms.first().map_or(0, |a| a.0.len());
        if k == 0 {
            return Err(LimitError::InvalidModel("atomic design needs atoms with k >= 1".into()));
        }
        for (times, w) in &atoms {
            if times.len() != k {
                return Err(LimitError::InvalidModel("atoms disagree on k".into()));
            }
            if !(times[0] > 0.0 && times.windows(2).all(|p| p[0] < p[1])) {
                return Err(LimitError::InvalidModel(format!(
                    "atom {times:?} is not increasing and positive"
                )));
            }
            if !(*w > 0.0) {
                return Err(LimitError::InvalidModel(format!("atom weight {w} is not positive")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LimitError::InvalidModel(format!("atom weights sum to {total}")));
        }
        Ok(AtomicDesign { atoms })
    }

    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    pub fn k(&self) -> usize {
        self.atoms[0].0.len()
    }

    /// Distinct observation times, sorted.
    pub fn support(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.atoms.iter().flat_map(|a| a.0.iter().copied()).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

#[derive(Clone)]
pub enum Design {
    Continuous(ContinuousDesign),
    Atomic(AtomicDesign),
}

impl Design {
    pub fn k(&self) -> usize {
        match self {
            Design::Continuous(c) => c.k,
            Design::Atomic(a) => a.k(),
        }
    }
}

#[derive(Clone)]
pub struct PopulationModel {
    pub name: String,
    pub law: MarkLaw,
    pub design: Design,
    /// `(x_max, description)` of the region where limits make sense.
    pub support_hint: (f64, String),
}

impl fmt::Debug for PopulationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PopulationModel")
            .field("name", &self.name)
            .field("k", &self.design.k())
            .field("support_hint", &self.support_hint)
            .finish_non_exhaustive()
    }
}

impl PopulationModel {
    pub fn k(&self) -> usize {
        self.design.k()
    }
}
