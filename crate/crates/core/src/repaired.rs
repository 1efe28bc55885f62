//! The repaired MLE: discretize the mark into `K + 1` cells and fit the
//! interval censored competing-risks MLE by EM.
//!
//! Risk `j` collects marks in `(y_{j-1}, y_j]`. Per risk, the support
//! candidates are the Turnbull intervals `(l, r]` built from the risk's event
//! intervals and the censored half-lines; one shared terminal half-line
//! beyond the largest censored time carries the never-observed mass.

use thiserror::Error;

use crate::data::{Endpoint, Observation};
use crate::plmle::Bound;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepairError {
    #[error("a mark grid needs at least one cutpoint")]
    EmptyGrid,
    #[error("cutpoints must be finite and strictly increasing (position {0})")]
    GridNotIncreasing(usize),
    #[error("grid range [{lo}, {hi}] is empty")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("no records to fit")]
    EmptyData,
    #[error("expected {expected} masses, got {got}")]
    MassLength { expected: usize, got: usize },
}

/// Cutpoints `y_1 < ... < y_K`; `y_0 = -inf` and `y_{K+1} = inf` are implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkGrid {
    cutpoints: Vec<f64>,
}

impl MarkGrid {
    pub fn new(cutpoints: Vec<f64>) -> Result<Self, RepairError> {
        if cutpoints.is_empty() {
            return Err(RepairError::EmptyGrid);
        }
        for (i, &c) in cutpoints.iter().enumerate() {
            if !c.is_finite() || (i > 0 && cutpoints[i - 1] >= c) {
                return Err(RepairError::GridNotIncreasing(i));
            }
        }
        Ok(MarkGrid { cutpoints })
    }

    /// `y_j = lo + j (hi - lo) / k` for `j = 1..=k`, so `y_K = hi`.
    pub fn equidistant(lo: f64, hi: f64, k: usize) -> Result<Self, RepairError> {
        if k == 0 {
            return Err(RepairError::EmptyGrid);
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(RepairError::InvalidRange { lo, hi });
        }
        let step = (hi - lo) / k as f64;
        let mut c: Vec<f64> = (1..=k).map(|j| lo + j as f64 * step).collect();
        c[k - 1] = hi;
        Self::new(c)
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    /// `K`
    pub fn k(&self) -> usize {
        self.cutpoints.len()
    }

    pub fn n_risks(&self) -> usize {
        self.cutpoints.len() + 1
    }

    /// Risk index in `1..=K+1` of a mark; cells are right-closed.
    pub fn risk_of(&self, z: f64) -> usize {
        self.cutpoints.partition_point(|&c| c < z) + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrRecord {
    pub observation: Observation,
    /// `Some(j)` iff the event was seen
    pub risk: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetingRisksDataset {
    pub grid: MarkGrid,
    pub records: Vec<CrRecord>,
}

impl CompetingRisksDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn discretize_marks(data: &[Observation], grid: &MarkGrid) -> CompetingRisksDataset {
    CompetingRisksDataset {
        grid: grid.clone(),
        records: data
            .iter()
            .map(|o| CrRecord {
                observation: o.clone(),
                risk: o.mark().map(|z| grid.risk_of(z)),
            })
            .collect(),
    }
}

/// A support candidate: `(left, right]` for a risk, or the terminal
/// half-line (`risk = None`, `right = inf`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub risk: Option<usize>,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    /// Largest `|m - EM(m)|` accepted at convergence.
    pub fixed_point_tolerance: f64,
    /// Masses below this are dropped from the support.
    pub prune_below: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tolerance: 1e-10,
            max_iter: 5000,
            fixed_point_tolerance: 1e-9,
            prune_below: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub last_increment: f64,
    /// Log-likelihood at the start of every iteration and at the end.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    pub left: f64,
    pub right: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubDistributionEstimate {
    pub grid: MarkGrid,
    /// `per_risk[j - 1]` holds the positive masses of risk `j`, sorted.
    pub per_risk: Vec<Vec<SupportInterval>>,
    /// Mass on `(terminal_left, inf)`, not attributed to any risk.
    pub censored_tail: f64,
    pub terminal_left: f64,
    pub convergence: Convergence,
    pub no_observed_events: bool,
}

impl SubDistributionEstimate {
    pub fn n_risks(&self) -> usize {
        self.per_risk.len()
    }

    /// `F_j(x)` for one risk in `1..=K+1`.
    pub fn sub_distribution(&self, risk: usize, x: f64, bound: Bound) -> f64 {
        self.per_risk[risk - 1]
            .iter()
            .filter(|s| match bound {
                Bound::Lower => s.right <= x,
                Bound::Upper => s.left < x,
            })
            .map(|s| s.mass)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.per_risk.iter().flatten().map(|s| s.mass).sum::<f64>() + self.censored_tail
    }

    /// Step function of risk `j` as `(x, F_j(x))` at its jump points.
    pub fn steps(&self, risk: usize, bound: Bound) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut acc = 0.0;
        for s in &self.per_risk[risk - 1] {
            acc += s.mass;
            let x = match bound {
                Bound::Lower => s.right,
                Bound::Upper => s.left,
            };
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = acc,
                _ => out.push((x, acc)),
            }
        }
        out
    }
}

/// `F~(x, y_j) = sum_{l <= j} F_l(x)`. Masses count by right endpoint
/// (lower) or by strictly-left endpoint (upper). Panics unless
/// `1 <= j <= K + 1`.
pub fn eval_repaired_f(est: &SubDistributionEstimate, x: f64, j: usize, bound: Bound) -> f64 {
    assert!((1..=est.n_risks()).contains(&j), "risk index {j} out of range");
    (1..=j).map(|l| est.sub_distribution(l, x, bound)).sum()
}

#[derive(Debug, Clone, Copy)]
enum Term {
    /// candidates `lo..hi` of one risk's block
    Event { lo: usize, hi: usize },
    /// candidates whose left end is at least `t` (position in `by_left`)
    Censored { from: usize },
}

/// The competing-risks likelihood over its support candidates.
#[derive(Debug, Clone)]
pub struct CrProblem {
    grid: MarkGrid,
    candidates: Vec<Candidate>,
    /// terminal index, if any record is censored
    terminal: Option<usize>,
    /// candidate indices sorted by left end (terminal excluded)
    by_left: Vec<usize>,
    terms: Vec<Term>,
}

impl CrProblem {
    pub fn new(data: &CompetingRisksDataset) -> Result<Self, RepairError> {
        if data.is_empty() {
            return Err(RepairError::EmptyData);
        }
        let n_risks = data.grid.n_risks();
        let mut censored: Vec<f64> = Vec::new();
        let mut lefts = vec![Vec::new(); n_risks];
        let mut rights = vec![Vec::new(); n_risks];
        for rec in &data.records {
            let e = rec.observation.endpoints();
            match (rec.risk, e.right) {
                (Some(j), Endpoint::Finite(r)) => {
                    lefts[j - 1].push(e.left);
                    rights[j - 1].push(r);
                }
                _ => censored.push(e.left),
            }
        }
        censored.sort_by(f64::total_cmp);

        let mut candidates = Vec::new();
        let mut blocks = Vec::with_capacity(n_risks);
        for j in 0..n_risks {
            lefts[j].sort_by(f64::total_cmp);
            rights[j].sort_by(f64::total_cmp);
            rights[j].dedup();
            let start = candidates.len();
            let mut prev_right = f64::NEG_INFINITY;
            for &r in &rights[j] {
                let own = lefts[j].partition_point(|&l| l < r);
                let cens = censored.partition_point(|&l| l < r);
                let mut l = f64::NEG_INFINITY;
                if own > 0 {
                    l = lefts[j][own - 1];
                }
                if cens > 0 {
                    l = l.max(censored[cens - 1]);
                }
                if l >= prev_right {
                    candidates.push(Candidate {
                        risk: Some(j + 1),
                        left: l,
                        right: r,
                    });
                }
                prev_right = r;
            }
            blocks.push(start..candidates.len());
        }
        let mut by_left: Vec<usize> = (0..candidates.len()).collect();
        by_left.sort_by(|&a, &b| candidates[a].left.total_cmp(&candidates[b].left));
        let terminal = censored.last().map(|&t| {
            candidates.push(Candidate {
                risk: None,
                left: t,
                right: f64::INFINITY,
            });
            candidates.len() - 1
        });

        let terms = data
            .records
            .iter()
            .map(|rec| {
                let e = rec.observation.endpoints();
                match (rec.risk, e.right) {
                    (Some(j), Endpoint::Finite(r)) => {
                        let block = &candidates[blocks[j - 1].clone()];
                        let lo = blocks[j - 1].start + block.partition_point(|c| c.left < e.left);
                        let hi = blocks[j - 1].start + block.partition_point(|c| c.right <= r);
                        Term::Event { lo, hi }
                    }
                    _ => Term::Censored {
                        from: by_left.partition_point(|&c| candidates[c].left < e.left),
                    },
                }
            })
            .collect();
        Ok(CrProblem {
            grid: data.grid.clone(),
            candidates,
            terminal,
            by_left,
            terms,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn n(&self) -> usize {
        self.terms.len()
    }

    /// `q_i` for every record.
    fn probabilities(&self, masses: &[f64], prefix: &mut Vec<f64>, suffix: &mut Vec<f64>) -> Vec<f64> {
        prefix.clear();
        prefix.push(0.0);
        for &m in masses {
            prefix.push(prefix.last().unwrap() + m);
        }
        suffix.clear();
        suffix.resize(self.by_left.len() + 1, 0.0);
        for i in (0..self.by_left.len()).rev() {
            suffix[i] = suffix[i + 1] + masses[self.by_left[i]];
        }
        let tail = self.terminal.map_or(0.0, |t| masses[t]);
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Event { lo, hi } => {
                    if hi > lo {
                        prefix[hi] - prefix[lo]
                    } else {
                        0.0
                    }
                }
                Term::Censored { from } => suffix[from] + tail,
            })
            .collect()
    }

    /// `sum_i log q_i`; `-inf` when some `q_i` vanishes.
    pub fn log_likelihood(&self, masses: &[f64]) -> Result<f64, RepairError> {
        if masses.len() != self.candidates.len() {
            return Err(RepairError::MassLength {
                expected: self.candidates.len(),
                got: masses.len(),
            });
        }
        let q = self.probabilities(masses, &mut Vec::new(), &mut Vec::new());
        Ok(sum_logs(&q))
    }

    /// One EM step: `m_c <- m_c / n * sum_{i : c in A_i} 1 / q_i`.
    /// Returns the log-likelihood at `masses`.
    fn em_step(&self, masses: &[f64], out: &mut [f64], prefix: &mut Vec<f64>, suffix: &mut Vec<f64>) -> f64 {
        let q = self.probabilities(masses, prefix, suffix);
        let m = self.candidates.len();
        let mut event_diff = vec![0.0; m + 1];
        let mut cens_diff = vec![0.0; self.by_left.len() + 1];
        let mut tail_weight = 0.0;
        for (t, &qi) in self.terms.iter().zip(&q) {
            if qi <= 0.0 {
                continue;
            }
            let w = 1.0 / qi;
            match *t {
                Term::Event { lo, hi } => {
                    event_diff[lo] += w;
                    event_diff[hi] -= w;
                }
                Term::Censored { from } => {
                    cens_diff[from] += w;
                    tail_weight += w;
                }
            }
        }
        let mut weight = vec![0.0; m];
        let mut acc = 0.0;
        for c in 0..m {
            acc += event_diff[c];
            weight[c] = acc;
        }
        let mut acc = 0.0;
        for (i, &c) in self.by_left.iter().enumerate() {
            acc += cens_diff[i];
            weight[c] += acc;
        }
        if let Some(t) = self.terminal {
            weight[t] = tail_weight;
        }
        let n = self.n() as f64;
        for c in 0..m {
            out[c] = masses[c] * weight[c] / n;
        }
        sum_logs(&q)
    }

    /// Largest `|m - EM(m)|`, the self-consistency residual.
    pub fn fixed_point_residual(&self, masses: &[f64]) -> f64 {
        let mut next = vec![0.0; masses.len()];
        self.em_step(masses, &mut next, &mut Vec::new(), &mut Vec::new());
        masses.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// EM from the uniform start.
    pub fn fit(&self, cfg: &EmConfig) -> SubDistributionEstimate {
        let m = self.candidates.len();
        let init = vec![1.0 / m as f64; m];
        self.fit_from(init, cfg)
    }

    /// EM from `masses`, returning the final masses alongside the estimate.
    ///
    /// Each iteration takes two EM steps and tries the squared extrapolation
    /// through them, keeping it only when it beats the second EM step, so the
    /// log-likelihood never decreases.
    pub fn fit_masses(&self, mut masses: Vec<f64>, cfg: &EmConfig) -> (Vec<f64>, Convergence) {
        let m = masses.len();
        let (mut p1, mut p2, mut ext) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let (mut prefix, mut suffix) = (Vec::new(), Vec::new());
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        let mut last_increment = f64::INFINITY;
        loop {
            let ll = self.em_step(&masses, &mut p1, &mut prefix, &mut suffix);
            let residual = masses.iter().zip(&p1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if let Some(&prev) = history.last() {
                last_increment = ll - prev;
                if last_increment.abs() < cfg.tolerance && residual < cfg.fixed_point_tolerance {
                    converged = true;
                }
            }
            history.push(ll);
            if converged || iterations >= cfg.max_iter {
                break;
            }
            iterations += 1;
            self.em_step(&p1, &mut p2, &mut prefix, &mut suffix);
            let (mut rr, mut vv) = (0.0, 0.0);
            for c in 0..m {
                let r = p1[c] - masses[c];
                let v = p2[c] - 2.0 * p1[c] + masses[c];
                rr += r * r;
                vv += v * v;
            }
            let mut alpha = if vv > 0.0 { -(rr / vv).sqrt() } else { -1.0 };
            alpha = alpha.min(-1.0);
            let mut use_ext = false;
            while alpha < -1.0 + 1e-3 {
                let mut feasible = true;
                for c in 0..m {
                    let r = p1[c] - masses[c];
                    let v = p2[c] - 2.0 * p1[c] + masses[c];
                    ext[c] = masses[c] - 2.0 * alpha * r + alpha * alpha * v;
                    if ext[c] < 0.0 || (ext[c] == 0.0 && p2[c] > 0.0) {
                        feasible = false;
                        break;
                    }
                }
                if feasible {
                    use_ext = true;
                    break;
                }
                alpha = 0.5 * (alpha - 1.0);
            }
            if use_ext {
                let total: f64 = ext.iter().sum();
                ext.iter_mut().for_each(|v| *v /= total);
                let l_ext = self.log_likelihood(&ext).expect("lengths match");
                let l_em = self.log_likelihood(&p2).expect("lengths match");
                use_ext = l_ext > l_em;
            }
            if use_ext {
                std::mem::swap(&mut masses, &mut ext);
            } else {
                std::mem::swap(&mut masses, &mut p2);
            }
            let mut pruned = false;
            for v in masses.iter_mut() {
                if *v > 0.0 && *v < cfg.prune_below {
                    *v = 0.0;
                    pruned = true;
                }
            }
            if pruned {
                let total: f64 = masses.iter().sum();
                masses.iter_mut().for_each(|v| *v /= total);
            }
        }
        let log_likelihood = *history.last().expect("at least one value");
        (
            masses,
            Convergence {
                iterations,
                converged,
                log_likelihood,
                last_increment,
                history,
            },
        )
    }

    pub fn fit_from(&self, init: Vec<f64>, cfg: &EmConfig) -> SubDistributionEstimate {
        let no_observed_events = self.candidates.iter().all(|c| c.risk.is_none());
        let (masses, convergence) = self.fit_masses(init, cfg);
        self.estimate(&masses, convergence, no_observed_events)
    }

    fn estimate(&self, masses: &[f64], convergence: Convergence, no_observed_events: bool) -> SubDistributionEstimate {
        let total: f64 = masses.iter().sum();
        let mut per_risk = vec![Vec::new(); self.grid.n_risks()];
        let mut censored_tail = 0.0;
        for (c, &m) in self.candidates.iter().zip(masses) {
            if m <= 0.0 {
                continue;
            }
            match c.risk {
                Some(j) => per_risk[j - 1].push(SupportInterval {
                    left: c.left,
                    right: c.right,
                    mass: m / total,
                }),
                None => censored_tail = m / total,
            }
        }
        SubDistributionEstimate {
            grid: self.grid.clone(),
            per_risk,
            censored_tail,
            terminal_left: self.terminal.map_or(f64::INFINITY, |t| self.candidates[t].left),
            convergence,
            no_observed_events,
        }
    }
}

fn sum_logs(q: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in q {
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        s += v.ln();
    }
    s
}

/// EM fit of the competing-risks MLE. With every record censored all mass
/// sits on the terminal half-line and `no_observed_events` is set.
pub fn fit_cr_mle(data: &CompetingRisksDataset, cfg: &EmConfig) -> Result<SubDistributionEstimate, RepairError> {
    Ok(CrProblem::new(data)?.fit(cfg))
}
