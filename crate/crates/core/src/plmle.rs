//! Closed-form product-limit MLE.
//!
//! Once the data are sorted by `U`, the likelihood factorizes exactly like the
//! right-censored one, so the masses on the maximal intersections are the
//! Kaplan-Meier weights of `(U, Delta_+)`. Marks only decide where on the
//! plane each weight sits.

use num_traits::{FromPrimitive, Num};
use thiserror::Error;

use crate::data::{rank_order, OrderedDataset};
use crate::maxint::{maximal_intersections, MaximalIntersection, ObservedSet, Region};

#[derive(Debug, Error, PartialEq)]
pub enum PlmleError {
    #[error("fitted masses sum to {0}, not 1")]
    MassDrift(f64),
    #[error("mass vector has {masses} probabilities for {regions} maximal intersections")]
    LengthMismatch { masses: usize, regions: usize },
}

/// Which corner of each maximal intersection receives its mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// upper-right corners: `R <= x`
    Lower,
    /// lower-left corners: `D < x`
    Upper,
}

/// Product-limit weights for a `U`-sorted event indicator sequence.
///
/// Returns the per-rank weights (zero for censored ranks) and the survival
/// left after the last rank. Generic so tests can run it in exact arithmetic.
pub fn product_limit_weights<T>(delta_plus: &[bool]) -> (Vec<T>, T)
where
    T: Num + Clone + FromPrimitive,
{
    let n = delta_plus.len();
    let mut surv = T::one();
    let mut weights = Vec::with_capacity(n);
    for (i, &event) in delta_plus.iter().enumerate() {
        if !event {
            weights.push(T::zero());
            continue;
        }
        let at_risk = T::from_usize(n - i).expect("sample size fits the scalar type");
        weights.push(surv.clone() / at_risk.clone());
        surv = surv * ((at_risk.clone() - T::one()) / at_risk);
    }
    (weights, surv)
}

/// The fitted MLE: one probability per maximal intersection plus the mass of
/// the terminal half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    masses: Vec<(MaximalIntersection, f64)>,
    censored_tail: f64,
    u_last: f64,
    // segment indices sorted by d, with matching prefix sums
    by_d: Vec<usize>,
    d_sorted: Vec<f64>,
    d_prefix: Vec<f64>,
    r_sorted: Vec<f64>,
    r_prefix: Vec<f64>,
}

impl MassVector {
    /// Assemble a mass vector from maximal intersections and arbitrary
    /// probabilities. The probability of a half-plane entry becomes the tail.
    pub fn from_parts(mis: Vec<MaximalIntersection>, probs: &[f64]) -> Result<Self, PlmleError> {
        if mis.len() != probs.len() {
            return Err(PlmleError::LengthMismatch {
                masses: probs.len(),
                regions: mis.len(),
            });
        }
        let mut masses = Vec::with_capacity(mis.len());
        let mut tail = 0.0;
        let mut u_last = f64::INFINITY;
        for (mi, &p) in mis.into_iter().zip(probs) {
            match mi.region {
                Region::HalfPlane { u_last: u } => {
                    tail = p;
                    u_last = u;
                }
                Region::Segment { .. } => masses.push((mi, p)),
            }
        }
        Ok(Self::assemble(masses, tail, u_last))
    }

    fn assemble(mut masses: Vec<(MaximalIntersection, f64)>, censored_tail: f64, u_last: f64) -> Self {
        masses.sort_by_key(|a| a.0.source_rank);
        let seg = |mi: &MaximalIntersection| match mi.region {
            Region::Segment { d, r, .. } => (d, r),
            Region::HalfPlane { .. } => unreachable!("half-plane stored as tail"),
        };
        let mut r_sorted = Vec::with_capacity(masses.len());
        let mut r_prefix = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        let mut by_r: Vec<usize> = (0..masses.len()).collect();
        by_r.sort_by(|&a, &b| seg(&masses[a].0).1.total_cmp(&seg(&masses[b].0).1));
        for &i in &by_r {
            acc += masses[i].1;
            r_sorted.push(seg(&masses[i].0).1);
            r_prefix.push(acc);
        }
        let mut by_d: Vec<usize> = (0..masses.len()).collect();
        by_d.sort_by(|&a, &b| seg(&masses[a].0).0.total_cmp(&seg(&masses[b].0).0));
        let mut d_sorted = Vec::with_capacity(masses.len());
        let mut d_prefix = Vec::with_capacity(masses.len());
        acc = 0.0;
        for &i in &by_d {
            acc += masses[i].1;
            d_sorted.push(seg(&masses[i].0).0);
            d_prefix.push(acc);
        }
        MassVector {
            masses,
            censored_tail,
            u_last,
            by_d,
            d_sorted,
            d_prefix,
            r_sorted,
            r_prefix,
        }
    }

    /// Segment masses in rank order.
    pub fn masses(&self) -> &[(MaximalIntersection, f64)] {
        &self.masses
    }

    pub fn censored_tail(&self) -> f64 {
        self.censored_tail
    }

    /// Left end of the half-plane; `+inf` when there is none.
    pub fn u_last(&self) -> f64 {
        self.u_last
    }

    pub fn has_halfplane(&self) -> bool {
        self.u_last.is_finite()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().map(|m| m.1).sum::<f64>() + self.censored_tail
    }

    fn tail_below(&self, x: f64) -> f64 {
        if x > self.u_last {
            self.censored_tail
        } else {
            0.0
        }
    }

    /// Marginal estimate of `F_X(x)`.
    pub fn eval_fx(&self, x: f64, bound: Bound) -> f64 {
        match bound {
            Bound::Lower => {
                let k = self.r_sorted.partition_point(|&r| r <= x);
                if k == 0 {
                    0.0
                } else {
                    self.r_prefix[k - 1]
                }
            }
            Bound::Upper => {
                let k = self.d_sorted.partition_point(|&d| d < x);
                let seg = if k == 0 { 0.0 } else { self.d_prefix[k - 1] };
                seg + self.tail_below(x)
            }
        }
    }

    /// Bivariate estimate of `F(x, y)`.
    pub fn eval_f(&self, x: f64, y: f64, bound: Bound) -> f64 {
        let seg: f64 = self
            .masses
            .iter()
            .filter(|(mi, _)| match mi.region {
                Region::Segment { d, r, mark } => {
                    mark <= y
                        && match bound {
                            Bound::Lower => r <= x,
                            Bound::Upper => d < x,
                        }
                }
                Region::HalfPlane { .. } => false,
            })
            .map(|m| m.1)
            .sum();
        match bound {
            Bound::Lower => seg,
            Bound::Upper => seg + self.tail_below(x),
        }
    }

    /// `F(x, y)` on a rectangular grid; `out[i][j]` is at `(xs[i], ys[j])`.
    pub fn eval_f_grid(&self, xs: &[f64], ys: &[f64], bound: Bound) -> Vec<Vec<f64>> {
        let seg = |i: usize| match self.masses[i].0.region {
            Region::Segment { d, r, mark } => (d, r, mark),
            Region::HalfPlane { .. } => unreachable!(),
        };
        xs.iter()
            .map(|&x| {
                let mut marks: Vec<(f64, f64)> = match bound {
                    Bound::Lower => (0..self.masses.len())
                        .filter(|&i| seg(i).1 <= x)
                        .map(|i| (seg(i).2, self.masses[i].1))
                        .collect(),
                    Bound::Upper => self.by_d[..self.d_sorted.partition_point(|&d| d < x)]
                        .iter()
                        .map(|&i| (seg(i).2, self.masses[i].1))
                        .collect(),
                };
                marks.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut prefix = Vec::with_capacity(marks.len());
                let mut acc = 0.0;
                for m in &marks {
                    acc += m.1;
                    prefix.push(acc);
                }
                let tail = match bound {
                    Bound::Lower => 0.0,
                    Bound::Upper => self.tail_below(x),
                };
                ys.iter()
                    .map(|&y| {
                        let k = marks.partition_point(|m| m.0 <= y);
                        tail + if k == 0 { 0.0 } else { prefix[k - 1] }
                    })
                    .collect()
            })
            .collect()
    }

    /// Jump points of the marginal step function, as `(x, value)` pairs.
    ///
    /// For the lower bound the value holds from `x` on (right-continuous).
    /// For the upper bound it holds immediately to the right of `x`.
    pub fn marginal_steps(&self, bound: Bound) -> Vec<(f64, f64)> {
        let mut xs: Vec<f64> = match bound {
            Bound::Lower => self.r_sorted.clone(),
            Bound::Upper => {
                let mut v = self.d_sorted.clone();
                if self.has_halfplane() {
                    v.push(self.u_last);
                    v.sort_by(f64::total_cmp);
                }
                v
            }
        };
        xs.dedup();
        xs.into_iter()
            .map(|x| {
                let v = match bound {
                    Bound::Lower => self.eval_fx(x, Bound::Lower),
                    Bound::Upper => {
                        let k = self.d_sorted.partition_point(|&d| d <= x);
                        let seg = if k == 0 { 0.0 } else { self.d_prefix[k - 1] };
                        seg + if x >= self.u_last { self.censored_tail } else { 0.0 }
                    }
                };
                (x, v)
            })
            .collect()
    }
}

/// Fit the product-limit masses on the maximal intersections of `ordered`.
pub fn fit_masses(ordered: &OrderedDataset, maxints: &[MaximalIntersection]) -> Result<MassVector, PlmleError> {
    let (weights, surv) = product_limit_weights::<f64>(&ordered.delta_plus());
    let mut masses = Vec::with_capacity(maxints.len());
    let mut tail = 0.0;
    let mut u_last = f64::INFINITY;
    for mi in maxints {
        match mi.region {
            Region::Segment { .. } => {
                let p = mi.member_ranks.iter().map(|&r| weights[r]).sum();
                masses.push((mi.clone(), p));
            }
            Region::HalfPlane { u_last: u } => {
                tail = surv;
                u_last = u;
            }
        }
    }
    let fitted = MassVector::assemble(masses, tail, u_last);
    let total = fitted.total();
    if (total - 1.0).abs() > 1e-12 {
        return Err(PlmleError::MassDrift(total));
    }
    Ok(fitted)
}

/// Convenience: maximal intersections and masses in one call.
pub fn fit(ordered: &OrderedDataset) -> Result<MassVector, PlmleError> {
    fit_masses(ordered, &maximal_intersections(ordered))
}

/// Log-likelihood of `masses` for the data they were built from.
///
/// Each event contributes the mass of its own maximal intersection, each
/// censored record the mass of every intersection generated after it plus
/// the tail. Returns `-inf` when a factor vanishes.
pub fn log_likelihood(masses: &MassVector, ordered: &OrderedDataset) -> f64 {
    let n = ordered.len();
    let mut own = vec![f64::NAN; n];
    // mass generated at rank >= i
    let mut generated = vec![0.0; n + 1];
    for (mi, p) in masses.masses() {
        for &r in &mi.member_ranks {
            own[r] = *p;
        }
        generated[mi.source_rank] += *p;
    }
    for i in (0..n).rev() {
        generated[i] += generated[i + 1];
    }
    let mut ll = 0.0;
    for (i, rec) in ordered.records().iter().enumerate() {
        let factor = if rec.delta_plus() {
            own[i]
        } else {
            generated[i + 1] + masses.censored_tail()
        };
        if !(factor > 0.0) {
            return f64::NEG_INFINITY;
        }
        ll += factor.ln();
    }
    ll
}

/// Step-function versions of the empirical processes `H_n`, `V_n`, `V_Xn`,
/// `Lambda_n` and `Lambda_Xn`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProcesses {
    n: usize,
    /// distinct `U` values
    jumps: Vec<f64>,
    /// `#{U <= jumps[m]}`
    cum_count: Vec<usize>,
    /// `#{Delta_+ = 1, U <= jumps[m]}`
    cum_events: Vec<usize>,
    /// cumulative `Lambda_Xn` at each jump
    cum_hazard: Vec<f64>,
    /// every event as `(U, Z, 1 / #{U' >= U})`, sorted by `U`
    events: Vec<(f64, f64, f64)>,
}

impl EmpiricalProcesses {
    fn index_le(&self, x: f64) -> Option<usize> {
        self.jumps.partition_point(|&u| u <= x).checked_sub(1)
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn h(&self, x: f64) -> f64 {
        self.index_le(x)
            .map_or(0.0, |m| self.cum_count[m] as f64 / self.n as f64)
    }

    pub fn v_x(&self, x: f64) -> f64 {
        self.index_le(x)
            .map_or(0.0, |m| self.cum_events[m] as f64 / self.n as f64)
    }

    pub fn v(&self, x: f64, y: f64) -> f64 {
        let count = self.events.iter().take_while(|e| e.0 <= x).filter(|e| e.1 <= y).count();
        count as f64 / self.n as f64
    }

    pub fn lambda_x(&self, x: f64) -> f64 {
        self.index_le(x).map_or(0.0, |m| self.cum_hazard[m])
    }

    pub fn lambda(&self, x: f64, y: f64) -> f64 {
        self.events
            .iter()
            .take_while(|e| e.0 <= x)
            .filter(|e| e.1 <= y)
            .map(|e| e.2)
            .sum()
    }

    /// Hazard increment `Lambda_Xn({u})` at each distinct `U`.
    pub fn hazard_jumps(&self) -> Vec<(f64, f64)> {
        let mut prev_events = 0;
        let mut prev_count = 0;
        self.jumps
            .iter()
            .enumerate()
            .map(|(m, &u)| {
                let e = self.cum_events[m] - prev_events;
                let at_risk = self.n - prev_count;
                prev_events = self.cum_events[m];
                prev_count = self.cum_count[m];
                (u, e as f64 / at_risk as f64)
            })
            .collect()
    }

    /// `prod_{s <= x} (1 - Lambda_Xn(ds))`
    pub fn product_integral(&self, x: f64) -> f64 {
        self.hazard_jumps()
            .into_iter()
            .take_while(|j| j.0 <= x)
            .map(|j| 1.0 - j.1)
            .product()
    }
}

pub fn empirical_processes(ordered: &OrderedDataset) -> EmpiricalProcesses {
    let n = ordered.len();
    let mut jumps = Vec::new();
    let mut cum_count = Vec::new();
    let mut cum_events = Vec::new();
    let mut cum_hazard = Vec::new();
    let mut events = Vec::new();
    let records = ordered.records();
    let mut i = 0;
    let mut events_so_far = 0;
    let mut hazard = 0.0;
    while i < n {
        let u = records[i].u();
        let at_risk = n - i;
        let mut j = i;
        let mut e = 0;
        while j < n && records[j].u() == u {
            if records[j].delta_plus() {
                e += 1;
                let z = records[j].mark.expect("event records carry a mark");
                events.push((u, z, 1.0 / at_risk as f64));
            }
            j += 1;
        }
        events_so_far += e;
        hazard += e as f64 / at_risk as f64;
        jumps.push(u);
        cum_count.push(j);
        cum_events.push(events_so_far);
        cum_hazard.push(hazard);
        i = j;
    }
    EmpiricalProcesses {
        n,
        jumps,
        cum_count,
        cum_events,
        cum_hazard,
        events,
    }
}

/// Data with every event set shrunk to its upper-right corner.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedData {
    sets: Vec<ObservedSet>,
}

impl ImputedData {
    pub fn sets(&self) -> &[ObservedSet] {
        &self.sets
    }
}

/// Point masses fitted to imputed data.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedFit {
    /// `(x, mark, mass)` per point, in rank order
    pub points: Vec<(f64, f64, f64)>,
    pub censored_tail: f64,
}

pub fn impute_right_endpoints(ordered: &OrderedDataset) -> ImputedData {
    let sets = ordered
        .records()
        .iter()
        .map(|rec| {
            if rec.delta_plus() {
                ObservedSet::Point {
                    x: rec.u(),
                    mark: rec.mark.expect("event records carry a mark"),
                }
            } else {
                ObservedSet::HalfPlane {
                    left: rec.endpoints.left,
                }
            }
        })
        .collect();
    ImputedData { sets }
}

/// MLE for right-censored points with marks: the points are their own
/// maximal intersections, so this is Kaplan-Meier on `(x, is_point)`.
pub fn fit_imputed(data: &ImputedData) -> ImputedFit {
    let mut keyed: Vec<(f64, bool, usize)> = data
        .sets
        .iter()
        .enumerate()
        .map(|(i, s)| match *s {
            ObservedSet::Point { x, .. } => (x, true, i),
            ObservedSet::HalfPlane { left } => (left, false, i),
            ObservedSet::Segment { right, .. } => (right, true, i),
        })
        .collect();
    keyed.sort_by(|a, b| rank_order(*a, *b));
    let events: Vec<bool> = keyed.iter().map(|k| k.1).collect();
    let (weights, surv) = product_limit_weights::<f64>(&events);
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    let mut seen: Vec<(f64, f64)> = Vec::new();
    for (key, w) in keyed.iter().zip(weights) {
        if let ObservedSet::Point { x, mark } = data.sets[key.2] {
            // identical points pool their mass
            if let Some(pos) = seen.iter().rposition(|&(px, pz)| px == x && pz == mark) {
                points[pos].2 += w;
            } else {
                seen.push((x, mark));
                points.push((x, mark, w));
            }
        }
    }
    let censored_tail = if keyed.last().is_some_and(|k| !k.1) { surv } else { 0.0 };
    ImputedFit { points, censored_tail }
}

/// Largest `R - D` over segments carrying positive mass, and the tail mass.
/// Both tend to zero exactly when the limit of the MLE is unique.
pub fn nonuniqueness_diagnostics(masses: &MassVector) -> (f64, f64) {
    let longest = masses
        .masses()
        .iter()
        .filter(|m| m.1 > 0.0)
        .map(|(mi, _)| match mi.region {
            Region::Segment { d, r, .. } => r - d,
            Region::HalfPlane { .. } => 0.0,
        })
        .fold(0.0, f64::max);
    (longest, masses.censored_tail())
}
