//! Observations of the interval censored continuous mark model.
//!
//! A subject has `k` ordered inspection times `T_1 < ... < T_k`. The survival
//! time is known to lie in exactly one of the `k + 1` intervals
//! `(T_{j-1}, T_j]` (with `T_0 = 0`, `T_{k+1} = +inf`), recorded here as the
//! one-based `delta_index = j`. The mark is observed if and only if `j <= k`.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("observation has no inspection times")]
    NoTimes,
    #[error("inspection time {index} is {value}; times must be finite and strictly positive")]
    NonPositiveTime { index: usize, value: f64 },
    #[error("inspection times are not strictly increasing at position {index}")]
    NotIncreasing { index: usize },
    #[error("delta index {delta_index} outside 1..={max}")]
    DeltaOutOfRange { delta_index: usize, max: usize },
    #[error("mark must be present iff the event was observed (delta index {delta_index}, k = {k})")]
    MarkPresence { delta_index: usize, k: usize },
    #[error("mark {0} is not finite")]
    NonFiniteMark(f64),
    #[error("dataset mixes observations with k = {expected} and k = {found} (record {index})")]
    MixedK {
        expected: usize,
        found: usize,
        index: usize,
    },
    #[error("dataset is empty")]
    Empty,
}

/// Right endpoint of an x-interval: finite, or `+inf` for the censored case.
///
/// Kept as an explicit variant so comparisons never rely on a sentinel float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Finite(f64),
    PosInf,
}

impl Endpoint {
    pub fn is_finite(self) -> bool {
        matches!(self, Endpoint::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Endpoint::Finite(v) => Some(v),
            Endpoint::PosInf => None,
        }
    }

    /// `x <= self`, total over the extended reals.
    pub fn ge(self, x: f64) -> bool {
        match self {
            Endpoint::Finite(v) => x <= v,
            Endpoint::PosInf => true,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Endpoint::Finite(v) => v,
            Endpoint::PosInf => f64::INFINITY,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Finite(v) => write!(f, "{v}"),
            Endpoint::PosInf => f.write_str("inf"),
        }
    }
}

/// One subject's record `(T, Delta, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    times: Vec<f64>,
    delta_index: usize,
    mark: Option<f64>,
}

impl Observation {
    pub fn new(times: Vec<f64>, delta_index: usize, mark: Option<f64>) -> Result<Self, DataError> {
        let k = times.len();
        if k == 0 {
            return Err(DataError::NoTimes);
        }
        for (index, &t) in times.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(DataError::NonPositiveTime { index, value: t });
            }
            if index > 0 && times[index - 1] >= t {
                return Err(DataError::NotIncreasing { index });
            }
        }
        if delta_index == 0 || delta_index > k + 1 {
            return Err(DataError::DeltaOutOfRange {
                delta_index,
                max: k + 1,
            });
        }
        if mark.is_some() != (delta_index <= k) {
            return Err(DataError::MarkPresence { delta_index, k });
        }
        if let Some(z) = mark {
            if !z.is_finite() {
                return Err(DataError::NonFiniteMark(z));
            }
        }
        Ok(Self {
            times,
            delta_index,
            mark,
        })
    }

    /// Current status record: one inspection time.
    pub fn current_status(t: f64, mark: Option<f64>) -> Result<Self, DataError> {
        let delta_index = if mark.is_some() { 1 } else { 2 };
        Self::new(vec![t], delta_index, mark)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    pub fn delta_index(&self) -> usize {
        self.delta_index
    }

    pub fn mark(&self) -> Option<f64> {
        self.mark
    }

    pub fn delta_plus(&self) -> bool {
        self.delta_index <= self.k()
    }

    pub fn endpoints(&self) -> DerivedEndpoints {
        derive_endpoints(self)
    }
}

/// `(L, R, U, Delta_+)` for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedEndpoints {
    pub left: f64,
    pub right: Endpoint,
    pub u: f64,
    pub delta_plus: bool,
}

pub fn derive_endpoints(obs: &Observation) -> DerivedEndpoints {
    let j = obs.delta_index;
    let k = obs.k();
    let left = if j == 1 { 0.0 } else { obs.times[j - 2] };
    let right = if j <= k {
        Endpoint::Finite(obs.times[j - 1])
    } else {
        Endpoint::PosInf
    };
    let delta_plus = j <= k;
    // U = R when the event was seen, otherwise U = L = T_k.
    let u = match right {
        Endpoint::Finite(r) => r,
        Endpoint::PosInf => left,
    };
    DerivedEndpoints {
        left,
        right,
        u,
        delta_plus,
    }
}

/// What the estimators need from one record, in sorted position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedRecord {
    pub endpoints: DerivedEndpoints,
    pub mark: Option<f64>,
    pub original_index: usize,
}

impl OrderedRecord {
    pub fn u(&self) -> f64 {
        self.endpoints.u
    }

    pub fn delta_plus(&self) -> bool {
        self.endpoints.delta_plus
    }
}

/// Records sorted by `U`; within a tie, observed events precede censored
/// records, and remaining ties keep input order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedDataset {
    records: Vec<OrderedRecord>,
    k: usize,
}

impl OrderedDataset {
    pub fn records(&self) -> &[OrderedRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sorted rank -> original index.
    pub fn permutation(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.original_index).collect()
    }

    pub fn delta_plus(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.delta_plus()).collect()
    }
}

/// Ordering key used for sorted ranks.
pub(crate) fn rank_order(a: (f64, bool, usize), b: (f64, bool, usize)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| b.1.cmp(&a.1))
        .then_with(|| a.2.cmp(&b.2))
}

pub fn order_dataset(data: &[Observation]) -> Result<OrderedDataset, DataError> {
    let first = data.first().ok_or(DataError::Empty)?;
    let k = first.k();
    if let Some((index, obs)) = data.iter().enumerate().find(|(_, o)| o.k() != k) {
        return Err(DataError::MixedK {
            expected: k,
            found: obs.k(),
            index,
        });
    }
    let mut keys: Vec<(f64, bool, usize)> = data
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let e = derive_endpoints(obs);
            (e.u, e.delta_plus, i)
        })
        .collect();
    // keys are distinct through the index, so an unstable sort is exact
    keys.sort_unstable_by(|a, b| rank_order(*a, *b));
    let records = keys
        .into_iter()
        .map(|(_, _, original_index)| {
            let obs = &data[original_index];
            OrderedRecord {
                endpoints: derive_endpoints(obs),
                mark: obs.mark(),
                original_index,
            }
        })
        .collect();
    Ok(OrderedDataset { records, k })
}
