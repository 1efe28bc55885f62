//! Maximal intersections of the observed sets.
//!
//! An observed event is a horizontal segment `(L, R] x {Z}`; a censored record
//! is the half-plane `(T_k, inf) x R`. After ordering by `U`, each event owns
//! exactly one maximal intersection `(D, R] x {Z}`, where `D` is the largest
//! left endpoint among its own and all earlier censored records. A single
//! pass over the sorted data therefore suffices.

use std::collections::BTreeMap;

use crate::data::{Endpoint, OrderedDataset};

/// A region of the `(x, y)` plane that can carry probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// `(d, r] x {mark}`
    Segment { d: f64, r: f64, mark: f64 },
    /// `(u_last, inf) x R`
    HalfPlane { u_last: f64 },
}

impl Region {
    pub fn is_segment(&self) -> bool {
        matches!(self, Region::Segment { .. })
    }

    /// `self` is a subset of `set`.
    pub fn is_within(&self, set: &ObservedSet) -> bool {
        match (*self, *set) {
            (Region::Segment { d, r, mark }, ObservedSet::Segment { left, right, mark: z }) => {
                mark == z && left <= d && r <= right
            }
            (Region::Segment { d, .. }, ObservedSet::HalfPlane { left }) => d >= left,
            (Region::HalfPlane { u_last }, ObservedSet::HalfPlane { left }) => u_last >= left,
            (Region::Segment { d, r, mark }, ObservedSet::Point { x, mark: z }) => {
                // only a degenerate segment could fit, and (d, r] is never degenerate
                mark == z && d >= x && r <= x
            }
            (Region::HalfPlane { .. }, _) => false,
        }
    }

    /// Sort key that orders regions deterministically (segments by `r`, then
    /// `d`, then mark; the half-plane last).
    pub fn sort_key(&self) -> (u8, f64, f64, f64) {
        match *self {
            Region::Segment { d, r, mark } => (0, r, d, mark),
            Region::HalfPlane { u_last } => (1, u_last, 0.0, 0.0),
        }
    }
}

/// An observed set, the region known to contain `(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservedSet {
    /// `(left, right] x {mark}`
    Segment { left: f64, right: f64, mark: f64 },
    /// `(left, inf) x R`
    HalfPlane { left: f64 },
    /// `{x} x {mark}`; produced by right-endpoint imputation.
    Point { x: f64, mark: f64 },
}

impl ObservedSet {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            ObservedSet::Segment { left, right, mark } => left < x && x <= right && y == mark,
            ObservedSet::HalfPlane { left } => x > left,
            ObservedSet::Point { x: px, mark } => x == px && y == mark,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalIntersection {
    pub region: Region,
    /// Sorted rank of the first record generating this intersection.
    pub source_rank: usize,
    /// Ranks of every event record whose observed set equals the generating
    /// one. Identical event sets share a single maximal intersection.
    pub member_ranks: Vec<usize>,
}

/// Observed sets of an ordered dataset, in rank order.
pub fn observed_sets(ordered: &OrderedDataset) -> Vec<ObservedSet> {
    ordered
        .records()
        .iter()
        .map(|rec| match rec.endpoints.right {
            Endpoint::Finite(right) => ObservedSet::Segment {
                left: rec.endpoints.left,
                right,
                mark: rec.mark.expect("event records carry a mark"),
            },
            Endpoint::PosInf => ObservedSet::HalfPlane {
                left: rec.endpoints.left,
            },
        })
        .collect()
}

/// O(n) pass over the `U`-sorted data. Segments come out in increasing order
/// of `R`; the half-plane, if any, is last.
pub fn maximal_intersections(ordered: &OrderedDataset) -> Vec<MaximalIntersection> {
    let records = ordered.records();
    let mut out: Vec<MaximalIntersection> = Vec::new();
    let mut censored_max = f64::NEG_INFINITY;
    // first output index belonging to the current tie group of `U`
    let mut group_start = 0;
    let mut group_u = f64::NAN;

    for (rank, rec) in records.iter().enumerate() {
        let ep = rec.endpoints;
        if !ep.delta_plus {
            censored_max = censored_max.max(ep.left);
            continue;
        }
        let r = ep.u;
        let mark = rec.mark.expect("event records carry a mark");
        if r != group_u {
            group_u = r;
            group_start = out.len();
        }
        let duplicate = out[group_start..].iter_mut().find(|mi| {
            let first = &records[mi.source_rank];
            first.endpoints.left == ep.left && first.mark == Some(mark)
        });
        if let Some(mi) = duplicate {
            mi.member_ranks.push(rank);
            continue;
        }
        out.push(MaximalIntersection {
            region: Region::Segment {
                d: censored_max.max(ep.left),
                r,
                mark,
            },
            source_rank: rank,
            member_ranks: vec![rank],
        });
    }

    if let Some(last) = records.last() {
        if !last.delta_plus() {
            out.push(MaximalIntersection {
                region: Region::HalfPlane { u_last: last.u() },
                source_rank: records.len() - 1,
                member_ranks: Vec::new(),
            });
        }
    }
    out
}

/// Number of observed sets containing `(x, y)`.
pub fn height_at(sets: &[ObservedSet], point: (f64, f64)) -> usize {
    sets.iter().filter(|s| s.contains(point.0, point.1)).count()
}

/// Quadratic reference computation of the maximal intersections.
///
/// Works directly on the geometry: every mark line is cut into elementary
/// cells `(e_m, e_{m+1}]` by the endpoints, and each cell is labelled with the
/// set of observed sets containing it. A maximal intersection is a cell label
/// that is maximal under inclusion (equivalently, a local maximum region of
/// the height map); its region is the union of the cells carrying that label.
///
/// `Point` sets are not supported here. Returned `member_ranks` index into
/// `sets`.
pub fn brute_force_maximal_intersections(sets: &[ObservedSet]) -> Vec<MaximalIntersection> {
    let mut thresholds: Vec<(f64, usize)> = Vec::new();
    let mut lines: BTreeMap<u64, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for (idx, set) in sets.iter().enumerate() {
        match *set {
            ObservedSet::Segment { left, right, mark } => {
                lines.entry(mark.to_bits()).or_default().push((left, right, idx))
            }
            ObservedSet::HalfPlane { left } => thresholds.push((left, idx)),
            ObservedSet::Point { .. } => {
                panic!("point sets are not supported by the reference computation")
            }
        }
    }
    thresholds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t_values: Vec<f64> = thresholds.iter().map(|t| t.0).collect();
    let total_halfplanes = t_values.len();
    let mut out = Vec::new();
    let mut halfplane_dominated = false;

    for (&bits, segs) in &lines {
        let mark = f64::from_bits(bits);
        let lo = segs.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = segs.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let mut edges: Vec<f64> = segs.iter().flat_map(|s| [s.0, s.1]).collect();
        edges.extend(t_values.iter().copied().filter(|&t| t > lo && t < hi));
        edges.sort_by(f64::total_cmp);
        edges.dedup();

        // label -> (max halfplane count, cell span at that count)
        let mut labels: BTreeMap<Vec<usize>, (usize, f64, f64)> = BTreeMap::new();
        for cell in edges.windows(2) {
            let (a, b) = (cell[0], cell[1]);
            let members: Vec<usize> = segs.iter().filter(|s| s.0 <= a && b <= s.1).map(|s| s.2).collect();
            if members.is_empty() {
                continue;
            }
            let count = t_values.partition_point(|&t| t <= a);
            let entry = labels.entry(members).or_insert((count, a, b));
            if count > entry.0 {
                *entry = (count, a, b);
            } else if count == entry.0 {
                entry.1 = entry.1.min(a);
                entry.2 = entry.2.max(b);
            }
        }

        let labels: Vec<(Vec<usize>, (usize, f64, f64))> = labels.into_iter().collect();
        for (i, (members, (count, a, b))) in labels.iter().enumerate() {
            if *count == total_halfplanes {
                halfplane_dominated = true;
            }
            let dominated = labels
                .iter()
                .enumerate()
                .any(|(j, (other, (oc, _, _)))| j != i && oc >= count && members.iter().all(|m| other.contains(m)));
            if !dominated {
                out.push(MaximalIntersection {
                    region: Region::Segment { d: *a, r: *b, mark },
                    source_rank: members[0],
                    member_ranks: members.clone(),
                });
            }
        }
    }

    if total_halfplanes > 0 && !halfplane_dominated {
        let (u_last, idx) = *thresholds.last().unwrap();
        out.push(MaximalIntersection {
            region: Region::HalfPlane { u_last },
            source_rank: idx,
            member_ranks: Vec::new(),
        });
    }
    out.sort_by(|a, b| {
        let (ka, kb) = (a.region.sort_key(), b.region.sort_key());
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
    out
}
