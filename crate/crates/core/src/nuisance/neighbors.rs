//! Exact neighbour search over a training fold.
//!
//! Points are stored sorted by their first coordinate. Range queries binary
//! search that coordinate; k-nearest-neighbour queries sweep outwards from
//! the query's insertion point and stop once the first-coordinate gap alone
//! exceeds the current k-th distance. Results are exact, and distance ties
//! are broken by the lowest original training index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Range;

use crate::data::Covariates;

/// Candidate neighbour ordered by `(squared distance, original index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist2: f64,
    /// Index into the original (unsorted) training rows.
    pub index: usize,
    /// Position in the sorted storage.
    pub(crate) slot: usize,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist2.sqrt()
    }
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    d: usize,
    /// Row-major points sorted by first coordinate.
    points: Vec<f64>,
    /// First coordinates, sorted (duplicated for cache-friendly search).
    first: Vec<f64>,
    original: Vec<usize>,
}

impl NeighborIndex {
    pub fn new(x: &Covariates) -> Self {
        let d = x.dim();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&i, &j| x.row(i)[0].total_cmp(&x.row(j)[0]).then(i.cmp(&j)));
        let mut points = Vec::with_capacity(x.len() * d);
        for &i in &order {
            points.extend_from_slice(x.row(i));
        }
        let first = order.iter().map(|&i| x.row(i)[0]).collect();
        Self { d, points, first, original: order }
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Point stored at sorted position `slot`.
    #[inline]
    pub fn point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.d..(slot + 1) * self.d]
    }

    /// Original training index of sorted position `slot`.
    #[inline]
    pub fn original_index(&self, slot: usize) -> usize {
        self.original[slot]
    }

    /// Sorted order as original indices.
    pub fn permutation(&self) -> &[usize] {
        &self.original
    }

    /// Sorted positions whose first coordinate lies in `[q0 − h, q0 + h]`.
    /// For `d = 1` this is exactly the closed window around the query.
    pub fn slab(&self, q0: f64, h: f64) -> Range<usize> {
        let lo = self.first.partition_point(|&v| v < q0 - h);
        let hi = self.first.partition_point(|&v| v <= q0 + h);
        lo..hi.max(lo)
    }

    #[inline]
    fn dist2(&self, slot: usize, q: &[f64]) -> f64 {
        self.point(slot).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// The `k` nearest training points to `q`, nearest first.
    pub fn knn(&self, q: &[f64], k: usize) -> Vec<Neighbor> {
        let n = self.len();
        let k = k.min(n);
        if k == 0 {
            return Vec::new();
        }
        let start = self.first.partition_point(|&v| v < q[0]);
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        let (mut left, mut right) = (start, start);
        let (mut left_done, mut right_done) = (start == 0, start == n);
        while !(left_done && right_done) {
            // step on the side whose first coordinate is closer
            let take_left = if left_done {
                false
            } else if right_done {
                true
            } else {
                (q[0] - self.first[left - 1]) <= (self.first[right] - q[0])
            };
            let slot = if take_left { left - 1 } else { right };
            let gap = self.first[slot] - q[0];
            if heap.len() == k && gap * gap > heap.peek().expect("heap is full").dist2 {
                if take_left {
                    left_done = true;
                } else {
                    right_done = true;
                }
                continue;
            }
            let cand = Neighbor { dist2: self.dist2(slot, q), index: self.original[slot], slot };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(cand);
            }
            if take_left {
                left -= 1;
                left_done = left == 0;
            } else {
                right += 1;
                right_done = right == n;
            }
        }
        heap.into_sorted_vec()
    }

    /// Distance from `q` to its `k`-th nearest training point.
    pub fn kth_distance(&self, q: &[f64], k: usize) -> f64 {
        self.knn(q, k).last().map_or(f64::INFINITY, Neighbor::distance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute(x: &Covariates, q: &[f64], k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..x.len())
            .map(|i| (x.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|p| p.1).collect()
    }

    #[test]
    fn ties_break_by_lowest_index() {
        let x = Covariates::from_column(vec![0.6, 0.4, 0.4, 0.6, 0.5]);
        let idx = NeighborIndex::new(&x);
        let got: Vec<usize> = idx.knn(&[0.5], 3).iter().map(|n| n.index).collect();
        assert_eq!(got, vec![4, 0, 1]);
    }

    #[test]
    fn slab_is_closed_window() {
        let x = Covariates::from_column(vec![0.1, 0.2, 0.3, 0.4]);
        let idx = NeighborIndex::new(&x);
        let r = idx.slab(0.25, 0.05);
        assert_eq!(r.len(), 2);
        assert!(idx.slab(0.9, 0.01).is_empty());
    }

    proptest! {
        #[test]
        fn matches_exhaustive_sort(seed in 0u64..1000, n in 1usize..60, d in 1usize..4, k in 1usize..12) {
            let mut r = rng::seeded(seed);
            // coarse grid so that ties actually occur
            let vals: Vec<f64> = (0..n * d).map(|_| (r.random::<f64>() * 8.0).floor() / 8.0).collect();
            let x = Covariates::new(d, vals).unwrap();
            let q: Vec<f64> = (0..d).map(|_| (r.random::<f64>() * 8.0).floor() / 8.0).collect();
            let idx = NeighborIndex::new(&x);
            let got: Vec<usize> = idx.knn(&q, k).iter().map(|n| n.index).collect();
            prop_assert_eq!(got, brute(&x, &q, k));
        }
    }
}
