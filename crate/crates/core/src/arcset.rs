//! Finite unions of closed arcs on the circle `[0, 1)`.
//!
//! An [`ArcSet`] is stored as a sorted list of disjoint linear segments inside
//! `[0, 1]`. An arc passing through `0` is kept as the two pieces `[lo, 1]`
//! and `[0, hi]`; [`ArcSet::arcs`] glues them back together. Arcs and gaps
//! shorter than [`Scalar::min_arc`] are removed whenever a set is normalized,
//! so complements and unions never accumulate slivers.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::{wrap, Scalar};

/// A closed arc `[lo, lo + len]` taken mod 1, with `lo ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleArc<T> {
    pub lo: T,
    pub len: T,
}

impl<T: Scalar> CircleArc<T> {
    pub fn new(lo: T, len: T) -> Self {
        Self { lo: wrap(lo), len }
    }

    /// Far endpoint, reduced mod 1.
    pub fn hi(&self) -> T {
        wrap(self.lo + self.len)
    }

    pub fn center(&self) -> T {
        wrap(self.lo + self.len / T::lit(2.0))
    }

    pub fn contains(&self, x: T) -> bool {
        let off = wrap(x - self.lo);
        off <= self.len || self.len >= T::one()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcSet<T> {
    segs: Vec<(T, T)>,
}

impl<T: Scalar> Default for ArcSet<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Scalar> ArcSet<T> {
    pub fn empty() -> Self {
        Self { segs: Vec::new() }
    }

    pub fn full() -> Self {
        Self {
            segs: vec![(T::zero(), T::one())],
        }
    }

    /// The singleton `{x}`. Degenerate arcs survive only until the next
    /// normalizing operation, but dilation turns them into proper arcs.
    pub fn point(x: T) -> Self {
        let x = wrap(x);
        Self { segs: vec![(x, x)] }
    }

    /// One arc starting at `lo` (any real, reduced mod 1) of length `len`.
    pub fn arc(lo: T, len: T) -> Self {
        Self::from_arcs([CircleArc { lo, len }])
    }

    /// The arc running counter-clockwise from `lo` to `hi`; wraps when `hi < lo`.
    pub fn interval(lo: T, hi: T) -> Self {
        let lo = wrap(lo);
        let hi = wrap(hi);
        let len = if hi >= lo { hi - lo } else { T::one() - lo + hi };
        Self::arc(lo, len)
    }

    /// Closed ball `B_r(x)`.
    pub fn ball(x: T, r: T) -> Self {
        Self::arc(x - r, r + r)
    }

    /// Builds a normalized set from arbitrary (possibly overlapping) arcs.
    pub fn from_arcs<I: IntoIterator<Item = CircleArc<T>>>(arcs: I) -> Self {
        let mut raw = Vec::new();
        for a in arcs {
            if !(a.len >= T::zero()) {
                continue;
            }
            if a.len >= T::one() {
                return Self::full();
            }
            let lo = wrap(a.lo);
            let hi = lo + a.len;
            if hi <= T::one() {
                raw.push((lo, hi));
            } else {
                raw.push((lo, T::one()));
                raw.push((T::zero(), hi - T::one()));
            }
        }
        Self::normalize(raw)
    }

    fn normalize(mut raw: Vec<(T, T)>) -> Self {
        let tol = T::min_arc();
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite arc endpoints"));
        let mut segs: Vec<(T, T)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match segs.last_mut() {
                Some(last) if lo <= last.1 + tol => last.1 = last.1.max(hi),
                _ => segs.push((lo, hi)),
            }
        }
        segs.retain(|&(lo, hi)| hi - lo >= tol);
        if let (Some(&(first_lo, _)), Some(&(_, last_hi))) = (segs.first(), segs.last()) {
            if first_lo + (T::one() - last_hi) < tol {
                segs[0].0 = T::zero();
                let n = segs.len();
                segs[n - 1].1 = T::one();
            }
        }
        if segs.len() == 1 && segs[0].0 <= T::zero() && segs[0].1 >= T::one() {
            return Self::full();
        }
        Self { segs }
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.segs.len() == 1 && self.segs[0].0 <= T::zero() && self.segs[0].1 >= T::one()
    }

    /// Linear storage segments inside `[0, 1]`.
    pub fn segments(&self) -> &[(T, T)] {
        &self.segs
    }

    pub fn measure(&self) -> T {
        self.segs
            .iter()
            .fold(T::zero(), |acc, &(lo, hi)| acc + (hi - lo))
    }

    /// Connected components as circular arcs, sorted by `lo`.
    pub fn arcs(&self) -> Vec<CircleArc<T>> {
        if self.is_full() {
            return vec![CircleArc {
                lo: T::zero(),
                len: T::one(),
            }];
        }
        let mut out: Vec<CircleArc<T>> = self
            .segs
            .iter()
            .map(|&(lo, hi)| CircleArc { lo, len: hi - lo })
            .collect();
        let n = self.segs.len();
        if n >= 2 && self.segs[0].0 <= T::zero() && self.segs[n - 1].1 >= T::one() {
            let head = out.remove(0);
            let tail = out.last_mut().expect("n >= 2");
            tail.len += head.len;
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.arcs().len()
    }

    /// Length of the largest connected component; 0 for the empty set.
    pub fn largest_component_length(&self) -> T {
        self.arcs()
            .iter()
            .fold(T::zero(), |acc, a| acc.max(a.len))
    }

    pub fn contains(&self, x: T) -> bool {
        let x = wrap(x);
        if x <= T::zero() {
            if let Some(&(_, hi)) = self.segs.last() {
                if hi >= T::one() {
                    return true;
                }
            }
        }
        let idx = self.segs.partition_point(|&(lo, _)| lo <= x);
        idx > 0 && x <= self.segs[idx - 1].1
    }

    pub fn complement(&self) -> Self {
        let mut gaps = Vec::with_capacity(self.segs.len() + 1);
        let mut cursor = T::zero();
        for &(lo, hi) in &self.segs {
            if lo > cursor {
                gaps.push((cursor, lo));
            }
            cursor = hi;
        }
        if cursor < T::one() {
            gaps.push((cursor, T::one()));
        }
        Self::normalize(gaps)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut raw = self.segs.clone();
        raw.extend_from_slice(&other.segs);
        Self::normalize(raw)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (a, b) = (&self.segs, &other.segs);
        let (mut i, mut j) = (0, 0);
        let mut raw = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo <= hi {
                raw.push((lo, hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalize(raw)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersection(&other.complement())
    }

    pub fn intersects(&self, other: &Self) -> bool {
        !self.intersection(other).is_empty()
    }

    /// `true` when `self ⊆ other` up to the normalization tolerance.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// Closed `r`-neighbourhood `B_r(self)`.
    pub fn dilate(&self, r: T) -> Self {
        if self.is_empty() || self.is_full() {
            return self.clone();
        }
        Self::from_arcs(self.arcs().into_iter().map(|a| CircleArc {
            lo: a.lo - r,
            len: a.len + r + r,
        }))
    }

    /// Rigid rotation `x ↦ x + shift`.
    pub fn translate(&self, shift: T) -> Self {
        if self.is_full() {
            return self.clone();
        }
        Self::from_arcs(self.arcs().into_iter().map(|a| CircleArc {
            lo: a.lo + shift,
            len: a.len,
        }))
    }

    /// Reflection `x ↦ -x`.
    pub fn reflect(&self) -> Self {
        if self.is_full() {
            return self.clone();
        }
        Self::from_arcs(self.arcs().into_iter().map(|a| CircleArc {
            lo: -(a.lo + a.len),
            len: a.len,
        }))
    }

    /// Minkowski sum `{x + y : x ∈ self, y ∈ other}`.
    pub fn minkowski_sum(&self, other: &Self) -> Self {
        if self.is_empty() || other.is_empty() {
            return Self::empty();
        }
        let lhs = self.arcs();
        let rhs = other.arcs();
        let mut out = Vec::with_capacity(lhs.len() * rhs.len());
        for a in &lhs {
            for b in &rhs {
                out.push(CircleArc {
                    lo: a.lo + b.lo,
                    len: a.len + b.len,
                });
            }
        }
        Self::from_arcs(out)
    }

    /// Point at cumulative measure `u · m(self)`, scanning from 0.
    /// Useful for deterministic sampling; `None` on the empty set.
    pub fn quantile(&self, u: T) -> Option<T> {
        if self.is_empty() {
            return None;
        }
        let target = u.max(T::zero()).min(T::one()) * self.measure();
        let mut acc = T::zero();
        for &(lo, hi) in &self.segs {
            let len = hi - lo;
            if acc + len >= target {
                return Some(wrap(lo + (target - acc)));
            }
            acc += len;
        }
        self.segs.last().map(|&(_, hi)| wrap(hi))
    }

    /// Prefix-sum index for repeated `m(self ∩ [s, t])` queries.
    pub fn cumulative(&self) -> CumulativeMeasure<T> {
        let mut prefix = Vec::with_capacity(self.segs.len() + 1);
        let mut acc = T::zero();
        prefix.push(acc);
        for &(lo, hi) in &self.segs {
            acc += hi - lo;
            prefix.push(acc);
        }
        CumulativeMeasure {
            segs: self.segs.clone(),
            prefix,
            total: acc,
        }
    }
}

/// `F(t) = m(A ∩ [0, t])`, extended to all reals by `F(t + 1) = F(t) + m(A)`.
#[derive(Debug, Clone)]
pub struct CumulativeMeasure<T> {
    segs: Vec<(T, T)>,
    prefix: Vec<T>,
    total: T,
}

impl<T: Scalar> CumulativeMeasure<T> {
    pub fn total(&self) -> T {
        self.total
    }

    pub fn at(&self, t: T) -> T {
        let k = t.floor();
        let f = t - k;
        let idx = self.segs.partition_point(|&(lo, _)| lo <= f);
        let within = if idx == 0 {
            T::zero()
        } else {
            let (lo, hi) = self.segs[idx - 1];
            self.prefix[idx - 1] + (f.min(hi) - lo)
        };
        k * self.total + within
    }

    /// `m(A ∩ [s, t])` for `s ≤ t` on the lifted line.
    pub fn between(&self, s: T, t: T) -> T {
        (self.at(t) - self.at(s)).max(T::zero())
    }
}

impl<T: Scalar> Serialize for ArcSet<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = if self.is_full() {
            vec![[0.0, 1.0]]
        } else {
            self.arcs()
                .iter()
                .map(|a| [a.lo.as_f64(), a.hi().as_f64()])
                .collect()
        };
        pairs.serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ArcSet<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        let mut arcs = Vec::with_capacity(pairs.len());
        for [lo, hi] in pairs {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(serde::de::Error::custom("non-finite arc endpoint"));
            }
            if lo == 0.0 && hi == 1.0 {
                return Ok(Self::full());
            }
            let len = if hi >= lo { hi - lo } else { 1.0 - lo + hi };
            arcs.push(CircleArc::new(T::lit(lo), T::lit(len)));
        }
        Ok(Self::from_arcs(arcs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrapping_arc_is_one_component() {
        let s = ArcSet::<f64>::interval(0.9, 0.1);
        assert_eq!(s.segments().len(), 2);
        assert_eq!(s.component_count(), 1);
        assert_abs_diff_eq!(s.measure(), 0.2, epsilon = 1e-15);
        assert!(s.contains(0.0));
        assert!(s.contains(0.95));
        assert!(!s.contains(0.5));
        let a = s.arcs()[0];
        assert_abs_diff_eq!(a.lo, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(a.len, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn complement_of_empty_and_full() {
        assert!(ArcSet::<f64>::empty().complement().is_full());
        assert!(ArcSet::<f64>::full().complement().is_empty());
    }

    #[test]
    fn overlapping_arcs_merge() {
        let s = ArcSet::<f64>::from_arcs([
            CircleArc::new(0.1, 0.2),
            CircleArc::new(0.25, 0.1),
            CircleArc::new(0.6, 0.0),
        ]);
        assert_eq!(s.component_count(), 1);
        assert_abs_diff_eq!(s.measure(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn dilating_a_point_gives_a_ball() {
        let s = ArcSet::<f64>::point(0.01).dilate(0.05);
        assert_abs_diff_eq!(s.measure(), 0.1, epsilon = 1e-15);
        assert!(s.contains(0.98));
        assert_eq!(s.component_count(), 1);
    }

    #[test]
    fn dilation_saturates_to_full() {
        let s = ArcSet::<f64>::interval(0.0, 0.3).union(&ArcSet::interval(0.5, 0.8));
        assert!(s.dilate(0.11).is_full());
    }

    #[test]
    fn minkowski_of_two_arcs() {
        let a = ArcSet::<f64>::arc(0.1, 0.1);
        let b = ArcSet::<f64>::arc(0.85, 0.05);
        let s = a.minkowski_sum(&b);
        assert_abs_diff_eq!(s.measure(), 0.15, epsilon = 1e-15);
        assert!(s.contains(0.97) && s.contains(0.1) && !s.contains(0.11));
    }

    #[test]
    fn reflection_and_translation() {
        let a = ArcSet::<f64>::arc(0.1, 0.2);
        let r = a.reflect();
        assert!(r.contains(0.75) && r.contains(0.85) && !r.contains(0.5));
        let t = a.translate(0.85);
        assert!(t.contains(0.0) && t.contains(0.1) && !t.contains(0.2));
    }

    #[test]
    fn quantile_walks_the_measure() {
        let s = ArcSet::<f64>::arc(0.1, 0.1).union(&ArcSet::arc(0.5, 0.3));
        assert_abs_diff_eq!(s.quantile(0.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.quantile(0.5).unwrap(), 0.6, epsilon = 1e-15);
        assert!(ArcSet::<f64>::empty().quantile(0.3).is_none());
    }

    #[test]
    fn cumulative_measure_is_periodic() {
        let s = ArcSet::<f64>::interval(0.9, 0.1);
        let c = s.cumulative();
        assert_abs_diff_eq!(c.between(-0.05, 0.05), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.between(0.85, 1.2), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.between(0.2, 0.8), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let s = ArcSet::<f64>::interval(0.9, 0.1).union(&ArcSet::arc(0.3, 0.25));
        let txt = serde_json::to_string(&s).unwrap();
        let raw: Vec<[f64; 2]> = serde_json::from_str(&txt).unwrap();
        assert_eq!(raw.len(), 2);
        assert!(raw[1][0] > raw[1][1], "wrapping arc serialized with lo > hi");
        let back: ArcSet<f64> = serde_json::from_str(&txt).unwrap();
        assert_abs_diff_eq!(back.measure(), s.measure(), epsilon = 1e-14);
        let full: ArcSet<f64> = serde_json::from_str("[[0,1]]").unwrap();
        assert!(full.is_full());
    }

    #[test]
    fn slivers_are_dropped() {
        let s = ArcSet::<f64>::arc(0.4, 1e-16);
        assert!(s.is_empty());
        let gap = ArcSet::<f64>::interval(0.1, 0.3).union(&ArcSet::interval(0.3 + 1e-16, 0.5));
        assert_eq!(gap.component_count(), 1);
    }
}
