//! The map family `τ_a(x) = a + x + L·ψ(x) mod 1` and its geometry.
//!
//! `ψ` is a finite trigonometric polynomial ([`PsiSpec`]). Everything that
//! needs roots (critical points of `ψ`, folds of `τ_a`, the non-expanding sets
//! `I_K`, branch inverses) works on the monotone pieces of `ψ'`, so the cost
//! of a root does not grow with `L`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arcset::{ArcSet, CircleArc};
use crate::error::{Error, Result};
use crate::scalar::{wrap, Scalar};
use crate::trig::{band_on_pieces, crossings_on_pieces, invert_monotone, TrigPoly};

/// A nondegenerate critical point `c` of `ψ` (`ψ'(c) = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint<T> {
    pub location: T,
    pub second_derivative: T,
}

/// JSON form of a profile: `{"cos": [...], "sin": [...]}`, entry `k-1` being
/// the coefficient of `cos(2πkx)` / `sin(2πkx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PsiCoeffs {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl PsiCoeffs {
    /// `ψ(x) = sin(2πx) / 2π`.
    pub fn sine() -> Self {
        Self {
            cos: vec![],
            sin: vec![1.0 / std::f64::consts::TAU],
        }
    }
}

/// The forcing profile `ψ` with cached derivatives and critical structure.
#[derive(Debug, Clone)]
pub struct PsiSpec<T> {
    psi: TrigPoly<T>,
    d1: TrigPoly<T>,
    d2: TrigPoly<T>,
    d3: TrigPoly<T>,
    /// Monotone pieces of `ψ'` (split at zeros of `ψ''`).
    d1_pieces: Vec<(T, T)>,
    critical: Vec<CriticalPoint<T>>,
    sup_d2: T,
    min_d1: T,
    max_d1: T,
}

impl<T: Scalar> PsiSpec<T> {
    pub fn new(cos: Vec<T>, sin: Vec<T>) -> Result<Self> {
        Self::with_root_tol(cos, sin, T::root_tol())
    }

    pub fn with_root_tol(cos: Vec<T>, sin: Vec<T>, root_tol: T) -> Result<Self> {
        if cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite psi coefficient".into()));
        }
        let psi = TrigPoly::new(cos, sin);
        let d1 = psi.derivative();
        let d2 = d1.derivative();
        let d3 = d2.derivative();
        let d1_pieces = d1.monotone_pieces(root_tol)?;
        let d2_breaks = d2.roots(d2.scan_points(), root_tol)?;
        let d3_breaks = d3.roots(d3.scan_points(), root_tol)?;
        let sup_d2 = d3_breaks
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(d2.eval(x).abs()));
        let (mut min_d1, mut max_d1) = (T::zero(), T::zero());
        for &x in &d2_breaks {
            let v = d1.eval(x);
            min_d1 = min_d1.min(v);
            max_d1 = max_d1.max(v);
        }
        let mut out = Self {
            psi,
            d1,
            d2,
            d3,
            d1_pieces,
            critical: Vec::new(),
            sup_d2,
            min_d1,
            max_d1,
        };
        out.critical = out.find_critical_points(root_tol)?;
        Ok(out)
    }

    pub fn from_coeffs(c: &PsiCoeffs) -> Result<Self> {
        Self::new(
            c.cos.iter().map(|&v| T::lit(v)).collect(),
            c.sin.iter().map(|&v| T::lit(v)).collect(),
        )
    }

    pub fn to_coeffs(&self) -> PsiCoeffs {
        PsiCoeffs {
            cos: self.psi.cos_coeffs().iter().map(|v| v.as_f64()).collect(),
            sin: self.psi.sin_coeffs().iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// `ψ(x) = sin(2πx) / 2π`: two critical points, `sup|ψ'| = 1`,
    /// `sup|ψ''| = 2π`.
    pub fn sine() -> Self {
        Self::new(vec![], vec![T::one() / T::two_pi()]).expect("sine profile is nondegenerate")
    }

    /// The zero profile; `τ_a` is then a rigid rotation.
    pub fn zero() -> Self {
        Self::new(vec![], vec![]).expect("zero profile")
    }

    pub fn is_zero(&self) -> bool {
        self.psi.is_zero()
    }

    /// Roots of `ψ'` closer than `nondegeneracy_floor` to a double root are
    /// rejected as [`Error::DegenerateCritical`].
    pub fn find_critical_points(&self, root_tol: T) -> Result<Vec<CriticalPoint<T>>> {
        let floor = self.nondegeneracy_floor();
        let locs = crossings_on_pieces(|x| self.d1.eval(x), &self.d1_pieces, T::zero(), root_tol);
        // ψ' touching zero at a piece boundary without crossing is a double root
        for &(u, _) in &self.d1_pieces {
            let v = self.d1.eval(u);
            if v.abs() <= floor * root_tol.sqrt() && !locs.iter().any(|&c| (c - wrap(u)).abs() <= root_tol) {
                return Err(Error::DegenerateCritical {
                    location: u.as_f64(),
                    curvature: 0.0,
                    floor: floor.as_f64(),
                });
            }
        }
        let mut out = Vec::with_capacity(locs.len());
        for c in locs {
            let curv = self.d2.eval(c);
            if curv.abs() < floor {
                return Err(Error::DegenerateCritical {
                    location: c.as_f64(),
                    curvature: curv.as_f64(),
                    floor: floor.as_f64(),
                });
            }
            out.push(CriticalPoint {
                location: c,
                second_derivative: curv,
            });
        }
        Ok(out)
    }

    pub fn critical_points(&self) -> &[CriticalPoint<T>] {
        &self.critical
    }

    /// Number `N` of critical points.
    pub fn critical_count(&self) -> usize {
        self.critical.len()
    }

    /// `10⁻⁶ · sup|ψ''|`.
    pub fn nondegeneracy_floor(&self) -> T {
        T::lit(1e-6) * self.sup_d2
    }

    #[inline]
    pub fn value(&self, x: T) -> T {
        self.psi.eval(x)
    }

    #[inline]
    pub fn d1(&self, x: T) -> T {
        self.d1.eval(x)
    }

    #[inline]
    pub fn d2(&self, x: T) -> T {
        self.d2.eval(x)
    }

    #[inline]
    pub fn d3(&self, x: T) -> T {
        self.d3.eval(x)
    }

    /// `(ψ(x), ψ'(x))` in one pass.
    #[inline]
    pub fn value_and_d1(&self, x: T) -> (T, T) {
        self.psi.eval_with_derivative(x)
    }

    pub fn sup_abs_d2(&self) -> T {
        self.sup_d2
    }

    /// Rigorous bound on `sup|ψ'''|` from the coefficients.
    pub fn d3_bound(&self) -> T {
        self.d3.coefficient_bound()
    }

    pub fn min_d1(&self) -> T {
        self.min_d1
    }

    pub fn max_d1(&self) -> T {
        self.max_d1
    }

    pub fn sup_abs_d1(&self) -> T {
        self.max_d1.max(-self.min_d1)
    }

    pub fn degree(&self) -> usize {
        self.psi.degree()
    }

    pub(crate) fn d1_pieces(&self) -> &[(T, T)] {
        &self.d1_pieces
    }

    /// `{x : lo ≤ ψ'(x) ≤ hi}`.
    pub fn d1_band(&self, lo: T, hi: T, tol: T) -> ArcSet<T> {
        if self.d1_pieces.is_empty() {
            return if lo <= T::zero() && T::zero() <= hi {
                ArcSet::full()
            } else {
                ArcSet::empty()
            };
        }
        band_on_pieces(|x| self.d1.eval(x), &self.d1_pieces, lo, hi, tol)
    }
}

impl<T: Scalar> Serialize for PsiSpec<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_coeffs().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for PsiSpec<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = PsiCoeffs::deserialize(d)?;
        Self::from_coeffs(&c).map_err(serde::de::Error::custom)
    }
}

/// Parameters `(a, L, ψ)` of one map `τ_a`.
#[derive(Debug, Clone)]
pub struct MapParams<T> {
    a: T,
    amplitude: T,
    psi: Arc<PsiSpec<T>>,
}

impl<T: Scalar> MapParams<T> {
    /// `a` is reduced mod 1; `amplitude` (`L`) must be positive and finite.
    pub fn new(a: T, amplitude: T, psi: Arc<PsiSpec<T>>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidParameter(format!("rotation a = {a}")));
        }
        if !(amplitude > T::zero() && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude L = {amplitude}")));
        }
        Ok(Self {
            a: wrap(a),
            amplitude,
            psi,
        })
    }

    pub fn with_a(&self, a: T) -> Self {
        Self {
            a: wrap(a),
            amplitude: self.amplitude,
            psi: Arc::clone(&self.psi),
        }
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn psi(&self) -> &PsiSpec<T> {
        &self.psi
    }

    pub fn psi_arc(&self) -> &Arc<PsiSpec<T>> {
        &self.psi
    }

    /// Lift `a + x + Lψ(x)` on the real line.
    #[inline]
    pub fn lift(&self, x: T) -> T {
        self.a + x + self.amplitude * self.psi.value(x)
    }

    /// `τ_a(x) ∈ [0, 1)`.
    #[inline]
    pub fn tau(&self, x: T) -> T {
        wrap(self.lift(x))
    }

    /// `τ_a'(x) = 1 + Lψ'(x)`.
    #[inline]
    pub fn tau_prime(&self, x: T) -> T {
        T::one() + self.amplitude * self.psi.d1(x)
    }

    #[inline]
    pub fn tau_second(&self, x: T) -> T {
        self.amplitude * self.psi.d2(x)
    }

    /// `(τ_a(x), τ_a'(x))` in one pass.
    #[inline]
    pub fn tau_and_prime(&self, x: T) -> (T, T) {
        let (v, d) = self.psi.value_and_d1(x);
        (
            wrap(self.a + x + self.amplitude * v),
            T::one() + self.amplitude * d,
        )
    }

    /// `I_K = {x : |τ_a'(x)| ≤ K}` for `K ≥ 1`; independent of `a`.
    pub fn non_expanding_set(&self, k: T) -> Result<ArcSet<T>> {
        if !(k >= T::one()) {
            return Err(Error::InvalidParameter(format!("I_K needs K >= 1, got {k}")));
        }
        let l = self.amplitude;
        Ok(self
            .psi
            .d1_band(-(k + T::one()) / l, (k - T::one()) / l, T::root_tol()))
    }

    /// `b_K`, the length of the largest component of `I_K`.
    pub fn b_k(&self, k: T) -> Result<T> {
        Ok(self.non_expanding_set(k)?.largest_component_length())
    }

    /// Folds of `τ_a` (zeros of `τ_a'`), sorted in `[0, 1)`.
    pub fn folds(&self) -> Result<Vec<T>> {
        let folds = self.fold_locations();
        let floor = self.psi.nondegeneracy_floor();
        for &z in &folds {
            let curv = self.psi.d2(z);
            if curv.abs() < floor {
                return Err(Error::TangentRoot {
                    location: z.as_f64(),
                    curvature: curv.as_f64(),
                });
            }
        }
        Ok(folds)
    }

    /// Fold locations without the tangency check.
    pub(crate) fn fold_locations(&self) -> Vec<T> {
        let level = -T::one() / self.amplitude;
        if level < self.psi.min_d1() {
            return Vec::new();
        }
        crossings_on_pieces(
            |x| self.psi.d1(x),
            self.psi.d1_pieces(),
            level,
            T::root_tol(),
        )
    }

    /// Monotone branches of `τ_a` as lifted intervals `(u, v)`, `u < v ≤ u + 1`.
    pub fn monotone_branches(&self) -> Vec<(T, T)> {
        let folds = self.fold_locations();
        if folds.is_empty() {
            return vec![(T::zero(), T::one())];
        }
        let m = folds.len();
        (0..m)
            .map(|i| {
                let v = if i + 1 < m { folds[i + 1] } else { folds[0] + T::one() };
                (folds[i], v)
            })
            .collect()
    }

    /// `B_r(τ_a(A))`: each arc is split at the folds it contains and the
    /// monotone pieces are mapped by their endpoint values.
    pub fn image(&self, set: &ArcSet<T>, r: T) -> ArcSet<T> {
        if set.is_empty() {
            return ArcSet::empty();
        }
        if set.is_full() {
            return ArcSet::full();
        }
        let folds = self.fold_locations();
        let mut out = Vec::new();
        for arc in set.arcs() {
            let (lo, hi) = (arc.lo, arc.lo + arc.len);
            let mut cuts = vec![lo];
            for shift in [T::zero(), T::one()] {
                for &z in &folds {
                    let zz = z + shift;
                    if zz > lo && zz < hi {
                        cuts.push(zz);
                    }
                }
            }
            cuts.push(hi);
            cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut points"));
            for w in cuts.windows(2) {
                let (y0, y1) = (self.lift(w[0]), self.lift(w[1]));
                let (ylo, yhi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
                out.push(CircleArc {
                    lo: ylo - r,
                    len: (yhi - ylo) + r + r,
                });
            }
        }
        ArcSet::from_arcs(out)
    }

    /// Full preimage `τ_a⁻¹(target)` of a single arc.
    pub fn preimage(&self, target: CircleArc<T>) -> ArcSet<T> {
        if target.len >= T::one() {
            return ArcSet::full();
        }
        let tol = T::root_tol();
        let lift = |x: T| self.lift(x);
        let mut out = Vec::new();
        for (u, v) in self.monotone_branches() {
            let (yu, yv) = (lift(u), lift(v));
            let (ymin, ymax) = if yu <= yv { (yu, yv) } else { (yv, yu) };
            let t0 = target.lo;
            let first = (ymin - t0 - target.len).ceil();
            let last = (ymax - t0).floor();
            let mut k = first;
            while k <= last {
                let s = (t0 + k).max(ymin);
                let e = (t0 + k + target.len).min(ymax);
                if s <= e {
                    let xs = if s <= ymin {
                        if yu <= yv { u } else { v }
                    } else {
                        invert_monotone(&lift, u, v, s, tol)
                    };
                    let xe = if e >= ymax {
                        if yu <= yv { v } else { u }
                    } else {
                        invert_monotone(&lift, u, v, e, tol)
                    };
                    let (a, b) = if xs <= xe { (xs, xe) } else { (xe, xs) };
                    out.push(CircleArc { lo: a, len: b - a });
                }
                k += T::one();
            }
        }
        ArcSet::from_arcs(out)
    }
}
