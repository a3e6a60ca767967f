//! Finite trigonometric polynomials on the circle and their level sets.

use crate::arcset::{ArcSet, CircleArc};
use crate::error::{Error, Result};
use crate::scalar::{wrap, Scalar};

/// `f(x) = Σ_k cos_k·cos(2πkx) + sin_k·sin(2πkx)`, `k = 1..=degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly<T> {
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Scalar> TrigPoly<T> {
    pub fn new(mut cos: Vec<T>, mut sin: Vec<T>) -> Self {
        let degree = cos.len().max(sin.len());
        cos.resize(degree, T::zero());
        sin.resize(degree, T::zero());
        Self { cos, sin }
    }

    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    pub fn cos_coeffs(&self) -> &[T] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[T] {
        &self.sin
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|c| c.is_zero())
    }

    pub fn derivative(&self) -> Self {
        let tau = T::two_pi();
        let mut cos = Vec::with_capacity(self.degree());
        let mut sin = Vec::with_capacity(self.degree());
        for k in 0..self.degree() {
            let w = tau * T::of_usize(k + 1);
            cos.push(w * self.sin[k]);
            sin.push(-w * self.cos[k]);
        }
        Self { cos, sin }
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        if self.degree() == 1 {
            let (s, c) = (T::two_pi() * x).sin_cos();
            return self.cos[0] * c + self.sin[0] * s;
        }
        let (s1, c1) = (T::two_pi() * x).sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = T::zero();
        for k in 0..self.degree() {
            acc += self.cos[k] * c + self.sin[k] * s;
            let next_c = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = next_c;
        }
        acc
    }

    /// `(f(x), f'(x))` from one pass of the angle recurrence.
    #[inline]
    pub fn eval_with_derivative(&self, x: T) -> (T, T) {
        let tau = T::two_pi();
        let (s1, c1) = (tau * x).sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut f = T::zero();
        let mut df = T::zero();
        for k in 0..self.degree() {
            let w = tau * T::of_usize(k + 1);
            f += self.cos[k] * c + self.sin[k] * s;
            df += w * (self.sin[k] * c - self.cos[k] * s);
            let next_c = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = next_c;
        }
        (f, df)
    }

    /// `Σ |cos_k| + |sin_k|`, a rigorous bound on `sup |f|`.
    pub fn coefficient_bound(&self) -> T {
        self.cos
            .iter()
            .chain(&self.sin)
            .fold(T::zero(), |acc, c| acc + c.abs())
    }

    /// Default scan resolution for this polynomial.
    pub fn scan_points(&self) -> usize {
        4096.max(64 * self.degree())
    }

    /// All zeros in `[0, 1)`, sorted, by sign-change scan on `grid` points
    /// followed by bisection to `tol`.
    ///
    /// A grid interval without a sign change whose endpoint values are
    /// within reach of zero while `f'` changes sign there may hide a pair
    /// of roots; that case is reported as [`Error::ScanTooCoarse`].
    pub fn roots(&self, grid: usize, tol: T) -> Result<Vec<T>> {
        if self.is_zero() {
            return Ok(Vec::new());
        }
        let deriv = self.derivative();
        let slope_bound = deriv.coefficient_bound();
        let n = grid.max(8);
        let h = T::one() / T::of_usize(n);
        let xs: Vec<T> = (0..=n).map(|i| T::of_usize(i) * h).collect();
        let fs: Vec<T> = xs.iter().map(|&x| self.eval(x)).collect();
        let mut roots = Vec::new();
        for i in 0..n {
            let (fa, fb) = (fs[i], fs[i + 1]);
            if fa.is_zero() {
                roots.push(xs[i]);
                continue;
            }
            if fb.is_zero() {
                continue;
            }
            if (fa < T::zero()) != (fb < T::zero()) {
                roots.push(bisect(|x| self.eval(x), xs[i], xs[i + 1], tol));
                continue;
            }
            let reach = slope_bound * h;
            if fa.abs() < reach && fb.abs() < reach {
                let (da, db) = (deriv.eval(xs[i]), deriv.eval(xs[i + 1]));
                if (da < T::zero()) != (db < T::zero()) {
                    let xm = bisect(|x| deriv.eval(x), xs[i], xs[i + 1], tol);
                    let fm = self.eval(xm);
                    if fm.is_zero() || (fm < T::zero()) != (fa < T::zero()) {
                        return Err(Error::ScanTooCoarse { near: xm.as_f64() });
                    }
                }
            }
        }
        let mut out: Vec<T> = roots.into_iter().map(wrap).collect();
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
        out.dedup_by(|a, b| (*a - *b).abs() <= tol);
        if out.len() >= 2 && (out[0] + T::one() - out[out.len() - 1]) <= tol {
            out.pop();
        }
        Ok(out)
    }

    /// Breakpoints splitting the circle into pieces on which `f` is monotone
    /// (the zeros of `f'`), sorted in `[0, 1)`.
    pub fn monotone_breaks(&self, tol: T) -> Result<Vec<T>> {
        let d = self.derivative();
        d.roots(d.scan_points(), tol)
    }

    /// Monotone pieces `(u, v)` with `u < v ≤ u + 1` on the lifted line.
    /// Empty when `f` is constant.
    pub fn monotone_pieces(&self, tol: T) -> Result<Vec<(T, T)>> {
        let breaks = self.monotone_breaks(tol)?;
        let m = breaks.len();
        Ok((0..m)
            .map(|i| {
                let u = breaks[i];
                let v = if i + 1 < m {
                    breaks[i + 1]
                } else {
                    breaks[0] + T::one()
                };
                (u, v)
            })
            .collect())
    }

    /// The closed sublevel band `{x : lo ≤ f(x) ≤ hi}`.
    pub fn band(&self, lo: T, hi: T, tol: T) -> Result<ArcSet<T>> {
        let pieces = self.monotone_pieces(tol)?;
        if pieces.is_empty() {
            let c = self.eval(T::zero());
            return Ok(if lo <= c && c <= hi {
                ArcSet::full()
            } else {
                ArcSet::empty()
            });
        }
        Ok(band_on_pieces(|x| self.eval(x), &pieces, lo, hi, tol))
    }

    /// All solutions of `f(x) = level` in `[0, 1)`, sorted.
    pub fn level_crossings(&self, level: T, tol: T) -> Result<Vec<T>> {
        let pieces = self.monotone_pieces(tol)?;
        Ok(crossings_on_pieces(|x| self.eval(x), &pieces, level, tol))
    }
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub(crate) fn bisect<T: Scalar, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, tol: T) -> T {
    let mut fa = f(a);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = a + (b - a) / T::lit(2.0);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm.is_zero() {
            return m;
        }
        if (fm < T::zero()) == (fa < T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    a + (b - a) / T::lit(2.0)
}

/// Solves `f(x) = level` on a monotone piece `[u, v]` whose endpoint values
/// bracket `level`.
pub(crate) fn invert_monotone<T: Scalar, F: Fn(T) -> T>(f: &F, u: T, v: T, level: T, tol: T) -> T {
    bisect(|x| f(x) - level, u, v, tol)
}

pub(crate) fn band_on_pieces<T: Scalar, F: Fn(T) -> T>(
    f: F,
    pieces: &[(T, T)],
    lo: T,
    hi: T,
    tol: T,
) -> ArcSet<T> {
    let mut arcs = Vec::new();
    for &(u, v) in pieces {
        let (fu, fv) = (f(u), f(v));
        let (x_at_min, x_at_max, fmin, fmax) = if fu <= fv {
            (u, v, fu, fv)
        } else {
            (v, u, fv, fu)
        };
        if fmax < lo || fmin > hi {
            continue;
        }
        let enter = if fmin >= lo {
            x_at_min
        } else {
            invert_monotone(&f, u, v, lo, tol)
        };
        let exit = if fmax <= hi {
            x_at_max
        } else {
            invert_monotone(&f, u, v, hi, tol)
        };
        let (s, e) = if enter <= exit { (enter, exit) } else { (exit, enter) };
        arcs.push(CircleArc::new(s, e - s));
    }
    ArcSet::from_arcs(arcs)
}

pub(crate) fn crossings_on_pieces<T: Scalar, F: Fn(T) -> T>(
    f: F,
    pieces: &[(T, T)],
    level: T,
    tol: T,
) -> Vec<T> {
    let mut out = Vec::new();
    for &(u, v) in pieces {
        let (fu, fv) = (f(u), f(v));
        if fu == level {
            out.push(wrap(u));
            continue;
        }
        if (fu - level) * (fv - level) < T::zero() {
            out.push(wrap(invert_monotone(&f, u, v, level, tol)));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
    out.dedup_by(|a, b| (*a - *b).abs() <= tol);
    out
}
