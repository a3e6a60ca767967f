//! Admissible rotation sets `A = {a : B_ε(I_{K2}) ∩ τ_a(I_{K1}) = ∅}`,
//! ergodicity thresholds and the large-`L` schedule for `(ε₀, K₁, K₂)`.

use std::sync::Arc;

use serde::Serialize;

use crate::arcset::ArcSet;
use crate::circle_map::{MapParams, PsiSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest and largest `L` accepted by [`default_schedule`].
pub const SCHEDULE_RANGE: (f64, f64) = (1e2, 1e8);

/// The admissible set for one `(L, ε, K₁, K₂)`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct ParameterWindow<T> {
    #[serde(rename = "L")]
    pub amplitude: T,
    pub eps0: T,
    #[serde(rename = "K1")]
    pub k1: T,
    #[serde(rename = "K2")]
    pub k2: T,
    #[serde(rename = "arcs")]
    pub set: ArcSet<T>,
    pub measure: T,
    pub component_count: usize,
}

impl<T: Scalar + Serialize> ParameterWindow<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("window serializes")
    }
}

impl<T: Scalar> ParameterWindow<T> {
    pub fn contains(&self, a: T) -> bool {
        self.set.contains(a)
    }
}

/// `A` as the complement of the Minkowski sum `B_ε(I_{K2}) ⊕ (-τ_0(I_{K1}))`,
/// using `τ_a(I_{K1}) = τ_0(I_{K1}) + a`.
pub fn compute_a_set<T: Scalar>(
    psi: Arc<PsiSpec<T>>,
    amplitude: T,
    eps: T,
    k1: T,
    k2: T,
) -> Result<ParameterWindow<T>> {
    if !(k1 >= T::one() && k2 >= T::one()) {
        return Err(Error::InvalidParameter(format!("need K1, K2 >= 1, got {k1}, {k2}")));
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("need eps > 0, got {eps}")));
    }
    let p = MapParams::new(T::zero(), amplitude, psi)?;
    let image = p.image(&p.non_expanding_set(k1)?, T::zero());
    let target = p.non_expanding_set(k2)?.dilate(eps);
    let excluded = target.minkowski_sum(&image.reflect());
    let set = excluded.complement();
    if set.is_empty() {
        return Err(Error::EmptyAtlas);
    }
    Ok(ParameterWindow {
        amplitude,
        eps0: eps,
        k1,
        k2,
        measure: set.measure(),
        component_count: set.component_count(),
        set,
    })
}

/// `ε₀ = L^{-1/2}`, `K₁ = (L / log L)^{1/2}`, `K₂ = L^{1/2} / log L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleSpec<T> {
    pub rule: &'static str,
    #[serde(rename = "L")]
    pub amplitude: T,
    pub eps0: T,
    #[serde(rename = "K1")]
    pub k1: T,
    #[serde(rename = "K2")]
    pub k2: T,
}

pub fn default_schedule<T: Scalar>(amplitude: T) -> Result<ScheduleSpec<T>> {
    let (lo, hi) = SCHEDULE_RANGE;
    let l = amplitude.as_f64();
    if !(lo..=hi).contains(&l) {
        return Err(Error::InvalidParameter(format!(
            "schedule defined for L in [{lo:e}, {hi:e}], got {l}"
        )));
    }
    let log_l = amplitude.ln();
    Ok(ScheduleSpec {
        rule: "eps0=L^-1/2; K1=(L/log L)^1/2; K2=L^1/2/log L",
        amplitude,
        eps0: amplitude.sqrt().recip(),
        k1: (amplitude / log_l).sqrt(),
        k2: amplitude.sqrt() / log_l,
    })
}

/// [`compute_a_set`] with the parameters of [`default_schedule`].
pub fn scheduled_window<T: Scalar>(psi: Arc<PsiSpec<T>>, amplitude: T) -> Result<ParameterWindow<T>> {
    let s = default_schedule(amplitude)?;
    compute_a_set(psi, amplitude, s.eps0, s.k1, s.k2)
}

/// Size of `A` against the structural deficit terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureReport {
    #[serde(rename = "L")]
    pub amplitude: f64,
    pub measure: f64,
    pub deficit: f64,
    pub k1_sq_over_l: f64,
    pub k2_over_l: f64,
    pub two_eps0: f64,
    /// Smallest `c` with `1 - m(A) ≤ c (K₁²/L + K₂/L) + 2ε₀` for this window.
    pub c_hat: f64,
}

pub fn measure_report<T: Scalar>(w: &ParameterWindow<T>) -> MeasureReport {
    let l = w.amplitude.as_f64();
    let (k1, k2) = (w.k1.as_f64(), w.k2.as_f64());
    let measure = w.measure.as_f64();
    let deficit = (1.0 - measure).max(0.0);
    let k1_sq_over_l = k1 * k1 / l;
    let k2_over_l = k2 / l;
    let two_eps0 = 2.0 * w.eps0.as_f64();
    MeasureReport {
        amplitude: l,
        measure,
        deficit,
        k1_sq_over_l,
        k2_over_l,
        two_eps0,
        c_hat: (deficit - two_eps0).max(0.0) / (k1_sq_over_l + k2_over_l),
    }
}

/// `ĉ` over a sweep: the largest per-window value.
pub fn fit_c_hat(reports: &[MeasureReport]) -> f64 {
    reports.iter().map(|r| r.c_hat).fold(0.0, f64::max)
}

/// `(m(I_{N+1})/2, b₂/2)`: kick half-widths above which the stationary
/// measure is unique, for all `L` and for large `L` respectively.
pub fn ergodicity_thresholds<T: Scalar>(psi: Arc<PsiSpec<T>>, amplitude: T) -> Result<(T, T)> {
    let n = psi.critical_count();
    let p = MapParams::new(T::zero(), amplitude, psi)?;
    let half = T::lit(0.5);
    let general = p.non_expanding_set(T::of_usize(n + 1))?.measure() * half;
    let large = p.b_k(T::lit(2.0))? * half;
    Ok((general.min(half), large.min(half)))
}
