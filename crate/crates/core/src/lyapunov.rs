//! Lyapunov exponents of the kicked map: Birkhoff averages along noisy
//! orbits, quadrature against a stationary density, the `∫_{I_1} log|τ'|`
//! integral, and random-sink certificates near a fold.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::arcset::CircleArc;
use crate::circle_map::{MapParams, PsiCoeffs, PsiSpec};
use crate::error::{Error, Result};
use crate::noise::{replica_stream_id, NoiseConfig};
use crate::quadrature::GaussLegendre;
use crate::scalar::{circle_dist, wrap, KahanSum, Scalar};
use crate::transfer::DensityVector;
use crate::trig::invert_monotone;

pub const DEFAULT_N_STEPS: u64 = 1_000_000;
pub const DEFAULT_BURN_IN: u64 = 10_000;
pub const DEFAULT_REPLICAS: u32 = 16;

const QUAD_ORDER: usize = 12;
const GRADED_LEVELS: usize = 80;
const GRADED_RATIO: f64 = 0.35;
const SINK_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    Quadrature,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MonteCarlo => "monte_carlo",
            Method::Quadrature => "quadrature",
        })
    }
}

/// An estimate of `λ_a(L)` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate<T> {
    pub value: T,
    pub method: Method,
    /// Replica standard deviation over `√n_replicas`; NaN for quadrature
    /// and single-replica runs.
    pub std_error: T,
    pub n_steps: u64,
    pub burn_in: u64,
    pub n_replicas: u32,
    pub a: T,
    #[serde(rename = "L")]
    pub amplitude: T,
    pub eps: T,
    pub seed: u64,
    /// Mean of `|ψ'|` under the same measure (orbit samples or density).
    pub mean_abs_dpsi: T,
    /// Steps whose `|τ'|` fell below the log floor.
    pub floored: u64,
    pub replica_values: Vec<T>,
}

impl<T: Scalar> LyapunovEstimate<T> {
    /// Standard error, or zero where none is defined.
    pub fn error_or_zero(&self) -> T {
        if self.std_error.is_finite() {
            self.std_error
        } else {
            T::zero()
        }
    }

    pub const CSV_HEADER: &'static str =
        "a,L,eps,method,value,std_error,n_steps,burn_in,n_replicas,seed";

    /// One CSV row matching [`Self::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.a.as_f64(),
            self.amplitude.as_f64(),
            self.eps.as_f64(),
            self.method,
            self.value.as_f64(),
            self.std_error.as_f64(),
            self.n_steps,
            self.burn_in,
            self.n_replicas,
            self.seed
        )
    }
}

/// Orbit lengths for [`birkhoff_lyapunov`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub n_steps: u64,
    pub burn_in: u64,
    pub n_replicas: u32,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_N_STEPS,
            burn_in: DEFAULT_BURN_IN,
            n_replicas: DEFAULT_REPLICAS,
        }
    }
}

#[inline]
fn floored_log<T: Scalar>(d: T) -> (T, bool) {
    let d = d.abs();
    if d < T::log_floor() {
        (T::log_floor().ln(), true)
    } else {
        (d.ln(), false)
    }
}

struct ReplicaSums {
    log_mean: f64,
    dpsi_mean: f64,
    floored: u64,
}

fn run_replica<T: Scalar>(
    p: &MapParams<T>,
    noise: &NoiseConfig<T>,
    stream_id: u64,
    s: &McSettings,
) -> ReplicaSums {
    let mut kicks = noise.stream(stream_id);
    let mut x = kicks.next_uniform();
    let psi = p.psi();
    let (a, l) = (p.a(), p.amplitude());
    let mut logs = KahanSum::new();
    let mut dpsi = KahanSum::new();
    let mut floored = 0;
    for k in 0..s.burn_in + s.n_steps {
        let (v, d1) = psi.value_and_d1(x);
        if k >= s.burn_in {
            let (lg, hit) = floored_log(T::one() + l * d1);
            logs.add(lg);
            dpsi.add(d1.abs());
            floored += u64::from(hit);
        }
        x = wrap(a + x + l * v + kicks.next_kick());
    }
    let n = s.n_steps.max(1) as f64;
    ReplicaSums {
        log_mean: logs.value::<f64>() / n,
        dpsi_mean: dpsi.value::<f64>() / n,
        floored,
    }
}

/// Birkhoff average of `log|τ_a'|` along kicked orbits, stream task 0.
pub fn birkhoff_lyapunov<T: Scalar>(
    p: &MapParams<T>,
    eps: T,
    seed: u64,
    n_steps: u64,
    burn_in: u64,
    n_replicas: u32,
) -> Result<LyapunovEstimate<T>> {
    let s = McSettings {
        n_steps,
        burn_in,
        n_replicas,
    };
    birkhoff_lyapunov_task(p, eps, seed, 0, &s)
}

/// Birkhoff average with replica streams `replica_stream_id(task, r)`.
///
/// Each replica starts from its own uniform point, discards `burn_in` steps
/// and averages the next `n_steps`. Replicas run in parallel and are reduced
/// in index order, so the result does not depend on the thread count.
pub fn birkhoff_lyapunov_task<T: Scalar>(
    p: &MapParams<T>,
    eps: T,
    seed: u64,
    task: u64,
    s: &McSettings,
) -> Result<LyapunovEstimate<T>> {
    if s.n_steps == 0 || s.n_steps < 10 * s.burn_in {
        return Err(Error::InvalidParameter(format!(
            "need n_steps >= 10 * burn_in > 0, got n_steps={} burn_in={}",
            s.n_steps, s.burn_in
        )));
    }
    if s.n_replicas == 0 || s.n_replicas >= (1 << 20) {
        return Err(Error::InvalidParameter(format!(
            "replica count {} out of range",
            s.n_replicas
        )));
    }
    let noise = NoiseConfig::new(eps, seed)?;
    let sums: Vec<ReplicaSums> = (0..s.n_replicas)
        .into_par_iter()
        .map(|r| run_replica(p, &noise, replica_stream_id(task, r), s))
        .collect();
    let r = f64::from(s.n_replicas);
    let mut tot = KahanSum::new();
    let mut dp = KahanSum::new();
    for x in &sums {
        tot.add(x.log_mean);
        dp.add(x.dpsi_mean);
    }
    let mean = tot.value::<f64>() / r;
    let std_error = if s.n_replicas >= 2 {
        let mut ss = KahanSum::new();
        sums.iter().for_each(|x| ss.add((x.log_mean - mean).powi(2)));
        (ss.value::<f64>() / (r - 1.0)).sqrt() / r.sqrt()
    } else {
        f64::NAN
    };
    Ok(LyapunovEstimate {
        value: T::lit(mean),
        method: Method::MonteCarlo,
        std_error: T::lit(std_error),
        n_steps: s.n_steps,
        burn_in: s.burn_in,
        n_replicas: s.n_replicas,
        a: p.a(),
        amplitude: p.amplitude(),
        eps,
        seed,
        mean_abs_dpsi: T::lit(dp.value::<f64>() / r),
        floored: sums.iter().map(|x| x.floored).sum(),
        replica_values: sums.iter().map(|x| T::lit(x.log_mean)).collect(),
    })
}

/// `∫_u^v log|τ'|` with geometric grading toward an endpoint that sits on or
/// near a fold.
fn log_deriv_piece<T: Scalar>(
    p: &MapParams<T>,
    rule: &GaussLegendre<T>,
    u: T,
    v: T,
    folds: &[T],
) -> T {
    let f = |x: T| floored_log(p.tau_prime(x)).0;
    let width = v - u;
    let gap = |e: T| {
        folds
            .iter()
            .map(|&z| circle_dist(z, e))
            .fold(T::infinity(), T::min)
    };
    let (du, dv) = (gap(u), gap(v));
    let ratio = T::lit(GRADED_RATIO);
    match (du <= width, dv <= width) {
        (true, true) => {
            let mid = u + width / T::lit(2.0);
            rule.integrate_graded(u, mid, GRADED_LEVELS, ratio, f)
                + rule.integrate_graded(v, mid, GRADED_LEVELS, ratio, f)
        }
        (true, false) => rule.integrate_graded(u, v, GRADED_LEVELS, ratio, f),
        (false, true) => rule.integrate_graded(v, u, GRADED_LEVELS, ratio, f),
        (false, false) => rule.integrate(u, v, f),
    }
}

/// `∫ log|τ_a'| dμ` for the piecewise-constant density `d`.
///
/// Cells are split at the folds; pieces touching or close to a fold use a
/// geometrically graded Gauss–Legendre rule that resolves the logarithmic
/// singularity, other pieces a plain 12-point rule.
pub fn quadrature_lyapunov<T: Scalar>(
    p: &MapParams<T>,
    d: &DensityVector<T>,
) -> Result<LyapunovEstimate<T>> {
    let grid = d.grid();
    let folds = p.fold_locations();
    let rule = GaussLegendre::<T>::new(QUAD_ORDER);
    let per_cell: Vec<(T, T)> = (0..grid.n_cells())
        .into_par_iter()
        .map(|j| {
            let (x0, x1) = grid.cell::<T>(j);
            let mut cuts = vec![x0];
            cuts.extend(folds.iter().copied().filter(|&z| z > x0 && z < x1));
            cuts.push(x1);
            let mut lg = T::zero();
            let mut dp = T::zero();
            for w in cuts.windows(2) {
                lg += log_deriv_piece(p, &rule, w[0], w[1], &folds);
                dp += rule.integrate(w[0], w[1], |x| p.psi().d1(x).abs());
            }
            (lg, dp)
        })
        .collect();
    let mut lg = KahanSum::new();
    let mut dp = KahanSum::new();
    for (&r, &(l, m)) in d.values().iter().zip(&per_cell) {
        lg.add(r * l);
        dp.add(r * m);
    }
    let value: T = lg.value();
    Ok(LyapunovEstimate {
        value,
        method: Method::Quadrature,
        std_error: T::nan(),
        n_steps: 0,
        burn_in: 0,
        n_replicas: 0,
        a: p.a(),
        amplitude: p.amplitude(),
        eps: T::nan(),
        seed: 0,
        mean_abs_dpsi: dp.value(),
        floored: 0,
        replica_values: Vec::new(),
    })
}

/// A component of `I_1` split at the fold it contains.
struct HalfComponents<T> {
    halves: Vec<(T, T)>,
    inf_abs_d2: T,
}

fn i1_halves<T: Scalar>(p: &MapParams<T>) -> Result<HalfComponents<T>> {
    let expected = p.psi().critical_count();
    let i1 = p.non_expanding_set(T::one())?;
    let arcs = i1.arcs();
    let folds = p.fold_locations();
    if arcs.len() != expected || expected == 0 {
        return Err(Error::ComponentMerge {
            found: arcs.len(),
            expected,
        });
    }
    let floor = p.psi().nondegeneracy_floor();
    let mut halves = Vec::with_capacity(2 * expected);
    let mut inf = T::infinity();
    for CircleArc { lo, len } in arcs {
        let hi = lo + len;
        let inside: Vec<T> = folds
            .iter()
            .flat_map(|&z| [z, z + T::one()])
            .filter(|&z| z > lo && z < hi)
            .collect();
        if inside.len() != 1 {
            return Err(Error::ComponentMerge {
                found: inside.len(),
                expected: 1,
            });
        }
        // ψ'' must keep one sign across the component.
        let n = 256;
        let mut sign = None;
        for k in 0..=n {
            let x = lo + len * T::of_usize(k) / T::of_usize(n);
            let c = p.psi().d2(x);
            if c.abs() < floor {
                return Err(Error::ComponentMerge {
                    found: 0,
                    expected: 1,
                });
            }
            let s = c > T::zero();
            if *sign.get_or_insert(s) != s {
                return Err(Error::ComponentMerge {
                    found: 2,
                    expected: 1,
                });
            }
            inf = inf.min(c.abs());
        }
        halves.push((lo, inside[0]));
        halves.push((inside[0], hi));
    }
    Ok(HalfComponents {
        halves,
        inf_abs_d2: inf,
    })
}

/// `∫_{I_1} log|τ_a'| dm`, by the substitution `t = |τ_a'|` on each of the
/// `2N` half-components where `|τ_a'|` runs monotonically over `(0, 1)`.
pub fn log_integral_i1<T: Scalar>(p: &MapParams<T>) -> Result<T> {
    let hc = i1_halves(p)?;
    let rule = GaussLegendre::<T>::new(QUAD_ORDER);
    let l = p.amplitude();
    let tol = T::root_tol() * T::lit(1e-3);
    let mut acc = KahanSum::new();
    for &(u, v) in &hc.halves {
        let g = |x: T| p.tau_prime(x).abs();
        // dx/dt = 1 / |τ''(x(t))| with x(t) the inverse of |τ'| on [u, v].
        let integrand = |t: T| {
            let x = invert_monotone(&g, u, v, t, tol);
            t.ln() / (l * p.psi().d2(x)).abs()
        };
        let hi_t = g(u).max(g(v)).min(T::one());
        acc.add(rule.integrate_graded(T::zero(), hi_t, GRADED_LEVELS, T::lit(GRADED_RATIO), integrand));
    }
    Ok(acc.value())
}

/// `2N / (L inf_{I_1}|ψ''|)`, the magnitude bound for [`log_integral_i1`].
pub fn log_integral_i1_bound<T: Scalar>(p: &MapParams<T>) -> Result<T> {
    let hc = i1_halves(p)?;
    let n = T::of_usize(hc.halves.len());
    Ok(n / (p.amplitude() * hc.inf_abs_d2))
}

/// Trap around a fold: for `|a - a_z| ≤ ν/3` and kicks in `[-ε, ε]`, the
/// map sends `B_ν(z)` into itself with `|τ_a'| ≤ 1/2` there.
#[derive(Debug, Clone, Serialize)]
pub struct SinkCertificate<T> {
    pub fold_index: usize,
    pub z: T,
    pub a_z: T,
    pub nu: T,
    pub eps: T,
    /// `sup|ψ''|`.
    #[serde(rename = "M")]
    pub m: T,
    #[serde(rename = "L")]
    pub amplitude: T,
    /// Upper bound for `sup_{B_ν(z)} |τ'|`.
    pub contraction: T,
    /// `(ε + ν/3 + (L/2) M ν²) / ν`.
    pub trap_margin: T,
    pub psi: PsiCoeffs,
    #[serde(skip)]
    psi_spec: Arc<PsiSpec<T>>,
}

impl<T: Scalar> SinkCertificate<T> {
    /// The map at rotation `a`.
    pub fn map(&self, a: T) -> MapParams<T> {
        MapParams::new(a, self.amplitude, Arc::clone(&self.psi_spec))
            .expect("certificate amplitude is positive")
    }

    /// Same trap with a different kick half-width, which may void it.
    pub fn with_eps(&self, eps: T) -> Self {
        let mut c = self.clone();
        c.eps = eps;
        c
    }
}

/// Builds and checks the sink certificate at fold number `fold_index`.
pub fn construct_sink<T: Scalar>(
    psi: Arc<PsiSpec<T>>,
    amplitude: T,
    fold_index: usize,
) -> Result<SinkCertificate<T>> {
    let p = MapParams::new(T::zero(), amplitude, Arc::clone(&psi))?;
    let folds = p.folds()?;
    let z = *folds.get(fold_index).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "fold index {fold_index} but the map has {} folds",
            folds.len()
        ))
    })?;
    let l = amplitude;
    let m = psi.sup_abs_d2();
    let two = T::lit(2.0);
    let nu = T::one() / (two * m * l);
    let eps = nu / T::lit(3.0);
    let a_z = wrap(-l * psi.value(z));
    let trap_margin = (eps + nu / T::lit(3.0) + l / two * m * nu * nu) / nu;
    if !(trap_margin <= T::one()) {
        return Err(Error::TrapViolation(format!("trapping margin {trap_margin} > 1")));
    }
    let h = two * nu / T::of_usize(SINK_SAMPLES);
    let mut sampled = T::zero();
    for k in 0..=SINK_SAMPLES {
        let x = z - nu + h * T::of_usize(k);
        sampled = sampled.max(p.tau_prime(x).abs());
    }
    let contraction = sampled + h * h / T::lit(8.0) * l * psi.d3_bound();
    if !(contraction <= T::lit(0.5)) {
        return Err(Error::TrapViolation(format!(
            "sup |tau'| on the trap is {contraction} > 1/2"
        )));
    }
    Ok(SinkCertificate {
        fold_index,
        z,
        a_z,
        nu,
        eps,
        m,
        amplitude,
        contraction,
        trap_margin,
        psi: psi.to_coeffs(),
        psi_spec: psi,
    })
}

/// Runs one kicked orbit from a random point of `B_ν(z)/2` at rotation `a`
/// and returns its Birkhoff average, failing if the orbit leaves `B_ν(z)`.
pub fn verify_sink<T: Scalar>(
    cert: &SinkCertificate<T>,
    a: T,
    seed: u64,
    n_steps: u64,
) -> Result<LyapunovEstimate<T>> {
    verify_sink_task(cert, a, seed, 0, n_steps)
}

/// As [`verify_sink`] on stream `task`.
pub fn verify_sink_task<T: Scalar>(
    cert: &SinkCertificate<T>,
    a: T,
    seed: u64,
    task: u64,
    n_steps: u64,
) -> Result<LyapunovEstimate<T>> {
    let slack = T::lit(1e-12);
    if circle_dist(a, cert.a_z) > cert.nu / T::lit(3.0) + slack {
        return Err(Error::InvalidParameter(format!(
            "rotation {a} is farther than nu/3 from a_z = {}",
            cert.a_z
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be positive".into()));
    }
    let p = cert.map(a);
    let noise = NoiseConfig::new(cert.eps.min(T::lit(0.5)), seed)?;
    let mut kicks = noise.stream(replica_stream_id(task, 0));
    let u = kicks.next_uniform();
    let mut x = wrap(cert.z + (u - T::lit(0.5)) * cert.nu);
    let mut logs = KahanSum::new();
    let mut dpsi = KahanSum::new();
    let mut floored = 0u64;
    for step in 1..=n_steps {
        let (lg, hit) = floored_log(p.tau_prime(x));
        logs.add(lg);
        dpsi.add(p.psi().d1(x).abs());
        floored += u64::from(hit);
        x = wrap(p.lift(x) + kicks.next_kick());
        if circle_dist(x, cert.z) > cert.nu {
            return Err(Error::TrapEscape { step });
        }
    }
    let n = n_steps as f64;
    Ok(LyapunovEstimate {
        value: T::lit(logs.value::<f64>() / n),
        method: Method::MonteCarlo,
        std_error: T::nan(),
        n_steps,
        burn_in: 0,
        n_replicas: 1,
        a: p.a(),
        amplitude: p.amplitude(),
        eps: cert.eps,
        seed,
        mean_abs_dpsi: T::lit(dpsi.value::<f64>() / n),
        floored,
        replica_values: vec![T::lit(logs.value::<f64>() / n)],
    })
}

/// Outcome of [`jensen_upper_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenReport {
    pub value: f64,
    /// `log(1 + L·mean|ψ'|)`.
    pub mean_bound: f64,
    /// `log(1 + L·sup|ψ'|)`.
    pub sup_bound: f64,
    pub collar: f64,
    pub pass: bool,
}

/// Checks `λ ≤ log(1 + L·mean|ψ'|)` and `λ ≤ log(1 + L·sup|ψ'|)`, each with a
/// collar of three standard errors.
pub fn jensen_upper_check<T: Scalar>(est: &LyapunovEstimate<T>, p: &MapParams<T>) -> JensenReport {
    let l = p.amplitude().as_f64();
    let value = est.value.as_f64();
    let collar = 3.0 * est.error_or_zero().as_f64();
    let mean_bound = (l * est.mean_abs_dpsi.as_f64()).ln_1p();
    let sup_bound = (l * p.psi().sup_abs_d1().as_f64()).ln_1p();
    let tiny = 1e-12 * (1.0 + value.abs());
    JensenReport {
        value,
        mean_bound,
        sup_bound,
        collar,
        pass: value <= mean_bound + collar + tiny && value <= sup_bound + collar + tiny,
    }
}
