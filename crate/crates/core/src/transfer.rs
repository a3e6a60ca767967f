//! Ulam discretization of the kicked transfer operator, stationary densities
//! and the interval-growth cover check.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcset::{ArcSet, CircleArc};
use crate::circle_map::{MapParams, PsiCoeffs};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::{KahanSum, Scalar};

/// Smallest `ε·n` accepted by [`build_ulam`].
pub const MIN_KERNEL_CELLS: f64 = 4.0;
/// Collar constant `c` in the sup-bound check `(1 + c/(nε)) / (2ε)`.
pub const DENSITY_COLLAR: f64 = 2.0;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_QUAD_ORDER: usize = 8;

/// Uniform partition of the circle into `n` cells `[j/n, (j+1)/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 cells, got {n_cells}"
            )));
        }
        if n_cells > u32::MAX as usize {
            return Err(Error::InvalidParameter("grid too large".into()));
        }
        Ok(Self { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cell<T: Scalar>(&self, j: usize) -> (T, T) {
        let n = T::of_usize(self.n_cells);
        (T::of_usize(j) / n, T::of_usize(j + 1) / n)
    }

    pub fn midpoint<T: Scalar>(&self, j: usize) -> T {
        (T::of_usize(j) + T::lit(0.5)) / T::of_usize(self.n_cells)
    }

    /// Index of the cell containing `x` (taken mod 1).
    pub fn locate<T: Scalar>(&self, x: T) -> usize {
        let x = crate::scalar::wrap(x);
        let j = (x * T::of_usize(self.n_cells)).floor().to_usize().unwrap_or(0);
        j.min(self.n_cells - 1)
    }
}

#[derive(Debug, Clone)]
enum Storage<T> {
    /// Every entry equals `1/n`.
    Uniform,
    Csr {
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<T>,
    },
}

/// Map parameters recorded alongside a built matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub a: f64,
    #[serde(rename = "L")]
    pub amplitude: f64,
    pub psi: PsiCoeffs,
    pub eps: f64,
    pub quad_order: usize,
}

/// Row-stochastic Ulam matrix `P[i][j] ≈ n ∫_{C_i} p(x, C_j) dx`.
#[derive(Debug, Clone)]
pub struct UlamMatrix<T> {
    grid: Grid,
    storage: Storage<T>,
    meta: KernelMeta,
}

impl<T: Scalar> UlamMatrix<T> {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n_cells
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.storage, Storage::Uniform)
    }

    /// Number of stored entries (`n²` for the uniform kernel).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Uniform => self.n() * self.n(),
            Storage::Csr { vals, .. } => vals.len(),
        }
    }

    /// Row `i` as `(column, value)` pairs in increasing column order.
    pub fn row(&self, i: usize) -> Vec<(usize, T)> {
        let n = self.n();
        match &self.storage {
            Storage::Uniform => {
                let v = T::one() / T::of_usize(n);
                (0..n).map(|j| (j, v)).collect()
            }
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => (row_ptr[i]..row_ptr[i + 1])
                .map(|k| (cols[k] as usize, vals[k]))
                .collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match &self.storage {
            Storage::Uniform => T::one() / T::of_usize(self.n()),
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => {
                let r = &cols[row_ptr[i]..row_ptr[i + 1]];
                match r.binary_search(&(j as u32)) {
                    Ok(k) => vals[row_ptr[i] + k],
                    Err(_) => T::zero(),
                }
            }
        }
    }

    pub fn row_sum(&self, i: usize) -> T {
        match &self.storage {
            Storage::Uniform => T::one(),
            Storage::Csr {
                row_ptr, vals, ..
            } => {
                let mut s = KahanSum::new();
                vals[row_ptr[i]..row_ptr[i + 1]].iter().for_each(|&v| s.add(v));
                s.value()
            }
        }
    }

    /// Largest `|row_sum - 1|` over all rows.
    pub fn max_row_defect(&self) -> T {
        (0..self.n())
            .map(|i| (self.row_sum(i) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    pub fn min_entry(&self) -> T {
        match &self.storage {
            Storage::Uniform => T::one() / T::of_usize(self.n()),
            Storage::Csr { vals, .. } => vals.iter().copied().fold(T::infinity(), T::min),
        }
    }

    pub fn max_row_nnz(&self) -> usize {
        match &self.storage {
            Storage::Uniform => self.n(),
            Storage::Csr { row_ptr, .. } => {
                row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
            }
        }
    }

    /// `q ↦ qP` for a row vector `q` of cell masses.
    pub fn left_apply(&self, q: &[T], out: &mut [T]) {
        let n = self.n();
        debug_assert_eq!(q.len(), n);
        match &self.storage {
            Storage::Uniform => {
                let mut s = KahanSum::new();
                q.iter().for_each(|&v| s.add(v));
                let v = s.value::<T>() / T::of_usize(n);
                out.iter_mut().for_each(|o| *o = v);
            }
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => {
                out.iter_mut().for_each(|o| *o = T::zero());
                for i in 0..n {
                    let qi = q[i];
                    if qi == T::zero() {
                        continue;
                    }
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        out[cols[k] as usize] += qi * vals[k];
                    }
                }
            }
        }
    }

    /// Writes the matrix as CSR arrays to `bin` and a JSON header to `sidecar`.
    ///
    /// Binary layout, little endian: `n: u64`, `nnz: u64`, `row_ptr: [u64; n+1]`,
    /// `cols: [u32; nnz]`, `vals: [f64; nnz]`. The uniform kernel is written with
    /// `nnz = 0` and `"storage": "uniform"` in the header.
    pub fn export(&self, bin: &Path, sidecar: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(bin)?);
        let n = self.n() as u64;
        w.write_all(&n.to_le_bytes())?;
        match &self.storage {
            Storage::Uniform => {
                w.write_all(&0u64.to_le_bytes())?;
            }
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => {
                w.write_all(&(vals.len() as u64).to_le_bytes())?;
                for &r in row_ptr {
                    w.write_all(&(r as u64).to_le_bytes())?;
                }
                for &c in cols {
                    w.write_all(&c.to_le_bytes())?;
                }
                for &v in vals {
                    w.write_all(&v.as_f64().to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        let header = MatrixHeader {
            format: "csr-le-v1".into(),
            storage: if self.is_uniform() { "uniform" } else { "csr" }.into(),
            n: self.n(),
            nnz: match &self.storage {
                Storage::Uniform => 0,
                Storage::Csr { vals, .. } => vals.len(),
            },
            meta: self.meta.clone(),
        };
        let f = BufWriter::new(File::create(sidecar)?);
        serde_json::to_writer_pretty(f, &header).map_err(|e| Error::Io(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub format: String,
    pub storage: String,
    pub n: usize,
    pub nnz: usize,
    #[serde(flatten)]
    pub meta: KernelMeta,
}

/// Per-thread row accumulator: a circular difference array plus the range of
/// lifted cell indices touched so far.
struct RowScratch<T> {
    diff: Vec<T>,
    lo: i64,
    hi: i64,
}

impl<T: Scalar> RowScratch<T> {
    fn new(n: usize) -> Self {
        Self {
            diff: vec![T::zero(); n + 1],
            lo: i64::MAX,
            hi: i64::MIN,
        }
    }

    /// Adds `v` to every cell of the lifted index range `[s, e)`.
    fn add_range(&mut self, s: i64, e: i64, v: T) {
        if s >= e {
            return;
        }
        self.lo = self.lo.min(s);
        self.hi = self.hi.max(e - 1);
        let n = (self.diff.len() - 1) as i64;
        let mut s = s;
        while s < e {
            let base = s.div_euclid(n) * n;
            let stop = e.min(base + n);
            let (a, b) = ((s - base) as usize, (stop - base) as usize);
            self.diff[a] += v;
            self.diff[b] -= v;
            s = stop;
        }
    }

    /// Spreads mass `c·(overlap length)` of the lifted arc `[lo, hi]` onto cells.
    fn add_arc(&mut self, lo: T, hi: T, c: T, nf: T) {
        let (xl, xh) = (lo * nf, hi * nf);
        let il = xl.floor();
        let ih = xh.floor();
        let (jl, jh) = (il.to_i64().unwrap_or(0), ih.to_i64().unwrap_or(0));
        let cell = c / nf;
        if jl == jh {
            self.add_range(jl, jl + 1, (xh - xl) * cell);
            return;
        }
        self.add_range(jl, jl + 1, (il + T::one() - xl) * cell);
        self.add_range(jl + 1, jh, cell);
        self.add_range(jh, jh + 1, (xh - ih) * cell);
    }

    /// Drains the accumulated row into sorted `(col, val)` pairs.
    fn drain(&mut self, cols: &mut Vec<u32>, vals: &mut Vec<T>) {
        let n = (self.diff.len() - 1) as i64;
        cols.clear();
        vals.clear();
        if self.lo > self.hi {
            return;
        }
        let mut row = Vec::new();
        if self.hi - self.lo + 1 >= n {
            let mut run = T::zero();
            for j in 0..n as usize {
                run += self.diff[j];
                row.push((j as u32, run));
            }
        } else {
            let mut run = T::zero();
            for lifted in self.lo..=self.hi {
                let j = lifted.rem_euclid(n) as usize;
                if j == 0 && lifted != self.lo {
                    run += self.diff[n as usize];
                }
                run += self.diff[j];
                row.push((j as u32, run));
            }
            row.sort_by_key(|e| e.0);
        }
        for d in self.diff.iter_mut() {
            *d = T::zero();
        }
        self.lo = i64::MAX;
        self.hi = i64::MIN;
        // Cancellation in the running sum leaves dust in cells no arc reached.
        let mut raw = KahanSum::new();
        row.iter().for_each(|&(_, v)| raw.add(v.abs()));
        let dust = T::lit(64.0) * T::epsilon() * raw.value::<T>();
        let mut sum = KahanSum::new();
        for &(_, v) in &row {
            if v > dust {
                sum.add(v);
            }
        }
        let total: T = sum.value();
        for (j, v) in row {
            if v > dust {
                cols.push(j);
                vals.push(v / total);
            }
        }
    }
}

/// Builds the Ulam matrix of the kernel `p(x, A) = m(A ∩ B_ε(τ x)) / 2ε`.
///
/// Each source cell is split at the folds of `τ`, and each monotone piece is
/// cut into panels whose images are no longer than one cell; every panel gets
/// a `quad_order`-point Gauss–Legendre rule. The overlap of `B_ε(τ x)` with each
/// target cell is exact.
pub fn build_ulam<T: Scalar>(
    p: &MapParams<T>,
    eps: T,
    grid: Grid,
    quad_order: usize,
) -> Result<UlamMatrix<T>> {
    if eps == T::zero() {
        return Err(Error::EpsilonZero);
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("kick half-width {eps}")));
    }
    if quad_order == 0 {
        return Err(Error::InvalidParameter("quad_order must be at least 1".into()));
    }
    let n = grid.n_cells;
    let meta = KernelMeta {
        a: p.a().as_f64(),
        amplitude: p.amplitude().as_f64(),
        psi: p.psi().to_coeffs(),
        eps: eps.as_f64(),
        quad_order,
    };
    if eps >= T::lit(0.5) {
        return Ok(UlamMatrix {
            grid,
            storage: Storage::Uniform,
            meta,
        });
    }
    let product = eps.as_f64() * n as f64;
    if product < MIN_KERNEL_CELLS {
        return Err(Error::KernelUnderresolved { product });
    }

    let rule = GaussLegendre::<T>::new(quad_order);
    let folds = p.fold_locations();
    let nf = T::of_usize(n);
    let scale = nf / (eps + eps);

    let rows: Vec<(Vec<u32>, Vec<T>)> = (0..n)
        .into_par_iter()
        .map_init(
            || RowScratch::<T>::new(n),
            |scratch, i| {
                let (x0, x1) = grid.cell::<T>(i);
                let mut cuts = vec![x0];
                cuts.extend(folds.iter().copied().filter(|&z| z > x0 && z < x1));
                cuts.push(x1);
                for w in cuts.windows(2) {
                    let (u, v) = (w[0], w[1]);
                    let span = (p.lift(v) - p.lift(u)).abs();
                    let m = (span * nf).ceil().to_usize().unwrap_or(1).max(1);
                    let h = (v - u) / T::of_usize(m);
                    for k in 0..m {
                        let a = u + h * T::of_usize(k);
                        let b = if k + 1 == m { v } else { a + h };
                        for (x, wt) in rule.mapped(a, b) {
                            let y = p.tau(x);
                            scratch.add_arc(y - eps, y + eps, wt * scale, nf);
                        }
                    }
                }
                let (mut cols, mut vals) = (Vec::new(), Vec::new());
                scratch.drain(&mut cols, &mut vals);
                (cols, vals)
            },
        )
        .collect();

    let nnz = rows.iter().map(|r| r.0.len()).sum();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for (c, v) in rows {
        cols.extend(c);
        vals.extend(v);
        row_ptr.push(cols.len());
    }
    Ok(UlamMatrix {
        grid,
        storage: Storage::Csr {
            row_ptr,
            cols,
            vals,
        },
        meta,
    })
}

/// Stationary cell densities (per unit length) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector<T> {
    rho: Vec<T>,
    residual: T,
    iterations: usize,
    trace: Vec<T>,
}

impl<T: Scalar> DensityVector<T> {
    /// Wraps given cell densities, renormalized to unit integral.
    pub fn from_values(mut rho: Vec<T>) -> Result<Self> {
        if rho.len() < 2 {
            return Err(Error::InvalidParameter("density needs at least 2 cells".into()));
        }
        normalize_density(&mut rho);
        Ok(Self {
            rho,
            residual: T::zero(),
            iterations: 0,
            trace: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }

    pub fn grid(&self) -> Grid {
        Grid {
            n_cells: self.rho.len(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.rho
    }

    /// `L¹` distance between the last two iterates.
    pub fn residual(&self) -> T {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Residual after each iteration.
    pub fn residual_trace(&self) -> &[T] {
        &self.trace
    }

    /// `(1/n) Σ ρ_j`.
    pub fn integral(&self) -> T {
        let mut s = KahanSum::new();
        self.rho.iter().for_each(|&v| s.add(v));
        s.value::<T>() / T::of_usize(self.n())
    }

    pub fn sup(&self) -> T {
        self.rho.iter().copied().fold(T::zero(), T::max)
    }

    pub fn inf(&self) -> T {
        self.rho.iter().copied().fold(T::infinity(), T::min)
    }

    /// `∫ f dμ` with `f` sampled at cell midpoints.
    pub fn mean_of<F: Fn(T) -> T>(&self, f: F) -> T {
        let g = self.grid();
        let mut s = KahanSum::new();
        for (j, &r) in self.rho.iter().enumerate() {
            s.add(r * f(g.midpoint::<T>(j)));
        }
        s.value::<T>() / T::of_usize(self.n())
    }

    /// `L¹` distance `(1/n) Σ |ρ_j - σ_j|` to densities on the same grid.
    pub fn l1_distance(&self, other: &[T]) -> T {
        assert_eq!(other.len(), self.n(), "grids differ");
        let mut s = KahanSum::new();
        for (&a, &b) in self.rho.iter().zip(other) {
            s.add((a - b).abs());
        }
        s.value::<T>() / T::of_usize(self.n())
    }

    /// CSV with columns `cell_index,cell_midpoint,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell_index,cell_midpoint,density")?;
        let g = self.grid();
        for (j, &r) in self.rho.iter().enumerate() {
            writeln!(w, "{},{},{}", j, g.midpoint::<T>(j).as_f64(), r.as_f64())?;
        }
        Ok(())
    }
}

fn normalize_density<T: Scalar>(rho: &mut [T]) {
    for r in rho.iter_mut() {
        if !(*r > T::zero()) {
            *r = T::zero();
        }
    }
    let mut s = KahanSum::new();
    rho.iter().for_each(|&v| s.add(v));
    let mean = s.value::<T>() / T::of_usize(rho.len());
    if mean > T::zero() {
        rho.iter_mut().for_each(|r| *r /= mean);
    }
}

/// Left fixed vector of `P` by power iteration from the uniform density.
///
/// Iterates are clamped to be nonnegative and renormalized every step. On
/// failure the error carries the last residual.
pub fn stationary_density<T: Scalar>(
    p: &UlamMatrix<T>,
    tol: T,
    max_iter: usize,
) -> Result<DensityVector<T>> {
    stationary_density_from(p, vec![T::one(); p.n()], tol, max_iter)
}

/// As [`stationary_density`], starting from the given density.
pub fn stationary_density_from<T: Scalar>(
    p: &UlamMatrix<T>,
    start: Vec<T>,
    tol: T,
    max_iter: usize,
) -> Result<DensityVector<T>> {
    let n = p.n();
    if start.len() != n {
        return Err(Error::InvalidParameter("start vector length".into()));
    }
    let nf = T::of_usize(n);
    let mut q: Vec<T> = start;
    normalize_density(&mut q);
    q.iter_mut().for_each(|v| *v /= nf);
    let mut next = vec![T::zero(); n];
    let mut trace = Vec::new();
    let mut residual = T::infinity();
    for it in 1..=max_iter.max(1) {
        p.left_apply(&q, &mut next);
        let mut s = KahanSum::new();
        for v in next.iter_mut() {
            if !(*v > T::zero()) {
                *v = T::zero();
            }
            s.add(*v);
        }
        let total: T = s.value();
        let mut d = KahanSum::new();
        for (nv, &qv) in next.iter_mut().zip(&q) {
            *nv /= total;
            d.add((*nv - qv).abs());
        }
        residual = d.value();
        trace.push(residual);
        std::mem::swap(&mut q, &mut next);
        if residual <= tol {
            let rho: Vec<T> = q.iter().map(|&v| v * nf).collect();
            return Ok(DensityVector {
                rho,
                residual,
                iterations: it,
                trace,
            });
        }
    }
    Err(Error::NoConvergence {
        residual: residual.as_f64(),
        iterations: max_iter,
    })
}

/// Outcome of the sup-norm density check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupBoundReport {
    pub max_density: f64,
    /// `1/(2ε)`.
    pub bound: f64,
    /// `(1 + c/(nε)) / (2ε)`.
    pub allowed: f64,
    pub collar: f64,
    pub pass: bool,
}

/// Compares `max ρ` with `1/(2ε)`, allowing a collar of `c/(nε)` for the
/// smearing of the bound across cell boundaries.
pub fn check_density_sup_bound<T: Scalar>(d: &DensityVector<T>, eps: T) -> SupBoundReport {
    let eps = eps.as_f64().min(0.5);
    let max_density = d.sup().as_f64();
    let bound = 1.0 / (2.0 * eps);
    let allowed = (1.0 + DENSITY_COLLAR / (d.n() as f64 * eps)) * bound;
    SupBoundReport {
        max_density,
        bound,
        allowed,
        collar: DENSITY_COLLAR,
        pass: max_density <= allowed * (1.0 + 1e-12),
    }
}

/// `(1/4ε²) max_z m(B_ε(z) ∩ τ⁻¹ B_ε(x0))`, a pointwise upper bound for the
/// stationary density at `x0`.
pub fn refined_density_bound<T: Scalar>(p: &MapParams<T>, eps: T, x0: T) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(Error::EpsilonZero);
    }
    let eps = eps.min(T::lit(0.5));
    let two = eps + eps;
    let pre = p.preimage(CircleArc::new(x0 - eps, two));
    Ok(max_window_overlap(&pre, two) / (two * two))
}

/// `max_z m(S ∩ [z, z + w])`, attained where a window end meets an endpoint.
pub fn max_window_overlap<T: Scalar>(set: &ArcSet<T>, w: T) -> T {
    if w >= T::one() || set.is_full() {
        return set.measure();
    }
    if set.is_empty() {
        return T::zero();
    }
    let cum = set.cumulative();
    let mut best = T::zero();
    for &(lo, hi) in set.segments() {
        for e in [lo, hi] {
            for s in [e, e - w] {
                best = best.max(cum.between(s, s + w));
            }
        }
    }
    best.min(w)
}

/// Result of iterating `J ↦ B_ε(τ(J))`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoverOutcome<T> {
    /// The circle was covered after `steps` iterations.
    Covered { steps: usize, measures: Vec<T> },
    /// Not covered within the step budget; `measure` is the last value.
    Stalled { measure: T, measures: Vec<T> },
}

impl<T: Scalar> CoverOutcome<T> {
    pub fn steps(&self) -> Option<usize> {
        match self {
            CoverOutcome::Covered { steps, .. } => Some(*steps),
            CoverOutcome::Stalled { .. } => None,
        }
    }

    pub fn measures(&self) -> &[T] {
        match self {
            CoverOutcome::Covered { measures, .. } | CoverOutcome::Stalled { measures, .. } => {
                measures
            }
        }
    }
}

/// Grows `J_0` by `J_{i+1} = B_ε(τ(J_i))` until it covers the circle.
pub fn ergodic_cover_check<T: Scalar>(
    p: &MapParams<T>,
    eps: T,
    j0: &ArcSet<T>,
    max_steps: usize,
) -> Result<CoverOutcome<T>> {
    if j0.is_empty() {
        return Err(Error::InvalidParameter("cover check needs a nonempty seed set".into()));
    }
    let mut j = j0.clone();
    let mut measures = vec![j.measure()];
    if j.is_full() {
        return Ok(CoverOutcome::Covered { steps: 0, measures });
    }
    for step in 1..=max_steps {
        j = p.image(&j, eps);
        measures.push(j.measure());
        if j.is_full() {
            return Ok(CoverOutcome::Covered { steps: step, measures });
        }
    }
    Ok(CoverOutcome::Stalled {
        measure: j.measure(),
        measures,
    })
}
