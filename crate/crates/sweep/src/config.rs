use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use kickmap_core::atlas::ergodicity_thresholds;
use kickmap_core::lyapunov::{DEFAULT_BURN_IN, DEFAULT_N_STEPS, DEFAULT_REPLICAS};
use kickmap_core::transfer::{DEFAULT_MAX_ITER, DEFAULT_QUAD_ORDER, DEFAULT_TOL, MIN_KERNEL_CELLS};
use kickmap_core::{PsiCoeffs, PsiSpec};
use serde::{Deserialize, Serialize};

use crate::SweepError;

/// Rotation values of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AGrid {
    /// `a_j = j / count` for `j < count`.
    Count(usize),
    Values(Vec<f64>),
}

impl AGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AGrid::Count(n) => (0..*n).map(|j| j as f64 / *n as f64).collect(),
            AGrid::Values(v) => v.clone(),
        }
    }
}

/// Kick half-width as a function of `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsRule {
    Constant(f64),
    /// `min(c·L^(β-1), 1/2)`.
    Power { c: f64, beta: f64 },
    /// `L^(-1/2)`, the `eps0` of the default atlas schedule.
    Schedule,
}

impl EpsRule {
    pub fn eps(&self, l: f64) -> f64 {
        match *self {
            EpsRule::Constant(v) => v,
            EpsRule::Power { c, beta } => (c * l.powf(beta - 1.0)).min(0.5),
            EpsRule::Schedule => l.sqrt().recip(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    pub monte_carlo: bool,
    pub n_steps: u64,
    pub burn_in: u64,
    pub n_replicas: u32,
    pub quadrature: bool,
    pub n_cells: usize,
    pub quad_order: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Budget for the cover check; 0 skips it.
    pub cover_max_steps: usize,
    /// Write one density profile per cell under `plotdata/`.
    pub density_profiles: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            monte_carlo: true,
            n_steps: DEFAULT_N_STEPS,
            burn_in: DEFAULT_BURN_IN,
            n_replicas: DEFAULT_REPLICAS,
            quadrature: true,
            n_cells: 2048,
            quad_order: DEFAULT_QUAD_ORDER,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            cover_max_steps: 64,
            density_profiles: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "PsiCoeffs::sine")]
    pub psi: PsiCoeffs,
    pub a_grid: AGrid,
    #[serde(rename = "L_grid")]
    pub l_grid: Vec<f64>,
    pub eps_rule: EpsRule,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        serde_json::from_str(text).map_err(|e| SweepError::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SweepError::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_json(&text)
    }

    pub fn psi_spec(&self) -> Result<Arc<PsiSpec<f64>>, SweepError> {
        PsiSpec::from_coeffs(&self.psi)
            .map(Arc::new)
            .map_err(|e| SweepError::Config(vec![format!("psi: {e}")]))
    }

    /// Cells in sweep order: `L` outer, `a` inner.
    pub fn cells(&self) -> Vec<Cell> {
        let a = self.a_grid.values();
        let mut out = Vec::with_capacity(a.len() * self.l_grid.len());
        for &l in &self.l_grid {
            let eps = self.eps_rule.eps(l);
            for &a in &a {
                out.push(Cell {
                    index: out.len(),
                    a,
                    amplitude: l,
                    eps,
                });
            }
        }
        out
    }
}

/// One `(a, L)` point of a sweep; `index` doubles as its noise stream id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub a: f64,
    pub amplitude: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn has_duplicates(v: &[f64]) -> bool {
    let mut seen = HashSet::new();
    v.iter().any(|x| !seen.insert(x.to_bits()))
}

/// Collects every problem with `cfg` rather than stopping at the first.
pub fn validate_config(cfg: &SweepConfig) -> Validation {
    let mut r = Validation::default();
    let a = cfg.a_grid.values();
    if a.is_empty() {
        r.errors.push("a_grid is empty".into());
    }
    if a.iter().any(|x| !x.is_finite()) {
        r.errors.push("a_grid contains a non-finite value".into());
    }
    if has_duplicates(&a) {
        r.errors.push("a_grid contains duplicate values".into());
    }
    if cfg.l_grid.is_empty() {
        r.errors.push("L_grid is empty".into());
    }
    if has_duplicates(&cfg.l_grid) {
        r.errors.push("L_grid contains duplicate values".into());
    }
    let psi = match PsiSpec::<f64>::from_coeffs(&cfg.psi) {
        Ok(p) => Some(Arc::new(p)),
        Err(e) => {
            r.errors.push(format!("psi: {e}"));
            None
        }
    };
    match cfg.eps_rule {
        EpsRule::Power { c, beta } if !(c > 0.0 && beta.is_finite()) => {
            r.errors.push(format!("power rule needs c > 0 and finite beta, got c={c} beta={beta}"));
        }
        _ => {}
    }
    let est = &cfg.estimator;
    if !est.monte_carlo && !est.quadrature {
        r.errors.push("estimator: both monte_carlo and quadrature are disabled".into());
    }
    if est.monte_carlo {
        if est.n_steps == 0 || est.n_steps < 10 * est.burn_in {
            r.errors.push(format!(
                "estimator: need n_steps >= 10 * burn_in > 0, got {} and {}",
                est.n_steps, est.burn_in
            ));
        }
        if est.n_replicas == 0 {
            r.errors.push("estimator: n_replicas must be positive".into());
        }
    }
    if est.quadrature {
        if est.n_cells < 2 {
            r.errors.push("estimator: n_cells must be at least 2".into());
        }
        if est.quad_order == 0 {
            r.errors.push("estimator: quad_order must be positive".into());
        }
        if !(est.tol > 0.0) {
            r.errors.push("estimator: tol must be positive".into());
        }
    }
    for &l in &cfg.l_grid {
        if !(l.is_finite() && l > 0.0) {
            r.errors.push(format!("L = {l} is not a positive finite amplitude"));
            continue;
        }
        let eps = cfg.eps_rule.eps(l);
        if !(eps > 0.0 && eps <= 0.5) {
            r.errors.push(format!("eps({l}) = {eps} is outside (0, 1/2]"));
            continue;
        }
        if est.quadrature && est.n_cells >= 2 && eps * (est.n_cells as f64) < MIN_KERNEL_CELLS {
            r.errors.push(format!(
                "eps({l}) = {eps} spans fewer than {MIN_KERNEL_CELLS} of {} cells",
                est.n_cells
            ));
        }
        if let Some(psi) = &psi {
            if let Ok((_, b2_half)) = ergodicity_thresholds(Arc::clone(psi), l) {
                if eps < b2_half {
                    r.warnings.push(format!(
                        "eps({l}) = {eps} is below b_2/2 = {b2_half}; the stationary measure may not be unique"
                    ));
                }
            }
        }
    }
    r
}
