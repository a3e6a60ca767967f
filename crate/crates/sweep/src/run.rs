use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use kickmap_core::atlas::{fit_c_hat, measure_report, scheduled_window, SCHEDULE_RANGE};
use kickmap_core::lyapunov::{birkhoff_lyapunov_task, quadrature_lyapunov, McSettings};
use kickmap_core::transfer::{build_ulam, check_density_sup_bound, ergodic_cover_check, stationary_density};
use kickmap_core::{ArcSet, Error, Grid, MapParams, ParameterWindow, PsiSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{validate_config, Cell, SweepConfig};
use crate::SweepError;

/// Length of the seed arc of the cover check.
pub const COVER_SEED_LENGTH: f64 = 1e-3;

pub const RESULTS_HEADER: [&str; 13] = [
    "cell_index",
    "a",
    "L",
    "eps",
    "seed",
    "lambda_mc",
    "std_error",
    "lambda_quad",
    "sup_density",
    "density_bound",
    "cover_steps",
    "in_A_L",
    "status",
];

/// Left end of the cover seed arc for cell `index`: the golden-ratio
/// sequence, so seeds spread over the circle without using a noise stream.
pub fn cover_seed(index: usize) -> ArcSet<f64> {
    let phi = 0.618_033_988_749_894_9;
    ArcSet::arc((index as f64 * phi).fract(), COVER_SEED_LENGTH)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub cell: Cell,
    pub seed: u64,
    pub lambda_mc: Option<f64>,
    pub std_error: Option<f64>,
    pub lambda_quad: Option<f64>,
    pub sup_density: Option<f64>,
    pub density_bound: f64,
    pub cover_steps: Option<usize>,
    pub in_a: Option<bool>,
    pub errors: Vec<&'static str>,
    pub density: Option<Vec<f64>>,
    pub wall_time: f64,
}

impl ResultRecord {
    pub fn status(&self) -> String {
        if self.errors.is_empty() {
            "ok".into()
        } else {
            self.errors.join(";")
        }
    }

    /// `λ` used for plots: Monte Carlo when present, else quadrature.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda_mc.or(self.lambda_quad)
    }

    fn fields(&self) -> [String; 13] {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let c = &self.cell;
        [
            c.index.to_string(),
            c.a.to_string(),
            c.amplitude.to_string(),
            c.eps.to_string(),
            self.seed.to_string(),
            opt(self.lambda_mc),
            opt(self.std_error.filter(|s| s.is_finite())),
            opt(self.lambda_quad),
            opt(self.sup_density),
            self.density_bound.to_string(),
            opt(self.cover_steps),
            opt(self.in_a.map(u8::from)),
            self.status(),
        ]
    }
}

/// Admissible window at one amplitude, or why there is none.
#[derive(Debug, Clone)]
pub struct AtlasEntry {
    pub amplitude: f64,
    pub window: Result<ParameterWindow<f64>, Error>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<ResultRecord>,
    pub atlas: Vec<AtlasEntry>,
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
}

impl SweepReport {
    pub fn n_failed(&self) -> usize {
        self.records.iter().filter(|r| !r.errors.is_empty()).count()
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, SweepError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SweepError::Io(e.to_string()))
}

pub fn atlas_entries(psi: &Arc<PsiSpec<f64>>, l_grid: &[f64]) -> Vec<AtlasEntry> {
    let (lo, hi) = SCHEDULE_RANGE;
    l_grid
        .par_iter()
        .filter(|&&l| (lo..=hi).contains(&l))
        .map(|&l| AtlasEntry {
            amplitude: l,
            window: scheduled_window(Arc::clone(psi), l),
        })
        .collect()
}

/// Computes every estimate requested for one cell. Failures are recorded in
/// the record and never propagate.
pub fn run_cell(
    cfg: &SweepConfig,
    psi: &Arc<PsiSpec<f64>>,
    atlas: &[AtlasEntry],
    cell: Cell,
) -> ResultRecord {
    let start = Instant::now();
    let est = &cfg.estimator;
    let mut rec = ResultRecord {
        cell,
        seed: cfg.master_seed,
        lambda_mc: None,
        std_error: None,
        lambda_quad: None,
        sup_density: None,
        density_bound: 1.0 / (2.0 * cell.eps.min(0.5)),
        cover_steps: None,
        in_a: atlas
            .iter()
            .find(|e| e.amplitude == cell.amplitude)
            .map(|e| e.window.as_ref().map(|w| w.contains(cell.a)).unwrap_or(false)),
        errors: Vec::new(),
        density: None,
        wall_time: 0.0,
    };
    let p = match MapParams::new(cell.a, cell.amplitude, Arc::clone(psi)) {
        Ok(p) => p,
        Err(e) => {
            rec.errors.push(e.class());
            rec.wall_time = start.elapsed().as_secs_f64();
            return rec;
        }
    };
    if est.monte_carlo {
        let s = McSettings {
            n_steps: est.n_steps,
            burn_in: est.burn_in,
            n_replicas: est.n_replicas,
        };
        match birkhoff_lyapunov_task(&p, cell.eps, cfg.master_seed, cell.index as u64, &s) {
            Ok(e) => {
                rec.lambda_mc = Some(e.value);
                rec.std_error = Some(e.std_error);
            }
            Err(e) => rec.errors.push(e.class()),
        }
    }
    if est.quadrature {
        let quad = Grid::new(est.n_cells)
            .and_then(|g| build_ulam(&p, cell.eps, g, est.quad_order))
            .and_then(|m| stationary_density(&m, est.tol, est.max_iter))
            .and_then(|d| quadrature_lyapunov(&p, &d).map(|q| (d, q)));
        match quad {
            Ok((d, q)) => {
                rec.lambda_quad = Some(q.value);
                rec.sup_density = Some(check_density_sup_bound(&d, cell.eps).max_density);
                if est.density_profiles {
                    rec.density = Some(d.values().to_vec());
                }
            }
            Err(e) => rec.errors.push(e.class()),
        }
    }
    if est.cover_max_steps > 0 {
        match ergodic_cover_check(&p, cell.eps, &cover_seed(cell.index), est.cover_max_steps) {
            Ok(out) => rec.cover_steps = out.steps(),
            Err(e) => rec.errors.push(e.class()),
        }
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

/// Validates `cfg`, runs every cell on a pool of `workers` threads and
/// writes the result files under `cfg.output_dir`.
pub fn run_sweep(cfg: &SweepConfig, workers: usize) -> Result<SweepReport, SweepError> {
    let v = validate_config(cfg);
    if !v.is_ok() {
        return Err(SweepError::Config(v.errors));
    }
    let psi = cfg.psi_spec()?;
    let cells = cfg.cells();
    let pool = thread_pool(workers)?;
    let (atlas, records) = pool.install(|| {
        let atlas = atlas_entries(&psi, &cfg.l_grid);
        let records: Vec<ResultRecord> = cells
            .par_iter()
            .map(|&c| run_cell(cfg, &psi, &atlas, c))
            .collect();
        (atlas, records)
    });
    let report = SweepReport {
        records,
        atlas,
        warnings: v.warnings,
        output_dir: cfg.output_dir.clone(),
    };
    write_outputs(cfg, &report)?;
    Ok(report)
}

pub fn write_outputs(cfg: &SweepConfig, report: &SweepReport) -> Result<(), SweepError> {
    let dir = &report.output_dir;
    fs::create_dir_all(dir.join("plotdata"))?;
    write_results(&dir.join("results.csv"), &report.records)?;
    write_timings(&dir.join("timings.csv"), &report.records)?;
    write_summary(&dir.join("summary.json"), cfg, report)?;
    emit_plotdata(&dir.join("plotdata"), report)?;
    Ok(())
}

pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

fn write_timings(path: &Path, records: &[ResultRecord]) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell_index", "wall_time"])?;
    for r in records {
        w.write_record([r.cell.index.to_string(), r.wall_time.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    #[serde(rename = "L")]
    pub amplitude: f64,
    pub eps: f64,
    pub cells: usize,
    pub failed: usize,
    pub min_lambda_over_log_l: Option<f64>,
    pub mean_lambda_over_log_l: Option<f64>,
    pub measure_a: Option<f64>,
    pub atlas_status: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub master_seed: u64,
    pub cells: usize,
    pub failed: usize,
    pub levels: Vec<LevelSummary>,
    pub c_hat: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn summarize(cfg: &SweepConfig, report: &SweepReport) -> Summary {
    let levels = cfg
        .l_grid
        .iter()
        .map(|&l| {
            let rows: Vec<&ResultRecord> = report
                .records
                .iter()
                .filter(|r| r.cell.amplitude == l)
                .collect();
            let ratios: Vec<f64> = rows.iter().filter_map(|r| r.lambda()).map(|v| v / l.ln()).collect();
            let atlas = report.atlas.iter().find(|e| e.amplitude == l);
            LevelSummary {
                amplitude: l,
                eps: cfg.eps_rule.eps(l),
                cells: rows.len(),
                failed: rows.iter().filter(|r| !r.errors.is_empty()).count(),
                min_lambda_over_log_l: ratios.iter().copied().reduce(f64::min),
                mean_lambda_over_log_l: (!ratios.is_empty())
                    .then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
                measure_a: atlas.and_then(|e| e.window.as_ref().ok()).map(|w| w.measure),
                atlas_status: atlas.map(|e| match &e.window {
                    Ok(_) => "ok".to_string(),
                    Err(err) => err.class().to_string(),
                }),
            }
        })
        .collect();
    let measures: Vec<_> = report
        .atlas
        .iter()
        .filter_map(|e| e.window.as_ref().ok())
        .map(measure_report)
        .collect();
    Summary {
        master_seed: cfg.master_seed,
        cells: report.records.len(),
        failed: report.n_failed(),
        levels,
        c_hat: (!measures.is_empty()).then(|| fit_c_hat(&measures)),
        warnings: report.warnings.clone(),
    }
}

fn write_summary(path: &Path, cfg: &SweepConfig, report: &SweepReport) -> Result<(), SweepError> {
    let s = summarize(cfg, report);
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &s).map_err(|e| SweepError::Io(e.to_string()))?;
    writeln!(f)?;
    Ok(())
}

/// Writes `lambda_vs_a.csv`, `atlas.csv` and one `density_cell<i>.csv` per
/// cell that kept its profile.
pub fn emit_plotdata(dir: &Path, report: &SweepReport) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_path(dir.join("lambda_vs_a.csv"))?;
    w.write_record(["a", "L", "lambda_over_logL", "in_A_L"])?;
    for r in &report.records {
        let ratio = r.lambda().map(|v| (v / r.cell.amplitude.ln()).to_string());
        w.write_record([
            r.cell.a.to_string(),
            r.cell.amplitude.to_string(),
            ratio.unwrap_or_default(),
            r.in_a.map(|b| u8::from(b).to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("atlas.csv"))?;
    w.write_record(["L", "measure_A", "K1", "K2", "eps0"])?;
    for e in &report.atlas {
        if let Ok(win) = &e.window {
            w.write_record([
                win.amplitude.to_string(),
                win.measure.to_string(),
                win.k1.to_string(),
                win.k2.to_string(),
                win.eps0.to_string(),
            ])?;
        }
    }
    w.flush()?;

    for r in &report.records {
        if let Some(rho) = &r.density {
            let mut w = csv::Writer::from_path(dir.join(format!("density_cell{}.csv", r.cell.index)))?;
            w.write_record(["cell_midpoint", "density", "sup_bound"])?;
            let n = rho.len();
            let bound = r.density_bound.to_string();
            for (j, v) in rho.iter().enumerate() {
                let mid = (j as f64 + 0.5) / n as f64;
                w.write_record([mid.to_string(), v.to_string(), bound.clone()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
