use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use kickmap::config::{validate_config, Cell, SweepConfig};
use kickmap::run::{atlas_entries, cover_seed, run_sweep, thread_pool};
use kickmap::SweepError;
use kickmap_core::atlas::{ergodicity_thresholds, measure_report};
use kickmap_core::lyapunov::{
    birkhoff_lyapunov_task, construct_sink, jensen_upper_check, quadrature_lyapunov,
    verify_sink_task, JensenReport, McSettings,
};
use kickmap_core::transfer::{
    build_ulam, check_density_sup_bound, ergodic_cover_check, stationary_density, SupBoundReport,
};
use kickmap_core::{Grid, LyapunovEstimate, MapParams, PsiSpec};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "kickmap", version, about = "Lyapunov exponents, densities and parameter atlases of kicked circle maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Clone)]
struct CellArgs {
    #[command(flatten)]
    common: Common,
    /// Cell index in sweep order (`L` outer, `a` inner).
    #[arg(long, default_value_t = 0)]
    cell: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo and quadrature exponent for one cell.
    Lyap(CellArgs),
    /// Stationary density of one cell.
    Density {
        #[command(flatten)]
        args: CellArgs,
        /// Also write the Ulam matrix as ulam.bin + ulam.json.
        #[arg(long)]
        export: bool,
    },
    /// Admissible rotation sets under the default schedule.
    Atlas(Common),
    /// Sink certificates and trapped-orbit exponents.
    Sink(Common),
    /// Cover check `J -> B_eps(tau(J))` for every cell.
    ErgCheck(Common),
    /// Full sweep with results.csv, summary.json and plotdata/.
    Sweep(Common),
    /// Check a configuration without running it.
    Validate(Common),
}

enum Outcome {
    Clean,
    Partial,
}

struct Ctx {
    cfg: SweepConfig,
    workers: usize,
}

impl Ctx {
    fn new(c: &Common) -> Result<Self, SweepError> {
        let mut cfg = SweepConfig::load(&c.config)?;
        if let Some(s) = c.seed {
            cfg.master_seed = s;
        }
        if let Some(o) = &c.out {
            cfg.output_dir = o.clone();
        }
        let workers = c
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let v = validate_config(&cfg);
        for w in &v.warnings {
            eprintln!("warning: {w}");
        }
        if !v.is_ok() {
            return Err(SweepError::Config(v.errors));
        }
        fs::create_dir_all(&cfg.output_dir)?;
        Ok(Self { cfg, workers })
    }

    fn psi(&self) -> Result<Arc<PsiSpec<f64>>, SweepError> {
        self.cfg.psi_spec()
    }

    fn cell(&self, index: usize) -> Result<Cell, SweepError> {
        let cells = self.cfg.cells();
        let n = cells.len();
        cells
            .into_iter()
            .nth(index)
            .ok_or_else(|| SweepError::Config(vec![format!("cell {index} out of range (0..{n})")]))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), SweepError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| SweepError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct LyapOutput {
    cell_index: usize,
    monte_carlo: Option<LyapunovEstimate<f64>>,
    quadrature: Option<LyapunovEstimate<f64>>,
    jensen: Option<JensenReport>,
    errors: Vec<String>,
}

fn lyap(args: &CellArgs) -> Result<Outcome, SweepError> {
    let ctx = Ctx::new(&args.common)?;
    let cell = ctx.cell(args.cell)?;
    let est = &ctx.cfg.estimator;
    let p = MapParams::new(cell.a, cell.amplitude, ctx.psi()?)?;
    let pool = thread_pool(ctx.workers)?;
    let mut out = LyapOutput {
        cell_index: cell.index,
        monte_carlo: None,
        quadrature: None,
        jensen: None,
        errors: Vec::new(),
    };
    pool.install(|| {
        if est.monte_carlo {
            let s = McSettings {
                n_steps: est.n_steps,
                burn_in: est.burn_in,
                n_replicas: est.n_replicas,
            };
            match birkhoff_lyapunov_task(&p, cell.eps, ctx.cfg.master_seed, cell.index as u64, &s) {
                Ok(e) => out.monte_carlo = Some(e),
                Err(e) => out.errors.push(e.to_string()),
            }
        }
        if est.quadrature {
            let q = build_ulam(&p, cell.eps, Grid::new(est.n_cells)?, est.quad_order)
                .and_then(|m| stationary_density(&m, est.tol, est.max_iter))
                .and_then(|d| quadrature_lyapunov(&p, &d));
            match q {
                Ok(e) => out.quadrature = Some(e),
                Err(e) => out.errors.push(e.to_string()),
            }
        }
        Ok::<_, SweepError>(())
    })?;
    out.jensen = out
        .monte_carlo
        .as_ref()
        .or(out.quadrature.as_ref())
        .map(|e| jensen_upper_check(e, &p));
    if let Some(e) = &out.monte_carlo {
        println!("lambda_mc = {} +/- {}", e.value, e.std_error);
    }
    if let Some(e) = &out.quadrature {
        println!("lambda_quad = {}", e.value);
    }
    for e in &out.errors {
        eprintln!("error: {e}");
    }
    write_json(&ctx.path("lyap.json"), &out)?;
    Ok(if out.errors.is_empty() { Outcome::Clean } else { Outcome::Partial })
}

#[derive(Serialize)]
struct DensityOutput {
    cell_index: usize,
    a: f64,
    #[serde(rename = "L")]
    amplitude: f64,
    eps: f64,
    n_cells: usize,
    residual: f64,
    iterations: usize,
    sup_check: SupBoundReport,
}

fn density(args: &CellArgs, export: bool) -> Result<Outcome, SweepError> {
    let ctx = Ctx::new(&args.common)?;
    let cell = ctx.cell(args.cell)?;
    let est = &ctx.cfg.estimator;
    let p = MapParams::new(cell.a, cell.amplitude, ctx.psi()?)?;
    let pool = thread_pool(ctx.workers)?;
    let (m, d) = pool.install(|| {
        let m = build_ulam(&p, cell.eps, Grid::new(est.n_cells)?, est.quad_order)?;
        let d = stationary_density(&m, est.tol, est.max_iter)?;
        Ok::<_, SweepError>((m, d))
    })?;
    d.write_csv(fs::File::create(ctx.path("density.csv"))?)?;
    if export {
        m.export(&ctx.path("ulam.bin"), &ctx.path("ulam.json"))?;
    }
    let sup = check_density_sup_bound(&d, cell.eps);
    println!(
        "sup density = {} (bound {}, allowed {}) residual = {} after {} iterations",
        sup.max_density,
        sup.bound,
        sup.allowed,
        d.residual(),
        d.iterations()
    );
    write_json(
        &ctx.path("density.json"),
        &DensityOutput {
            cell_index: cell.index,
            a: cell.a,
            amplitude: cell.amplitude,
            eps: cell.eps,
            n_cells: d.n(),
            residual: d.residual(),
            iterations: d.iterations(),
            sup_check: sup,
        },
    )?;
    Ok(if sup.pass { Outcome::Clean } else { Outcome::Partial })
}

fn atlas(c: &Common) -> Result<Outcome, SweepError> {
    let ctx = Ctx::new(c)?;
    let psi = ctx.psi()?;
    let entries = thread_pool(ctx.workers)?.install(|| atlas_entries(&psi, &ctx.cfg.l_grid));
    let mut w = csv::Writer::from_path(ctx.path("atlas.csv"))?;
    w.write_record(["L", "measure_A", "K1", "K2", "eps0", "component_count", "c_hat", "status"])?;
    let mut windows = Vec::new();
    let mut partial = entries.len() != ctx.cfg.l_grid.len();
    for e in &entries {
        match &e.window {
            Ok(win) => {
                let r = measure_report(win);
                w.write_record([
                    win.amplitude.to_string(),
                    win.measure.to_string(),
                    win.k1.to_string(),
                    win.k2.to_string(),
                    win.eps0.to_string(),
                    win.component_count.to_string(),
                    r.c_hat.to_string(),
                    "ok".into(),
                ])?;
                println!("L = {}: m(A) = {} in {} arcs", win.amplitude, win.measure, win.component_count);
                windows.push(win.clone());
            }
            Err(err) => {
                partial = true;
                let mut row = vec![e.amplitude.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(err.class().to_string());
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    write_json(&ctx.path("atlas.json"), &windows)?;
    Ok(if partial { Outcome::Partial } else { Outcome::Clean })
}

fn sink(c: &Common) -> Result<Outcome, SweepError> {
    let ctx = Ctx::new(c)?;
    let psi = ctx.psi()?;
    let n_steps = ctx.cfg.estimator.n_steps;
    let mut w = csv::Writer::from_path(ctx.path("sink.csv"))?;
    w.write_record(["L", "fold_index", "offset_over_nu", "a", "eps", "lambda", "status"])?;
    let mut partial = false;
    let mut task = 0u64;
    for &l in &ctx.cfg.l_grid {
        let cert = match construct_sink(Arc::clone(&psi), l, 0) {
            Ok(cert) => cert,
            Err(e) => {
                partial = true;
                eprintln!("L = {l}: {e}");
                w.write_record([l.to_string(), "0".into(), String::new(), String::new(), String::new(), String::new(), e.class().into()])?;
                continue;
            }
        };
        write_json(&ctx.path(&format!("sink_L{l}.json")), &cert)?;
        for (k, off) in [-1.0 / 3.0, 0.0, 1.0 / 3.0].into_iter().enumerate() {
            let a = cert.a_z + off * cert.nu;
            let r = verify_sink_task(&cert, a, ctx.cfg.master_seed, task, n_steps);
            task += 1;
            let (lambda, status) = match r {
                Ok(e) => (e.value.to_string(), "ok".to_string()),
                Err(e) => {
                    partial = true;
                    (String::new(), e.class().to_string())
                }
            };
            println!("L = {l} offset {k}: lambda = {lambda} ({status})");
            w.write_record([
                l.to_string(),
                cert.fold_index.to_string(),
                off.to_string(),
                a.to_string(),
                cert.eps.to_string(),
                lambda,
                status,
            ])?;
        }
    }
    w.flush()?;
    Ok(if partial { Outcome::Partial } else { Outcome::Clean })
}

fn erg_check(c: &Common) -> Result<Outcome, SweepError> {
    let ctx = Ctx::new(c)?;
    let psi = ctx.psi()?;
    let budget = match ctx.cfg.estimator.cover_max_steps {
        0 => 64,
        n => n,
    };
    let rows: Vec<Vec<String>> = thread_pool(ctx.workers)?.install(|| {
        use rayon::prelude::*;
        ctx.cfg
            .cells()
            .par_iter()
            .map(|cell| {
                let mut row = vec![
                    cell.index.to_string(),
                    cell.a.to_string(),
                    cell.amplitude.to_string(),
                    cell.eps.to_string(),
                ];
                let res = ergodicity_thresholds(Arc::clone(&psi), cell.amplitude).and_then(|(g, b)| {
                    let p = MapParams::new(cell.a, cell.amplitude, Arc::clone(&psi))?;
                    let out = ergodic_cover_check(&p, cell.eps, &cover_seed(cell.index), budget)?;
                    Ok((g, b, out))
                });
                match res {
                    Ok((g, b, out)) => {
                        row.push(g.to_string());
                        row.push(b.to_string());
                        row.push(out.steps().map(|s| s.to_string()).unwrap_or_default());
                        row.push(out.measures().last().copied().unwrap_or(0.0).to_string());
                        row.push(if out.steps().is_some() { "ok" } else { "stalled" }.into());
                    }
                    Err(e) => {
                        row.extend(std::iter::repeat_n(String::new(), 4));
                        row.push(e.class().into());
                    }
                }
                row
            })
            .collect()
    });
    let mut w = csv::Writer::from_path(ctx.path("erg_check.csv"))?;
    w.write_record(["cell_index", "a", "L", "eps", "threshold_general", "threshold_b2", "cover_steps", "final_measure", "status"])?;
    let mut partial = false;
    for row in &rows {
        partial |= row.last().map(String::as_str) != Some("ok");
        w.write_record(row)?;
    }
    w.flush()?;
    let covered = rows.iter().filter(|r| r.last().map(String::as_str) == Some("ok")).count();
    println!("{covered} of {} cells covered the circle", rows.len());
    Ok(if partial { Outcome::Partial } else { Outcome::Clean })
}

fn sweep(c: &Common) -> Result<Outcome, SweepError> {
    let ctx = Ctx::new(c)?;
    let report = run_sweep(&ctx.cfg, ctx.workers)?;
    println!(
        "{} cells, {} failed; results in {}",
        report.records.len(),
        report.n_failed(),
        report.output_dir.display()
    );
    Ok(if report.n_failed() == 0 { Outcome::Clean } else { Outcome::Partial })
}

fn validate(c: &Common) -> Result<Outcome, SweepError> {
    let cfg = SweepConfig::load(&c.config)?;
    let v = validate_config(&cfg);
    for w in &v.warnings {
        eprintln!("warning: {w}");
    }
    if !v.is_ok() {
        return Err(SweepError::Config(v.errors));
    }
    println!("configuration ok: {} cells", cfg.cells().len());
    Ok(Outcome::Clean)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Command::Lyap(a) => lyap(a),
        Command::Density { args, export } => density(args, *export),
        Command::Atlas(c) => atlas(c),
        Command::Sink(c) => sink(c),
        Command::ErgCheck(c) => erg_check(c),
        Command::Sweep(c) => sweep(c),
        Command::Validate(c) => validate(c),
    };
    match res {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(SweepError::Config(errs)) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
