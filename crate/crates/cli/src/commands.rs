//! Experiment drivers. Each writes CSV files into the configured output
//! directory, headed by the effective configuration as `# `-prefixed TOML.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use eddy_mlmc::fem::SolveRecord;
use eddy_mlmc::mesh::build_mesh;
use eddy_mlmc::mlmc::{
    cost_compare, crossover_epsilon, mlmc_estimate, sample_index, screening, CachedSampler, LevelSample, LevelSampler,
    Stream,
};
use eddy_mlmc::oracle::{reference_mean, REFERENCE_INTERVALS};
use eddy_mlmc::{Error, Problem};

use crate::config::{RunConfig, MAX_LEVEL};
use crate::CliError;

pub const SCREENING_COLUMNS: &str = "level,n_dof,mean_w,var_w,mean_diff,var_diff";
pub const RUN_COLUMNS: &str = "eps,level,n_samples,y,total_cost,bias_flag";
pub const COMPARE_COLUMNS: &str = "eps,cost_mc,cost_mlmc,y_mc,y_mlmc,crossover";
pub const ORACLE_COLUMNS: &str = "q,e_w_ref";

/// Files written and a short human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Sampler over the configured problem that can record every solve.
struct Sampler<'p> {
    problem: &'p Problem,
    master_seed: u64,
    log: Option<Mutex<Vec<SolveRecord>>>,
}

impl<'p> Sampler<'p> {
    fn new(problem: &'p Problem, cfg: &RunConfig) -> Self {
        Sampler {
            problem,
            master_seed: cfg.rng.master_seed,
            log: cfg.experiment.solve_log.then(Mutex::default),
        }
    }

    fn solve(&self, stream: Stream, level: usize, index: u64, on: usize) -> Result<f64, Error> {
        let s = self.problem.draw(self.master_seed, sample_index(stream, level, index));
        let rec = self.problem.evaluate_detailed(&s, on).map_err(|e| Error::Sample {
            level,
            sample_index: s.sample_index,
            source: Box::new(e),
        })?;
        if let Some(log) = &self.log {
            log.lock().unwrap().push(rec);
        }
        Ok(rec.energy)
    }

    /// Log rows sorted by sample and level, so the file does not depend on scheduling.
    fn records(&self) -> Vec<SolveRecord> {
        let mut r = self.log.as_ref().map(|l| l.lock().unwrap().clone()).unwrap_or_default();
        r.sort_by_key(|r| (r.sample_index, r.level));
        r
    }
}

impl LevelSampler for Sampler<'_> {
    fn coupled(&self, level: usize, index: u64) -> Result<LevelSample, Error> {
        let fine = self.solve(Stream::Mlmc, level, index, level)?;
        if level == 0 {
            return Ok(LevelSample { fine, diff: fine });
        }
        let coarse = self.solve(Stream::Mlmc, level, index, level - 1)?;
        Ok(LevelSample { fine, diff: fine - coarse })
    }

    fn single(&self, level: usize, index: u64) -> Result<f64, Error> {
        self.solve(Stream::Mc, level, index, level)
    }

    fn dof_count(&self, level: usize) -> usize {
        self.problem.dof_count(level)
    }

    fn is_deterministic(&self) -> bool {
        self.problem.dists.is_degenerate()
    }
}

fn header(cfg: &RunConfig, command: &str) -> String {
    let mut out = format!("# # eddy-mlmc {command}\n");
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    out
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_csv(cfg: &RunConfig, command: &str, name: &str, columns: &str, rows: &[String]) -> Result<PathBuf, CliError> {
    let mut text = header(cfg, command);
    text.push_str(columns);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    write_file(&cfg.experiment.out_dir, name, &text)
}

fn write_solve_log(cfg: &RunConfig, command: &str, sampler: &Sampler, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if cfg.experiment.solve_log {
        let rows: Vec<String> = sampler.records().iter().map(SolveRecord::csv_row).collect();
        files.push(write_csv(cfg, command, "solves.csv", SolveRecord::CSV_HEADER, &rows)?);
    }
    Ok(())
}

/// Per-level screening moments on levels `0..=experiment.levels`.
pub fn screen(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let problem = cfg.problem()?;
    let sampler = Sampler::new(&problem, cfg);
    let stats = screening(&sampler, cfg.experiment.levels, cfg.experiment.n_warm)?;
    let rows: Vec<String> = stats
        .iter()
        .map(|s| format!("{},{},{:e},{:e},{:e},{:e}", s.level, s.n_dof, s.mean_w, s.var_w, s.mean_diff, s.var_diff))
        .collect();
    let mut files = vec![write_csv(cfg, "screen", "screening.csv", SCREENING_COLUMNS, &rows)?];
    write_solve_log(cfg, "screen", &sampler, &mut files)?;
    let var_w: Vec<f64> = stats.iter().map(|s| s.var_w).collect();
    let spread = var_w.iter().cloned().fold(0.0, f64::max) / var_w.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Outcome { files, summary: format!("{} levels screened, max/min V[W_l] = {spread:.3}", stats.len()) })
}

/// One adaptive MLMC run at relative tolerance `eps`.
pub fn run(cfg: &RunConfig, eps: f64) -> Result<Outcome, CliError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Config(format!("--eps must be positive, got {eps}")));
    }
    let problem = cfg.problem()?;
    let sampler = Sampler::new(&problem, cfg);
    let r = mlmc_estimate(&sampler, eps, &cfg.mlmc())?;
    let mut rows: Vec<String> = r.n_samples.iter().enumerate().map(|(l, n)| format!("{eps:e},{l},{n},,,")).collect();
    let flag = if r.bias_converged { "converged" } else { "bias-unconverged" };
    rows.push(format!("{eps:e},all,{},{:e},{:e},{flag}", r.n_samples.iter().sum::<usize>(), r.y, r.total_cost));
    let mut files = vec![write_csv(cfg, "run", "mlmc_run.csv", RUN_COLUMNS, &rows)?];
    write_solve_log(cfg, "run", &sampler, &mut files)?;
    Ok(Outcome {
        files,
        summary: format!(
            "Y = {:e} J/m (eps_abs = {:e}), L = {}, N = {:?}, cost = {:e} DoF, {flag}",
            r.y, r.epsilon_abs, r.finest_level, r.n_samples, r.total_cost
        ),
    })
}

/// MC versus MLMC cost for each tolerance, with the detected crossover.
pub fn compare(cfg: &RunConfig, eps: &[f64]) -> Result<Outcome, CliError> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(CliError::Config("--eps needs a nonempty list of positive tolerances".into()));
    }
    let problem = cfg.problem()?;
    let sampler = CachedSampler::new(Sampler::new(&problem, cfg));
    let rows = cost_compare(&sampler, eps, &cfg.mlmc(), cfg.experiment.mc_sample_cap)?;
    let star = crossover_epsilon(&rows);
    let mut lines: Vec<String> = rows
        .iter()
        .map(|r| {
            let y_mc = r.y_mc.map(|y| format!("{y:e}")).unwrap_or_default();
            let cross = star.is_some_and(|s| r.epsilon <= s) as u8;
            format!("{:e},{:e},{:e},{y_mc},{:e},{cross}", r.epsilon, r.cost_mc, r.cost_mlmc, r.y_mlmc)
        })
        .collect();
    lines.push(match star {
        Some(s) => format!("# eps_star = {s:e}"),
        None => "# eps_star = none".to_string(),
    });
    let files = vec![write_csv(cfg, "compare", "cost_compare.csv", COMPARE_COLUMNS, &lines)?];
    let summary = match star {
        Some(s) => format!("{} tolerances compared; MLMC is cheaper for eps <= {s:e}", rows.len()),
        None => format!("{} tolerances compared; no crossover in the tested range", rows.len()),
    };
    Ok(Outcome { files, summary })
}

/// Quadrature reference for `E[W]` from the radial solver.
pub fn oracle(cfg: &RunConfig, quad_order: usize) -> Result<Outcome, CliError> {
    if quad_order < 4 {
        return Err(CliError::Config(format!("--quad-order must be at least 4, got {quad_order}")));
    }
    let e = reference_mean(&cfg.fixed_params(), &cfg.distributions(), quad_order, REFERENCE_INTERVALS)?;
    let files = vec![write_csv(cfg, "oracle", "oracle.csv", ORACLE_COLUMNS, &[format!("{quad_order},{e:e}")])?];
    Ok(Outcome { files, summary: format!("E[W]_ref = {e:e} J/m (q = {quad_order})") })
}

/// Single solve at the nominal parameters.
pub fn qoi(cfg: &RunConfig, level: usize) -> Result<Outcome, CliError> {
    if level > MAX_LEVEL {
        return Err(CliError::Config(format!("--level must not exceed {MAX_LEVEL}")));
    }
    let problem = cfg.problem()?;
    let rec = problem.evaluate_detailed(&problem.dists.nominal_sample(), level)?;
    let files = vec![write_csv(cfg, "qoi", "qoi.csv", SolveRecord::CSV_HEADER, &[rec.csv_row()])?];
    Ok(Outcome {
        files,
        summary: format!("W_{level} = {:e} J/m, {} DoF, residual {:e}", rec.energy, rec.n_dof, rec.relative_residual),
    })
}

/// Text dump of the nominal mesh.
pub fn mesh(cfg: &RunConfig, level: usize) -> Result<Outcome, CliError> {
    if level > MAX_LEVEL {
        return Err(CliError::Config(format!("--level must not exceed {MAX_LEVEL}")));
    }
    let problem = cfg.problem()?;
    let m = build_mesh(&problem.nominal_params(), &problem.level_spec(level))?;
    let path = write_file(&cfg.experiment.out_dir, &format!("mesh_l{level}.txt"), &m.to_text())?;
    Ok(Outcome {
        files: vec![path],
        summary: format!("{} nodes, {} triangles, {} DoF", m.nodes.len(), m.triangles.len(), m.dof_count),
    })
}
