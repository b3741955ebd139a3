//! Monte Carlo and multilevel Monte Carlo estimators of `E[W]`.
//!
//! The MLMC estimator is the telescoping sum
//!
//! ```text
//! Y = mean(W_0) + sum_{l=1..L} mean(W_l - W_{l-1})
//! ```
//!
//! with independent samples per term and `V[Y] = sum_l V_l / N_l`. The target
//! mean-square error `eps^2` is split evenly: the variance is driven below
//! `eps^2 / 2` by the sample allocation, the squared bias below `eps^2 / 2`
//! by adding levels.
//!
//! Tolerances passed to [`mlmc_estimate`] are relative to `|E[W]|`; the
//! absolute tolerance is `eps * |Y_screen|`, with `Y_screen` the estimate after
//! the initial screening.
//!
//! Every sample is addressed by `(stream, level, index)` and evaluated from
//! its own counter-based random stream, so extending a level reuses all
//! previous samples and results do not depend on thread scheduling.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::fem::Problem;

/// Smallest sample count on any level.
pub const N_MIN: usize = 10;

/// Lower clamp for the fitted weak-error rate.
pub const ALPHA_MIN: f64 = 0.5;

/// Which estimator a sample belongs to; each has its own index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Mlmc,
    Mc,
}

/// `(W_l, W_l - W_{l-1})` for one coupled sample; the difference is `W_0` on level 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSample {
    pub fine: f64,
    pub diff: f64,
}

/// Source of level samples.
pub trait LevelSampler: Sync {
    /// Coupled sample `index` of `level` (fine and coarse share one parameter draw).
    fn coupled(&self, level: usize, index: u64) -> Result<LevelSample>;

    /// Uncoupled `W_level` for the plain MC estimator.
    fn single(&self, level: usize, index: u64) -> Result<f64>;

    /// Unconstrained degrees of freedom of the level mesh.
    fn dof_count(&self, level: usize) -> usize;

    /// True when every sample is identical (all input laws collapsed).
    fn is_deterministic(&self) -> bool {
        false
    }

    /// Cost of one coupled sample: both meshes for `level >= 1`.
    fn coupled_cost(&self, level: usize) -> f64 {
        if level == 0 {
            self.dof_count(0) as f64
        } else {
            (self.dof_count(level) + self.dof_count(level - 1)) as f64
        }
    }
}

/// Global sample index: `stream tag << 56 | level << 48 | index`.
pub fn sample_index(stream: Stream, level: usize, index: u64) -> u64 {
    let tag: u64 = match stream {
        Stream::Mlmc => 0,
        Stream::Mc => 1,
    };
    debug_assert!(level < 256 && index < (1 << 48));
    (tag << 56) | ((level as u64) << 48) | index
}

/// Finite element sampler: draws from the problem's distributions and solves.
#[derive(Debug, Clone)]
pub struct FemSampler<'p> {
    pub problem: &'p Problem,
    pub master_seed: u64,
}

impl<'p> FemSampler<'p> {
    pub fn new(problem: &'p Problem, master_seed: u64) -> Self {
        FemSampler { problem, master_seed }
    }
}

impl LevelSampler for FemSampler<'_> {
    fn coupled(&self, level: usize, index: u64) -> Result<LevelSample> {
        let s = self.problem.draw(self.master_seed, sample_index(Stream::Mlmc, level, index));
        let wrap = |e: Error| Error::Sample { level, sample_index: s.sample_index, source: Box::new(e) };
        if level == 0 {
            let w = self.problem.evaluate_qoi(&s, 0).map_err(wrap)?;
            Ok(LevelSample { fine: w, diff: w })
        } else {
            let (fine, coarse) = self.problem.evaluate_pair(&s, level).map_err(wrap)?;
            Ok(LevelSample { fine, diff: fine - coarse })
        }
    }

    fn single(&self, level: usize, index: u64) -> Result<f64> {
        let s = self.problem.draw(self.master_seed, sample_index(Stream::Mc, level, index));
        self.problem
            .evaluate_qoi(&s, level)
            .map_err(|e| Error::Sample { level, sample_index: s.sample_index, source: Box::new(e) })
    }

    fn dof_count(&self, level: usize) -> usize {
        self.problem.dof_count(level)
    }

    fn is_deterministic(&self) -> bool {
        self.problem.dists.is_degenerate()
    }
}

/// Memoizes another sampler, so that several estimator runs with the same
/// seed share their samples.
pub struct CachedSampler<S> {
    inner: S,
    coupled: Mutex<HashMap<(usize, u64), LevelSample>>,
    single: Mutex<HashMap<(usize, u64), f64>>,
}

impl<S: LevelSampler> CachedSampler<S> {
    pub fn new(inner: S) -> Self {
        CachedSampler { inner, coupled: Mutex::default(), single: Mutex::default() }
    }

    pub fn cached_samples(&self) -> usize {
        self.coupled.lock().unwrap().len() + self.single.lock().unwrap().len()
    }
}

impl<S: LevelSampler> LevelSampler for CachedSampler<S> {
    fn coupled(&self, level: usize, index: u64) -> Result<LevelSample> {
        if let Some(v) = self.coupled.lock().unwrap().get(&(level, index)) {
            return Ok(*v);
        }
        let v = self.inner.coupled(level, index)?;
        self.coupled.lock().unwrap().insert((level, index), v);
        Ok(v)
    }

    fn single(&self, level: usize, index: u64) -> Result<f64> {
        if let Some(v) = self.single.lock().unwrap().get(&(level, index)) {
            return Ok(*v);
        }
        let v = self.inner.single(level, index)?;
        self.single.lock().unwrap().insert((level, index), v);
        Ok(v)
    }

    fn dof_count(&self, level: usize) -> usize {
        self.inner.dof_count(level)
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}

/// Sample mean and unbiased variance, accumulated in slice order.
pub fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Samples of one level, in index order.
#[derive(Debug, Clone, Default)]
struct LevelData {
    samples: Vec<LevelSample>,
}

impl LevelData {
    fn extend_to<S: LevelSampler + ?Sized>(&mut self, sampler: &S, level: usize, n: usize) -> Result<()> {
        let have = self.samples.len();
        if n <= have {
            return Ok(());
        }
        let new = crate::map_indices(have as u64..n as u64, |i| sampler.coupled(level, i));
        for s in new {
            self.samples.push(s?);
        }
        Ok(())
    }

    fn stats<S: LevelSampler + ?Sized>(&self, sampler: &S, level: usize) -> LevelStats {
        let (mean_w, var_w) = mean_var(self.samples.iter().map(|s| s.fine));
        let (mean_diff, var_diff) = mean_var(self.samples.iter().map(|s| s.diff));
        let (mean_sq_diff, _) = mean_var(self.samples.iter().map(|s| s.diff * (2.0 * s.fine - s.diff)));
        LevelStats {
            level,
            n_used: self.samples.len(),
            n_dof: sampler.dof_count(level),
            mean_w,
            var_w,
            mean_diff,
            var_diff,
            mean_sq_diff,
            cost_per_sample: sampler.coupled_cost(level),
        }
    }
}

/// Screening moments of one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub n_used: usize,
    pub n_dof: usize,
    pub mean_w: f64,
    pub var_w: f64,
    /// Moments of `W_l - W_{l-1}`; of `W_0` itself on level 0.
    pub mean_diff: f64,
    pub var_diff: f64,
    /// Mean of `W_l^2 - W_{l-1}^2`; of `W_0^2` on level 0.
    pub mean_sq_diff: f64,
    /// DoF units per coupled sample.
    pub cost_per_sample: f64,
}

/// Plain Monte Carlo result on one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub level: usize,
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    /// `n * dof_count(level)`.
    pub cost: f64,
}

/// `n` independent samples of `W_level`.
pub fn mc_estimate<S: LevelSampler + ?Sized>(sampler: &S, level: usize, n: usize) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::config("Monte Carlo needs at least 2 samples"));
    }
    let values = crate::map_indices(0..n as u64, |i| sampler.single(level, i))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let (mean, var) = mean_var(values.iter().copied());
    Ok(McEstimate { level, n, mean, var, cost: n as f64 * sampler.dof_count(level) as f64 })
}

/// `n_warm` coupled samples on each of the levels `0..=max_level`.
pub fn screening<S: LevelSampler + ?Sized>(sampler: &S, max_level: usize, n_warm: usize) -> Result<Vec<LevelStats>> {
    if n_warm < 2 {
        return Err(Error::config(format!("n_warm must be at least 2 to estimate a variance, got {n_warm}")));
    }
    (0..=max_level)
        .map(|level| {
            let mut data = LevelData::default();
            data.extend_to(sampler, level, n_warm)?;
            Ok(data.stats(sampler, level))
        })
        .collect()
}

/// Sample counts minimizing cost subject to `sum_l V_l / N_l <= eps^2 / 2`:
/// `N_l = ceil(2 eps^-2 sqrt(V_l / C_l) sum_k sqrt(V_k C_k))`, at least `n_min`.
pub fn allocate_samples(variances: &[f64], costs: &[f64], eps: f64, n_min: usize) -> Result<Vec<usize>> {
    if variances.len() != costs.len() || variances.is_empty() {
        return Err(Error::config("allocation needs one variance and one cost per level"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("eps must be positive, got {eps}")));
    }
    if variances.iter().any(|v| !(*v >= 0.0)) || costs.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::config("variances must be >= 0 and costs > 0"));
    }
    let total: f64 = variances.iter().zip(costs).map(|(v, c)| (v * c).sqrt()).sum();
    Ok(variances
        .iter()
        .zip(costs)
        .map(|(v, c)| {
            let n = (2.0 / (eps * eps) * (v / c).sqrt() * total).ceil();
            // Saturate instead of overflowing for absurd requests.
            let n = if n >= usize::MAX as f64 { usize::MAX } else { n as usize };
            n.max(n_min)
        })
        .collect())
}

/// `sum_l V_l / N_l`.
pub fn variance_budget(variances: &[f64], n: &[usize]) -> f64 {
    variances.iter().zip(n).map(|(v, &n)| v / n as f64).sum()
}

/// Least-squares slope `-rate` of `log2 |y_l|` against `l` over the given
/// levels; zero entries are skipped. `None` with fewer than two usable points.
pub fn fit_decay_rate(levels: &[usize], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .zip(values)
        .filter(|(_, v)| v.abs() > 0.0 && v.is_finite())
        .map(|(&l, v)| (l as f64, v.abs().log2()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(-sxy / sxx)
}

/// Weak-error estimate `max(|m_L|, |m_{L-1}| / 2^alpha) / (2^alpha - 1)`.
pub fn bias_estimate(mean_diffs: &[f64], alpha: f64) -> f64 {
    let l = mean_diffs.len() - 1;
    let f = 2f64.powf(alpha);
    let last = mean_diffs[l].abs();
    let prev = if l >= 2 { mean_diffs[l - 1].abs() / f } else { 0.0 };
    last.max(prev) / (f - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmcConfig {
    /// Finest level of the initial screening.
    pub l_start: usize,
    pub l_max: usize,
    pub n_warm: usize,
    pub n_min: usize,
}

impl Default for MlmcConfig {
    fn default() -> Self {
        MlmcConfig { l_start: 2, l_max: 5, n_warm: 100, n_min: N_MIN }
    }
}

impl MlmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_warm < 2 {
            return Err(Error::config(format!("n_warm must be at least 2 to estimate a variance, got {}", self.n_warm)));
        }
        if self.n_min < 2 {
            return Err(Error::config("n_min must be at least 2"));
        }
        if self.l_start < 1 || self.l_max < self.l_start {
            return Err(Error::config(format!(
                "need 1 <= l_start <= l_max, got l_start = {}, l_max = {}",
                self.l_start, self.l_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlmcResult {
    /// Requested relative tolerance.
    pub epsilon: f64,
    /// Absolute tolerance `epsilon * |Y_screen|`.
    pub epsilon_abs: f64,
    pub y: f64,
    pub levels: Vec<LevelStats>,
    pub n_samples: Vec<usize>,
    pub variance_budget: f64,
    pub bias_estimate: f64,
    /// `V[W_L]` from the telescoped second moment `sum_l mean_sq_diff - Y^2`.
    pub var_w_finest: f64,
    pub alpha: f64,
    pub beta: Option<f64>,
    /// `sum_l N_l C_l` in DoF units.
    pub total_cost: f64,
    pub finest_level: usize,
    pub bias_converged: bool,
}

impl MlmcResult {
    pub fn level0_cost(&self) -> f64 {
        self.n_samples[0] as f64 * self.levels[0].cost_per_sample
    }
}

fn level_variances(levels: &[LevelStats]) -> Vec<f64> {
    levels.iter().map(|s| if s.level == 0 { s.var_w } else { s.var_diff }).collect()
}

/// Adaptive MLMC driver targeting a relative root-mean-square error `eps`.
pub fn mlmc_estimate<S: LevelSampler + ?Sized>(sampler: &S, eps: f64, config: &MlmcConfig) -> Result<MlmcResult> {
    config.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("eps must be positive, got {eps}")));
    }
    // Deterministic inputs: every sample is the same, warm-up is pointless.
    let n_warm = if sampler.is_deterministic() { config.n_min } else { config.n_warm.max(config.n_min) };

    let mut data: Vec<LevelData> = Vec::new();
    for level in 0..=config.l_start {
        let mut d = LevelData::default();
        d.extend_to(sampler, level, n_warm)?;
        data.push(d);
    }
    let stats = |data: &[LevelData]| -> Vec<LevelStats> {
        data.iter().enumerate().map(|(l, d)| d.stats(sampler, l)).collect()
    };

    let y_screen: f64 = stats(&data).iter().map(|s| s.mean_diff).sum();
    let eps_abs = if y_screen != 0.0 { eps * y_screen.abs() } else { eps };
    let costs = |n_levels: usize| -> Vec<f64> { (0..n_levels).map(|l| sampler.coupled_cost(l)).collect() };

    let mut alpha;
    let mut beta;
    let mut bias;
    let mut converged;
    loop {
        // Sample until the allocation for the current variances is met.
        loop {
            let s = stats(&data);
            let v = level_variances(&s);
            let n = allocate_samples(&v, &costs(data.len()), eps_abs, config.n_min)?;
            let mut grew = false;
            for (l, d) in data.iter_mut().enumerate() {
                if n[l] > d.samples.len() {
                    d.extend_to(sampler, l, n[l])?;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }

        let s = stats(&data);
        let finest = data.len() - 1;
        let lv: Vec<usize> = (1..=finest).collect();
        let means: Vec<f64> = s[1..].iter().map(|s| s.mean_diff).collect();
        let vars: Vec<f64> = s[1..].iter().map(|s| s.var_diff).collect();
        alpha = fit_decay_rate(&lv, &means).unwrap_or(ALPHA_MIN).max(ALPHA_MIN);
        beta = fit_decay_rate(&lv, &vars);
        let mean_diffs: Vec<f64> = s.iter().map(|s| s.mean_diff).collect();
        bias = bias_estimate(&mean_diffs, alpha);
        converged = bias <= eps_abs / std::f64::consts::SQRT_2;
        if converged || finest == config.l_max {
            break;
        }

        // New level: variance extrapolated from the finest one, then allocated.
        let new_level = finest + 1;
        let decay = 2f64.powf(beta.unwrap_or(1.0).max(0.5));
        let mut v = level_variances(&s);
        v.push(v[finest] / decay);
        let n = allocate_samples(&v, &costs(new_level + 1), eps_abs, config.n_min)?;
        let mut d = LevelData::default();
        d.extend_to(sampler, new_level, n[new_level].max(config.n_min))?;
        data.push(d);
    }

    let levels = stats(&data);
    let n_samples: Vec<usize> = data.iter().map(|d| d.samples.len()).collect();
    let v = level_variances(&levels);
    let y: f64 = levels.iter().map(|s| s.mean_diff).sum();
    let second: f64 = levels.iter().map(|s| s.mean_sq_diff).sum();
    let total_cost = levels.iter().zip(&n_samples).map(|(s, &n)| n as f64 * s.cost_per_sample).sum();
    Ok(MlmcResult {
        epsilon: eps,
        epsilon_abs: eps_abs,
        y,
        variance_budget: variance_budget(&v, &n_samples),
        bias_estimate: bias,
        var_w_finest: (second - y * y).max(0.0),
        alpha,
        beta,
        total_cost,
        finest_level: levels.len() - 1,
        bias_converged: converged,
        levels,
        n_samples,
    })
}

/// One row of the MC-versus-MLMC cost table.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub epsilon: f64,
    pub cost_mc: f64,
    pub cost_mlmc: f64,
    /// `None` when the MC run would exceed the sample cap.
    pub y_mc: Option<f64>,
    pub y_mlmc: f64,
    pub n_mc: usize,
    pub finest_level: usize,
    pub level0_cost: f64,
    pub bias_converged: bool,
}

impl CostRow {
    pub fn mlmc_cheaper(&self) -> bool {
        self.cost_mlmc < self.cost_mc
    }
}

/// Largest tested tolerance below which MLMC is cheaper for every smaller tolerance.
pub fn crossover_epsilon(rows: &[CostRow]) -> Option<f64> {
    let mut sorted: Vec<&CostRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let mut star = None;
    for r in sorted {
        if r.mlmc_cheaper() {
            star = Some(r.epsilon);
        } else {
            break;
        }
    }
    star
}

/// For each tolerance: an MLMC run, and the cost of plain MC on the finest
/// level that run needed, `N_MC = ceil(2 V[W_L] / eps_abs^2)` samples of
/// `dof_count(L)` each, with `V[W_L]` taken from [`MlmcResult::var_w_finest`]. The MC estimate itself is only computed when
/// `N_MC <= mc_sample_cap`.
pub fn cost_compare<S: LevelSampler + ?Sized>(
    sampler: &S,
    epsilons: &[f64],
    config: &MlmcConfig,
    mc_sample_cap: usize,
) -> Result<Vec<CostRow>> {
    if epsilons.is_empty() {
        return Err(Error::config("cost comparison needs at least one tolerance"));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let r = mlmc_estimate(sampler, eps, config)?;
            let finest = r.finest_level;
            let var_w = r.var_w_finest;
            let n_mc = ((2.0 * var_w / (r.epsilon_abs * r.epsilon_abs)).ceil() as usize).max(2);
            let cost_mc = n_mc as f64 * sampler.dof_count(finest) as f64;
            let y_mc = if n_mc <= mc_sample_cap {
                Some(mc_estimate(sampler, finest, n_mc)?.mean)
            } else {
                None
            };
            Ok(CostRow {
                epsilon: eps,
                cost_mc,
                cost_mlmc: r.total_cost,
                y_mc,
                y_mlmc: r.y,
                n_mc,
                finest_level: finest,
                level0_cost: r.level0_cost(),
                bias_converged: r.bias_converged,
            })
        })
        .collect()
}
