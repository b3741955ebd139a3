use std::sync::OnceLock;

use eddy_mlmc::fem::Problem;
use eddy_mlmc::mlmc::{
    allocate_samples, mc_estimate, mlmc_estimate, screening, variance_budget, CachedSampler, FemSampler, LevelSampler,
    MlmcConfig, N_MIN,
};
use eddy_mlmc::oracle::{reference_mean, REFERENCE_INTERVALS};
use eddy_mlmc::{MeshConfig, ModelParams, ParameterDistributions};

fn problem() -> &'static Problem {
    static P: OnceLock<Problem> = OnceLock::new();
    P.get_or_init(|| Problem::new(ModelParams::default(), ParameterDistributions::default(), MeshConfig::default()).unwrap())
}

fn reference() -> f64 {
    static R: OnceLock<f64> = OnceLock::new();
    *R.get_or_init(|| {
        reference_mean(&ModelParams::default(), &ParameterDistributions::default(), 8, REFERENCE_INTERVALS).unwrap()
    })
}

#[test]
fn mc_standard_error_matches_spread_of_repeated_runs() {
    let n = 20;
    let runs: Vec<_> = (0..50).map(|seed| mc_estimate(&FemSampler::new(problem(), seed), 0, n).unwrap()).collect();
    let means: Vec<f64> = runs.iter().map(|r| r.mean).collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let spread = (means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
    let predicted = runs.iter().map(|r| (r.var / n as f64).sqrt()).sum::<f64>() / runs.len() as f64;
    let ratio = spread / predicted;
    assert!((1.0 / 3.0..=3.0).contains(&ratio), "observed {spread}, predicted {predicted}");
    assert!(runs.iter().all(|r| r.cost == (n * problem().dof_count(0)) as f64));
}

#[test]
fn mc_with_collapsed_laws_has_zero_variance() {
    let p = Problem::new(ModelParams::default(), ParameterDistributions::default().collapsed(), MeshConfig::default()).unwrap();
    let r = mc_estimate(&FemSampler::new(&p, 3), 1, 5).unwrap();
    assert_eq!(r.var, 0.0);
    assert_eq!(r.mean, p.evaluate_qoi(&p.dists.nominal_sample(), 1).unwrap());
}

#[test]
fn screening_shows_level_decay() {
    let sampler = FemSampler::new(problem(), 11);
    let stats = screening(&sampler, 3, 100).unwrap();
    assert_eq!(stats, screening(&sampler, 3, 100).unwrap());
    for l in 1..3 {
        let mean_ratio = stats[l].mean_diff / stats[l + 1].mean_diff;
        assert!((3.0..5.0).contains(&mean_ratio), "level {l}: mean ratio {mean_ratio}");
        assert!(stats[l + 1].var_diff < stats[l].var_diff);
    }
    assert!(stats.iter().all(|s| s.var_w >= 0.0 && s.var_diff >= 0.0 && s.n_used == 100));
}

#[test]
fn screening_variances_decrease_with_many_samples() {
    let stats = screening(&FemSampler::new(problem(), 12), 3, 1000).unwrap();
    for l in 1..3 {
        assert!(stats[l + 1].var_diff <= stats[l].var_diff, "level {l}: {stats:?}");
    }
}

#[test]
fn halving_epsilon_quadruples_level0_samples() {
    let stats = screening(&FemSampler::new(problem(), 13), 2, 100).unwrap();
    let v: Vec<f64> = stats.iter().map(|s| if s.level == 0 { s.var_w } else { s.var_diff }).collect();
    let c: Vec<f64> = stats.iter().map(|s| s.cost_per_sample).collect();
    let eps = 1e-3 * stats[0].mean_w;
    let a = allocate_samples(&v, &c, eps, N_MIN).unwrap();
    let b = allocate_samples(&v, &c, eps / 2.0, N_MIN).unwrap();
    let r = b[0] as f64 / a[0] as f64;
    assert!((r - 4.0).abs() < 0.01, "{a:?} -> {b:?}");
    assert!(variance_budget(&v, &a) <= eps * eps / 2.0 * (1.0 + 1e-9));
}

#[test]
fn mlmc_estimates_agree_with_reference_mean() {
    let eps = 1e-2;
    let reference = reference();
    let mut hits = 0;
    for seed in 0..20 {
        let r = mlmc_estimate(&FemSampler::new(problem(), 100 + seed), eps, &MlmcConfig::default()).unwrap();
        assert!(r.variance_budget <= r.epsilon_abs * r.epsilon_abs / 2.0 * (1.0 + 1e-9));
        if r.bias_converged {
            assert!(r.bias_estimate * r.bias_estimate <= r.epsilon_abs * r.epsilon_abs / 2.0);
        }
        if (r.y - reference).abs() <= 2.0 * eps * reference {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits} of 20 runs within 2 eps");
}

#[test]
fn mlmc_is_reproducible() {
    let cfg = MlmcConfig::default();
    let a = mlmc_estimate(&FemSampler::new(problem(), 5), 2e-2, &cfg).unwrap();
    let b = mlmc_estimate(&FemSampler::new(problem(), 5), 2e-2, &cfg).unwrap();
    let c = mlmc_estimate(&CachedSampler::new(FemSampler::new(problem(), 5)), 2e-2, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn collapsed_laws_reduce_mlmc_to_finest_level_value() {
    let p = Problem::new(ModelParams::default(), ParameterDistributions::default().collapsed(), MeshConfig::default()).unwrap();
    let r = mlmc_estimate(&FemSampler::new(&p, 9), 1e-2, &MlmcConfig::default()).unwrap();
    let w = p.evaluate_qoi(&p.dists.nominal_sample(), r.finest_level).unwrap();
    assert!((r.y - w).abs() <= 1e-12 * w, "{} vs {w}", r.y);
    assert!(r.n_samples.iter().all(|&n| n == N_MIN));
}

#[test]
fn fixed_allocation_estimator_is_consistent() {
    // Y over levels 0..=2 with fixed sample counts, repeated with independent seeds.
    let counts = [200usize, 40, 10];
    let runs = 50;
    let mut ys = Vec::new();
    let mut budgets = Vec::new();
    let mut last_means = Vec::new();
    for seed in 0..runs {
        let sampler = FemSampler::new(problem(), 1000 + seed);
        let mut y = 0.0;
        let mut var = Vec::new();
        for (level, &n) in counts.iter().enumerate() {
            let d: Vec<f64> = (0..n as u64).map(|i| sampler.coupled(level, i).unwrap().diff).collect();
            let (m, v) = eddy_mlmc::mlmc::mean_var(d.iter().copied());
            y += m;
            var.push(v);
            if level == 2 {
                last_means.push(m);
            }
        }
        ys.push(y);
        budgets.push(variance_budget(&var, &counts));
    }
    let n = runs as f64;
    let mean_y = ys.iter().sum::<f64>() / n;
    let budget = budgets.iter().sum::<f64>() / n;
    // Weak-error estimate with the asymptotic rate 2.
    let bias = (last_means.iter().sum::<f64>() / n).abs() / 3.0;
    let gap = (mean_y - reference()).abs();
    assert!(gap <= 3.0 * (budget / n).sqrt() + bias, "gap {gap}, budget {budget}, bias {bias}");
}
