//! Run orchestration and artifact emission: replications in parallel, CSV
//! series for plotting, and a human-readable summary table.
//!
//! Every figure of interest is a named recipe expanding one base config into
//! a list of policy/parameter variants. Per variant the CLI writes one trace
//! CSV per replication, an aggregated regret curve (mean and standard error
//! per slot), and delay/throughput scatter series taken from replication 0.
//! All CSV output is fully determined by `(config, seed)`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bound::theoretical_regret_bound;
use crate::config::{parse_config, ConfigError, ExperimentConfig, RewardMode};
use crate::engine::Experiment;
use crate::policies::PolicyKind;
use crate::qos::{GompertzParams, UtilityWeights};
use crate::trace::{delay_stats, throughput_stats, ExperimentTrace, TraceSummary};
use crate::traffic::PredictorConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown recipe '{0}' (expected fig3..fig9)")]
    UnknownRecipe(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// Process exit code: 1 for configuration problems, 2 for IO failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::UnknownRecipe(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What to run: config document, output directory, optional overrides.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub replications: Option<u32>,
    pub recipe: Option<String>,
}

/// Floats in CSV output carry 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

// ---------------------------------------------------------------------------
// Figure recipes
// ---------------------------------------------------------------------------

fn predictor(lo: f64, hi: f64, fp: f64) -> PredictorConfig {
    PredictorConfig {
        prob_lo: lo,
        prob_hi: hi,
        miss_rate: 0.0,
        false_positive_rate: fp,
    }
}

fn delay_only() -> UtilityWeights {
    UtilityWeights {
        alpha: 0.0,
        beta: 0.0,
        gamma: 1.0,
    }
}

fn rate_only() -> UtilityWeights {
    UtilityWeights {
        alpha: 0.0,
        beta: 1.0,
        gamma: 0.0,
    }
}

/// Expand a recipe name into named config variants. Without a recipe the
/// base config runs as a single variant called `run`.
pub fn expand_recipe(
    base: &ExperimentConfig,
    recipe: Option<&str>,
) -> Result<Vec<(String, ExperimentConfig)>, CliError> {
    let Some(name) = recipe else {
        return Ok(vec![("run".to_string(), base.clone())]);
    };

    let variant = |name: &str, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut cfg = base.clone();
        f(&mut cfg);
        (name.to_string(), cfg)
    };

    let regret_variants = |cfg_base: &dyn Fn(&mut ExperimentConfig)| {
        vec![
            variant("prob_ucb_80", &|c| {
                cfg_base(c);
                c.policy = PolicyKind::ProbSleepingUcb;
                c.predictor = predictor(0.8, 1.0, 0.05);
            }),
            variant("prob_ucb_90", &|c| {
                cfg_base(c);
                c.policy = PolicyKind::ProbSleepingUcb;
                c.predictor = predictor(0.9, 1.0, 0.05);
            }),
            variant("sleeping_ucb", &|c| {
                cfg_base(c);
                c.policy = PolicyKind::SleepingUcb;
                c.predictor = predictor(0.8, 1.0, 0.05);
            }),
            variant("perfect", &|c| {
                cfg_base(c);
                c.policy = PolicyKind::ProbSleepingUcb;
                c.predictor = PredictorConfig::PERFECT;
            }),
            variant("random", &|c| {
                cfg_base(c);
                c.policy = PolicyKind::Random;
                c.predictor = predictor(0.8, 1.0, 0.05);
            }),
        ]
    };

    let psi_sweep = |psis: &[f64], cfg_base: &dyn Fn(&mut ExperimentConfig)| {
        let mut out: Vec<(String, ExperimentConfig)> = psis
            .iter()
            .map(|&psi| {
                variant(&format!("psi_{psi}"), &|c| {
                    cfg_base(c);
                    c.policy = PolicyKind::ProbSleepingUcb;
                    c.predictor = PredictorConfig::PERFECT;
                    c.psi = psi;
                })
            })
            .collect();
        out.push(variant("random", &|c| {
            cfg_base(c);
            c.policy = PolicyKind::Random;
            c.predictor = PredictorConfig::PERFECT;
        }));
        out
    };

    let delay_base = |gompertz: GompertzParams, deadline_max: f64| {
        move |c: &mut ExperimentConfig| {
            c.reward_mode = RewardMode::Physical;
            c.weights = delay_only();
            c.gompertz = gompertz;
            c.traffic.deadline_min_ms = 1.0;
            c.traffic.deadline_max_ms = deadline_max;
        }
    };

    let multi = |c: &mut ExperimentConfig| {
        c.population = 500;
        c.k_active = 50;
        c.grants_per_slot = 20;
    };

    Ok(match name {
        // Single-grant regret: probabilistic weighting vs plain, perfect, random.
        "fig3" => regret_variants(&|c| c.reward_mode = RewardMode::Synthetic),
        // Mean tolerable delay of the scheduled device vs a random scheduler.
        "fig4" => vec![
            variant("sleeping_mab", &|c| {
                delay_base(
                    GompertzParams {
                        a: 1.0,
                        b: 13.0,
                        c: 0.025,
                    },
                    300.0,
                )(c);
                c.policy = PolicyKind::ProbSleepingUcb;
                c.predictor = PredictorConfig::PERFECT;
            }),
            variant("random", &|c| {
                delay_base(
                    GompertzParams {
                        a: 1.0,
                        b: 13.0,
                        c: 0.025,
                    },
                    300.0,
                )(c);
                c.policy = PolicyKind::Random;
                c.predictor = PredictorConfig::PERFECT;
            }),
        ],
        // Delay scatter under increasing exploration strength.
        "fig5" => psi_sweep(
            &[1.0, 6.0, 16.0],
            &delay_base(
                GompertzParams {
                    a: 1.0,
                    b: 7.0,
                    c: 0.07,
                },
                100.0,
            ),
        ),
        // Throughput scatter / average sum-rate under exploration strength.
        "fig6" | "fig7" => psi_sweep(&[0.5, 2.0, 4.0], &|c: &mut ExperimentConfig| {
            c.reward_mode = RewardMode::Physical;
            c.weights = rate_only();
        }),
        // Multi-grant regret at 500 devices, 50 active, 20 grants.
        "fig8" => regret_variants(&|c| {
            c.reward_mode = RewardMode::Synthetic;
            multi(c);
        }),
        // Multi-grant delay scatter.
        "fig9" => vec![
            variant("sleeping_mab", &|c| {
                delay_base(
                    GompertzParams {
                        a: 1.0,
                        b: 7.0,
                        c: 0.07,
                    },
                    100.0,
                )(c);
                multi(c);
                c.policy = PolicyKind::ProbSleepingUcb;
                c.predictor = PredictorConfig::PERFECT;
            }),
            variant("random", &|c| {
                delay_base(
                    GompertzParams {
                        a: 1.0,
                        b: 7.0,
                        c: 0.07,
                    },
                    100.0,
                )(c);
                multi(c);
                c.policy = PolicyKind::Random;
                c.predictor = PredictorConfig::PERFECT;
            }),
        ],
        other => return Err(CliError::UnknownRecipe(other.to_string())),
    })
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

fn join_ids(ids: impl Iterator<Item = u32>) -> String {
    ids.map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

fn join_floats(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt_float).collect::<Vec<_>>().join(";")
}

fn trace_csv(trace: &ExperimentTrace) -> String {
    let mut out =
        String::from("slot,selected_ids,rewards,oracle_ids,oracle_reward,deadlines_ms,rates_bps\n");
    for r in &trace.records {
        let deadlines = r
            .plays
            .iter()
            .map(|p| p.deadline_ms.map(fmt_float).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.slot,
            join_ids(r.plays.iter().map(|p| p.id.0)),
            join_floats(r.plays.iter().map(|p| p.reward)),
            join_ids(r.oracle_ids.iter().map(|i| i.0)),
            fmt_float(r.oracle_reward),
            deadlines,
            join_floats(r.plays.iter().map(|p| p.rate_bps)),
        ));
    }
    out
}

fn regret_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("slot,mean_regret,stderr\n");
    for (slot, (mean, stderr)) in series.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            slot,
            fmt_float(*mean),
            fmt_float(*stderr)
        ));
    }
    out
}

fn scatter_csv(points: &[(u64, f64)]) -> String {
    let mut out = String::from("slot,value\n");
    for (slot, value) in points {
        out.push_str(&format!("{},{}\n", slot, fmt_float(*value)));
    }
    out
}

fn write_file(path: &Path, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    written.push(path.to_path_buf());
    fs::write(path, contents).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Variant execution
// ---------------------------------------------------------------------------

/// Aggregated result of one variant's replications.
#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub name: String,
    pub replications: u32,
    pub final_regret_mean: f64,
    /// Standard error over replications; `None` for a single replication.
    pub final_regret_stderr: Option<f64>,
    pub mean_selected_deadline_ms: f64,
    pub mean_active_deadline_ms: f64,
    pub mean_sum_rate_bps: f64,
    pub mean_e1: f64,
    pub mean_e2: f64,
    pub miss_count: u64,
    pub false_positive_count: u64,
    /// Closed-form bound evaluated for this variant's configuration, when the
    /// weighted arm values admit it.
    pub theoretical_bound: Option<f64>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Bound inputs for a config: per-arm activity probability fixed at the
/// predictor interval midpoint, error rates from the config.
pub fn bound_for(exp: &Experiment) -> Option<f64> {
    let cfg = exp.config();
    let p_mid = (cfg.predictor.prob_lo + cfg.predictor.prob_hi) / 2.0;
    let probs = vec![p_mid; exp.true_means().len()];
    theoretical_regret_bound(
        exp.true_means(),
        &probs,
        cfg.psi,
        cfg.horizon,
        cfg.bound_f_e1,
        cfg.bound_f_e2,
    )
    .ok()
}

struct Replication {
    regret: Vec<f64>,
    summary: TraceSummary,
}

fn run_variant(
    name: &str,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<VariantOutcome, CliError> {
    let exp = Experiment::prepare(cfg.clone())?;
    let reps = cfg.replications;

    // Register every artifact path up front so a failed run cleans up fully.
    let rep_path = |rep: u32| out_dir.join(format!("{name}_trace_rep{rep:03}.csv"));
    for rep in 0..reps {
        written.push(rep_path(rep));
    }
    written.push(out_dir.join(format!("{name}_delay_scatter.csv")));
    written.push(out_dir.join(format!("{name}_throughput_scatter.csv")));

    let results: Result<Vec<Replication>, CliError> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let trace = exp.run_replication(u64::from(rep));
            fs::write(rep_path(rep), trace_csv(&trace)).map_err(io_err(&rep_path(rep)))?;
            if rep == 0 {
                let delays = delay_stats(&trace.records);
                let throughput = throughput_stats(&trace.records);
                let d_path = out_dir.join(format!("{name}_delay_scatter.csv"));
                fs::write(&d_path, scatter_csv(&delays.scatter)).map_err(io_err(&d_path))?;
                let t_path = out_dir.join(format!("{name}_throughput_scatter.csv"));
                fs::write(&t_path, scatter_csv(&throughput.scatter)).map_err(io_err(&t_path))?;
            }
            Ok(Replication {
                regret: trace.cumulative_regret,
                summary: trace.summary,
            })
        })
        .collect();
    let results = results?;

    // Aggregate the regret curve slot by slot, in replication order.
    let horizon = cfg.horizon as usize;
    let mut sums = vec![0.0f64; horizon];
    let mut sq_sums = vec![0.0f64; horizon];
    for rep in &results {
        for (i, &r) in rep.regret.iter().enumerate() {
            sums[i] += r;
            sq_sums[i] += r * r;
        }
    }
    let n = f64::from(reps);
    let series: Vec<(f64, f64)> = (0..horizon)
        .map(|i| {
            let mean = sums[i] / n;
            let stderr = if reps > 1 {
                let var = (sq_sums[i] - sums[i] * sums[i] / n).max(0.0) / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            (mean, stderr)
        })
        .collect();
    write_file(
        &out_dir.join(format!("{name}_regret.csv")),
        &regret_csv(&series),
        written,
    )?;

    let finals: Vec<f64> = results.iter().map(|r| r.summary.final_regret).collect();
    let (final_mean, final_stderr) = mean_and_stderr(&finals);
    let avg =
        |f: &dyn Fn(&TraceSummary) -> f64| results.iter().map(|r| f(&r.summary)).sum::<f64>() / n;
    Ok(VariantOutcome {
        name: name.to_string(),
        replications: reps,
        final_regret_mean: final_mean,
        final_regret_stderr: final_stderr,
        mean_selected_deadline_ms: avg(&|s| s.mean_selected_deadline_ms),
        mean_active_deadline_ms: avg(&|s| s.mean_active_deadline_ms),
        mean_sum_rate_bps: avg(&|s| s.mean_sum_rate_bps),
        mean_e1: avg(&|s| s.prediction_errors.mean_e1),
        mean_e2: avg(&|s| s.prediction_errors.mean_e2),
        miss_count: results
            .iter()
            .map(|r| r.summary.prediction_errors.miss_count)
            .sum::<u64>()
            / u64::from(reps),
        false_positive_count: results
            .iter()
            .map(|r| r.summary.prediction_errors.false_positive_count)
            .sum::<u64>()
            / u64::from(reps),
        theoretical_bound: bound_for(&exp),
    })
}

/// Render the summary table for a set of variant outcomes.
pub fn emit_summary(seed: u64, horizon: u64, outcomes: &[VariantOutcome]) -> String {
    let mut out = String::new();
    out.push_str(&format!("seed = {seed}, horizon = {horizon} slots\n"));
    out.push_str(&format!(
        "{:<16} {:>5} {:>14} {:>10} {:>13} {:>13} {:>14} {:>8} {:>8} {:>7} {:>7} {:>14}\n",
        "variant",
        "reps",
        "final_regret",
        "stderr",
        "sel_delay_ms",
        "act_delay_ms",
        "sum_rate_bps",
        "e1",
        "e2",
        "miss",
        "fp",
        "bound"
    ));
    for o in outcomes {
        out.push_str(&format!(
            "{:<16} {:>5} {:>14.3} {:>10} {:>13.3} {:>13.3} {:>14.4e} {:>8.4} {:>8.4} {:>7} {:>7} {:>14}\n",
            o.name,
            o.replications,
            o.final_regret_mean,
            o.final_regret_stderr.map(|s| format!("{s:.3}")).unwrap_or_default(),
            o.mean_selected_deadline_ms,
            o.mean_active_deadline_ms,
            o.mean_sum_rate_bps,
            o.mean_e1,
            o.mean_e2,
            o.miss_count,
            o.false_positive_count,
            o.theoretical_bound.map(|b| format!("{b:.3e}")).unwrap_or_else(|| "n/a".into()),
        ));
    }
    out
}

/// Execute a manifest: run every variant, write all artifacts, and return the
/// summary text. On failure all files created by this run are removed.
pub fn run_command(manifest: &RunManifest) -> Result<String, CliError> {
    let text = fs::read_to_string(&manifest.config_path).map_err(io_err(&manifest.config_path))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = manifest.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = manifest.replications {
        cfg.replications = reps;
    }
    cfg.validate()?;
    let variants = expand_recipe(&cfg, manifest.recipe.as_deref())?;

    fs::create_dir_all(&manifest.out_dir).map_err(io_err(&manifest.out_dir))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut outcomes = Vec::new();
        for (name, vcfg) in &variants {
            eprintln!(
                "running variant '{name}' ({} replications)...",
                vcfg.replications
            );
            outcomes.push(run_variant(name, vcfg, &manifest.out_dir, &mut written)?);
        }
        let summary = emit_summary(cfg.seed, cfg.horizon, &outcomes);
        write_file(
            &manifest.out_dir.join("summary.txt"),
            &summary,
            &mut written,
        )?;
        Ok(summary)
    })();

    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}
