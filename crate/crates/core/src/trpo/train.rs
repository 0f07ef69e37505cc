use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::gae::{compute_gae, normalize};
use super::rollout::{collect_rollouts, run_episode, Greedy, Stochastic};
use super::update::{trpo_update, TrpoSettings, UpdateDiagnostics};
use super::value::{ValueFitSettings, ValueFunction};
use crate::config::Config;
use crate::error::{ConfigError, TrainError};
use crate::funnel_env::{CurriculumStage, EnvConfig, FunnelEnv, Terminal};
use crate::par;
use crate::policy::{load_mlp, save_mlp, value_layer_sizes, PolicyParams, DEFAULT_HIDDEN};
use crate::seed::{self, stream};

pub const CURVE_HEADER: &str = "iteration,meanReturn,successRate,meanEpLen,kl,lsDepth";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub steps_per_iteration: usize,
    pub max_rollout_len: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub kl_target: f64,
    pub cg_iterations: usize,
    pub cg_damping: f64,
    pub line_search_backtracks: usize,
    pub curriculum_switch_iteration: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub value_fit: ValueFitSettings,
    /// Checkpoint period in iterations (0 disables periodic checkpoints).
    pub checkpoint_every: usize,
    pub env: EnvConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            steps_per_iteration: 4000,
            max_rollout_len: 1000,
            gamma: 0.995,
            lambda: 0.97,
            kl_target: 0.01,
            cg_iterations: 10,
            cg_damping: 0.1,
            line_search_backtracks: 10,
            curriculum_switch_iteration: 250,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            value_fit: ValueFitSettings::default(),
            checkpoint_every: 50,
            env: EnvConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.kl_target > 0.0) {
            return bad("kl_target must be positive");
        }
        if self.iterations == 0 || self.steps_per_iteration == 0 || self.max_rollout_len == 0 {
            return bad("iterations, steps_per_iteration and max_rollout_len must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if self.value_fit.minibatch == 0 {
            return bad("value minibatch must be positive");
        }
        self.env.validate().map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }

    pub fn trpo_settings(&self) -> TrpoSettings {
        TrpoSettings {
            kl_target: self.kl_target,
            cg_iterations: self.cg_iterations,
            cg_damping: self.cg_damping,
            line_search_backtracks: self.line_search_backtracks,
        }
    }

    pub fn stage_at(&self, iteration: usize) -> CurriculumStage {
        if iteration < self.curriculum_switch_iteration {
            CurriculumStage::Shallow
        } else {
            CurriculumStage::Wide
        }
    }

    /// Environment used at `iteration`.
    pub fn env_at(&self, iteration: usize) -> EnvConfig {
        let mut e = self.env.with_stage(self.stage_at(iteration));
        e.max_steps = self.max_rollout_len;
        e
    }

    /// Reads `train.*`, `env.*` and `seed`, defaulting missing keys.
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let d = Self::default();
        let hidden = match cfg.get_list("train.hidden") {
            Some(items) => items
                .iter()
                .map(|s| s.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ConfigError::Value { key: "train.hidden".into(), detail: e.to_string() })?,
            None => d.hidden.clone(),
        };
        Ok(Self {
            iterations: cfg.get_or("train.iterations", d.iterations)?,
            steps_per_iteration: cfg.get_or("train.steps_per_iteration", d.steps_per_iteration)?,
            max_rollout_len: cfg.get_or("train.max_rollout_len", d.max_rollout_len)?,
            gamma: cfg.get_or("train.gamma", d.gamma)?,
            lambda: cfg.get_or("train.lambda", d.lambda)?,
            kl_target: cfg.get_or("train.kl_target", d.kl_target)?,
            cg_iterations: cfg.get_or("train.cg_iterations", d.cg_iterations)?,
            cg_damping: cfg.get_or("train.cg_damping", d.cg_damping)?,
            line_search_backtracks: cfg.get_or("train.line_search_backtracks", d.line_search_backtracks)?,
            curriculum_switch_iteration: cfg.get_or("train.curriculum_switch_iteration", d.curriculum_switch_iteration)?,
            seed: cfg.get_or("seed", d.seed)?,
            hidden,
            value_fit: ValueFitSettings {
                epochs: cfg.get_or("train.value_epochs", d.value_fit.epochs)?,
                minibatch: cfg.get_or("train.value_minibatch", d.value_fit.minibatch)?,
                learning_rate: cfg.get_or("train.value_lr", d.value_fit.learning_rate)?,
            },
            checkpoint_every: cfg.get_or("train.checkpoint_every", d.checkpoint_every)?,
            env: EnvConfig::from_config(cfg, &d.env)?,
        })
    }

    pub fn write_config(&self, cfg: &mut Config) {
        cfg.set("train.iterations", self.iterations);
        cfg.set("train.steps_per_iteration", self.steps_per_iteration);
        cfg.set("train.max_rollout_len", self.max_rollout_len);
        cfg.set("train.gamma", self.gamma);
        cfg.set("train.lambda", self.lambda);
        cfg.set("train.kl_target", self.kl_target);
        cfg.set("train.cg_iterations", self.cg_iterations);
        cfg.set("train.cg_damping", self.cg_damping);
        cfg.set("train.line_search_backtracks", self.line_search_backtracks);
        cfg.set("train.curriculum_switch_iteration", self.curriculum_switch_iteration);
        cfg.set("seed", self.seed);
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        cfg.set("train.hidden", hidden.join(","));
        cfg.set("train.value_epochs", self.value_fit.epochs);
        cfg.set("train.value_minibatch", self.value_fit.minibatch);
        cfg.set("train.value_lr", self.value_fit.learning_rate);
        cfg.set("train.checkpoint_every", self.checkpoint_every);
        self.env.write_config(cfg);
    }
}

/// One learning-curve record.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub mean_ep_len: f64,
    pub kl: f64,
    pub ls_depth: usize,
}

impl CurveRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.mean_return, self.success_rate, self.mean_ep_len, self.kl, self.ls_depth
        )
    }

    pub fn parse_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(Self {
            iteration: f[0].parse().ok()?,
            mean_return: f[1].parse().ok()?,
            success_rate: f[2].parse().ok()?,
            mean_ep_len: f[3].parse().ok()?,
            kl: f[4].parse().ok()?,
            ls_depth: f[5].parse().ok()?,
        })
    }
}

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.to_csv());
    }
    s
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>, TrainError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CURVE_HEADER) {
        return Err(TrainError::Checkpoint("learning curve header missing".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| CurveRow::parse_csv(l).ok_or_else(|| TrainError::Checkpoint(format!("bad curve row: {l}"))))
        .collect()
}

/// Per-iteration summary including the raw update diagnostics.
#[derive(Clone, Debug)]
pub struct IterationReport {
    pub row: CurveRow,
    pub update: UpdateDiagnostics,
    pub value_loss: f64,
    pub stage: CurriculumStage,
}

/// TRPO training state; everything needed to continue is in the checkpoint.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub policy: PolicyParams,
    pub value: ValueFunction,
    /// Number of completed iterations.
    pub iteration: usize,
    pub curve: Vec<CurveRow>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let policy = PolicyParams::init(&config.hidden, &mut seed::rng(seed::derive(config.seed, stream::INIT, 0)));
        let value = ValueFunction::init(&config.hidden, &mut seed::rng(seed::derive(config.seed, stream::INIT, 1)));
        Ok(Self { config, policy, value, iteration: 0, curve: Vec::new() })
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    /// Runs one TRPO iteration.
    pub fn step(&mut self) -> Result<IterationReport, TrainError> {
        let cfg = &self.config;
        let it = self.iteration;
        let stage = cfg.stage_at(it);
        let env = FunnelEnv::new(cfg.env_at(it)).map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        let batch = collect_rollouts(
            &env,
            &Stochastic(&self.policy),
            cfg.steps_per_iteration,
            seed::derive(cfg.seed, stream::ITERATION, it as u64),
        )?;

        // Refresh normalization first so the update and value fit see the same inputs.
        self.policy.normalizer.update(&batch.obs);
        let norm = self.policy.normalizer.clone();
        let values = self.value.predict_batch(&norm, &batch.obs);
        let bootstraps: Vec<f64> = batch
            .terminals
            .iter()
            .zip(&batch.final_obs)
            .map(|(t, o)| if *t == Terminal::MaxSteps { self.value.predict(&norm, o) } else { 0.0 })
            .collect();
        let (mut adv, returns) = compute_gae(&batch.rewards, &values, &batch.episode_ends, &bootstraps, cfg.gamma, cfg.lambda);
        normalize(&mut adv);

        let update = trpo_update(&mut self.policy, &batch.obs, &batch.actions, &adv, &cfg.trpo_settings());
        let mut fit_rng = seed::rng(seed::derive(cfg.seed, stream::VALUE_FIT, it as u64));
        let value_loss = self.value.fit(&norm, &batch.obs, &returns, &cfg.value_fit, &mut fit_rng);

        let ep_returns = batch.episode_returns();
        let row = CurveRow {
            iteration: it,
            mean_return: ep_returns.iter().sum::<f64>() / ep_returns.len() as f64,
            success_rate: batch.success_rate(),
            mean_ep_len: batch.mean_episode_len(),
            kl: update.kl,
            ls_depth: update.ls_depth,
        };
        info!(
            "iter {it} [{stage}] return {:.3} success {:.3} len {:.1} kl {:.2e} ls {} vloss {:.3e}",
            row.mean_return, row.success_rate, row.mean_ep_len, row.kl, row.ls_depth, value_loss
        );
        self.curve.push(row.clone());
        self.iteration += 1;
        Ok(IterationReport { row, update, value_loss, stage })
    }

    /// Trains until `iterations` complete or `stop_after` more iterations have run,
    /// checkpointing into `checkpoint_dir` periodically and at the end.
    pub fn run(&mut self, checkpoint_dir: Option<&Path>, stop_after: Option<usize>) -> Result<(), TrainError> {
        let mut ran = 0;
        while !self.is_finished() && stop_after.map_or(true, |s| ran < s) {
            self.step()?;
            ran += 1;
            if let Some(dir) = checkpoint_dir {
                let every = self.config.checkpoint_every;
                if every > 0 && self.iteration % every == 0 {
                    self.save_checkpoint(dir)?;
                }
            }
        }
        if let Some(dir) = checkpoint_dir {
            self.save_checkpoint(dir)?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<(), TrainError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.policy.save(&dir.join(POLICY_FILE))?;
        save_mlp(&self.value.net, &dir.join(VALUE_FILE))?;
        let curve = dir.join(CURVE_FILE);
        fs::write(&curve, curve_to_csv(&self.curve)).map_err(io_err(&curve))?;
        let mut state = Config::new();
        self.config.write_config(&mut state);
        state.set("checkpoint.iteration", self.iteration);
        // Written last: a checkpoint without state is incomplete.
        let path = dir.join(STATE_FILE);
        fs::write(&path, state.to_text()).map_err(io_err(&path))?;
        Ok(())
    }

    /// Restores a trainer saved by [`Trainer::save_checkpoint`]. The run
    /// configuration comes from the checkpoint itself.
    pub fn resume(dir: &Path) -> Result<Self, TrainError> {
        let state_path = dir.join(STATE_FILE);
        let state = Config::load(&state_path).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        let config = TrainConfig::from_config(&state).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        config.validate()?;
        let iteration: usize =
            state.require("checkpoint.iteration").map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        let mut sizes = vec![crate::funnel_env::OBS_DIM];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(crate::funnel_env::ACT_DIM);
        let policy = PolicyParams::load_with_shape(&dir.join(POLICY_FILE), &sizes)?;
        let net = load_mlp(&dir.join(VALUE_FILE), &value_layer_sizes(&config.hidden))?;
        let curve_path = dir.join(CURVE_FILE);
        let curve = parse_curve_csv(&fs::read_to_string(&curve_path).map_err(io_err(&curve_path))?)?;
        if curve.len() != iteration {
            return Err(TrainError::Checkpoint(format!(
                "curve has {} rows but checkpoint is at iteration {iteration}",
                curve.len()
            )));
        }
        Ok(Self { config, policy, value: ValueFunction { net }, iteration, curve })
    }
}

pub const POLICY_FILE: &str = "policy.bin";
pub const VALUE_FILE: &str = "value.bin";
pub const CURVE_FILE: &str = "learning_curve.csv";
pub const STATE_FILE: &str = "trainer.cfg";

/// Path of the checkpoint directory inside a run directory.
pub fn checkpoint_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("checkpoint")
}

/// Greedy-policy evaluation summary.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_len: f64,
    pub penetrations: usize,
}

/// Evaluates the distribution mean on `episodes` held-out starts drawn from the
/// evaluation seed stream.
pub fn evaluate(policy: &PolicyParams, env: &EnvConfig, episodes: usize, seed: u64) -> Result<EvalSummary, TrainError> {
    let env = FunnelEnv::new(env.clone()).map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let eps = par::try_map_indexed(episodes, |i| {
        run_episode(&env, &Greedy(policy), seed::derive(seed, stream::EVAL, i as u64))
            .map_err(|source| TrainError::Episode { episode: i, source })
    })?;
    let n = eps.len().max(1) as f64;
    Ok(EvalSummary {
        episodes: eps.len(),
        success_rate: eps.iter().filter(|e| e.terminal == Terminal::ReachedTarget).count() as f64 / n,
        mean_return: eps.iter().map(|e| e.total_reward()).sum::<f64>() / n,
        mean_len: eps.iter().map(|e| e.len()).sum::<usize>() as f64 / n,
        penetrations: eps.iter().filter(|e| e.terminal == Terminal::DeepPenetration).count(),
    })
}
