use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hapnav_core::cloth::{io::write_mesh, probe_patch, replay_force_limited, step_cloth, ColliderMotion, ProbeProtocol};
use hapnav_core::config::Config;
use hapnav_core::dressing::{
    friction_sweep, make_baseline1, run_campaign, run_trial, summary_csv_row, sweep_csv, sweep_detail_csv, trial_seed, trials_csv_rows,
    DressingController, TaskSpec, SUMMARY_HEADER, TRIALS_HEADER,
};
use hapnav_core::error::{ConfigError, TaskError};
use hapnav_core::funnel_env::CurriculumStage;
use hapnav_core::policy::PolicyParams;
use hapnav_core::seed;
use hapnav_core::trpo::{checkpoint_dir, curve_to_csv, evaluate, TrainConfig, Trainer, CURVE_FILE, POLICY_FILE};

use crate::run::{create_run_dir, use_run_dir, write_manifest, write_text};
use crate::{merged_config, CliError, Command};

/// Where a command wrote its results, plus the one-line summary it printed.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub run_dir: PathBuf,
    pub summary: String,
}

pub const DEFAULT_BASELINE_SPEED: f64 = 0.25;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SWEEP_TRIALS: usize = 25;
pub const DEFAULT_COEFFICIENTS: usize = 26;
pub const DEFAULT_MAX_FRICTION: f64 = 2.0;
pub const DEFAULT_EPISODES: usize = 100;
pub const DEFAULT_REPLAY_DURATION: f64 = 10.0;

pub const EVAL_HEADER: &str = "episodes,success_rate,mean_return,mean_len,penetrations";
pub const CALIBRATION_HEADER: &str = "speed,tear_force,peak_force";
pub const TRAJECTORY_HEADER: &str = "time,phase,leading_x,leading_y,leading_z,target_x,target_y,target_z,target_arc,max_force_ratio,max_sphere";

/// Validated work for one command; nothing has touched the filesystem yet.
enum Plan {
    Train(TrainConfig),
    Eval { train: TrainConfig, policy: PathBuf, episodes: usize, stage: CurriculumStage },
    Task { task: TaskSpec, controller: String, policy: Option<PathBuf>, speed: f64, trials: usize, trajectory: Option<usize> },
    Sweep { task: TaskSpec, proposed: PathBuf, baseline2: PathBuf, speed: f64, max_friction: f64, coefficients: usize, trials: usize },
    Calibrate { task: TaskSpec, protocol: ProbeProtocol, replay: f64 },
    Export { task: TaskSpec, settle: f64 },
}

fn task_spec(cfg: &Config, base_dir: &Path) -> Result<TaskSpec, CliError> {
    let base = if cfg.raw("task.kind") == Some("sleeve") { TaskSpec::sleeve() } else { TaskSpec::tube() };
    let mut t = TaskSpec::from_config(cfg, &base)?;
    t.resolve_paths(base_dir);
    Ok(t)
}

fn path_key(cfg: &Config, key: &str) -> Result<PathBuf, ConfigError> {
    cfg.require::<String>(key).map(PathBuf::from)
}

fn plan(cmd: &Command, cfg: &Config, base_dir: &Path) -> Result<(Plan, Config), CliError> {
    cfg.touch_prefix("manifest");
    let mut eff = Config::new();
    let plan = match cmd {
        Command::Train { .. } => {
            let tc = TrainConfig::from_config(cfg)?;
            cfg.reject_unused()?;
            tc.validate()?;
            tc.write_config(&mut eff);
            Plan::Train(tc)
        }
        Command::EvalFunnel { .. } => {
            let train = TrainConfig::from_config(cfg)?;
            let policy = path_key(cfg, "run.policy")?;
            let episodes = cfg.get_or("run.episodes", DEFAULT_EPISODES)?;
            let stage = cfg.get_or("run.stage", train.stage_at(train.iterations.saturating_sub(1)))?;
            cfg.reject_unused()?;
            train.validate()?;
            train.write_config(&mut eff);
            eff.set("run.policy", policy.display());
            eff.set("run.episodes", episodes);
            eff.set("run.stage", stage);
            Plan::Eval { train, policy, episodes, stage }
        }
        Command::RunTask { .. } => {
            let task = task_spec(cfg, base_dir)?;
            let controller = cfg.get_or("run.controller", "proposed".to_string())?;
            let policy = match controller.as_str() {
                "proposed" | "baseline2" => Some(path_key(cfg, "run.policy")?),
                "baseline1" => None,
                other => return Err(TaskError::Invalid(format!("unknown controller `{other}`")).into()),
            };
            let speed = cfg.get_or("run.baseline_speed", DEFAULT_BASELINE_SPEED)?;
            let trials = cfg.get_or("run.trials", DEFAULT_TRIALS)?;
            let trajectory: Option<usize> = cfg.get("run.trajectory")?;
            cfg.reject_unused()?;
            task.validate()?;
            task.write_config(&mut eff);
            eff.set("run.controller", &controller);
            if let Some(p) = &policy {
                eff.set("run.policy", p.display());
            }
            eff.set("run.baseline_speed", speed);
            eff.set("run.trials", trials);
            if let Some(t) = trajectory {
                eff.set("run.trajectory", t);
            }
            Plan::Task { task, controller, policy, speed, trials, trajectory }
        }
        Command::SweepFriction { .. } => {
            let task = task_spec(cfg, base_dir)?;
            let proposed = path_key(cfg, "run.proposed_policy")?;
            let baseline2 = path_key(cfg, "run.baseline2_policy")?;
            let speed = cfg.get_or("run.baseline_speed", DEFAULT_BASELINE_SPEED)?;
            let max_friction = cfg.get_or("run.max_friction", DEFAULT_MAX_FRICTION)?;
            let coefficients = cfg.get_or("run.coefficients", DEFAULT_COEFFICIENTS)?;
            let trials = cfg.get_or("run.trials", DEFAULT_SWEEP_TRIALS)?;
            cfg.reject_unused()?;
            task.validate()?;
            task.write_config(&mut eff);
            eff.set("run.proposed_policy", proposed.display());
            eff.set("run.baseline2_policy", baseline2.display());
            eff.set("run.baseline_speed", speed);
            eff.set("run.max_friction", max_friction);
            eff.set("run.coefficients", coefficients);
            eff.set("run.trials", trials);
            Plan::Sweep { task, proposed, baseline2, speed, max_friction, coefficients, trials }
        }
        Command::CalibrateFmax { .. } => {
            let task = task_spec(cfg, base_dir)?;
            let protocol = ProbeProtocol::from_config(cfg, &ProbeProtocol::default())?;
            let replay = cfg.get_or("run.replay_duration", DEFAULT_REPLAY_DURATION)?;
            cfg.reject_unused()?;
            task.validate()?;
            task.write_config(&mut eff);
            protocol.write_config(&mut eff);
            eff.set("run.replay_duration", replay);
            Plan::Calibrate { task, protocol, replay }
        }
        Command::ExportMesh { .. } => {
            let task = task_spec(cfg, base_dir)?;
            let settle: f64 = cfg.get_or("run.settle", 0.0)?;
            cfg.reject_unused()?;
            task.validate()?;
            if !(settle >= 0.0 && settle.is_finite()) {
                return Err(TaskError::Invalid(format!("settle time must be non-negative, got {settle}")).into());
            }
            task.write_config(&mut eff);
            eff.set("run.settle", settle);
            Plan::Export { task, settle }
        }
    };
    Ok((plan, eff))
}

fn seed_of(plan: &Plan) -> u64 {
    match plan {
        Plan::Train(t) | Plan::Eval { train: t, .. } => t.seed,
        Plan::Task { task, .. } | Plan::Sweep { task, .. } | Plan::Calibrate { task, .. } | Plan::Export { task, .. } => task.seed,
    }
}

/// Runs one parsed command end to end.
pub fn execute(cmd: &Command) -> Result<Outputs, CliError> {
    let (cfg, base_dir) = merged_config(cmd)?;
    let (plan, eff) = plan(cmd, &cfg, &base_dir)?;
    let common = cmd.common();
    let dir = match &common.run_dir {
        Some(d) => use_run_dir(d)?,
        None => create_run_dir(&common.out, cmd.name(), seed_of(&plan))?,
    };
    write_manifest(&dir, cmd.name(), &eff)?;
    let summary = match plan {
        Plan::Train(tc) => train(&dir, tc)?,
        Plan::Eval { train, policy, episodes, stage } => eval(&dir, &train, &policy, episodes, stage)?,
        Plan::Task { task, controller, policy, speed, trials, trajectory } => {
            let ctl = load_controller(&controller, policy.as_deref(), speed)?;
            task_campaign(&dir, &task, &ctl, trials, trajectory)?
        }
        Plan::Sweep { task, proposed, baseline2, speed, max_friction, coefficients, trials } => {
            let ctls = [
                load_controller("proposed", Some(&proposed), speed)?,
                load_controller("baseline1", None, speed)?,
                load_controller("baseline2", Some(&baseline2), speed)?,
            ];
            sweep(&dir, &task, &ctls, max_friction, coefficients, trials)?
        }
        Plan::Calibrate { task, protocol, replay } => calibrate(&dir, &task, &protocol, replay)?,
        Plan::Export { task, settle } => export(&dir, &task, settle)?,
    };
    println!("{summary}");
    Ok(Outputs { run_dir: dir, summary })
}

fn load_controller(name: &str, policy: Option<&Path>, speed: f64) -> Result<DressingController, CliError> {
    Ok(match (name, policy) {
        ("proposed", Some(p)) => DressingController::Proposed(PolicyParams::load(p)?),
        ("baseline2", Some(p)) => DressingController::Baseline2(PolicyParams::load(p)?),
        _ => make_baseline1(speed)?,
    })
}

fn train(dir: &Path, tc: TrainConfig) -> Result<String, CliError> {
    let mut trainer = Trainer::new(tc)?;
    let ckpt = checkpoint_dir(dir);
    let total = trainer.config.iterations;
    while !trainer.is_finished() {
        trainer.run(Some(&ckpt), Some(1))?;
        if let Some(r) = trainer.curve.last() {
            log::info!("iteration {}/{total}: return {:.3}, success {:.3}", r.iteration + 1, r.mean_return, r.success_rate);
        }
    }
    write_text(&dir.join(CURVE_FILE), &curve_to_csv(&trainer.curve))?;
    trainer.policy.save(&dir.join(POLICY_FILE))?;
    let last = trainer.curve.last().expect("at least one iteration");
    Ok(format!("trained {total} iterations: mean return {:.4}, success rate {:.4}", last.mean_return, last.success_rate))
}

fn eval(dir: &Path, train: &TrainConfig, policy: &Path, episodes: usize, stage: CurriculumStage) -> Result<String, CliError> {
    let policy = PolicyParams::load(policy)?;
    let mut env = train.env_at(0).with_stage(stage);
    env.max_steps = train.max_rollout_len;
    let s = evaluate(&policy, &env, episodes, train.seed)?;
    let row = format!("{},{:.6},{:.6},{:.6},{}", s.episodes, s.success_rate, s.mean_return, s.mean_len, s.penetrations);
    write_text(&dir.join("eval.csv"), &format!("{EVAL_HEADER}\n{row}\n"))?;
    Ok(format!("success_rate={:.4} mean_return={:.4}", s.success_rate, s.mean_return))
}

fn task_campaign(dir: &Path, task: &TaskSpec, ctl: &DressingController, trials: usize, trajectory: Option<usize>) -> Result<String, CliError> {
    let c = run_campaign(task, ctl, trials)?;
    let mut rows = format!("{TRIALS_HEADER}\n");
    trials_csv_rows(&c, &mut rows);
    write_text(&dir.join("trials.csv"), &rows)?;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    summary_csv_row(&c, &mut summary);
    write_text(&dir.join("summary.csv"), &summary)?;
    if let Some(i) = trajectory {
        let rec = run_trial(task, ctl, trial_seed(task.seed, i), true)?;
        let mut s = format!("{TRAJECTORY_HEADER}\n");
        for t in rec.trajectory.iter().flatten() {
            let (l, g) = (t.leading, t.target);
            let _ = writeln!(
                s,
                "{:.4},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                t.time,
                t.phase.as_str(),
                l.x,
                l.y,
                l.z,
                g.x,
                g.y,
                g.z,
                t.target_arc,
                t.max_force_ratio,
                t.max_sphere
            );
        }
        write_text(&dir.join("trajectory.csv"), &s)?;
    }
    let tc = c.mean_tc().map_or_else(|| "N/A".to_string(), |v| format!("{v:.3}"));
    Ok(format!(
        "{} {}: success {:.3}, torn {:.3}, timeout {:.3}, mean TC {tc}",
        c.task,
        c.controller,
        c.success_rate(),
        c.torn_rate(),
        c.timeout_rate()
    ))
}

fn sweep(dir: &Path, task: &TaskSpec, ctls: &[DressingController], max_friction: f64, n: usize, trials: usize) -> Result<String, CliError> {
    let results = friction_sweep(task, ctls, max_friction, n, trials)?;
    write_text(&dir.join("sweep.csv"), &sweep_csv(&results))?;
    write_text(&dir.join("sweep_detail.csv"), &sweep_detail_csv(&results))?;
    let mut rows = format!("{TRIALS_HEADER}\n");
    for r in &results {
        for c in &r.campaigns {
            trials_csv_rows(c, &mut rows);
        }
    }
    write_text(&dir.join("trials.csv"), &rows)?;
    let parts: Vec<String> = results
        .iter()
        .map(|r| {
            let mean = r.points.iter().map(|p| p.success_rate).sum::<f64>() / r.points.len() as f64;
            format!("{} mean success {mean:.3}", r.controller)
        })
        .collect();
    Ok(format!("swept {n} coefficients in [0, {max_friction}]: {}", parts.join(", ")))
}

fn calibrate(dir: &Path, task: &TaskSpec, protocol: &ProbeProtocol, replay: f64) -> Result<String, CliError> {
    let cal = task.calibrate_fmax(protocol)?;
    let mut csv = format!("{CALIBRATION_HEADER}\n");
    for r in &cal.runs {
        let tear = r.tear_force.map_or_else(|| "N/A".to_string(), |f| format!("{f:.6}"));
        let _ = writeln!(csv, "{},{tear},{:.6}", r.speed, r.peak_force);
    }
    write_text(&dir.join("calibration.csv"), &csv)?;
    let patch = probe_patch(protocol, &task.material())?;
    let rep = replay_force_limited(&patch, &task.cloth, protocol, 0.9 * cal.fmax, replay)?;
    let mut out = Config::new();
    out.set("cloth.fmax", format!("{:.6}", cal.fmax));
    write_text(&dir.join("fmax.cfg"), &out.to_text())?;
    if cal.hit_ceiling {
        log::warn!("probe never tore the patch; reporting the force ceiling");
    }
    Ok(format!(
        "fmax={:.6} hit_ceiling={} replay_0.9fmax_tore={} replay_max_strain={:.4}",
        cal.fmax, cal.hit_ceiling, rep.tore, rep.max_strain
    ))
}

fn export(dir: &Path, task: &TaskSpec, settle: f64) -> Result<String, CliError> {
    let scene = task.sample_scene(&mut seed::rng(trial_seed(task.seed, 0)))?;
    let mut mesh = scene.garment;
    let chain = &scene.manipulator.chain;
    let fixed: Vec<ColliderMotion> = chain.capsules(&chain.forward_kinematics(&scene.rest)).into_iter().map(ColliderMotion::fixed).collect();
    let steps = (settle / task.cloth.dt).round() as usize;
    for _ in 0..steps {
        step_cloth(&mut mesh, &task.cloth, &fixed)?;
    }
    let obj = dir.join("garment.obj");
    write_mesh(&mesh, &obj)?;
    let _ = fs::metadata(&obj).map_err(|e| CliError::io(&obj, e))?;
    Ok(format!("wrote {} vertices, {} triangles after {steps} settle steps", mesh.num_vertices(), mesh.triangles.len()))
}
