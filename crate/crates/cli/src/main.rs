use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ringhold::config::RunConfig;
use ringhold::h2_synth::h2_controller;
use ringhold::holdlimit::{
    controller_for, disturbance, human_error_sweep, joint_scenario_sweep, sensitivity_sweep, sim_hold_limit_for,
    system_for, HumanErrorKind, JointScenario, SweepParam, SweepSpec,
};
use ringhold::io::{
    fmt_f64, format_controller, human_error_csv, key_value_csv, parse_controller, provenance_header, sweep_csv,
    trajectory_csv, witness_csv, ControllerFile,
};
use ringhold::lmi_cert::{lk_feasible, lk_hinf_feasible, lk_hold_limit, lk_problem, lk_synthesis_problem, lk_synthesize};
use ringhold::lyapunov::lyapunov_hold_bound;
use ringhold::report::{replicate_paper, ReplicateGrids};
use ringhold::ring_model::{reduce, Controller, SystemMatrices};
use ringhold::sdp::{FeasibilityMode, LmiCheck};
use ringhold::simulator::{classify, run_ensemble, simulate, DisturbanceKind};
use ringhold::Error;

#[derive(Parser)]
#[command(name = "ringhold", version, about = "Hold-length analysis for guided ring-road traffic")]
struct Cli {
    /// Worker threads for seed and row parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file, or `default`.
    #[arg(long, default_value = "default")]
    config: String,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ControllerArg {
    /// Controller file; defaults to the H2 controller of the config scaled by its k_mult.
    #[arg(long)]
    controller: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorKindArg {
    Nonvanishing,
    Vanishing,
    Delay,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    First,
    Max,
}

#[derive(Args, Clone)]
struct DisturbanceArg {
    /// Human-error model applied during simulation.
    #[arg(long, value_enum)]
    error: Option<ErrorKindArg>,

    /// Magnitude for `--error` (d_nv, d_v or Sigma).
    #[arg(long, default_value_t = 0.0)]
    magnitude: f64,
}

impl DisturbanceArg {
    fn kind(&self) -> DisturbanceKind {
        match self.error {
            None => DisturbanceKind::None,
            Some(ErrorKindArg::Nonvanishing) => DisturbanceKind::Nonvanishing(self.magnitude),
            Some(ErrorKindArg::Vanishing) => DisturbanceKind::Vanishing(self.magnitude),
            Some(ErrorKindArg::Delay) => DisturbanceKind::ReactionDelay(self.magnitude),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seed and classify the full seed ensemble at a hold length.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ctrl: ControllerArg,
        #[command(flatten)]
        dist: DisturbanceArg,
        #[arg(long)]
        delta: f64,
        /// Seed whose trajectory is written.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Empirical hold limit by bisection.
    Holdlimit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ctrl: ControllerArg,
        #[command(flatten)]
        dist: DisturbanceArg,
    },
    /// Lyapunov hold bound.
    CertifyLyap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ctrl: ControllerArg,
    },
    /// LK feasibility at one hold length, or the LK hold limit with `--search`.
    CertifyLk {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ctrl: ControllerArg,
        #[arg(long, required_unless_present = "search")]
        delta: Option<f64>,
        #[arg(long)]
        search: bool,
        /// Write the assembled LMI data next to the results.
        #[arg(long)]
        dump_lmi: bool,
    },
    /// LK feasibility with H-infinity attenuation level gamma.
    CertifyHinf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ctrl: ControllerArg,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        dump_lmi: bool,
    },
    /// Continuous H2 state feedback.
    SynthH2 {
        #[command(flatten)]
        common: Common,
    },
    /// LK gain synthesis at an input hold length.
    SynthLk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta_in: f64,
        #[arg(long, value_enum, default_value = "first")]
        mode: ModeArg,
        #[arg(long)]
        dump_lmi: bool,
    },
    /// One-parameter sensitivity sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of L, n, s_st, s_go, v_max, alpha, beta, k_mult, gamma_s, gamma_v.
        #[arg(long)]
        param: String,
        /// Comma-separated values; the shipped grid when omitted.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Seven-scenario joint parameter sweep.
    JointSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Human-error experiments.
    HumanError {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: ErrorKindArg,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Every reference experiment plus a pass/fail summary.
    ReplicatePaper {
        #[command(flatten)]
        common: Common,
    },
}

/// Failure with its exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            e if e.is_numerical() => 3,
            Error::Parse { .. } => 2,
            _ => 1,
        };
        Fail(code, e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail(1, e.to_string())
    }
}

type CmdResult = Result<u8, Fail>;

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    header: String,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self, Fail> {
        let cfg = if common.config == "default" {
            RunConfig::default()
        } else {
            let text = fs::read_to_string(&common.config)
                .map_err(|e| Fail(2, format!("cannot read config {}: {e}", common.config)))?;
            RunConfig::parse(&text).map_err(|e| Fail(2, format!("{}: {e}", common.config)))?
        };
        fs::create_dir_all(&common.out)?;
        let header = provenance_header(&cfg.hash(), cfg.sim.rng_seed);
        let ctx = Ctx {
            out: common.out.clone(),
            header,
            cfg,
        };
        ctx.write("config.ini", &ctx.cfg.echo())?;
        Ok(ctx)
    }

    /// Writes `body` under the output directory with the provenance header.
    fn write(&self, name: &str, body: &str) -> Result<PathBuf, Fail> {
        let path = self.out.join(name);
        fs::write(&path, format!("{}{}", self.header, body))?;
        Ok(path)
    }

    fn controller(&self, sys: &SystemMatrices, arg: &ControllerArg) -> Result<Controller, Fail> {
        match &arg.controller {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Fail(2, format!("cannot read controller {}: {e}", p.display())))?;
                let file = parse_controller(&text).map_err(|e| Fail(2, format!("{}: {e}", p.display())))?;
                if file.controller.dim() != sys.dim() {
                    return Err(Fail(
                        2,
                        format!("controller has {} gains, system has {} states", file.controller.dim(), sys.dim()),
                    ));
                }
                Ok(file.controller)
            }
            None => Ok(controller_for(&self.cfg, sys)?),
        }
    }
}

fn checks_csv(checks: &[LmiCheck]) -> String {
    let mut s = String::from("lmi,strict,max_eig\n");
    for c in checks {
        let _ = writeln!(s, "\"{}\",{},{}", c.name, c.strict, fmt_f64(c.max_eig));
    }
    s
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate {
            common,
            ctrl,
            dist,
            delta,
            seed,
        } => {
            let ctx = Ctx::new(&common)?;
            let sys = system_for(&ctx.cfg)?;
            let c = ctx.controller(&sys, &ctrl)?;
            let model = disturbance(&ctx.cfg, dist.kind());
            let traj = simulate(&sys, &c, delta, &model, ctx.cfg.plant, &ctx.cfg.sim, seed)?;
            fs::write(ctx.out.join("trajectory.csv"), trajectory_csv(&traj, &ctx.header))?;
            let runs = run_ensemble(&sys, &c, delta, &model, ctx.cfg.plant, &ctx.cfg.sim)?;
            let v = classify(&runs, &ctx.cfg.sim)?;
            ctx.write(
                "verdict.csv",
                &key_value_csv(
                    &[
                        ("delta", fmt_f64(delta)),
                        ("status", v.status.as_str().into()),
                        ("n_runs", v.n_runs.to_string()),
                        ("n_converged", v.n_converged.to_string()),
                        ("n_collided", v.n_collided.to_string()),
                        ("final_error_norm", fmt_f64(v.final_error_norm)),
                        ("ultimate_bound", fmt_f64(v.ultimate_bound.unwrap_or(f64::NAN))),
                    ],
                    "",
                ),
            )?;
            println!(
                "delta {} s: {} ({}/{} converged, {} collided)",
                fmt_f64(delta),
                v.status.as_str(),
                v.n_converged,
                v.n_runs,
                v.n_collided
            );
            Ok(0)
        }
        Command::Holdlimit { common, ctrl, dist } => {
            let ctx = Ctx::new(&common)?;
            let sys = system_for(&ctx.cfg)?;
            let c = ctx.controller(&sys, &ctrl)?;
            let h = sim_hold_limit_for(&ctx.cfg, &sys, &c, dist.kind())?;
            let mut pairs = vec![
                ("sim_hold_limit", fmt_f64(h.limit)),
                ("unstable_at_floor", h.search.unstable_at_floor.to_string()),
                ("stable_at_ceiling", h.search.stable_at_ceiling.to_string()),
                ("widened_steps", h.widened.to_string()),
                ("probes", h.search.probes.len().to_string()),
            ];
            if let Some(w) = &h.witness {
                fs::write(ctx.out.join("witness.csv"), witness_csv("default", 0.0, w, &ctx.header))?;
                pairs.push(("n_collided_above", w.unstable.n_collided.to_string()));
            }
            ctx.write("holdlimit.csv", &key_value_csv(&pairs, ""))?;
            if h.unstable_at_floor() {
                println!("hold limit 0 s (unstable at the first grid point)");
            } else {
                println!("hold limit {} s", fmt_f64(h.limit));
            }
            Ok(0)
        }
        Command::CertifyLyap { common, ctrl } => {
            let ctx = Ctx::new(&common)?;
            let sys = system_for(&ctx.cfg)?;
            let c = ctx.controller(&sys, &ctrl)?;
            let cert = lyapunov_hold_bound(&sys, &c, None, ctx.cfg.c_prime)?;
            ctx.write(
                "lyapunov.csv",
                &key_value_csv(
                    &[
                        ("delta_bound", fmt_f64(cert.delta_bound)),
                        ("sigma_min_q", fmt_f64(cert.sigma_min_q)),
                        ("sigma_max_p", fmt_f64(cert.sigma_max_p)),
                        ("sigma_max_a", fmt_f64(cert.sigma_max_a)),
                        ("sigma_max_a1", fmt_f64(cert.sigma_max_a1)),
                        ("c_prime", fmt_f64(cert.c_prime)),
                        ("residual", fmt_f64(cert.residual)),
                    ],
                    "",
                ),
            )?;
            println!("Lyapunov hold bound {} s", fmt_f64(cert.delta_bound));
            Ok(0)
        }
        Command::CertifyLk {
            common,
            ctrl,
            delta,
            search,
            dump_lmi,
        } => {
            let ctx = Ctx::new(&common)?;
            let sys = system_for(&ctx.cfg)?;
            let c = ctx.controller(&sys, &ctrl)?;
            let red = reduce(&sys, &c)?;
            let a1 = red.injection();
            if search {
                let g = lk_hold_limit(
                    &red.a,
                    &a1,
                    (ctx.cfg.search_min, ctx.cfg.search_max),
                    ctx.cfg.granularity,
                    &ctx.cfg.sdp,
                )?;
                let mut body = String::from("delta,result\n");
                for p in &g.probes {
                    let _ = writeln!(body, "{},{:?}", fmt_f64(p.delta), p.result);
                }
                ctx.write("lk_probes.csv", &body)?;
                ctx.write(
                    "lk_holdlimit.csv",
                    &key_value_csv(
                        &[
                            ("lk_hold_limit", fmt_f64(g.limit)),
                            ("infeasible_at_floor", g.unstable_at_floor.to_string()),
                            ("feasible_at_ceiling", g.stable_at_ceiling.to_string()),
                            ("numerical_failures", g.failures.to_string()),
                        ],
                        "",
                    ),
                )?;
                println!("LK hold limit {} s", fmt_f64(g.limit));
            }
            if let Some(d) = delta {
                if dump_lmi {
                    let (pr, _) = lk_problem(&red.a, &a1, d, None)?;
                    ctx.write("lmi_dump.txt", &pr.dump(None))?;
                }
                let cert = lk_feasible(&red.a, &a1, d, &ctx.cfg.sdp)?;
                let mut body = key_value_csv(
                    &[
                        ("delta", fmt_f64(d)),
                        ("status", cert.solver_status.as_str().into()),
                        ("t", fmt_f64(cert.t.unwrap_or(f64::NAN))),
                        ("iterations", cert.iterations.to_string()),
                    ],
                    "",
                );
                body.push('\n');
                body.push_str(&checks_csv(&cert.checks));
                ctx.write("lk.csv", &body)?;
                println!("LK LMIs at delta {} s: {}", fmt_f64(d), cert.solver_status.as_str());
                if cert.solver_status == ringhold::lmi_cert::SolverStatus::NumericalFailure {
                    return Ok(3);
                }
            }
            Ok(0)
        }
        Command::CertifyHinf {
            common,
            ctrl,
            delta,
            gamma,
            dump_lmi,
        } => {
            let ctx = Ctx::new(&common)?;
            let sys = system_for(&ctx.cfg)?;
            let c = ctx.controller(&sys, &ctrl)?;
            let red = reduce(&sys, &c)?;
            let a1 = red.injection();
            let bd = red.b_d_velocity();
            if dump_lmi {
                let (pr, _) = lk_problem(&red.a, &a1, delta, Some((&bd, gamma)))?;
                ctx.write("lmi_dump.txt", &pr.dump(None))?;
            }
            let cert = lk_hinf_feasible(&red.a, &a1, &bd, delta, gamma, &ctx.cfg.sdp)?;
            let mut body = key_value_csv(
                &[
                    ("delta", fmt_f64(delta)),
                    ("gamma", fmt_f64(gamma)),
                    ("status", cert.lk.solver_status.as_str().into()),
                    ("iterations", cert.lk.iterations.to_string()),
                ],
                "",
            );
            body.push('\n');
            body.push_str(&checks_csv(&cert.lk.checks));
            ctx.write("hinf.csv", &body)?;
            println!(
                "H-infinity LK LMIs at delta {} s, gamma {}: {}",
                fmt_f64(delta),
                fmt_f64(gamma),
                cert.lk.solver_status.as_str()
            );
            if cert.lk.solver_status == ringhold::lmi_cert::SolverStatus::NumericalFailure {
                return Ok(3);
            }
            Ok(0)
        }
        Command::SynthH2 { common } => {
            let ctx = Ctx::new(&common)?;
            let sys = system_for(&ctx.cfg)?;
            let sol = h2_controller(&sys, &ctx.cfg.weights, &ctx.cfg.sdp)?;
            ctx.write(
                "controller.txt",
                &format_controller(&ControllerFile {
                    controller: sol.controller.clone(),
                    weights: Some(ctx.cfg.weights),
                    note: Some(format!("h2 objective {}", fmt_f64(sol.objective_value))),
                }),
            )?;
            println!("H2 objective {}; controller written", fmt_f64(sol.objective_value));
            Ok(0)
        }
        Command::SynthLk {
            common,
            delta_in,
            mode,
            dump_lmi,
        } => {
            let ctx = Ctx::new(&common)?;
            let sys = system_for(&ctx.cfg)?;
            let red = reduce(&sys, &Controller::zero(sys.dim()))?;
            if dump_lmi {
                let (pr, _) = lk_synthesis_problem(&red.a, &red.b, delta_in, ctx.cfg.epsilon)?;
                ctx.write("lmi_dump.txt", &pr.dump(None))?;
            }
            let mode = match mode {
                ModeArg::First => FeasibilityMode::FirstFeasible,
                ModeArg::Max => FeasibilityMode::MaxMargin,
            };
            match lk_synthesize(&red.a, &red.b, delta_in, ctx.cfg.epsilon, mode, &ctx.cfg.sdp) {
                Ok(r) => {
                    ctx.write(
                        "controller.txt",
                        &format_controller(&ControllerFile {
                            controller: r.controller.clone(),
                            weights: None,
                            note: Some(format!(
                                "delta_in {} epsilon {}",
                                fmt_f64(delta_in),
                                fmt_f64(ctx.cfg.epsilon)
                            )),
                        }),
                    )?;
                    ctx.write(
                        "synthesis.csv",
                        &key_value_csv(
                            &[
                                ("delta_in", fmt_f64(delta_in)),
                                ("epsilon", fmt_f64(ctx.cfg.epsilon)),
                                ("status", "feasible".into()),
                                ("cond_q", fmt_f64(r.cond_q)),
                                ("verified", r.verified.to_string()),
                            ],
                            "",
                        ),
                    )?;
                    println!("LK gain synthesized at delta_in {} s (cond Q {})", fmt_f64(delta_in), fmt_f64(r.cond_q));
                    Ok(0)
                }
                Err(Error::Infeasible(msg)) => {
                    ctx.write(
                        "synthesis.csv",
                        &key_value_csv(
                            &[
                                ("delta_in", fmt_f64(delta_in)),
                                ("status", "infeasible".into()),
                                ("reason", msg.clone()),
                            ],
                            "",
                        ),
                    )?;
                    println!("no gain found: {msg}");
                    Ok(0)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Sweep { common, param, values } => {
            let p = SweepParam::parse(&param).ok_or_else(|| Fail(2, format!("unknown sweep parameter '{param}'")))?;
            let ctx = Ctx::new(&common)?;
            let spec = SweepSpec::new(p, values.unwrap_or_else(|| p.default_grid()));
            let rows = sensitivity_sweep(&spec, &ctx.cfg)?;
            fs::write(
                ctx.out.join(format!("sweep_{}.csv", p.as_str())),
                sweep_csv(&rows, &ctx.header, true),
            )?;
            for r in &rows {
                println!(
                    "{} = {}: sim {} s, lyap {} s, lk {} s",
                    r.param,
                    fmt_f64(r.param_value),
                    fmt_f64(r.sim_hold_limit),
                    fmt_f64(r.lyap_bound),
                    fmt_f64(r.lk_hold_limit)
                );
            }
            Ok(0)
        }
        Command::JointSweep { common } => {
            let ctx = Ctx::new(&common)?;
            let scenarios = JointScenario::defaults();
            let mut body = String::from("index,alpha,beta,s_st,s_go\n");
            for s in &scenarios {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{}",
                    s.index,
                    fmt_f64(s.alpha),
                    fmt_f64(s.beta),
                    fmt_f64(s.s_st),
                    fmt_f64(s.s_go)
                );
            }
            ctx.write("joint_scenarios.csv", &body)?;
            let rows = joint_scenario_sweep(&scenarios, &ctx.cfg)?;
            fs::write(ctx.out.join("joint_sweep.csv"), sweep_csv(&rows, &ctx.header, true))?;
            for r in &rows {
                println!("scenario {}: sim {} s", fmt_f64(r.param_value), fmt_f64(r.sim_hold_limit));
            }
            Ok(0)
        }
        Command::HumanError { common, kind, values } => {
            let ctx = Ctx::new(&common)?;
            let kind = match kind {
                ErrorKindArg::Nonvanishing => HumanErrorKind::NonvanishingBound,
                ErrorKindArg::Vanishing => HumanErrorKind::VanishingHoldLimit,
                ErrorKindArg::Delay => HumanErrorKind::DelayHoldLimit,
            };
            let values = values.unwrap_or_else(|| kind.default_grid());
            let rows = human_error_sweep(kind, &values, &ctx.cfg)?;
            fs::write(
                ctx.out.join(format!("human_error_{}.csv", kind.as_str())),
                human_error_csv(&rows, &ctx.header),
            )?;
            for r in &rows {
                println!(
                    "{} = {}: delta {} s, ultimate bound {}",
                    kind.as_str(),
                    fmt_f64(r.value),
                    fmt_f64(r.delta),
                    fmt_f64(r.ultimate_bound[0])
                );
            }
            Ok(0)
        }
        Command::ReplicatePaper { common } => {
            let ctx = Ctx::new(&common)?;
            let report = replicate_paper(&ctx.cfg, &ReplicateGrids::default(), &ctx.out)?;
            for c in &report.criteria {
                println!(
                    "[{}] {:>2} {}: {}",
                    if c.pass { "pass" } else { "FAIL" },
                    c.id,
                    c.name,
                    c.observed
                );
            }
            Ok(if report.all_pass() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
