//! Command line surface: single runs, analyses, sweeps and the verification
//! suite. All numeric output is deterministic: identical configurations
//! produce byte-identical CSV and JSON.

use crate::config::{fmt_sci, Config};
use crate::diagnostics::{self, Component};
use crate::history;
use crate::integrator::{self, IntegratorConfig};
use crate::kernel::DivisionDensity;
use crate::model::{self, Equilibrium, ModelParams};
use crate::stability::{self, PositiveStability, TrivialStability};
use crate::trajectory::Trajectory;
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 4 verification failure.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hemodyn",
    about = "Simulation and stability analysis of a two-compartment stem cell model with distributed cell-cycle delay",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct CommonArgs {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. --set n=2.42 or
    /// --set density.tau_max=6. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Print the equilibria and the existence threshold as JSON.
    Equilibria(CommonArgs),
    /// Classify the stability of both equilibria.
    Stability(CommonArgs),
    /// Locate the Hopf crossing and the critical sensitivity.
    Hopf(CommonArgs),
    /// Integrate the system and write a CSV trajectory with a JSON sidecar.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output CSV path; the sidecar is written next to it as <out>.json.
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG line chart of the trajectory.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the model across a parameter range and tabulate verdicts/periods.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Configuration key to sweep (e.g. n, delta, gamma, mu).
        #[arg(long)]
        param: String,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        /// Number of sample points (endpoints included).
        #[arg(long)]
        count: usize,
        /// Worker threads; rows are written in sweep order regardless.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in oracle checks and print a pass/fail table.
    Verify(CommonArgs),
}

/// Entry point used by the binary; maps errors to exit codes.
pub fn run(cli: Cli) -> u8 {
    let outcome = match cli.command {
        Command::Equilibria(c) => with_config(&c, |cfg| {
            let report = cmd_equilibria(cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(EXIT_OK)
        }),
        Command::Stability(c) => with_config(&c, |cfg| {
            let report = cmd_stability(cfg)?;
            eprintln!("{}", report.verdict_line());
            eprint!("{}", report.numbers_table());
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(EXIT_OK)
        }),
        Command::Hopf(c) => with_config(&c, |cfg| {
            let report = cmd_hopf(cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(EXIT_OK)
        }),
        Command::Simulate { common, out, svg } => with_config(&common, |cfg| {
            let summary = cmd_simulate(cfg, &out, svg.as_deref())?;
            eprintln!(
                "wrote {} ({} rows) and {}",
                out.display(),
                summary.rows,
                summary.sidecar.display()
            );
            Ok(EXIT_OK)
        }),
        Command::Sweep { common, param, min, max, count, jobs, out } => {
            with_config(&common, |cfg| {
                cmd_sweep(cfg, &param, min, max, count, jobs, &out)?;
                eprintln!("wrote {}", out.display());
                Ok(EXIT_OK)
            })
        }
        Command::Verify(c) => with_config(&c, |cfg| {
            let checks = cmd_verify(cfg)?;
            let mut all_pass = true;
            for check in &checks {
                println!(
                    "{} {} - {}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
                all_pass &= check.pass;
            }
            println!(
                "{}: {} of {} checks passed",
                if all_pass { "OK" } else { "FAILED" },
                checks.iter().filter(|c| c.pass).count(),
                checks.len()
            );
            Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY })
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            }
        }
    }
}

fn with_config(common: &CommonArgs, f: impl FnOnce(&Config) -> Result<u8>) -> Result<u8> {
    let cfg = Config::load(common.config.as_deref(), &common.sets)?;
    f(&cfg)
}

#[derive(Debug, Serialize)]
pub struct EquilibriaReport {
    pub existence: model::ExistenceReport,
    pub delta_tilde: f64,
    pub moments: crate::kernel::KernelMoments,
    pub equilibria: Vec<Equilibrium>,
}

pub fn cmd_equilibria(cfg: &Config) -> Result<EquilibriaReport> {
    let params = cfg.model_params()?;
    let m = params.moments();
    Ok(EquilibriaReport {
        existence: model::existence(&params),
        delta_tilde: -params.delta / (2.0 * m.k + 1.0),
        moments: m,
        equilibria: model::equilibria(&params),
    })
}

#[derive(Debug, Serialize)]
pub struct StabilityCmdReport {
    pub trivial: TrivialStability,
    pub trivial_real_root: f64,
    pub positive: Option<PositiveStability>,
    pub delta_tilde: f64,
    pub details: stability::StabilityDetails,
}

impl StabilityCmdReport {
    pub fn verdict_line(&self) -> String {
        match self.positive {
            Some(p) => format!("extinction: {:?}; positive equilibrium: {:?}", self.trivial, p),
            None => format!("extinction: {:?}; no positive equilibrium", self.trivial),
        }
    }

    pub fn numbers_table(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| out.push_str(&format!("  {k:<22} {v}\n"));
        row("k", fmt_sci(self.details.k));
        row("alpha", fmt_sci(self.details.threshold_alpha));
        row("delta_tilde", fmt_sci(self.delta_tilde));
        row("trivial_real_root", fmt_sci(self.trivial_real_root));
        if let Some(b) = self.details.beta_star {
            row("beta_star", fmt_sci(b));
        }
        if let Some(b) = self.details.beta_star_c {
            row("beta_star_c", fmt_sci(b));
        }
        if let Some(w) = self.details.omega_c {
            row("omega_c", fmt_sci(w));
        }
        out
    }
}

pub fn cmd_stability(cfg: &Config) -> Result<StabilityCmdReport> {
    let params = cfg.model_params()?;
    let report = stability::classify(&params);
    Ok(StabilityCmdReport {
        trivial: report.trivial,
        trivial_real_root: stability::trivial_real_root(&params)?,
        positive: report.positive,
        delta_tilde: report.delta_tilde,
        details: report.details,
    })
}

pub fn cmd_hopf(cfg: &Config) -> Result<stability::HopfResult> {
    let params = cfg.model_params()?;
    stability::hopf_locate(&params, cfg.omega_max(&params), cfg.hopf_grid)
}

#[derive(Debug, Serialize)]
pub struct RunDiagnostics {
    pub period_x: Option<diagnostics::PeriodEstimate>,
    pub period_y: Option<diagnostics::PeriodEstimate>,
    pub converged_to: Option<String>,
    pub final_x: f64,
    pub final_y: f64,
}

#[derive(Debug, Serialize)]
pub struct Sidecar {
    pub config: Config,
    pub effective_step: f64,
    pub equilibria: Vec<Equilibrium>,
    pub delta_tilde: f64,
    pub diagnostics: RunDiagnostics,
}

pub struct SimulateSummary {
    pub rows: usize,
    pub sidecar: PathBuf,
}

/// Integrate per the configuration and write `t,x,y` CSV plus a JSON sidecar
/// embedding the resolved configuration and run diagnostics.
pub fn cmd_simulate(cfg: &Config, out: &std::path::Path, svg: Option<&std::path::Path>) -> Result<SimulateSummary> {
    let params = cfg.model_params()?;
    let icfg = cfg.integrator_config();
    let h = icfg.validate(&params)?;
    let traj = run_simulation(cfg, &params)?;

    let stride = (cfg.output_every / h).round().max(1.0) as usize;
    let mut csv = String::from("t,x,y\n");
    let mut rows = 0;
    let mut i = 0;
    let count = traj.segments().len();
    loop {
        let t = if i < count { traj.segments()[i].t0 } else { traj.t_end() };
        let (x, y) = traj.eval(t);
        csv.push_str(&format!("{},{},{}\n", fmt_sci(t), fmt_sci(x), fmt_sci(y)));
        rows += 1;
        if i >= count {
            break;
        }
        i += stride;
    }
    std::fs::write(out, csv)?;

    let diag = run_diagnostics(cfg, &params, &traj)?;
    let sidecar_path = sidecar_path(out);
    let m = params.moments();
    let sidecar = Sidecar {
        config: cfg.clone(),
        effective_step: h,
        equilibria: model::equilibria(&params),
        delta_tilde: -params.delta / (2.0 * m.k + 1.0),
        diagnostics: diag,
    };
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;

    if let Some(svg_path) = svg {
        write_svg(svg_path, &traj)?;
    }
    Ok(SimulateSummary { rows, sidecar: sidecar_path })
}

pub fn sidecar_path(out: &std::path::Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Build the history and integrate; the single entry point every command
/// shares so runs are reproducible across the surface.
pub fn run_simulation(cfg: &Config, params: &ModelParams) -> Result<Trajectory> {
    let hist = history::build(params, &cfg.history_config())?;
    integrator::integrate(params, &hist, &cfg.integrator_config())
}

fn run_diagnostics(cfg: &Config, params: &ModelParams, traj: &Trajectory) -> Result<RunDiagnostics> {
    let period_x = diagnostics::estimate_period(traj, Component::X, cfg.t_discard, params).ok();
    let period_y = diagnostics::estimate_period(traj, Component::Y, cfg.t_discard, params).ok();
    let window = (0.2 * (traj.t_end() - traj.t_start())).min(200.0);
    let mut converged_to = None;
    for e in model::equilibria(params) {
        if diagnostics::convergence_check(traj, &e, window, params)?.converged() {
            converged_to = Some(format!("{:?}", e.kind));
        }
    }
    let (final_x, final_y) = traj.eval(traj.t_end());
    Ok(RunDiagnostics { period_x, period_y, converged_to, final_x, final_y })
}

/// One row of a sweep output.
#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    index: usize,
    value: f64,
    exists_positive: bool,
    trivial: String,
    positive: String,
    period: Option<f64>,
    period_stderr: Option<f64>,
    amplitude_min: Option<f64>,
    amplitude_max: Option<f64>,
    converged: bool,
}

/// Sweep one configuration key across a range: each point is classified and
/// simulated; rows are emitted in index order whatever the completion order.
pub fn cmd_sweep(
    base: &Config,
    param: &str,
    min: f64,
    max: f64,
    count: usize,
    jobs: usize,
    out: &std::path::Path,
) -> Result<()> {
    if count == 0 {
        return Err(Error::Config("sweep needs at least one point".into()));
    }
    if !(min.is_finite() && max.is_finite()) || max < min {
        return Err(Error::Config(format!("invalid sweep range [{min}, {max}]")));
    }
    // validate the parameter name against the configuration schema up front
    let probe = Config::load(None, &[format!("{param}={min}")]);
    let base_json = serde_json::to_value(base)?;
    let probe_on_base = {
        let mut v = base_json.clone();
        apply_param(&mut v, param, min)?;
        serde_json::from_value::<Config>(v).map_err(|e| Error::Config(e.to_string()))
    };
    probe.and(probe_on_base)?;

    // the crossing analysis depends only on delta, gamma and the kernel;
    // reuse it across points unless the swept key feeds into it
    let hopf_invariant = !(param.starts_with("delta")
        || param.starts_with("gamma")
        || param.starts_with("density")
        || param.starts_with("step"));
    let shared_hopf = if hopf_invariant {
        let params = base.model_params()?;
        Some(stability::hopf_locate(&params, base.omega_max(&params), base.hopf_grid))
    } else {
        None
    };

    let values: Vec<f64> = (0..count)
        .map(|i| {
            if count == 1 {
                min
            } else {
                min + (max - min) * i as f64 / (count - 1) as f64
            }
        })
        .collect();

    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; count]);
    let workers = jobs.max(1).min(count);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let row = sweep_point(&base_json, param, values[i], i, shared_hopf.as_ref());
                rows.lock().unwrap()[i] = Some(row);
            });
        }
    });

    let mut csv = String::from(
        "index,value,exists_positive,trivial,positive,period,period_stderr,amplitude_min,amplitude_max,converged\n",
    );
    for row in rows.into_inner().unwrap() {
        let r = row.expect("all sweep rows computed");
        let opt = |v: Option<f64>| v.map(fmt_sci).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            fmt_sci(r.value),
            r.exists_positive,
            r.trivial,
            r.positive,
            opt(r.period),
            opt(r.period_stderr),
            opt(r.amplitude_min),
            opt(r.amplitude_max),
            r.converged
        ));
    }
    std::fs::write(out, csv)?;

    #[derive(Serialize)]
    struct SweepSidecar<'a> {
        config: &'a Config,
        param: &'a str,
        min: f64,
        max: f64,
        count: usize,
    }
    let sidecar = SweepSidecar { config: base, param, min, max, count };
    std::fs::write(sidecar_path(out), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn apply_param(value: &mut serde_json::Value, param: &str, v: f64) -> Result<()> {
    let mut cursor = &mut *value;
    let parts: Vec<&str> = param.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("sweep parameter '{param}' is not settable")))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), serde_json::json!(v));
            return Ok(());
        }
        cursor = obj
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    Ok(())
}

fn sweep_point(
    base_json: &serde_json::Value,
    param: &str,
    value: f64,
    index: usize,
    shared_hopf: Option<&Result<stability::HopfResult>>,
) -> SweepRow {
    let mut failed = SweepRow {
        index,
        value,
        exists_positive: false,
        trivial: "Error".into(),
        positive: String::new(),
        period: None,
        period_stderr: None,
        amplitude_min: None,
        amplitude_max: None,
        converged: false,
    };
    let cfg: Config = {
        let mut v = base_json.clone();
        if apply_param(&mut v, param, value).is_err() {
            return failed;
        }
        match serde_json::from_value(v) {
            Ok(c) => c,
            Err(_) => return failed,
        }
    };
    let params = match cfg.model_params() {
        Ok(p) => p,
        Err(_) => return failed,
    };
    let moments = params.moments();
    let (trivial, existence) = stability::classify_trivial(&params);
    let positive_eq = model::positive_equilibrium(&params);
    let positive = positive_eq.map(|e| {
        let delta_tilde = -params.delta / (2.0 * moments.k + 1.0);
        if e.beta_star >= delta_tilde {
            PositiveStability::StableGainBound
        } else {
            match shared_hopf {
                Some(h) => stability::classify_positive_with(&params, &e, h, &moments),
                None => {
                    let h = stability::hopf_locate(&params, cfg.omega_max(&params), cfg.hopf_grid);
                    stability::classify_positive_with(&params, &e, &h, &moments)
                }
            }
        }
    });

    let traj = match run_simulation(&cfg, &params) {
        Ok(t) => t,
        Err(_) => return failed,
    };
    let est = diagnostics::estimate_period(&traj, Component::X, cfg.t_discard, &params).ok();
    let window = (0.2 * (traj.t_end() - traj.t_start())).min(200.0);
    let converged = model::equilibria(&params).iter().any(|e| {
        diagnostics::convergence_check(&traj, e, window, &params)
            .map(|c| c.converged())
            .unwrap_or(false)
    });
    failed.exists_positive = existence.exists_positive;
    failed.trivial = format!("{trivial:?}");
    failed.positive = positive.map(|p| format!("{p:?}")).unwrap_or_default();
    failed.period = est.as_ref().map(|e| e.period);
    failed.period_stderr = est.as_ref().map(|e| e.period_stderr);
    failed.amplitude_min = est.as_ref().map(|e| e.amplitude_min);
    failed.amplitude_max = est.as_ref().map(|e| e.amplitude_max);
    failed.converged = converged;
    failed
}

/// One named check of the verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> VerifyCheck {
    VerifyCheck { name: name.into(), pass, detail }
}

/// Closed-form transforms of the uniform density, the quadrature oracle.
pub fn uniform_transform_oracle(tau_max: f64, gamma: f64, omega: f64) -> (f64, f64) {
    if omega == 0.0 && gamma == 0.0 {
        return (1.0, 0.0);
    }
    let d = gamma * gamma + omega * omega;
    let e = (-gamma * tau_max).exp();
    let (sn, cs) = (omega * tau_max).sin_cos();
    (
        (gamma + e * (omega * sn - gamma * cs)) / d / tau_max,
        (omega - e * (omega * cs + gamma * sn)) / d / tau_max,
    )
}

/// The oracle suite behind `hemodyn verify`: quadrature closed forms,
/// explicit-vs-integrated proliferating mass, the limit transfer, the
/// step-halving order factor, equilibrium closed form vs bisection,
/// transform derivatives vs finite differences, the zero-apoptosis branch,
/// boundedness and monotone growth behaviors.
pub fn cmd_verify(cfg: &Config) -> Result<Vec<VerifyCheck>> {
    let mut checks = Vec::new();
    let baseline = Config::default();

    // (a) closed-form transforms for the uniform kernel
    {
        let d = DivisionDensity::uniform(0.0, 7.0)?;
        let mut worst = 0.0f64;
        for &omega in &[0.0, 0.1, 1.0, 5.0, 20.0] {
            let (c, s) = d.weighted_cos_sin(0.2, omega);
            let (co, so) = uniform_transform_oracle(7.0, 0.2, omega);
            worst = worst.max((c - co).abs()).max((s - so).abs());
        }
        let m = d.moments(0.2);
        let k_oracle = (1.0 - (-1.4f64).exp()) / 1.4;
        worst = worst.max((m.k - k_oracle).abs());
        checks.push(check(
            "transforms vs closed forms",
            worst <= 1e-10,
            format!("max abs error {worst:.3e} (tol 1e-10)"),
        ));
    }

    // (b) explicit vs integrated proliferating mass on the oscillating run
    {
        let mut c3 = baseline.clone();
        c3.n = 3.0;
        c3.t_end = 510.0;
        let params = c3.model_params()?;
        let traj = run_simulation(&c3, &params)?;
        let mut worst = 0.0f64;
        for &t in &[100.0, 500.0] {
            let explicit = integrator::y_explicit(&traj, &params, t)?;
            let integrated = traj.eval_y(t);
            worst = worst.max((explicit - integrated).abs() / integrated.abs());
        }
        checks.push(check(
            "explicit vs integrated proliferating mass",
            worst <= 1e-5,
            format!("max rel error {worst:.3e} (tol 1e-5)"),
        ));
    }

    // (c) limit transfer on the damped run
    let damped_traj;
    {
        let mut c242 = baseline.clone();
        c242.n = 2.42;
        c242.t_end = 1000.0;
        let params = c242.model_params()?;
        damped_traj = run_simulation(&c242, &params)?;
        let res = diagnostics::y_limit_check(&damped_traj, &params);
        checks.push(check(
            "limit transfer x to y",
            res.rel_dev < 1e-3,
            format!("relative residual {:.3e} (tol 1e-3)", res.rel_dev),
        ));
    }

    // (d) step-halving order factor on the damped configuration
    {
        let factor = order_factor(cfg.verify_order_step)?;
        checks.push(check(
            "step-halving order factor",
            (8.0..=32.0).contains(&factor),
            format!("factor {factor:.2} (want within [8, 32])"),
        ));
    }

    // (e) closed-form equilibrium vs bisection
    {
        let mut worst = 0.0f64;
        for n in [2.42, 3.0, 4.0] {
            let mut c = baseline.clone();
            c.n = n;
            let params = c.model_params()?;
            let closed = model::positive_equilibrium(&params)
                .ok_or_else(|| Error::Precondition("positive equilibrium expected".into()))?
                .x_star;
            let bis = model::positive_equilibrium_bisection(&params)
                .ok_or_else(|| Error::Precondition("bisection bracket expected".into()))?;
            worst = worst.max((closed - bis).abs());
        }
        checks.push(check(
            "equilibrium closed form vs bisection",
            worst <= 1e-10,
            format!("max abs difference {worst:.3e} (tol 1e-10)"),
        ));
    }

    // (f) transform derivatives vs central finite differences
    {
        let tab = DivisionDensity::tabulated(vec![1.0, 2.0, 4.0, 6.0], vec![0.2, 1.0, 0.6, 0.1])?;
        let uni = DivisionDensity::uniform(0.0, 7.0)?;
        let fd = 1e-5;
        let mut worst = 0.0f64;
        for (d, omega) in [(&uni, 0.5), (&uni, 2.0), (&tab, 1.0)] {
            let (cp, sp) = d.weighted_cos_sin_prime(0.2, omega);
            let (cf, sf) = d.weighted_cos_sin(0.2, omega + fd);
            let (cb, sb) = d.weighted_cos_sin(0.2, omega - fd);
            worst = worst.max((cp - (cf - cb) / (2.0 * fd)).abs());
            worst = worst.max((sp - (sf - sb) / (2.0 * fd)).abs());
        }
        checks.push(check(
            "transform derivatives vs finite differences",
            worst <= 1e-6,
            format!("max abs error {worst:.3e} (tol 1e-6)"),
        ));
    }

    // zero-apoptosis branch: mean-age weight and settled limit transfer
    {
        let mut c0 = baseline.clone();
        c0.gamma = 0.0;
        c0.delta = 0.5;
        c0.n = 1.5;
        c0.t_end = 600.0;
        c0.step = 0.02;
        let params = c0.model_params()?;
        let m = params.moments();
        let mean_age_ok = (m.y0w - 3.5).abs() < 1e-12 && (m.k - 1.0).abs() < 1e-12;
        let traj = run_simulation(&c0, &params)?;
        let res = diagnostics::y_limit_check(&traj, &params);
        checks.push(check(
            "zero-apoptosis branch",
            mean_age_ok && res.rel_dev < 1e-3,
            format!(
                "mean-age weight ok: {mean_age_ok}, limit residual {:.3e}",
                res.rel_dev
            ),
        ));
    }

    // boundedness with resting-phase loss: the damped run stays under the
    // dissipativity ceiling
    {
        let params = {
            let mut c = baseline.clone();
            c.n = 2.42;
            c.model_params()?
        };
        let m = params.moments();
        let target = params.delta / (2.0 * m.k);
        let x0 = (params.hill.beta0 / target - 1.0).powf(1.0 / params.hill.n);
        let x1 = 2.0 * m.k * params.hill.eval(0.0) * x0 / params.delta;
        let mut hist_max: f64 = 0.0;
        let mut peak: f64 = 0.0;
        let mut t = 0.0;
        while t <= damped_traj.t_end() {
            let x = damped_traj.eval_x(t);
            if t <= 7.0 {
                hist_max = hist_max.max(x);
            }
            if t >= 500.0 {
                peak = peak.max(x);
            }
            t += 0.05;
        }
        let bound = hist_max.max(x1) * 1.01;
        checks.push(check(
            "bounded orbits with resting loss",
            peak <= bound,
            format!("max x on [500, end] = {peak:.6} vs bound {bound:.6}"),
        ));
    }

    // monotone growth without resting loss
    {
        let mut cg = baseline.clone();
        cg.delta = 0.0;
        cg.t_end = 120.0;
        cg.step = 0.02;
        let params = cg.model_params()?;
        let traj = run_simulation(&cg, &params)?;
        let mut increasing = true;
        let mut prev = traj.eval_x(7.0);
        let mut t = 7.02;
        while t <= 120.0 {
            let x = traj.eval_x(t);
            if x <= prev {
                increasing = false;
                break;
            }
            prev = x;
            t += 0.02;
        }
        checks.push(check(
            "monotone growth without resting loss",
            increasing,
            format!("x(120)/x(7) = {:.3}", traj.eval_x(120.0) / traj.eval_x(7.0)),
        ));
    }

    Ok(checks)
}

/// Error-reduction factor when the step is halved, measured against
/// eighth-step references at `t = 100` on the damped configuration.
pub fn order_factor(base_step: f64) -> Result<f64> {
    let cfg = Config { n: 2.42, t_end: 100.5, ..Config::default() };
    let params = cfg.model_params()?;
    let x_at_100 = |step: f64| -> Result<f64> {
        let hist = history::build(&params, &history::HistoryConfig { mu: 1.0, step: Some(step) })?;
        let icfg = IntegratorConfig { step, correction_passes: 2, t_end: 100.5 };
        Ok(integrator::integrate(&params, &hist, &icfg)?.eval_x(100.0))
    };
    let h = base_step;
    let coarse = x_at_100(h)?;
    let coarse_ref = x_at_100(h / 8.0)?;
    let half = x_at_100(h / 2.0)?;
    let half_ref = x_at_100(h / 16.0)?;
    let e1 = (coarse - coarse_ref).abs();
    let e2 = (half - half_ref).abs();
    if e2 == 0.0 {
        return Err(Error::Precondition("order test degenerated: zero fine-step error".into()));
    }
    Ok(e1 / e2)
}

/// Minimal SVG line chart of both components against time.
pub fn write_svg(path: &std::path::Path, traj: &Trajectory) -> Result<()> {
    let (w, h, ml, mb) = (900.0, 500.0, 60.0, 40.0);
    let n = 1200;
    let t0 = traj.t_start();
    let t1 = traj.t_end();
    let mut pts = Vec::with_capacity(n + 1);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=n {
        let t = t0 + (t1 - t0) * i as f64 / n as f64;
        let (x, y) = traj.eval(t);
        lo = lo.min(x.min(y));
        hi = hi.max(x.max(y));
        pts.push((t, x, y));
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let sx = |t: f64| ml + (t - t0) / (t1 - t0) * (w - ml - 20.0);
    let sy = |v: f64| (h - mb) - (v - lo) / (hi - lo) * (h - mb - 20.0);
    let poly = |idx: usize| {
        pts.iter()
            .map(|p| {
                let v = if idx == 0 { p.1 } else { p.2 };
                format!("{:.2},{:.2}", sx(p.0), sy(v))
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<polyline points=\"{px}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.2\"/>\n",
            "<polyline points=\"{py}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.2\" ",
            "stroke-dasharray=\"6 3\"/>\n",
            "<line x1=\"{ml}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<line x1=\"{ml}\" y1=\"20\" x2=\"{ml}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<text x=\"{ml}\" y=\"16\" font-size=\"12\">resting (solid) and proliferating ",
            "(dashed) mass, t in [{t0:.1}, {t1:.1}] days</text>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        px = poly(0),
        py = poly(1),
        ml = ml,
        yb = h - mb,
        xr = w - 20.0,
        t0 = t0,
        t1 = t1,
    );
    let mut f = std::fs::File::create(path)?;
    f.write_all(svg.as_bytes())?;
    Ok(())
}
