use axmhd::checkpoint::{check_digest, read_checkpoint, write_checkpoint};
use axmhd::config::{parse_config, RunConfig};
use axmhd::diagnostics::Monitor;
use axmhd::records::{read_records, write_records};
use axmhd::solver::Solver;
use axmhd::verify::{self, all_passed, Check};
use axmhd::{Error, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Worker-count cap for the rayon pool.
const THREADS_ENV: &str = "AXMHD_THREADS";

#[derive(Parser)]
#[command(name = "axmhd", version, about = "Axisymmetric MHD laboratory with vertical viscosity")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate and write diagnostics and checkpoints to the output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a checkpoint written under the same configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the configured simulation and check every invariant.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute the [losing] scenario of a configuration.
    Losing {
        #[arg(long)]
        config: PathBuf,
    },
    /// Littlewood-Paley self-test on seeded random fields.
    LpSelftest {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        size: usize,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn report(checks: &[Check]) -> bool {
    for c in checks {
        println!("{c}");
    }
    let ok = all_passed(checks);
    let failed = checks.iter().filter(|c| !c.passed()).count();
    println!("{} checks, {failed} failed", checks.len());
    ok
}

fn checkpoint_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("ckpt_{step:08}.axmh"))
}

fn run(cfg: RunConfig, resume: Option<PathBuf>) -> Result<()> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.canonical"), format!("{}digest = {}\n", cfg.canonical(), cfg.digest_hex()))?;
    let solver = Solver::new(cfg.solver.clone())?;
    let digest = cfg.digest();
    let records_path = dir.join("records.csv");
    let (state, dt, first_step, mut monitor, mut prior) = match resume {
        Some(p) => {
            let ck = read_checkpoint(&p)?;
            check_digest(&ck, &digest)?;
            let h = &ck.header;
            if (h.nr, h.nz) != (cfg.solver.nr, cfg.solver.nz) || h.seed != cfg.seed {
                return Err(Error::Checkpoint("grid or seed differs from the configuration".into()));
            }
            let monitor = Monitor::restore(cfg.monitors.clone(), cfg.solver.cadence, &ck.monitor)?;
            let prior = if records_path.exists() {
                read_records(&records_path)?.into_iter().filter(|r| r.step <= h.step).collect()
            } else {
                Vec::new()
            };
            (ck.state, h.dt, h.step, monitor, prior)
        }
        None => {
            let mut s = solver.initial_state()?;
            let dt = match cfg.solver.dt {
                Some(d) => d,
                None => solver.default_dt(&mut s),
            };
            (s, dt, 0, Monitor::new(cfg.monitors.clone(), cfg.solver.cadence), Vec::new())
        }
    };
    let every = cfg.output.checkpoint_every;
    let mut n_total = 0;
    let outcome = solver.run_from(state, dt, first_step, |s, st, info| {
        monitor.observe(s, st, info)?;
        n_total = info.n_steps;
        let due = info.step == 0 || info.step == info.n_steps || (every > 0 && info.step % every == 0);
        if due {
            write_checkpoint(&checkpoint_path(&dir, info.step), st, info.step, info.dt, cfg.seed, digest, &monitor.snapshot())?;
        }
        Ok(())
    });
    prior.extend(monitor.records.iter().cloned());
    write_records(&records_path, &prior, &cfg.monitors.pgrid)?;
    let last = outcome?;
    println!("steps {n_total}, dt {dt:e}, t {}", last.t);
    if let Some(r) = prior.last() {
        println!(
            "energy residual {:.3e}, max ratio_pi {:.12}, bkm integral {:.6e}",
            r.energy_residual, monitor.ratio_pi_max, r.bkm_integral
        );
    }
    println!("records: {}", records_path.display());
    Ok(())
}

fn losing(cfg: RunConfig) -> Result<bool> {
    let scn = cfg.losing.clone().ok_or_else(|| Error::Config { key: "losing".into(), msg: "missing section".into() })?;
    let traj = verify::losing_trajectory(&cfg, &scn)?;
    let (sched, rep) = verify::losing_report(&traj, &scn, cfg.solver.r_extent)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let mut csv = String::from("t,sigma_t,r\n");
    println!("{:>12} {:>14} {:>14}", "t", "sigma_t", "r");
    for i in 0..rep.times.len() {
        println!("{:>12.6} {:>14.10} {:>14.10}", rep.times[i], rep.sigma_t[i], rep.r[i]);
        csv.push_str(&format!("{},{},{}\n", rep.times[i], rep.sigma_t[i], rep.r[i]));
    }
    std::fs::write(cfg.output.dir.join("losing.csv"), csv)?;
    println!("sup r = {:.10}", rep.sup_r);
    println!("log U(T) = {:.6e} (C = 1)", rep.log_u);
    println!("log bound factor = {:.6e} (C = 1)", rep.log_bound_factor);
    let drift = (sched.sigma_end() - (scn.sigma - scn.eps)).abs();
    let checks = vec![
        Check::new("sup_t r finite", rep.sup_r.is_finite(), format!("{:.10}", rep.sup_r)),
        Check::new("sigma_T = sigma - eps", drift <= 1e-12, format!("{drift:.3e}")),
    ];
    Ok(report(&checks))
}

fn selftest(seed: u64, size: usize) -> Result<bool> {
    let st = verify::lp_selftest(seed, size)?;
    println!("{:>4} {:>16} {:>16} {:>16}", "j", "two_sided_l2", "two_sided_inf", "upper_2_inf");
    for r in &st.bernstein {
        println!("{:>4} {:>16.12} {:>16.12} {:>16.12}", r.j, r.two_sided_l2, r.two_sided_inf, r.upper_2_inf);
    }
    println!("commutator max ratios: L2 {:.12e}, Lp {:.12e}", st.commutator_l2, st.commutator_lp);
    println!("product estimate ratio: {:.12e}", st.product_ratio);
    Ok(report(&st.checks))
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Run { config, resume } => run(load(&config)?, resume).map(|_| true),
        Cmd::Verify { config } => {
            let (checks, _) = verify::verify_run(&load(&config)?)?;
            Ok(report(&checks))
        }
        Cmd::Losing { config } => losing(load(&config)?),
        Cmd::LpSelftest { seed, size } => selftest(seed, size),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            }
            _ => {
                eprintln!("error: {THREADS_ENV} = {v:?} is not a positive integer");
                return ExitCode::FAILURE;
            }
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
