use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relaxlim::config::ExperimentConfig;
use relaxlim::heat::{heat_solve, write_heat_outputs};
use relaxlim::oracle::{
    damped_mode, heat_mode, scalar_layer_mode, scalar_limit_study, write_scalar_rates_csv,
    ScalarModeIc,
};
use relaxlim::rates::rate_fit;
use relaxlim::remainder::write_remainder_trace_csv;
use relaxlim::study::{
    decomposition_max_deviation, emit_report, run_limit_study, run_single_eps,
};
use relaxlim::wave::{wave_solve, write_wave_outputs};

/// Numerical laboratory for the small-inertia limit of the damped wave map
/// into the sphere.
#[derive(Parser)]
#[command(name = "relaxlim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-eps experiment: solver runs, traces, snapshots, remainder
    /// diagnostics.
    Run(RunArgs),
    /// eps-sweep limit study with rate fits and the envelope check.
    Sweep(RunArgs),
    /// Exact scalar mode solutions; with --eps-list, the scalar rate study.
    Oracle(OracleArgs),
    /// Check the singular/regular splitting against the reassembled
    /// nonlinearity on random band-limited fields.
    VerifyDecomposition(VerifyArgs),
    /// Refit convergence slopes from an existing study.csv.
    FitRates(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a `section.key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Integer wavenumber of the mode.
    #[arg(long, default_value_t = 1)]
    k: i64,
    /// Inertia value for the single-mode table.
    #[arg(long)]
    eps: Option<f64>,
    /// Initial value coefficient.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Initial velocity coefficient.
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    /// Use the well-prepared velocity b = -k^2 a.
    #[arg(long, default_value_t = false)]
    well_prepared: bool,
    /// Time horizon.
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Rows in the single-mode table.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Comma-separated decreasing eps ladder: runs the rate study instead.
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Output directory for scalar_rates.csv (rate study only).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Base seed; each field set uses seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points (one axis).
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Number of random field sets.
    #[arg(long, default_value_t = 20)]
    sets: usize,
    /// Inertia values to test.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.05, 0.01])]
    eps: Vec<f64>,
    /// Times as multiples of eps.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1.0, 10.0])]
    t_mults: Vec<f64>,
    /// Acceptance threshold on the max relative deviation.
    #[arg(long, default_value_t = 1e-11)]
    threshold: f64,
}

#[derive(Args)]
struct FitArgs {
    /// Existing study.csv.
    #[arg(long)]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> relaxlim::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => cmd_run(&args.config),
        Command::Sweep(args) => cmd_sweep(&args.config),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::VerifyDecomposition(args) => cmd_verify(&args),
        Command::FitRates(args) => cmd_fit_rates(&args.input),
    }
}

fn cmd_run(config_path: &PathBuf) -> relaxlim::Result<ExitCode> {
    let cfg = ExperimentConfig::load(config_path)?;
    let eps = cfg.eps.ok_or_else(|| {
        relaxlim::Error::InvalidParameter("run needs eps.value in the config".into())
    })?;
    let grid = cfg.build_grid()?;
    let (d_in, dtilde_in) = cfg.build_initial_data(&grid)?;
    std::fs::create_dir_all(&cfg.output_dir)?;

    if cfg.run_heat {
        let run = heat_solve(&d_in, cfg.t_final, cfg.dt, cfg.stride)?;
        write_heat_outputs(&run, &cfg.output_dir, true)?;
        println!(
            "heat flow: {} samples, final Dirichlet energy {}",
            run.samples.len(),
            run.trace.last().map(|r| r.dirichlet_energy).unwrap_or(0.0)
        );
    }
    if cfg.run_wave {
        let run = wave_solve(&d_in, &dtilde_in, eps, cfg.t_final, cfg.dt, cfg.stride)?;
        write_wave_outputs(&run, &cfg.output_dir, true)?;
        let last = run.trace.last().expect("nonempty trace");
        println!(
            "wave map (eps = {eps}): W(T) = {}, balance defect {}",
            last.w, last.balance_defect,
        );
    }
    if cfg.run_remainder_diagnostics {
        let outcome = run_single_eps(&cfg, eps)?;
        write_remainder_trace_csv(
            &outcome.trace,
            &cfg.output_dir.join("remainder_trace.csv"),
        )?;
        println!(
            "remainder: sup|d_eps - d0 - layer|_L2 = {}, sup E = {}, C_fit = {}",
            outcome.sup_pos_err, outcome.sup_e, outcome.c_fit
        );
    }
    if cfg.run_decomposition_check {
        let dev = decomposition_max_deviation(
            cfg.seed,
            cfg.n[0],
            20,
            &[0.3, 0.05, 0.01],
            &[0.0, 1.0, 10.0],
        )?;
        println!("decomposition check: max relative deviation {dev:.3e}");
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(config_path: &PathBuf) -> relaxlim::Result<ExitCode> {
    let cfg = ExperimentConfig::load(config_path)?;
    let report = run_limit_study(&cfg)?;
    emit_report(&report, &cfg.output_dir)?;
    println!(
        "sweep complete: {} runs, M = {}, C_fit = {}, eps0 = {}",
        report.runs.len(),
        report.m,
        report.c_fit_family,
        report.eps0
    );
    if let Some(fit) = &report.pos_fit {
        if fit.exact_zero {
            println!("position rate: exact-zero errors");
        } else {
            println!(
                "position rate: slope {} (residual {})",
                fit.slope, fit.residual
            );
        }
    }
    if let Some(fit) = &report.vel_fit {
        if !fit.exact_zero {
            println!(
                "velocity rate: slope {} (residual {})",
                fit.slope, fit.residual
            );
        }
    }
    println!("report in {}", cfg.output_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: &OracleArgs) -> relaxlim::Result<ExitCode> {
    let b = if args.well_prepared {
        -((args.k * args.k) as f64) * args.a
    } else {
        args.b
    };
    if let Some(eps_list) = &args.eps_list {
        let study = scalar_limit_study(
            &[(args.k, args.a)],
            &[(args.k, b)],
            eps_list,
            args.t_final,
        )?;
        std::fs::create_dir_all(&args.out)?;
        let path = args.out.join("scalar_rates.csv");
        write_scalar_rates_csv(&study, &path)?;
        for row in &study.rows {
            println!(
                "eps = {:<10} err_pos = {:<24} err_vel = {}",
                row.eps, row.err_pos, row.err_vel
            );
        }
        if study.pos.exact_zero {
            println!("errors identically zero; no slopes");
        } else {
            println!(
                "slopes: position {} velocity {}",
                study.pos.slope, study.vel.slope
            );
        }
        println!("wrote {}", path.display());
    } else {
        let eps = args.eps.ok_or_else(|| {
            relaxlim::Error::InvalidParameter("oracle needs --eps or --eps-list".into())
        })?;
        let ic = ScalarModeIc {
            k: args.k,
            a: args.a,
            b,
            eps,
        };
        println!("k = {}, a = {}, b = {}, eps = {eps}", args.k, args.a, b);
        println!(
            "{:>12} {:>24} {:>24} {:>24} {:>24}",
            "t", "damped", "damped_velocity", "heat", "layer"
        );
        for i in 0..=args.samples {
            let t = args.t_final * i as f64 / args.samples.max(1) as f64;
            let (g, gp) = damped_mode(&ic, t);
            println!(
                "{:>12.6} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e}",
                t,
                g,
                gp,
                heat_mode(args.k, args.a, t),
                scalar_layer_mode(args.k, args.a, b, eps, t)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> relaxlim::Result<ExitCode> {
    let dev = decomposition_max_deviation(args.seed, args.n, args.sets, &args.eps, &args.t_mults)?;
    println!(
        "{} field sets at n = {}, eps in {:?}, t/eps in {:?}",
        args.sets, args.n, args.eps, args.t_mults
    );
    println!("max relative deviation |S+R - check| = {dev:.3e} (threshold {:.1e})", args.threshold);
    if dev <= args.threshold {
        println!("PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL");
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_fit_rates(input: &PathBuf) -> relaxlim::Result<ExitCode> {
    let text = std::fs::read_to_string(input)?;
    let mut pos = Vec::new();
    let mut vel = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 9 || cols[8].trim() != "ok" {
            continue;
        }
        let parse = |s: &str| -> relaxlim::Result<f64> {
            s.trim().parse().map_err(|_| {
                relaxlim::Error::InvalidParameter(format!("bad number {s:?} in {input:?}"))
            })
        };
        let eps = parse(cols[0])?;
        pos.push((eps, parse(cols[1])?));
        vel.push((eps, parse(cols[2])?));
    }
    if pos.len() < 2 {
        return Err(relaxlim::Error::InvalidParameter(
            "need at least two completed rows to fit".into(),
        ));
    }
    let pfit = rate_fit(&pos)?;
    let vfit = rate_fit(&vel)?;
    if pfit.exact_zero {
        println!("position errors identically zero");
    } else {
        println!("position slope {} (residual {})", pfit.slope, pfit.residual);
    }
    if vfit.exact_zero {
        println!("velocity errors identically zero");
    } else {
        println!("velocity slope {} (residual {})", vfit.slope, vfit.residual);
    }
    Ok(ExitCode::SUCCESS)
}
