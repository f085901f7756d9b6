use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lps::cascade::run_cascade;
use lps::config::RunConfig;
use lps::error::Error;
use lps::full::solve_full;
use lps::scan::{run_scan, ScanOptions};
use lps::units::Material;
use lps::validate::{run_validate, series_check};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "lps", version, about = "Lateral photovoltage scanning forward solver")]
struct Cli {
    /// TOML configuration; Si defaults with the laser off when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for scans (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Stop at the first failing scan point or criterion.
    #[arg(long, global = true)]
    fail_fast: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scaled parameters.
    Scale,
    /// Asymptotic cascade at the configured beam position.
    SolveAsym,
    /// Full drift-diffusion model at the configured beam position.
    SolveFull,
    /// Laser scan over scan.start..scan.stop; writes scan.csv.
    Scan,
    /// Series expansion against the finite-difference oracle.
    SeriesCheck {
        #[arg(long, default_value_t = 20)]
        sets: usize,
    },
    /// Acceptance criteria 1 to 8.
    Validate,
}

enum Failure {
    Config(String),
    Solver(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            Error::Io(_) | Error::Parse { .. } | Error::InvalidParameter { .. } => Failure::Config(e.to_string()),
            e => Failure::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let config = match path {
        Some(p) => RunConfig::from_file(p),
        None => RunConfig::preset(Material::Si),
    };
    config.map_err(Failure::from)
}

fn output(dir: &Path) -> Result<(), Failure> {
    Ok(fs::create_dir_all(dir)?)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = load(cli.config.as_deref())?;
    match &cli.command {
        Command::Scale => {
            let s = &config.scaled;
            println!("material={:?}", config.material);
            println!("lambda={:.6e}", s.lambda);
            println!("delta={:.6e}", s.delta);
            println!("thermal_voltage_V={:.6e}", s.thermal_voltage);
            println!("mu_n={:.6e} mu_p={:.6e}", s.mu_n, s.mu_p);
            println!("c_d={:.6e} c_n={:.6e} c_p={:.6e}", s.c_d, s.c_n, s.c_p);
            println!("tau_n={:.6e} tau_p={:.6e} n_t={:.6e} p_t={:.6e}", s.tau_n, s.tau_p, s.n_t, s.p_t);
            println!("resistance={:.6e}", s.resistance);
            println!("generation_amplitude={:.6e}", s.generation_amplitude);
            println!("penetration_depth={:.6e}", s.penetration_depth);
            match s.spot_radius {
                Some(r) => println!("spot_radius={r:.6e}"),
                None => println!("spot_radius=unset"),
            }
        }
        Command::SolveAsym => {
            let grid = config.build_grid()?;
            let sol = run_cascade(&grid, &config.model, &config.doping, &config.laser, &config.cascade)?;
            output(&cli.out)?;
            sol.dump(&cli.out)?;
            println!("x0={:.6e} uD2={:.16e} uD_volts={:.6e}", config.laser.position, sol.ud2, config.scaled.thermal_voltage * sol.u_d());
            for b in &sol.bounds {
                println!("{b}");
            }
            if !sol.bounds_ok() {
                return Err(Failure::Validation("a bound was violated".into()));
            }
        }
        Command::SolveFull => {
            let grid = config.build_grid()?;
            let sol = solve_full(&grid, &config.model, &config.doping, &config.laser, &config.full)?;
            output(&cli.out)?;
            for (name, f) in [("psi", &sol.psi), ("phi_n", &sol.phi_n), ("phi_p", &sol.phi_p)] {
                let file = fs::File::create(cli.out.join(format!("{name}.dat")))?;
                f.dump(std::io::BufWriter::new(file))?;
            }
            println!(
                "x0={:.6e} uD={:.16e} uD_over_delta2={:.16e} iD={:.6e} coupling_residual={:.3e} secant_iterations={}",
                config.laser.position,
                sol.u_d,
                sol.u_d / (sol.delta * sol.delta),
                sol.i_d,
                sol.coupling_residual,
                sol.secant_iterations
            );
        }
        Command::Scan => {
            let options = ScanOptions { threads: cli.threads, fail_fast: cli.fail_fast };
            let result = run_scan(&config, options)?;
            output(&cli.out)?;
            let path = cli.out.join("scan.csv");
            let file = fs::File::create(&path)?;
            result.write_csv(std::io::BufWriter::new(file))?;
            println!("points={} failures={} elapsed_ms={} csv={}", result.rows.len(), result.failures.len(), result.elapsed.as_millis(), path.display());
            if !result.failures.is_empty() {
                return Err(Failure::Solver(format!("{} of {} scan points failed", result.failures.len(), result.rows.len())));
            }
            if !result.all_bounds_ok() {
                return Err(Failure::Validation("a bound was violated during the scan".into()));
            }
        }
        Command::SeriesCheck { sets } => {
            let check = series_check(&config.model.recombination, config.seed, *sets)?;
            println!("{:>4} {:>6} {:>24} {:>24} {:>10}", "set", "coeff", "series", "oracle", "rel_err");
            for row in &check.rows {
                println!("{row}");
            }
            println!("sets={sets} max_rel_err={:.3e} identities={}", check.worst, check.identities);
            if !check.pass() {
                return Err(Failure::Validation("series check failed".into()));
            }
        }
        Command::Validate => {
            let mut failed = Vec::new();
            for r in run_validate(&config) {
                println!("{r}");
                if !r.pass {
                    failed.push(r.id);
                    if cli.fail_fast {
                        break;
                    }
                }
            }
            if !failed.is_empty() {
                return Err(Failure::Validation(format!("criteria {failed:?} failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("validation failure: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
