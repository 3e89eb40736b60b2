use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use virtout::engine::{compute_metrics, run_scenario_with, run_sweep, summary_csv, RunOptions, Scenario, Trajectory};
use virtout::engine::trajectory::format_sig17;
use virtout::ltv_ops::gd_freq_response;
use virtout::Error;

#[derive(Parser, Debug)]
#[command(name = "virtout", version, about = "Virtual-output filtering and observer simulations")]
struct Cli {
    /// Directory for outputs when `-o` is not given.
    #[arg(long, global = true, env = "VIRTOUT_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its trajectory.
    Simulate {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a scenario once per value of one config key.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// DREM filter and window baseline on the same measurement.
    CompareFilters {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Tabulate `G_d(jω)` on a uniform grid from 0 to `omega_max`.
    FreqResponse {
        #[arg(long)]
        d: f64,
        #[arg(long)]
        omega_max: f64,
        #[arg(long)]
        points: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    error: Error,
}

impl Failure {
    fn config(error: Error) -> Self {
        Failure { code: 1, error }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if error.is_config() { 1 } else { 2 };
        Failure { code, error }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("virtout: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, output } => {
            let scn = load(&config)?;
            let out = output.unwrap_or_else(|| default_path(&cli.out_dir, &config, "csv"));
            simulate(&scn, &out, RunOptions::default(), None)
        }
        Command::CompareFilters { config, output } => {
            let scn = load(&config)?;
            let out = output.unwrap_or_else(|| default_path(&cli.out_dir, &config, "compare.csv"));
            let cols = ["t", "y", "yv", "yv_hat", "yv_hat_baseline"].map(String::from);
            simulate(&scn, &out, RunOptions { baseline: true }, Some(&cols))
        }
        Command::Sweep {
            config,
            param,
            values,
            output,
        } => {
            let scn = load(&config)?;
            let values: Vec<String> = values.into_iter().filter(|v| !v.trim().is_empty()).collect();
            let dir = output.unwrap_or_else(|| cli.out_dir.join(stem(&config)));
            sweep(&scn, &config, &param, &values, &dir)
        }
        Command::FreqResponse {
            d,
            omega_max,
            points,
            output,
        } => {
            let out = output.unwrap_or_else(|| cli.out_dir.join("freq_response.csv"));
            freq_response(d, omega_max, points, &out)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_file(path).map_err(|e| {
        Failure::config(match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string())
}

fn default_path(dir: &Path, config: &Path, ext: &str) -> PathBuf {
    dir.join(format!("{}.{ext}", stem(config)))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::from(Error::from(e)))?;
    }
    let file = File::create(path).map_err(|e| Failure {
        code: 2,
        error: Error::Io(format!("{}: {e}", path.display())),
    })?;
    Ok(BufWriter::new(file))
}

fn write_trajectory(traj: &Trajectory, every: usize, path: &Path) -> Result<(), Failure> {
    let mut w = create(path)?;
    traj.write_csv(&mut w, every)?;
    w.flush().map_err(|e| Failure::from(Error::from(e)))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn simulate(scn: &Scenario, out: &Path, opts: RunOptions, columns: Option<&[String]>) -> Result<(), Failure> {
    let traj = run_scenario_with::<f64>(scn, opts)?;
    let metrics = compute_metrics(&traj, scn.sim.t_settle, scn.epsilon())?;
    let shown = match columns.or(scn.output.columns.as_deref()) {
        Some(cols) => traj.select(cols)?,
        None => traj,
    };
    write_trajectory(&shown, scn.output.every, out)?;
    print!("{metrics}");
    Ok(())
}

fn sweep(scn: &Scenario, config: &Path, key: &str, values: &[String], dir: &Path) -> Result<(), Failure> {
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let runs = run_sweep(scn, base_dir, key, values, RunOptions::default())?;
    let name = stem(config);
    for (i, run) in runs.iter().enumerate() {
        let traj = match &run.scenario.output.columns {
            Some(cols) => run.trajectory.select(cols)?,
            None => run.trajectory.clone(),
        };
        write_trajectory(&traj, run.scenario.output.every, &dir.join(format!("{name}_{i:03}.csv")))?;
    }
    let summary = dir.join(format!("{name}_summary.csv"));
    let mut w = create(&summary)?;
    w.write_all(summary_csv(key, &runs).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Failure::from(Error::from(e)))?;
    println!("{} runs, summary in {}", runs.len(), summary.display());
    Ok(())
}

fn freq_response(d: f64, omega_max: f64, points: usize, out: &Path) -> Result<(), Failure> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Failure::config(Error::config("--d must be positive")));
    }
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Failure::config(Error::config("--omega-max must be positive")));
    }
    if points < 2 {
        return Err(Failure::config(Error::config("--points must be at least 2")));
    }
    let mut w = create(out)?;
    let mut text = String::from("omega,magnitude,phase\n");
    for k in 0..points {
        let omega = omega_max * k as f64 / (points - 1) as f64;
        let g = gd_freq_response(d, omega);
        text.push_str(&format!(
            "{},{},{}\n",
            format_sig17(omega),
            format_sig17(g.norm()),
            format_sig17(g.arg())
        ));
    }
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Failure::from(Error::from(e)))?;
    Ok(())
}
