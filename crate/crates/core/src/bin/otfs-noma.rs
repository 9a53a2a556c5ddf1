use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use otfs_noma::downlink::epsilon;
use otfs_noma::harness::analytic::{
    closed_form_outage, corollary1_outage, error_floor, floor_approx,
};
use otfs_noma::harness::csv::metric_curve;
use otfs_noma::harness::{
    diversity_slope, emit_csv, parse_csv, run_scenario_with_threads, ScenarioConfig,
};
use otfs_noma::{Error, Result};

#[derive(Parser)]
#[command(name = "otfs-noma", about = "OTFS-NOMA link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo scenario and write its curves as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Evaluate an analytic outage expression.
    Analytic {
        #[arg(long, value_enum)]
        formula: Formula,
        /// Comma-separated key=value pairs, e.g. `k=4,eps=1,snr_db=40`.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        params: Vec<String>,
    },
    /// Estimate the diversity order of one metric in a CSV file.
    Slope {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        metric: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    /// Last-symbol FD-DFE outage (Erlang CDF).
    Corollary1,
    /// Uplink fixed-rate outage under per-subchannel scheduling.
    Closedform,
    /// Uplink high-SNR error floor and its K!ε^K approximation.
    Floor,
}

struct Params(BTreeMap<String, f64>);

impl Params {
    fn parse(raw: &[String]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in raw.iter().filter(|s| !s.trim().is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("expected key=value, got `{item}`"))
            })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("{k}: {e}")))?;
            map.insert(k.trim().to_string(), v);
        }
        Ok(Params(map))
    }

    fn get(&self, key: &str, default: Option<f64>) -> Result<f64> {
        self.0
            .get(key)
            .copied()
            .or(default)
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter `{key}`")))
    }

    /// Linear SNR from `rho` or `snr_db`.
    fn rho(&self) -> Result<f64> {
        match (self.0.get("rho"), self.0.get("snr_db")) {
            (Some(r), _) => Ok(*r),
            (None, Some(db)) => Ok(10f64.powf(db / 10.0)),
            (None, None) => Err(Error::InvalidArgument(
                "missing parameter `rho` or `snr_db`".into(),
            )),
        }
    }

    /// Threshold from `eps` or `rate`.
    fn eps(&self) -> Result<f64> {
        match (self.0.get("eps"), self.0.get("rate")) {
            (Some(e), _) => Ok(*e),
            (None, Some(r)) => Ok(epsilon(*r)),
            (None, None) => Err(Error::InvalidArgument(
                "missing parameter `eps` or `rate`".into(),
            )),
        }
    }

    fn count(&self, key: &str, default: Option<f64>) -> Result<usize> {
        let v = self.get(key, default)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "`{key}` must be a nonnegative integer, got {v}"
            )));
        }
        Ok(v as usize)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            trials,
            threads,
        } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                if t == 0 {
                    return Err(Error::InvalidArgument("--trials must be at least 1".into()));
                }
                cfg.trials = t;
            }
            let points = run_scenario_with_threads(&cfg, threads)?;
            emit_csv(&points, &out)?;
            eprintln!("wrote {} points to {}", points.len(), out.display());
        }
        Command::Analytic { formula, params } => {
            let p = Params::parse(&params)?;
            match formula {
                Formula::Corollary1 => {
                    let value = corollary1_outage(
                        p.count("p0", Some(3.0))? as u32,
                        p.rho()?,
                        p.get("gamma0_sq", Some(0.75))?,
                        p.get("gamma1_sq", Some(0.25))?,
                        p.get("r0", Some(0.5))?,
                    )?;
                    println!("outage {value:.16e}");
                }
                Formula::Closedform => {
                    let value = closed_form_outage(p.count("k", None)?, p.eps()?, p.rho()?)?;
                    println!("outage {value:.16e}");
                }
                Formula::Floor => {
                    let (k, eps) = (p.count("k", None)?, p.eps()?);
                    let floor = error_floor(k, eps)?;
                    let approx = floor_approx(k, eps)?;
                    println!("floor {floor:.16e}");
                    println!("approx {approx:.16e}");
                    println!("relative_gap {:.16e}", (approx - floor).abs() / floor);
                }
            }
        }
        Command::Slope { input, metric } => {
            let points = parse_csv(&input)?;
            let curve = metric_curve(&points, &metric);
            if curve.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "metric `{metric}` not found in {}",
                    input.display()
                )));
            }
            println!("slope {:.6}", diversity_slope(&curve)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
