use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcsim::catalog::{self, CATALOG};
use dcsim::config::ConfigDocument;
use dcsim::experiments::{
    parse_values, run_scenario, sweep, Parameter, RunResult, SweepPoint, Topology,
};
use dcsim::report::{self, RunMeta};
use dcsim::trace_io::{self, ConvertOptions, RateUnit};
use dcsim::Error;

#[derive(Parser)]
#[command(
    name = "dcsim",
    version,
    about = "Dual-connectivity transport simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario, or its sweep if the config has a [sweep] table.
    Run(RunOpts),
    /// Sweep one parameter over a list of values.
    Sweep {
        /// e.g. batch_size, split_pct, loss, cc
        parameter: String,
        /// `1,50,100` or `10..90 step 10`
        values: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a scenario with the fairness topology (one DC flow and one SC flow per link).
    Fairness(RunOpts),
    /// Convert a raw bandwidth log into `time_s,throughput_kbps` CSV.
    TraceConvert {
        raw: PathBuf,
        /// Zero-based column holding the timestamp.
        #[arg(long, default_value_t = 0)]
        time_col: usize,
        /// Zero-based column holding the rate.
        #[arg(long, default_value_t = 1)]
        rate_col: usize,
        #[arg(long, default_value = "kbps")]
        rate_unit: RateUnit,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the bundled scenario configs.
    Catalog {
        /// Print the TOML of one entry instead of the listing.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Scenario TOML file or catalog id / figure tag; defaults apply if omitted.
    config: Option<String>,
    #[arg(long, env = "DCSIM_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long, default_value = "dcsim-out")]
    out: PathBuf,
    /// Figure tag to stamp on the outputs; selects the catalog entry when no config is given.
    #[arg(long)]
    paper_figure: Option<String>,
}

enum Failure {
    Input(Error),
    Other(Error),
    Flagged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::UndefinedFairness => Failure::Other(e),
            _ => Failure::Input(e),
        }
    }
}

fn catalog_doc(key: &str) -> Option<ConfigDocument> {
    catalog::find(key).and_then(|e| e.document().ok())
}

fn load(opts: &RunOpts) -> Result<(ConfigDocument, PathBuf), Error> {
    let (mut doc, base) = match (&opts.config, &opts.paper_figure) {
        (Some(c), _) if Path::new(c).exists() => {
            let base = Path::new(c)
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default();
            (ConfigDocument::from_path(c)?, base)
        }
        (Some(c), _) => (
            catalog_doc(c).ok_or_else(|| {
                Error::Config(format!("`{c}` is neither a file nor a catalog entry"))
            })?,
            PathBuf::from("."),
        ),
        (None, Some(fig)) => (
            catalog_doc(fig)
                .ok_or_else(|| Error::Config(format!("no catalog entry for figure `{fig}`")))?,
            PathBuf::from("."),
        ),
        (None, None) => (ConfigDocument::default(), PathBuf::from(".")),
    };
    if opts.seed.is_some() {
        doc.seed = opts.seed;
    }
    if opts.reps.is_some() {
        doc.repetitions = opts.reps;
    }
    Ok((doc, base))
}

fn meta(
    opts: &RunOpts,
    doc: &ConfigDocument,
    scenario: &str,
    seed: u64,
    repetitions: u32,
) -> RunMeta {
    RunMeta {
        scenario: scenario.to_string(),
        paper_figure: opts.paper_figure.clone().or_else(|| doc.figure.clone()),
        seed,
        repetitions,
    }
}

fn print_run(r: &RunResult) {
    for f in &r.flows {
        println!(
            "flow {} {:<4} {:>9.3} Mbps (sd {:.3})",
            f.flow_id, f.connectivity, f.throughput_mbps.mean, f.throughput_mbps.std
        );
    }
    if let Some(j) = r.jfi {
        println!("jfi {}", report::jfi_str(j.mean));
    }
}

fn print_sweep(parameter: Parameter, points: &[SweepPoint]) {
    for p in points {
        let r = &p.result;
        let tps: Vec<String> = r
            .flows
            .iter()
            .map(|f| format!("{:.3}", f.throughput_mbps.mean))
            .collect();
        let jfi = r
            .jfi
            .map(|j| format!(" jfi {}", report::jfi_str(j.mean)))
            .unwrap_or_default();
        println!(
            "{}={} throughput_mbps [{}]{jfi}",
            parameter.name(),
            p.value,
            tps.join(", ")
        );
    }
}

fn run_doc(
    opts: &RunOpts,
    doc: &ConfigDocument,
    base: &Path,
    sweep_override: Option<(Parameter, Vec<String>)>,
) -> Result<(), Failure> {
    let scenario = doc.to_scenario(base)?;
    let m = meta(
        opts,
        doc,
        &scenario.name,
        scenario.seed,
        scenario.repetitions,
    );
    let sweep_spec = match sweep_override {
        Some(s) => Some(s),
        None => doc.sweep_spec()?,
    };
    let flagged = match sweep_spec {
        Some((parameter, values)) => {
            let points = sweep(&scenario, parameter, &values)?;
            report::write_sweep(&opts.out, &m, parameter, &points)?;
            print_sweep(parameter, &points);
            points.iter().any(|p| p.result.flagged)
        }
        None => {
            let r = run_scenario(&scenario)?;
            report::write_run(&opts.out, &m, &r)?;
            print_run(&r);
            r.flagged
        }
    };
    eprintln!("wrote {}", opts.out.display());
    if flagged {
        return Err(Failure::Flagged);
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run(opts) => {
            let (doc, base) = load(&opts)?;
            run_doc(&opts, &doc, &base, None)
        }
        Cmd::Fairness(opts) => {
            let (mut doc, base) = load(&opts)?;
            doc.topology = Some(Topology::Fairness);
            run_doc(&opts, &doc, &base, None)
        }
        Cmd::Sweep {
            parameter,
            values,
            opts,
        } => {
            let (doc, base) = load(&opts)?;
            let p: Parameter = parameter.parse()?;
            let v = parse_values(&values)?;
            run_doc(&opts, &doc, &base, Some((p, v)))
        }
        Cmd::TraceConvert {
            raw,
            time_col,
            rate_col,
            rate_unit,
            output,
        } => {
            let text = std::fs::read_to_string(&raw)
                .map_err(|e| Error::Trace(format!("{}: {e}", raw.display())))?;
            let csv = trace_io::convert(
                &text,
                ConvertOptions {
                    time_col,
                    rate_col,
                    rate_unit,
                },
            )?;
            match output {
                Some(path) => std::fs::write(&path, csv)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Cmd::Catalog { show } => {
            if let Some(key) = show {
                let entry = catalog::find(&key)
                    .ok_or_else(|| Error::Config(format!("no catalog entry `{key}`")))?;
                print!("{}", entry.toml);
                return Ok(());
            }
            for e in CATALOG {
                println!("{:<36} {}", e.id, e.label());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::Flagged) => {
            eprintln!("warning: at least one flow did not complete within the run cap");
            ExitCode::from(3)
        }
    }
}
