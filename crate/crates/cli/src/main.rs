use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frequency_lab::report::{
    parse_scenario, run_scenario, CauchyMode, Experiment, ExitStatus, Overrides, Report, RunError, ScenarioFile,
};

#[derive(Parser, Debug)]
#[command(name = "freqlab", version, about = "Frequency-function experiments on Lipschitz graph domains")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file; a built-in scenario is used when absent.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Pass threshold for quadrature-limited audits.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Whitney decomposition, audits and generation map.
    Whitney {
        /// Run the Whitney property audits.
        #[arg(long)]
        audit: bool,
    },
    /// Frequency profile F(x, r).
    Frequency,
    /// Stopping-time cascade and good-set fractions.
    Cascade,
    /// Doubling survey at boundary points.
    Doubling,
    /// Cauchy-data pipeline.
    Cauchy {
        #[arg(long, value_parser = parse_mode)]
        mode: Option<CauchyMode>,
    },
    /// Every invariant audit.
    Verify {
        /// Module name or `module.audit` prefix.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn parse_mode(s: &str) -> Result<CauchyMode, String> {
    match s {
        "alpha" => Ok(CauchyMode::Alpha),
        "flux" => Ok(CauchyMode::Flux),
        "mass" => Ok(CauchyMode::Mass),
        "threeball" => Ok(CauchyMode::Threeball),
        "ratio" => Ok(CauchyMode::Ratio),
        _ => Err(format!("unknown mode `{s}` (alpha, flux, mass, threeball, ratio)")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Whitney { .. } => "whitney",
            Command::Frequency => "frequency",
            Command::Cascade => "cascade",
            Command::Doubling => "doubling",
            Command::Cauchy { .. } => "cauchy",
            Command::Verify { .. } => "verify",
        }
    }

    fn builtin(&self) -> &'static str {
        match self {
            Command::Whitney { .. } => include_str!("../../../scenarios/whitney.toml"),
            Command::Frequency => include_str!("../../../scenarios/frequency.toml"),
            Command::Cascade => include_str!("../../../scenarios/cascade.toml"),
            Command::Doubling => include_str!("../../../scenarios/doubling.toml"),
            Command::Cauchy { .. } => include_str!("../../../scenarios/cauchy.toml"),
            Command::Verify { .. } => include_str!("../../../scenarios/verify.toml"),
        }
    }

    /// Applies subcommand flags to the scenario's experiment.
    fn apply(&self, file: &mut ScenarioFile) {
        match (self, &mut file.scenario.experiment) {
            (Command::Whitney { audit: true }, Experiment::Whitney(e)) => e.audit = true,
            (Command::Cauchy { mode: Some(m) }, Experiment::Cauchy(e)) => e.mode = *m,
            (Command::Verify { filter: Some(f) }, Experiment::Verify(e)) => e.filter = Some(f.clone()),
            _ => {}
        }
    }
}

fn load(cli: &Cli) -> Result<ScenarioFile, RunError> {
    let mut file = match &cli.global.scenario {
        Some(path) => {
            let p = path.display().to_string();
            let text = std::fs::read_to_string(path).map_err(|e| RunError::Config { path: p.clone(), message: e.to_string() })?;
            parse_scenario(&text, &p)?
        }
        None => parse_scenario(cli.command.builtin(), &format!("<built-in {}>", cli.command.name()))?,
    };
    let kind = file.scenario.experiment.name();
    if kind != cli.command.name() {
        return Err(RunError::Config {
            path: file.path.clone(),
            message: format!("scenario runs `{kind}` but the subcommand is `{}`", cli.command.name()),
        });
    }
    cli.command.apply(&mut file);
    Ok(file)
}

fn execute(cli: &Cli) -> Result<(Report, Vec<PathBuf>), RunError> {
    let file = load(cli)?;
    let overrides = Overrides { seed: cli.global.seed, tol: cli.global.tol, out_dir: cli.global.out_dir.clone() };
    let report = run_scenario(&file, &overrides)?;
    let dir = overrides
        .out_dir
        .or_else(|| file.scenario.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let paths = report.write(&dir, &file.scenario.output.prefix).map_err(RunError::Output)?;
    Ok((report, paths))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = execute(&cli);
    let status = match outcome {
        Ok((report, paths)) => {
            let mut out = std::io::stdout().lock();
            for a in &report.audits {
                let mark = if a.passed { "pass" } else { "FAIL" };
                let _ = writeln!(out, "{mark} {:<40} {:>12.4e} (bound {:.1e}, {} cases)", a.full_name(), a.measured, a.tolerance, a.cases);
            }
            let _ = writeln!(
                out,
                "{}: {}/{} audits passed in {:.2} s",
                report.experiment,
                report.summary.passed,
                report.summary.total,
                report.wall_clock.as_secs_f64()
            );
            for p in &paths {
                let _ = writeln!(out, "wrote {}", p.display());
            }
            ExitStatus::of(&Ok(report))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::of(&Err(e))
        }
    };
    ExitCode::from(status.code() as u8)
}
