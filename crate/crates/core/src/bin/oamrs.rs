use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oamrs::fp::{optimize, FpConfig};
use oamrs::harness::{
    emit_csv, evaluate_scenario, load_scenario, pair_problems, pair_seed, preset_case, run_sweep, write_csv, Scheme,
    SweepSpec,
};
use oamrs::scenario::ScenarioConfig;
use oamrs::Error;

#[derive(Parser)]
#[command(name = "oamrs", version, about = "Rate-splitting OAM-MIMO link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config file; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimizer seed, overriding the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated schemes: rs, sdma, noma, tdma.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the configured scenario and print a report.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured sweep and write CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a preset mode case.
    Case {
        #[arg(long)]
        id: u8,
    },
    /// Per-iteration rate-splitting convergence trace as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Loaded {
    scenario: ScenarioConfig,
    sweep: SweepSpec,
    fp: FpConfig,
}

fn load(common: &Common) -> oamrs::Result<Loaded> {
    let (scenario, mut sweep, mut fp) = match &common.config {
        Some(path) => load_scenario(path)?,
        None => (ScenarioConfig::default(), SweepSpec::default(), FpConfig::default()),
    };
    if let Some(seed) = common.seed {
        fp.init_seed = seed;
    }
    if !common.scheme.is_empty() {
        sweep.schemes = common
            .scheme
            .iter()
            .map(|s| s.parse())
            .collect::<oamrs::Result<Vec<Scheme>>>()?;
        sweep.validate()?;
    }
    let scenario = sweep.resolve_scenario(&scenario)?;
    scenario.validate()?;
    Ok(Loaded { scenario, sweep, fp })
}

fn run(common: &Common) -> oamrs::Result<()> {
    let cfg = load(common)?;
    let mut out = String::new();
    for &scheme in &cfg.sweep.schemes {
        let o = evaluate_scenario(&cfg.scenario, scheme, &cfg.fp)?;
        out += &format!("scheme: {scheme}\n");
        out += &format!("case: {}\n", cfg.sweep.case_id.label());
        out += &format!("seed: {}\n", cfg.fp.init_seed);
        out += &format!("sum_capacity_bps_hz: {:.9}\n", o.sum());
        out += &format!("cap_user_a: {:.9}\n", o.user_a());
        out += &format!("cap_user_b: {:.9}\n", o.user_b());
        out += &format!("converged: {}\n", o.converged());
        out += &format!("iterations: {}\n", o.iterations());
        for (i, p) in o.pairs.iter().enumerate() {
            let r = &p.report;
            for (name, v) in [
                ("private_a", r.private_a),
                ("private_b", r.private_b),
                ("common_pair", r.common_pair),
                ("sum", r.sum),
            ] {
                out += &format!("pair{i}.{name}: {v:.9}\n");
            }
        }
        out += "\n";
    }
    print!("{out}");
    Ok(())
}

fn sweep(common: &Common, path: Option<&Path>) -> oamrs::Result<()> {
    let cfg = load(common)?;
    // case reshaping already happened in load
    let spec = SweepSpec {
        case_id: oamrs::harness::CaseId::Custom,
        ..cfg.sweep.clone()
    };
    let mut rows = run_sweep(&cfg.scenario, &spec, &cfg.fp)?;
    let label = cfg.sweep.case_id.label();
    for r in &mut rows {
        r.case = label.clone();
    }
    let failed = rows.iter().any(|r| !r.converged && r.iterations == 0);
    match path {
        Some(p) => emit_csv(&rows, p)?,
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    if failed {
        return Err(Error::Numerical {
            context: "sweep".into(),
            detail: "one or more points failed; see rows with converged=false".into(),
        });
    }
    Ok(())
}

fn case(id: u8) -> oamrs::Result<()> {
    let c = preset_case(id)?;
    let modes: Vec<String> = c.modes.iter().map(i64::to_string).collect();
    let tau: Vec<String> = c.tau_sq.iter().map(f64::to_string).collect();
    println!("case: {}", c.name);
    println!("modes: {}", modes.join(","));
    println!("rx_count: {}", c.rx_count);
    println!("tx_count: {}", c.tx_count);
    println!("tau_sq: {}", tau.join(","));
    Ok(())
}

fn trace(common: &Common, path: Option<&Path>) -> oamrs::Result<()> {
    let cfg = load(common)?;
    let mut text = String::from("pair,iteration,surrogate,power\n");
    for (i, problem) in pair_problems(&cfg.scenario)?.iter().enumerate() {
        let fp = cfg.fp.with_seed(pair_seed(cfg.fp.init_seed, i));
        let (state, _) = optimize(problem, &fp)?;
        for r in state.records() {
            text += &format!("{i},{},{:.8e},{:.8e}\n", r.iteration, r.surrogate, r.power);
        }
    }
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run { common } => run(common),
        Command::Sweep { common, out } => sweep(common, out.as_deref()),
        Command::Case { id } => case(*id),
        Command::Trace { common, out } => trace(common, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
