//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use scusum_core::benchmark::{run_benchmark, BenchConfig};
use scusum_core::simulate::{simulate, unit_distance_covariance, NoiseModel, SimConfig};
use scusum_core::{detect, neighbor_size, DetectParams, ThresholdRule};
use serde_json::json;

use crate::args::{
    BenchArgs, Cli, Command, DetectArgs, InputFormat, NoiseArg, ReplayArgs, RuleArg, SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::formats::{
    density_to_csv, field_to_csv, mask_to_pgm, read_csv_field, read_pgm, weights_to_csv,
    write_file, FormatError,
};
use crate::manifest::{Manifest, TOOL};

/// Environment variable that fixes the worker thread count (0 = automatic).
pub const THREADS_ENV: &str = "SCUSUM_THREADS";

/// Size the global worker pool from `SCUSUM_THREADS`.
pub fn configure_threads() -> CliResult<()> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

/// Run a parsed command. `invocation` is recorded verbatim in the manifest.
pub fn run(cli: Cli, invocation: Vec<String>) -> CliResult<()> {
    match cli.command {
        Command::Detect(a) => run_detect(&a, invocation),
        Command::Simulate(a) => run_simulate(&a, invocation),
        Command::Bench(a) => run_bench(&a, invocation),
        Command::Replay(a) => run_replay(&a, invocation),
    }
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| {
        FormatError::Io {
            path: dir.display().to_string(),
            source,
        }
        .into()
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Internal(format!("serialization: {e}")))
}

struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> CliResult<Self> {
        prepare_out(dir)?;
        Ok(Self {
            dir,
            names: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_file(&self.dir.join(name), bytes)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn finish(
        self,
        argv: Vec<String>,
        invocation: Vec<String>,
        seed: Option<u64>,
        started: Instant,
        details: serde_json::Value,
    ) -> CliResult<()> {
        let manifest = Manifest {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv,
            invocation,
            seed,
            threads: rayon::current_num_threads(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs: self.names,
            details,
        };
        manifest.write(self.dir)
    }
}

fn run_detect(args: &DetectArgs, invocation: Vec<String>) -> CliResult<()> {
    let started = Instant::now();
    let field = match InputFormat::resolve(args.format, &args.input) {
        InputFormat::Csv => read_csv_field(&args.input)?,
        InputFormat::Pgm => read_pgm(&args.input)?,
    };
    let k = match args.k {
        Some(k) => k,
        None => {
            let c1 = args.c1.unwrap_or(1.0);
            if !(c1 > 0.0 && c1.is_finite()) {
                return Err(CliError::Usage(format!("--c1 {c1} must be positive")));
            }
            neighbor_size(field.rows(), field.cols(), c1)
        }
    };
    let params = DetectParams {
        k,
        repeats: args.m,
        alpha: args.alpha,
        seed: args.seed,
        grid_size: args.grid_size,
        bandwidth: args.bandwidth,
        valley_margin: scusum_core::threshold::DEFAULT_VALLEY_MARGIN,
        rule: match args.rule {
            RuleArg::Tail => ThresholdRule::TailArea,
            RuleArg::Pointwise => ThresholdRule::Pointwise,
        },
        negate: args.negate,
    };
    let result = detect(&field, &params)?;

    let mut out = Outputs::new(&args.out)?;
    if let Some(w) = &result.weights {
        out.write("weights.csv", weights_to_csv(w).as_bytes())?;
    }
    out.write("mask.pgm", &mask_to_pgm(&result.mask))?;
    out.write(
        "density.csv",
        density_to_csv(result.density.as_ref()).as_bytes(),
    )?;
    let report = json!({
        "method": result.diagnostics.method,
        "rows": field.rows(),
        "cols": field.cols(),
        "params": params,
        "threshold": result.threshold,
        "detected": result.detected(),
        "components": result.mask.connected_components(),
        "valley": result.diagnostics.valley,
        "bandwidth": result.diagnostics.bandwidth,
        "empty_reason": result.diagnostics.reason,
    });
    out.write("report.json", to_json(&report)?.as_bytes())?;
    let details = json!({ "k": k, "detected": result.detected() });
    out.finish(
        args.canonical(k),
        invocation,
        Some(args.seed),
        started,
        details,
    )
}

fn run_simulate(args: &SimulateArgs, invocation: Vec<String>) -> CliResult<()> {
    let started = Instant::now();
    let noise = match args.noise {
        NoiseArg::Iid => NoiseModel::Iid,
        NoiseArg::Expcov => NoiseModel::ExpCov {
            scale: args
                .scale
                .ok_or_else(|| CliError::Usage("--noise expcov needs --scale".into()))?,
        },
    };
    let config = SimConfig {
        rows: args.rows,
        cols: args.cols,
        mu0: args.mu0,
        mu1: args.mu,
        noise,
        seed: args.seed,
    };
    let (field, truth) = simulate(&config)?;

    let mut out = Outputs::new(&args.out)?;
    out.write("field.csv", field_to_csv(&field).as_bytes())?;
    out.write("truth.pgm", &mask_to_pgm(&truth))?;
    let unit_cov = match noise {
        NoiseModel::Iid => 0.0,
        NoiseModel::ExpCov { scale } => unit_distance_covariance(scale),
    };
    let details = json!({
        "config": config,
        "signal_count": truth.count(),
        "unit_distance_covariance": unit_cov,
    });
    out.finish(
        args.canonical(),
        invocation,
        Some(args.seed),
        started,
        details,
    )
}

fn run_bench(args: &BenchArgs, invocation: Vec<String>) -> CliResult<()> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.config).map_err(|source| FormatError::Io {
        path: args.config.display().to_string(),
        source,
    })?;
    let config = BenchConfig::from_json(&text)?;
    let report = run_benchmark(&config)?;

    let mut out = Outputs::new(&args.out)?;
    out.write("report.json", to_json(&report)?.as_bytes())?;
    out.write("table.csv", report.to_csv().as_bytes())?;
    out.write("timing.json", report.timing_json().as_bytes())?;
    let details = json!({ "config": config });
    out.finish(
        args.canonical(),
        invocation,
        Some(config.root_seed),
        started,
        details,
    )
}

fn run_replay(args: &ReplayArgs, invocation: Vec<String>) -> CliResult<()> {
    let manifest = Manifest::read(&args.manifest)?;
    let argv: Vec<String> = std::iter::once(TOOL.to_string())
        .chain(manifest.argv)
        .chain(["--out".to_string(), args.out.display().to_string()])
        .collect();
    let cli = <Cli as clap::Parser>::try_parse_from(&argv)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.manifest.display())))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage(
            "a manifest cannot replay another replay".into(),
        ));
    }
    run(cli, invocation)
}
