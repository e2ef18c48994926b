//! Command-line grammar.
//!
//! Every subcommand can render itself back to a canonical argument list with
//! all defaults spelled out and paths made absolute; manifests store that list
//! so `replay` does not depend on the defaults of a later build.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "scusum",
    version,
    about = "Spatial CUSUM signal-region detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect signal regions in a gridded field.
    Detect(DetectArgs),
    /// Generate a synthetic field with a known signal mask.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo benchmark from a JSON config.
    Bench(BenchArgs),
    /// Re-run a previous invocation from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Pgm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// Tail-area ratio of null to total density.
    Tail,
    /// Pointwise ratio of null to total density.
    Pointwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Iid,
    Expcov,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Input field (headerless CSV, or PGM).
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Block side length.
    #[arg(long, required_unless_present = "auto_k", conflicts_with = "auto_k")]
    pub k: Option<usize>,
    /// Choose k = round((c1 * rows * cols)^(1/4)).
    #[arg(long)]
    pub auto_k: bool,
    /// Constant in the automatic block size (default 1).
    #[arg(long, requires = "auto_k", conflicts_with = "k")]
    pub c1: Option<f64>,
    /// Random repeats per offset.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Target marginal FDR level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Look for low-mean regions instead.
    #[arg(long)]
    pub negate: bool,
    #[arg(long, value_enum, default_value_t = RuleArg::Tail)]
    pub rule: RuleArg,
    /// Number of density grid points on [0, 1].
    #[arg(long, default_value_t = scusum_core::threshold::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    /// Fixed KDE bandwidth; Silverman's rule when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Signal mean.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Background mean.
    #[arg(long, default_value_t = 0.0)]
    pub mu0: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Iid)]
    pub noise: NoiseArg,
    /// Range r of the exponential covariance exp(-d/r).
    #[arg(long, required_if_eq("noise", "expcov"))]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    #[arg(long, default_value_t = 100)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Benchmark config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A manifest.json written by a previous run.
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn absolute(path: &Path) -> String {
    std::path::absolute(path)
        .unwrap_or_else(|_| path.to_path_buf())
        .display()
        .to_string()
}

fn push(args: &mut Vec<String>, flag: &str, value: impl ToString) {
    args.push(flag.to_string());
    args.push(value.to_string());
}

impl InputFormat {
    pub fn resolve(explicit: Option<Self>, path: &Path) -> Self {
        explicit.unwrap_or_else(|| {
            match path
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase)
            {
                Some(ext) if ext == "pgm" || ext == "pnm" => InputFormat::Pgm,
                _ => InputFormat::Csv,
            }
        })
    }

    fn name(self) -> &'static str {
        match self {
            InputFormat::Csv => "csv",
            InputFormat::Pgm => "pgm",
        }
    }
}

impl RuleArg {
    fn name(self) -> &'static str {
        match self {
            RuleArg::Tail => "tail",
            RuleArg::Pointwise => "pointwise",
        }
    }
}

impl DetectArgs {
    /// Canonical arguments with `k` already resolved.
    pub fn canonical(&self, k: usize) -> Vec<String> {
        let mut a = vec!["detect".to_string()];
        push(&mut a, "--input", absolute(&self.input));
        push(
            &mut a,
            "--format",
            InputFormat::resolve(self.format, &self.input).name(),
        );
        push(&mut a, "--k", k);
        push(&mut a, "--m", self.m);
        push(&mut a, "--alpha", self.alpha);
        push(&mut a, "--seed", self.seed);
        if self.negate {
            a.push("--negate".into());
        }
        push(&mut a, "--rule", self.rule.name());
        push(&mut a, "--grid-size", self.grid_size);
        if let Some(h) = self.bandwidth {
            push(&mut a, "--bandwidth", h);
        }
        a
    }
}

impl SimulateArgs {
    pub fn canonical(&self) -> Vec<String> {
        let mut a = vec!["simulate".to_string()];
        push(&mut a, "--mu", self.mu);
        push(&mut a, "--mu0", self.mu0);
        match self.noise {
            NoiseArg::Iid => push(&mut a, "--noise", "iid"),
            NoiseArg::Expcov => push(&mut a, "--noise", "expcov"),
        }
        if let Some(r) = self.scale {
            push(&mut a, "--scale", r);
        }
        push(&mut a, "--rows", self.rows);
        push(&mut a, "--cols", self.cols);
        push(&mut a, "--seed", self.seed);
        a
    }
}

impl BenchArgs {
    pub fn canonical(&self) -> Vec<String> {
        let mut a = vec!["bench".to_string()];
        push(&mut a, "--config", absolute(&self.config));
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grammar_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn k_or_auto_k() {
        let base = ["scusum", "detect", "--input", "x.csv", "--out", "o"];
        assert!(Cli::try_parse_from(base).is_err());
        let with = |extra: &[&str]| Cli::try_parse_from(base.iter().chain(extra.iter()).copied());
        assert!(with(&["--k", "5"]).is_ok());
        assert!(with(&["--auto-k", "--c1", "2"]).is_ok());
        assert!(with(&["--k", "5", "--auto-k"]).is_err());
        assert!(with(&["--k", "5", "--c1", "2"]).is_err());
    }

    #[test]
    fn expcov_needs_scale() {
        assert!(
            Cli::try_parse_from(["scusum", "simulate", "--noise", "expcov", "--out", "o"]).is_err()
        );
        assert!(Cli::try_parse_from([
            "scusum", "simulate", "--noise", "expcov", "--scale", "0.3", "--out", "o"
        ])
        .is_ok());
    }

    #[test]
    fn canonical_detect_round_trips() {
        let cli = Cli::try_parse_from([
            "scusum", "detect", "--input", "f.pgm", "--k", "3", "--alpha", "0.1", "--negate",
            "--out", "o",
        ])
        .unwrap();
        let Command::Detect(args) = cli.command else {
            panic!()
        };
        let canon = args.canonical(3);
        assert!(canon.contains(&"pgm".to_string()));
        let again = Cli::try_parse_from(
            std::iter::once("scusum".to_string())
                .chain(canon.clone())
                .chain(["--out".into(), "p".into()]),
        )
        .unwrap();
        let Command::Detect(args2) = again.command else {
            panic!()
        };
        assert_eq!(args2.canonical(3), canon);
        assert!(args2.negate);
        assert_eq!(args2.alpha, 0.1);
    }

    #[test]
    fn format_inference() {
        assert_eq!(
            InputFormat::resolve(None, Path::new("a/b.PGM")),
            InputFormat::Pgm
        );
        assert_eq!(
            InputFormat::resolve(None, Path::new("a/b.txt")),
            InputFormat::Csv
        );
        assert_eq!(
            InputFormat::resolve(Some(InputFormat::Csv), Path::new("b.pgm")),
            InputFormat::Csv
        );
    }
}
