//! Command-line options merged with an optional `key=value` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tors3_core::cubicenum::CubicSignature;

#[derive(Debug, Parser)]
#[command(
    name = "tors3",
    version,
    about = "3-torsion of ray class groups of quadratic fields and cubic field censuses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Enumerate cubic fields with |disc| < bound into a cache file
    Census,
    /// Ray class 3-torsion next to c-valid cubic field counts for every d
    Sweep,
    /// Like sweep, but only report failing rows; exit 1 if any
    Verify,
    /// Closed-form averages, densities and second-term constants for c
    Constants,
    /// Compare the ray class computation against brute force
    Oracle,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Bound X on |d| (sweeps) or |disc| (censuses)
    #[arg(long, global = true)]
    pub bound: Option<u64>,
    /// Conductor c
    #[arg(long, global = true)]
    pub conductor: Option<u64>,
    /// real or imag; both when omitted
    #[arg(long, global = true)]
    pub sign: Option<String>,
    /// Only discriminants coprime to c
    #[arg(long, global = true)]
    pub coprime: bool,
    /// Census cache file (repeatable)
    #[arg(long, global = true)]
    pub census: Vec<PathBuf>,
    /// Output file
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Decimal digits for the second-term constants
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    /// Largest prime in the truncated Euler product
    #[arg(long = "prime-cutoff", global = true)]
    pub prime_cutoff: Option<u64>,
    /// Restrict a census to fields totally ramified at this prime
    #[arg(long, global = true)]
    pub ramified: Option<u64>,
    /// Sweep summary from the censuses alone, without ray class groups
    #[arg(long, global = true)]
    pub aggregate: bool,
    /// key=value file; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub bound: Option<u64>,
    pub conductor: u64,
    pub signs: Vec<CubicSignature>,
    pub coprime: bool,
    pub census: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub precision: u32,
    pub prime_cutoff: u64,
    pub ramified: Option<u64>,
    pub aggregate: bool,
}

fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), n + 1))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("invalid value for {key}: {v}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid value for {key}: {v}")),
    }
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, String> {
        let mut o = cli.opts;
        if let Some(path) = o.config.clone() {
            for (k, v) in parse_file(&path)? {
                match k.as_str() {
                    "bound" => o.bound = o.bound.or(Some(parse_value(&k, &v)?)),
                    "conductor" => o.conductor = o.conductor.or(Some(parse_value(&k, &v)?)),
                    "sign" => o.sign = o.sign.or(Some(v)),
                    "coprime" => o.coprime |= parse_bool(&k, &v)?,
                    "census" => {
                        if o.census.is_empty() {
                            o.census = v.split(',').map(|s| PathBuf::from(s.trim())).collect();
                        }
                    }
                    "out" => o.out = o.out.or(Some(PathBuf::from(v))),
                    "workers" => o.workers = o.workers.or(Some(parse_value(&k, &v)?)),
                    "precision" => o.precision = o.precision.or(Some(parse_value(&k, &v)?)),
                    "prime_cutoff" => {
                        o.prime_cutoff = o.prime_cutoff.or(Some(parse_value(&k, &v)?))
                    }
                    "ramified" => o.ramified = o.ramified.or(Some(parse_value(&k, &v)?)),
                    "aggregate" => o.aggregate |= parse_bool(&k, &v)?,
                    _ => return Err(format!("unknown configuration key: {k}")),
                }
            }
        }
        let signs = match o.sign.as_deref() {
            None => vec![CubicSignature::Real, CubicSignature::Imaginary],
            Some(s) => vec![s.parse().map_err(|_| format!("invalid sign: {s}"))?],
        };
        if o.bound == Some(0) {
            return Err("bound must be at least 1".into());
        }
        if o.conductor == Some(0) {
            return Err("conductor must be at least 1".into());
        }
        if o.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        let workers = o
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Ok(RunConfig {
            command: cli.command,
            bound: o.bound,
            conductor: o.conductor.unwrap_or(1),
            signs,
            coprime: o.coprime,
            census: o.census,
            out: o.out,
            workers,
            precision: o.precision.unwrap_or(30),
            prime_cutoff: o.prime_cutoff.unwrap_or(10_000),
            ramified: o.ramified,
            aggregate: o.aggregate,
        })
    }

    pub fn require_bound(&self) -> Result<u64, String> {
        self.bound
            .ok_or_else(|| "this command needs --bound".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Result<RunConfig, String> {
        RunConfig::from_cli(Cli::try_parse_from(args).map_err(|e| e.to_string())?)
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "# sweep settings\nbound = 500\nconductor=7\nsign=imag\nprime-cutoff=200\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cfg = run(&["tors3", "sweep", "--config", p, "--conductor", "5"]).unwrap();
        assert_eq!(cfg.bound, Some(500));
        assert_eq!(cfg.conductor, 5);
        assert_eq!(cfg.signs, vec![CubicSignature::Imaginary]);
        assert_eq!(cfg.prime_cutoff, 200);
        assert_eq!(cfg.command, Command::Sweep);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(run(&["tors3", "sweep", "--bound", "0"]).is_err());
        assert!(run(&["tors3", "sweep", "--workers", "0"]).is_err());
        assert!(run(&["tors3", "sweep", "--sign", "sideways"]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "colour=blue\n").unwrap();
        assert!(run(&["tors3", "constants", "--config", path.to_str().unwrap()]).is_err());
    }
}
