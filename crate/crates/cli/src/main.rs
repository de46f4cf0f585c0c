mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::json;

use config::{Cli, Command, RunConfig};
use tors3_core::arith::{conductor_profile, fundamental_discriminants};
use tors3_core::correspondence::{
    census_sweep_summary, summarize_rows, sweep, CensusSet, SweepRow, SweepSummary,
};
use tors3_core::cubicenum::{Census, CubicSignature, RamifiedFilter};
use tors3_core::densities;
use tors3_core::quadfield::QuadraticField;
use tors3_core::rayclass::{brute_force_ray_class_oracle, cl3_plus_closed_form, ray_class_group};
use tors3_core::Error;

/// Prime ideals up to this norm feed the brute-force oracle.
const ORACLE_NORM_BOUND: u64 = 60;

enum Failure {
    Verification(String),
    Usage(String),
    Resource(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CensusBoundInsufficient { .. } | Error::Cache(_) => {
                Failure::Resource(e.to_string())
            }
            Error::InconsistentArguments(_)
            | Error::Unsupported(_)
            | Error::NotFundamental(_)
            | Error::ZeroInput
            | Error::TailBoundExceeded { .. }
            | Error::PrecisionNotReached { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Resource(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    std::fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn filter_of(cfg: &RunConfig) -> Option<RamifiedFilter> {
    cfg.ramified.map(|p| RamifiedFilter { p })
}

fn default_census_path(sig: CubicSignature, filter: Option<RamifiedFilter>) -> PathBuf {
    PathBuf::from(format!(
        "census-{}-{}.csv",
        sig.name(),
        filter.map_or("all".to_string(), |f| format!("ram{}", f.p))
    ))
}

fn cmd_census(cfg: &RunConfig) -> Outcome {
    let bound = cfg.require_bound().map_err(Failure::Usage)?;
    let [sig] = cfg.signs[..] else {
        return Err(Failure::Usage("census needs --sign".into()));
    };
    let filter = filter_of(cfg);
    let path = cfg
        .out
        .clone()
        .unwrap_or_else(|| default_census_path(sig, filter));
    if path.exists() {
        let cached = Census::load(&path)?;
        if cached.signature != sig || cached.filter != filter {
            return Err(Failure::Resource(format!(
                "{} holds a different census ({} {:?})",
                path.display(),
                cached.signature.name(),
                cached.filter
            )));
        }
        if cached.bound >= bound {
            println!(
                "{}: {} fields, already covers |disc| < {}",
                path.display(),
                cached.records.len(),
                cached.bound
            );
            return Ok(());
        }
    }
    let census = Census::enumerate(sig, bound, filter)?;
    census.save(&path)?;
    println!(
        "{}: {} fields with |disc| < {bound}",
        path.display(),
        census.records.len()
    );
    Ok(())
}

/// Censuses from `--census`, or enumerated in memory to the bound the
/// sweep needs. The small totally real census for cyclic fields is added
/// when missing.
fn census_set(cfg: &RunConfig, x: u64) -> Result<CensusSet, Failure> {
    let c = cfg.conductor;
    let mut set = CensusSet::default();
    if cfg.census.is_empty() {
        for &sig in &cfg.signs {
            set.push(Census::enumerate(sig, x.saturating_mul(c * c) + 1, None)?);
        }
    } else {
        for path in &cfg.census {
            set.push(Census::load(path)?);
        }
    }
    let cyclic_need = c * c + 1;
    let has_cyclic = set.censuses.iter().any(|k| {
        k.signature == CubicSignature::Real && k.filter.is_none() && k.bound >= cyclic_need
    });
    if !has_cyclic {
        set.push(Census::enumerate(CubicSignature::Real, cyclic_need, None)?);
    }
    Ok(set)
}

fn rows_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SweepRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

fn sweep_rows(
    cfg: &RunConfig,
    x: u64,
    set: &CensusSet,
) -> Result<Vec<(CubicSignature, Vec<SweepRow>)>, Failure> {
    let mut out = Vec::new();
    for &sig in &cfg.signs {
        out.push((sig, sweep(sig, x, cfg.conductor, cfg.coprime, set)?));
    }
    Ok(out)
}

fn cmd_sweep(cfg: &RunConfig) -> Outcome {
    let x = cfg.require_bound().map_err(Failure::Usage)?;
    let set = census_set(cfg, x)?;
    let (summaries, csv): (Vec<SweepSummary>, Option<String>) = if cfg.aggregate {
        let mut s = Vec::new();
        for &sig in &cfg.signs {
            s.push(census_sweep_summary(
                sig,
                x,
                cfg.conductor,
                cfg.coprime,
                &set,
            )?);
        }
        (s, None)
    } else {
        let per_sign = sweep_rows(cfg, x, &set)?;
        let summaries = per_sign
            .iter()
            .map(|(sig, rows)| summarize_rows(*sig, x, cfg.conductor, cfg.coprime, rows))
            .collect();
        let all: Vec<SweepRow> = per_sign.into_iter().flat_map(|(_, r)| r).collect();
        (summaries, Some(rows_csv(&all)))
    };
    let summary = serde_json::to_string_pretty(&summaries).expect("summary serializes");
    match &cfg.out {
        Some(path) => {
            if let Some(csv) = &csv {
                write_file(path, csv)?;
            }
            write_file(&path.with_extension("json"), &(summary + "\n"))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Some(csv) = &csv {
                let _ = stdout.write_all(csv.as_bytes());
                let _ = writeln!(stdout);
            }
            let _ = writeln!(stdout, "{summary}");
        }
    }
    Ok(())
}

fn cmd_verify(cfg: &RunConfig) -> Outcome {
    let x = cfg.require_bound().map_err(Failure::Usage)?;
    let set = census_set(cfg, x)?;
    let rows: Vec<SweepRow> = sweep_rows(cfg, x, &set)?
        .into_iter()
        .flat_map(|(_, r)| r)
        .collect();
    if let Some(path) = &cfg.out {
        write_file(path, &rows_csv(&rows))?;
    }
    let failing: Vec<SweepRow> = rows.iter().filter(|r| !r.pass).cloned().collect();
    println!(
        "c = {}: {} fields checked, {} failing",
        cfg.conductor,
        rows.len(),
        failing.len()
    );
    if failing.is_empty() {
        Ok(())
    } else {
        print!("{}", rows_csv(&failing));
        Err(Failure::Verification(format!(
            "{} rows fail",
            failing.len()
        )))
    }
}

fn exact(r: &BigRational) -> serde_json::Value {
    json!({ "exact": r.to_string(), "value": r.to_f64() })
}

#[derive(Serialize)]
struct SecondTermReport {
    value: f64,
    tail_bound: f64,
    prime_cutoff: u64,
}

fn cmd_constants(cfg: &RunConfig) -> Outcome {
    let c = cfg.conductor;
    let profile = conductor_profile(c);
    if !profile.admissible {
        eprintln!("warning: c = {c} is not an admissible minimal conductor shape");
    }
    let consts = densities::second_term_constants(cfg.precision)?;
    let digits = cfg.precision.min(40) as usize;
    let plus = cl3_plus_closed_form(&profile);
    let mut per_sign = Vec::new();
    println!("c = {c}");
    println!("  #Cl_3^+                    {plus}");
    for &sig in &cfg.signs {
        let avg_minus = densities::avg_minus(sig, c);
        let avg_total = densities::avg_total(sig, c);
        let coprime = densities::avg_total_coprime(sig, c);
        let proportion = densities::proportion_lower_bound(sig, c).ok();
        let second = if !c.is_multiple_of(3) {
            let v = densities::second_term_total(sig, c, cfg.prime_cutoff, 1.0, &consts)?;
            Some(SecondTermReport {
                value: v.value.to_f64(),
                tail_bound: v.tail_bound,
                prime_cutoff: cfg.prime_cutoff,
            })
        } else {
            None
        };
        println!("{}:", sig.name());
        println!(
            "  average #Cl_3^-            {}",
            densities::describe_rational(&avg_minus)
        );
        println!(
            "  average #Cl_3              {}",
            densities::describe_rational(&avg_total)
        );
        println!(
            "  average #Cl_3, coprime     {}",
            densities::describe_rational(&coprime)
        );
        match &proportion {
            Some(p) => println!(
                "  proportion trivial >=      {}",
                densities::describe_rational(p)
            ),
            None => println!("  proportion trivial >=      (needs 9 ∤ c)"),
        }
        println!(
            "  c2                         {}",
            consts.c2(sig).to_decimal(digits)
        );
        match &second {
            Some(s) => println!(
                "  X^(5/6) coefficient        {:.12} (tail bound {:.2e}, primes <= {})",
                s.value, s.tail_bound, s.prime_cutoff
            ),
            None => println!("  X^(5/6) coefficient        (needs 3 ∤ c)"),
        }
        per_sign.push(json!({
            "signature": sig.name(),
            "avg_minus": exact(&avg_minus),
            "avg_total": exact(&avg_total),
            "avg_total_coprime": exact(&coprime),
            "proportion_lower_bound": proportion.as_ref().map(exact),
            "c2": consts.c2(sig).to_decimal(digits),
            "second_term": second,
        }));
    }
    let density = densities::coprime_field_density(c);
    println!("density of d coprime to c    {density}");
    println!(
        "zeta(2/3)                    {}",
        consts.zeta23.to_decimal(digits)
    );
    println!(
        "Gamma(1/3)                   {}",
        consts.gamma13.to_decimal(digits)
    );
    println!(
        "Gamma(2/3)                   {}",
        consts.gamma23.to_decimal(digits)
    );
    if let Some(path) = &cfg.out {
        let doc = json!({
            "c": c,
            "admissible": profile.admissible,
            "cl3_plus": plus,
            "coprime_field_density_over_pi2": density.coeff.to_string(),
            "zeta_2_3": consts.zeta23.to_decimal(digits),
            "gamma_1_3": consts.gamma13.to_decimal(digits),
            "gamma_2_3": consts.gamma23.to_decimal(digits),
            "route_agreement_digits": consts.route_agreement,
            "signatures": per_sign,
        });
        write_file(
            path,
            &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"),
        )?;
    }
    Ok(())
}

fn cmd_oracle(cfg: &RunConfig) -> Outcome {
    let x = cfg.require_bound().map_err(Failure::Usage)?;
    let c = cfg.conductor;
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for &sig in &cfg.signs {
        for d in fundamental_discriminants(x + 1, sig == CubicSignature::Imaginary) {
            let k = QuadraticField::new(d)?;
            let fast = ray_class_group(&k, c)?.group.invariants;
            let slow = brute_force_ray_class_oracle(&k, c, ORACLE_NORM_BOUND)?.invariants;
            checked += 1;
            if fast != slow {
                println!("d = {d}, c = {c}: {fast:?} vs brute force {slow:?}");
                mismatches.push(d);
            }
        }
    }
    println!("{checked} fields compared, {} mismatches", mismatches.len());
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} mismatches",
            mismatches.len()
        )))
    }
}

fn run(cfg: &RunConfig) -> Outcome {
    match cfg.command {
        Command::Census => cmd_census(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Verify => cmd_verify(cfg),
        Command::Constants => cmd_constants(cfg),
        Command::Oracle => cmd_oracle(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::from_cli(cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Resource(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
