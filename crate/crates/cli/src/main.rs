//! `ctwin`: restricted win statistics from long-format trial data, Monte
//! Carlo scenarios and quadrature truth values.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ctwin_core::config::{parse_config, scenario_from_section, truth_from_section};
use ctwin_core::data::{latent_to_long, read_long_path, records_to_long, write_long};
use ctwin_core::report::{results_csv, results_table, summary_csv, summary_table, truth_csv, truth_table};
use ctwin_core::simulation::{calibrate_lambda_c, gen_trial};
use ctwin_core::{
    delta_ci, estimate_full, fit_nuisances, influence_rows, restrict, run_scenario, sandwich, true_values, CensorModel,
    CopulaSpec, Dgp, Family, LongRow, MarginModel, Method, NuisanceConfig, ResultRow,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "ctwin", version, about = "Restricted-time win statistics (NB, WR, WO) under right censoring")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate NB, WR and WO with sandwich intervals from a long-format CSV.
    Estimate(EstimateArgs),
    /// Run Monte Carlo scenarios from a config file.
    Simulate(SimulateArgs),
    /// Quadrature truth values from a config file.
    Truth(TruthArgs),
    /// Write a simulated long-format dataset.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Long-format CSV: id,A,time,status,event_type,Z1,...,Zp.
    data: PathBuf,
    /// Restriction times, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "ipcw,m-ipcw")]
    method: Vec<Method>,
    /// Censoring model: km or cox.
    #[arg(long, default_value = "cox")]
    censor: CensorModel,
    /// Component margin model: cox or exponential.
    #[arg(long, default_value = "cox")]
    margin: MarginModel,
    /// Working copula: independence, gumbel, clayton, frank or plackett.
    #[arg(long, default_value = "gumbel")]
    copula: Family,
    /// event_type codes, highest priority first (default: ascending codes).
    #[arg(long, value_delimiter = ',')]
    priority: Option<Vec<u32>>,
    /// Covariate columns to adjust for (default: all).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 0.95)]
    conf_level: f64,
    /// Write the result CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the restricted records (at the first τ) back as long format.
    #[arg(long)]
    dump_records: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Override the seed of every section.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TruthArgs {
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value = "gumbel")]
    copula: Family,
    #[arg(long, default_value_t = 1.25)]
    theta: f64,
    #[arg(long, default_value_t = 200)]
    n_per_arm: usize,
    /// Target censoring proportion; the censoring rate is calibrated to it.
    #[arg(long, default_value_t = 0.3)]
    censoring: f64,
    /// Administrative end of follow-up.
    #[arg(long, default_value_t = 36.0)]
    admin_end: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn select_covariates(rows: &mut [LongRow], names: &[String], wanted: &[String]) -> Result<()> {
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            names
                .iter()
                .position(|n| n == w)
                .with_context(|| format!("unknown covariate column '{w}' (have {})", names.join(",")))
        })
        .collect::<Result<_>>()?;
    for r in rows {
        r.covariates = idx.iter().map(|&k| r.covariates[k]).collect();
    }
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let data = read_long_path(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let mut rows = data.rows;
    if let Some(w) = &a.covariates {
        select_covariates(&mut rows, &data.covariate_names, w)?;
    }
    let priority = match &a.priority {
        Some(p) => p.clone(),
        None => {
            let mut codes: Vec<u32> = rows.iter().map(|r| r.event_type).filter(|&c| c > 0).collect();
            codes.sort_unstable();
            codes.dedup();
            codes
        }
    };
    if priority.is_empty() {
        bail!("no component events in {}", a.data.display());
    }
    let cfg = NuisanceConfig {
        censor: a.censor,
        margin: a.margin,
        copula: a.copula,
        eps: a.eps,
        ..NuisanceConfig::default()
    };
    let mut out = Vec::new();
    for (k, &tau) in a.tau.iter().enumerate() {
        let records = restrict(&rows, tau, &priority)?;
        if k == 0 {
            if let Some(p) = &a.dump_records {
                let mut buf = Vec::new();
                write_long(&mut buf, &records_to_long(&records, &priority))?;
                fs::write(p, buf).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        for &method in &a.method {
            if method == Method::Raw {
                bail!("method 'raw' ignores censoring and is not available here");
            }
            let copula = (method == Method::MIpcw).then_some(a.copula);
            let cell = || -> ctwin_core::Result<_> {
                let fitted = fit_nuisances(&records, method, &cfg)?;
                let est = estimate_full(&records, tau, method, &fitted.bundle)?;
                let infl = influence_rows(&records, &est, &fitted, tau)?;
                if infl.copula_term_dropped {
                    eprintln!("note: tau={tau} {}: copula fit at a boundary, its variance term dropped", method.label());
                }
                delta_ci(&est.components, &sandwich(&infl), a.conf_level)
            };
            match cell() {
                Ok(iv) => out.extend(ResultRow::from_intervals(tau, method, copula, &iv)),
                Err(e) => {
                    eprintln!("note: tau={tau} {}: {e}; reporting NA", method.label());
                    out.extend(ResultRow::missing(tau, method, copula));
                }
            }
        }
    }
    print!("{}", results_table(&out));
    if let Some(p) = &a.out {
        let name = a.data.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let lower = |s: String| s.to_lowercase();
        let comment = format!(
            "data={name} censor={} margin={} copula={} eps={} conf_level={}",
            lower(format!("{:?}", a.censor)),
            lower(format!("{:?}", a.margin)),
            a.copula.name(),
            a.eps,
            a.conf_level
        );
        write_out(p, &results_csv(&out, Some(&comment)))?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut csv = String::new();
    for mut section in parse_config(&text)? {
        let mut cfg = scenario_from_section(&mut section).with_context(|| format!("section [{}]", section.name))?;
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
        let s = run_scenario(&cfg)?;
        if !section.name.is_empty() {
            println!("[{}]", section.name);
            csv.push_str(&format!("# section={}\n", section.name));
        }
        println!("# {}", ctwin_core::report::summary_comment(&s));
        print!("{}", summary_table(&s));
        csv.push_str(&summary_csv(&s));
    }
    if let Some(p) = &a.out {
        write_out(p, &csv)?;
    }
    Ok(())
}

fn cmd_truth(a: &TruthArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut csv = String::new();
    for mut section in parse_config(&text)? {
        let (dgp, taus) = truth_from_section(&mut section).with_context(|| format!("section [{}]", section.name))?;
        let rows = taus.iter().map(|&t| true_values(&dgp, t)).collect::<ctwin_core::Result<Vec<_>>>()?;
        let comment = format!("{}copula={} theta={}", section_prefix(&section.name), dgp.copula.family.name(), dgp.copula.theta);
        println!("# {comment}");
        print!("{}", truth_table(&rows));
        csv.push_str(&truth_csv(&rows, Some(&comment)));
    }
    if let Some(p) = &a.out {
        write_out(p, &csv)?;
    }
    Ok(())
}

fn section_prefix(name: &str) -> String {
    if name.is_empty() {
        String::new()
    } else {
        format!("section={name} ")
    }
}

fn cmd_gen_data(a: &GenDataArgs) -> Result<()> {
    let spec = if a.copula == Family::Independence {
        CopulaSpec::independence()
    } else {
        CopulaSpec::new(a.copula, a.theta)?
    };
    let base = Dgp::new(
        ctwin_core::simulation::default_components(),
        spec,
        ctwin_core::simulation::DEFAULT_CENSOR_BETA.to_vec(),
        0.0,
    )?;
    let dgp = if a.censoring > 0.0 {
        base.with_lambda_c(calibrate_lambda_c(&base, a.censoring, a.seed)?)
    } else {
        base
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let subjects = gen_trial(&mut rng, &dgp, a.n_per_arm)?;
    let rows = latent_to_long(&subjects, &dgp, a.admin_end);
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_long(std::io::BufWriter::new(f), &rows)?;
        }
        None => write_long(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Truth(a) => cmd_truth(a),
        Command::GenData(a) => cmd_gen_data(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
