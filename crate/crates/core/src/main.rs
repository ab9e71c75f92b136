//! Command-line front end for the Floquet spectrum toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use floquet::cli::{self, fmt_sig, RunConfig};
use floquet::Error;

#[derive(Parser)]
#[command(
    name = "floquet",
    version,
    about = "Floquet spectra of periodic linear functional differential equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Model file (TOML).
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Search rectangle re_min,re_max,im_min,im_max.
    #[arg(long, value_name = "R", allow_hyphen_values = true)]
    region: Option<String>,
    /// Search disk center_re,center_im,radius.
    #[arg(long, value_name = "D", allow_hyphen_values = true, conflicts_with = "region")]
    disk: Option<String>,
    /// Map exponents into the fundamental strip Im z in (-pi/T, pi/T].
    #[arg(long)]
    strip: bool,
    /// Time collocation points.
    #[arg(long = "N", default_value_t = 64, value_name = "N")]
    n: usize,
    /// History (theta) nodes per panel.
    #[arg(long = "M", default_value_t = 64, value_name = "M")]
    m: usize,
    /// History nodes of the monodromy oracle.
    #[arg(long = "Mh", default_value_t = 128, value_name = "MH")]
    mh: usize,
    /// Residual tolerance for accepted exponents.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Cross-check against the monodromy / closed-form oracle.
    #[arg(long)]
    oracle: bool,
    /// RNG seed (probing matrices, verification inputs).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the structured report (JSON) here.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Locate Floquet exponents in a region and report their structure.
    Spectrum(Common),
    /// Jordan chains and multiplicities at a given exponent.
    Jordan {
        #[command(flatten)]
        common: Common,
        /// The exponent, as re,im.
        #[arg(long, value_name = "Z", allow_hyphen_values = true)]
        sigma: String,
    },
    /// Run the property verification suite for the model.
    Verify(Common),
    /// Apply the resolvent at z to a seeded field and report the identity residual.
    Resolvent {
        #[command(flatten)]
        common: Common,
        /// Evaluation point, as re,im.
        #[arg(long, value_name = "Z", allow_hyphen_values = true)]
        z: String,
    },
    /// Emit spectrum scatter/strip/eigenfunction data as delimited text.
    ExportPlot(Common),
}

fn parse_pair(s: &str) -> Result<Complex64, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("expected re,im — got `{s}`")));
    }
    let re: f64 =
        parts[0].trim().parse().map_err(|_| Error::Parse(format!("bad float `{}`", parts[0])))?;
    let im: f64 =
        parts[1].trim().parse().map_err(|_| Error::Parse(format!("bad float `{}`", parts[1])))?;
    Ok(Complex64::new(re, im))
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != n {
        return Err(Error::Parse(format!("expected {n} comma-separated values, got `{s}`")));
    }
    parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad float `{p}`"))))
        .collect()
}

fn build_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::new(common.model.clone());
    if let Some(r) = &common.region {
        let v = parse_floats(r, 4)?;
        cfg.region_rect = Some([v[0], v[1], v[2], v[3]]);
    }
    if let Some(d) = &common.disk {
        let v = parse_floats(d, 3)?;
        cfg.region_disk = Some([v[0], v[1], v[2]]);
    }
    cfg.n_time = common.n;
    cfg.m_theta = common.m;
    cfg.m_history = common.mh;
    cfg.tol = common.tol;
    cfg.strip = common.strip;
    cfg.oracle = common.oracle;
    cfg.seed = common.seed;
    cfg.out = common.out.clone();
    Ok(cfg)
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Spectrum(common) => {
            let cfg = build_config(&common)?;
            let report = cli::cmd_spectrum(&cfg)?;
            println!(
                "{:<28} {:>4} {:>10} {:>14} {:>14} {:>14}",
                "sigma", "m_g", "partials", "residual", "refine_delta", "fde_residual"
            );
            for p in &report.points {
                println!(
                    "{:>13} {:>14} {:>4} {:>10} {:>14} {:>14} {:>14}",
                    fmt_sig(p.sigma[0]),
                    format!("{}i", fmt_sig(p.sigma[1])),
                    p.m_g,
                    format!("{:?}", p.partials),
                    fmt_sig(p.residual),
                    p.refine_delta.map_or("-".into(), fmt_sig),
                    p.fde_residual.map_or("-".into(), fmt_sig),
                );
            }
            if let Some(oracle) = &report.oracle {
                match oracle.max_distance {
                    Some(d) => println!(
                        "oracle ({}): max strip distance {} over {} exponents",
                        oracle.method,
                        fmt_sig(d),
                        oracle.oracle_count
                    ),
                    None => println!("oracle: {}", oracle.detail),
                }
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(out) = &cfg.out {
                cli::write_report(&report, out)?;
            }
            Ok(())
        }
        Command::Jordan { common, sigma } => {
            let cfg = build_config(&common)?;
            let sigma = parse_pair(&sigma)?;
            let report = cli::cmd_jordan(&cfg, sigma)?;
            println!(
                "sigma = {} + {}i: m_g = {}, partials = {:?}, m_a = {}",
                fmt_sig(report.sigma[0]),
                fmt_sig(report.sigma[1]),
                report.m_g,
                report.partials,
                report.m_a
            );
            for (i, d) in report.chain_defects.iter().enumerate() {
                println!("chain {i}: length {}, defect {}", report.partials[i], fmt_sig(*d));
            }
            println!("pole-order hypothesis k(sigma) = r(Delta(sigma)): {}", report.pole_order);
            if let Some(out) = &cfg.out {
                cli::write_report(&report, out)?;
                for f in cli::write_chain_files(&report, out)? {
                    println!("wrote {}", f.display());
                }
            }
            Ok(())
        }
        Command::Verify(common) => {
            let cfg = build_config(&common)?;
            let report = cli::cmd_verify(&cfg)?;
            for c in &report.checks {
                let value = match (c.measured, c.threshold) {
                    (Some(m), Some(t)) => format!("{} (tol {})", fmt_sig(m), fmt_sig(t)),
                    _ => String::new(),
                };
                println!("{:<32} {:<8} {} {}", c.name, c.status, value, c.detail);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(out) = &cfg.out {
                cli::write_report(&report, out)?;
            }
            if report.passed {
                Ok(())
            } else {
                Err(Error::Numerics("verification suite reported failures".into()))
            }
        }
        Command::Resolvent { common, z } => {
            let cfg = build_config(&common)?;
            let z = parse_pair(&z)?;
            let report = cli::cmd_resolvent(&cfg, z)?;
            println!(
                "z = {} + {}i: identity residual {} (R(z,D0) bound M_z = {})",
                fmt_sig(report.z[0]),
                fmt_sig(report.z[1]),
                fmt_sig(report.identity_residual),
                fmt_sig(report.d0_bound)
            );
            if let Some(out) = &cfg.out {
                cli::write_report(&report, out)?;
            }
            Ok(())
        }
        Command::ExportPlot(common) => {
            let cfg = build_config(&common)?;
            let report = cli::cmd_export_plot(&cfg)?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if let Some(out) = &cfg.out {
                cli::write_report(&report, out)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
