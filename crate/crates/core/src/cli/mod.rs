//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data,
//! 3 convergence.

pub mod input;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::likelihood::{Family, UnitObservations};
use crate::mixedlogit::{self, design_from_units, odds_ratios, DesignTerm};
use crate::npml::{degenerate_fit, em_fit, lr_test, EmConfig};
use crate::paperdata::{self, CohortName, ExperienceEncoding};
use crate::render::{self, Suppression, TableOptions};
use crate::simtest::{self, OrderRule, Placement, SimConfig};
use crate::zmatrix::{
    compute_z, density_weights, diagnostics, reorder, shrink_estimates, smooth_covariates,
    OrderSpec, SmoothingConvention, ZMatrix,
};

/// Relative `--output` paths are resolved against this directory when set.
pub const OUTPUT_DIR_ENV: &str = "ZSIM_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "zsim",
    version,
    about = "z-similarity matrices for repeated-measures data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute, order and render the z-matrix.
    Zmatrix(ZmatrixArgs),
    /// Fit a nonparametric mixture and test it against one atom.
    Npml(NpmlArgs),
    /// Random-intercept logistic regression with odds ratios.
    Mixedlogit(MixedLogitArgs),
    /// Null-simulation lineup or tail test.
    Simtest(SimtestArgs),
    /// Empirical-Bayes shrinkage of the unit estimates.
    Shrink(ShrinkArgs),
    /// Smooth a covariate through the z-matrix.
    Smooth(SmoothArgs),
    /// Compare computed results with the embedded reference values.
    Reproduce(ReproduceArgs),
    /// Write an embedded cohort as CSV.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Binomial,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Cohort CSV file.
    #[arg(required_unless_present = "cohort", conflicts_with = "cohort")]
    pub input: Option<PathBuf>,
    /// Use an embedded cohort instead of a file.
    #[arg(long, value_parser = ["dual_first_detection", "cad_recall", "cad_vs_dual_false_recall"])]
    pub cohort: Option<String>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Binomial)]
    pub family: FamilyArg,
    /// Per-unit covariate CSV for the multinomial schema.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    /// `estimate`, `<covariate>[:level,level,...]` or `ids:<id>,<id>,...`.
    #[arg(long)]
    pub order: Option<String>,
    /// Ordering inside covariate groups, or the direction for `estimate`.
    #[arg(long, value_parser = ["estimate-asc", "estimate-desc"], default_value = "estimate-asc")]
    pub within_order: String,
    /// Estimate component used for ordering (multinomial).
    #[arg(long, default_value_t = 0)]
    pub component: usize,
}

#[derive(Debug, Args)]
pub struct ZmatrixArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub order: OrderArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Print z_ji at row i, column j.
    #[arg(long)]
    pub transpose: bool,
    #[arg(long, default_value_t = 1000.0)]
    pub scale: f64,
    /// Blank cells whose scaled value is below this.
    #[arg(long, default_value_t = 1.0)]
    pub suppress_below: f64,
    /// Apply the blanking rule to the scaled value before rounding.
    #[arg(long)]
    pub suppress_before_rounding: bool,
    /// Covariate used as row and column labels.
    #[arg(long)]
    pub label: Option<String>,
    /// Append diagnostics to text output.
    #[arg(long)]
    pub diagnostics: bool,
    /// Also write the density/CDF chart here.
    #[arg(long)]
    pub cdf_plot: Option<PathBuf>,
    /// Log10 estimate axis for the density/CDF chart.
    #[arg(long)]
    pub log_x: bool,
}

#[derive(Debug, Args)]
pub struct NpmlArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub max_atoms: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub merge_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub prune_mass: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct MixedLogitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Shorthand for `--term center=2` plus an experience term: gt<N>, years or log.
    #[arg(long)]
    pub experience: Option<String>,
    /// Covariate term: `cov=LEVEL`, `cov>T`, `cov` or `log:cov`. Repeatable.
    #[arg(long = "term")]
    pub terms: Vec<String>,
    #[arg(long, default_value_t = mixedlogit::DEFAULT_NODES)]
    pub nodes: usize,
    /// Fixed effects only.
    #[arg(long)]
    pub fixed: bool,
}

#[derive(Debug, Args)]
pub struct SimtestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = simtest::DEFAULT_LINEUP_REPLICATES)]
    pub replicates: usize,
    /// Put the observed panel first instead of at a seeded position.
    #[arg(long)]
    pub top_left: bool,
    /// Keep input order in every panel instead of sorting by estimate.
    #[arg(long)]
    pub fixed_order: bool,
    /// Where to write the answer record (default: next to the SVG, or stderr).
    #[arg(long)]
    pub answer: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShrinkArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub covariate: String,
    /// Use the unnormalized weights z_ik / z_+k.
    #[arg(long)]
    pub literal_smoothing: bool,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(value_parser = ["dual_first_detection", "cad_recall", "cad_vs_dual_false_recall"])]
    pub cohort: String,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Parses arguments and runs one command; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Zmatrix(a) => cmd_zmatrix(a, stdout),
        Command::Npml(a) => cmd_npml(a, stdout),
        Command::Mixedlogit(a) => cmd_mixedlogit(a, stdout),
        Command::Simtest(a) => cmd_simtest(a, stdout, stderr),
        Command::Shrink(a) => cmd_shrink(a, stdout),
        Command::Smooth(a) => cmd_smooth(a, stdout),
        Command::Reproduce(a) => cmd_reproduce(a, stdout),
        Command::Export(a) => {
            let text = paperdata::export_csv(CohortName::parse(&a.cohort)?)?;
            emit(text.as_bytes(), a.output.as_deref(), stdout)
        }
    }
}

// ---------------------------------------------------------------------------
// helpers

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(bytes: &[u8], output: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => {
            let path = resolve_output(path);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn unsupported(format: Format, command: &str) -> Error {
    Error::InvalidArgument(format!("`{command}` does not produce {format:?} output").to_lowercase())
}

fn load_cohort(args: &InputArgs) -> Result<(Vec<UnitObservations>, Family)> {
    if let Some(name) = &args.cohort {
        return Ok((paperdata::load(name)?, Family::Binomial));
    }
    let path = args
        .input
        .as_ref()
        .expect("clap requires input or --cohort");
    let text = std::fs::read_to_string(path)?;
    match args.family {
        FamilyArg::Binomial => {
            if args.covariates.is_some() {
                return Err(Error::InvalidArgument(
                    "--covariates is only used with --family multinomial".into(),
                ));
            }
            Ok((input::parse_binomial(&text)?, Family::Binomial))
        }
        FamilyArg::Multinomial => {
            let sidecar = args
                .covariates
                .as_ref()
                .map(std::fs::read_to_string)
                .transpose()?;
            input::parse_multinomial(&text, sidecar.as_deref())
        }
    }
}

fn parse_levels(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("order level `{v}` is not numeric")))
        })
        .collect()
}

/// Parses `--order` / `--within-order` into an ordering.
pub fn order_spec(
    order: Option<&str>,
    within: &str,
    component: usize,
) -> Result<Option<OrderSpec>> {
    let descending = within == "estimate-desc";
    let Some(order) = order else { return Ok(None) };
    let spec = match order.split_once(':') {
        _ if order == "estimate" => OrderSpec::ByEstimate {
            component,
            descending,
        },
        Some(("ids", ids)) => {
            OrderSpec::Explicit(ids.split(',').map(|s| s.trim().to_string()).collect())
        }
        Some((covariate, levels)) => OrderSpec::ByCovariateThenEstimate {
            covariate: covariate.to_string(),
            levels: parse_levels(levels)?,
            component,
            descending,
        },
        None => OrderSpec::ByCovariateThenEstimate {
            covariate: order.to_string(),
            levels: Vec::new(),
            component,
            descending,
        },
    };
    Ok(Some(spec))
}

fn ordered_z(units: &[UnitObservations], family: &Family, order: &OrderArgs) -> Result<ZMatrix> {
    let z = compute_z(units, family)?;
    match order_spec(order.order.as_deref(), &order.within_order, order.component)? {
        Some(spec) => reorder(&z, &spec),
        None => Ok(z),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

// ---------------------------------------------------------------------------
// commands

fn cmd_zmatrix(a: &ZmatrixArgs, stdout: &mut dyn Write) -> Result<()> {
    let (units, family) = load_cohort(&a.input)?;
    let z = ordered_z(&units, &family, &a.order)?;
    let diag = diagnostics(&z);
    let label = a.label.clone().or_else(|| {
        match order_spec(
            a.order.order.as_deref(),
            &a.order.within_order,
            a.order.component,
        ) {
            Ok(Some(OrderSpec::ByCovariateThenEstimate { covariate, .. })) => Some(covariate),
            _ => None,
        }
    });
    let opts = TableOptions {
        transpose: a.transpose,
        scale: a.scale,
        suppress_below: a.suppress_below,
        suppression: if a.suppress_before_rounding {
            Suppression::PreRounding
        } else {
            Suppression::PostRounding
        },
        label_covariate: label,
    };

    let text = match a.out.format {
        Format::Text => {
            let mut text = render::table_text(&z, &opts);
            if a.diagnostics {
                text.push_str(&format!("\ntrace/n {}\n", fmt_f64(diag.trace_over_n)));
                text.push_str("unit diag colsum excess ratio\n");
                for (j, id) in z.order.iter().enumerate() {
                    text.push_str(&format!(
                        "{id} {} {} {} {}\n",
                        fmt_f64(diag.diag[j]),
                        fmt_f64(diag.colsum[j]),
                        fmt_f64(diag.excess[j]),
                        fmt_f64(diag.ratio[j])
                    ));
                }
            }
            text
        }
        Format::Json => {
            let rows: Vec<&[f64]> = (0..z.n()).map(|i| z.row(i)).collect();
            let estimates: Vec<&[f64]> = z.estimates.iter().map(|e| e.values()).collect();
            to_json(&json!({
                "family": family.name(),
                "order": z.order,
                "estimates": estimates,
                "z": rows,
                "diagnostics": diag,
            }))?
        }
        Format::Csv => render::matrix_csv(&z)?,
        Format::Svg => render::symbols_svg(&z),
    };
    emit(text.as_bytes(), a.out.output.as_deref(), stdout)?;

    if let Some(path) = &a.cdf_plot {
        let (density, cdf) = density_weights(&z);
        let svg = render::cdf_density_svg(
            &density,
            &cdf,
            &z.scalar_estimates(a.order.component),
            a.log_x,
        )?;
        emit(svg.as_bytes(), Some(path), stdout)?;
    }
    Ok(())
}

fn cmd_npml(a: &NpmlArgs, stdout: &mut dyn Write) -> Result<()> {
    let (units, family) = load_cohort(&a.input)?;
    let config = EmConfig {
        merge_tol: a.merge_tol,
        prune_mass: a.prune_mass,
        rel_tol: a.rel_tol,
        max_iter: a.max_iter,
        max_atoms: a.max_atoms,
        ..EmConfig::default()
    };
    let alt = em_fit(&units, &family, &config)?;
    let null = degenerate_fit(&units, &family)?;
    let lr = lr_test(&alt, &null)?;
    let text = match a.out.format {
        Format::Json => to_json(&json!({ "alternative": alt, "degenerate": null, "lr_test": lr }))?,
        Format::Text => {
            let mut text = format!("atoms {} iterations {}\n", alt.atoms.len(), alt.iterations);
            text.push_str("atom mass\n");
            for (atom, mass) in alt.atoms.iter().zip(&alt.masses) {
                let values: Vec<String> = atom.values().iter().map(|v| fmt_f64(*v)).collect();
                text.push_str(&format!("{} {}\n", values.join(","), fmt_f64(*mass)));
            }
            text.push_str(&format!("loglik {:.4}\n", alt.loglik));
            let null_atom: Vec<String> =
                null.atoms[0].values().iter().map(|v| fmt_f64(*v)).collect();
            text.push_str(&format!(
                "degenerate atom {} loglik {:.4}\n",
                null_atom.join(","),
                null.loglik
            ));
            text.push_str(&format!(
                "LR {:.4} p {:.3e} ({})\n",
                lr.statistic, lr.p_value, lr.df_convention
            ));
            text
        }
        other => return Err(unsupported(other, "npml")),
    };
    emit(text.as_bytes(), a.out.output.as_deref(), stdout)
}

/// Parses a `--term` value.
pub fn parse_term(text: &str) -> Result<DesignTerm> {
    let bad = || {
        Error::InvalidArgument(format!(
            "term `{text}`: expected cov=LEVEL, cov>T, cov or log:cov"
        ))
    };
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if let Some(cov) = text.strip_prefix("log:") {
        return Ok(DesignTerm::Log {
            covariate: cov.to_string(),
        });
    }
    if let Some((cov, level)) = text.split_once('=') {
        return Ok(DesignTerm::Indicator {
            covariate: cov.to_string(),
            level: number(level)?,
        });
    }
    if let Some((cov, t)) = text.split_once('>') {
        return Ok(DesignTerm::Above {
            covariate: cov.to_string(),
            threshold: number(t)?,
        });
    }
    if text.is_empty() || text.contains([':', '<']) {
        return Err(bad());
    }
    Ok(DesignTerm::Linear {
        covariate: text.to_string(),
    })
}

fn cmd_mixedlogit(a: &MixedLogitArgs, stdout: &mut dyn Write) -> Result<()> {
    let (units, _) = load_cohort(&a.input)?;
    let mut terms = match &a.experience {
        Some(enc) => paperdata::false_recall_terms(ExperienceEncoding::parse(enc)?),
        None => Vec::new(),
    };
    for t in &a.terms {
        terms.push(parse_term(t)?);
    }
    if terms.is_empty() {
        return Err(Error::InvalidArgument(
            "give --experience or at least one --term".into(),
        ));
    }
    let design = design_from_units(&units, &terms)?;
    let fit = if a.fixed {
        mixedlogit::fixed_logit_fit(&design)?
    } else {
        mixedlogit::fit(&design, a.nodes)?
    };
    let ors = odds_ratios(&fit);
    let text = match a.out.format {
        Format::Json => to_json(&json!({ "fit": fit, "odds_ratios": ors }))?,
        Format::Text => {
            let width = ors.iter().map(|o| o.name.len()).max().unwrap_or(0).max(4);
            let mut text = format!("{:<width$} lo95 OR hi95\n", "term");
            for or in &ors {
                text.push_str(&format!("{:<width$} {}\n", or.name, or.triple()));
            }
            if a.fixed {
                text.push_str("fixed effects only\n");
            } else {
                text.push_str(&format!("ln sigma2 {:.2}", fit.ln_sigma2));
                if fit.boundary_flag {
                    text.push_str(" (boundary)");
                } else {
                    text.push_str(&format!(" se {:.2}", fit.se_ln_sigma2()));
                }
                text.push('\n');
            }
            text.push_str(&format!("loglik {:.4}\n", fit.loglik));
            text
        }
        other => return Err(unsupported(other, "mixedlogit")),
    };
    emit(text.as_bytes(), a.out.output.as_deref(), stdout)
}

fn cmd_simtest(a: &SimtestArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let seed = a
        .seed
        .ok_or_else(|| Error::InvalidArgument("simtest needs an explicit --seed".into()))?;
    let (units, family) = load_cohort(&a.input)?;
    let order_rule = if a.fixed_order {
        OrderRule::Fixed
    } else {
        OrderRule::DescendingBySimulatedEstimate
    };
    let config = SimConfig {
        seed,
        replicates: a.replicates,
        order_rule,
    };
    let sims = simtest::simulate_null(&units, &family, &config)?;
    let mut observed = compute_z(&units, &family)?;
    if order_rule == OrderRule::DescendingBySimulatedEstimate {
        observed = reorder(
            &observed,
            &OrderSpec::ByEstimate {
                component: 0,
                descending: true,
            },
        )?;
    }

    match a.out.format {
        Format::Svg => {
            let placement = if a.top_left {
                Placement::TopLeft
            } else {
                Placement::Random
            };
            let layout = simtest::lineup_panels(sims.len(), seed, placement)?;
            let svg = render::lineup_svg(&observed, &sims, &layout)?;
            emit(svg.as_bytes(), a.out.output.as_deref(), stdout)?;
            let answer = to_json(&layout.answer)?;
            let answer_path = a.answer.clone().or_else(|| {
                a.out
                    .output
                    .as_ref()
                    .map(|p| p.with_extension("answer.json"))
            });
            match answer_path {
                Some(path) => emit(answer.as_bytes(), Some(&path), stdout),
                None => Ok(stderr.write_all(answer.as_bytes())?),
            }
        }
        Format::Json | Format::Text => {
            let obs = diagnostics(&observed).trace_over_n;
            let sim: Vec<f64> = sims.iter().map(|z| diagnostics(z).trace_over_n).collect();
            let at_least = sim.iter().filter(|t| **t >= obs).count();
            let p = (at_least + 1) as f64 / (sim.len() + 1) as f64;
            let text = if a.out.format == Format::Json {
                to_json(&json!({
                    "seed": seed,
                    "replicates": sim.len(),
                    "observed_trace_over_n": obs,
                    "simulated_trace_over_n": sim,
                    "p_value": p,
                }))?
            } else {
                format!(
                    "observed trace/n {}\nreplicates {}\nsimulated >= observed {}\np {}\n",
                    fmt_f64(obs),
                    sim.len(),
                    at_least,
                    fmt_f64(p)
                )
            };
            emit(text.as_bytes(), a.out.output.as_deref(), stdout)
        }
        Format::Csv => Err(unsupported(Format::Csv, "simtest")),
    }
}

fn vector_output(
    ids: &[String],
    columns: &[(&str, Vec<f64>)],
    format: Format,
    metadata: serde_json::Value,
    titles: (&str, &str),
) -> Result<String> {
    match format {
        Format::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            let mut header = vec!["unit_id"];
            header.extend(columns.iter().map(|c| c.0));
            writer.write_record(&header)?;
            for (i, id) in ids.iter().enumerate() {
                let mut record = vec![id.clone()];
                record.extend(columns.iter().map(|c| format!("{:?}", c.1[i])));
                writer.write_record(&record)?;
            }
            let bytes = writer.into_inner().map_err(|e| e.into_error())?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        Format::Json => {
            let units: Vec<_> = ids
                .iter()
                .enumerate()
                .map(|(i, id)| {
                    let mut row = serde_json::Map::new();
                    row.insert("unit_id".into(), json!(id));
                    for (name, values) in columns {
                        row.insert((*name).into(), json!(values[i]));
                    }
                    row
                })
                .collect();
            to_json(&json!({ "metadata": metadata, "units": units }))
        }
        Format::Text => {
            let mut text = String::new();
            if let serde_json::Value::Object(meta) = &metadata {
                for (k, v) in meta {
                    text.push_str(&format!("# {k}: {v}\n"));
                }
            }
            let mut header = vec!["unit_id".to_string()];
            header.extend(columns.iter().map(|c| c.0.to_string()));
            text.push_str(&header.join(" "));
            text.push('\n');
            for (i, id) in ids.iter().enumerate() {
                let mut line = vec![id.clone()];
                line.extend(columns.iter().map(|c| fmt_f64(c.1[i])));
                text.push_str(&line.join(" "));
                text.push('\n');
            }
            Ok(text)
        }
        Format::Svg => {
            let (x, y) = (&columns[0].1, &columns[columns.len() - 1].1);
            render::scatter_svg(x, y, ids, false, titles)
        }
    }
}

fn cmd_shrink(a: &ShrinkArgs, stdout: &mut dyn Write) -> Result<()> {
    let (units, family) = load_cohort(&a.input)?;
    let z = compute_z(&units, &family)?;
    let shrunk = shrink_estimates(&z);
    let m = family.dimension();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for c in 0..m {
        let suffix = if m == 1 {
            String::new()
        } else {
            format!("_{c}")
        };
        columns.push((
            format!("estimate{suffix}"),
            z.estimates.iter().map(|e| e.component(c)).collect(),
        ));
        columns.push((
            format!("shrunk{suffix}"),
            shrunk.iter().map(|e| e.component(c)).collect(),
        ));
    }
    let columns: Vec<(&str, Vec<f64>)> = columns
        .iter()
        .map(|(n, v)| (n.as_str(), v.clone()))
        .collect();
    let text = vector_output(
        &z.order,
        &columns,
        a.out.format,
        json!({ "family": family.name() }),
        ("estimate", "shrunk"),
    )?;
    emit(text.as_bytes(), a.out.output.as_deref(), stdout)
}

fn cmd_smooth(a: &SmoothArgs, stdout: &mut dyn Write) -> Result<()> {
    let (units, family) = load_cohort(&a.input)?;
    let z = compute_z(&units, &family)?;
    let x = units
        .iter()
        .map(|u| {
            u.covariate(&a.covariate).ok_or_else(|| {
                Error::Schema(format!(
                    "unit {}: missing covariate `{}`",
                    u.unit_id, a.covariate
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (used, other) = if a.literal_smoothing {
        (
            SmoothingConvention::Literal,
            SmoothingConvention::Normalized,
        )
    } else {
        (
            SmoothingConvention::Normalized,
            SmoothingConvention::Literal,
        )
    };
    let smoothed = smooth_covariates(&z, &x, used)?;
    let alternative = smooth_covariates(&z, &x, other)?;
    let max_diff = smoothed
        .iter()
        .zip(&alternative)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let name = |c: SmoothingConvention| match c {
        SmoothingConvention::Normalized => "normalized",
        SmoothingConvention::Literal => "literal",
    };
    let metadata = json!({
        "covariate": a.covariate,
        "convention": name(used),
        "weights_sum_to_one": used == SmoothingConvention::Normalized,
        "differs_from": name(other),
        "differs": max_diff > 1e-12,
        "max_abs_difference": max_diff,
    });
    let estimates = z.scalar_estimates(0);
    let columns = [
        ("estimate", estimates),
        (a.covariate.as_str(), x),
        ("smoothed", smoothed),
    ];
    let text = vector_output(
        &z.order,
        &columns,
        a.out.format,
        metadata,
        ("estimate", "smoothed"),
    )?;
    emit(text.as_bytes(), a.out.output.as_deref(), stdout)
}

fn cmd_reproduce(a: &ReproduceArgs, stdout: &mut dyn Write) -> Result<()> {
    let report = paperdata::reproduce_all()?;
    let text = match a.out.format {
        Format::Text => report.to_text(),
        Format::Json => to_json(&report)?,
        other => return Err(unsupported(other, "reproduce")),
    };
    emit(text.as_bytes(), a.out.output.as_deref(), stdout)
}
