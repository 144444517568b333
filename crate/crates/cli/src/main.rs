use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pcnlab::claims::generate_synthetic_claims;
use pcnlab::ergm::{parse_model, sample_graphs, ErgParams, ErgStatistics};
use pcnlab::pipeline::{self, files, PipelineConfig};
use pcnlab::stats::TestKind;

/// Physician collaboration networks from hospital claims.
#[derive(Debug, Parser)]
#[command(name = "pcnlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic claims to `claims.csv`.
    Generate(Common),
    /// Claims to per-hospital edge lists (`pcn_edges.csv`) and outcomes (`outcomes.csv`).
    Build(Common),
    /// Edge lists to centralization metrics (`metrics.csv`).
    Metrics(Common),
    /// Metrics and outcomes to cost regressions (`regression.csv`, `features.csv`).
    Regress(RegressArgs),
    /// Fit or simulate Markov random graph models.
    #[command(subcommand)]
    Ergm(ErgmCommand),
    /// t-test of one parameter between two fit sets (`comparison.json`).
    Compare(CompareArgs),
    /// Run every stage and write all artifacts plus `report.json`.
    Report(Common),
}

#[derive(Debug, Subcommand)]
enum ErgmCommand {
    /// Fit networks from an edge list.
    Fit(FitArgs),
    /// Forward-simulate statistics at given parameters.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Input file for the stage (claims CSV for `build`/`report`, edge list for `metrics`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, env = "PCNLAB_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    readmission_window: Option<u32>,
    /// Hospitals per readmission group.
    #[arg(long)]
    group_size: Option<usize>,
    /// Comma-separated model terms, e.g. `edge,2-star,3-star,triangle`.
    #[arg(long)]
    ergm_terms: Option<String>,
    /// Parameter compared between groups; defaults to `triangle`, or the last
    /// model term when the model has no triangle.
    #[arg(long)]
    term: Option<String>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Welch instead of pooled-variance t-test.
    #[arg(long)]
    welch: bool,
    /// Include the moderator main effect in moderation models.
    #[arg(long)]
    full_moderation: bool,
}

#[derive(Debug, Args)]
struct RegressArgs {
    #[command(flatten)]
    common: Common,
    /// Outcomes CSV; defaults to `outcomes.csv` next to the metrics input.
    #[arg(long)]
    outcomes: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Group {
    Top,
    Bottom,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated hospital ids to fit.
    #[arg(long, conflicts_with = "group", value_delimiter = ',')]
    hospitals: Vec<String>,
    /// Fit the top or bottom readmission group (needs `--outcomes`).
    #[arg(long, value_enum, requires = "outcomes")]
    group: Option<Group>,
    #[arg(long)]
    outcomes: Option<PathBuf>,
    /// Output file name inside the output directory.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    sigma3: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tau: f64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Fit set of the first group.
    #[arg(long)]
    a: PathBuf,
    /// Fit set of the second group.
    #[arg(long)]
    b: PathBuf,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                PipelineConfig::from_toml(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.readmission_window {
            cfg.readmission_window = v;
        }
        if let Some(v) = self.group_size {
            cfg.group_size = v;
        }
        if let Some(v) = &self.ergm_terms {
            cfg.ergm_terms = parse_model(v)?;
        }
        match &self.term {
            Some(t) => cfg.comparison_term = t.parse()?,
            None if !cfg.ergm_terms.contains(&cfg.comparison_term) => {
                if let Some(&last) = cfg.ergm_terms.last() {
                    cfg.comparison_term = last;
                }
            }
            None => {}
        }
        if let Some(v) = self.burn_in {
            cfg.mcmc.burn_in = v;
        }
        if let Some(v) = self.thin {
            cfg.mcmc.thinning = v;
        }
        if let Some(v) = self.samples {
            cfg.mcmc.n_samples = v;
        }
        if self.welch {
            cfg.test_kind = TestKind::Welch;
        }
        if self.full_moderation {
            cfg.full_moderation = true;
        }
        cfg.out_dir = Some(self.out_dir.clone());
        cfg.validate()?;
        Ok(cfg)
    }

    fn input(&self, what: &str) -> Result<&Path> {
        match &self.input {
            Some(p) => Ok(p),
            None => bail!("--input <{what}> is required"),
        }
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }
}

fn generate(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let claims = generate_synthetic_claims(&cfg.generator_config())?;
    let path = c.out(files::CLAIMS)?;
    pipeline::write_claims_file(&path, &claims)?;
    println!("{} claims written to {}", claims.len(), path.display());
    Ok(())
}

fn build(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let claims = pipeline::load_claims(c.input("claims.csv")?)?;
    let outcomes = pipeline::outcome_table(&claims, cfg.readmission_window)?;
    let pcns = pcnlab::network::partition_pcns(&claims);
    pipeline::write_edges_file(&c.out(files::EDGES)?, &pcns)?;
    pipeline::write_outcomes(&c.out(files::OUTCOMES)?, &outcomes)?;
    println!("{} networks, {} hospitals with admissions", pcns.len(), outcomes.len());
    Ok(())
}

fn metrics(c: &Common) -> Result<()> {
    let pcns = pipeline::read_edges_file(c.input("pcn_edges.csv")?)?;
    let table = pipeline::metrics_table(&pcns);
    pipeline::write_metrics(&c.out(files::METRICS)?, &table)?;
    for m in &table {
        println!(
            "{}\tN={}\tdensity={:.4}\tdegree_centralization={:.4}\tbetweenness_centralization={:.4}",
            m.hospital_id, m.n, m.density, m.degree_centralization, m.betweenness_centralization
        );
    }
    Ok(())
}

fn sibling(input: &Path, name: &str) -> PathBuf {
    input.parent().unwrap_or(Path::new(".")).join(name)
}

fn regress(args: &RegressArgs) -> Result<()> {
    let c = &args.common;
    let cfg = c.config()?;
    let metrics_path = c.input("metrics.csv")?;
    let outcomes_path = args.outcomes.clone().unwrap_or_else(|| sibling(metrics_path, files::OUTCOMES));
    let metrics = pipeline::read_metrics(metrics_path)?;
    let outcomes = pipeline::read_outcomes(&outcomes_path)?;
    let (rows, notices) = pipeline::join_rows(&metrics, &outcomes);
    for n in notices {
        log::warn!("{n}");
    }
    let models = pipeline::fit_regressions(&rows, cfg.full_moderation)?;
    pipeline::write_regressions(&c.out(files::REGRESSION)?, &models)?;
    let features = pipeline::label_features(&models, cfg.alpha);
    pipeline::write_features(&c.out(files::FEATURES)?, &features)?;
    for f in &features {
        println!("{}\t{}\tbeta={:.4}\tp={:.4}\t{}", f.measure, f.outcome, f.beta, f.p_value, f.label.as_str());
    }
    Ok(())
}

fn ergm_fit(args: &FitArgs) -> Result<()> {
    let c = &args.common;
    let cfg = c.config()?;
    let pcns = pipeline::read_edges_file(c.input("pcn_edges.csv")?)?;
    let (hospitals, default_name) = match args.group {
        Some(group) => {
            let outcomes = pipeline::read_outcomes(args.outcomes.as_deref().expect("required by clap"))?;
            let (rows, _) = pipeline::join_rows(&pipeline::metrics_table(&pcns), &outcomes);
            let ranking = pipeline::rank_by_readmission(&rows);
            let Some((top, bottom)) = pipeline::select_groups(&ranking, cfg.group_size) else {
                bail!(
                    "{} networks with admissions; two groups of {} need {}",
                    ranking.len(),
                    cfg.group_size,
                    2 * cfg.group_size
                );
            };
            match group {
                Group::Top => (top, files::FITS_TOP),
                Group::Bottom => (bottom, files::FITS_BOTTOM),
            }
        }
        None if args.hospitals.is_empty() => (pcns.keys().cloned().collect(), "ergm_fits.json"),
        None => (args.hospitals.clone(), "ergm_fits.json"),
    };
    let result = pipeline::fit_networks(&pcns, &hospitals, &cfg.ergm_terms, &cfg.mcmc, &cfg.estimation, cfg.seed);
    let path = c.out(args.output.as_deref().unwrap_or(default_name))?;
    pipeline::write_fit_set(&path, &result.fits)?;
    for f in &result.fits {
        let terms: Vec<String> = f
            .terms
            .iter()
            .map(|t| format!("{}={:.3} (se {:.3}, ratio {:.3})", t.term, t.estimate, t.std_error, t.convergence_ratio))
            .collect();
        println!("{}\tconverged={}\t{}", f.hospital_id, f.converged, terms.join("\t"));
    }
    for f in &result.failures {
        eprintln!("{}: {}", f.hospital_id, f.error);
    }
    if result.fits.is_empty() && !result.failures.is_empty() {
        bail!("no network could be fitted");
    }
    Ok(())
}

fn ergm_simulate(args: &SimulateArgs) -> Result<()> {
    let c = &args.common;
    let cfg = c.config()?;
    let params = ErgParams::new(args.theta, args.sigma2, args.sigma3, args.tau);
    let mcmc = pcnlab::ergm::McmcConfig {
        seed: cfg.seed,
        ..cfg.mcmc
    };
    let run = sample_graphs(&params, args.nodes, &mcmc)?;
    let path = c.out("simulation.csv")?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    use std::io::Write;
    writeln!(w, "sample,edges,two_stars,three_stars,triangles")?;
    for (i, s) in run.samples.iter().enumerate() {
        let ErgStatistics {
            edges,
            two_stars,
            three_stars,
            triangles,
        } = s;
        writeln!(w, "{i},{edges},{two_stars},{three_stars},{triangles}")?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "n_nodes": run.n_nodes,
        "samples": run.samples.len(),
        "mean_density": run.mean_density,
        "acceptance_rate": run.acceptance_rate,
        "degenerate": run.degenerate,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let c = &args.common;
    let cfg = c.config()?;
    let term = cfg.comparison_term;
    let a = pipeline::read_fit_set(&args.a)?;
    let b = pipeline::read_fit_set(&args.b)?;
    let result = pipeline::compare_groups(&a.fits, &b.fits, term, cfg.test_kind)?;
    pipeline::write_json(&c.out(files::COMPARISON)?, &result)?;
    let t = &result.test;
    println!(
        "{term}: t({}) = {:.4}, p = {:.4}; means {:.4} vs {:.4}",
        t.degrees_of_freedom, t.t_value, t.p_value, t.group_means.0, t.group_means.1
    );
    Ok(())
}

fn report(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let report = pipeline::run_pipeline(&cfg)?;
    for n in &report.notices {
        log::info!("{n}");
    }
    let summary: BTreeMap<&str, serde_json::Value> = BTreeMap::from([
        ("hospitals", report.hospitals.len().into()),
        ("regressions", report.regressions.len().into()),
        ("comparison_p_value", report.comparison.as_ref().map(|c| c.test.p_value).into()),
        ("comparison_t_value", report.comparison.as_ref().map(|c| c.test.t_value).into()),
    ]);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Build(c) => build(c),
        Command::Metrics(c) => metrics(c),
        Command::Regress(a) => regress(a),
        Command::Ergm(ErgmCommand::Fit(a)) => ergm_fit(a),
        Command::Ergm(ErgmCommand::Simulate(a)) => ergm_simulate(a),
        Command::Compare(a) => compare(a),
        Command::Report(c) => report(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
