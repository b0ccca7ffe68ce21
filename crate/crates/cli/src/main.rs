use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jls::clustering::{cluster_fit, cluster_link_summaries, KMeansOptions};
use jls::io::{
    read_attribute_matrix, read_fit, read_social_network, read_truth, write_cluster_summaries, write_clusters,
    write_fit, write_metrics, write_positions, write_rank_pairs, write_replication_csv, write_replication_plot_data,
    write_trace, write_truth_dir, FitFile, SocialFormat,
};
use jls::metrics::{average_absolute_error, pairwise_distance_ratios, rank_diagnostics, roc_auc, Entries};
use jls::model::{AttributeMatrix, LatentConfig, SocialNetwork};
use jls::report::{compare, fit_statistics, read_reference, write_report, Reference, DEFAULT_TOLERANCE};
use jls::simulation::{generate_replicate, run_replication_study, true_probabilities, Quantiles, SimulationSpec};
use jls::vbem::{fit, posterior_link_probabilities, AttributeUpdate, FitData, FitOptions, FitResult, ModelKind};

#[derive(Parser)]
#[command(name = "jls", version, about = "Joint latent space models for social networks and attributes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replication study and write its results.
    Simulate(SimulateArgs),
    /// Fit a model to data files.
    Fit(FitArgs),
    /// Score a fit against the truth of a simulated data set.
    Evaluate(EvaluateArgs),
    /// Cluster the fitted positions with multi-start k-means.
    Cluster(ClusterArgs),
    /// Summary statistics of a fit, optionally compared with reference values.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Social network file.
    #[arg(long)]
    social: Option<PathBuf>,
    /// Attribute matrix CSV with a header of attribute names.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Read the social network as an edge list with a `nodes=N` first line.
    #[arg(long)]
    edge_list: bool,
    /// Treat the social network as directed.
    #[arg(long)]
    directed: bool,
}

#[derive(Args)]
struct FitTuning {
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0.999_999)]
    convergence_ratio: f64,
    #[arg(long, default_value_t = 1e-6)]
    abs_tolerance: f64,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    #[arg(long, value_enum, default_value_t = AttrUpdate::Newton)]
    attribute_update: AttrUpdate,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttrUpdate {
    Newton,
    AsPrinted,
}

impl FitTuning {
    fn options(&self, seed: u64) -> FitOptions {
        FitOptions {
            max_iterations: self.max_iterations,
            convergence_ratio: self.convergence_ratio,
            abs_tolerance: self.abs_tolerance,
            init_scale: self.init_scale,
            seed,
            attribute_update: match self.attribute_update {
                AttrUpdate::Newton => AttributeUpdate::Newton,
                AttrUpdate::AsPrinted => AttributeUpdate::AsPrinted,
            },
            ..FitOptions::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Study settings as JSON; missing fields take their defaults.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Skip the per-metric plot-data tables.
    #[arg(long)]
    no_plot_data: bool,
    #[command(flatten)]
    tuning: FitTuning,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model to fit; inferred from the inputs when omitted.
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    prior_var_person: f64,
    #[arg(long, default_value_t = 1.0)]
    prior_var_attribute: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tuning: FitTuning,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Directory written by `simulate` (truth.json, y_i.csv, y_ia.csv).
    #[arg(long)]
    truth: PathBuf,
    /// Output table; defaults to evaluation.csv next to the fit.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to the directory of the fit.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Social-only fit whose person positions are compared with the joint fit.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Cluster counts for the variance and median statistics.
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 6])]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON object of reference values keyed by statistic name.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Output table; defaults to report.csv next to the fit.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: jls::Error| e.to_string())
}

enum Failure {
    Lib(jls::Error),
    Usage(String),
}

impl From<jls::Error> for Failure {
    fn from(e: jls::Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("JLS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Cluster(a) => cluster(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse_error() {
                2
            } else if e.is_numeric_failure() {
                3
            } else {
                1
            })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn make_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))
}

fn beside(file: &Path, name: &str) -> PathBuf {
    file.parent().unwrap_or(Path::new(".")).join(name)
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.spec).map_err(|e| jls::Error::Io {
        path: a.spec.clone(),
        source: e,
    })?;
    let spec: SimulationSpec = serde_json::from_str(&text).map_err(|source| jls::Error::Json {
        path: a.spec.clone(),
        source,
    })?;
    make_dir(&a.out)?;
    let result = run_replication_study(&spec, &a.tuning.options(0))?;
    write_replication_csv(&result, a.out.join("replication.csv"))?;
    if !a.no_plot_data {
        write_replication_plot_data(&result, &a.out)?;
    }
    write_truth_dir(&spec, &generate_replicate(&spec, 0)?, a.out.join("truth"))?;
    let failed = result.rows.iter().filter(|r| r.metrics.is_none()).count();
    println!(
        "{} replicates written to {} ({failed} failed)",
        result.rows.len(),
        a.out.display()
    );
    Ok(())
}

fn read_data(d: &DataArgs) -> CliResult<(Option<SocialNetwork>, Option<AttributeMatrix>)> {
    let format = if d.edge_list {
        SocialFormat::EdgeList
    } else {
        SocialFormat::DenseCsv
    };
    let social = d
        .social
        .as_ref()
        .map(|p| read_social_network(p, format, d.directed))
        .transpose()?;
    let attributes = d.attributes.as_ref().map(read_attribute_matrix).transpose()?;
    Ok((social, attributes))
}

fn fit_data<'a>(
    kind: ModelKind,
    social: Option<&'a SocialNetwork>,
    attributes: Option<&'a AttributeMatrix>,
) -> CliResult<FitData<'a>> {
    let missing = |what: &str| Failure::Usage(format!("model {} needs --{what}", kind.as_str()));
    Ok(match kind {
        ModelKind::Lsm => FitData::lsm(social.ok_or_else(|| missing("social"))?),
        ModelKind::Blsm => FitData::blsm(attributes.ok_or_else(|| missing("attributes"))?),
        ModelKind::Aplsm => FitData::aplsm(
            social.ok_or_else(|| missing("social"))?,
            attributes.ok_or_else(|| missing("attributes"))?,
        ),
    })
}

fn fit_cmd(a: FitArgs) -> CliResult<()> {
    let (social, attributes) = read_data(&a.data)?;
    let kind = match a.model {
        Some(k) => k,
        None => match (&social, &attributes) {
            (Some(_), Some(_)) => ModelKind::Aplsm,
            (Some(_), None) => ModelKind::Lsm,
            (None, Some(_)) => ModelKind::Blsm,
            (None, None) => return Err(Failure::Usage("give --social, --attributes or both".into())),
        },
    };
    let data = fit_data(kind, social.as_ref(), attributes.as_ref())?;
    let config = LatentConfig::new(a.dim, a.prior_var_person, a.prior_var_attribute)?;
    let result = fit(&data, &config, &a.tuning.options(a.seed))?;
    let names = attributes.as_ref().and_then(|m| m.names()).map(<[String]>::to_vec);

    make_dir(&a.out)?;
    write_fit(&FitFile::new(result.clone(), names.clone()), a.out.join("fit.json"))?;
    write_positions(&result, names.as_deref(), a.out.join("positions.csv"))?;
    write_trace(&result, a.out.join("trace.csv"))?;
    write_rank_pairs(&rank_diagnostics(&result, &data)?, a.out.join("rank_pairs.csv"))?;
    let mut metrics = vec![
        ("objective".to_string(), result.final_objective()),
        ("iterations".into(), result.iterations_run as f64),
        ("converged".into(), f64::from(u8::from(result.converged))),
        ("alpha0".into(), result.state.intercepts.alpha0),
        ("alpha1".into(), result.state.intercepts.alpha1),
    ];
    metrics.extend(fit_statistics(&result, Some(&data), None, &[], a.seed)?);
    write_metrics(&metrics, a.out.join("metrics.csv"))?;
    println!(
        "{} fit: {} iterations, converged {}, objective {:.6}",
        kind.as_str(),
        result.iterations_run,
        result.converged,
        result.final_objective()
    );
    Ok(())
}

fn push_quantiles(out: &mut Vec<(String, f64)>, prefix: &str, q: Option<Quantiles>) {
    if let Some(q) = q {
        for (name, v) in [("q05", q.q05), ("q25", q.q25), ("q50", q.q50), ("q75", q.q75), ("q95", q.q95)] {
            out.push((format!("{prefix}_{name}"), v));
        }
    }
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let fit = read_fit(&a.fit)?.result;
    let truth = read_truth(a.truth.join("truth.json"))?;
    let positions = truth.positions()?;
    let (true_social, true_attr) = true_probabilities(&truth.spec, &positions);
    let probs = posterior_link_probabilities(&fit);
    let s = &fit.state;
    let has_social = fit.model_kind != ModelKind::Blsm;
    let has_attr = fit.model_kind != ModelKind::Lsm;

    let mut out = Vec::new();
    if let Some(p) = &probs.social {
        out.push(("aae_social".to_string(), average_absolute_error(p, &true_social, Entries::OffDiagonal)?));
    }
    if let Some(p) = &probs.attributes {
        out.push(("aae_attributes".to_string(), average_absolute_error(p, &true_attr, Entries::All)?));
    }
    if has_social {
        out.push(("alpha0_error".into(), s.intercepts.alpha0 - truth.spec.alpha0));
    }
    if has_attr {
        out.push(("alpha1_error".into(), s.intercepts.alpha1 - truth.spec.alpha1));
    }
    let ratios = pairwise_distance_ratios(&s.mean_persons, &positions.persons)?;
    push_quantiles(&mut out, "distance_ratio_persons", Quantiles::of(&ratios.ratios));
    if has_attr {
        let ratios = pairwise_distance_ratios(&s.mean_attributes, &positions.attributes)?;
        push_quantiles(&mut out, "distance_ratio_attributes", Quantiles::of(&ratios.ratios));
    }

    if let Some(p) = &probs.social {
        let yi = read_social_network(a.truth.join("y_i.csv"), SocialFormat::DenseCsv, truth.spec.directed)?;
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for i in 0..yi.n_persons() {
            for j in 0..yi.n_persons() {
                if let (true, Some(y)) = (i != j, yi.get(i, j)) {
                    scores.push(p[(i, j)]);
                    labels.push(y > 0.0);
                }
            }
        }
        if let Ok(roc) = roc_auc(&scores, &labels) {
            out.push(("auc_social".into(), roc.auc));
        }
    }
    if let Some(p) = &probs.attributes {
        let yia = read_attribute_matrix(a.truth.join("y_ia.csv"))?;
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for i in 0..yia.n_persons() {
            for k in 0..yia.n_attributes() {
                if let Some(y) = yia.get(i, k) {
                    scores.push(p[(i, k)]);
                    labels.push(y > 0.0);
                }
            }
        }
        if let Ok(roc) = roc_auc(&scores, &labels) {
            out.push(("auc_attributes".into(), roc.auc));
        }
    }

    let path = a.out.unwrap_or_else(|| beside(&a.fit, "evaluation.csv"));
    write_metrics(&out, &path)?;
    for (name, v) in &out {
        println!("{name}\t{v:.6}");
    }
    Ok(())
}

fn cluster(a: ClusterArgs) -> CliResult<()> {
    let file = read_fit(&a.fit)?;
    let opts = KMeansOptions {
        k: a.k,
        n_starts: a.starts,
        seed: a.seed,
    };
    let assignment = cluster_fit(&file.result, &opts)?;
    let summaries = cluster_link_summaries(&assignment, &file.result)?;
    let dir = a.out.unwrap_or_else(|| beside(&a.fit, ""));
    make_dir(&dir)?;
    let names = file.attribute_names.as_deref();
    write_clusters(&assignment, names, dir.join("clusters.csv"))?;
    write_cluster_summaries(&summaries, names, dir.join("cluster_summaries.csv"))?;
    println!(
        "k = {}: variance explained {:.4}, sizes {:?}",
        a.k,
        assignment.variance_explained,
        assignment.sizes()
    );
    Ok(())
}

fn report(a: ReportArgs) -> CliResult<()> {
    let file = read_fit(&a.fit)?;
    let result: &FitResult = &file.result;
    let baseline = a.baseline.as_ref().map(read_fit).transpose()?;
    let (social, attributes) = read_data(&a.data)?;
    let data = if social.is_some() || attributes.is_some() {
        Some(fit_data(result.model_kind, social.as_ref(), attributes.as_ref())?)
    } else {
        None
    };
    let stats = fit_statistics(result, data.as_ref(), baseline.as_ref().map(|b| &b.result), &a.k, a.seed)?;
    let reference = match &a.reference {
        Some(p) => read_reference(p)?,
        None => Reference::new(),
    };
    let rows = compare(&stats, &reference, a.tolerance);
    let path = a.out.unwrap_or_else(|| beside(&a.fit, "report.csv"));
    write_report(&rows, &path)?;
    for r in &rows {
        let flag = if r.flagged { "  REVIEW" } else { "" };
        match r.reference {
            Some(x) => println!("{}\t{:.4}\t(reference {x:.4}){flag}", r.name, r.observed),
            None => println!("{}\t{:.4}", r.name, r.observed),
        }
    }
    Ok(())
}
