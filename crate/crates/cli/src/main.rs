use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ehgm::fitting::{fit_templates, CovNorm, FitConfig, TemplateMode, TemplateStats};
use ehgm::posture::{build_model, BuildOptions, Chirality, ModelKind};
use ehgm::random::{random_model, RandomModelSpec};
use ehgm::synthetic::{generate_corpus, WormSpec};
use ehgm::{PointSet, SearchConfig, VertexSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ehgm_cli::eval::{EvaluationReport, Outcome};
use ehgm_cli::io::{load_pointset, read_json, save_pointset, write_json, ColumnMap};
use ehgm_cli::run::{parse_seeds, run_manifest, timing_path, MatchOptions, RunManifest, RunResult, Timing};
use ehgm_cli::synth::{generate_instance, vertex_set, CorpusFile, InstanceSpec};
use ehgm_cli::verify::{verify, Verdict};
use ehgm_cli::{exit, CliError, Result};

#[derive(Parser)]
#[command(name = "ehgm", version, about = "Exact hypergraph matching of seam cell nuclei")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic point sets and an annotated training corpus.
    Gen(GenArgs),
    /// Fit posture templates from an annotated corpus.
    Fit(FitArgs),
    /// Match a point set against a template.
    Match(MatchArgs),
    /// Compare the solver with exhaustive enumeration.
    Verify(VerifyArgs),
    /// Summarize match results.
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Point sets to write.
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// Embryos in the training corpus; none when zero.
    #[arg(long, default_value_t = 40)]
    corpus_embryos: usize,
    #[arg(long, default_value_t = 1)]
    frames: usize,
    #[arg(long, default_value_t = 10)]
    n_pairs: usize,
    /// Positional noise, µm.
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    /// Unlabeled distractor nuclei per point set.
    #[arg(long, default_value_t = 0)]
    extra: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "pairs")]
    model: ModelKind,
    #[arg(long, default_value_t = 0.1)]
    bin_width: f64,
    #[arg(long, default_value_t = 5)]
    min_samples: usize,
    #[arg(long, default_value = "sample")]
    cov_norm: CovNorm,
    #[arg(long, default_value = "right")]
    chirality: Chirality,
    #[arg(long, value_parser = parse_mode, default_value = "corpus")]
    mode: TemplateMode,
    /// Embryo excluded from fitting.
    #[arg(long)]
    leave_out: Option<String>,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    template: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Labeled previous frame for prior-frame templates.
    #[arg(long)]
    previous: Option<PathBuf>,
    /// Column overrides such as `id=cell,x=X`.
    #[arg(long, value_parser = parse_columns)]
    columns: Option<ColumnMap>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Normalized time between first twitch (0) and hatching (1).
    #[arg(long, default_value_t = 0.5)]
    z: f64,
    /// Fixed vertices, `LABEL=POINT_ID,...`.
    #[arg(long, default_value = "")]
    seeds: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    chirality: Option<Chirality>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Posture instance; a random model is drawn when absent.
    #[arg(long, requires = "template")]
    points: Option<PathBuf>,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long, default_value_t = 0.5)]
    z: f64,
    #[arg(long, default_value_t = 4)]
    n1: usize,
    #[arg(long, default_value_t = 6)]
    n2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Result files or directories holding them.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<TemplateMode, String> {
    match s {
        "corpus" => Ok(TemplateMode::Corpus),
        "prior-frame" | "prior_frame" => Ok(TemplateMode::PriorFrame),
        _ => Err(format!("unknown mode {s:?}, expected corpus or prior-frame")),
    }
}

fn parse_columns(s: &str) -> std::result::Result<ColumnMap, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

/// Index of the point sets written by `gen`.
#[derive(Serialize, Deserialize)]
struct InstanceEntry {
    name: String,
    points: String,
    z: f64,
}

fn gen(args: GenArgs) -> Result<i32> {
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let worm = WormSpec {
        n_pairs: args.n_pairs,
        ..WormSpec::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    if args.corpus_embryos > 0 {
        let corpus = generate_corpus(&worm, args.corpus_embryos, args.frames, args.sigma, &mut rng);
        write_json(&args.out.join("corpus.json"), &CorpusFile::from_samples(&corpus))?;
    }
    let mut index = Vec::new();
    for i in 0..args.instances {
        let spec = InstanceSpec {
            worm: worm.clone(),
            sigma: args.sigma,
            z: rng.gen(),
            extra_points: args.extra,
            seed: rng.gen(),
        };
        let inst = generate_instance(&spec)?;
        let name = format!("inst{i:03}");
        let file = format!("{name}.csv");
        save_pointset(&args.out.join(&file), &inst.points)?;
        index.push(InstanceEntry { name, points: file, z: spec.z });
    }
    write_json(&args.out.join("instances.json"), &index)?;
    println!("wrote {} point sets to {}", args.instances, args.out.display());
    Ok(exit::OK)
}

fn fit(args: FitArgs) -> Result<i32> {
    let corpus: CorpusFile = read_json(&args.corpus)?;
    let samples = corpus.to_samples()?;
    let config = FitConfig {
        bin_width: args.bin_width,
        min_samples: args.min_samples,
        cov_norm: args.cov_norm,
        chirality: args.chirality,
        mode: args.mode,
        ..FitConfig::new(args.model)
    };
    let template = fit_templates(&samples, &config, args.leave_out.as_deref())?;
    template.save(&args.out)?;
    println!(
        "fitted {} template over {} bins from {} samples",
        template.model,
        template.bins.len(),
        samples.len()
    );
    Ok(exit::OK)
}

fn run(args: MatchArgs) -> Result<i32> {
    let manifest = RunManifest {
        points: args.points,
        template: args.template,
        previous: args.previous,
        columns: args.columns.unwrap_or_default(),
        options: MatchOptions {
            model: args.model,
            z: args.z,
            seeds: parse_seeds(&args.seeds)?,
            k: args.k,
            top_k: args.top_k,
            time_limit_secs: args.time_limit,
            workers: args.workers,
            chirality: args.chirality,
        },
    };
    let (result, timing) = run_manifest(&manifest)?;
    write_json(&args.out, &result)?;
    write_json(&timing_path(&args.out), &timing)?;
    match result.solutions.first() {
        Some(best) => println!("best cost {:.6}", best.cost),
        None => println!("no assignment found"),
    }
    if !result.converged_exactly {
        eprintln!("time limit reached; solutions are the best found so far");
    }
    if let Some(t) = &result.truth {
        match t.rank {
            Some(r) => println!("ground truth at rank {r}"),
            None => println!("ground truth not among the reported solutions"),
        }
    }
    Ok(result.exit_code())
}

fn check(args: VerifyArgs) -> Result<i32> {
    let config = SearchConfig::new(args.k)
        .with_top_k(args.top_k)
        .with_workers(args.workers);
    let report = match (&args.points, &args.template) {
        (Some(points), Some(template)) => {
            let points = load_pointset(points, &ColumnMap::default())?;
            let template = TemplateStats::load(template)?;
            let vertices = vertex_set(template.n_pairs);
            let options = BuildOptions {
                branch_size: args.k,
                chirality: template.chirality,
                ..BuildOptions::default()
            };
            let model = build_model(
                args.model.unwrap_or(template.model),
                &vertices,
                &points.points,
                template.bin_for(args.z),
                &options,
            )?;
            verify(&vertices, &points.points, &model, &config)?
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let spec = RandomModelSpec::new(args.n1, args.n2);
            let model = random_model(&spec, &mut rng)?;
            verify(&VertexSet::anonymous(args.n1), &PointSet::placeholder(args.n2), &model, &config)?
        }
    };
    println!("{}", report.verdict);
    for (i, (s, o)) in report.solver.iter().zip(&report.oracle).enumerate() {
        println!("{:>3}  solver {:.9}  oracle {:.9}", i + 1, s.cost, o.cost);
    }
    Ok(match report.verdict {
        Verdict::Agree => exit::OK,
        Verdict::Disagree { .. } => exit::FAILURE,
    })
}

fn result_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let is_result = |p: &Path| {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        name.ends_with(".json") && !name.ends_with(".timing.json")
    };
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| CliError::io(p, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| is_result(p))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn eval(args: EvalArgs) -> Result<i32> {
    let mut outcomes = Vec::new();
    for file in result_files(&args.results)? {
        let result: RunResult = read_json(&file)?;
        let timing: Timing = read_json(&timing_path(&file))?;
        outcomes.push(Outcome::from_run(file.display().to_string(), &result, &timing));
    }
    if outcomes.is_empty() {
        return Err(CliError::Usage("no result files found".into()));
    }
    let report = EvaluationReport::new(outcomes);
    print!("{report}");
    if let Some(out) = args.out {
        write_json(&out, &report)?;
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Fit(a) => fit(a),
        Command::Match(a) => run(a),
        Command::Verify(a) => check(a),
        Command::Eval(a) => eval(a),
    };
    let code = outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
