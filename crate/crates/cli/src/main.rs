//! `setminer`: run the entity-set mining pipeline stage by stage or end to end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use setminer::hypernym::LabelSource;
use setminer::pipeline::{evaluate_clusters, KThreshold, Pipeline, PipelineConfig, PipelineError, Stage};

#[derive(Debug, Parser)]
#[command(name = "setminer", version, about = "Mine labeled entity sets from HTML tables")]
struct Cli {
    #[command(flatten)]
    opts: ConfigArgs,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse documents and write kept table columns.
    Extract,
    /// Build ranked triplet records from extracted columns.
    Triplets,
    /// Cluster ranked triplets.
    Cluster,
    /// Build the hyponym-concept dataset.
    Hyponyms,
    /// Rank hypernym labels per cluster.
    Label,
    /// Emit concept-instance pairs.
    Pairs,
    /// Write the corpus summary report.
    Report,
    /// Score a clusters file against truth labels.
    Eval(EvalArgs),
    /// Run every stage in order.
    RunAll,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Clusters file (JSON lines); defaults to the one in the output directory.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// `entity TAB class` truth labels.
    #[arg(long)]
    truth: PathBuf,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// JSON-lines manifest of documents.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Read every file under this directory instead of a manifest.
    #[arg(long, global = true)]
    corpus_dir: Option<PathBuf>,
    /// Directory for artifacts.
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,
    /// `np1 TAB filler TAB np2 TAB count` records.
    #[arg(long, global = true)]
    fillers: Option<PathBuf>,
    /// Prebuilt hyponym dataset, used when no fillers are given.
    #[arg(long, global = true)]
    hyponym_dataset: Option<PathBuf>,
    /// Minimum data rows for a table to be kept.
    #[arg(long, global = true)]
    min_rows: Option<usize>,
    /// Minimum non-link columns for a table to be kept.
    #[arg(long, global = true)]
    min_nonlink_cols: Option<usize>,
    /// Shortest cell kept, in characters.
    #[arg(long, global = true)]
    min_cell_len: Option<usize>,
    /// Longest cell kept, in characters.
    #[arg(long, global = true)]
    max_cell_len: Option<usize>,
    /// Link-only cell fraction above which a column counts as links.
    #[arg(long, global = true)]
    link_col_ratio: Option<f64>,
    /// Minimum surviving cells for a column to be emitted.
    #[arg(long, global = true)]
    min_column_cells: Option<usize>,
    /// Minimum distinct domains for a triplet to be clustered.
    #[arg(long, global = true)]
    min_unique_domain: Option<usize>,
    /// Shared entities needed to join a cluster.
    #[arg(long, global = true)]
    min_entity_overlap: Option<usize>,
    /// Shared columns needed to join a cluster.
    #[arg(long, global = true)]
    min_column_overlap: Option<usize>,
    /// Keep plural concept names as harvested.
    #[arg(long, global = true)]
    no_singularize: bool,
    /// WS, WSEXT, DPM or DPMEXT.
    #[arg(long, global = true)]
    mode: Option<LabelSource>,
    /// Dataset count threshold for WSEXT.
    #[arg(long, global = true)]
    wsext_min_count: Option<u64>,
    /// DPM rank cutoff, or "unbounded".
    #[arg(long, global = true)]
    k_threshold: Option<KThreshold>,
    /// DPM minimum fraction of cluster entities supporting a label.
    #[arg(long, global = true)]
    j_threshold: Option<f64>,
    /// Labels kept per cluster in labels.jsonl.
    #[arg(long, global = true)]
    top_labels: Option<usize>,
    /// Sample entities per set in the report.
    #[arg(long, global = true)]
    top_entities: Option<usize>,
    /// Rerun stages even when their stamps match.
    #[arg(long, global = true)]
    force: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if self.manifest.is_some() || self.corpus_dir.is_some() {
            cfg.manifest = self.manifest.clone();
            cfg.corpus_dir = self.corpus_dir.clone();
        }
        if let Some(p) = &self.output_dir {
            cfg.output_dir = p.clone();
        }
        if self.fillers.is_some() || self.hyponym_dataset.is_some() {
            cfg.fillers = self.fillers.clone();
            cfg.hyponym_dataset = self.hyponym_dataset.clone();
        }
        let e = &mut cfg.extraction;
        set(&mut e.min_rows, self.min_rows);
        set(&mut e.min_nonlink_cols, self.min_nonlink_cols);
        set(&mut e.min_cell_len, self.min_cell_len);
        set(&mut e.max_cell_len, self.max_cell_len);
        set(&mut e.link_col_ratio, self.link_col_ratio);
        set(&mut e.min_column_cells, self.min_column_cells);
        let c = &mut cfg.cluster;
        set(&mut c.min_unique_domain, self.min_unique_domain);
        set(&mut c.min_entity_overlap, self.min_entity_overlap);
        set(&mut c.min_column_overlap, self.min_column_overlap);
        if self.no_singularize {
            cfg.hyponyms.singularize = false;
        }
        let l = &mut cfg.labels;
        set(&mut l.mode, self.mode);
        set(&mut l.wsext_min_count, self.wsext_min_count);
        set(&mut l.k_threshold, self.k_threshold);
        set(&mut l.j_threshold, self.j_threshold);
        set(&mut l.top_labels, self.top_labels);
        set(&mut cfg.report.top_entities, self.top_entities);
        Ok(cfg)
    }
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = cli.opts.load()?;
    if let Command::Eval(args) = &cli.command {
        let clusters = args
            .clusters
            .clone()
            .unwrap_or_else(|| cfg.output_dir.join(setminer::pipeline::CLUSTERS));
        let report = evaluate_clusters(&clusters, &args.truth)?;
        let json = serde_json::to_string_pretty(&report).expect("metrics serialize");
        match &args.output {
            Some(path) => std::fs::write(path, json + "\n").map_err(|e| {
                PipelineError::Config(format!("{}: {e}", path.display()))
            })?,
            None => println!("{json}"),
        }
        return Ok(());
    }

    let pipeline = Pipeline::new(cfg)?.force(cli.opts.force);
    let stage = match cli.command {
        Command::Extract => Stage::Extract,
        Command::Triplets => Stage::Triplets,
        Command::Cluster => Stage::Cluster,
        Command::Hyponyms => Stage::Hyponyms,
        Command::Label => Stage::Label,
        Command::Pairs => Stage::Pairs,
        Command::Report => Stage::Report,
        Command::RunAll => {
            for o in pipeline.run_all()? {
                eprintln!("{}: {}", o.stage, if o.skipped { "up to date" } else { "done" });
            }
            return Ok(());
        }
        Command::Eval(_) => unreachable!(),
    };
    if stage == Stage::Extract {
        pipeline.config().validate()?;
    }
    let o = pipeline.run_stage(stage)?;
    eprintln!("{}: {}", o.stage, if o.skipped { "up to date" } else { "done" });
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
