use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use polyloc::config::Config;
use polyloc::domain::{read_issues_jsonl, Issue, IssueStore};
use polyloc::eval::{build_report, records_for, sic_match_rate, EvalReport};
use polyloc::graph::{build_graph_with_stats, DependencyGraph, GraphMode};
use polyloc::index::{index_graph, Bm25Index};
use polyloc::localize::{results_from_jsonl, results_to_jsonl, LocalizationResult, Localizer, Variant};
use polyloc::sic::{extract_cues, index_issues, HashedEmbedder, IssueIndex, NormalizingSummarizer, SicCue};
use polyloc::similarity::{aggregate_report, score_issue_pair};

const GRAPH_FILE: &str = "graph.json";
const STATS_FILE: &str = "build_stats.json";
const BM25_FILE: &str = "bm25.json";
const SIC_FILE: &str = "sic_index.json";
const RETRIEVAL_FILE: &str = "retrieval.jsonl";
const RESULTS_FILE: &str = "results.jsonl";
const EVAL_FILE: &str = "eval_report.json";
const EVAL_CSV: &str = "eval_report.csv";
const SIMILARITY_FILE: &str = "similarity_report.json";

/// Localize issue fixes in Python, C++ and QML repositories
#[derive(Parser, Debug)]
#[command(name = "polyloc", version, about)]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, env = "POLYLOC_CONFIG")]
    config: Option<PathBuf>,

    /// Artifact directory (read and written)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the dependency graph of a repository
    BuildGraph(BuildArgs),
    /// Build the code index and the similar-issue index
    Index(IndexArgs),
    /// Retrieve similar historical issues for each query
    Retrieve(RetrieveArgs),
    /// Rank candidate fix files for each query
    Localize(LocalizeArgs),
    /// Score localization results against ground truth
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Repository root; its directory name becomes the component
    #[arg(long)]
    root: Option<PathBuf>,
    /// python-only, cpp-only, qml-only or mixed
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(long)]
    root: Option<PathBuf>,
    /// Historical issues (JSON lines)
    #[arg(long)]
    issues: PathBuf,
    /// Text embedded per issue: embed or summ
    #[arg(long)]
    sic_mode: Option<String>,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    /// Historical issues (JSON lines)
    #[arg(long)]
    issues: PathBuf,
    /// New issues to retrieve for (JSON lines)
    #[arg(long)]
    queries: PathBuf,
    /// Similar issues per query
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Full,
    CodeSearch,
    SicCodeSearch,
    GraphOnly,
    All,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Full => vec![Variant::Full],
            VariantArg::CodeSearch => vec![Variant::CodeSearch],
            VariantArg::SicCodeSearch => vec![Variant::SicPlusCodeSearch],
            VariantArg::GraphOnly => vec![Variant::GraphOnly],
            VariantArg::All => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Args, Debug)]
struct LocalizeArgs {
    #[arg(long)]
    issues: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    variant: VariantArg,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Queries with their ground-truth changed files
    #[arg(long)]
    queries: PathBuf,
    /// Historical issues, for match rate and path similarity
    #[arg(long)]
    issues: PathBuf,
    /// Localization results; defaults to results.jsonl in the artifact directory
    #[arg(long)]
    results: Option<PathBuf>,
    /// Cutoffs: a single value, a range like 1..10, or a comma list
    #[arg(long, default_value = "1,3,5")]
    k: String,
    /// Also write eval_report.csv
    #[arg(long)]
    csv: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => Config::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::BuildGraph(args) => {
            if let Some(root) = args.root {
                config.repo_root = Some(root);
            }
            if let Some(mode) = args.mode {
                config.mode = mode.parse()?;
            }
            config.validate()?;
            cmd_build_graph(&config)
        }
        Command::Index(args) => {
            if let Some(root) = args.root {
                config.repo_root = Some(root);
            }
            if let Some(mode) = args.sic_mode {
                config.sic_mode = mode.parse()?;
            }
            config.validate()?;
            cmd_index(&config, &args.issues)
        }
        Command::Retrieve(args) => {
            if let Some(k) = args.k {
                config.k = k;
            }
            config.validate()?;
            cmd_retrieve(&config, &args.issues, &args.queries)
        }
        Command::Localize(args) => {
            if let Some(k) = args.k {
                config.k = k;
            }
            config.validate()?;
            cmd_localize(&config, &args.issues, &args.queries, &args.variant.variants())
        }
        Command::Evaluate(args) => {
            config.validate()?;
            let ks = parse_k_spec(&args.k)?;
            let results = args.results.unwrap_or_else(|| config.out_dir.join(RESULTS_FILE));
            cmd_evaluate(&config, &args.queries, &args.issues, &results, &ks, args.csv)
        }
    }
}

fn parse_k_spec(spec: &str) -> Result<Vec<usize>> {
    let mut ks: Vec<usize> = if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().with_context(|| format!("bad k range {spec:?}"))?;
        let hi = hi.trim();
        let hi: usize = match hi.strip_prefix('=') {
            Some(h) => h.parse(),
            None => hi.parse(),
        }
        .with_context(|| format!("bad k range {spec:?}"))?;
        (lo..=hi).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad k value {s:?}")))
            .collect::<Result<_>>()?
    };
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        bail!("k values must be at least 1");
    }
    Ok(ks)
}

fn repo_root(config: &Config) -> Result<&Path> {
    config.repo_root.as_deref().context("no repository root; pass --root or set repo_root in the config")
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn load_graph(config: &Config) -> Result<DependencyGraph> {
    let path = config.out_dir.join(GRAPH_FILE);
    DependencyGraph::load(&path).with_context(|| format!("loading {}; run build-graph first", path.display()))
}

fn read_issues(path: &Path) -> Result<Vec<Issue>> {
    read_issues_jsonl(path).with_context(|| format!("reading issues from {}", path.display()))
}

fn cmd_build_graph(config: &Config) -> Result<()> {
    let root = repo_root(config)?;
    let (graph, stats) = build_graph_with_stats(root, config.mode)?;
    #[derive(Serialize)]
    struct Stats<'a> {
        mode: GraphMode,
        nodes: usize,
        edges: usize,
        #[serde(flatten)]
        build: &'a polyloc::graph::BuildStats,
    }
    let summary = Stats { mode: config.mode, nodes: graph.node_count(), edges: graph.edge_count(), build: &stats };
    write_artifact(&config.out_dir, GRAPH_FILE, &graph.to_json())?;
    write_artifact(&config.out_dir, STATS_FILE, &to_pretty(&summary))?;
    println!(
        "{} graph: {} nodes, {} edges, {} files parsed, {} parse warnings",
        config.mode,
        graph.node_count(),
        graph.edge_count(),
        stats.parsed_files,
        stats.parse_warnings
    );
    Ok(())
}

fn cmd_index(config: &Config, issues: &Path) -> Result<()> {
    let root = repo_root(config)?;
    let graph = load_graph(config)?;
    let history = read_issues(issues)?;
    let bm25 = index_graph(&graph, root, config.bm25)?;
    let embedder = HashedEmbedder::new(config.embedding_dimension);
    let mut sic = index_issues(&history, config.sic_mode, &embedder, &NormalizingSummarizer)?;
    sic.snapshot_id = Some(graph.snapshot_id());
    write_artifact(&config.out_dir, BM25_FILE, &bm25.to_json())?;
    write_artifact(&config.out_dir, SIC_FILE, &sic.to_json())?;
    println!("indexed {} code units and {} issues ({})", bm25.len(), sic.len(), config.sic_mode);
    Ok(())
}

fn load_sic(config: &Config, embedder: &HashedEmbedder) -> Result<IssueIndex> {
    let path = config.out_dir.join(SIC_FILE);
    IssueIndex::load(&path, embedder).with_context(|| format!("loading {}; run index first", path.display()))
}

fn cmd_retrieve(config: &Config, issues: &Path, queries: &Path) -> Result<()> {
    let embedder = HashedEmbedder::new(config.embedding_dimension);
    let sic = load_sic(config, &embedder)?;
    let store = IssueStore::new(read_issues(issues)?)?;
    #[derive(Serialize)]
    struct Retrieval {
        query_id: String,
        cue: SicCue,
    }
    let mut out = String::new();
    for q in read_issues(queries)? {
        let hits = sic.retrieve(&q, config.k, &embedder, &NormalizingSummarizer)?;
        let cue = extract_cues(&hits, &store, &NormalizingSummarizer)?;
        out.push_str(&serde_json::to_string(&Retrieval { query_id: q.id.clone(), cue })?);
        out.push('\n');
    }
    write_artifact(&config.out_dir, RETRIEVAL_FILE, &out)?;
    println!("wrote {}", config.out_dir.join(RETRIEVAL_FILE).display());
    Ok(())
}

fn cmd_localize(config: &Config, issues: &Path, queries: &Path, variants: &[Variant]) -> Result<()> {
    let graph = load_graph(config)?;
    let bm25_path = config.out_dir.join(BM25_FILE);
    let bm25 = Bm25Index::load(&bm25_path).with_context(|| format!("loading {}", bm25_path.display()))?;
    let embedder = HashedEmbedder::new(config.embedding_dimension);
    let sic = load_sic(config, &embedder)?;
    let store = IssueStore::new(read_issues(issues)?)?;
    let localizer = Localizer::new(&graph, &bm25, Some(&sic), &store, &embedder, &NormalizingSummarizer, config)?;
    let mut results = Vec::new();
    for q in read_issues(queries)? {
        for &v in variants {
            results.push(localizer.localize(&q, v)?);
        }
    }
    write_artifact(&config.out_dir, RESULTS_FILE, &results_to_jsonl(&results))?;
    println!("localized {} runs into {}", results.len(), config.out_dir.join(RESULTS_FILE).display());
    Ok(())
}

fn cmd_evaluate(config: &Config, queries: &Path, issues: &Path, results: &Path, ks: &[usize], csv: bool) -> Result<()> {
    let text = fs::read_to_string(results).with_context(|| format!("reading {}", results.display()))?;
    let results = results_from_jsonl(&text)?;
    let queries = IssueStore::new(read_issues(queries)?)?;
    let history = IssueStore::new(read_issues(issues)?)?;

    let mut by_variant: BTreeMap<Variant, Vec<LocalizationResult>> = BTreeMap::new();
    for r in results {
        by_variant.entry(r.variant).or_default().push(r);
    }
    let mut records = BTreeMap::new();
    for (v, rs) in &by_variant {
        records.insert(*v, records_for(rs, &queries, config.richness_threshold, config.richness_verbosity_tokens)?);
    }
    let evaluated: Vec<&Issue> = {
        let ids: std::collections::BTreeSet<&str> =
            by_variant.values().flatten().map(|r| r.issue_id.as_str()).collect();
        ids.into_iter().filter_map(|id| queries.get(id)).collect()
    };
    let mut report =
        build_report(&records, &evaluated, ks, config.richness_threshold, config.richness_verbosity_tokens)?;

    // Retrieved issues come from the first variant that used similar-issue retrieval.
    let retrieved: BTreeMap<String, Vec<String>> = by_variant
        .iter()
        .find(|(v, _)| v.uses_sic())
        .map(|(_, rs)| {
            rs.iter()
                .map(|r| (r.issue_id.clone(), r.similar_issues.iter().map(|(id, _)| id.clone()).collect()))
                .collect()
        })
        .unwrap_or_default();
    if !retrieved.is_empty() {
        report.sic_match_rate = Some(sic_match_rate(&evaluated, &retrieved, &history)?);
    }
    let mut pairs = Vec::new();
    for q in &evaluated {
        let Some(similar) = retrieved.get(&q.id).filter(|s| !s.is_empty()) else { continue };
        if q.changed_files.is_empty() {
            continue;
        }
        let mut scored = Vec::new();
        for id in similar {
            let s = history.get(id).with_context(|| format!("retrieved issue {id} missing from history"))?;
            scored.push(score_issue_pair(&q.changed_files, &s.changed_files)?);
        }
        pairs.push((q.id.clone(), scored));
    }
    let similarity = aggregate_report(&pairs)?;

    write_artifact(&config.out_dir, EVAL_FILE, &to_pretty(&report))?;
    write_artifact(&config.out_dir, SIMILARITY_FILE, &to_pretty(&similarity))?;
    if csv {
        write_artifact(&config.out_dir, EVAL_CSV, &report_csv(&report)?)?;
    }
    print_table(&report, ks);
    Ok(())
}

fn report_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "k", "acc", "mean_tool_calls", "records"])?;
    for (name, v) in &report.variants {
        for (k, acc) in &v.acc_at_k {
            w.write_record([
                name.clone(),
                k.to_string(),
                format!("{acc:.6}"),
                format!("{:.4}", v.mean_tool_calls),
                v.records.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn print_table(report: &EvalReport, ks: &[usize]) {
    let mut header = format!("{:<22}", "variant");
    for k in ks {
        header.push_str(&format!(" {:>7}", format!("acc@{k}")));
    }
    header.push_str(&format!(" {:>7}", "tools"));
    println!("{header}");
    for (name, v) in &report.variants {
        let mut line = format!("{name:<22}");
        for k in ks {
            line.push_str(&format!(" {:>7.3}", v.acc_at_k[k]));
        }
        line.push_str(&format!(" {:>7.2}", v.mean_tool_calls));
        println!("{line}");
    }
    if let Some(rate) = report.sic_match_rate {
        println!("match rate: {rate:.3}");
    }
}
