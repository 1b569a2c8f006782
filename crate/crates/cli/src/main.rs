use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use spcdt::analysis::{margins, overgeneralization, split_compare};
use spcdt::dataset::{load_csv, Dataset, LoadOptions};
use spcdt::dtree::{evaluate, induce_id3, DecisionTree, InduceParams};
use spcdt::fixtures;
use spcdt::pairing::derive_plot_units;
use spcdt::render::{to_svg, RenderConfig};
use spcdt::scene::{build_scene, default_placement, PlotPlacement, RegionRef, SceneOptions, SummaryMode, TraceMode};

#[derive(Parser)]
#[command(name = "spcdt", version, about = "Decision trees drawn as linked scatter plots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a tree listing to JSON (or back with --text).
    Parse {
        #[arg(long)]
        tree: String,
        /// Print the indented listing instead of JSON.
        #[arg(long)]
        text: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grow a tree with ID3 on numeric attributes.
    Induce {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 2)]
        min_leaf: usize,
        #[arg(long, default_value_t = usize::MAX)]
        max_depth: usize,
        #[arg(long, default_value_t = 0.0)]
        min_gain: f64,
        #[arg(long)]
        text: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error rate, per-class figures and confusion matrix.
    Eval {
        #[arg(long)]
        tree: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        json: bool,
    },
    /// Draw the tree and its cases as SVG.
    Render {
        #[arg(long)]
        tree: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        trace: Option<Trace>,
        /// JSON file with `placements`, `options` and `render` overrides.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long)]
        context: bool,
        #[arg(long, value_enum)]
        summary: Option<Summary>,
        /// Write the scene JSON instead of SVG.
        #[arg(long)]
        scene_json: bool,
    },
    /// Analysis reports.
    Report {
        #[arg(value_enum)]
        kind: ReportKind,
        #[arg(long)]
        tree: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 0.9)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory with the UI bundle.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, env = "SPCDT_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV path, or a bundled name (iris, wine, wbc).
    #[arg(long)]
    data: String,
    #[arg(long, default_value = "class")]
    label_column: String,
    #[arg(long, default_value = "?")]
    missing_token: String,
    /// Declared attribute range, `name=lo:hi`; repeatable.
    #[arg(long = "range", value_parser = parse_range)]
    ranges: Vec<(String, f64, f64)>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Trace {
    Terminate,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Summary {
    None,
    Centers,
    Minmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Overgen,
    Margins,
    SplitCompare,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct LayoutFile {
    placements: Vec<PlotPlacement>,
    condensed: Vec<RegionRef>,
    options: Option<SceneOptions>,
    render: Option<RenderConfig>,
}

fn parse_range(s: &str) -> Result<(String, f64, f64), String> {
    let (name, span) = s.split_once('=').ok_or("expected name=lo:hi")?;
    let (lo, hi) = span.split_once(':').ok_or("expected name=lo:hi")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad bound {hi:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((name.to_string(), lo, hi))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    let path = Path::new(&args.data);
    if !path.exists() && args.ranges.is_empty() && args.label_column == "class" && args.missing_token == "?" {
        if let Some(ds) = fixtures::dataset(&args.data) {
            return Ok(ds);
        }
    }
    let mut options = LoadOptions {
        label_column: args.label_column.clone(),
        missing_token: args.missing_token.clone(),
        ..LoadOptions::default()
    };
    for (name, lo, hi) in &args.ranges {
        options = options.with_range(name, *lo, *hi);
    }
    let text = read(path)?;
    load_csv(text.as_bytes(), &options).with_context(|| format!("{}", path.display()))
}

/// Reads a tree file (JSON or listing, by content) or a bundled tree name.
fn load_tree(spec: &str) -> Result<DecisionTree> {
    let path = Path::new(spec);
    if !path.exists() {
        return fixtures::tree_named(spec).ok_or_else(|| anyhow!("cannot read {spec}: no such file or bundled tree"));
    }
    let text = read(path)?;
    let tree = if text.trim_start().starts_with('{') {
        DecisionTree::from_json(&text)
    } else {
        DecisionTree::parse_text(&text)
    };
    tree.with_context(|| format!("{}", path.display()))
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, content).with_context(|| format!("cannot write {}", p.display())),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            let newline = if content.ends_with('\n') { "" } else { "\n" };
            match write!(stdout, "{content}{newline}").and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn tree_out(tree: &DecisionTree, text: bool) -> String {
    if text {
        tree.to_text()
    } else {
        tree.to_json()
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { tree, text, out } => emit(out.as_deref(), &tree_out(&load_tree(&tree)?, text)),
        Command::Induce {
            data,
            min_leaf,
            max_depth,
            min_gain,
            text,
            out,
        } => {
            if min_leaf == 0 || !(min_gain.is_finite() && min_gain >= 0.0) {
                bail!("--min-leaf must be >= 1 and --min-gain >= 0");
            }
            let ds = load_data(&data)?;
            let params = InduceParams {
                min_leaf,
                max_depth,
                min_gain,
            };
            emit(out.as_deref(), &tree_out(&induce_id3(&ds, params), text))
        }
        Command::Eval { tree, data, json: as_json } => {
            let report = evaluate(&load_tree(&tree)?, &load_data(&data)?)?;
            emit(None, &if as_json { json(&report)? } else { report.to_table() })
        }
        Command::Render {
            tree,
            data,
            out,
            trace,
            layout,
            jitter,
            context,
            summary,
            scene_json,
        } => {
            let tree = load_tree(&tree)?;
            let ds = load_data(&data)?;
            let overrides: LayoutFile = match &layout {
                Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("{}", p.display()))?,
                None => LayoutFile::default(),
            };
            let plan = derive_plot_units(&tree, &ds)?;
            let mut placements = default_placement(&plan);
            for p in overrides.placements {
                let slot = placements
                    .iter_mut()
                    .find(|q| q.plot_id == p.plot_id)
                    .ok_or_else(|| anyhow!("layout names unknown plot {}", p.plot_id))?;
                *slot = p;
            }
            let mut options = overrides.options.unwrap_or_default();
            options.condensed_regions.extend(overrides.condensed);
            if let Some(t) = trace {
                options.trace_mode = match t {
                    Trace::Terminate => TraceMode::Terminate,
                    Trace::Full => TraceMode::Full,
                };
            }
            if let Some(m) = jitter {
                options.jitter = m;
            }
            options.context |= context;
            if let Some(s) = summary {
                options.summary = match s {
                    Summary::None => SummaryMode::None,
                    Summary::Centers => SummaryMode::Centers,
                    Summary::Minmax => SummaryMode::Minmax,
                };
            }
            let scene = build_scene(&tree, &plan, &ds, &placements, &options)?;
            let content = if scene_json {
                json(&scene)?
            } else {
                let mut config = RenderConfig::for_scene(&scene);
                if let Some(r) = overrides.render {
                    let palette = std::mem::take(&mut config.palette);
                    config = r;
                    for (class, color) in palette {
                        config.palette.entry(class).or_insert(color);
                    }
                }
                to_svg(&scene, &config)?
            };
            emit(out.as_deref(), &content)
        }
        Command::Report {
            kind,
            tree,
            data,
            epsilon,
            train_fraction,
            seed,
            json: as_json,
        } => {
            let tree = load_tree(&tree)?;
            let ds = load_data(&data)?;
            if epsilon.is_some_and(|e| !(e.is_finite() && e >= 0.0)) {
                bail!("--epsilon must be >= 0");
            }
            let content = match kind {
                ReportKind::Overgen => {
                    let r = overgeneralization(&tree, &ds)?;
                    if as_json { json(&r)? } else { r.to_table() }
                }
                ReportKind::Margins => {
                    let r = margins(&tree, &ds, epsilon)?;
                    if as_json { json(&r)? } else { r.to_table() }
                }
                ReportKind::SplitCompare => {
                    let (train, validation) = ds.split(train_fraction, seed)?;
                    let r = split_compare(&tree, &train, &validation)?;
                    if as_json { json(&r)? } else { r.to_table() }
                }
            };
            emit(None, &content)
        }
        Command::Serve {
            host,
            port,
            static_dir,
            data_dir,
        } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .with_context(|| format!("bad address {host}:{port}"))?;
            let config = spcdt_service::ServeConfig {
                store: spcdt_service::StoreConfig { data_dir },
                static_dir,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(spcdt_service::serve(addr, config))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("spcdt: {msg}");
            ExitCode::from(2)
        }
    }
}
