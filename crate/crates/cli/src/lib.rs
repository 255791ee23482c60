//! `liverkg` subcommands. Each one reads its inputs, makes the same library
//! call the service makes and writes the result unchanged.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use liverkg::dtree::{
    cross_validate, default_class_heads, default_feature_properties, fit, paths_to_rules,
    Criterion, Dataset, TrainConfig,
};
use liverkg::ingest::{encode_csv, records_to_graph, EncodedRecord};
use liverkg::ontology::{check_consistency, compute_metrics, load_schema, Schema};
use liverkg::rules::builtin::event_rules;
use liverkg::rules::{infer, parse_rules, serialize_rules, Rule};
use liverkg::sparql::run;
use liverkg::store::{parse_ntriples, serialize_ntriples, Graph};
use liverkg::stream::{
    batch_size_cells, batch_table_csv, rule_count_cells, split_records, sweep, timing_csv,
    timing_report, BatchConfig, JsonLinesSink, StreamEngine,
};
use liverkg::vocab::{RECORD_BASE, SCHEMA};
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "liverkg", version, about = "Liver-disease knowledge graph tools")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert a lab CSV to N-Triples.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate a decision tree and write the metrics as JSON.
    Train {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = CriterionArg::Gini)]
        criterion: CriterionArg,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Fit a tree on the whole CSV and write its paths as rules.
    ExtractRules {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = CriterionArg::Gini)]
        criterion: CriterionArg,
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// Saturate a graph and write the derived triples and their proofs.
    Infer {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        proofs: Option<PathBuf>,
    },
    /// Run a SELECT query and print the solutions.
    Query {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
    /// Stream a graph's records in batches and report detected events.
    Stream {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value_t = 10)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        delay_ms: u64,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Ontology metrics and consistency violations as JSON.
    Metrics {
        #[arg(long)]
        graph: PathBuf,
        /// Defaults to the built-in liver schema.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Stream timing sweep written as CSV.
    Bench {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, required_unless_present = "custom", conflicts_with = "custom")]
        sweep: Option<SweepArg>,
        /// Comma-separated `BATCHxRULES` cells, e.g. `20x5,40x5`.
        #[arg(long, value_parser = parse_cells)]
        custom: Option<Cells>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum CriterionArg {
    Gini,
    Entropy,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Gini => Criterion::Gini,
            CriterionArg::Entropy => Criterion::Entropy,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SweepArg {
    Batch,
    Rules,
}

#[derive(Clone, Debug)]
pub struct Cells(pub Vec<(usize, usize)>);

fn parse_cells(s: &str) -> std::result::Result<Cells, String> {
    let cells = s
        .split(',')
        .map(|cell| {
            let (b, n) = cell
                .trim()
                .split_once('x')
                .ok_or_else(|| format!("cell {cell:?} is not BATCHxRULES"))?;
            let b: usize = b.parse().map_err(|e| format!("{cell:?}: {e}"))?;
            let n: usize = n.parse().map_err(|e| format!("{cell:?}: {e}"))?;
            if b == 0 || n == 0 {
                return Err(format!("{cell:?}: values must be at least 1"));
            }
            Ok((b, n))
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    Ok(Cells(cells))
}

/// Failure of a well-formed command, reported with exit code 2.
#[derive(Debug)]
pub struct DataError(pub String);

impl<E: std::fmt::Display> From<E> for DataError {
    fn from(e: E) -> Self {
        DataError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, DataError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| DataError(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| DataError(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Graph> {
    parse_ntriples(&read(path)?).map_err(|e| DataError(format!("{}: {e}", path.display())))
}

fn load_rules(path: &Path) -> Result<Vec<Rule>> {
    parse_rules(&read(path)?).map_err(|e| DataError(format!("{}: {e}", path.display())))
}

fn load_records(path: &Path) -> Result<Vec<EncodedRecord>> {
    encode_csv(&read(path)?, RECORD_BASE).map_err(|e| DataError(format!("{}: {e}", path.display())))
}

/// N-Triples text for a lab CSV, as written by `ingest`.
pub fn csv_to_ntriples(csv: &str) -> Result<String> {
    let records = encode_csv(csv, RECORD_BASE)?;
    Ok(serialize_ntriples(&records_to_graph(&records, SCHEMA)?))
}

pub fn metrics_json(schema: &Schema, graph: &Graph) -> Result<serde_json::Value> {
    let mut body = serde_json::to_value(compute_metrics(schema, graph)?)?;
    body["violations"] = json!(check_consistency(schema, graph));
    Ok(body)
}

/// Runs one command, writing human-facing output to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest { csv, out: path } => {
            let text = csv_to_ntriples(&read(&csv)?)
                .map_err(|e| DataError(format!("{}: {}", csv.display(), e.0)))?;
            write(&path, &text)?;
            writeln!(out, "wrote {} triples to {}", text.lines().count(), path.display())?;
        }
        Command::Train {
            csv,
            criterion,
            folds,
            report,
            max_depth,
            seed,
        } => {
            let data = Dataset::from_records(&load_records(&csv)?);
            let config = TrainConfig {
                criterion: criterion.into(),
                max_depth,
                random_seed: seed,
                ..TrainConfig::default()
            };
            let metrics = cross_validate(&data, &config, folds)?;
            write(&report, &serde_json::to_string_pretty(&metrics)?)?;
            writeln!(
                out,
                "accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} ({} folds, {})",
                metrics.accuracy, metrics.precision, metrics.recall, metrics.f1, folds, metrics.criterion
            )?;
        }
        Command::ExtractRules {
            csv,
            out: path,
            criterion,
            max_depth,
        } => {
            let data = Dataset::from_records(&load_records(&csv)?);
            let config = TrainConfig {
                criterion: criterion.into(),
                max_depth,
                ..TrainConfig::default()
            };
            let tree = fit(&data, &config)?;
            let rules = paths_to_rules(
                &tree.extract_paths(),
                &default_feature_properties(),
                &default_class_heads(),
            )?;
            write(&path, &serialize_rules(&rules))?;
            writeln!(out, "wrote {} rules to {}", rules.len(), path.display())?;
        }
        Command::Infer {
            graph,
            rules,
            out: path,
            proofs,
        } => {
            let inference = infer(&load_graph(&graph)?, &load_rules(&rules)?)?;
            write(&path, &serialize_ntriples(&inference.derived))?;
            if let Some(p) = proofs {
                write(&p, &serde_json::to_string_pretty(&inference.proofs)?)?;
            }
            writeln!(out, "derived {} triples", inference.derived.len())?;
        }
        Command::Query {
            graph,
            query,
            format,
        } => {
            let solutions = run(&read(&query)?, &load_graph(&graph)?)?;
            match format {
                Format::Tsv => out.write_all(solutions.to_tsv().as_bytes())?,
                Format::Json => writeln!(out, "{}", solutions.to_json())?,
            }
        }
        Command::Stream {
            graph,
            rules,
            batch_size,
            delay_ms,
            events,
            stats,
        } => {
            let config = BatchConfig::new(batch_size, delay_ms)?;
            let engine = StreamEngine::with_rules(load_rules(&rules)?)?;
            let records = split_records(&load_graph(&graph)?);
            let file = File::create(&events)
                .map_err(|e| DataError(format!("{}: {e}", events.display())))?;
            let mut sink = JsonLinesSink::new(BufWriter::new(file));
            let summary = engine.run_stream(records, config, &mut sink)?;
            sink.into_inner().flush()?;
            if let Some(p) = stats {
                write(&p, &batch_table_csv(&summary))?;
            }
            if let Some(err) = summary.error {
                return Err(DataError(err));
            }
            writeln!(
                out,
                "{} batches, {} events",
                summary.batches.len(),
                summary.events.len()
            )?;
        }
        Command::Metrics { graph, schema } => {
            let schema = match schema {
                Some(p) => load_schema(&read(&p)?)
                    .map_err(|e| DataError(format!("{}: {e}", p.display())))?,
                None => Schema::liver(),
            };
            let body = metrics_json(&schema, &load_graph(&graph)?)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&body)?)?;
        }
        Command::Bench {
            graph,
            sweep: which,
            custom,
            runs,
            out: path,
        } => {
            if runs == 0 {
                return Err(DataError("runs must be at least 1".into()));
            }
            let cells = match (which, custom) {
                (_, Some(Cells(cells))) => cells,
                (Some(SweepArg::Batch), None) => batch_size_cells(),
                (Some(SweepArg::Rules), None) => rule_count_cells(),
                (None, None) => unreachable!("clap requires --sweep or --custom"),
            };
            let records = split_records(&load_graph(&graph)?);
            let rows = timing_report(&sweep(&records, &event_rules(), &cells, runs)?);
            write(&path, &timing_csv(&rows))?;
            for r in rows {
                writeln!(
                    out,
                    "batch size {:>3}  rules {:>2}  {:.3} ms/batch",
                    r.batch_size, r.rule_count, r.mean_ms
                )?;
            }
        }
        Command::Serve { bind, data } => {
            let config = liverkg_service::Config {
                bind,
                data_dir: data,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(liverkg_service::serve(config)).map_err(DataError)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(DataError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
    }
}
