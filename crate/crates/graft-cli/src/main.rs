//! graft: fuse tree-traversal programs, run them on concrete trees, and
//! compare fused against unfused executions.

use clap::{Args, Parser, Subcommand};
use graft_core::error::Error;
use graft_core::fusion::{self, FusionConfig};
use graft_core::interp::{self, ExecOptions, TreeSpec};
use graft_core::model;
use graft_core::pipeline;
use graft_core::resolved::RProgram;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "graft", version, about = "tree-traversal fusion compiler")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fuse a program and write the extended-DSL output.
    Fuse(FuseArgs),
    /// Execute a program on a tree and report metrics.
    Run(RunArgs),
    /// Run fused and unfused on the same tree; compare states and counters.
    Diff(DiffArgs),
    /// Dump analysis artifacts (call graph, automata, dependence graphs).
    Stats(StatsArgs),
}

#[derive(Args)]
struct FuseArgs {
    input: PathBuf,
    /// Output path for the fused program (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    max_seq: usize,
    #[arg(long, default_value_t = 3)]
    max_repeat: usize,
    /// Write fusion statistics JSON here.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Output form: text (extended DSL), json (unit summary), or dot
    /// (dependence graphs of every fused unit).
    #[arg(long, default_value = "text")]
    emit: String,
}

#[derive(Args)]
struct RunArgs {
    program: PathBuf,
    /// Tree spec JSON file for input bindings.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Override the spec seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Generate a default tree of this size when no spec is given.
    #[arg(long, visible_alias = "pages")]
    size: Option<u64>,
    /// Write execution metrics JSON here.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    program: PathBuf,
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, visible_alias = "pages")]
    size: Option<u64>,
    #[arg(long, default_value_t = 5)]
    max_seq: usize,
    #[arg(long, default_value_t = 3)]
    max_repeat: usize,
}

#[derive(Args)]
struct StatsArgs {
    program: PathBuf,
    /// Dump the labeled call graph of every entry call as DOT.
    #[arg(long)]
    call_graph: bool,
    /// Dump the six minimized access automata of a statement:
    /// `Kind::traversal/INDEX`.
    #[arg(long)]
    automata: Option<String>,
    /// Dump the dependence graph of one seed sequence: `main:INDEX`.
    #[arg(long)]
    depgraph: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    // deep trees nest interpreter frames; run everything on a roomy stack
    let result = pipeline::run_with_stack(move || dispatch(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "kind": err.tag(), "message": err.to_string() }
            });
            if json {
                println!("{payload}");
            }
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Fuse(args) => cmd_fuse(args, cli.json),
        Cmd::Run(args) => cmd_run(args, cli.json),
        Cmd::Diff(args) => cmd_diff(args, cli.json),
        Cmd::Stats(args) => cmd_stats(args, cli.json),
    }
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Internal {
        msg: format!("cannot read {}: {e}", path.display()),
    })
}

fn write_out(path: &PathBuf, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Internal {
        msg: format!("cannot write {}: {e}", path.display()),
    })
}

fn load_spec(
    rp: &RProgram,
    tree: &Option<PathBuf>,
    seed: Option<u64>,
    size: Option<u64>,
) -> Result<Option<TreeSpec>, Error> {
    let spec = match tree {
        Some(path) => Some(TreeSpec::from_json(&read(path)?)?),
        None => {
            // default generator: grow from the first input binding's kind
            let needs_input = rp
                .bindings
                .iter()
                .find(|b| matches!(b.init, graft_core::resolved::RTreeInit::Input));
            needs_input.map(|b| TreeSpec::Grow {
                root: rp.kind_name(b.kind).to_string(),
                size: size.unwrap_or(50),
                seed: seed.unwrap_or(1),
                data: Default::default(),
            })
        }
    };
    Ok(match (spec, seed) {
        (Some(s), Some(seed)) => Some(s.with_seed(seed)),
        (s, _) => s,
    })
}

fn metrics_json(m: &interp::ExecMetrics) -> serde_json::Value {
    serde_json::json!({
        "nodeVisits": m.node_visits,
        "simpleStatements": m.simple_statements,
        "guardChecks": m.guard_checks,
    })
}

fn cmd_fuse(args: FuseArgs, json: bool) -> Result<(), Error> {
    let rp = pipeline::load_program(&read(&args.input)?)?;
    let config = FusionConfig {
        max_seq_len: args.max_seq,
        max_repeat: args.max_repeat,
    };
    let (text, result) = pipeline::fuse_to_text(&rp, config)?;
    let stats = result.stats.to_json();
    if let Some(path) = &args.stats {
        write_out(path, &serde_json::to_string_pretty(&stats).unwrap())?;
    }
    match args.emit.as_str() {
        "text" => match &args.output {
            Some(path) => write_out(path, &text)?,
            None if !json => print!("{text}"),
            None => {}
        },
        "json" => {
            let payload = serde_json::json!({
                "stats": stats,
                "units": result.units.iter().map(|u| u.name.clone()).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&payload).unwrap());
            if let Some(path) = &args.output {
                write_out(path, &text)?;
            }
            return Ok(());
        }
        "dot" => {
            let mut dot = String::new();
            for unit in &result.units {
                dot.push_str(&format!("// unit {} [{}]\n", unit.name, unit.key.display(&rp)));
                dot.push_str(&unit.graph.to_dot(&unit.merged, &rp));
            }
            match &args.output {
                Some(path) => write_out(path, &dot)?,
                None => print!("{dot}"),
            }
            return Ok(());
        }
        other => {
            return Err(Error::Internal {
                msg: format!("unknown emit mode `{other}` (text, json, dot)"),
            })
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&stats).unwrap());
    }
    Ok(())
}

fn cmd_run(args: RunArgs, json: bool) -> Result<(), Error> {
    let rp = pipeline::load_program(&read(&args.program)?)?;
    let spec = load_spec(&rp, &args.tree, args.seed, args.size)?;
    let run = interp::execute(&rp, spec.as_ref(), ExecOptions::default())?;
    let payload = serde_json::json!({
        "metrics": metrics_json(&run.metrics),
        "liveNodes": run.tree.live_count(),
    });
    if let Some(path) = &args.metrics {
        write_out(path, &serde_json::to_string_pretty(&payload).unwrap())?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    } else {
        println!(
            "visits {}  statements {}  guard checks {}",
            run.metrics.node_visits, run.metrics.simple_statements, run.metrics.guard_checks
        );
    }
    Ok(())
}

fn cmd_diff(args: DiffArgs, json: bool) -> Result<(), Error> {
    let src = read(&args.program)?;
    let rp = pipeline::load_program(&src)?;
    let spec = load_spec(&rp, &args.tree, args.seed, args.size)?;
    let config = FusionConfig {
        max_seq_len: args.max_seq,
        max_repeat: args.max_repeat,
    };
    let report = pipeline::diff_run(&src, spec.as_ref(), config)?;
    let identical = report.states_identical();
    let payload = serde_json::json!({
        "stateDiff": report.differences.iter().map(|(b, ds)| serde_json::json!({
            "binding": b,
            "differences": ds.iter().map(|d| format!("{}: {}", d.path, d.what)).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "statesIdentical": identical,
        "statementMultisetEqual": report.multiset_equal,
        "unfused": metrics_json(&report.unfused),
        "fused": metrics_json(&report.fused),
        "visitRatio": report.visit_ratio(),
        "fusion": report.stats.stats.to_json(),
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    } else {
        println!(
            "state diff: {}  multiset: {}  visits {} -> {} (ratio {:.2})",
            if identical { "empty" } else { "NON-EMPTY" },
            if report.multiset_equal { "equal" } else { "UNEQUAL" },
            report.unfused.node_visits,
            report.fused.node_visits,
            report.visit_ratio(),
        );
        for (binding, ds) in &report.differences {
            for d in ds {
                println!("  {binding}.{}: {}", d.path, d.what);
            }
        }
    }
    if identical && report.multiset_equal {
        Ok(())
    } else {
        Err(Error::Internal {
            msg: "fused and unfused executions differ".into(),
        })
    }
}

fn cmd_stats(args: StatsArgs, json: bool) -> Result<(), Error> {
    let rp = pipeline::load_program(&read(&args.program)?)?;
    let mut out = String::new();
    if args.call_graph {
        for entry in &rp.entry {
            if let graft_core::resolved::REntry::Call {
                binding,
                family,
                span,
                ..
            } = entry
            {
                let kind = rp.bindings[binding.idx()].kind;
                let g = model::build_labeled_call_graph(&rp, kind, *family, *span)?;
                out.push_str(&g.to_dot(&rp));
            }
        }
    }
    if let Some(id) = &args.automata {
        out.push_str(&automata_dump(&rp, id)?);
    }
    if let Some(seq) = &args.depgraph {
        out.push_str(&depgraph_dump(&rp, seq)?);
    }
    if json {
        println!("{}", serde_json::json!({ "dot": out }));
    } else {
        print!("{out}");
    }
    Ok(())
}

/// `Kind::traversal/INDEX` -> six minimized automata as DOT.
fn automata_dump(rp: &RProgram, id: &str) -> Result<String, Error> {
    use graft_core::automata::{summarize_stmt, CollectCtx};
    let (fn_part, idx_part) = id.rsplit_once('/').ok_or_else(|| Error::Internal {
        msg: "statement id must be Kind::traversal/INDEX".into(),
    })?;
    let idx: usize = idx_part.parse().map_err(|_| Error::Internal {
        msg: "bad statement index".into(),
    })?;
    let f = rp
        .fns
        .iter()
        .position(|f| &*f.display == fn_part)
        .map(|i| graft_core::resolved::FnId(i as u32))
        .ok_or_else(|| Error::Internal {
            msg: format!("no traversal `{fn_part}`"),
        })?;
    let rfn = &rp.fns[f.idx()];
    let stmt = rfn.body.get(idx).ok_or_else(|| Error::Internal {
        msg: format!("{fn_part} has no statement {idx}"),
    })?;
    let ctx = CollectCtx::for_fn(rp, f);
    let summary = summarize_stmt(rp, &ctx, rfn.owner, stmt)?;
    let mut out = String::new();
    for (name, nfa) in summary.automata() {
        let dfa = nfa.minimize();
        out.push_str(&dfa.to_dot(&rp.alphabet.names, &format!("{fn_part}/{idx} {name}")));
    }
    Ok(out)
}

/// `main:INDEX` -> dependence graphs of the seed sequence, one per concrete
/// receiver kind.
fn depgraph_dump(rp: &RProgram, seq: &str) -> Result<String, Error> {
    let idx: usize = seq
        .strip_prefix("main:")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Internal {
            msg: "sequence id must be main:INDEX".into(),
        })?;
    let seeds = fusion::find_seed_sequences(rp);
    let seed = seeds.get(idx).ok_or_else(|| Error::Internal {
        msg: format!("no seed sequence {idx} (found {})", seeds.len()),
    })?;
    let binding = &rp.bindings[seed.binding.idx()];
    let families: Vec<_> = seed
        .entries
        .iter()
        .filter_map(|&i| match &rp.entry[i] {
            graft_core::resolved::REntry::Call { family, .. } => Some(*family),
            _ => None,
        })
        .collect();
    let mut out = String::new();
    for kind in rp.concrete_subkinds(binding.kind) {
        let key: Vec<_> = families
            .iter()
            .filter_map(|fam| rp.dispatch[kind.idx()][fam.idx()])
            .collect();
        let merged = graft_core::depgraph::merge_bodies(rp, &key)?;
        let graph = graft_core::depgraph::build_dependence_graph(&merged);
        out.push_str(&format!("// receiver kind {}\n", rp.kind_name(kind)));
        out.push_str(&graph.to_dot(&merged, rp));
    }
    Ok(out)
}
