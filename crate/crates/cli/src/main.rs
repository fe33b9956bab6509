use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use emu_core::analysis::{compute_ribs, ControlPlaneModel, PathDiff, RibEntry, Trace};
use emu_core::compile::{compile_graph, ContainerCompiler};
use emu_core::routing::RouteClass;
use emu_core::script::{statement_count, Scenario};
use emu_core::{Asn, NodeKey, RenderedEmulation};
use ipnet::Ipv4Net;

#[derive(Parser)]
#[command(name = "emu", version, about = "Build and analyze emulated internets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario and write container artifacts or a graph.
    Compile(CompileArgs),
    /// Inspect the BGP control plane a scenario implies.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Print the number of statements in a scenario.
    Count { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Containers,
    Graph,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long, value_enum, default_value = "containers")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario's own seed.
    #[arg(long)]
    seed: Option<u64>,
    file: PathBuf,
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    seed: Option<u64>,
    /// Print a JSON report instead of text.
    #[arg(long)]
    json: bool,
    file: PathBuf,
}

#[derive(Subcommand)]
enum Analyze {
    /// Selected routes of every AS, or of one.
    Ribs {
        #[arg(long = "as")]
        asn: Option<Asn>,
        #[command(flatten)]
        input: Input,
    },
    /// Forwarding path from a node, e.g. `as150/host0`, to an address.
    Trace {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: Ipv4Addr,
        #[command(flatten)]
        input: Input,
    },
    /// Sources whose path changes when an AS announces a prefix.
    Hijack {
        #[arg(long)]
        attacker: Asn,
        #[arg(long)]
        prefix: Ipv4Net,
        #[command(flatten)]
        input: Input,
    },
}

fn render(file: &Path, seed: Option<u64>) -> Result<std::sync::Arc<RenderedEmulation>> {
    let mut scenario =
        Scenario::load(file).with_context(|| format!("reading {}", file.display()))?;
    if let Some(s) = seed {
        scenario.set_seed(s);
    }
    let mut emu = scenario.into_emulator()?;
    Ok(emu.render()?)
}

fn model(input: &Input) -> Result<ControlPlaneModel> {
    Ok(ControlPlaneModel::from_rendered(&*render(
        &input.file,
        input.seed,
    )?))
}

fn class_name(c: RouteClass) -> &'static str {
    match c {
        RouteClass::Own => "own",
        RouteClass::Customer => "customer",
        RouteClass::Peer => "peer",
        RouteClass::Provider => "provider",
        RouteClass::Unfiltered => "unfiltered",
    }
}

fn path_text(path: &[Asn]) -> String {
    if path.is_empty() {
        return "-".into();
    }
    path.iter()
        .map(Asn::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn rib_line(asn: Asn, e: &RibEntry) -> String {
    format!(
        "AS{asn} {} {} pref={} path={}",
        e.prefix,
        class_name(e.learned_from),
        e.pref,
        path_text(&e.as_path)
    )
}

fn trace_line(t: &Trace) -> String {
    let hops = t
        .hops()
        .iter()
        .map(NodeKey::to_string)
        .collect::<Vec<_>>()
        .join(" > ");
    match t {
        Trace::Reached {
            as_path, delivered, ..
        } => format!(
            "{} as-path={}{}",
            hops,
            path_text(as_path),
            if *delivered { "" } else { " (no holder)" }
        ),
        Trace::Unreachable { .. } => format!("{hops} unreachable"),
    }
}

fn print_diff(d: &PathDiff) {
    println!(
        "attacker AS{} prefix {} probe {}: {} of {} sources changed",
        d.attacker,
        d.prefix,
        d.probe,
        d.changed.len(),
        d.sources
    );
    for c in &d.changed {
        println!("AS{} old: {}", c.source, trace_line(&c.old));
        println!("AS{} new: {}", c.source, trace_line(&c.new));
    }
}

fn analyze(cmd: Analyze) -> Result<()> {
    match cmd {
        Analyze::Ribs { asn, input } => {
            let model = model(&input)?;
            let mut ribs = compute_ribs(&model);
            if let Some(a) = asn {
                if !model.ases().any(|x| x == a) {
                    bail!("unknown AS {a}");
                }
                ribs.per_as.retain(|k, _| *k == a);
                ribs.per_router
                    .retain(|k, _| k.scope == emu_core::Scope::As(a));
            }
            if input.json {
                println!("{}", serde_json::to_string_pretty(&ribs)?);
            } else {
                for (asn, table) in &ribs.per_as {
                    for e in table.values() {
                        println!("{}", rib_line(*asn, e));
                    }
                }
            }
        }
        Analyze::Trace { from, to, input } => {
            let model = model(&input)?;
            let src: NodeKey = from.parse()?;
            let trace = model.trace_path(&compute_ribs(&model), &src, to)?;
            if input.json {
                println!("{}", serde_json::to_string_pretty(&trace)?);
            } else {
                println!("{}", trace_line(&trace));
            }
        }
        Analyze::Hijack {
            attacker,
            prefix,
            input,
        } => {
            let model = model(&input)?;
            let diff = model.what_if_announce(attacker, prefix)?;
            if input.json {
                println!("{}", serde_json::to_string_pretty(&diff)?);
            } else {
                print_diff(&diff);
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compile(args) => {
            let rendered = render(&args.file, args.seed)?;
            std::fs::create_dir_all(&args.out)
                .with_context(|| format!("creating {}", args.out.display()))?;
            match args.format {
                Format::Containers => {
                    let out = ContainerCompiler::new().compile(&rendered, &args.out)?;
                    println!(
                        "{} containers, {} networks in {}",
                        out.containers.len(),
                        out.manifest.networks.len(),
                        args.out.display()
                    );
                }
                Format::Graph => {
                    let path = args.out.join("graph.dot");
                    std::fs::write(&path, compile_graph(&rendered))
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("{}", path.display());
                }
            }
        }
        Command::Analyze(cmd) => analyze(cmd)?,
        Command::Count { file } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            println!("{}", statement_count(&text));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("emu: {e:#}");
            ExitCode::FAILURE
        }
    }
}
