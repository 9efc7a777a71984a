use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use minicilk::bench::{rows_to_csv, run_visit_bench, BenchConfig, DEFAULT_LATENCIES};
use minicilk::cps::dump_system;
use minicilk::frontend::pretty::program_to_string;
use minicilk::graph::TreeGenConfig;
use minicilk::hardcilk::write_artifacts;
use minicilk::implicit_ir::dump_program;
use minicilk::pipeline::{compile, CompileOptions, Compiled};
use minicilk::runtime::{
    run_explicit, run_sequential_oracle, simulate_cost, CostConfig, GlobalMemory, RuntimeError, Stats,
    DEFAULT_STEP_LIMIT,
};

const EXIT_DIAGNOSTICS: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "minicilk", version, about = "Compile and run MiniCilk task programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DumpIr {
    Ast,
    Implicit,
    PostDae,
    Explicit,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Hardcilk,
    None,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Oracle,
    Parallel,
    Simulate,
}

#[derive(clap::Args)]
struct FrontOpts {
    /// Split `#pragma bombyx dae` statements into access tasks.
    #[arg(long, value_enum, default_value = "on")]
    dae: Toggle,
    /// Entry task (defaults to `main`, else the first task).
    #[arg(long)]
    entry: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a program, optionally dumping an IR or emitting HLS sources.
    Compile {
        input: PathBuf,
        #[arg(long, value_enum)]
        dump_ir: Option<DumpIr>,
        #[arg(long, value_enum, default_value = "none")]
        emit: Emit,
        /// Output directory for emitted files [default: out/<input stem>]
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        front: FrontOpts,
    },
    /// Run a program and print its result and statistics as JSON.
    Run {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "oracle")]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial memory image (little-endian 64-bit words).
        #[arg(long)]
        mem_file: Option<PathBuf>,
        /// Minimum memory size in words.
        #[arg(long, default_value_t = 65536)]
        mem_size: usize,
        /// Write the final memory image here.
        #[arg(long)]
        mem_out: Option<PathBuf>,
        /// Cycles per memory operation (simulate mode).
        #[arg(long, default_value_t = 100)]
        mem_latency: u64,
        /// Cycles per statement (simulate mode).
        #[arg(long, default_value_t = 1)]
        stmt_cost: u64,
        /// Processing elements for a task type, as `task=n` (simulate mode).
        #[arg(long = "pe", value_parser = parse_pe)]
        pes: Vec<(String, usize)>,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
        #[command(flatten)]
        front: FrontOpts,
        /// Arguments of the entry task.
        #[arg(last = true, allow_negative_numbers = true)]
        args: Vec<i64>,
    },
    /// Write a complete tree in CSR form to a memory image.
    GenGraph {
        #[arg(short = 'b', long, default_value_t = 4)]
        branch: u64,
        #[arg(short = 'd', long, default_value_t = 7)]
        depth: u32,
        #[arg(short = 'o', long)]
        out: PathBuf,
        /// Fail if the image would exceed this many words.
        #[arg(long)]
        mem_size: Option<u64>,
    },
    /// Simulate the traversal with and without DAE over several latencies.
    Bench {
        #[arg(short = 'b', long, default_value_t = 4)]
        branch: u64,
        #[arg(short = 'd', long, default_value_t = 7)]
        depth: u32,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LATENCIES)]
        latencies: Vec<u64>,
        /// CSV output file [default: stdout]
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
    },
}

fn parse_pe(s: &str) -> Result<(String, usize), String> {
    let (task, n) = s.split_once('=').ok_or_else(|| format!("expected task=n, got `{s}`"))?;
    let n = n.parse().map_err(|e| format!("bad PE count in `{s}`: {e}"))?;
    Ok((task.to_string(), n))
}

enum Failure {
    Input(String),
    Runtime(RuntimeError),
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        Failure::Runtime(e)
    }
}

fn read_and_compile(input: &Path, front: &FrontOpts) -> Result<Compiled, Failure> {
    let source = std::fs::read_to_string(input).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    let opts = CompileOptions { entry: front.entry.clone(), dae: front.dae == Toggle::On };
    compile(&source, &opts).map_err(|ds| {
        let file = input.display().to_string();
        Failure::Input(ds.0.iter().map(|d| d.render(&file)).collect::<Vec<_>>().join("\n"))
    })
}

fn cmd_compile(input: &Path, dump_ir: Option<DumpIr>, emit: Emit, out: Option<PathBuf>, front: &FrontOpts) -> Result<(), Failure> {
    let c = read_and_compile(input, front)?;
    match dump_ir {
        Some(DumpIr::Ast) => print!("{}", program_to_string(&c.ast)),
        Some(DumpIr::Implicit) => print!("{}", dump_program(&c.implicit)),
        Some(DumpIr::PostDae) => print!("{}", dump_program(&c.post_dae)),
        Some(DumpIr::Explicit) => print!("{}", dump_system(&c.explicit)),
        None => {}
    }
    if emit == Emit::Hardcilk {
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "system".into());
        let dir = out.unwrap_or_else(|| Path::new("out").join(stem));
        let written = write_artifacts(&dir, &c.explicit, &c.relations)
            .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
        for p in written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    input: &Path,
    mode: Mode,
    workers: usize,
    seed: u64,
    mem_file: Option<PathBuf>,
    mem_size: usize,
    mem_out: Option<PathBuf>,
    cost: CostConfig,
    step_limit: u64,
    front: &FrontOpts,
    args: &[i64],
) -> Result<(), Failure> {
    let c = read_and_compile(input, front)?;
    let memory = match &mem_file {
        Some(p) => GlobalMemory::load_file(p, mem_size).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => GlobalMemory::new(mem_size),
    };
    let (result, stats) = match mode {
        Mode::Oracle => {
            let out = run_sequential_oracle(&c.post_dae, args, &memory, step_limit)?;
            let mut stats = Stats::new();
            stats.tasks_executed = out.calls;
            (out.result, stats)
        }
        Mode::Parallel => {
            let out = run_explicit(&c.explicit, args, &memory, workers, seed, step_limit)?;
            (out.result, out.stats)
        }
        Mode::Simulate => {
            let out = simulate_cost(&c.explicit, args, &memory, &cost, step_limit)?;
            (out.result, out.stats)
        }
    };
    if let Some(p) = mem_out {
        memory.save_file(&p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
    }
    let stats = serde_json::to_value(&stats).expect("stats serialize");
    println!("{}", json!({ "result": result, "stats": stats }));
    Ok(())
}

fn cmd_gen_graph(branch: u64, depth: u32, out: &Path, limit: Option<u64>) -> Result<(), Failure> {
    let (layout, memory) =
        TreeGenConfig { branch, depth }.generate(limit).map_err(|e| Failure::Input(e.to_string()))?;
    memory.save_file(out).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
    println!("{}", layout.nodes);
    eprintln!(
        "offsets at {}, adjacency at {}, visited at {}; run visit with -- {}",
        layout.offsets_base,
        layout.adjacency_base,
        layout.visited_base,
        layout.visit_args().iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
    );
    Ok(())
}

fn cmd_bench(branch: u64, depth: u32, latencies: Vec<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = BenchConfig { tree: TreeGenConfig { branch, depth }, latencies, ..Default::default() };
    let rows = run_visit_bench(&cfg).map_err(|e| match e {
        minicilk::bench::BenchError::Runtime(r) => Failure::Runtime(r),
        other => Failure::Input(other.to_string()),
    })?;
    let text = rows_to_csv(&rows);
    match out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_DIAGNOSTICS } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Compile { input, dump_ir, emit, out, front } => cmd_compile(&input, dump_ir, emit, out, &front),
        Command::Run {
            input,
            mode,
            workers,
            seed,
            mem_file,
            mem_size,
            mem_out,
            mem_latency,
            stmt_cost,
            pes,
            step_limit,
            front,
            args,
        } => {
            let pe_counts: BTreeMap<String, usize> = pes.into_iter().collect();
            let cost = CostConfig { stmt_cost, mem_latency, pe_counts };
            cmd_run(&input, mode, workers, seed, mem_file, mem_size, mem_out, cost, step_limit, &front, &args)
        }
        Command::GenGraph { branch, depth, out, mem_size } => cmd_gen_graph(branch, depth, &out, mem_size),
        Command::Bench { branch, depth, latencies, out } => cmd_bench(branch, depth, latencies, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_DIAGNOSTICS)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invariant_violation() { EXIT_INVARIANT } else { EXIT_RUNTIME })
        }
    }
}
