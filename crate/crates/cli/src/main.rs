use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use num_bigint::BigUint;
use serde::Serialize;

use workbench_core::chain::{iterate_chain, ReEnumeration};
use workbench_core::check::{
    check_base_class, check_chain, check_construction, check_tree_basics, Violation,
};
use workbench_core::cone::{lower_cone_subtree, upper_cone_subtree};
use workbench_core::construction::{ConstructionState, Registry, StageBudget};
use workbench_core::dot::export_dot;
use workbench_core::io::{self, RunConfig};
use workbench_core::machine::{parse_index, Program};
use workbench_core::FinString;

/// Stage-bounded constructions on trees of binary and ternary strings.
#[derive(Parser)]
#[command(name = "workbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the tree family and diagonal set.
    BuildT2 {
        #[arg(long)]
        trees: usize,
        #[arg(long)]
        stages: u64,
        /// JSON list of {"name", "program"} entries; program is assembler text.
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value_t = 64)]
        tuples_per_stage: usize,
        #[arg(long, default_value_t = 4096)]
        evals_per_stage: usize,
        #[arg(long, default_value_t = 12)]
        max_height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the chain of classes coding the given enumerations.
    BuildChain {
        /// JSON list; each entry is {"program": text} or {"table": [[stage, element], ...]}.
        #[arg(long)]
        enums: PathBuf,
        #[arg(long)]
        stages: u64,
        #[arg(long, default_value_t = 10)]
        embed_depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lower-cone subtree selection.
    AvoidLower {
        #[arg(long)]
        tree: PathBuf,
        /// JSON list of binary strings.
        #[arg(long)]
        rows: PathBuf,
        /// Program index, or @FILE with assembler text.
        #[arg(long)]
        j: String,
        #[arg(long)]
        budget: u64,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper-cone subtree selection.
    AvoidUpper {
        #[arg(long)]
        tree: PathBuf,
        /// Program index, or @FILE with assembler text.
        #[arg(long)]
        i: String,
        /// Finite truncation of the target set, as bits.
        #[arg(long)]
        x: String,
        #[arg(long)]
        budget: u64,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the class of eventually constant strings 0^a 1^ω and 0^ω.
    BaseClass {
        #[arg(long)]
        stages: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every invariant check against an output directory.
    Check { dir: PathBuf },
    /// Print the index of an assembler program ("-" reads stdin).
    Assemble { file: PathBuf },
    /// Print the program with the given index.
    Disassemble { index: String },
    /// Write one DOT graph per tree snapshot.
    ExportDot {
        /// A snapshot file or an output directory.
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Outcome {
    Ok,
    Violations(Vec<Violation>),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WORKBENCH_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violations(v)) => {
            for x in &v {
                println!("{x}");
            }
            eprintln!("{} invariant violation(s)", v.len());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// A program given as a decimal index or `@FILE` of assembler text.
fn functional(arg: &str) -> Result<Program> {
    match arg.strip_prefix('@') {
        Some(file) => {
            let text = read_text(Path::new(file))?;
            Program::parse(&text).with_context(|| format!("assembling {file}"))
        }
        None => Ok(Program::from_index(&parse_index(arg)?)),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::BuildT2 {
            trees,
            stages,
            registry,
            tuples_per_stage,
            evals_per_stage,
            max_height,
            seed,
            out,
        } => {
            let registry: Registry = read_json_file(&registry)?;
            let budget = StageBudget {
                tuples_per_stage,
                evals_per_stage,
                max_height,
            };
            let mut state = ConstructionState::new(trees, registry.clone(), budget)?;
            state.run(stages)?;
            let config = RunConfig::BuildT2 {
                trees,
                stages,
                budget,
                registry,
                seed,
            };
            io::write_construction(&out, &config, &state)?;
            println!(
                "{}: {} trees, {} stages, |D| = {}, {} followers, {} actions",
                out.display(),
                state.trees().len(),
                stages,
                state.diagonal_set().len(),
                state.followers().len(),
                state.log().len()
            );
        }
        Command::BuildChain {
            enums,
            stages,
            embed_depth,
            seed,
            out,
        } => {
            let enums: Vec<ReEnumeration> = read_json_file(&enums)?;
            let chain = iterate_chain(&enums, stages)?;
            let config = RunConfig::BuildChain {
                stages,
                enums,
                embed_depth,
                seed,
            };
            io::write_chain(&out, &config, &chain)?;
            for q in &chain.levels {
                println!(
                    "level {}: {} nodes, {} markers, decoded {:?}",
                    q.upsilon().index(),
                    q.upsilon().len(),
                    q.markers().len(),
                    q.decoded_values()
                );
            }
        }
        Command::AvoidLower {
            tree,
            rows,
            j,
            budget,
            depth,
            out,
        } => {
            let tree = io::read_tree(&tree)?;
            let rows: Vec<FinString> = read_json_file(&rows)?;
            let result = lower_cone_subtree(&tree, &rows, &functional(&j)?, budget, depth)?;
            emit(&result, out.as_deref())?;
        }
        Command::AvoidUpper {
            tree,
            i,
            x,
            budget,
            depth,
            out,
        } => {
            let tree = io::read_tree(&tree)?;
            let x = FinString::parse(&x)?;
            if x.alphabet() != workbench_core::Alphabet::Binary {
                bail!("--x must be a binary string");
            }
            let result = upper_cone_subtree(&tree, &functional(&i)?, &x, depth, budget)?;
            emit(&result, out.as_deref())?;
        }
        Command::BaseClass { stages, seed, out } => {
            io::write_base_class(&out, &RunConfig::BaseClass { stages, seed }, stages)?;
            println!("{}: base class to stage {stages}", out.display());
        }
        Command::Check { dir } => {
            let violations = match io::read_config(&dir)? {
                RunConfig::BuildT2 { .. } => check_construction(&io::read_construction(&dir)?),
                RunConfig::BuildChain { .. } => {
                    let (chain, depth) = io::read_chain(&dir)?;
                    check_chain(&chain, depth)
                }
                RunConfig::BaseClass { stages, .. } => {
                    let tree = io::read_tree(&dir.join("tree_0.json"))?;
                    let mut v = check_tree_basics("base class", &tree);
                    v.extend(check_base_class(&tree, stages as usize));
                    v
                }
            };
            if !violations.is_empty() {
                return Ok(Outcome::Violations(violations));
            }
            println!("{}: all invariants hold", dir.display());
        }
        Command::Assemble { file } => {
            let program = Program::parse(&read_text(&file)?)?;
            println!("{}", program.index());
        }
        Command::Disassemble { index } => {
            let e: BigUint = parse_index(&index)?;
            print!("{}", Program::from_index(&e).to_text());
        }
        Command::ExportDot { snapshot, out } => {
            let files = if snapshot.is_dir() {
                io::tree_files(&snapshot)?
            } else {
                vec![snapshot]
            };
            if files.is_empty() {
                bail!("no tree snapshots found");
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for f in files {
                let snap: workbench_core::tree::TreeSnapshot = io::read_json(&f)?;
                let stem = f
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or("tree")
                    .trim_end_matches(".gz")
                    .trim_end_matches(".json")
                    .to_string();
                let target = out.join(format!("{stem}.dot"));
                fs::write(&target, export_dot(&snap))
                    .with_context(|| format!("writing {}", target.display()))?;
            }
        }
    }
    Ok(Outcome::Ok)
}
