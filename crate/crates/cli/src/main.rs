use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use typepycker::bench::{
    bench_program, bench_run, subset_oracle, summarize, write_csv, BenchOptions, OracleError, DEFAULT_MAX_SITES,
};
use typepycker::flowgraph::EdgeRules;
use typepycker::infer::Key;
use typepycker::pipeline::{read_prelude, read_program, run_program, Analysis, Error};
use typepycker::runtime::{EvalOptions, DEFAULT_BUDGET};
use typepycker::selector::{candidates, closest_sources, selected_vertices};
use typepycker::syntax::{print_program, Program, Type};
use typepycker::transform::VariantKind;

/// Selects inferred type annotations that reduce runtime casts.
#[derive(Parser)]
#[command(name = "typepycker", version)]
struct Cli {
    /// File of `extern name: Type` declarations available to every program.
    #[arg(long, global = true, env = "TYPEPYCKER_PRELUDE")]
    prelude: Option<PathBuf>,
    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct RuleFlags {
    /// Add an edge from an `if` condition to the conditional expression.
    #[arg(long)]
    if_condition_edge: bool,
    /// Drop edges from `+` operands to the sum.
    #[arg(long)]
    no_operand_edges: bool,
}

impl RuleFlags {
    fn rules(self) -> EdgeRules {
        EdgeRules { operand_edges: !self.no_operand_edges, if_condition_edge: self.if_condition_edge }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and print the program in canonical form.
    Parse { file: PathBuf },
    /// Call-site targets from the points-to analysis.
    Callees { file: PathBuf },
    /// Given and inferred types of every annotation site.
    Infer {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// The data-flow graph.
    Graph {
        file: PathBuf,
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        rules: RuleFlags,
    },
    /// Annotations chosen by the selector.
    Select {
        file: PathBuf,
        #[arg(long)]
        json: bool,
        /// Show each candidate's closest sources.
        #[arg(long)]
        explain: bool,
        #[command(flatten)]
        rules: RuleFlags,
    },
    /// Print a program variant.
    Variant {
        file: PathBuf,
        #[arg(long, default_value = "chosen")]
        kind: VariantKind,
        #[arg(long)]
        fast_slow: bool,
        #[command(flatten)]
        rules: RuleFlags,
    },
    /// Evaluate a program variant and report cast counts.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "given")]
        kind: VariantKind,
        #[arg(long)]
        fast_slow: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Evaluate without performing casts.
        #[arg(long)]
        erase_casts: bool,
        /// Write the full cast report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        rules: RuleFlags,
    },
    /// Run Given, Infer and Chosen over every `.spy` file of a directory.
    Bench {
        dir: PathBuf,
        #[arg(long)]
        fast_slow: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        rules: RuleFlags,
    },
    /// Evaluate every subset of the inferred annotations.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_SITES)]
        max_sites: usize,
        #[arg(long)]
        fast_slow: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        rules: RuleFlags,
    },
    /// Infer, select, build the variants and compare their cast counts.
    Pipeline {
        file: PathBuf,
        #[arg(long)]
        fast_slow: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[command(flatten)]
        rules: RuleFlags,
    },
}

enum Failure {
    Program(String),
    Tool(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        if e.is_program_error() {
            Failure::Program(e.to_string())
        } else {
            Failure::Tool(e.to_string())
        }
    }
}

fn tool<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Tool(format!("{}: {e}", context.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Program(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Tool(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

struct Ctx<'a> {
    prelude: BTreeMap<String, Type>,
    out: Option<&'a Path>,
}

impl Ctx<'_> {
    fn load(&self, file: &Path) -> Result<Program, Failure> {
        Ok(read_program(file, &self.prelude)?)
    }

    fn emit(&self, text: &str) -> Result<(), Failure> {
        match self.out {
            Some(path) => std::fs::write(path, text).map_err(tool(path)),
            None => {
                let mut out = std::io::stdout().lock();
                match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                        Err(Failure::Tool(format!("standard output: {e}")))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    fn emit_json(&self, value: &impl serde::Serialize) -> Result<(), Failure> {
        self.emit(&(pretty(value) + "\n"))
    }
}

fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    std::fs::write(path, pretty(value) + "\n").map_err(tool(path))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let prelude = match &cli.prelude {
        Some(p) => read_prelude(p)?,
        None => BTreeMap::new(),
    };
    let ctx = Ctx { prelude, out: cli.out.as_deref() };
    match &cli.command {
        Command::Parse { file } => ctx.emit(&print_program(&ctx.load(file)?)),
        Command::Callees { file } => {
            let a = Analysis::new(&ctx.load(file)?)?;
            let mut spans = BTreeMap::new();
            a.resolved.program.visit_exprs(&mut |e| {
                spans.insert(e.id, e.span.clone());
            });
            let mut rows: Vec<_> = a
                .callees
                .iter()
                .map(|(call, targets)| {
                    let names: Vec<String> =
                        targets.iter().map(|b| a.resolved.binding(*b).name.clone()).collect();
                    (spans[&call].clone(), names)
                })
                .collect();
            rows.sort();
            let map: serde_json::Map<String, Value> =
                rows.into_iter().map(|(span, names)| (span.to_string(), json!(names))).collect();
            ctx.emit_json(&map)
        }
        Command::Infer { file, json } => {
            let a = Analysis::new(&ctx.load(file)?)?;
            let rows: Vec<(String, Type, Type)> = a
                .resolved
                .sites()
                .into_iter()
                .map(|s| (a.resolved.site_label(s), a.types.given(Key::from(s)), a.types.inferred(Key::from(s))))
                .collect();
            if *json {
                let list: Vec<Value> = rows
                    .iter()
                    .map(|(site, g, i)| json!({"site": site, "given": g.to_string(), "inferred": i.to_string()}))
                    .collect();
                ctx.emit_json(&json!({ "sites": list }))
            } else {
                let mut text = String::new();
                for (site, g, i) in rows {
                    let _ = writeln!(text, "{site}: {g} -> {i}");
                }
                ctx.emit(&text)
            }
        }
        Command::Graph { file, dot, json, rules } => {
            let a = Analysis::with_rules(&ctx.load(file)?, rules.rules())?;
            for d in &a.graph.diagnostics {
                eprintln!("warning: {d}");
            }
            if *json {
                ctx.emit_json(&a.graph.to_json())
            } else if *dot {
                ctx.emit(&a.graph.to_dot())
            } else {
                let mut text = String::new();
                for v in a.graph.vertices() {
                    let succ: Vec<String> =
                        a.graph.successors(v.id).iter().map(|s| a.graph.vertex(*s).label()).collect();
                    let _ = writeln!(text, "{} -> [{}]", v.label(), succ.join(", "));
                }
                ctx.emit(&text)
            }
        }
        Command::Select { file, json, explain, rules } => {
            let a = Analysis::with_rules(&ctx.load(file)?, rules.rules())?;
            let chosen = a.annotations(VariantKind::Chosen);
            if *explain {
                let picked: std::collections::BTreeSet<_> = selected_vertices(&a.graph).into_iter().collect();
                let mut text = String::new();
                for v in candidates(&a.graph) {
                    let vx = a.graph.vertex(v);
                    let sources: Vec<String> =
                        closest_sources(&a.graph, v).iter().map(|s| a.graph.vertex(*s).label()).collect();
                    let mark = if picked.contains(&v) { "select" } else { "skip" };
                    let _ = writeln!(text, "{mark} {} <- {{{}}}", vx.label(), sources.join(", "));
                }
                eprint!("{text}");
            }
            let rows: Vec<(String, String)> =
                chosen.iter().map(|(s, t)| (a.resolved.site_label(*s), t.to_string())).collect();
            if *json {
                let list: Vec<Value> = rows.iter().map(|(s, t)| json!({"site": s, "type": t})).collect();
                ctx.emit(&(serde_json::to_string(&json!({ "selected": list })).unwrap() + "\n"))
            } else {
                ctx.emit(&rows.iter().map(|(s, t)| format!("{s}: {t}\n")).collect::<String>())
            }
        }
        Command::Variant { file, kind, fast_slow, rules } => {
            let a = Analysis::with_rules(&ctx.load(file)?, rules.rules())?;
            ctx.emit(&print_program(&a.variant(*kind, *fast_slow)?))
        }
        Command::Run { file, kind, fast_slow, budget, erase_casts, report, rules } => {
            let a = Analysis::with_rules(&ctx.load(file)?, rules.rules())?;
            let program = a.variant(*kind, *fast_slow)?;
            let opts = EvalOptions { budget: *budget, erase_casts: *erase_casts, ..EvalOptions::default() };
            let ev = run_program(&program, &opts)?;
            if let Some(path) = report {
                write_json(path, &ev.report)?;
            }
            let d = &ev.report.dynamic;
            ctx.emit(&format!(
                "outcome: {}\nstatic sites: {}\ndynamic: total {} projection {} injection {} proxy {}\n",
                ev.report.outcome.label(),
                ev.report.static_sites.len(),
                d.total,
                d.projection,
                d.injection,
                d.proxy()
            ))
        }
        Command::Bench { dir, fast_slow, budget, json, csv, rules } => {
            let opts = BenchOptions {
                fast_slow: *fast_slow,
                budget: *budget,
                prelude: ctx.prelude.clone(),
                rules: rules.rules(),
            };
            let results = bench_run(dir, &opts).map_err(tool(dir))?;
            let summary = summarize(&results);
            if let Some(path) = json {
                write_json(path, &json!({ "results": results, "summary": summary }))?;
            }
            if let Some(path) = csv {
                let f = std::fs::File::create(path).map_err(tool(path))?;
                write_csv(&results, f).map_err(tool(path))?;
            }
            let mut text = String::new();
            for r in &results {
                match &r.error {
                    Some(e) => {
                        let _ = writeln!(text, "{}: error: {e}", r.program);
                    }
                    None => {
                        let totals: Vec<String> =
                            r.variants.iter().map(|v| format!("{} {}", v.variant, v.dynamic.total)).collect();
                        let class = r.class.map_or("-".to_owned(), |c| c.to_string());
                        let _ = writeln!(text, "{}: {} [{class}]", r.program, totals.join(", "));
                    }
                }
            }
            let _ = writeln!(
                text,
                "win {} tie {} loss {} unclassified {}",
                summary.win, summary.tie, summary.loss, summary.unclassified
            );
            ctx.emit(&text)
        }
        Command::Oracle { file, max_sites, fast_slow, budget, json, rules } => {
            let opts = BenchOptions { fast_slow: *fast_slow, budget: *budget, prelude: BTreeMap::new(), rules: rules.rules() };
            let name = file.file_name().map_or_else(|| file.display().to_string(), |n| n.to_string_lossy().into_owned());
            let result = match subset_oracle(&name, &ctx.load(file)?, *max_sites, &opts) {
                Ok(r) => r,
                Err(OracleError::TooManySites { found, limit }) => {
                    return Err(Failure::Tool(format!("{found} inferred sites exceed --max-sites {limit}")))
                }
                Err(OracleError::Program(e)) => return Err(e.into()),
            };
            if let Some(path) = json {
                write_json(path, &result)?;
            }
            let mut text = String::new();
            for (i, s) in result.sites.iter().enumerate() {
                let _ = writeln!(text, "bit {i}: {s}");
            }
            for r in &result.rows {
                let _ = writeln!(text, "{:#0w$b} {} {}", r.mask, r.dynamic.total, r.outcome.label(), w = result.sites.len() + 2);
            }
            let _ = writeln!(
                text,
                "chosen {:#b} rank {}; infer {:#b} rank {}; best {:?}",
                result.chosen_mask, result.chosen_rank, result.infer_mask, result.infer_rank, result.best
            );
            ctx.emit(&text)
        }
        Command::Pipeline { file, fast_slow, budget, rules } => {
            let program = ctx.load(file)?;
            let a = Analysis::with_rules(&program, rules.rules())?;
            let mut text = String::new();
            for kind in [VariantKind::Infer, VariantKind::Chosen] {
                let sites: Vec<String> = a
                    .annotations(kind)
                    .iter()
                    .map(|(s, t)| format!("{}: {t}", a.resolved.site_label(*s)))
                    .collect();
                let _ = writeln!(text, "{kind} annotations: [{}]", sites.join(", "));
            }
            let opts = BenchOptions { fast_slow: *fast_slow, budget: *budget, prelude: BTreeMap::new(), rules: rules.rules() };
            let r = bench_program(&file.display().to_string(), &program, &opts);
            if let Some(e) = &r.error {
                return Err(Failure::Program(e.clone()));
            }
            let _ = writeln!(text, "{:<8}{:>8}{:>8}{:>12}{:>11}{:>7}  outcome", "variant", "static", "total", "projection", "injection", "proxy");
            for v in &r.variants {
                let d = &v.dynamic;
                let _ = writeln!(
                    text,
                    "{:<8}{:>8}{:>8}{:>12}{:>11}{:>7}  {}",
                    v.variant.to_string(),
                    v.static_sites,
                    d.total,
                    d.projection,
                    d.injection,
                    d.proxy(),
                    v.outcome.label()
                );
            }
            let _ = writeln!(text, "class: {}", r.class.map_or("-".to_owned(), |c| c.to_string()));
            ctx.emit(&text)
        }
    }
}
