use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use rac_core::domain::{parse_literals_text, parse_problem, GroundAction, Problem};
use rac_core::engine::{is_applicable, progress};
use rac_core::fixtures;
use rac_core::harness::{
    audit_labels, emit_table, load_instances, mock_for, render_prompts, run_suite, to_jsonl,
    Instance, ResultsTable, RunRecord, TableFormat,
};
use rac_core::pipeline::{MethodKind, PipelineConfig, PipelineMode};
use rac_core::query::{evaluate, Query, QueryKind};
use rac_core::reasoner::{build_reasoner, ReasonerConfig, ReasonerMode};
use rac_core::registry::{DomainBundle, Registry};

#[derive(Parser)]
#[command(
    name = "rac",
    version,
    about = "Reasoning about actions: oracle, pipeline and benchmark runner"
)]
struct Cli {
    /// Reasoner configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the state trace of an action sequence.
    Progress {
        #[command(flatten)]
        world: WorldArgs,
        /// Also print each state in words.
        #[arg(long)]
        nl: bool,
    },
    /// Check whether the last action is applicable after the ones before it.
    Check {
        #[command(flatten)]
        world: WorldArgs,
    },
    /// Answer a query with the oracle.
    Answer {
        #[command(flatten)]
        world: WorldArgs,
        /// Query literals, e.g. "(on a b) (not (clear b))". Defaults to the problem goal.
        #[arg(short, long)]
        query: Option<String>,
        /// projection, executability, plan_verification or validation.
        #[arg(long, default_value = "projection")]
        kind: String,
    },
    /// Run a method over instance files and print the accuracy table.
    RunBench {
        #[command(flatten)]
        domains: DomainArgs,
        #[command(flatten)]
        bench: BenchArgs,
        /// Comma-separated method ids, or `all`.
        #[arg(long, default_value = "prorac")]
        method: String,
        /// Directory for table.md, table.csv and records.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Table printed on stdout: markdown or csv.
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Compare gold labels with the oracle.
    Audit {
        #[command(flatten)]
        domains: DomainArgs,
        #[arg(short, long = "instances", required = true)]
        instances: Vec<PathBuf>,
        /// Directory for audit.json and audit-patch.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print every prompt a method would send, without calling a reasoner.
    RenderPrompts {
        #[command(flatten)]
        domains: DomainArgs,
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long, default_value = "prorac")]
        method: String,
        /// Only this instance.
        #[arg(long)]
        question_id: Option<String>,
    },
}

#[derive(Args)]
struct DomainArgs {
    /// Extra domain files (built-in domains are always available).
    #[arg(short, long = "domain")]
    domain: Vec<PathBuf>,
    /// Annotation files, matched to --domain by position.
    #[arg(long)]
    annotations: Vec<PathBuf>,
}

#[derive(Args)]
struct WorldArgs {
    /// Domain file or built-in domain name.
    #[arg(short, long)]
    domain: String,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Problem file or built-in problem name (e.g. bw-p01).
    #[arg(short, long)]
    problem: String,
    /// Comma-separated action terms, e.g. "pickup a, stack a b".
    #[arg(short, long, default_value = "")]
    actions: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(short, long = "instances", required = true)]
    instances: Vec<PathBuf>,
    /// live, record, replay or mock.
    #[arg(long)]
    mode: Option<String>,
    /// Record/replay cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// structured or nl.
    #[arg(long)]
    pipeline_mode: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

/// Bad arguments, configuration or input files.
struct Usage(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Usage> {
    let mut cfg = match &cli.config {
        Some(p) => ReasonerConfig::load(p)?,
        None => ReasonerConfig::default(),
    };
    match cli.command {
        Command::Progress { world, nl } => cmd_progress(&world, nl),
        Command::Check { world } => cmd_check(&world),
        Command::Answer { world, query, kind } => cmd_answer(&world, query.as_deref(), &kind),
        Command::RunBench {
            domains,
            bench,
            method,
            out,
            format,
            parallelism,
        } => {
            bench.apply(&mut cfg)?;
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            cfg.validate()?;
            let format: TableFormat = format.parse().map_err(|e: String| anyhow!(e))?;
            cmd_run_bench(
                &domains,
                &bench,
                &cfg,
                &parse_methods(&method)?,
                out.as_deref(),
                format,
            )
        }
        Command::Audit {
            domains,
            instances,
            out,
        } => cmd_audit(&domains, &instances, out.as_deref()),
        Command::RenderPrompts {
            domains,
            bench,
            method,
            question_id,
        } => {
            bench.apply(&mut cfg)?;
            let method: MethodKind = method.parse().map_err(|e: String| anyhow!(e))?;
            cmd_render(&domains, &bench, &cfg, method, question_id.as_deref())
        }
    }
}

impl BenchArgs {
    fn apply(&self, cfg: &mut ReasonerConfig) -> Result<(), Usage> {
        if let Some(m) = &self.mode {
            cfg.mode = m.parse::<ReasonerMode>().map_err(|e| anyhow!(e))?;
        }
        if let Some(c) = &self.cache {
            cfg.cache_dir = Some(c.clone());
        }
        if let Some(m) = &self.pipeline_mode {
            cfg.pipeline_mode = Some(m.parse::<PipelineMode>().map_err(|e| anyhow!(e))?);
        }
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        Ok(())
    }
}

fn parse_methods(list: &str) -> Result<Vec<MethodKind>, Usage> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(MethodKind::ALL.to_vec());
    }
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: MethodKind = item.parse().map_err(|e: String| anyhow!(e))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Usage(anyhow!("no method given")));
    }
    Ok(out)
}

fn registry(args: &DomainArgs) -> Result<Registry, Usage> {
    let mut reg = Registry::builtin();
    if args.annotations.len() > args.domain.len() {
        return Err(Usage(anyhow!("more --annotations than --domain files")));
    }
    for (i, d) in args.domain.iter().enumerate() {
        let bundle = DomainBundle::load(d, args.annotations.get(i).map(PathBuf::as_path))
            .with_context(|| format!("loading domain {}", d.display()))?;
        reg.insert(bundle);
    }
    Ok(reg)
}

fn load_all(reg: &Registry, paths: &[PathBuf]) -> Result<Vec<Instance>, Usage> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(load_instances(p, reg).with_context(|| format!("loading {}", p.display()))?);
    }
    let mut seen = BTreeSet::new();
    for i in &out {
        if !seen.insert(i.question_id.as_str()) {
            return Err(Usage(anyhow!(
                "question_id {} appears twice",
                i.question_id
            )));
        }
    }
    Ok(out)
}

struct World {
    bundle: DomainBundle,
    problem: Problem,
    actions: Vec<GroundAction>,
}

fn world(args: &WorldArgs) -> Result<World, Usage> {
    let path = Path::new(&args.domain);
    let bundle = if path.exists() {
        DomainBundle::load(path, args.annotations.as_deref())
            .with_context(|| format!("loading domain {}", path.display()))?
    } else {
        Registry::builtin()
            .get_str(&args.domain)
            .cloned()
            .ok_or_else(|| anyhow!("`{}` is neither a file nor a built-in domain", args.domain))?
    };
    let domain = &bundle.domain;
    let ppath = Path::new(&args.problem);
    let problem = if ppath.exists() {
        let text =
            fs::read_to_string(ppath).with_context(|| format!("reading {}", ppath.display()))?;
        parse_problem(&text, domain).with_context(|| format!("parsing {}", ppath.display()))?
    } else {
        fixtures::PROBLEMS
            .iter()
            .filter(|(d, _)| *d == domain.name.as_str())
            .filter_map(|(_, text)| parse_problem(text, domain).ok())
            .find(|p| p.name.as_str() == args.problem)
            .ok_or_else(|| {
                anyhow!(
                    "`{}` is neither a file nor a built-in problem",
                    args.problem
                )
            })?
    };
    let mut actions = Vec::new();
    for term in args
        .actions
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
    {
        let term = if term.starts_with('(') {
            term.to_string()
        } else {
            format!("({term})")
        };
        actions.push(
            domain
                .ground_term(&term, &problem.objects)
                .with_context(|| format!("action {term}"))?,
        );
    }
    Ok(World {
        bundle,
        problem,
        actions,
    })
}

fn cmd_progress(args: &WorldArgs, nl: bool) -> Result<ExitCode, Usage> {
    let w = world(args)?;
    let trace = progress(&w.problem.init, &w.actions);
    print!("{}", trace.report());
    if nl {
        for (i, s) in trace.states.iter().enumerate() {
            let text =
                w.bundle
                    .annotations
                    .render_state_nl(s, &w.bundle.domain, &w.problem.objects)?;
            println!("S{i}: {text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: &WorldArgs) -> Result<ExitCode, Usage> {
    let w = world(args)?;
    let Some((last, prefix)) = w.actions.split_last() else {
        return Err(Usage(anyhow!("--actions is empty")));
    };
    let trace = progress(&w.problem.init, prefix);
    if let Some((i, _)) = trace.failure() {
        return Err(Usage(anyhow!("prefix is not executable: step {i} fails")));
    }
    let r = is_applicable(trace.final_state(), last);
    if r.applicable {
        println!("{last}: applicable");
    } else {
        let lits: Vec<String> = r.unsatisfied.iter().map(ToString::to_string).collect();
        println!("{last}: not applicable; unsatisfied: {}", lits.join(" "));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_answer(args: &WorldArgs, query: Option<&str>, kind: &str) -> Result<ExitCode, Usage> {
    let w = world(args)?;
    let kind =
        QueryKind::from_category(kind).ok_or_else(|| anyhow!("unknown query kind `{kind}`"))?;
    let literals = match query {
        Some(q) => parse_literals_text(q, &w.bundle.domain, &w.problem.objects)?,
        None => w.problem.goal.clone().unwrap_or_default(),
    };
    let trace = progress(&w.problem.init, &w.actions);
    let v = evaluate(&trace, &Query::new(kind, literals));
    println!("answer: {}", v.answer);
    println!("evidence: {}", serde_json::to_string(&v.evidence)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_run_bench(
    domains: &DomainArgs,
    bench: &BenchArgs,
    cfg: &ReasonerConfig,
    methods: &[MethodKind],
    out: Option<&Path>,
    format: TableFormat,
) -> Result<ExitCode, Usage> {
    let reg = registry(domains)?;
    let instances = load_all(&reg, &bench.instances)?;
    let mut mock_err = None;
    let reasoner = build_reasoner(cfg, || match mock_for(&reg, &instances) {
        Ok(m) => m,
        Err(e) => {
            mock_err = Some(e);
            rac_core::reasoner::SymbolicMock::new(reg.clone())
        }
    })?;
    if let Some(e) = mock_err {
        return Err(Usage(anyhow!("mock reasoner: {e}")));
    }
    let pcfg = PipelineConfig::from(cfg);
    let mut table = ResultsTable::default();
    let mut records: Vec<RunRecord> = Vec::new();
    let mut errors = 0;
    for &m in methods {
        let s = run_suite(
            &instances,
            m,
            &pcfg,
            cfg.parallelism,
            reasoner.as_ref(),
            &reg,
        );
        errors += s.method_errors();
        table.merge(s.table);
        records.extend(s.records);
    }
    let rendered = emit_table(&table, format);
    print!("{rendered}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(
            dir.join("table.md"),
            emit_table(&table, TableFormat::Markdown),
        )?;
        fs::write(dir.join("table.csv"), emit_table(&table, TableFormat::Csv))?;
        fs::write(dir.join("records.jsonl"), to_jsonl(&records))?;
    }
    if errors > 0 {
        eprintln!("{errors} instance run(s) failed; see the run records");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(
    domains: &DomainArgs,
    paths: &[PathBuf],
    out: Option<&Path>,
) -> Result<ExitCode, Usage> {
    let reg = registry(domains)?;
    let instances = load_all(&reg, paths)?;
    let report = audit_labels(&instances, &reg);
    print!("{}", report.render());
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(
            dir.join("audit.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
        fs::write(dir.join("audit-patch.jsonl"), report.patch_jsonl())?;
    }
    Ok(
        if report.flagged_count() > 0 || !report.invalid.is_empty() {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        },
    )
}

fn cmd_render(
    domains: &DomainArgs,
    bench: &BenchArgs,
    cfg: &ReasonerConfig,
    method: MethodKind,
    only: Option<&str>,
) -> Result<ExitCode, Usage> {
    let reg = registry(domains)?;
    let instances = load_all(&reg, &bench.instances)?;
    let pcfg = PipelineConfig::from(cfg);
    let mut shown = 0;
    for inst in instances
        .iter()
        .filter(|i| only.is_none_or(|q| q == i.question_id))
    {
        shown += 1;
        for p in render_prompts(inst, method, &pcfg, &reg)
            .map_err(|e| anyhow!("{}: {e}", inst.question_id))?
        {
            println!(
                "=== {} {} (n={}, temperature={}) ===\n{}\n",
                inst.question_id, p.stage, p.n, p.temperature, p.prompt
            );
        }
    }
    if shown == 0 {
        return Err(Usage(anyhow!("no matching instance")));
    }
    Ok(ExitCode::SUCCESS)
}
