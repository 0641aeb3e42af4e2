//! The `nsvd` command line: scene and dialog generation, single-scene
//! execution traces, evaluation and an interactive REPL.

mod manifest;
pub mod repl;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nsvd_core::dialoggen::{
    generate_dataset, read_dataset, split_question_types, verify_replay, write_dataset, Dataset,
    GenConfig, DEFAULT_REPLAY_FRACTION,
};
use nsvd_core::eval::{
    evaluate, sweep_history_window, write_rounds_csv, CorefBin, DialogModel, EvaluationConfig,
    Scheme, StubModel, SymbolicModel, Window,
};
use nsvd_core::executor::{describe_kb, Executor};
use nsvd_core::scene::{generate_scene, load_scenes, write_scenes, SceneGenConfig};
use nsvd_core::templates::TemplateSet;
use nsvd_core::{parse_program, AttributeSchema, Function, Scene};
use rayon::prelude::*;
use serde::Serialize;

pub use manifest::{sha256_file, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GENERATION: i32 = 3;
pub const EXIT_EXECUTION: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn config(m: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, m)
    }

    fn io(m: impl Into<String>) -> Self {
        Self::new(EXIT_IO, m)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "nsvd",
    version,
    about = "Symbolic visual dialog over scene graphs"
)]
pub struct Cli {
    /// Attribute schema JSON (defaults to the CLEVR vocabulary).
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Template set JSON (defaults to the built-in English set).
    #[arg(long, global = true)]
    templates: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate random scenes.
    GenScenes(GenScenes),
    /// Generate annotated dialogs over a scene file.
    GenDialogs(GenDialogs),
    /// Split the question functions into two halves per category.
    SplitFunctions(SplitFunctions),
    /// Execute programs on one scene and trace the knowledge base.
    Exec(Exec),
    /// Score a model on a dialog dataset.
    Evaluate(Evaluate),
    /// Interactive caption/question loop on one scene.
    Repl(Repl),
}

#[derive(Args, Debug)]
struct GenScenes {
    #[arg(long)]
    count: usize,
    /// Object count range, e.g. `3..10` (inclusive) or `6`.
    #[arg(long, default_value = "3..10")]
    objects: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict a dimension, e.g. `colour=grey,red,blue`. Repeatable.
    #[arg(long)]
    restrict: Vec<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct GenDialogs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long, default_value_t = 5)]
    per_scene: usize,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON list of function names to sample from.
    #[arg(long)]
    functions: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SplitFunctions {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_a: PathBuf,
    #[arg(long)]
    out_b: PathBuf,
}

#[derive(Args, Debug)]
struct Exec {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    scene_id: u64,
    #[arg(long)]
    caption: Option<String>,
    /// Question programs, executed in order. Repeatable.
    #[arg(long)]
    program: Vec<String>,
}

#[derive(Args, Debug)]
struct Evaluate {
    #[arg(long)]
    dialogs: PathBuf,
    #[arg(long)]
    scenes: PathBuf,
    /// `symbolic`, `oracle` or `stub:FILE`.
    #[arg(long, default_value = "symbolic")]
    model: String,
    /// `gt` or `pred`.
    #[arg(long, default_value = "gt")]
    scheme: String,
    /// `all` or a number of earlier rounds.
    #[arg(long, default_value = "all")]
    window: String,
    /// Comma-separated windows; runs both schemes for each.
    #[arg(long)]
    sweep_windows: Option<String>,
    #[arg(long, default_value = "none,1,2,3,4+,all")]
    coref_bins: String,
    /// Share of dialogs replayed as a corruption check after loading.
    #[arg(long, default_value_t = DEFAULT_REPLAY_FRACTION)]
    replay_fraction: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct Repl {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    scene_id: u64,
}

/// Caps the global thread pool from `NSVD_THREADS`.
pub fn init_threads() -> CliResult {
    if let Ok(v) = std::env::var("NSVD_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::config(format!("NSVD_THREADS must be a number, got `{v}`")))?;
        // A second call (e.g. from tests) fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses `argv` and runs the command, writing user-facing text to `out`.
pub fn run(argv: &[String], out: &mut dyn Write) -> CliResult {
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        CliError::new(code, e.to_string())
    })?;
    init_threads()?;
    let schema = match &cli.schema {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => AttributeSchema::clevr(),
    };
    let ctx = Context {
        argv,
        cli: &cli,
        out,
    };
    match &cli.command {
        Command::GenScenes(c) => gen_scenes(ctx, c, &schema),
        Command::GenDialogs(c) => gen_dialogs(ctx, c, &schema),
        Command::SplitFunctions(c) => split_functions(ctx, c),
        Command::Exec(c) => exec(ctx, c, &schema),
        Command::Evaluate(c) => evaluate_cmd(ctx, c),
        Command::Repl(c) => {
            let scenes = read_scenes(&c.scenes, &schema)?;
            let scene = find_scene(&scenes, c.scene_id)?;
            let templates = load_templates(&cli, &schema)?;
            let stdin = std::io::stdin();
            repl::run_repl(scene, &templates, stdin.lock(), ctx.out)
                .map_err(|e| CliError::io(e.to_string()))
        }
    }
}

struct Context<'a> {
    argv: &'a [String],
    cli: &'a Cli,
    out: &'a mut dyn Write,
}

impl Context<'_> {
    fn say(&mut self, line: impl AsRef<str>) -> CliResult {
        writeln!(self.out, "{}", line.as_ref()).map_err(|e| CliError::io(e.to_string()))
    }

    fn manifest(
        &self,
        seeds: Vec<u64>,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> CliResult<Manifest> {
        Manifest::new(self.argv, seeds, inputs, outputs).map_err(|e| CliError::io(e.to_string()))
    }
}

fn load_templates(cli: &Cli, schema: &AttributeSchema) -> CliResult<TemplateSet> {
    match &cli.templates {
        Some(p) => TemplateSet::load(p, schema).map_err(|e| CliError::config(e.to_string())),
        None => Ok(TemplateSet::default_for(schema)),
    }
}

fn read_scenes(path: &Path, schema: &AttributeSchema) -> CliResult<Vec<Scene>> {
    load_scenes(path, schema).map_err(|e| match e {
        nsvd_core::scene::SceneError::Io(m) => CliError::io(m),
        other => CliError::config(format!("{}: {other}", path.display())),
    })
}

fn find_scene(scenes: &[Scene], id: u64) -> CliResult<&Scene> {
    scenes
        .iter()
        .find(|s| s.scene_id == id)
        .ok_or_else(|| CliError::config(format!("no scene with id {id}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn parse_range(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::config(format!("bad object range `{s}` (expected MIN..MAX)"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn gen_scenes(mut ctx: Context<'_>, c: &GenScenes, schema: &AttributeSchema) -> CliResult {
    if c.count == 0 {
        return Err(CliError::config("--count must be at least 1"));
    }
    let (lo, hi) = parse_range(&c.objects)?;
    let mut restrictions = Vec::new();
    for r in &c.restrict {
        let (dim, values) = r.split_once('=').ok_or_else(|| {
            CliError::config(format!("bad --restrict `{r}` (expected dim=v1,v2)"))
        })?;
        restrictions.push((
            dim.to_string(),
            values
                .split(',')
                .map(str::trim)
                .map(String::from)
                .collect::<Vec<_>>(),
        ));
    }
    let scenes: Vec<Scene> = (0..c.count)
        .into_par_iter()
        .map(|i| {
            let scene_seed = c.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let n = lo + (scene_seed % (hi - lo + 1) as u64) as usize;
            let mut cfg = SceneGenConfig::new(schema, n);
            for (dim, values) in &restrictions {
                let vs: Vec<&str> = values.iter().map(String::as_str).collect();
                cfg = cfg
                    .restrict(schema, dim, &vs)
                    .map_err(|e| CliError::config(e.to_string()))?;
            }
            generate_scene(schema, &cfg, i as u64, scene_seed)
                .map_err(|e| CliError::new(EXIT_GENERATION, format!("scene {i}: {e}")))
        })
        .collect::<CliResult<_>>()?;
    write_scenes(&c.output, &scenes, schema).map_err(|e| CliError::io(e.to_string()))?;
    ctx.manifest(vec![c.seed], &[], &[&c.output])?
        .write_beside(&c.output)
        .map_err(|e| CliError::io(e.to_string()))?;
    ctx.say(format!(
        "wrote {} scenes to {}",
        scenes.len(),
        c.output.display()
    ))
}

fn gen_dialogs(mut ctx: Context<'_>, c: &GenDialogs, schema: &AttributeSchema) -> CliResult {
    if c.rounds == 0 || c.per_scene == 0 {
        return Err(CliError::config(
            "--rounds and --per-scene must be at least 1",
        ));
    }
    let scenes = read_scenes(&c.scenes, schema)?;
    let templates = load_templates(ctx.cli, schema)?;
    let mut config = GenConfig::new(c.rounds);
    let mut inputs: Vec<&Path> = vec![&c.scenes];
    if let Some(path) = &c.functions {
        config = config.with_functions(read_function_list(path)?);
        inputs.push(path);
    }
    let dialogs = generate_dataset(&scenes, &templates, &config, c.per_scene, c.seed)
        .map_err(|e| CliError::new(EXIT_GENERATION, e.to_string()))?;
    let n = dialogs.len();
    write_dataset(&c.output, &Dataset::new(schema.clone(), dialogs))
        .map_err(|e| CliError::io(e.to_string()))?;
    ctx.manifest(vec![c.seed], &inputs, &[&c.output])?
        .write_beside(&c.output)
        .map_err(|e| CliError::io(e.to_string()))?;
    ctx.say(format!("wrote {n} dialogs to {}", c.output.display()))
}

fn read_function_list(path: &Path) -> CliResult<BTreeSet<Function>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    names
        .iter()
        .map(|n| {
            Function::from_name(n)
                .ok_or_else(|| CliError::config(format!("unknown function `{n}`")))
        })
        .collect()
}

fn split_functions(mut ctx: Context<'_>, c: &SplitFunctions) -> CliResult {
    let (a, b) = split_question_types(c.seed);
    for (path, fs) in [(&c.out_a, &a), (&c.out_b, &b)] {
        let names: Vec<&str> = fs.iter().map(|f| f.name()).collect();
        write_json(path, &names)?;
    }
    ctx.manifest(vec![c.seed], &[], &[&c.out_a, &c.out_b])?
        .write_beside(&c.out_a)
        .map_err(|e| CliError::io(e.to_string()))?;
    ctx.say(format!(
        "split {} + {} question functions",
        a.len(),
        b.len()
    ))
}

fn exec(mut ctx: Context<'_>, c: &Exec, schema: &AttributeSchema) -> CliResult {
    let scenes = read_scenes(&c.scenes, schema)?;
    let scene = find_scene(&scenes, c.scene_id)?;
    let ex = Executor::new(schema);
    let mut kb = ex.init_kb(scene);
    let fail = |text: &str, name: &str, e: &dyn std::fmt::Display| {
        CliError::new(EXIT_EXECUTION, format!("{name} in `{text}`: {e}"))
    };
    if let Some(text) = &c.caption {
        let p = parse_program(text, schema).map_err(|e| fail(text, e.kind_name(), &e))?;
        let outcome = ex
            .execute_caption(&mut kb, &p)
            .map_err(|e| fail(text, e.kind_name(), &e))?;
        ctx.say(format!(
            "caption {}{}",
            p,
            if outcome.ambiguous {
                " (ambiguous)"
            } else {
                ""
            }
        ))?;
        ctx.say(describe_kb(&kb, schema).trim_end())?;
    }
    for text in &c.program {
        let p = parse_program(text, schema).map_err(|e| fail(text, e.kind_name(), &e))?;
        kb.advance_round();
        let answer = ex
            .execute_question(&mut kb, &p)
            .map_err(|e| fail(text, e.kind_name(), &e))?;
        ctx.say(format!("{p} -> {}", answer.render(schema)))?;
        ctx.say(describe_kb(&kb, schema).trim_end())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunInfo<'a> {
    dataset: String,
    dataset_sha256: String,
    model: &'a str,
    coref_bins: &'a str,
}

#[derive(Serialize)]
struct SingleReport<'a, R: Serialize> {
    run: RunInfo<'a>,
    scheme: Scheme,
    window: Window,
    report: R,
}

#[derive(Serialize)]
struct SweepReport<'a, R: Serialize> {
    run: RunInfo<'a>,
    cells: R,
}

fn evaluate_cmd(mut ctx: Context<'_>, c: &Evaluate) -> CliResult {
    let dataset = read_dataset(&c.dialogs).map_err(|e| match e {
        nsvd_core::dialoggen::DatasetError::Io(m) => CliError::io(m),
        other => CliError::config(other.to_string()),
    })?;
    let schema = &dataset.schema;
    let scenes = read_scenes(&c.scenes, schema)?;
    verify_replay(&dataset, &scenes, c.replay_fraction, 0)
        .map_err(|e| CliError::new(EXIT_EXECUTION, e.to_string()))?;
    let bins: Vec<CorefBin> = c
        .coref_bins
        .split(',')
        .map(|s| s.trim().parse().map_err(CliError::config))
        .collect::<CliResult<_>>()?;
    let model: Box<dyn DialogModel> = match c.model.as_str() {
        "symbolic" => Box::new(SymbolicModel::new(load_templates(ctx.cli, schema)?)),
        "oracle" => Box::new(StubModel::oracle(&dataset.dialogs)),
        other => match other.strip_prefix("stub:") {
            Some(path) => {
                Box::new(StubModel::load(Path::new(path)).map_err(|e| CliError::io(e.to_string()))?)
            }
            None => return Err(CliError::config(format!("unknown model `{other}`"))),
        },
    };
    let mut inputs: Vec<&Path> = vec![&c.dialogs, &c.scenes];
    if let Some(path) = c.model.strip_prefix("stub:") {
        inputs.push(Path::new(path));
    }
    let run = RunInfo {
        dataset: c.dialogs.display().to_string(),
        dataset_sha256: sha256_file(&c.dialogs).map_err(|e| CliError::io(e.to_string()))?,
        model: &c.model,
        coref_bins: &c.coref_bins,
    };
    let eval_err = |e: nsvd_core::eval::EvalError| CliError::new(EXIT_EXECUTION, e.to_string());
    let csv_path = c.output.with_extension("csv");
    if let Some(list) = &c.sweep_windows {
        let windows: Vec<Window> = list
            .split(',')
            .map(|s| s.trim().parse().map_err(CliError::config))
            .collect::<CliResult<_>>()?;
        let cells = sweep_history_window(
            &dataset.dialogs,
            &scenes,
            model.as_ref(),
            &windows,
            &[Scheme::GtHistory, Scheme::PredHistory],
            &bins,
        )
        .map_err(eval_err)?;
        for cell in &cells {
            ctx.say(format!(
                "window={} scheme={} accuracy={:.4} nffr={:.4}",
                cell.window, cell.scheme, cell.report.overall_accuracy, cell.report.nffr
            ))?;
        }
        write_json(&c.output, &SweepReport { run, cells })?;
        ctx.manifest(vec![], &inputs, &[&c.output])?
            .write_beside(&c.output)
            .map_err(|e| CliError::io(e.to_string()))?;
        return Ok(());
    }
    let config = EvaluationConfig {
        scheme: c.scheme.parse().map_err(CliError::config)?,
        window: c.window.parse().map_err(CliError::config)?,
        coref_bins: bins,
    };
    let result = evaluate(&dataset.dialogs, &scenes, model.as_ref(), &config).map_err(eval_err)?;
    let file = std::fs::File::create(&csv_path)
        .map_err(|e| CliError::io(format!("{}: {e}", csv_path.display())))?;
    write_rounds_csv(file, &result.rounds).map_err(|e| CliError::io(e.to_string()))?;
    ctx.say(format!(
        "accuracy={:.4} nffr={:.4} ({} dialogs, {} rounds, {} model errors)",
        result.report.overall_accuracy,
        result.report.nffr,
        result.report.dialogs,
        result.report.overall.count,
        result.report.model_errors
    ))?;
    write_json(
        &c.output,
        &SingleReport {
            run,
            scheme: config.scheme,
            window: config.window,
            report: &result.report,
        },
    )?;
    ctx.manifest(vec![], &inputs, &[&c.output, &csv_path])?
        .write_beside(&c.output)
        .map(|_| ())
        .map_err(|e| CliError::io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_ranges() {
        assert_eq!(parse_range("3..10").unwrap(), (3, 10));
        assert_eq!(parse_range("20").unwrap(), (20, 20));
        assert!(parse_range("10..3").is_err());
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("a..b").is_err());
    }
}
