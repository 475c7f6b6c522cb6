use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use bntsp_core::dataset::{self, DiscreteTable, Schema, VariableKind};
use bntsp_core::hdtsp::{
    self, exact_dp_ordering, kopt_local_search, nearest_neighbor, static_cost_matrix, CostOracle,
    KoptLevel, KoptParams, Ordering,
};
use bntsp_core::inference::{evaluate_task, fit_cpts, log_likelihood, EvalReport};
use bntsp_core::scoring::{graph_score, Scorer};
use bntsp_core::structure::{export_dag, learn_structure, DagFormat, Network};
use bntsp_core::Error as CoreError;

use crate::config::{RunConfig, Solver};
use crate::error::{CliError, Result};

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const INGEST_SUMMARY_FILE: &str = "ingest_summary.txt";
pub const ORDERING_FILE: &str = "ordering.txt";
pub const NETWORK_FILE: &str = "network.toml";
pub const DOT_FILE: &str = "network.dot";
pub const LEARN_REPORT_FILE: &str = "learn_report.txt";
pub const METRICS_FILE: &str = "metrics.txt";
pub const ATSP_FILE: &str = "problem.atsp";
pub const LKH_PAR_FILE: &str = "lkh.par";
pub const LKH_TOUR_FILE: &str = "lkh.tour";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            cfg.output_dir.display()
        ))
    })
}

fn load_schema(cfg: &RunConfig) -> Result<Schema> {
    Schema::from_file(&cfg.schema).map_err(CliError::config)
}

fn load_split(cfg: &RunConfig, schema: &Schema, file: &str) -> Result<DiscreteTable> {
    let path = cfg.output_dir.join(file);
    if !path.exists() {
        return Err(CliError::Data(format!(
            "{} not found; run `ingest` first",
            path.display()
        )));
    }
    DiscreteTable::read_csv(&path, &schema.names(), &schema.cardinalities()).map_err(CliError::data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestSummary {
    pub raw_rows: usize,
    pub complete_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub variables: Vec<(String, usize)>,
    pub bin_edges: Vec<(String, Vec<f64>)>,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "raw_rows = {}", self.raw_rows)?;
        writeln!(f, "complete_rows = {}", self.complete_rows)?;
        writeln!(f, "train_rows = {}", self.train_rows)?;
        writeln!(f, "test_rows = {}", self.test_rows)?;
        writeln!(f, "[cardinalities]")?;
        for (name, r) in &self.variables {
            writeln!(f, "{name} = {r}")?;
        }
        if !self.bin_edges.is_empty() {
            writeln!(f, "[bin_edges]")?;
            for (name, edges) in &self.bin_edges {
                writeln!(f, "{name} = {edges:?}")?;
            }
        }
        Ok(())
    }
}

/// Loads the raw CSV, drops incomplete rows, discretises and splits, writing
/// `train.csv`, `test.csv` and a summary into the output directory.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let schema = load_schema(cfg)?;
    ensure_output_dir(cfg)?;
    let raw = dataset::load_csv(&cfg.data, &schema).map_err(CliError::data)?;
    let raw_rows = raw.len();
    let complete = dataset::drop_missing(raw);
    let edges = dataset::resolved_edges(&complete, &schema);
    let mut summary = IngestSummary {
        raw_rows,
        complete_rows: complete.len(),
        train_rows: 0,
        test_rows: 0,
        variables: schema.names().into_iter().zip(schema.cardinalities()).collect(),
        bin_edges: schema
            .variables
            .iter()
            .zip(edges)
            .filter(|(v, _)| v.kind == VariableKind::Continuous)
            .map(|(v, e)| (v.name.clone(), e))
            .collect(),
    };
    let summary_path = cfg.output_dir.join(INGEST_SUMMARY_FILE);
    if complete.is_empty() {
        write_file(&summary_path, &summary.to_string())?;
        return Err(CliError::Data(format!(
            "{} contains no complete rows ({raw_rows} rows read)",
            cfg.data.display()
        )));
    }
    let table = dataset::discretize(&complete, &schema).map_err(CliError::data)?;
    let (train, test) = dataset::split(&table, &cfg.split).map_err(CliError::data)?;
    summary.train_rows = train.n_rows();
    summary.test_rows = test.n_rows();
    train
        .write_csv(&cfg.output_dir.join(TRAIN_FILE))
        .map_err(CliError::data)?;
    test.write_csv(&cfg.output_dir.join(TEST_FILE))
        .map_err(CliError::data)?;
    write_file(&summary_path, &summary.to_string())?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnReport {
    pub solver: Solver,
    pub ordering: Vec<String>,
    pub tour_cost: f64,
    pub graph_score: f64,
    pub edges: usize,
    pub wall_seconds: f64,
}

impl fmt::Display for LearnReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "solver = {}", self.solver)?;
        writeln!(f, "ordering = {}", self.ordering.join(" "))?;
        writeln!(f, "tour_cost = {}", self.tour_cost)?;
        writeln!(f, "graph_score = {}", self.graph_score)?;
        writeln!(f, "edges = {}", self.edges)?;
        writeln!(f, "wall_seconds = {:.3}", self.wall_seconds)
    }
}

fn core_solver_error(e: CoreError) -> CliError {
    match e {
        CoreError::TooManyVariables { .. } | CoreError::SubsetBudget { .. } => CliError::config(e),
        other => CliError::solver(other),
    }
}

fn build_oracle<'a>(cfg: &RunConfig, train: &'a DiscreteTable) -> Result<CostOracle<'a>> {
    Ok(
        CostOracle::new(Scorer::new(train, cfg.metric), cfg.max_in_degree, cfg.oracle)
            .map_err(core_solver_error)?
            .with_paper_phi_convention(cfg.paper_phi_convention),
    )
}

fn run_lkh(cfg: &RunConfig, oracle: &CostOracle<'_>) -> Result<Ordering> {
    let binary = cfg
        .lkh_path
        .as_ref()
        .ok_or_else(|| CliError::Config("lkh_path is not set".into()))?;
    let matrix = static_cost_matrix(oracle).map_err(CliError::solver)?;
    hdtsp::export_tsplib(&matrix, &cfg.output_dir.join(ATSP_FILE), "bntsp").map_err(CliError::data)?;
    let tour_path = cfg.output_dir.join(LKH_TOUR_FILE);
    let _ = fs::remove_file(&tour_path);
    let par = format!(
        "PROBLEM_FILE = {ATSP_FILE}\nTOUR_FILE = {LKH_TOUR_FILE}\nRUNS = {}\nSEED = {}\n",
        cfg.lkh_runs.max(1),
        cfg.seed
    );
    write_file(&cfg.output_dir.join(LKH_PAR_FILE), &par)?;
    let output = Command::new(binary)
        .arg(LKH_PAR_FILE)
        .current_dir(&cfg.output_dir)
        .output()
        .map_err(|e| CliError::Solver(format!("cannot run {}: {e}", binary.display())))?;
    if !output.status.success() {
        return Err(CliError::Solver(format!(
            "{} exited with {}: {}",
            binary.display(),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    hdtsp::import_tour(&tour_path, oracle.n()).map_err(CliError::solver)
}

/// Finds an ordering with the configured solver, learns the network under
/// it and writes the ordering, network (TOML and DOT) and a report.
pub fn cmd_learn(cfg: &RunConfig) -> Result<LearnReport> {
    let schema = load_schema(cfg)?;
    let train = load_split(cfg, &schema, TRAIN_FILE)?;
    let start = Instant::now();
    let oracle = build_oracle(cfg, &train)?;
    let n = train.n_vars();

    let ordering = match cfg.solver {
        Solver::Dp => exact_dp_ordering(&oracle, n).map_err(core_solver_error)?.0,
        Solver::Kopt2 | Solver::Kopt3 => {
            let matrix = static_cost_matrix(&oracle).map_err(core_solver_error)?;
            let params = KoptParams {
                level: if cfg.solver == Solver::Kopt2 {
                    KoptLevel::Two
                } else {
                    KoptLevel::Three
                },
                restarts: cfg.restarts,
                seed: cfg.seed,
                max_no_improve: cfg.max_no_improve,
            };
            kopt_local_search(&nearest_neighbor(&matrix), &oracle, &params)
                .map_err(core_solver_error)?
                .ordering
        }
        Solver::LkhExternal => run_lkh(cfg, &oracle)?,
    };
    let tour_cost = oracle.tour_cost(&ordering).map_err(CliError::solver)?;
    let dag = learn_structure(oracle.scorer(), &ordering, cfg.max_in_degree).map_err(CliError::solver)?;
    let score = graph_score(oracle.scorer(), &dag, cfg.max_in_degree).map_err(CliError::solver)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let names = schema.names();
    let network = Network {
        dag,
        names: names.clone(),
        cardinalities: schema.cardinalities(),
        metric: cfg.metric,
        max_in_degree: cfg.max_in_degree,
        score,
    };
    let ordered: Vec<String> = ordering.as_slice().iter().map(|&v| names[v].clone()).collect();
    let mut ordering_text = String::new();
    for name in &ordered {
        let _ = writeln!(ordering_text, "{name}");
    }
    write_file(&cfg.output_dir.join(ORDERING_FILE), &ordering_text)?;
    export_dag(&network, DagFormat::Text, &cfg.output_dir.join(NETWORK_FILE)).map_err(CliError::data)?;
    export_dag(&network, DagFormat::Dot, &cfg.output_dir.join(DOT_FILE)).map_err(CliError::data)?;

    let report = LearnReport {
        solver: cfg.solver,
        ordering: ordered,
        tour_cost,
        graph_score: score,
        edges: network.dag.edges().len(),
        wall_seconds,
    };
    write_file(&cfg.output_dir.join(LEARN_REPORT_FILE), &report.to_string())?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskReport {
    pub name: String,
    pub target: String,
    pub evidence: Vec<String>,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationSummary {
    pub network_score: f64,
    pub test_log_likelihood: f64,
    pub tasks: Vec<TaskReport>,
}

impl fmt::Display for EvaluationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "network_score = {}", self.network_score)?;
        writeln!(f, "test_log_likelihood = {}", self.test_log_likelihood)?;
        for task in &self.tasks {
            writeln!(f, "\n[{}]", task.name)?;
            writeln!(f, "target = {}", task.target)?;
            writeln!(f, "evidence = {}", task.evidence.join(", "))?;
            writeln!(f, "{}", task.report)?;
        }
        Ok(())
    }
}

fn index_of(names: &[String], name: &str, task: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| CliError::Config(format!("task `{task}` references unknown variable `{name}`")))
}

/// Fits CPTs on the training split and runs every configured task on the
/// test split.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluationSummary> {
    let schema = load_schema(cfg)?;
    let network_path = cfg.output_dir.join(NETWORK_FILE);
    if !network_path.exists() {
        return Err(CliError::Data(format!(
            "{} not found; run `learn` first",
            network_path.display()
        )));
    }
    let network = Network::load(&network_path).map_err(CliError::data)?;
    let names = schema.names();
    if network.names != names || network.cardinalities != schema.cardinalities() {
        return Err(CliError::Data("network does not match the schema".into()));
    }
    let train = load_split(cfg, &schema, TRAIN_FILE)?;
    let test = load_split(cfg, &schema, TEST_FILE)?;
    let cpts = fit_cpts(&train, &network.dag, cfg.alpha).map_err(CliError::data)?;

    let tasks = cfg
        .tasks
        .iter()
        .map(|task| {
            let target = index_of(&names, &task.target, &task.name)?;
            let evidence = task
                .evidence
                .iter()
                .map(|e| index_of(&names, e, &task.name))
                .collect::<Result<Vec<_>>>()?;
            let report = evaluate_task(&cpts, &network.dag, &test, target, &evidence, task.threshold)
                .map_err(CliError::data)?;
            Ok(TaskReport {
                name: task.name.clone(),
                target: task.target.clone(),
                evidence: task.evidence.clone(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = EvaluationSummary {
        network_score: network.score,
        test_log_likelihood: log_likelihood(&cpts, &network.dag, &test),
        tasks,
    };
    write_file(&cfg.output_dir.join(METRICS_FILE), &summary.to_string())?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Text,
    Tsplib,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "text" => Ok(ExportFormat::Text),
            "tsplib" => Ok(ExportFormat::Tsplib),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

/// Re-renders the learned network, or writes the history-free ATSP instance
/// of the training data for an external solver.
pub fn cmd_export(cfg: &RunConfig, format: ExportFormat) -> Result<PathBuf> {
    ensure_output_dir(cfg)?;
    match format {
        ExportFormat::Dot | ExportFormat::Text => {
            let network = Network::load(&cfg.output_dir.join(NETWORK_FILE)).map_err(CliError::data)?;
            let (file, fmt) = if format == ExportFormat::Dot {
                (DOT_FILE, DagFormat::Dot)
            } else {
                (NETWORK_FILE, DagFormat::Text)
            };
            let path = cfg.output_dir.join(file);
            export_dag(&network, fmt, &path).map_err(CliError::data)?;
            Ok(path)
        }
        ExportFormat::Tsplib => {
            let schema = load_schema(cfg)?;
            let train = load_split(cfg, &schema, TRAIN_FILE)?;
            let oracle = build_oracle(cfg, &train)?;
            let matrix = static_cost_matrix(&oracle).map_err(core_solver_error)?;
            let path = cfg.output_dir.join(ATSP_FILE);
            hdtsp::export_tsplib(&matrix, &path, "bntsp").map_err(CliError::data)?;
            Ok(path)
        }
    }
}
