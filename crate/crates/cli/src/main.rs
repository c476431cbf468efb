//! Batch convergence studies for the circular interface problem.
//!
//! Every flag can also be given in a `key = value` file passed with
//! `--config`; keys are the long flag names without dashes, `#` starts a
//! comment, and flags given on the command line win over the file.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use ifwg_core::analysis::ConvergenceReport;
use ifwg_core::exact::CosineInterfaceSolution;
use ifwg_core::geometry::LevelSetInterface;
use ifwg_core::ife::{ConstraintGeometry, StabilizerForm, WeakGradientForm};
use ifwg_core::solver::SolverConfig;
use ifwg_core::study::{run_level, StudyConfig};

const KEYS: &[&str] = &[
    "k",
    "levels",
    "coeffs",
    "depth",
    "quad-offset",
    "solver",
    "cg-tol",
    "out",
    "dump-mesh",
    "dump-matrix",
    "base-intervals",
    "constraint",
    "gradient",
    "stabilizer",
];

#[derive(Parser, Debug)]
#[command(name = "ifwg", version, about = "Immersed weak Galerkin convergence studies on x² + y² = 1/3")]
struct Cli {
    /// key = value file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Polynomial degree(s), comma separated: 1, 2 or 1,2 [default: 1]
    #[arg(long)]
    k: Option<String>,
    /// Level range A..B; level L uses 2^(L+1) intervals per side [default: 1..5]
    #[arg(long)]
    levels: Option<String>,
    /// Coefficient pairs A1,A2 separated by ';' [default: 1,1;1,10;1,100;1,1000]
    #[arg(long)]
    coeffs: Option<String>,
    /// Subdivision depth of the curved sub-regions [default: 6]
    #[arg(long)]
    depth: Option<String>,
    /// Extra degree added to every quadrature rule [default: 0]
    #[arg(long)]
    quad_offset: Option<String>,
    /// Linear solver: cholesky or cg [default: cholesky]
    #[arg(long)]
    solver: Option<String>,
    /// Relative residual target for cg [default: 1e-12]
    #[arg(long)]
    cg_tol: Option<String>,
    /// Output directory [default: results]
    #[arg(long)]
    out: Option<String>,
    /// Write the mesh of every level
    #[arg(long)]
    dump_mesh: bool,
    /// Write the reduced matrix of every run in coordinate format
    #[arg(long)]
    dump_matrix: bool,
    /// Intervals per side at level 1, doubled per level (overrides 2^(L+1))
    #[arg(long)]
    base_intervals: Option<String>,
    /// Where the jump conditions are imposed: arc or chord [default: arc]
    #[arg(long)]
    constraint: Option<String>,
    /// Weak gradient inner product: plain or weighted [default: weighted]
    #[arg(long)]
    gradient: Option<String>,
    /// Stabilizer inner product: plain or weighted [default: weighted]
    #[arg(long)]
    stabilizer: Option<String>,
}

#[derive(Debug)]
struct RunConfig {
    ks: Vec<usize>,
    pairs: Vec<(f64, f64)>,
    template: StudyConfig,
    depth: Option<usize>,
    out: PathBuf,
    dump_mesh: bool,
    dump_matrix: bool,
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), n + 1);
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            bail!("{}:{}: unknown key '{key}'", path.display(), n + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn merged_settings(cli: &Cli) -> Result<BTreeMap<String, String>> {
    let mut map = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("k", &cli.k),
        ("levels", &cli.levels),
        ("coeffs", &cli.coeffs),
        ("depth", &cli.depth),
        ("quad-offset", &cli.quad_offset),
        ("solver", &cli.solver),
        ("cg-tol", &cli.cg_tol),
        ("out", &cli.out),
        ("base-intervals", &cli.base_intervals),
        ("constraint", &cli.constraint),
        ("gradient", &cli.gradient),
        ("stabilizer", &cli.stabilizer),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            map.insert(key.to_string(), v.clone());
        }
    }
    if cli.dump_mesh {
        map.insert("dump-mesh".into(), "true".into());
    }
    if cli.dump_matrix {
        map.insert("dump-matrix".into(), "true".into());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{key}: cannot parse '{value}'"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("{key}: expected true or false, got '{value}'"),
    }
}

fn parse_levels(value: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let (a, b) = match value.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (value, value),
    };
    Ok(parse_num("levels", a)?..=parse_num("levels", b)?)
}

fn parse_pairs(value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let Some((a1, a2)) = pair.split_once(',') else {
                bail!("coeffs: expected A1,A2, got '{pair}'");
            };
            Ok((parse_num("coeffs", a1)?, parse_num("coeffs", a2)?))
        })
        .collect()
}

fn build_config(map: &BTreeMap<String, String>) -> Result<RunConfig> {
    let get = |key: &str| map.get(key).map(String::as_str);
    let ks = match get("k") {
        Some(v) => v.split(',').map(|s| parse_num("k", s)).collect::<Result<Vec<usize>>>()?,
        None => vec![1],
    };
    let pairs = parse_pairs(get("coeffs").unwrap_or("1,1;1,10;1,100;1,1000"))?;
    if ks.is_empty() || pairs.is_empty() {
        bail!("at least one k and one coefficient pair are required");
    }

    let mut template = StudyConfig::new(1, 1.0, 1.0)?;
    if let Some(v) = get("levels") {
        template.levels = parse_levels(v)?;
    }
    if let Some(v) = get("quad-offset") {
        template.quad_offset = parse_num("quad-offset", v)?;
    }
    let mut solver = SolverConfig::default();
    match get("solver") {
        None | Some("cholesky") => {}
        Some("cg") => solver = SolverConfig::cg(),
        Some(other) => bail!("solver: expected cholesky or cg, got '{other}'"),
    }
    if let Some(v) = get("cg-tol") {
        solver.cg_tol = parse_num("cg-tol", v)?;
    }
    template.solver = solver;
    if let Some(v) = get("base-intervals") {
        template.base_intervals = Some(parse_num("base-intervals", v)?);
    }
    template.constraint = match get("constraint") {
        None | Some("arc") => ConstraintGeometry::Arc,
        Some("chord") => ConstraintGeometry::Chord,
        Some(other) => bail!("constraint: expected arc or chord, got '{other}'"),
    };
    template.gradient_form = match get("gradient") {
        None | Some("weighted") => WeakGradientForm::Weighted,
        Some("plain") => WeakGradientForm::Plain,
        Some(other) => bail!("gradient: expected plain or weighted, got '{other}'"),
    };
    template.stabilizer_form = match get("stabilizer") {
        None | Some("weighted") => StabilizerForm::Weighted,
        Some("plain") => StabilizerForm::Plain,
        Some(other) => bail!("stabilizer: expected plain or weighted, got '{other}'"),
    };

    Ok(RunConfig {
        ks,
        pairs,
        template,
        depth: get("depth").map(|v| parse_num("depth", v)).transpose()?,
        out: PathBuf::from(get("out").unwrap_or("results")),
        dump_mesh: get("dump-mesh").map(|v| parse_bool("dump-mesh", v)).transpose()?.unwrap_or(false),
        dump_matrix: get("dump-matrix").map(|v| parse_bool("dump-matrix", v)).transpose()?.unwrap_or(false),
    })
}

fn study_config(run: &RunConfig, k: usize, (a1, a2): (f64, f64)) -> Result<StudyConfig> {
    let mut c = StudyConfig::new(k, a1, a2)?;
    let t = &run.template;
    c.levels = t.levels.clone();
    c.quad_offset = t.quad_offset;
    c.constraint = t.constraint;
    c.gradient_form = t.gradient_form;
    c.stabilizer_form = t.stabilizer_form;
    c.solver = t.solver;
    c.base_intervals = t.base_intervals;
    if let Some(d) = run.depth {
        c.depth = d;
    }
    c.validate()?;
    Ok(c)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn run_one(run: &RunConfig, config: &StudyConfig) -> Result<ConvergenceReport> {
    let circle = LevelSetInterface::reference_circle();
    let exact = CosineInterfaceSolution::new(config.coeffs);
    let stem = format!("k{}_a1_{}_a2_{}", config.k, config.coeffs.a1, config.coeffs.a2);
    let mut rows = Vec::new();
    for level in config.levels.clone() {
        let (row, solved) = run_level(config, level, Some(&circle), &exact)
            .with_context(|| format!("k = {}, (A1, A2) = ({}, {}), level {level}", config.k, config.coeffs.a1, config.coeffs.a2))?;
        if run.dump_mesh {
            let path = run.out.join(format!("mesh_n{}.txt", row.intervals));
            if !path.exists() {
                solved.disc.mesh.write_dump(create(&path)?)?;
            }
        }
        if run.dump_matrix {
            let path = run.out.join(format!("{stem}_level{level}_matrix.mtx"));
            solved.system.write_matrix(create(&path)?)?;
        }
        rows.push(row);
    }
    let report = ConvergenceReport {
        k: config.k,
        a1: config.coeffs.a1,
        a2: config.coeffs.a2,
        depth: config.depth,
        quad_offset: config.quad_offset,
        rows,
    };
    report.write_csv(create(&run.out.join(format!("{stem}.csv")))?)?;
    report.write_plot_data(create(&run.out.join(format!("{stem}.dat")))?)?;
    Ok(report)
}

fn run(cli: Cli) -> Result<()> {
    let run = build_config(&merged_settings(&cli)?)?;
    let configs = run
        .ks
        .iter()
        .flat_map(|&k| run.pairs.iter().map(move |&p| (k, p)))
        .map(|(k, p)| study_config(&run, k, p))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    for config in &configs {
        let report = run_one(&run, config)?;
        println!("{}", report.summary());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
