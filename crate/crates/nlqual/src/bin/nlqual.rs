use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::Digest;

use nlqual::error::NlqualError;
use nlqual::kkt;
use nlqual::model::{parse_problem, NormKind, ProblemSpec};
use nlqual::penalty;
use nlqual::proxsolve::{self, SolverConfig};
use nlqual::qualify::{self, Condition, QualOptions};
use nlqual::rational::{parse_rat, Rat};
use nlqual::subdiff;

#[derive(Parser)]
#[command(name = "nlqual", version, about = "qualification conditions, KKT certificates, and exact penalties for non-Lipschitz programs")]
struct Cli {
    /// RNG seed shared by all sampling stages
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// write the JSON report to this path instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// print the full JSON report on stdout (default prints a summary)
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// print the subdifferential bundle of the composite term at a point
    Subdiff(SubdiffArgs),
    /// run qualification-condition checks at a point
    Check(CheckArgs),
    /// verify supplied KKT multipliers or search for them
    Kkt(KktArgs),
    /// build a penalty problem and search/validate the exactness threshold
    Penalize(PenalizeArgs),
    /// minimize a penalized problem by proximal gradient
    Solve(SolveArgs),
    /// full suite: subdiff + checks + KKT (+ optional penalty validation)
    Report(ReportArgs),
}

#[derive(Args)]
struct SubdiffArgs {
    problem: PathBuf,
    /// comma-separated rational coordinates
    #[arg(long)]
    point: String,
}

#[derive(Args)]
struct CheckArgs {
    problem: PathBuf,
    #[arg(long)]
    point: String,
    /// comma list from: nnamcq,qn,rcpld,dqn,bq,cond13,impl28,std-qn,std-rcpld
    #[arg(long, default_value = "nnamcq,qn,rcpld,dqn")]
    conditions: String,
    /// heuristic ladder radii as start:end decades, e.g. 1e-1:1e-8
    #[arg(long, default_value = "1e-1:1e-8")]
    radius_ladder: String,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    #[arg(long, default_value_t = 64)]
    probes: usize,
}

#[derive(Args)]
struct KktArgs {
    problem: PathBuf,
    #[arg(long)]
    point: String,
    /// rational csv of length n+m: inequality multipliers then equality ones;
    /// omitted means search
    #[arg(long)]
    multipliers: Option<String>,
}

#[derive(Args)]
struct PenalizeArgs {
    problem: PathBuf,
    /// anchor point (local minimizer) as rational csv
    #[arg(long)]
    point: String,
    /// "auto" doubles rho until validation passes; otherwise a number
    #[arg(long, default_value = "auto")]
    rho: String,
    #[arg(long, value_parser = parse_norm)]
    norm: Option<NormKind>,
    #[arg(long, default_value_t = 0.1)]
    radius: f64,
    #[arg(long, default_value_t = 10000)]
    samples: usize,
    #[arg(long, default_value_t = 1024.0)]
    rho_cap: f64,
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    #[arg(long)]
    rho: f64,
    #[arg(long, value_parser = parse_norm)]
    norm: Option<NormKind>,
    /// f64 csv start point, or "auto" for seeded multistart around the origin
    #[arg(long, default_value = "auto")]
    start: String,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 8)]
    starts: usize,
}

#[derive(Args)]
struct ReportArgs {
    problem: PathBuf,
    #[arg(long)]
    point: String,
    #[arg(long, default_value = "nnamcq,qn,rcpld,dqn")]
    conditions: String,
    #[arg(long, default_value = "1e-1:1e-8")]
    radius_ladder: String,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    #[arg(long, default_value_t = 64)]
    probes: usize,
    /// also search the exact-penalty threshold and validate it
    #[arg(long)]
    penalty: bool,
    #[arg(long, default_value_t = 0.1)]
    penalty_radius: f64,
    #[arg(long, default_value_t = 2000)]
    penalty_samples: usize,
    #[arg(long, default_value_t = 1024.0)]
    rho_cap: f64,
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "l1" => Ok(NormKind::L1),
        "l2" => Ok(NormKind::L2),
        "linf" => Ok(NormKind::Linf),
        other => Err(format!("unknown norm {other:?} (expected l1|l2|linf)")),
    }
}

fn parse_point(s: &str, dim: usize) -> Result<Vec<Rat>, NlqualError> {
    let coords: Vec<Rat> = s
        .split(',')
        .map(|c| parse_rat(c.trim()))
        .collect::<Result<_, _>>()?;
    if coords.len() != dim {
        return Err(NlqualError::DimMismatch(format!(
            "point has {} coordinates, problem dimension is {dim}",
            coords.len()
        )));
    }
    Ok(coords)
}

fn parse_ladder(s: &str) -> Result<Vec<f64>, NlqualError> {
    let bad = || NlqualError::Parse(format!("bad radius ladder {s:?} (expected start:end)"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (start, end): (f64, f64) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if !(start > 0.0 && end > 0.0 && end <= start) {
        return Err(bad());
    }
    let mut radii = vec![start];
    let mut r = start;
    while r / 10.0 >= end * 0.999 {
        r /= 10.0;
        radii.push(r);
    }
    Ok(radii)
}

fn parse_conditions(s: &str) -> Result<Vec<Condition>, NlqualError> {
    s.split(',')
        .map(|c| match c.trim().to_ascii_lowercase().as_str() {
            "nnamcq" => Ok(Condition::Nnamcq),
            "qn" => Ok(Condition::QnHorizon),
            "rcpld" => Ok(Condition::RcpldHorizon),
            "dqn" => Ok(Condition::QnCoderiv),
            "bq" => Ok(Condition::Bq),
            "cond13" => Ok(Condition::Cond13),
            "impl28" => Ok(Condition::Implication28),
            "std-qn" => Ok(Condition::StandardQn),
            "std-rcpld" => Ok(Condition::StandardRcpld),
            other => Err(NlqualError::Parse(format!("unknown condition {other:?}"))),
        })
        .collect()
}

fn load_problem(path: &PathBuf) -> Result<(ProblemSpec, String), NlqualError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| NlqualError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let hash = hex::encode(sha2::Sha256::digest(src.as_bytes()));
    Ok((parse_problem(&src)?, hash))
}

fn run_check(
    p: &ProblemSpec,
    x: &[Rat],
    condition: Condition,
    opts: &QualOptions,
) -> Result<Value, NlqualError> {
    let rep = match condition {
        Condition::Nnamcq => qualify::check_nnamcq(p, x)?,
        Condition::QnHorizon => qualify::check_quasinormality_horizon(p, x, opts)?,
        Condition::RcpldHorizon => qualify::check_rcpld_horizon(p, x, opts)?,
        Condition::QnCoderiv => qualify::check_quasinormality_coderiv(p, x, opts)?,
        Condition::Bq => qualify::check_bq(p, x)?,
        Condition::Cond13 => qualify::check_cond13(p, x)?,
        Condition::Implication28 => qualify::check_implication28(p, x)?,
        Condition::StandardQn => qualify::check_standard_quasinormality(p, x, opts)?,
        Condition::StandardRcpld => qualify::check_standard_rcpld(p, x, opts)?,
    };
    Ok(serde_json::to_value(&rep).unwrap_or(Value::Null))
}

fn qual_options(radius_ladder: &str, samples: usize, delta: f64, probes: usize, seed: u64) -> Result<QualOptions, NlqualError> {
    Ok(QualOptions {
        radii: parse_ladder(radius_ladder)?,
        samples,
        delta,
        probes,
        seed,
    })
}

struct Report {
    command: String,
    problem_hash: String,
    seed: u64,
    body: Value,
    summary: Vec<String>,
}

fn cmd_subdiff(a: &SubdiffArgs, seed: u64) -> Result<Report, NlqualError> {
    let (p, hash) = load_problem(&a.problem)?;
    let x = parse_point(&a.point, p.dim)?;
    let bundle = subdiff::phi_bundle(&p, &x)?;
    let cod = subdiff::coderiv0(&p, &x)?;
    let body = json!({
        "bundle": bundle.to_json(),
        "coderiv0": {
            "set": nlqual::model::set_spec_to_json(&cod.set),
            "exact": format!("{:?}", cod.exact),
        },
    });
    Ok(Report {
        command: "subdiff".into(),
        problem_hash: hash,
        seed,
        body,
        summary: vec![format!("subdiff bundle computed in dimension {}", p.dim)],
    })
}

fn cmd_check(a: &CheckArgs, seed: u64) -> Result<Report, NlqualError> {
    let (p, hash) = load_problem(&a.problem)?;
    let x = parse_point(&a.point, p.dim)?;
    let opts = qual_options(&a.radius_ladder, a.samples, a.delta, a.probes, seed)?;
    let conds = parse_conditions(&a.conditions)?;
    let mut body = serde_json::Map::new();
    let mut summary = Vec::new();
    for c in conds {
        let rep = run_check(&p, &x, c, &opts)?;
        let key = rep["condition"].as_str().unwrap_or("?").to_string();
        summary.push(format!(
            "{key} = {}",
            rep["verdict"].as_str().unwrap_or("?")
        ));
        body.insert(key, rep);
    }
    Ok(Report {
        command: "check".into(),
        problem_hash: hash,
        seed,
        body: Value::Object(body),
        summary,
    })
}

fn cmd_kkt(a: &KktArgs, seed: u64) -> Result<Report, NlqualError> {
    let (p, hash) = load_problem(&a.problem)?;
    let x = parse_point(&a.point, p.dim)?;
    let rep = match &a.multipliers {
        Some(csv) => {
            let vals: Vec<Rat> = csv
                .split(',')
                .map(|c| parse_rat(c.trim()))
                .collect::<Result<_, _>>()?;
            let (n, m) = (p.ineq.len(), p.eq.len());
            if vals.len() != n + m {
                return Err(NlqualError::DimMismatch(format!(
                    "expected {n}+{m} multipliers, got {}",
                    vals.len()
                )));
            }
            let mult = kkt::MultiplierVector {
                lambda: vals[..n].to_vec(),
                mu: vals[n..].to_vec(),
            };
            kkt::verify_kkt(&p, &x, &mult)?
        }
        None => kkt::find_kkt_multipliers(&p, &x)?,
    };
    let summary = vec![format!("KKT = {:?}", rep.status)];
    Ok(Report {
        command: "kkt".into(),
        problem_hash: hash,
        seed,
        body: serde_json::to_value(&rep).unwrap_or(Value::Null),
        summary,
    })
}

fn cmd_penalize(a: &PenalizeArgs, seed: u64) -> Result<Report, NlqualError> {
    let (mut p, hash) = load_problem(&a.problem)?;
    if let Some(n) = a.norm {
        p.norm = n;
    }
    let x = parse_point(&a.point, p.dim)?;
    let (body, summary) = if a.rho.eq_ignore_ascii_case("auto") {
        let rep = penalty::find_rho0(&p, &x, a.radius, a.samples, seed, a.rho_cap)?;
        let line = match rep.rho0 {
            Some(r) => format!("rho0 = {r}"),
            None => format!("no exact rho found up to cap {}", rep.cap),
        };
        (serde_json::to_value(&rep).unwrap_or(Value::Null), vec![line])
    } else {
        let rho: f64 = a
            .rho
            .parse()
            .map_err(|_| NlqualError::Parse(format!("bad rho {:?}", a.rho)))?;
        let pp = penalty::build_penalty(&p, rho, p.norm)?;
        let rep = penalty::validate_exactness(&pp, &x, a.radius, a.samples, seed)?;
        let line = format!(
            "exactness at rho {rho}: {}",
            if rep.passed { "passed" } else { "failed" }
        );
        (serde_json::to_value(&rep).unwrap_or(Value::Null), vec![line])
    };
    Ok(Report {
        command: "penalize".into(),
        problem_hash: hash,
        seed,
        body,
        summary,
    })
}

fn cmd_solve(a: &SolveArgs, seed: u64) -> Result<Report, NlqualError> {
    let (mut p, hash) = load_problem(&a.problem)?;
    if let Some(n) = a.norm {
        p.norm = n;
    }
    let pp = penalty::build_penalty(&p, a.rho, p.norm)?;
    let x0: Vec<f64> = if a.start.eq_ignore_ascii_case("auto") {
        vec![0.0; p.dim]
    } else {
        let v: Vec<f64> = a
            .start
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| NlqualError::Parse(format!("bad start point {:?}", a.start)))?;
        if v.len() != p.dim {
            return Err(NlqualError::DimMismatch(format!(
                "start has {} coordinates, problem dimension is {}",
                v.len(),
                p.dim
            )));
        }
        v
    };
    let cfg = SolverConfig {
        max_iters: a.max_iters,
        tol: a.tol,
        starts: a.starts,
        seed,
        ..SolverConfig::default()
    };
    let res = proxsolve::solve(&pp, &x0, &cfg)?;
    let summary = vec![format!(
        "objective {} after {} iterations ({:?})",
        res.objective, res.iterations, res.status
    )];
    Ok(Report {
        command: "solve".into(),
        problem_hash: hash,
        seed,
        body: serde_json::to_value(&res).unwrap_or(Value::Null),
        summary,
    })
}

fn cmd_report(a: &ReportArgs, seed: u64) -> Result<Report, NlqualError> {
    let (p, hash) = load_problem(&a.problem)?;
    let x = parse_point(&a.point, p.dim)?;
    let opts = qual_options(&a.radius_ladder, a.samples, a.delta, a.probes, seed)?;
    let mut summary = Vec::new();

    let bundle = subdiff::phi_bundle(&p, &x)?;
    let mut checks = serde_json::Map::new();
    for c in parse_conditions(&a.conditions)? {
        let rep = run_check(&p, &x, c, &opts)?;
        let key = rep["condition"].as_str().unwrap_or("?").to_string();
        summary.push(format!(
            "{key} = {}",
            rep["verdict"].as_str().unwrap_or("?")
        ));
        checks.insert(key, rep);
    }
    let kkt_rep = kkt::find_kkt_multipliers(&p, &x)?;
    summary.push(format!("KKT = {:?}", kkt_rep.status));

    let penalty_rep = if a.penalty {
        let rep = penalty::find_rho0(&p, &x, a.penalty_radius, a.penalty_samples, seed, a.rho_cap)?;
        summary.push(match rep.rho0 {
            Some(r) => format!("rho0 = {r}"),
            None => format!("no exact rho found up to cap {}", rep.cap),
        });
        serde_json::to_value(&rep).unwrap_or(Value::Null)
    } else {
        Value::Null
    };

    let body = json!({
        "subdiff": bundle.to_json(),
        "checks": Value::Object(checks),
        "kkt": serde_json::to_value(&kkt_rep).unwrap_or(Value::Null),
        "penalty": penalty_rep,
    });
    Ok(Report {
        command: "report".into(),
        problem_hash: hash,
        seed,
        body,
        summary,
    })
}

fn exit_code_for(err: &NlqualError) -> u8 {
    match err {
        NlqualError::Parse(_) | NlqualError::Schema(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match &cli.cmd {
        Cmd::Subdiff(a) => cmd_subdiff(a, cli.seed),
        Cmd::Check(a) => cmd_check(a, cli.seed),
        Cmd::Kkt(a) => cmd_kkt(a, cli.seed),
        Cmd::Penalize(a) => cmd_penalize(a, cli.seed),
        Cmd::Solve(a) => cmd_solve(a, cli.seed),
        Cmd::Report(a) => cmd_report(a, cli.seed),
    };
    let rep = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("nlqual: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    // wall time lives in its own key so everything else is reproducible
    let doc = json!({
        "tool": format!("nlqual {}", env!("CARGO_PKG_VERSION")),
        "command": rep.command,
        "problem_hash": rep.problem_hash,
        "seed": rep.seed,
        "report": rep.body,
        "wall_ms": started.elapsed().as_millis() as u64,
    });
    if let Some(path) = &cli.out {
        let pretty = serde_json::to_string_pretty(&doc).expect("report serializes");
        if let Err(e) = std::fs::write(path, pretty + "\n") {
            eprintln!("nlqual: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if cli.json || cli.out.is_none() {
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("report serializes")
        );
    } else {
        for line in &rep.summary {
            println!("{line}");
        }
    }
    ExitCode::SUCCESS
}
