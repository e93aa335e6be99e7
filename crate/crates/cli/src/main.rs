//! `vicsek`: command-line access to the sandpile library.
//!
//! Exit codes: 0 success, 2 usage or validation, 3 capacity, 4 verification
//! failure, 1 anything else (I/O, internal).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use vicsek_sandpile::chain::{
    absorption_probabilities, format_rational, k_step_distribution, monte_carlo_stabilization,
    radius_pmf, radius_pmf_derived, transition_matrix, Rational, STATES,
};
use vicsek_sandpile::graph::{bfs, classify_coord};
use vicsek_sandpile::group::{group_structure, SNF_LEVEL_CAP};
use vicsek_sandpile::identity::{height_histogram, identity, identity_report, IdentityReport};
use vicsek_sandpile::io::{
    config_from_json, config_to_json, pmf_csv, rationals_csv, rationals_json, render_pgm,
    render_svg, RunRecord,
};
use vicsek_sandpile::registry::{estimators, schedules};
use vicsek_sandpile::{Coord, Error, Lattice, SandpileConfig, Topology, VicsekGraph};

#[derive(Parser)]
#[command(
    name = "vicsek",
    version,
    about = "Abelian sandpiles on Vicsek fractal graphs"
)]
struct Cli {
    /// Output format; `chain` defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Also write a run record (command, parameters, seed, version, outputs,
    /// duration) to this file.
    #[arg(long, global = true)]
    record: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Vertex and edge counts, degree histogram and diameter of 𝒱_n.
    Graph {
        #[arg(long)]
        level: u32,
        /// Also describe one vertex, given as `x,y`.
        #[arg(long, value_parser = parse_coord)]
        vertex: Option<Coord>,
    },
    /// Exact quantities of the nested-volume chain.
    Chain {
        #[command(subcommand)]
        what: ChainCommand,
    },
    /// Monte Carlo estimate of the stabilization probability.
    Mc(McArgs),
    /// Invariant factors of the sandpile group.
    Group {
        #[arg(long)]
        level: u32,
    },
    /// The identity of the sandpile group, optionally verified or rendered.
    Identity(IdentityArgs),
    /// Stabilize a configuration read from a file.
    Stabilize(StabilizeArgs),
}

#[derive(Subcommand)]
enum ChainCommand {
    /// The 5×5 transition matrix.
    Matrix,
    /// Absorption probabilities at 0 from each state.
    Absorb,
    /// Row `start` of P^k.
    Kstep {
        #[arg(long, default_value_t = 1)]
        start: usize,
        #[arg(long)]
        k: u32,
    },
    /// Avalanche diameter law for n = 0..=max-n.
    Pmf {
        #[arg(long)]
        max_n: u64,
        /// Use the value 19/32 at n = 0, which makes the law sum to one.
        #[arg(long)]
        derived_zero: bool,
    },
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value = "chain")]
    mode: String,
    #[arg(long, default_value_t = 4)]
    level: u32,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long)]
    level: u32,
    /// Write an image; the extension picks PGM or SVG.
    #[arg(long)]
    render: Option<PathBuf>,
    /// Run verification clauses (a)–(e) and print the report.
    #[arg(long)]
    verify: bool,
    /// Verify this configuration file instead of the constructed identity.
    #[arg(long, requires = "verify")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StabilizeArgs {
    #[arg(long)]
    level: u32,
    /// Configuration JSON to start from; all zeros when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Add particles at `x,y` before stabilizing (repeatable).
    #[arg(long, value_parser = parse_coord)]
    add: Vec<Coord>,
    /// Particles per --add.
    #[arg(long, default_value_t = 1)]
    times: i64,
    #[arg(long, default_value = "rounds")]
    schedule: String,
}

fn parse_coord(s: &str) -> Result<Coord, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}"));
    Ok(Coord::new(p(x)?, p(y)?))
}

/// What a command produced: the text for stdout and the value stored in a
/// run record.
struct Output {
    text: String,
    value: Value,
    parameters: Value,
    seed: Option<u64>,
}

impl Output {
    fn json(value: Value, parameters: Value) -> Self {
        Output {
            text: pretty(&value),
            value,
            parameters,
            seed: None,
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// A flat object as a header line and a value line.
fn object_csv(v: &Value) -> String {
    let obj = v.as_object().expect("flat object");
    let cell = |x: &Value| match x {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    let vals: Vec<String> = obj.values().map(cell).collect();
    format!("{}\n{}\n", keys.join(","), vals.join(","))
}

fn rationals(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

fn cmd_graph(level: u32, vertex: Option<Coord>, fmt: Format) -> Result<Output, Error> {
    let g = VicsekGraph::build(level)?;
    let (deg3, deg6) = g.degree_histogram();
    let d0 = bfs(&g, g.origin());
    let far = (0..g.vertex_count()).max_by_key(|&v| d0[v]).unwrap_or(0);
    let diameter = bfs(&g, far).into_iter().max().unwrap_or(0);
    let mut v = json!({
        "level": level,
        "vertices": g.vertex_count(),
        "edges": g.edge_count(),
        "degree3": deg3,
        "degree6": deg6,
        "diameter": diameter,
        "sink": g.coord(g.sink()).to_string(),
    });
    if let Some(x) = vertex {
        let idx = g.require(x)?;
        let class = format!("{:?}", classify_coord(x));
        v["vertex"] = json!(x.to_string());
        v["degree"] = json!(g.degree(idx));
        v["class"] = json!(class);
        if let Ok(t) = g.branch_component(x) {
            v["branch_size"] = json!(t.len());
        }
        if let Ok(gamma) = g.geodesic_subgraph(x) {
            v["geodesic_size"] = json!(gamma.len());
        }
    }
    let params = json!({"level": level, "vertex": vertex.map(|c| c.to_string())});
    let mut out = Output::json(v, params);
    if fmt == Format::Csv {
        out.text = object_csv(&out.value);
    }
    Ok(out)
}

fn cmd_chain(what: &ChainCommand, fmt: Format) -> Result<Output, Error> {
    match what {
        ChainCommand::Matrix => {
            let p = transition_matrix().0;
            let rows: Vec<Vec<String>> = (0..STATES).map(|i| rationals(p.row(i))).collect();
            let value = json!(rows);
            let text = match fmt {
                Format::Csv => p.to_string(),
                Format::Json => pretty(&value),
            };
            Ok(Output {
                text,
                value,
                parameters: json!({"table": "matrix"}),
                seed: None,
            })
        }
        ChainCommand::Absorb => {
            let x = absorption_probabilities()?;
            let text = match fmt {
                Format::Csv => rationals_csv(&x),
                Format::Json => pretty(&rationals_json(&x)),
            };
            Ok(Output {
                text,
                value: rationals_json(&x),
                parameters: json!({"table": "absorb"}),
                seed: None,
            })
        }
        ChainCommand::Kstep { start, k } => {
            let v = k_step_distribution(*start, *k)?;
            let text = match fmt {
                Format::Csv => rationals_csv(&v),
                Format::Json => pretty(&rationals_json(&v)),
            };
            Ok(Output {
                text,
                value: rationals_json(&v),
                parameters: json!({"start": start, "k": k}),
                seed: None,
            })
        }
        ChainCommand::Pmf {
            max_n,
            derived_zero,
        } => {
            if *max_n > 3u64.pow(7) {
                return Err(Error::Capacity(format!(
                    "--max-n is limited to {}",
                    3u64.pow(7)
                )));
            }
            let f = if *derived_zero {
                radius_pmf_derived
            } else {
                radius_pmf
            };
            let rows: Vec<(u64, Rational)> = (0..=*max_n).map(|n| (n, f(n))).collect();
            let value: Value = rows
                .iter()
                .map(|(n, p)| json!({"n": n, "p": format_rational(p)}))
                .collect();
            let text = match fmt {
                Format::Csv => pmf_csv(&rows),
                Format::Json => pretty(&value),
            };
            Ok(Output {
                text,
                value,
                parameters: json!({"max_n": max_n, "derived_zero": derived_zero}),
                seed: None,
            })
        }
    }
}

fn cmd_mc(a: &McArgs, fmt: Format) -> Result<Output, Error> {
    let mode = estimators().create(&a.mode, a.seed)?;
    if a.workers == Some(0) {
        return Err(Error::Domain("--workers must be at least 1".into()));
    }
    let t = Instant::now();
    let e = monte_carlo_stabilization(mode.as_ref(), a.level, a.trials, a.seed, a.workers)?;
    let value = serde_json::to_value(&e).expect("serializable");
    let params = json!({"mode": a.mode, "level": a.level, "trials": a.trials});
    let record = RunRecord::new(
        "mc",
        params.clone(),
        Some(a.seed),
        value.clone(),
        t.elapsed().as_secs_f64(),
    );
    let text = match fmt {
        Format::Csv => object_csv(&value),
        Format::Json => pretty(&serde_json::to_value(&record).expect("serializable")),
    };
    Ok(Output {
        text,
        value,
        parameters: params,
        seed: Some(a.seed),
    })
}

fn cmd_group(level: u32, fmt: Format) -> Result<Output, Error> {
    if level > SNF_LEVEL_CAP {
        return Err(Error::Capacity(format!(
            "Smith normal form supports level <= {SNF_LEVEL_CAP}"
        )));
    }
    let f = group_structure(level)?;
    let factors = f.to_strings();
    let value = json!({
        "level": level,
        "invariant_factors": factors,
        "unit_count": f.unit_count(),
        "order": f.product().to_string(),
        "order2_count": f.order2_count().to_string(),
    });
    let text = match fmt {
        Format::Csv => factors.join(",") + "\n",
        Format::Json => pretty(&value),
    };
    Ok(Output {
        text,
        value,
        parameters: json!({"level": level}),
        seed: None,
    })
}

fn cmd_identity(a: &IdentityArgs, fmt: Format) -> Result<Output, Error> {
    let g = VicsekGraph::build(a.level)?;
    let id = match &a.input {
        Some(path) => config_from_json(&g, &std::fs::read_to_string(path)?)?,
        None => identity(a.level)?,
    };
    if let Some(path) = &a.render {
        let image = match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => render_pgm(&g, &id),
            Some("svg") => render_svg(&g, &id),
            _ => {
                return Err(Error::Domain(format!(
                    "{}: --render needs a .pgm or .svg path",
                    path.display()
                )))
            }
        };
        std::fs::write(path, image)?;
    }
    let params = json!({"level": a.level, "verify": a.verify, "samples": a.samples,
        "input": a.input.as_deref().map(Path::display).map(|d| d.to_string())});
    if a.verify {
        let report: IdentityReport = identity_report(&g, &id, a.samples, a.seed)?;
        let value = serde_json::to_value(&report).expect("serializable");
        let text = pretty(&value);
        if let Some(bad) = report.clauses.iter().find(|c| !c.passed) {
            print!("{text}");
            return Err(Error::Verification {
                clause: ["a", "b", "c", "d", "e"]
                    .into_iter()
                    .find(|&n| n == bad.clause)
                    .unwrap_or("?"),
                detail: bad.detail.clone(),
            });
        }
        return Ok(Output {
            text,
            value,
            parameters: params,
            seed: Some(a.seed),
        });
    }
    let config: Value = serde_json::from_str(&config_to_json(&g, &id)?).expect("valid json");
    let text = match fmt {
        Format::Csv => {
            let mut s = String::from("x,y,height\n");
            for v in 0..g.site_count() {
                let c = g.coord(v);
                s.push_str(&format!("{},{},{}\n", c.x, c.y, id.heights[v]));
            }
            s
        }
        Format::Json => config_to_json(&g, &id)? + "\n",
    };
    let hist: Value = height_histogram(&id)
        .into_iter()
        .map(|(h, n)| (h.to_string(), json!(n)))
        .collect();
    let value = json!({"config": config, "histogram": hist});
    Ok(Output {
        text,
        value,
        parameters: params,
        seed: None,
    })
}

fn cmd_stabilize(a: &StabilizeArgs, fmt: Format) -> Result<Output, Error> {
    let g = VicsekGraph::build(a.level)?;
    let mut c = match &a.input {
        Some(path) => config_from_json(&g, &std::fs::read_to_string(path)?)?,
        None => SandpileConfig::zeros(&g),
    };
    for &x in &a.add {
        c.add_particles_at(&g, x, a.times)?;
    }
    if !c.is_nonnegative() {
        return Err(Error::Domain("negative heights after --add".into()));
    }
    let schedule = schedules().create(&a.schedule, 0)?;
    let (out, rep) = vicsek_sandpile::engine::stabilize_with(&g, &c, schedule.as_ref());
    let config: Value = serde_json::from_str(&config_to_json(&g, &out)?).expect("valid json");
    let value = json!({
        "config": config,
        "topplings": rep.topple_count(),
        "sink_particles": rep.sink_particles,
        "diameter": rep.diameter(&g),
    });
    let text = match fmt {
        // The configuration alone, so the output can be fed back in.
        Format::Json => config_to_json(&g, &out)? + "\n",
        Format::Csv => object_csv(&json!({
            "topplings": rep.topple_count(),
            "sink_particles": rep.sink_particles,
            "diameter": rep.diameter(&g),
        })),
    };
    let params = json!({"level": a.level, "add": a.add.iter().map(Coord::to_string).collect::<Vec<_>>(),
        "times": a.times, "schedule": a.schedule});
    Ok(Output {
        text,
        value,
        parameters: params,
        seed: None,
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Format(_) => 2,
        Error::Capacity(_) => 3,
        Error::Verification { .. } => 4,
        Error::Singular(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let t = Instant::now();
    let (name, result) = match &cli.command {
        Command::Graph { level, vertex } => (
            "graph",
            cmd_graph(*level, *vertex, cli.format.unwrap_or(Format::Json)),
        ),
        Command::Chain { what } => ("chain", cmd_chain(what, cli.format.unwrap_or(Format::Csv))),
        Command::Mc(a) => ("mc", cmd_mc(a, cli.format.unwrap_or(Format::Json))),
        Command::Group { level } => (
            "group",
            cmd_group(*level, cli.format.unwrap_or(Format::Json)),
        ),
        Command::Identity(a) => (
            "identity",
            cmd_identity(a, cli.format.unwrap_or(Format::Json)),
        ),
        Command::Stabilize(a) => (
            "stabilize",
            cmd_stabilize(a, cli.format.unwrap_or(Format::Json)),
        ),
    };
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            eprintln!("vicsek {name}: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    print!("{}", out.text);
    if let Some(path) = &cli.record {
        let r = RunRecord::new(
            name,
            out.parameters,
            out.seed,
            out.value,
            t.elapsed().as_secs_f64(),
        );
        let s = serde_json::to_string_pretty(&r).expect("serializable") + "\n";
        if let Err(e) = std::fs::write(path, s) {
            eprintln!("vicsek {name}: cannot write record {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    ExitCode::SUCCESS
}
