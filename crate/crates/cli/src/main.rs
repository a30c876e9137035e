use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use htd_core::design::{generate_vss, maximize_capacity, optimize_schedule, DesignConfig, DesignVerdict};
use htd_core::io;
use htd_core::kinematics::BrakingModel;
use htd_core::reduction::{extract_assignment, parse_dimacs, reduce_sat};
use htd_core::render::{render_dot, render_svg, RenderSpec};
use htd_core::solver::{capacity, check_certificate, optimize, verify, Certificate, Objective, ProblemInstance, RouteMode, Verdict};
use htd_core::Error;

const EXIT_FEASIBLE: u8 = 0;
const EXIT_INFEASIBLE: u8 = 1;
const EXIT_LIMIT: u8 = 2;
const EXIT_ERROR: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "htd", version, about = "Verification and VSS layout design for hybrid train detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the timetable can be run on the given layout.
    Verify {
        #[command(flatten)]
        input: Input,
        /// Write the certificate here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find a layout with the fewest added VSS borders.
    GenVss {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        design: Design,
        /// Accept the first feasible layout found by greedy thinning.
        #[arg(long)]
        slack: bool,
        /// Largest number of borders to try.
        #[arg(long)]
        max_ops: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimise travel time using at most --kmax added borders.
    Optimize {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        design: Design,
        #[arg(long, value_enum, default_value = "sum")]
        objective: ObjectiveArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Route as many optional trains as possible using at most --kmax added borders.
    Capacity {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        design: Design,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the verification instance of a monotone 3-SAT formula.
    ReduceSat {
        /// DIMACS CNF file.
        cnf: PathBuf,
        /// Instance bundle to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a satisfying assignment off a certificate of a reduced instance.
    Extract {
        cnf: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Draw the network as DOT or SVG.
    Render {
        #[command(flatten)]
        input: Input,
        /// Draw the layout of this certificate or design, with its occupancy.
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Time in seconds at which occupied edges are marked.
        #[arg(long, default_value = "0")]
        at: f64,
        #[arg(long, value_enum, default_value = "dot")]
        format: RenderFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-validate a certificate or design against an instance.
    Check {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        certificate: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    /// Bundle with network and timetable.
    #[arg(long, conflicts_with_all = ["network", "timetable"], required_unless_present = "network")]
    instance: Option<PathBuf>,
    #[arg(long, requires = "timetable")]
    network: Option<PathBuf>,
    #[arg(long, requires = "network")]
    timetable: Option<PathBuf>,
    /// Time step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Position grid in mm.
    #[arg(long)]
    grid: Option<i64>,
    #[arg(long, value_enum)]
    routes: Option<RoutesArg>,
    #[arg(long, value_enum)]
    braking: Option<BrakingArg>,
    /// Search node limit per solver call.
    #[arg(long)]
    node_limit: Option<usize>,
    /// Wall-clock limit per solver call, in seconds.
    #[arg(long)]
    time_limit: Option<f32>,
}

#[derive(Args)]
struct Design {
    /// Budget of added VSS borders; overrides the timetable.
    #[arg(long)]
    kmax: Option<usize>,
    /// Spacing of candidate border positions in mm.
    #[arg(long)]
    stride: Option<i64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoutesArg {
    Fixed,
    Free,
}

#[derive(Clone, Copy, ValueEnum)]
enum BrakingArg {
    Quadratic,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Sum,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderFormat {
    Dot,
    Svg,
}

fn seconds_to_ms(s: f64, what: &str) -> Result<i64, Error> {
    let ms = s * 1000.0;
    if !(ms.is_finite() && ms >= 1.0 && ms.fract() == 0.0) {
        return Err(Error::Format(format!("--{what} must be a positive whole number of milliseconds, got {s} s")));
    }
    Ok(ms as i64)
}

impl Input {
    fn load(&self) -> Result<ProblemInstance, Error> {
        let mut inst = match (&self.instance, &self.network, &self.timetable) {
            (Some(b), _, _) => io::load_instance(b, None)?,
            (None, Some(n), Some(t)) => io::load_instance(n, Some(t))?,
            _ => unreachable!("clap enforces an input"),
        };
        let c = &mut inst.config;
        if let Some(dt) = self.dt {
            c.dt_ms = seconds_to_ms(dt, "dt")?;
        }
        if let Some(g) = self.grid {
            c.grid_mm = g;
        }
        if let Some(r) = self.routes {
            c.route_mode = match r {
                RoutesArg::Fixed => RouteMode::Fixed,
                RoutesArg::Free => RouteMode::Free,
            };
        }
        if let Some(b) = self.braking {
            c.braking = match b {
                BrakingArg::Quadratic => BrakingModel::Quadratic,
                BrakingArg::Linear => BrakingModel::Linear,
            };
        }
        if let Some(n) = self.node_limit {
            c.node_limit = n;
        }
        if let Some(t) = self.time_limit {
            c.time_limit_s = Some(t);
        }
        inst.validate()?;
        Ok(inst)
    }
}

impl Design {
    fn apply(&self, inst: &mut ProblemInstance) -> DesignConfig {
        if let Some(k) = self.kmax {
            inst.k_max = Some(k);
        }
        DesignConfig { stride_mm: self.stride, ..DesignConfig::default() }
    }
}

fn caveat(inst: &ProblemInstance) -> String {
    let c = &inst.config;
    let routes = match c.route_mode {
        RouteMode::Fixed => "fixed routes",
        RouteMode::Free => "enumerated routes",
    };
    format!(
        "verdicts are exact for time step {} ms, position grid {} mm and {routes}; infeasible means no schedule on this discretization",
        c.dt_ms, c.grid_mm
    )
}

fn objective_json(inst: &ProblemInstance, cert: &Certificate) -> Value {
    let o = &cert.objective;
    let routed: Vec<&str> = o.routed_optional.iter().map(|&i| inst.trains[i].name.as_str()).collect();
    json!({
        "travel_sum_ms": o.travel_sum_ms,
        "travel_max_ms": o.travel_max_ms,
        "routed_optional": routed,
        "operator_count": o.operator_count,
    })
}

fn verdict_summary(command: &str, inst: &ProblemInstance, v: &Verdict) -> (Value, u8) {
    let mut s = json!({ "command": command, "note": caveat(inst) });
    let code = match v {
        Verdict::Feasible(cert) => {
            s["verdict"] = "feasible".into();
            s["objective"] = objective_json(inst, cert);
            EXIT_FEASIBLE
        }
        Verdict::Infeasible => {
            s["verdict"] = "infeasible".into();
            EXIT_INFEASIBLE
        }
        Verdict::ResourceLimit(why) => {
            s["verdict"] = "resource_limit".into();
            s["reason"] = why.as_str().into();
            EXIT_LIMIT
        }
    };
    (s, code)
}

fn design_summary(command: &str, inst: &ProblemInstance, v: &DesignVerdict) -> (Value, u8) {
    let mut s = json!({ "command": command, "note": caveat(inst) });
    let code = match v {
        DesignVerdict::Solution(sol) => {
            s["verdict"] = "feasible".into();
            s["k"] = sol.operators.len().into();
            s["cuts"] = sol
                .cuts
                .iter()
                .map(|c| json!({ "edge": inst.network.edge(c.edge).name, "offset_mm": c.offset_mm }))
                .collect();
            s["objective"] = objective_json(inst, &sol.certificate);
            EXIT_FEASIBLE
        }
        DesignVerdict::Infeasible => {
            s["verdict"] = "infeasible".into();
            EXIT_INFEASIBLE
        }
        DesignVerdict::CapReached { cap } => {
            s["verdict"] = "cap_reached".into();
            s["cap"] = (*cap).into();
            EXIT_LIMIT
        }
        DesignVerdict::ResourceLimit(why) => {
            s["verdict"] = "resource_limit".into();
            s["reason"] = why.as_str().into();
            EXIT_LIMIT
        }
    };
    (s, code)
}

fn save_certificate(inst: &ProblemInstance, v: &Verdict, out: Option<&Path>) -> Result<(), Error> {
    if let (Some(path), Some(cert)) = (out, v.certificate()) {
        io::write(path, &io::certificate_to_json(inst, cert)?)?;
    }
    Ok(())
}

fn save_design(inst: &ProblemInstance, v: &DesignVerdict, out: Option<&Path>) -> Result<(), Error> {
    if let (Some(path), Some(sol)) = (out, v.solution()) {
        io::write(path, &io::design_to_json(inst, sol)?)?;
    }
    Ok(())
}

fn run(cmd: Command) -> Result<(Value, u8), Error> {
    match cmd {
        Command::Verify { input, out } => {
            let inst = input.load()?;
            let v = verify(&inst)?;
            save_certificate(&inst, &v, out.as_deref())?;
            Ok(verdict_summary("verify", &inst, &v))
        }
        Command::GenVss { input, design, slack, max_ops, out } => {
            let mut inst = input.load()?;
            let mut cfg = design.apply(&mut inst);
            cfg.slack = slack;
            cfg.max_operators = max_ops;
            let v = generate_vss(&inst, &cfg)?;
            save_design(&inst, &v, out.as_deref())?;
            Ok(design_summary("gen-vss", &inst, &v))
        }
        Command::Optimize { input, design, objective, out } => {
            let mut inst = input.load()?;
            let cfg = design.apply(&mut inst);
            let objective = match objective {
                ObjectiveArg::Sum => Objective::WeightedSum,
                ObjectiveArg::Max => Objective::MaxTravel,
            };
            if inst.k_max == Some(0) {
                let v = optimize(&inst, objective)?;
                save_certificate(&inst, &v, out.as_deref())?;
                return Ok(verdict_summary("optimize", &inst, &v));
            }
            let v = optimize_schedule(&inst, objective, &cfg)?;
            save_design(&inst, &v, out.as_deref())?;
            Ok(design_summary("optimize", &inst, &v))
        }
        Command::Capacity { input, design, out } => {
            let mut inst = input.load()?;
            let cfg = design.apply(&mut inst);
            if inst.k_max == Some(0) {
                let v = capacity(&inst)?;
                save_certificate(&inst, &v, out.as_deref())?;
                return Ok(verdict_summary("capacity", &inst, &v));
            }
            let v = maximize_capacity(&inst, &cfg)?;
            save_design(&inst, &v, out.as_deref())?;
            Ok(design_summary("capacity", &inst, &v))
        }
        Command::ReduceSat { cnf, out } => {
            let formula = read_cnf(&cnf)?;
            let inst = reduce_sat(&formula)?;
            io::write(&out, &io::bundle_to_json(&inst))?;
            let route_len = inst.requests.first().and_then(|r| r.route.as_ref()).map_or(0, Vec::len);
            Ok((
                json!({
                    "command": "reduce-sat",
                    "variables": formula.num_vars,
                    "clauses": formula.clauses.len(),
                    "vertices": inst.network.vertex_count(),
                    "edges": inst.network.edge_count(),
                    "route_len": route_len,
                    "out": out.display().to_string(),
                }),
                EXIT_FEASIBLE,
            ))
        }
        Command::Extract { cnf, certificate } => {
            let formula = read_cnf(&cnf)?;
            let inst = reduce_sat(&formula)?;
            let cert = io::load_certificate(&inst, &certificate)?;
            let rep = check_certificate(&inst, &cert)?;
            if !rep.is_ok() {
                return Err(Error::Format(format!("certificate does not check:\n{rep}")));
            }
            let a = extract_assignment(&cert, &formula)?;
            let vars: serde_json::Map<String, Value> =
                a.iter().enumerate().map(|(i, &b)| (format!("x{}", i + 1), Value::Bool(b))).collect();
            Ok((json!({ "command": "extract", "assignment": vars, "satisfies": true }), EXIT_FEASIBLE))
        }
        Command::Render { input, certificate, at, format, out } => {
            let inst = input.load()?;
            let (shown, spec) = match certificate {
                Some(path) => {
                    let cert = io::load_certificate(&inst, &path)?;
                    let (applied, _) = inst.apply_operators(&cert.operators)?;
                    let t = (at * 1000.0).round() as i64;
                    let spec = RenderSpec {
                        title: Some(format!("t = {at} s")),
                        ..RenderSpec::default()
                    }
                    .with_stations(&applied.stations)
                    .with_occupancy(&cert.timelines, t);
                    (applied, spec)
                }
                None => {
                    let spec = RenderSpec::default().with_stations(&inst.stations);
                    (inst, spec)
                }
            };
            let text = match format {
                RenderFormat::Dot => render_dot(&shown.network, &spec),
                RenderFormat::Svg => render_svg(&shown.network, &spec),
            };
            match out {
                Some(path) => {
                    io::write(&path, &text)?;
                    Ok((
                        json!({
                            "command": "render",
                            "vertices": shown.network.vertex_count(),
                            "edges": shown.network.edge_count(),
                            "occupied": spec.occupied.len(),
                            "out": path.display().to_string(),
                        }),
                        EXIT_FEASIBLE,
                    ))
                }
                None => {
                    print!("{text}");
                    Ok((Value::Null, EXIT_FEASIBLE))
                }
            }
        }
        Command::Check { input, certificate } => {
            let inst = input.load()?;
            let cert = io::load_certificate(&inst, &certificate)?;
            let rep = check_certificate(&inst, &cert)?;
            let lines = |v: Vec<String>| Value::from(v);
            let s = json!({
                "command": "check",
                "ok": rep.is_ok(),
                "kinematics": lines(rep.kinematics.iter().map(ToString::to_string).collect()),
                "timetable": lines(rep.timetable.iter().map(ToString::to_string).collect()),
                "vss": lines(rep.control.iter().map(ToString::to_string).collect()),
                "schedule": lines(rep.schedule.clone()),
                "objective": objective_json(&inst, &cert),
            });
            Ok((s, if rep.is_ok() { EXIT_FEASIBLE } else { EXIT_INFEASIBLE }))
        }
    }
}

fn read_cnf(path: &Path) -> Result<htd_core::reduction::MonotoneCnf, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    parse_dimacs(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok((summary, code)) => {
            if !summary.is_null() {
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
