//! Command-line front end. Every subcommand reads a frame file (JSON wire
//! form of [`Frame`]) and writes a JSON document to stdout or `--out`;
//! commands with histories or fits can also write CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bracket::{adapted_basis, growth_report, iterated_commutator, Frame, MultiIndex};
use crate::error::{Error, Result};
use crate::extremal::{abnormal_ode_residual, conserved_quantity, conserved_variation, family_report, DualCurve};
use crate::flow::{curve_length, horizontal_lift, HorizontalCurve, DEFAULT_TOL};
use crate::nilpotent::nilpotentize;
use crate::polynomial::{parse_rational, to_f64, Rational};
use crate::shortener::{shorten_corner, ShortenConfig};
use crate::solver::{corner_gap, nsw_exponent_fit, upper_bound_distance, SolveConfig};

#[derive(Debug, Parser)]
#[command(name = "srgeo", version, about = "Sub-Riemannian frames: brackets, blow-ups, corner shortening")]
pub struct Cli {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterated commutator X_beta of a frame.
    Brackets {
        #[arg(long)]
        frame: PathBuf,
        /// Comma-separated generator indices, e.g. `2,1` for [X1,X2].
        #[arg(long)]
        multiindex: String,
    },
    /// Growth vector, weights and the condition_12/condition_13 layer checks at a point.
    Growth(PointArgs),
    /// Commutator basis adapted to the layers at a point.
    AdaptedBasis(PointArgs),
    /// Graded limit frame at the origin.
    Nilpotentize {
        #[arg(long)]
        frame: PathBuf,
        /// Weights; defaults to the growth weights at the origin.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Horizontal lift of a control curve.
    Lift(CurveArgs),
    /// Length of a control curve.
    Length(CurveArgs),
    /// Constructive shortening of a corner at the origin.
    ShortenCorner {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        incoming: String,
        #[arg(long, allow_hyphen_values = true)]
        outgoing: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 16)]
        max_j: u32,
    },
    /// Abnormal extremals of the built-in R^4 frame.
    Abnormal {
        #[command(subcommand)]
        action: AbnormalCommand,
    },
    /// Upper bound on the distance between two points.
    Distance {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Corner length minus a solver upper bound between its endpoints.
    CornerGap {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        incoming: String,
        #[arg(long, allow_hyphen_values = true)]
        outgoing: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Log-log slope of bracket-path length against the flow parameter.
    NswFit {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        multiindex: String,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Comma-separated flow parameters, spanning at least two decades.
        #[arg(long)]
        s: String,
        /// Endpoint tolerance relative to s.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[arg(long)]
    pub frame: PathBuf,
    /// Comma-separated rationals (`1/2`, `-3`, `0.25`).
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    #[arg(long, default_value_t = crate::bracket::DEFAULT_CAP)]
    pub max_depth: usize,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub frame: PathBuf,
    /// JSON horizontal curve: base point, time grid, piecewise-constant controls.
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub mu0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub mu_factor: f64,
    #[arg(long, default_value_t = 1e8)]
    pub mu_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Convergence history of the winning restart as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            steps: self.steps,
            restarts: self.restarts,
            seed: self.seed,
            mu0: self.mu0,
            mu_factor: self.mu_factor,
            mu_max: self.mu_max,
            tol: self.tol,
            ..SolveConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum AbnormalCommand {
    /// Sample the smooth family with its dual curve and residuals.
    Family {
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        b: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
        c: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        d: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 2.0)]
        t1: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Residuals of a sampled curve, with an optional dual curve
    /// (reconstructed from the states when absent).
    Check {
        /// JSON `{"times": [...], "states": [[...], ...]}`.
        #[arg(long)]
        samples: PathBuf,
        /// JSON `{"times": [...], "xi": [[...], ...]}`.
        #[arg(long)]
        dual: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 success, 1 domain failure, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Json(_) | Error::Io(_) | Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => 2,
        _ => 1,
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let doc = match &cli.command {
        Command::Brackets { frame, multiindex } => {
            let f = read_frame(frame)?;
            let beta = MultiIndex::parse(multiindex, f.num_generators())?;
            let field = iterated_commutator(&f, &beta)?;
            to_value(&BracketOut { multi_index: &beta, display: field.to_string(), field: &field })?
        }
        Command::Growth(a) => {
            let f = read_frame(&a.frame)?;
            to_value(&growth_report(&f, &parse_rationals(&a.point)?, a.max_depth)?)?
        }
        Command::AdaptedBasis(a) => {
            let f = read_frame(&a.frame)?;
            to_value(&adapted_basis(&f, &parse_rationals(&a.point)?, a.max_depth)?)?
        }
        Command::Nilpotentize { frame, weights } => {
            let f = read_frame(frame)?;
            let w = match weights {
                Some(w) => parse_list(w, |s| s.parse::<u32>().ok())?,
                None => growth_report(&f, &origin(f.dimension()), crate::bracket::DEFAULT_CAP)?.weights,
            };
            to_value(&nilpotentize(&f, &w)?)?
        }
        Command::Lift(a) => {
            let f = read_frame(&a.frame)?;
            to_value(&horizontal_lift(&f, &read_curve(&a.curve)?, a.tol)?)?
        }
        Command::Length(a) => {
            let f = read_frame(&a.frame)?;
            let curve = read_curve(&a.curve)?;
            let lifted = horizontal_lift(&f, &curve, a.tol)?;
            to_value(&LengthOut { length: curve_length(&curve, &f.metric().to_f64()), endpoint: lifted.endpoint().unwrap() })?
        }
        Command::ShortenCorner { frame, incoming, outgoing, tol, max_j } => {
            let f = read_frame(frame)?;
            let cfg = ShortenConfig { tol: *tol, max_j: *max_j, ..ShortenConfig::default() };
            to_value(&shorten_corner(&f, &parse_rationals(incoming)?, &parse_rationals(outgoing)?, &cfg)?)?
        }
        Command::Abnormal { action } => match action {
            AbnormalCommand::Family { b, c, d, t0, t1, points, csv } => {
                let rep = family_report(*b, *c, *d, *t0, *t1, *points)?;
                if let Some(p) = csv {
                    let rows = (0..rep.times.len()).map(|k| FamilyRow {
                        t: rep.times[k],
                        g1: rep.states[k][0],
                        g2: rep.states[k][1],
                        g3: rep.states[k][2],
                        g4: rep.states[k][3],
                        xi1: rep.xi[k][0],
                        xi2: rep.xi[k][1],
                        xi3: rep.xi[k][2],
                        xi4: rep.xi[k][3],
                        phi: rep.phi[k],
                    });
                    write_csv(p, rows)?;
                }
                to_value(&rep)?
            }
            AbnormalCommand::Check { samples, dual } => {
                let s: Samples = serde_json::from_str(&read(samples)?)?;
                let xi = match dual {
                    Some(p) => serde_json::from_str::<DualCurve>(&read(p)?)?,
                    None => DualCurve::from_states(s.times.clone(), &s.states)?,
                };
                let residual = abnormal_ode_residual(&s.times, &s.states, &xi)?;
                let phi = conserved_quantity(&s.states);
                to_value(&CheckOut { residual, phi_variation: conserved_variation(&s.states), phi })?
            }
        },
        Command::Distance { frame, from, to, solver } => {
            let f = read_frame(frame)?;
            let r = upper_bound_distance(&f, &parse_floats(from)?, &parse_floats(to)?, &solver.config())?;
            if let Some(p) = &solver.csv {
                write_csv(p, r.history.iter())?;
            }
            to_value(&r)?
        }
        Command::CornerGap { frame, incoming, outgoing, solver } => {
            let f = read_frame(frame)?;
            let corner = corner_curve(&f, &parse_floats(incoming)?, &parse_floats(outgoing)?)?;
            let g = corner_gap(&f, &corner, &solver.config())?;
            if let Some(p) = &solver.csv {
                write_csv(p, g.result.history.iter())?;
            }
            to_value(&g)?
        }
        Command::NswFit { frame, multiindex, point, s, tol, csv } => {
            let f = read_frame(frame)?;
            let beta = MultiIndex::parse(multiindex, f.num_generators())?;
            let fit = nsw_exponent_fit(&f, &beta, &parse_floats(point)?, &parse_floats(s)?, *tol)?;
            if let Some(p) = csv {
                write_csv(p, fit.samples.iter())?;
            }
            to_value(&fit)?
        }
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    match &cli.out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Unit-time corner `exp(-incoming)(0) -> 0 -> exp(outgoing)(0)`.
pub fn corner_curve(frame: &Frame, incoming: &[f64], outgoing: &[f64]) -> Result<HorizontalCurve> {
    let n = frame.dimension();
    let back: Vec<f64> = incoming.iter().map(|v| -v).collect();
    let start = horizontal_lift(frame, &HorizontalCurve::from_legs(vec![0.0; n], &[(1.0, back)])?, 1e-13)?;
    HorizontalCurve::from_legs(start.endpoint().unwrap().clone(), &[(1.0, incoming.to_vec()), (1.0, outgoing.to_vec())])
}

#[derive(Serialize)]
struct BracketOut<'a> {
    multi_index: &'a MultiIndex,
    display: String,
    field: &'a crate::bracket::VectorField,
}

#[derive(Serialize)]
struct LengthOut<'a> {
    length: f64,
    endpoint: &'a [f64],
}

#[derive(Serialize)]
struct CheckOut {
    residual: crate::extremal::AbnormalResidual,
    phi_variation: f64,
    phi: Vec<f64>,
}

#[derive(serde::Deserialize)]
struct Samples {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct FamilyRow {
    t: f64,
    g1: f64,
    g2: f64,
    g3: f64,
    g4: f64,
    xi1: f64,
    xi2: f64,
    xi3: f64,
    xi4: f64,
    phi: f64,
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
}

pub fn read_frame(p: &Path) -> Result<Frame> {
    Frame::from_json_str(&read(p)?)
}

fn read_curve(p: &Path) -> Result<HorizontalCurve> {
    let c: HorizontalCurve = serde_json::from_str(&read(p)?)?;
    // re-validate the grid
    HorizontalCurve::new(c.base_point, c.times, c.controls)
}

fn write_csv<I, T>(p: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Serialize,
{
    let mut w = csv::Writer::from_path(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn origin(n: usize) -> Vec<Rational> {
    vec![Rational::from_integer(0.into()); n]
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| f(p.trim()).ok_or_else(|| Error::Parse(format!("cannot parse '{p}' in '{s}'"))))
        .collect()
}

pub fn parse_rationals(s: &str) -> Result<Vec<Rational>> {
    parse_list(s, |p| parse_rational(p).ok())
}

/// Accepts plain floats and `p/q` rationals.
pub fn parse_floats(s: &str) -> Result<Vec<f64>> {
    parse_list(s, |p| p.parse::<f64>().ok().or_else(|| parse_rational(p).ok().map(|r| to_f64(&r))))
}
