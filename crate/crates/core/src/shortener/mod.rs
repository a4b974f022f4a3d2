//! Corner shortening: for a triangular graded frame satisfying the layer
//! condition at 0, build a horizontal curve from `e2` to `e1` strictly
//! shorter than the corner `e2 -> 0 -> e1` by recursive projection, lift,
//! dilation and an endpoint patch along a bracket direction.

mod path;
mod triangular;

use serde::Serialize;

pub use path::{correct_endpoint, raw_bracket_path, steer_with_bracket, synthesize_bracket_path, BracketPath, Legs, PATH_LIFT_TOL};
pub use triangular::{choose_z, ChosenZ, TriangularFrame, Triangularization};

use crate::bracket::{growth_report, CommutatorTable, Frame};
use crate::error::{Error, Result};
use crate::flow::{legs_length, lift_endpoint, HorizontalCurve};
use crate::nilpotent::dilate;
use crate::polynomial::Rational;
use crate::solver::{upper_bound_distance_with_inits, SolveConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShortenConfig {
    /// Endpoint tolerance of every level's competitor.
    pub tol: f64,
    pub lift_tol: f64,
    /// Epsilon grid `2^-1, ..., 2^-max_j`.
    pub max_j: u32,
    /// Solver settings for the step-2 base case.
    pub solver: SolveConfig,
}

impl Default for ShortenConfig {
    fn default() -> Self {
        ShortenConfig {
            tol: 1e-9,
            lift_tol: PATH_LIFT_TOL,
            max_j: 16,
            solver: SolveConfig { tol: 1e-10, lift_tol: 1e-13, ..SolveConfig::default() },
        }
    }
}

/// One epsilon tried at an inductive level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsCandidate {
    pub epsilon: f64,
    /// `L(gamma^eps)` by quadrature, before patching.
    pub assembled_length: f64,
    /// `L(gamma) - eps k`.
    pub ledger_length: f64,
    pub drift: f64,
    /// Raw `Z` bracket path length (no correction).
    pub nsw_patch_cost: Option<f64>,
    pub patch_length: Option<f64>,
    pub patch_method: Option<String>,
    pub total_length: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelTrace {
    pub dimension: usize,
    pub weights: Vec<u32>,
    pub method: String,
    pub corner_length: f64,
    pub competitor_length: f64,
    /// `L(corner) - L(competitor)`.
    pub k: f64,
    pub mirrored: bool,
    pub epsilon: Option<f64>,
    /// `h` from the unscaled lift and at `epsilon`, `epsilon / 2`.
    pub h: Option<f64>,
    pub h_eps: Option<f64>,
    pub h_half_eps: Option<f64>,
    pub z_multi_index: Option<String>,
    pub candidates: Vec<EpsCandidate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShorteningCertificate {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub corner_length: f64,
    pub competitor: HorizontalCurve,
    pub competitor_length: f64,
    pub margin: f64,
    pub endpoint_error: f64,
    pub epsilon: Option<f64>,
    pub nsw_patch_cost: Option<f64>,
    /// Endpoint change when re-integrating with a 16x smaller tolerance (half step).
    pub half_step_endpoint_change: f64,
    pub half_step_length_change: f64,
    /// Innermost level first.
    pub trace: Vec<LevelTrace>,
}

struct Level {
    legs: Legs,
    length: f64,
}

fn unit_vec(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn reverse_legs(legs: &[(f64, Vec<f64>)]) -> Legs {
    legs.iter().rev().map(|(d, u)| (*d, u.iter().map(|v| -v).collect())).collect()
}

fn corner_legs() -> Legs {
    vec![(1.0, vec![0.0, -1.0]), (1.0, vec![1.0, 0.0])]
}

fn shorten_level(tf: &TriangularFrame, cfg: &ShortenConfig, trace: &mut Vec<LevelTrace>) -> Result<Level> {
    let n = tf.dimension();
    let frame = tf.frame();
    let metric = frame.metric().to_f64();
    let corner_length = legs_length(&corner_legs(), &metric);
    let (e1, e2) = (unit_vec(n, 0), unit_vec(n, 1));
    let compiled = frame.compile();
    let base_trace = |method: &str, len: f64| LevelTrace {
        dimension: n,
        weights: tf.weights().to_vec(),
        method: method.into(),
        corner_length,
        competitor_length: len,
        k: corner_length - len,
        mirrored: false,
        epsilon: None,
        h: None,
        h_eps: None,
        h_half_eps: None,
        z_multi_index: None,
        candidates: vec![],
    };

    if n == 2 {
        let legs = vec![(1.0, vec![1.0, -1.0])];
        let length = legs_length(&legs, &metric);
        trace.push(base_trace("chord", length));
        return Ok(Level { legs, length });
    }
    if n == 3 && tf.weights() == [1, 1, 2] {
        let res = upper_bound_distance_with_inits(frame, &e2, &e1, &cfg.solver, &[corner_legs()])?;
        let legs = res.curve.legs();
        let length = legs_length(&legs, &metric);
        let err = dist(&lift_endpoint(&compiled, &e2, &legs, cfg.lift_tol)?, &e1);
        if err > cfg.tol {
            return Err(Error::SolverFailed(format!("base case endpoint error {err:e} above {:e}", cfg.tol)));
        }
        if length >= corner_length {
            return Err(Error::SolverFailed(format!("base case competitor length {length} does not beat {corner_length}")));
        }
        trace.push(base_trace("solver", length));
        return Ok(Level { legs, length });
    }

    let sub = shorten_level(&tf.project()?, cfg, trace)?;
    let chosen = choose_z(tf)?;
    let mirrored = chosen.outer == 2;
    let (p, q, seg1, seg3, sigma) = if mirrored {
        (e1.clone(), e2.clone(), vec![-1.0, 0.0], vec![0.0, 1.0], reverse_legs(&sub.legs))
    } else {
        (e2.clone(), e1.clone(), vec![0.0, -1.0], vec![1.0, 0.0], sub.legs.clone())
    };
    let k = corner_length - sub.length;
    if k <= 0.0 {
        return Err(Error::Hypothesis(format!("projected competitor does not shorten (k = {k})")));
    }
    let wn = tf.weights()[n - 1] as i32;
    let drift_at = |eps: f64| -> Result<f64> {
        let scaled: Legs = sigma.iter().map(|(d, u)| (*d, u.iter().map(|v| v * eps).collect())).collect();
        let end = lift_endpoint(&compiled, &dilate(&p, tf.weights(), eps), &scaled, cfg.lift_tol)?;
        Ok((end[n - 1] - eps.powi(wn) * q[n - 1]) / eps.powi(wn))
    };
    let h = drift_at(1.0)?;
    let zfield = crate::bracket::iterated_commutator(frame, &chosen.beta_hat)?.compile();
    let table = CommutatorTable::build(frame, (wn as usize + 1).max(3))?;

    let mut candidates = Vec::new();
    let mut best: Option<(f64, f64, Legs, Option<f64>)> = None;
    for j in 1..=cfg.max_j {
        let eps = 0.5f64.powi(j as i32);
        let mut legs: Legs = vec![(1.0 - eps, seg1.clone())];
        legs.extend(sigma.iter().map(|(d, u)| (*d, u.iter().map(|v| v * eps).collect::<Vec<f64>>())));
        legs.push((1.0 - eps, seg3.clone()));
        let assembled_length = legs_length(&legs, &metric);
        let ledger_length = corner_length - eps * k;
        let end = lift_endpoint(&compiled, &p, &legs, cfg.lift_tol)?;
        let drift = end[n - 1] - q[n - 1];
        let mut cand = EpsCandidate {
            epsilon: eps,
            assembled_length,
            ledger_length,
            drift,
            nsw_patch_cost: None,
            patch_length: None,
            patch_method: None,
            total_length: None,
            margin: None,
        };
        let mut options: Vec<(f64, Legs, &str)> = Vec::new();
        let bn = zfield.eval(&end)[n - 1];
        if bn != 0.0 {
            let s = -drift / bn;
            cand.nsw_patch_cost = Some(legs_length(&raw_bracket_path(&chosen.beta_hat, 2, s), &metric));
            if let Ok(path) = steer_with_bracket(frame, &chosen.beta_hat, s, &end, &q, cfg.tol) {
                options.push((legs_length(&path.legs, &metric), path.legs, "z-bracket"));
            }
        }
        if let Ok((patch, _, _)) = correct_endpoint(frame, &table, &compiled, &end, &q, cfg.tol) {
            options.push((legs_length(&patch, &metric), patch, "greedy-bracket"));
        }
        if let Some((plen, patch, method)) = options.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)) {
            let total = assembled_length + plen;
            cand.patch_length = Some(plen);
            cand.patch_method = Some(method.into());
            cand.total_length = Some(total);
            cand.margin = Some(corner_length - total);
            if best.as_ref().is_none_or(|b| total < b.1) {
                let mut full = legs.clone();
                full.extend(patch);
                best = Some((eps, total, full, cand.nsw_patch_cost));
            }
        }
        candidates.push(cand);
    }
    let Some((eps, total, legs, _)) = best.filter(|b| b.1 < corner_length) else {
        return Err(Error::NoEpsilon(format!(
            "dimension {n}: best total {:?} vs corner {corner_length}",
            candidates.iter().filter_map(|c| c.total_length).fold(None, |a: Option<f64>, t| Some(a.map_or(t, |v| v.min(t))))
        )));
    };
    let legs = if mirrored { reverse_legs(&legs) } else { legs };
    trace.push(LevelTrace {
        mirrored,
        epsilon: Some(eps),
        h: Some(h),
        h_eps: Some(drift_at(eps)?),
        h_half_eps: Some(drift_at(eps / 2.0)?),
        z_multi_index: Some(chosen.beta_hat.to_string()),
        candidates,
        competitor_length: total,
        k: corner_length - total,
        ..base_trace("inductive", total)
    });
    Ok(Level { legs, length: total })
}

/// Certificate that the unit corner `e2 -> 0 -> e1` of a triangular frame is
/// not length minimizing.
pub fn shorten(tf: &TriangularFrame, cfg: &ShortenConfig) -> Result<ShorteningCertificate> {
    let n = tf.dimension();
    let zero = vec![Rational::from_integer(0.into()); n];
    let report = growth_report(tf.frame(), &zero, *tf.weights().last().unwrap() as usize + 1)?;
    if !report.condition_13 {
        return Err(Error::Hypothesis("condition_13 fails at 0".into()));
    }
    let mut trace = Vec::new();
    let level = shorten_level(tf, cfg, &mut trace)?;
    let (e1, e2) = (unit_vec(n, 0), unit_vec(n, 1));
    let metric = tf.frame().metric().to_f64();
    let compiled = tf.frame().compile();
    let corner_length = legs_length(&corner_legs(), &metric);
    let end = lift_endpoint(&compiled, &e2, &level.legs, cfg.lift_tol)?;
    let fine = lift_endpoint(&compiled, &e2, &level.legs, cfg.lift_tol / 16.0)?;
    let competitor = HorizontalCurve::from_legs(e2.clone(), &level.legs)?;
    let competitor_length = legs_length(&level.legs, &metric);
    let top = trace.last().unwrap();
    let nsw = top
        .epsilon
        .and_then(|e| top.candidates.iter().find(|c| c.epsilon == e).and_then(|c| c.nsw_patch_cost));
    Ok(ShorteningCertificate {
        epsilon: top.epsilon,
        nsw_patch_cost: nsw,
        start: e2,
        endpoint_error: dist(&end, &e1),
        end: e1,
        corner_length,
        margin: corner_length - competitor_length,
        competitor_length,
        half_step_endpoint_change: dist(&end, &fine),
        half_step_length_change: (crate::flow::curve_length(&competitor, &metric) - competitor_length).abs(),
        competitor,
        trace,
    })
}

/// Certificate for a corner of a graded homogeneous rank-2 frame given by its
/// one-sided velocities, mapped back to the frame's own coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CornerCertificate {
    pub incoming: Vec<f64>,
    pub outgoing: Vec<f64>,
    pub weights: Vec<u32>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub corner_length: f64,
    pub competitor: HorizontalCurve,
    pub competitor_length: f64,
    pub margin: f64,
    pub endpoint_error: f64,
    pub half_step_endpoint_change: f64,
    pub triangular_frame: Frame,
    pub triangular: ShorteningCertificate,
}

/// The corner runs from `exp(-incoming)(0)` through 0 to `exp(outgoing)(0)`
/// with unit-time legs.
pub fn shorten_corner(frame: &Frame, incoming: &[Rational], outgoing: &[Rational], cfg: &ShortenConfig) -> Result<CornerCertificate> {
    let n = frame.dimension();
    let zero = vec![Rational::from_integer(0.into()); n];
    let weights = growth_report(frame, &zero, crate::bracket::DEFAULT_CAP)?.weights;
    let tri = Triangularization::new(frame, &weights, incoming, outgoing)?;
    let cert = shorten(&tri.triangular, cfg)?;
    let start = tri.to_original(&cert.start);
    let end = tri.to_original(&cert.end);
    let legs: Legs = cert.competitor.legs().into_iter().map(|(d, v)| (d, tri.original_controls(&v))).collect();
    let metric = frame.metric().to_f64();
    let compiled = frame.compile();
    let reached = lift_endpoint(&compiled, &start, &legs, cfg.lift_tol)?;
    let fine = lift_endpoint(&compiled, &start, &legs, cfg.lift_tol / 16.0)?;
    let inc: Vec<f64> = incoming.iter().map(crate::polynomial::to_f64).collect();
    let out: Vec<f64> = outgoing.iter().map(crate::polynomial::to_f64).collect();
    let corner_length = metric.norm(&inc) + metric.norm(&out);
    let competitor_length = legs_length(&legs, &metric);
    Ok(CornerCertificate {
        incoming: inc,
        outgoing: out,
        weights,
        endpoint_error: dist(&reached, &end),
        half_step_endpoint_change: dist(&reached, &fine),
        competitor: HorizontalCurve::from_legs(start.clone(), &legs)?,
        start,
        end,
        corner_length,
        margin: corner_length - competitor_length,
        competitor_length,
        triangular_frame: tri.triangular.frame().clone(),
        triangular: cert,
    })
}

#[cfg(test)]
mod tests;
