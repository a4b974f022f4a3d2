//! Horizontal paths approximating `exp(s X_beta)` by nested group
//! commutators of generator flows, with iterative endpoint correction.

use serde::Serialize;

use crate::bracket::{iterated_commutator, CommutatorTable, CompiledFrame, Frame, MultiIndex};
use crate::error::{Error, Result};
use crate::flow::{flow, lift_endpoint};
use crate::linalg::{solve_columns, NumericEchelon};

/// Integrator tolerance used for path endpoints.
pub const PATH_LIFT_TOL: f64 = 1e-13;
const MAX_CORRECTIONS: usize = 60;

pub type Legs = Vec<(f64, Vec<f64>)>;

fn unit(m: usize, j: usize, sign: f64) -> Vec<f64> {
    let mut u = vec![0.0; m];
    u[j - 1] = sign;
    u
}

fn reverse(legs: &[(f64, Vec<f64>)]) -> Legs {
    legs.iter().rev().map(|(d, u)| (*d, u.iter().map(|v| -v).collect())).collect()
}

fn commutator_legs(entries: &[usize], m: usize, tau: f64, sign: f64) -> Legs {
    let outer = *entries.last().unwrap();
    if entries.len() == 1 {
        return vec![(tau, unit(m, outer, sign))];
    }
    let q = commutator_legs(&entries[..entries.len() - 1], m, tau, 1.0);
    let mut out = vec![(tau, unit(m, outer, sign))];
    out.extend(q.iter().cloned());
    out.push((tau, unit(m, outer, -sign)));
    out.extend(reverse(&q));
    out
}

/// The uncorrected four-leg recursion: legs `A, Q, A^-1, Q^-1` with
/// `tau = |s|^(1/k)` and the sign of `s` carried by the outer leg.
pub fn raw_bracket_path(beta: &MultiIndex, m: usize, s: f64) -> Legs {
    if s == 0.0 {
        return Vec::new();
    }
    let tau = s.abs().powf(1.0 / beta.len() as f64);
    commutator_legs(beta.entries(), m, tau, s.signum())
}

/// A corrected bracket path and its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketPath {
    pub legs: Legs,
    pub endpoint: Vec<f64>,
    pub endpoint_error: f64,
    /// Endpoint error after the raw path and after each correction round.
    pub residual_history: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Steers from `p` toward `target` by bracket paths along a greedy basis of
/// commutators at the current point, re-solving after every round.
pub fn correct_endpoint(frame: &Frame, table: &CommutatorTable, compiled: &CompiledFrame, p: &[f64], target: &[f64], tol: f64) -> Result<(Legs, Vec<f64>, Vec<f64>)> {
    let n = frame.dimension();
    let m = frame.num_generators();
    let fields: Vec<_> = table.iter().map(|(b, f)| (b.clone(), f.compile())).collect();
    let mut legs = Vec::new();
    let mut x = p.to_vec();
    let mut history = vec![dist(&x, target)];
    let mut best = history[0];
    let mut since_best = 0;
    for _ in 0..MAX_CORRECTIONS {
        let r: Vec<f64> = target.iter().zip(&x).map(|(a, b)| a - b).collect();
        if *history.last().unwrap() <= tol {
            return Ok((legs, x, history));
        }
        let mut ech = NumericEchelon::new(1e-8);
        let mut chosen = Vec::new();
        for (b, f) in &fields {
            let v = f.eval(&x);
            if ech.insert(&v) {
                chosen.push((b, v));
                if chosen.len() == n {
                    break;
                }
            }
        }
        if chosen.len() < n {
            return Err(Error::NotBracketGenerating { cap: table.cap() });
        }
        let cols: Vec<Vec<f64>> = chosen.iter().map(|c| c.1.clone()).collect();
        let c = solve_columns(&cols, &r).ok_or_else(|| Error::CorrectionStalled { history: history.clone() })?;
        let mut round = Vec::new();
        for ((b, _), cj) in chosen.iter().zip(&c) {
            if cj.abs() > 0.0 {
                round.extend(raw_bracket_path(b, m, *cj));
            }
        }
        let next = lift_endpoint(compiled, &x, &round, PATH_LIFT_TOL)?;
        let e = dist(&next, target);
        history.push(e);
        legs.extend(round);
        x = next;
        if e < 0.9 * best {
            best = e;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 4 || !e.is_finite() {
                return Err(Error::CorrectionStalled { history });
            }
        }
    }
    if *history.last().unwrap() <= tol {
        Ok((legs, x, history))
    } else {
        Err(Error::CorrectionStalled { history })
    }
}

/// Path from `x` whose endpoint matches `target` within `tol`, built from the
/// raw commutator path for `(beta, s)` followed by correction rounds.
pub fn steer_with_bracket(frame: &Frame, beta: &MultiIndex, s: f64, x: &[f64], target: &[f64], tol: f64) -> Result<BracketPath> {
    let m = frame.num_generators();
    let compiled = frame.compile();
    let mut legs = raw_bracket_path(beta, m, s);
    let p = lift_endpoint(&compiled, x, &legs, PATH_LIFT_TOL)?;
    let cap = (beta.len() + 1).max(crate::bracket::DEFAULT_CAP.min(frame.dimension() + 2));
    let table = CommutatorTable::build(frame, cap)?;
    let (more, end, history) = correct_endpoint(frame, &table, &compiled, &p, target, tol)?;
    legs.extend(more);
    Ok(BracketPath { endpoint_error: dist(&end, target), endpoint: end, legs, residual_history: history })
}

/// Horizontal path from `x` to `exp(s X_beta)(x)` within `tol`.
pub fn synthesize_bracket_path(frame: &Frame, beta: &MultiIndex, s: f64, x: &[f64], tol: f64) -> Result<BracketPath> {
    if s == 0.0 {
        return Ok(BracketPath { legs: vec![], endpoint: x.to_vec(), endpoint_error: 0.0, residual_history: vec![0.0] });
    }
    let z = iterated_commutator(frame, beta)?;
    let target = flow(&z, x, s, 1e-14)?;
    steer_with_bracket(frame, beta, s, x, &target, tol)
}
