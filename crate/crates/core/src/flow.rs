//! Flows of polynomial vector fields, exponential coordinates, horizontal
//! lifts of piecewise-constant controls, and sub-Riemannian length.

use serde::{Deserialize, Serialize};

use crate::bracket::{AdaptedBasis, CompiledField, CompiledFrame, Frame, MetricF64, VectorField};
use crate::error::{check_dim, Error, Result};
use crate::polynomial::to_f64;

/// Default integrator tolerance per unit time.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Newton tolerance for inverting exponential coordinates.
pub const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;
const MAX_SUBSTEPS: usize = 1 << 22;

/// Classical fourth-order Runge-Kutta with `steps` equal substeps.
pub fn rk4_fixed<F>(f: &F, x0: &[f64], t: f64, steps: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let h = t / steps as f64;
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..steps {
        f(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

/// Fixed-step RK4 for a time-dependent right-hand side; returns all grid states.
pub fn rk4_time_varying<F>(f: &F, t0: f64, x0: &[f64], t1: f64, steps: usize) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let h = (t1 - t0) / steps as f64;
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        f(t, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        f(t + h, &tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(x.clone());
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Adaptive driver: doubles the substep count until the Richardson estimate
/// `|y_2n - y_n| / 15` is within `tol * |t|`. `rate` carries substeps per unit
/// time between calls.
fn integrate_adaptive<F>(f: &F, x0: &[f64], t: f64, tol: f64, rate: &mut f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let mut steps = ((*rate * t.abs()).ceil() as usize).max(1);
    let mut prev_err = f64::INFINITY;
    loop {
        let coarse = rk4_fixed(f, x0, t, steps);
        let fine = rk4_fixed(f, x0, t, 2 * steps);
        if fine.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepUnderflow { steps: 2 * steps });
        }
        let err = max_abs_diff(&fine, &coarse) / 15.0;
        let scale = 1.0 + fine.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // below ~1e-13 the estimate hits roundoff: accept once it stops
        // shrinking at fourth order
        let plateau = err > prev_err / 4.0 && err <= 1e-11 * scale;
        if err <= (tol * t.abs()).max(1e-15 * scale) || plateau {
            if prev_err.is_finite() {
                *rate = (2 * steps) as f64 / t.abs();
            } else if err < tol * t.abs() / 64.0 {
                *rate = (*rate / 2.0).max(1.0);
            }
            return Ok(fine);
        }
        prev_err = err;
        steps *= 2;
        if steps > MAX_SUBSTEPS {
            return Err(Error::StepUnderflow { steps });
        }
    }
}

/// Solution of `x' = X(x)` at time `t` from `x0`.
pub fn flow(field: &VectorField, x0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    check_dim(field.dimension(), x0.len())?;
    flow_compiled(&field.compile(), x0, t, tol)
}

pub fn flow_compiled(field: &CompiledField, x0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    let mut rate = 4.0;
    integrate_adaptive(&|x: &[f64], out: &mut [f64]| field.eval_into(x, out), x0, t, tol, &mut rate)
}

/// Exponential coordinates induced by an adapted basis at its base point.
pub struct ExpCoords {
    base: Vec<f64>,
    fields: Vec<CompiledField>,
    tol: f64,
}

impl ExpCoords {
    pub fn new(basis: &AdaptedBasis, tol: f64) -> Self {
        ExpCoords {
            base: basis.base_point.iter().map(to_f64).collect(),
            fields: basis.fields.iter().map(VectorField::compile).collect(),
            tol,
        }
    }

    pub fn dimension(&self) -> usize {
        self.base.len()
    }

    /// `exp(sum_i c_i X_i)(base)`.
    pub fn first_kind(&self, coords: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.fields.len(), coords.len())?;
        let f = |x: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|o| *o = 0.0);
            for (g, &c) in self.fields.iter().zip(coords) {
                g.accumulate(x, c, out);
            }
        };
        let mut rate = 8.0;
        integrate_adaptive(&f, &self.base, 1.0, self.tol, &mut rate)
    }

    /// `exp(c_1 X_1) o ... o exp(c_n X_n)(base)`, rightmost factor first.
    pub fn second_kind(&self, coords: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.fields.len(), coords.len())?;
        let mut x = self.base.clone();
        for (g, &c) in self.fields.iter().zip(coords).rev() {
            x = flow_compiled(g, &x, c, self.tol)?;
        }
        Ok(x)
    }

    pub fn first_kind_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        newton_invert(|c| self.first_kind(c), x, self.dimension())
    }

    pub fn second_kind_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        newton_invert(|c| self.second_kind(c), x, self.dimension())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Damped Newton with a central finite-difference Jacobian.
fn newton_invert<F>(forward: F, target: &[f64], n: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    check_dim(n, target.len())?;
    let mut c = vec![0.0; n];
    let residual = |c: &[f64]| -> Result<Vec<f64>> {
        let y = forward(c)?;
        Ok(y.iter().zip(target).map(|(a, b)| a - b).collect())
    };
    let mut r = residual(&c)?;
    let mut rn = norm(&r);
    for _ in 0..NEWTON_MAX_ITER {
        if rn <= NEWTON_TOL {
            return Ok(c);
        }
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + c[j].abs());
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[j] += h;
            cm[j] -= h;
            let fp = forward(&cp)?;
            let fm = forward(&cm)?;
            cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = crate::linalg::solve_columns(&cols, &neg)
            .ok_or(Error::NewtonDiverged { iterations: 0, residual: rn })?;
        let mut damp = 1.0;
        loop {
            let trial: Vec<f64> = c.iter().zip(&step).map(|(a, d)| a + damp * d).collect();
            let rt = residual(&trial)?;
            let rtn = norm(&rt);
            if rtn < rn || damp < 1e-6 {
                c = trial;
                r = rt;
                rn = rtn;
                break;
            }
            damp *= 0.5;
        }
    }
    if rn <= NEWTON_TOL {
        Ok(c)
    } else {
        Err(Error::NewtonDiverged { iterations: NEWTON_MAX_ITER, residual: rn })
    }
}

/// A horizontal curve given by piecewise-constant controls on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalCurve {
    pub base_point: Vec<f64>,
    pub times: Vec<f64>,
    /// One control vector per interval `[times[k], times[k+1]]`.
    pub controls: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<f64>>>,
}

impl HorizontalCurve {
    pub fn new(base_point: Vec<f64>, times: Vec<f64>, controls: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != controls.len() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} times for {} control intervals",
                times.len(),
                controls.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridMismatch("time grid must be strictly increasing".into()));
        }
        if let Some(m) = controls.first().map(Vec::len) {
            for c in &controls {
                check_dim(m, c.len())?;
            }
        }
        Ok(HorizontalCurve { base_point, times, controls, states: None })
    }

    /// Controls given as `(duration, control)` legs starting at time 0.
    pub fn from_legs(base_point: Vec<f64>, legs: &[(f64, Vec<f64>)]) -> Result<Self> {
        let mut times = vec![0.0];
        let mut controls = Vec::new();
        for (d, u) in legs {
            if *d <= 0.0 {
                continue;
            }
            times.push(times.last().unwrap() + d);
            controls.push(u.clone());
        }
        Self::new(base_point, times, controls)
    }

    /// Resamples piecewise-linear controls (values at the knots) to
    /// piecewise-constant ones, `substeps` intervals per knot interval,
    /// using the midpoint value on each subinterval.
    pub fn from_piecewise_linear(base_point: Vec<f64>, knots: &[f64], values: &[Vec<f64>], substeps: usize) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::GridMismatch("piecewise-linear controls need matching knots and values".into()));
        }
        let mut times = vec![knots[0]];
        let mut controls = Vec::new();
        for k in 0..knots.len() - 1 {
            let (t0, t1) = (knots[k], knots[k + 1]);
            for s in 0..substeps {
                let a = (s as f64 + 0.5) / substeps as f64;
                controls.push(values[k].iter().zip(&values[k + 1]).map(|(p, q)| p + a * (q - p)).collect());
                times.push(t0 + (t1 - t0) * (s + 1) as f64 / substeps as f64);
            }
        }
        Self::new(base_point, times, controls)
    }

    pub fn num_intervals(&self) -> usize {
        self.controls.len()
    }

    pub fn durations(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }

    pub fn legs(&self) -> Vec<(f64, Vec<f64>)> {
        self.durations().zip(self.controls.iter().cloned()).collect()
    }

    pub fn endpoint(&self) -> Option<&Vec<f64>> {
        self.states.as_ref().and_then(|s| s.last())
    }

    /// Same geometric curve traversed backwards.
    pub fn reversed_legs(&self) -> Vec<(f64, Vec<f64>)> {
        self.legs().into_iter().rev().map(|(d, u)| (d, u.iter().map(|v| -v).collect())).collect()
    }

    /// Controls multiplied by `factor` on the same grid.
    pub fn scaled_legs(&self, factor: f64) -> Vec<(f64, Vec<f64>)> {
        self.legs().into_iter().map(|(d, u)| (d, u.iter().map(|v| factor * v).collect())).collect()
    }

    /// Time-reparameterization with the same geometric controls.
    pub fn rescale_time(&self, factor: f64) -> HorizontalCurve {
        HorizontalCurve {
            base_point: self.base_point.clone(),
            times: self.times.iter().map(|t| t * factor).collect(),
            controls: self.controls.iter().map(|u| u.iter().map(|v| v / factor).collect()).collect(),
            states: None,
        }
    }
}

/// Length of a piecewise-constant control sequence, exact up to rounding.
pub fn legs_length(legs: &[(f64, Vec<f64>)], metric: &MetricF64) -> f64 {
    legs.iter().map(|(d, u)| d * metric.norm(u)).sum()
}

/// `sum_k (t_(k+1) - t_k) sqrt(u_k^T g u_k)`.
pub fn curve_length(curve: &HorizontalCurve, metric: &MetricF64) -> f64 {
    curve.durations().zip(&curve.controls).map(|(d, u)| d * metric.norm(u)).sum()
}

/// Integrates `x' = sum_j u_j X_j(x)` interval by interval.
pub fn horizontal_lift(frame: &Frame, curve: &HorizontalCurve, tol: f64) -> Result<HorizontalCurve> {
    lift_compiled(&frame.compile(), curve, tol)
}

pub fn lift_compiled(frame: &CompiledFrame, curve: &HorizontalCurve, tol: f64) -> Result<HorizontalCurve> {
    check_dim(frame.dimension, curve.base_point.len())?;
    for u in &curve.controls {
        check_dim(frame.num_generators(), u.len())?;
    }
    let mut states = Vec::with_capacity(curve.times.len());
    let mut x = curve.base_point.clone();
    states.push(x.clone());
    let mut rate = 4.0;
    for (d, u) in curve.durations().zip(&curve.controls) {
        let f = |y: &[f64], out: &mut [f64]| frame.velocity(y, u, out);
        x = integrate_adaptive(&f, &x, d, tol, &mut rate)?;
        states.push(x.clone());
    }
    let mut out = curve.clone();
    out.states = Some(states);
    Ok(out)
}

/// Endpoint of the lift of `legs` from `start`.
pub fn lift_endpoint(frame: &CompiledFrame, start: &[f64], legs: &[(f64, Vec<f64>)], tol: f64) -> Result<Vec<f64>> {
    check_dim(frame.dimension, start.len())?;
    let mut x = start.to_vec();
    let mut rate = 4.0;
    for (d, u) in legs {
        if *d == 0.0 || u.iter().all(|v| *v == 0.0) {
            continue;
        }
        let f = |y: &[f64], out: &mut [f64]| frame.velocity(y, u, out);
        x = integrate_adaptive(&f, &x, *d, tol, &mut rate)?;
    }
    Ok(x)
}

/// Concatenates curves, re-basing each on the previous endpoint. Gaps above
/// `1e-9` between a segment's base point and the previous endpoint are errors.
pub fn concatenate(frame: &Frame, parts: &[HorizontalCurve], tol: f64) -> Result<HorizontalCurve> {
    let first = parts.first().ok_or_else(|| Error::GridMismatch("nothing to concatenate".into()))?;
    let mut legs = Vec::new();
    let mut end = first.base_point.clone();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            let gap = max_abs_diff(&p.base_point, &end);
            if gap > 1e-9 {
                return Err(Error::GridMismatch(format!("gap {gap:e} before segment {i}")));
            }
        }
        let lifted = horizontal_lift(frame, p, tol)?;
        end = lifted.endpoint().unwrap().clone();
        legs.extend(p.legs());
    }
    horizontal_lift(frame, &HorizontalCurve::from_legs(first.base_point.clone(), &legs)?, tol)
}

/// Lift of a time-varying control law by fixed-step RK4; returns grid states.
pub fn lift_time_varying<U>(frame: &Frame, control: U, start: &[f64], t0: f64, t1: f64, steps: usize) -> Result<Vec<Vec<f64>>>
where
    U: Fn(f64) -> Vec<f64>,
{
    check_dim(frame.dimension(), start.len())?;
    let cf = frame.compile();
    let f = |t: f64, x: &[f64], out: &mut [f64]| cf.velocity(x, &control(t), out);
    Ok(rk4_time_varying(&f, t0, start, t1, steps))
}
