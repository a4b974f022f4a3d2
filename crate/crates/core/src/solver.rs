//! Upper bounds on sub-Riemannian distance by direct transcription:
//! piecewise-constant controls on a uniform grid, an energy objective with
//! an augmented endpoint penalty under continuation, Levenberg-Marquardt
//! descent, a min-norm Newton projection onto the endpoint and a feasible
//! descent along the constraint.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::{CompiledFrame, Frame, MetricF64, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::flow::{curve_length, lift_compiled, HorizontalCurve};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub steps: usize,
    pub restarts: usize,
    pub seed: u64,
    pub mu0: f64,
    pub mu_factor: f64,
    pub mu_max: f64,
    /// Levenberg-Marquardt iterations per penalty stage.
    pub iterations: usize,
    /// Endpoint tolerance of the returned curve.
    pub tol: f64,
    /// RK4 substeps per control interval during descent.
    pub substeps: usize,
    /// Relative amplitude of the random restart perturbations.
    pub perturbation: f64,
    /// Integrator tolerance for the final re-integration check.
    pub lift_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            steps: 64,
            restarts: 16,
            seed: 0,
            mu0: 10.0,
            mu_factor: 10.0,
            mu_max: 1e8,
            iterations: 40,
            tol: 1e-6,
            substeps: 4,
            perturbation: 0.5,
            lift_tol: 1e-12,
        }
    }
}

/// One descent iteration of one restart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryRow {
    pub restart: usize,
    pub stage: usize,
    pub mu: f64,
    pub iteration: usize,
    pub objective: f64,
    pub length: f64,
    pub endpoint_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub origin: String,
    pub length: Option<f64>,
    pub endpoint_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub length: f64,
    pub endpoint_error: f64,
    pub restart: usize,
    pub seed: u64,
    pub config: SolveConfig,
    pub curve: HorizontalCurve,
    pub restarts: Vec<RestartSummary>,
    #[serde(skip)]
    pub history: Vec<HistoryRow>,
}

struct Problem {
    frame: CompiledFrame,
    metric: MetricF64,
    start: Vec<f64>,
    target: Vec<f64>,
    n: usize,
    m: usize,
    steps: usize,
    substeps: usize,
}

impl Problem {
    fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    fn interval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        crate::flow::rk4_fixed(&|y: &[f64], out: &mut [f64]| self.frame.velocity(y, u, out), x, self.dt(), self.substeps)
    }

    fn states(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let mut xs = Vec::with_capacity(self.steps + 1);
        xs.push(self.start.clone());
        for k in 0..self.steps {
            let next = self.interval(&xs[k], &u[k * self.m..(k + 1) * self.m]);
            xs.push(next);
        }
        xs
    }

    fn endpoint(&self, u: &[f64]) -> Vec<f64> {
        self.states(u).pop().unwrap()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.dt() * u.chunks(self.m).map(|c| self.metric.quadratic(c)).sum::<f64>()
    }

    fn length(&self, u: &[f64]) -> f64 {
        self.dt() * u.chunks(self.m).map(|c| self.metric.norm(c)).sum::<f64>()
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        self.endpoint(u).iter().zip(&self.target).map(|(a, b)| a - b).collect()
    }

    /// Endpoint and its control Jacobian, from central differences of each
    /// interval map chained backwards.
    fn jacobian(&self, u: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let (n, m) = (self.n, self.m);
        let xs = self.states(u);
        let mut jac = DMatrix::zeros(n, self.steps * m);
        let mut p = DMatrix::<f64>::identity(n, n);
        for k in (0..self.steps).rev() {
            let uk = &u[k * m..(k + 1) * m];
            let xk = &xs[k];
            let mut du = DMatrix::zeros(n, m);
            for j in 0..m {
                let h = 1e-6 * (1.0 + uk[j].abs());
                let (mut up, mut um) = (uk.to_vec(), uk.to_vec());
                up[j] += h;
                um[j] -= h;
                let (fp, fm) = (self.interval(xk, &up), self.interval(xk, &um));
                for i in 0..n {
                    du[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            let mut dx = DMatrix::zeros(n, n);
            for j in 0..n {
                let h = 1e-6 * (1.0 + xk[j].abs());
                let (mut xp, mut xm) = (xk.clone(), xk.clone());
                xp[j] += h;
                xm[j] -= h;
                let (fp, fm) = (self.interval(&xp, uk), self.interval(&xm, uk));
                for i in 0..n {
                    dx[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            jac.view_mut((0, k * m), (n, m)).copy_from(&(&p * du));
            p = &p * dx;
        }
        (xs.pop_last(), jac)
    }

    fn metric_block(&self) -> DMatrix<f64> {
        let big = self.steps * self.m;
        let mut h = DMatrix::zeros(big, big);
        for k in 0..self.steps {
            for a in 0..self.m {
                for b in 0..self.m {
                    h[(k * self.m + a, k * self.m + b)] = self.dt() * self.metric.g[a][b];
                }
            }
        }
        h
    }
}

trait PopLast {
    fn pop_last(self) -> Vec<f64>;
}

impl PopLast for Vec<Vec<f64>> {
    fn pop_last(mut self) -> Vec<f64> {
        self.pop().unwrap()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Min-norm Newton steps `d = -J^T (J J^T + lam I)^-1 r` until the residual stops improving.
fn project(problem: &Problem, u: &mut Vec<f64>, goal: f64, max_iter: usize) -> f64 {
    let mut r = problem.residual(u);
    let mut rn = norm(&r);
    // near abnormal controls J J^T is badly conditioned and the undamped
    // step overshoots; lam grows only when a step fails
    let mut lam = 0.0;
    for _ in 0..max_iter {
        if rn <= goal {
            break;
        }
        let (_, j) = problem.jacobian(u);
        let jjt = &j * j.transpose();
        let scale = jjt.diagonal().max().max(1e-300);
        let mut improved = false;
        while lam <= 1e6 * scale {
            let mut a = jjt.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lam;
            }
            if let Some(y) = a.lu().solve(&DVector::from_column_slice(&r)) {
                let d = -(j.transpose() * y);
                let trial: Vec<f64> = u.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
                let rt = problem.residual(&trial);
                let rtn = norm(&rt);
                if rtn < rn {
                    *u = trial;
                    r = rt;
                    rn = rtn;
                    improved = true;
                    lam /= 10.0;
                    if lam < 1e-12 * scale {
                        lam = 0.0;
                    }
                    break;
                }
            }
            lam = if lam == 0.0 { 1e-10 * scale } else { lam * 10.0 };
        }
        if !improved {
            break;
        }
    }
    rn
}

/// Feasible descent from an admissible point: the energy gradient projected
/// onto the tangent space of the endpoint constraint, then re-projected onto
/// the constraint. Steps that leave the tolerance or raise the energy are
/// halved away.
fn refine(problem: &Problem, u: &mut Vec<f64>, tol: f64, iterations: usize) {
    let gblock = problem.metric_block();
    let mut energy = problem.energy(u);
    let mut alpha = 1.0;
    for _ in 0..iterations {
        let (_, j) = problem.jacobian(u);
        let grad = &gblock * DVector::from_column_slice(u);
        let Some(y) = (&j * j.transpose()).lu().solve(&(&j * &grad)) else { break };
        let d = -(grad - j.transpose() * y);
        if d.norm() <= 1e-12 * (1.0 + norm(u)) {
            break;
        }
        let mut moved = false;
        while alpha > 1e-6 {
            let mut trial: Vec<f64> = u.iter().zip(d.iter()).map(|(a, b)| a + alpha * b).collect();
            let r = project(problem, &mut trial, 1e-3 * tol, 6);
            let e = problem.energy(&trial);
            if r <= 0.1 * tol && e < energy {
                *u = trial;
                energy = e;
                alpha = (alpha * 2.0).min(1e3);
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
}

fn descend(problem: &Problem, u0: Vec<f64>, cfg: &SolveConfig, restart: usize) -> (Vec<f64>, Vec<HistoryRow>) {
    let mut u = u0;
    let mut history = Vec::new();
    let gblock = problem.metric_block();
    let big = u.len();
    let mut mu = cfg.mu0;
    let mut stage = 0;
    // multiplier estimate for the endpoint constraint; without it the
    // residual only decays like 1/mu, far too slowly near abnormal controls
    let mut y = vec![0.0; problem.n];
    while mu <= cfg.mu_max * (1.0 + 1e-12) {
        let mut lam = 1e-3;
        let objective = |u: &[f64]| {
            let r = problem.residual(u);
            problem.energy(u) + r.iter().zip(&y).map(|(v, l)| l * v + mu * v * v).sum::<f64>()
        };
        let mut f = objective(&u);
        for it in 0..cfg.iterations {
            let (e, j) = problem.jacobian(&u);
            let r: Vec<f64> = e.iter().zip(&problem.target).map(|(a, b)| a - b).collect();
            let rv = DVector::from_column_slice(&r) * (2.0 * mu) + DVector::from_column_slice(&y);
            let uv = DVector::from_column_slice(&u);
            let g = &gblock * &uv + j.transpose() * &rv;
            let h = &gblock + (j.transpose() * &j) * (2.0 * mu);
            let mut accepted = None;
            while lam < 1e14 {
                let mut a = h.clone();
                for i in 0..big {
                    a[(i, i)] += lam * (h[(i, i)] + 1e-12);
                }
                if let Some(d) = a.cholesky().map(|c| c.solve(&(-&g))) {
                    let trial: Vec<f64> = u.iter().zip(d.iter()).map(|(p, q)| p + q).collect();
                    let ft = objective(&trial);
                    if ft.is_finite() && ft < f {
                        accepted = Some((trial, ft, norm(d.as_slice())));
                        lam = (lam / 3.0).max(1e-12);
                        break;
                    }
                }
                lam *= 4.0;
            }
            let Some((trial, ft, step)) = accepted else { break };
            let decrease = f - ft;
            u = trial;
            f = ft;
            history.push(HistoryRow {
                restart,
                stage,
                mu,
                iteration: it,
                objective: f,
                length: problem.length(&u),
                endpoint_error: norm(&problem.residual(&u)),
            });
            if step <= 1e-10 * (1.0 + norm(&u)) || decrease <= 1e-13 * f.abs().max(1e-300) {
                break;
            }
        }
        for (l, v) in y.iter_mut().zip(problem.residual(&u)) {
            *l += 2.0 * mu * v;
        }
        mu *= cfg.mu_factor;
        stage += 1;
    }
    (u, history)
}

/// Smooth random perturbation of a base control sequence.
fn perturbed(base: &[f64], m: usize, steps: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let modes = 3;
    let coeffs: Vec<(f64, f64)> = (0..modes * m).map(|_| (rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)).collect();
    let mut u = base.to_vec();
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64;
        for j in 0..m {
            for f in 0..modes {
                let (a, b) = coeffs[f * m + j];
                let w = std::f64::consts::PI * (f + 1) as f64;
                u[k * m + j] += amplitude * (a * (w * t).sin() + b * (w * t).cos()) / (f + 1) as f64;
            }
        }
    }
    u
}

/// Constant controls that best match the chord at the start point.
fn least_squares_constant(problem: &Problem) -> Vec<f64> {
    let (n, m) = (problem.n, problem.m);
    let mut a = DMatrix::zeros(n, m);
    let mut col = vec![0.0; n];
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        problem.frame.velocity(&problem.start, &e, &mut col);
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    let b = DVector::from_iterator(n, problem.target.iter().zip(&problem.start).map(|(y, x)| y - x));
    let sol = a.clone().svd(true, true).solve(&b, 1e-12).map(|s| s.iter().cloned().collect::<Vec<f64>>()).unwrap_or(vec![0.0; m]);
    (0..problem.steps).flat_map(|_| sol.clone()).collect()
}

/// Samples a leg sequence on the uniform grid of `[0, 1]`, preserving the path.
pub fn resample_legs(legs: &[(f64, Vec<f64>)], steps: usize) -> Vec<f64> {
    let total: f64 = legs.iter().map(|l| l.0).sum();
    let mut out = Vec::new();
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64 * total;
        let mut acc = 0.0;
        let mut chosen = &legs.last().unwrap().1;
        for (d, u) in legs {
            if t < acc + d {
                chosen = u;
                break;
            }
            acc += d;
        }
        out.extend(chosen.iter().map(|v| v * total));
    }
    out
}

fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("SRGEO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

/// Constant-speed reparameterization on `[0, 1]`; zero-speed intervals are dropped.
pub fn constant_speed(curve: &HorizontalCurve, metric: &MetricF64) -> Result<HorizontalCurve> {
    let total = curve_length(curve, metric);
    if total == 0.0 {
        return Ok(curve.clone());
    }
    let mut legs = Vec::new();
    for (d, u) in curve.legs() {
        let s = metric.norm(&u);
        if s == 0.0 {
            continue;
        }
        legs.push((d * s / total, u.iter().map(|v| v * total / s).collect::<Vec<f64>>()));
    }
    let mut times = vec![0.0];
    let mut acc = 0.0;
    for (i, (d, _)) in legs.iter().enumerate() {
        acc += d;
        times.push(if i + 1 == legs.len() { 1.0 } else { acc });
    }
    HorizontalCurve::new(curve.base_point.clone(), times, legs.into_iter().map(|l| l.1).collect())
}

/// Best admissible curve found from `from` to `to`.
pub fn upper_bound_distance(frame: &Frame, from: &[f64], to: &[f64], cfg: &SolveConfig) -> Result<SolveResult> {
    upper_bound_distance_with_inits(frame, from, to, cfg, &[])
}

/// As [`upper_bound_distance`], with extra initial control sequences given as
/// leg lists; each is resampled onto the solver grid.
pub fn upper_bound_distance_with_inits(
    frame: &Frame,
    from: &[f64],
    to: &[f64],
    cfg: &SolveConfig,
    inits: &[Vec<(f64, Vec<f64>)>],
) -> Result<SolveResult> {
    check_dim(frame.dimension(), from.len())?;
    check_dim(frame.dimension(), to.len())?;
    if cfg.steps == 0 || cfg.restarts == 0 || cfg.substeps == 0 {
        return Err(Error::SolverFailed("steps, restarts and substeps must be positive".into()));
    }
    let problem = Problem {
        frame: frame.compile(),
        metric: frame.metric().to_f64(),
        start: from.to_vec(),
        target: to.to_vec(),
        n: frame.dimension(),
        m: frame.num_generators(),
        steps: cfg.steps,
        substeps: cfg.substeps,
    };
    let fine = Problem { substeps: cfg.substeps * 8, frame: problem.frame.clone(), metric: problem.metric.clone(), start: problem.start.clone(), target: problem.target.clone(), ..problem };
    let m = fine.m;
    let base = least_squares_constant(&fine);
    let scale = base.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let mut starts: Vec<(String, Vec<f64>)> = inits.iter().enumerate().map(|(i, l)| (format!("init{i}"), resample_legs(l, cfg.steps))).collect();
    starts.push(("least-squares".into(), base.clone()));
    let mut r = 0u64;
    while starts.len() < cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r);
        starts.push((format!("perturbed{r}"), perturbed(&base, m, cfg.steps, cfg.perturbation * scale, &mut rng)));
        r += 1;
    }
    starts.truncate(cfg.restarts.max(inits.len() + 1));
    let coarse = Problem { frame: fine.frame.clone(), metric: fine.metric.clone(), start: fine.start.clone(), target: fine.target.clone(), substeps: cfg.substeps, ..fine };

    let outcomes: Vec<(Vec<f64>, Vec<HistoryRow>)> = thread_pool().install(|| {
        starts
            .par_iter()
            .enumerate()
            .map(|(i, (_, u0))| {
                // the start itself competes when it projects onto the endpoint
                let mut direct = u0.clone();
                let direct_ok = project(&fine, &mut direct, 1e-13, 200) <= 0.1 * cfg.tol;
                let (mut u, hist) = descend(&coarse, u0.clone(), cfg, i);
                let descended_ok = project(&fine, &mut u, 1e-13, 200) <= 0.1 * cfg.tol;
                if direct_ok && (!descended_ok || fine.length(&direct) < fine.length(&u)) {
                    u = direct;
                }
                if direct_ok || descended_ok {
                    refine(&fine, &mut u, cfg.tol, cfg.iterations);
                }
                (u, hist)
            })
            .collect()
    });

    let mut summaries = Vec::new();
    let mut best: Option<(f64, usize, HorizontalCurve, f64)> = None;
    for (i, ((origin, _), (u, _))) in starts.iter().zip(&outcomes).enumerate() {
        let legs: Vec<Vec<f64>> = u.chunks(m).map(|c| c.to_vec()).collect();
        let times: Vec<f64> = (0..=cfg.steps).map(|k| k as f64 / cfg.steps as f64).collect();
        let curve = HorizontalCurve::new(from.to_vec(), times, legs)?;
        let (length, err) = match lift_compiled(&fine.frame, &curve, cfg.lift_tol) {
            Ok(l) => (curve_length(&curve, &fine.metric), norm(&l.endpoint().unwrap().iter().zip(to).map(|(a, b)| a - b).collect::<Vec<_>>())),
            Err(_) => (f64::INFINITY, f64::INFINITY),
        };
        let ok = err <= cfg.tol && length.is_finite();
        summaries.push(RestartSummary { restart: i, origin: origin.clone(), length: ok.then_some(length), endpoint_error: err });
        if ok && best.as_ref().is_none_or(|b| length < b.0) {
            best = Some((length, i, curve, err));
        }
    }
    let Some((_, idx, curve, _)) = best else {
        return Err(Error::SolverFailed(format!(
            "no restart reached endpoint tolerance {:e}; best error {:e}",
            cfg.tol,
            summaries.iter().map(|s| s.endpoint_error).fold(f64::INFINITY, f64::min)
        )));
    };
    let curve = constant_speed(&curve, &fine.metric)?;
    let lifted = lift_compiled(&fine.frame, &curve, cfg.lift_tol)?;
    let err = norm(&lifted.endpoint().unwrap().iter().zip(to).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(SolveResult {
        length: curve_length(&curve, &fine.metric),
        endpoint_error: err,
        restart: idx,
        seed: cfg.seed,
        config: cfg.clone(),
        curve,
        restarts: summaries,
        history: outcomes.into_iter().nth(idx).unwrap().1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CornerGap {
    pub corner_length: f64,
    pub upper_bound: f64,
    pub margin: f64,
    pub result: SolveResult,
}

/// `L(corner) - upper bound on d(endpoints)`; positive means the corner is
/// not length minimizing.
pub fn corner_gap(frame: &Frame, corner: &HorizontalCurve, cfg: &SolveConfig) -> Result<CornerGap> {
    let metric = frame.metric().to_f64();
    let lifted = lift_compiled(&frame.compile(), corner, cfg.lift_tol)?;
    let end = lifted.endpoint().unwrap().clone();
    let corner_length = curve_length(corner, &metric);
    let result = upper_bound_distance_with_inits(frame, &corner.base_point, &end, cfg, &[corner.legs()])?;
    Ok(CornerGap { corner_length, upper_bound: result.length, margin: corner_length - result.length, result })
}

/// One sample of a bracket-path length fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NswSample {
    pub s: f64,
    pub length: f64,
    pub endpoint_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NswFit {
    pub multi_index: MultiIndex,
    pub slope: f64,
    pub intercept: f64,
    pub samples: Vec<NswSample>,
}

/// Least-squares slope of `log(length)` against `log(s)` for paths that reach
/// `exp(s X_beta)(x)`.
pub fn nsw_exponent_fit(frame: &Frame, beta: &MultiIndex, x: &[f64], s_values: &[f64], tol: f64) -> Result<NswFit> {
    if s_values.len() < 2 || s_values.iter().any(|s| *s <= 0.0) {
        return Err(Error::SolverFailed("need at least two positive s values".into()));
    }
    let (lo, hi) = s_values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), s| (a.min(*s), b.max(*s)));
    if hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::SolverFailed("s values must span at least two decades".into()));
    }
    let metric = frame.metric().to_f64();
    let mut samples = Vec::new();
    for &s in s_values {
        let path = crate::shortener::synthesize_bracket_path(frame, beta, s, x, tol * s)?;
        samples.push(NswSample { s, length: crate::flow::legs_length(&path.legs, &metric), endpoint_error: path.endpoint_error });
    }
    let (slope, intercept) = fit_line(&samples.iter().map(|p| (p.s.ln(), p.length.ln())).collect::<Vec<_>>());
    Ok(NswFit { multi_index: beta.clone(), slope, intercept, samples })
}

/// Ordinary least squares `y = a x + b`.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}
