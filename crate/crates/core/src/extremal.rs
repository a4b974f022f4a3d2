//! Abnormal extremals of the R^4 frame `X1 = d1 + 2 x2 d3 + x3^2 d4`,
//! `X2 = d2 - 2 x1 d3`: the adjoint system, the polynomial dual curve, the
//! closed-form smooth family and the planar characteristic field.

use serde::{Deserialize, Serialize};

use crate::bracket::VectorField;
use crate::error::{check_dim, Error, Result};
use crate::flow::rk4_time_varying;
use crate::polynomial::{rat, ratio, Polynomial, Rational};

pub use crate::models::ag_frame;

/// Dual vector of an abnormal extremal through `gamma`, normalized so that
/// the last component is 1.
pub fn dual_from_state(g: &[f64]) -> [f64; 4] {
    let (g1, g2, g3) = (g[0], g[1], g[2]);
    [-2.0 * g1 * g2 * g3 - g3 * g3, 2.0 * g1 * g1 * g3, g1 * g3, 1.0]
}

pub fn dual_from_state_exact(g: &[Rational]) -> Result<Vec<Rational>> {
    check_dim(4, g.len())?;
    let (g1, g2, g3) = (&g[0], &g[1], &g[2]);
    Ok(vec![
        -(rat(2) * g1 * g2 * g3) - g3 * g3,
        rat(2) * g1 * g1 * g3,
        g1 * g3,
        rat(1),
    ])
}

/// Samples of a dual curve on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCurve {
    pub times: Vec<f64>,
    pub xi: Vec<[f64; 4]>,
}

impl DualCurve {
    pub fn new(times: Vec<f64>, xi: Vec<[f64; 4]>) -> Result<Self> {
        if times.len() != xi.len() {
            return Err(Error::GridMismatch(format!("{} times for {} dual samples", times.len(), xi.len())));
        }
        if xi.iter().any(|v| v.iter().all(|c| *c == 0.0)) {
            return Err(Error::Hypothesis("dual curve vanishes".into()));
        }
        Ok(DualCurve { times, xi })
    }

    /// Dual curve reconstructed pointwise from states.
    pub fn from_states(times: Vec<f64>, states: &[Vec<f64>]) -> Result<Self> {
        for s in states {
            check_dim(4, s.len())?;
        }
        Self::new(times, states.iter().map(|s| dual_from_state(s)).collect())
    }

    pub fn is_normalized(&self) -> bool {
        self.xi.iter().all(|v| v[3] == 1.0)
    }
}

/// Point of the smooth abnormal family
/// `(t, b t - 3/10 c t^-4, c t^-3, -1/5 c^2 t^-5 + d)`.
pub fn closed_family(b: f64, c: f64, d: f64, t: f64) -> Result<[f64; 4]> {
    if t == 0.0 {
        return Err(Error::Singular("the closed family is undefined at t = 0".into()));
    }
    Ok([t, b * t - 0.3 * c * t.powi(-4), c * t.powi(-3), -0.2 * c * c * t.powi(-5) + d])
}

/// Time derivative of [`closed_family`].
pub fn closed_family_velocity(b: f64, c: f64, _d: f64, t: f64) -> Result<[f64; 4]> {
    if t == 0.0 {
        return Err(Error::Singular("the closed family is undefined at t = 0".into()));
    }
    Ok([1.0, b + 1.2 * c * t.powi(-5), -3.0 * c * t.powi(-4), c * c * t.powi(-6)])
}

pub fn closed_family_exact(b: &Rational, c: &Rational, d: &Rational, t: &Rational) -> Result<Vec<Rational>> {
    if *t == rat(0) {
        return Err(Error::Singular("the closed family is undefined at t = 0".into()));
    }
    let inv = t.recip();
    let p = |k: u32| num::pow(inv.clone(), k as usize);
    Ok(vec![
        t.clone(),
        b * t - ratio(3, 10) * c * p(4),
        c * p(3),
        -(ratio(1, 5) * c * c * p(5)) + d,
    ])
}

pub fn closed_family_velocity_exact(b: &Rational, c: &Rational, t: &Rational) -> Result<Vec<Rational>> {
    if *t == rat(0) {
        return Err(Error::Singular("the closed family is undefined at t = 0".into()));
    }
    let inv = t.recip();
    let p = |k: usize| num::pow(inv.clone(), k);
    Ok(vec![rat(1), b + ratio(6, 5) * c * p(5), rat(-3) * c * p(4), c * c * p(6)])
}

/// Uniform samples of the closed family on `[t0, t1]`.
pub fn sample_family(b: f64, c: f64, d: f64, t0: f64, t1: f64, points: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if points < 2 {
        return Err(Error::GridMismatch("need at least two sample points".into()));
    }
    let times: Vec<f64> = (0..points).map(|k| t0 + (t1 - t0) * k as f64 / (points - 1) as f64).collect();
    let states = times.iter().map(|&t| closed_family(b, c, d, t).map(|p| p.to_vec())).collect::<Result<_>>()?;
    Ok((times, states))
}

/// Corner through the origin: `-t x` for `t <= 0`, `t y` for `t > 0`, with
/// constant fourth coordinate `a`.
pub fn corner_curve(x: [f64; 2], y: [f64; 2], a: f64, t: f64) -> [f64; 4] {
    if t <= 0.0 {
        [-t * x[0], -t * x[1], 0.0, a]
    } else {
        [t * y[0], t * y[1], 0.0, a]
    }
}

/// `gamma_1^3 gamma_3` at every sample.
pub fn conserved_quantity(states: &[Vec<f64>]) -> Vec<f64> {
    states.iter().map(|s| s[0].powi(3) * s[2]).collect()
}

/// Sup of `|phi - phi_0|` over the samples.
pub fn conserved_variation(states: &[Vec<f64>]) -> f64 {
    let phi = conserved_quantity(states);
    phi.iter().map(|p| (p - phi[0]).abs()).fold(0.0, f64::max)
}

/// Planar direction field `(2 x1^5, 3c + 2 x1^4 x2)` whose integral curves
/// carry the projections of the smooth abnormal family.
pub fn planar_characteristic_field(c: &Rational) -> VectorField {
    let n = 2;
    let x1 = Polynomial::var(n, 0);
    let x2 = Polynomial::var(n, 1);
    let first = x1.pow(5).scale(&rat(2));
    let second = x1.pow(4).try_mul(&x2).unwrap().scale(&rat(2)).try_add(&Polynomial::constant(n, rat(3) * c)).unwrap();
    VectorField::new(vec![first, second]).unwrap()
}

/// Slope `dx2/dx1` of the characteristic field; undefined on `x1 = 0`.
pub fn characteristic_slope(c: f64, x: &[f64]) -> Result<f64> {
    check_dim(2, x.len())?;
    if x[0] == 0.0 {
        return Err(Error::Singular("characteristic field is singular on x1 = 0".into()));
    }
    Ok((3.0 * c + 2.0 * x[0].powi(4) * x[1]) / (2.0 * x[0].powi(5)))
}

/// `<(3c + 2 g1^4 g2, -2 g1^5), (g1', g2')>`.
pub fn tangency_residual(c: f64, g: &[f64], gdot: &[f64]) -> f64 {
    (3.0 * c + 2.0 * g[0].powi(4) * g[1]) * gdot[0] - 2.0 * g[0].powi(5) * gdot[1]
}

/// Right side of the adjoint system `xi' = (2 g2' xi3, -2 g1' xi3, -2 g3 g1' xi4, 0)`.
pub fn adjoint_rhs(g: &[f64], gdot: &[f64], xi: &[f64]) -> [f64; 4] {
    [2.0 * gdot[1] * xi[2], -2.0 * gdot[0] * xi[2], -2.0 * g[2] * gdot[0] * xi[3], 0.0]
}

/// The three annihilation constraints `<X1, xi> = <X2, xi> = <[X1,X2], xi> = 0`
/// in the form that isolates `xi1, xi2, xi3`.
pub fn constraint_values(g: &[f64], xi: &[f64]) -> [f64; 3] {
    [
        xi[0] + 2.0 * g[1] * xi[2] + g[2] * g[2] * xi[3],
        xi[1] - 2.0 * g[0] * xi[2],
        xi[2] - g[0] * g[2] * xi[3],
    ]
}

/// Sup-norm residuals of a sampled pair `(gamma, xi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbnormalResidual {
    /// Adjoint system, derivatives by five-point finite differences.
    pub ode: f64,
    /// Annihilation constraints (Goh condition included).
    pub constraint: f64,
    /// Horizontality of `gamma` for the frame.
    pub horizontality: f64,
    /// Sup of `|xi4 - 1|`; nonzero means the dual is not normalized.
    pub normalization: f64,
    pub normalized: bool,
}

/// Derivative weights at `times[i]` from the five nearest grid points.
fn stencil(times: &[f64], i: usize) -> (usize, [f64; 5]) {
    let lo = i.saturating_sub(2).min(times.len() - 5);
    let nodes = &times[lo..lo + 5];
    let t = times[i];
    let mut w = [0.0; 5];
    for j in 0..5 {
        // derivative of the Lagrange basis polynomial at t
        let denom: f64 = (0..5).filter(|&m| m != j).map(|m| nodes[j] - nodes[m]).product();
        let mut num = 0.0;
        for k in (0..5).filter(|&k| k != j) {
            num += (0..5).filter(|&m| m != j && m != k).map(|m| t - nodes[m]).product::<f64>();
        }
        w[j] = num / denom;
    }
    (lo, w)
}

/// Derivatives of sampled vectors; differences against the centre sample
/// make constant data differentiate to exactly zero.
pub fn finite_difference(times: &[f64], values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if times.len() != values.len() {
        return Err(Error::GridMismatch(format!("{} times for {} samples", times.len(), values.len())));
    }
    if times.len() < 5 {
        return Err(Error::GridMismatch("finite differences need at least five samples".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("time grid must be strictly increasing".into()));
    }
    Ok((0..times.len())
        .map(|i| {
            let (lo, w) = stencil(times, i);
            (0..values[i].len())
                .map(|c| (0..5).map(|j| w[j] * (values[lo + j][c] - values[i][c])).sum())
                .collect()
        })
        .collect())
}

pub fn abnormal_ode_residual(times: &[f64], states: &[Vec<f64>], xi: &DualCurve) -> Result<AbnormalResidual> {
    if xi.times.len() != times.len() || xi.times.iter().zip(times).any(|(a, b)| a != b) {
        return Err(Error::GridMismatch("state and dual grids differ".into()));
    }
    for s in states {
        check_dim(4, s.len())?;
    }
    let gdot = finite_difference(times, states)?;
    let xis: Vec<Vec<f64>> = xi.xi.iter().map(|v| v.to_vec()).collect();
    let xidot = finite_difference(times, &xis)?;
    let mut r = AbnormalResidual { ode: 0.0, constraint: 0.0, horizontality: 0.0, normalization: 0.0, normalized: true };
    for i in 0..times.len() {
        let (g, gd, x) = (&states[i], &gdot[i], &xis[i]);
        let rhs = adjoint_rhs(g, gd, x);
        for c in 0..4 {
            r.ode = r.ode.max((xidot[i][c] - rhs[c]).abs());
        }
        for v in constraint_values(g, x) {
            r.constraint = r.constraint.max(v.abs());
        }
        let h3 = gd[2] - (2.0 * g[1] * gd[0] - 2.0 * g[0] * gd[1]);
        let h4 = gd[3] - g[2] * g[2] * gd[0];
        r.horizontality = r.horizontality.max(h3.abs()).max(h4.abs());
        r.normalization = r.normalization.max((x[3] - 1.0).abs());
    }
    r.normalized = r.normalization == 0.0;
    Ok(r)
}

/// Joint RK4 integration of `gamma' = u1 X1 + u2 X2` and the adjoint system.
/// Returns grid times, states and duals.
pub fn integrate_extremal<U>(control: U, gamma0: &[f64], xi0: &[f64], t0: f64, t1: f64, steps: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>, DualCurve)>
where
    U: Fn(f64) -> [f64; 2],
{
    check_dim(4, gamma0.len())?;
    check_dim(4, xi0.len())?;
    if steps == 0 {
        return Err(Error::GridMismatch("need at least one step".into()));
    }
    let rhs = |t: f64, z: &[f64], out: &mut [f64]| {
        let u = control(t);
        let g = &z[..4];
        let gdot = [u[0], u[1], 2.0 * g[1] * u[0] - 2.0 * g[0] * u[1], g[2] * g[2] * u[0]];
        out[..4].copy_from_slice(&gdot);
        out[4..].copy_from_slice(&adjoint_rhs(g, &gdot, &z[4..]));
    };
    let z0: Vec<f64> = gamma0.iter().chain(xi0).copied().collect();
    let zs = rk4_time_varying(&rhs, t0, &z0, t1, steps);
    let times: Vec<f64> = (0..=steps).map(|k| t0 + (t1 - t0) * k as f64 / steps as f64).collect();
    let states = zs.iter().map(|z| z[..4].to_vec()).collect();
    let xi = zs.iter().map(|z| [z[4], z[5], z[6], z[7]]).collect();
    Ok((times.clone(), states, DualCurve::new(times, xi)?))
}

/// Sampled member of the closed family with its dual, invariant and residuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub xi: Vec<[f64; 4]>,
    pub phi: Vec<f64>,
    pub phi_variation: f64,
    pub residual: AbnormalResidual,
}

pub fn family_report(b: f64, c: f64, d: f64, t0: f64, t1: f64, points: usize) -> Result<FamilyReport> {
    if t0 * t1 <= 0.0 {
        return Err(Error::Singular("the sampled interval must not contain t = 0".into()));
    }
    let (times, states) = sample_family(b, c, d, t0, t1, points)?;
    let dual = DualCurve::from_states(times.clone(), &states)?;
    let residual = abnormal_ode_residual(&times, &states, &dual)?;
    Ok(FamilyReport {
        b,
        c,
        d,
        phi: conserved_quantity(&states),
        phi_variation: conserved_variation(&states),
        times,
        states,
        xi: dual.xi,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::{growth_report, lie_bracket};
    use crate::flow::{horizontal_lift, HorizontalCurve};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        ratio(n, d)
    }

    #[test]
    fn frame_coefficients() {
        let f = ag_frame();
        let x3 = Polynomial::var(4, 2);
        assert_eq!(f.generators()[0].coeff(3), &x3.pow(2));
        assert_eq!(f.generators()[1].coeff(2), &Polynomial::var(4, 0).scale(&rat(-2)));
        let g = growth_report(&f, &[rat(0), rat(0), rat(0), rat(0)], 8).unwrap();
        assert_eq!(g.layer_dims, vec![2, 3, 3, 3, 4]);
    }

    #[test]
    fn dual_examples() {
        assert_eq!(dual_from_state(&[1.0, 0.7, 0.0, 0.0]), [0.0, 0.0, 0.0, 1.0]);
        let g = closed_family_exact(&rat(0), &rat(1), &rat(0), &rat(1)).unwrap();
        assert_eq!(g, vec![rat(1), r(-3, 10), rat(1), r(-1, 5)]);
        assert_eq!(dual_from_state_exact(&g).unwrap(), vec![r(-2, 5), rat(2), rat(1), rat(1)]);
        let p = closed_family(0.0, 0.0, 2.5, 3.0).unwrap();
        assert_eq!(p, [3.0, 0.0, 0.0, 2.5]);
        assert!(closed_family(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(closed_family_exact(&rat(1), &rat(1), &rat(1), &rat(0)).is_err());
    }

    #[test]
    fn dual_annihilates_frame_and_bracket() {
        // <X1, xi> = <X2, xi> = <[X1,X2], xi> = 0 symbolically
        let f = ag_frame();
        let n = 4;
        let x = |i| Polynomial::var(n, i);
        let two = rat(2);
        let xi = [
            x(0).try_mul(&x(1)).unwrap().try_mul(&x(2)).unwrap().scale(&-two.clone()).try_sub(&x(2).pow(2)).unwrap(),
            x(0).pow(2).try_mul(&x(2)).unwrap().scale(&two),
            x(0).try_mul(&x(2)).unwrap(),
            Polynomial::one(n),
        ];
        let b = lie_bracket(&f.generators()[0], &f.generators()[1]).unwrap();
        for v in [&f.generators()[0], &f.generators()[1], &b] {
            let mut s = Polynomial::zero(n);
            for i in 0..n {
                s = s.try_add(&v.coeff(i).try_mul(&xi[i]).unwrap()).unwrap();
            }
            assert!(s.is_zero(), "{s:?}");
        }
    }

    #[test]
    fn family_is_horizontal_exactly() {
        for (b, c) in [(0, 1), (1, -1), (-2, 3)] {
            let (b, c) = (rat(b), rat(c));
            for t in [r(1, 1), r(3, 2), r(-7, 3), r(11, 5)] {
                let g = closed_family_exact(&b, &c, &rat(4), &t).unwrap();
                let v = closed_family_velocity_exact(&b, &c, &t).unwrap();
                assert_eq!(v[2], rat(2) * &g[1] * &v[0] - rat(2) * &g[0] * &v[1]);
                assert_eq!(v[3], &g[2] * &g[2] * &v[0]);
            }
        }
    }

    #[test]
    fn family_residuals() {
        let rep = family_report(0.0, 1.0, 0.0, 1.0, 2.0, 1000).unwrap();
        assert!(rep.residual.constraint < 1e-14);
        assert!(rep.residual.ode < 1e-8, "{:?}", rep.residual);
        assert!(rep.residual.horizontality < 1e-8);
        assert!(rep.residual.normalized);
        assert!(rep.phi_variation < 1e-12);
        // refinement drives the ODE residual down at fourth order
        let coarse = family_report(0.0, 1.0, 0.0, 1.0, 2.0, 100).unwrap().residual.ode;
        let fine = family_report(0.0, 1.0, 0.0, 1.0, 2.0, 200).unwrap().residual.ode;
        assert!(fine < coarse / 10.0, "{coarse} {fine}");
        assert!(family_report(0.0, 1.0, 0.0, -1.0, 1.0, 10).is_err());
    }

    #[test]
    fn corner_residuals_vanish() {
        let times: Vec<f64> = (0..=200).map(|k| -1.0 + k as f64 / 100.0).collect();
        let states: Vec<Vec<f64>> = times.iter().map(|&t| corner_curve([1.0, 2.0], [3.0, -1.0], 0.5, t).to_vec()).collect();
        let dual = DualCurve::new(times.clone(), vec![[0.0, 0.0, 0.0, 1.0]; times.len()]).unwrap();
        let rep = abnormal_ode_residual(&times, &states, &dual).unwrap();
        assert_eq!((rep.ode, rep.constraint), (0.0, 0.0));
        assert!(conserved_quantity(&states).iter().all(|p| *p == 0.0));
        assert_eq!(DualCurve::from_states(times, &states).unwrap().xi[17], [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn unnormalized_dual_is_flagged() {
        let times: Vec<f64> = (0..20).map(|k| k as f64 / 19.0).collect();
        let states: Vec<Vec<f64>> = times.iter().map(|&t| vec![t, 0.0, 0.0, 0.0]).collect();
        let dual = DualCurve::new(times.clone(), vec![[0.0, 0.0, 1.0, 0.0]; 20]).unwrap();
        let rep = abnormal_ode_residual(&times, &states, &dual).unwrap();
        assert!(!rep.normalized);
        assert_eq!(rep.normalization, 1.0);
        assert!(rep.constraint > 0.5);
        assert!(abnormal_ode_residual(&times[1..], &states[1..], &dual).is_err());
        assert!(DualCurve::new(vec![0.0], vec![[0.0; 4]]).is_err());
    }

    #[test]
    fn integrated_dual_matches_formula() {
        let (b, c, d) = (0.5, -1.0, 0.25);
        let g0 = closed_family(b, c, d, 1.0).unwrap();
        let control = |t: f64| {
            let v = closed_family_velocity(b, c, d, t).unwrap();
            [v[0], v[1]]
        };
        let (times, states, dual) = integrate_extremal(control, &g0, &dual_from_state(&g0), 1.0, 2.0, 2000).unwrap();
        for (k, t) in times.iter().enumerate() {
            let exact = closed_family(b, c, d, *t).unwrap();
            let rec = dual_from_state(&states[k]);
            for i in 0..4 {
                assert!((states[k][i] - exact[i]).abs() < 1e-10);
                assert!((dual.xi[k][i] - rec[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn family_lift_reproduces_vertical_coordinates() {
        let (b, c, d) = (1.0, 1.0, -1.0);
        let g0 = closed_family(b, c, d, 1.0).unwrap();
        let knots: Vec<f64> = (0..=400).map(|k| 1.0 + k as f64 / 400.0).collect();
        let values: Vec<Vec<f64>> = knots
            .iter()
            .map(|&t| closed_family_velocity(b, c, d, t).unwrap()[..2].to_vec())
            .collect();
        let curve = HorizontalCurve::from_piecewise_linear(g0.to_vec(), &knots, &values, 1).unwrap();
        let lifted = horizontal_lift(&ag_frame(), &curve, 1e-12).unwrap();
        let end = lifted.endpoint().unwrap();
        let exact = closed_family(b, c, d, 2.0).unwrap();
        assert!(end.iter().zip(exact).all(|(a, e)| (a - e).abs() < 1e-5), "{end:?} {exact:?}");
    }

    #[test]
    fn generic_curve_breaks_invariant() {
        let (times, states, dual) = integrate_extremal(|_| [1.0, 1.0], &[1.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0], 1.0, 2.0, 49).unwrap();
        assert!(conserved_variation(&states) > 0.1);
        let rep = abnormal_ode_residual(&times, &states, &DualCurve::from_states(times.clone(), &states).unwrap()).unwrap();
        assert!(rep.ode > 1e-3);
        assert!(dual.is_normalized());
    }

    #[test]
    fn characteristic_field() {
        let f = planar_characteristic_field(&rat(2));
        assert_eq!(f.eval(&[rat(1), rat(1)]).unwrap(), vec![rat(2), rat(8)]);
        assert!(characteristic_slope(1.0, &[0.0, 1.0]).is_err());
        // c = 0 gives rays through the origin
        let x = [1.5, -0.7];
        assert!((characteristic_slope(0.0, &x).unwrap() - x[1] / x[0]).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn family_is_tangent_to_characteristic(b in -2.0..2.0f64, c in -2.0..2.0f64, t in 0.5..3.0f64) {
            let g = closed_family(b, c, 0.0, t).unwrap();
            let v = closed_family_velocity(b, c, 0.0, t).unwrap();
            let scale = 1.0 + c.abs() + b.abs() * t.powi(5);
            prop_assert!(tangency_residual(c, &g, &v).abs() <= 1e-12 * scale);
            prop_assert!((characteristic_slope(c, &g[..2]).unwrap() - v[1]).abs() <= 1e-12 * (1.0 + v[1].abs()));
            let phi = g[0].powi(3) * g[2];
            prop_assert!((phi - c).abs() <= 1e-14 * (1.0 + c.abs()));
        }
    }
}
