//! Weighted dilations, the scaled fields `X^lambda`, their limit `X^inf`,
//! and blow-up of curves at a point.

use num::Zero;
use serde::Serialize;

use crate::bracket::{iterated_commutator, lie_bracket, Frame, MultiIndex, VectorField};
use crate::error::{check_dim, Error, Result};
use crate::flow::HorizontalCurve;
use crate::polynomial::{pow_signed, Polynomial, Rational};

/// `delta_lambda(x) = (lambda^w1 x1, ..., lambda^wn xn)`.
pub fn dilate(x: &[f64], weights: &[u32], lam: f64) -> Vec<f64> {
    x.iter().zip(weights).map(|(v, &w)| v * lam.powi(w as i32)).collect()
}

pub fn dilate_exact(x: &[Rational], weights: &[u32], lam: &Rational) -> Vec<Rational> {
    x.iter().zip(weights).map(|(v, &w)| v * pow_signed(lam, w as i32)).collect()
}

fn check_weights(field: &VectorField, weights: &[u32]) -> Result<()> {
    check_dim(field.dimension(), weights.len())?;
    if weights.iter().any(|&w| w == 0) {
        return Err(Error::StructureViolation("weights must be positive".into()));
    }
    Ok(())
}

/// `X^lambda(x) = sum_i lambda^(w_i - length) a_i(delta_(1/lambda) x) d_i`, exactly.
pub fn scale_field(field: &VectorField, weights: &[u32], length: usize, lam: &Rational) -> Result<VectorField> {
    check_weights(field, weights)?;
    if lam.is_zero() {
        return Err(Error::StructureViolation("lambda must be nonzero".into()));
    }
    let n = field.dimension();
    let coeffs = (0..n)
        .map(|i| {
            let shift = weights[i] as i64 - length as i64;
            let terms = field.coeff(i).terms().map(|(m, c)| {
                let e = shift - m.weighted_degree(weights);
                (m.0.clone(), c * pow_signed(lam, e as i32))
            });
            Polynomial::from_terms(n, terms)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(coeffs)
}

/// Keeps on axis `i` the weighted part of degree `w_i - length`.
pub fn limit_field(field: &VectorField, weights: &[u32], length: usize) -> Result<VectorField> {
    check_weights(field, weights)?;
    let coeffs = (0..field.dimension())
        .map(|i| field.coeff(i).weighted_part(weights, weights[i] as i64 - length as i64))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(coeffs)
}

/// Split `a_i = p_i + r_i` with `p` the limit field and `r` of strictly higher
/// weighted degree.
pub fn decompose(field: &VectorField, weights: &[u32], length: usize) -> Result<(VectorField, VectorField)> {
    let p = limit_field(field, weights, length)?;
    for i in 0..field.dimension() {
        let target = weights[i] as i64 - length as i64;
        if let Some((m, _)) = field.coeff(i).terms().find(|(m, _)| m.weighted_degree(weights) < target) {
            return Err(Error::StructureViolation(format!(
                "axis {} has a term of weighted degree {} below {target} (monomial {:?}); coordinates are not adapted",
                i + 1,
                m.weighted_degree(weights),
                m.0
            )));
        }
    }
    let r = field.try_sub(&p)?;
    Ok((p, r))
}

/// `max_i |lambda^(w_i - len) r_i(delta_(1/lambda) x)|` for each lambda.
pub fn residual_decay(residual: &VectorField, weights: &[u32], length: usize, x: &[f64], lams: &[f64]) -> Result<Vec<f64>> {
    check_weights(residual, weights)?;
    check_dim(residual.dimension(), x.len())?;
    Ok(lams
        .iter()
        .map(|&lam| {
            let y = dilate(x, weights, 1.0 / lam);
            (0..residual.dimension())
                .map(|i| (lam.powi(weights[i] as i32 - length as i32) * residual.coeff(i).eval_f64(&y)).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Weights, homogeneous dimension and the limit frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradedStructure {
    pub weights: Vec<u32>,
    pub homogeneous_dimension: u32,
    pub limit_frame: Frame,
}

/// Limit frame of the generators (each of length 1) under `weights`.
pub fn nilpotentize(frame: &Frame, weights: &[u32]) -> Result<GradedStructure> {
    check_dim(frame.dimension(), weights.len())?;
    if weights.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::StructureViolation("weights must be nondecreasing".into()));
    }
    let gens = frame
        .generators()
        .iter()
        .map(|g| limit_field(g, weights, 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradedStructure {
        weights: weights.to_vec(),
        homogeneous_dimension: weights.iter().sum(),
        limit_frame: Frame::new(gens, frame.metric().clone())?,
    })
}

/// `gamma^lambda(t) = delta_lambda gamma(t / lambda)`. Controls with respect
/// to the scaled frame are unchanged; the grid stretches by `lambda`.
pub fn blow_up_curve(curve: &HorizontalCurve, weights: &[u32], lam: f64) -> Result<HorizontalCurve> {
    check_dim(curve.base_point.len(), weights.len())?;
    if lam <= 0.0 {
        return Err(Error::StructureViolation("lambda must be positive".into()));
    }
    let mut out = HorizontalCurve::new(
        dilate(&curve.base_point, weights, lam),
        curve.times.iter().map(|t| t * lam).collect(),
        curve.controls.clone(),
    )?;
    out.states = curve.states.as_ref().map(|s| s.iter().map(|x| dilate(x, weights, lam)).collect());
    Ok(out)
}

/// Checks `[X_i, X_beta]^lambda = [X_i^lambda, X_beta^lambda]` for every
/// generator `X_i`; `lam = None` checks the same identity on limits.
pub fn verify_bracket_preservation(frame: &Frame, weights: &[u32], beta: &MultiIndex, lam: Option<&Rational>) -> Result<bool> {
    let xb = iterated_commutator(frame, beta)?;
    let len = beta.len();
    let op = |f: &VectorField, l: usize| match lam {
        Some(lam) => scale_field(f, weights, l, lam),
        None => limit_field(f, weights, l),
    };
    for g in frame.generators() {
        let lhs = op(&lie_bracket(g, &xb)?, len + 1)?;
        let rhs = lie_bracket(&op(g, 1)?, &op(&xb, len)?)?;
        if lhs != rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks `p_i(delta_lambda x) = lambda^(w_i - len) p_i(x)` exactly at one point.
pub fn homogeneity_holds(field: &VectorField, weights: &[u32], length: usize, x: &[Rational], lam: &Rational) -> Result<bool> {
    check_weights(field, weights)?;
    let dx = dilate_exact(x, weights, lam);
    for i in 0..field.dimension() {
        let lhs = field.coeff(i).eval(&dx)?;
        let rhs = pow_signed(lam, weights[i] as i32 - length as i32) * field.coeff(i).eval(x)?;
        if lhs != rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether every generator equals its own limit.
pub fn is_graded_homogeneous(frame: &Frame, weights: &[u32]) -> Result<bool> {
    for g in frame.generators() {
        if limit_field(g, weights, 1)? != *g {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::{growth_report, CommutatorTable};
    use crate::flow::{horizontal_lift, DEFAULT_TOL};
    use crate::models::{ag_frame, heisenberg_frame};
    use crate::polynomial::{rat, ratio};
    use proptest::prelude::*;

    const W: [u32; 4] = [1, 1, 2, 5];

    #[test]
    fn dilation_basics() {
        assert_eq!(dilate(&[0.0; 4], &W, 3.0), vec![0.0; 4]);
        assert_eq!(dilate(&[1.0; 4], &W, 2.0), vec![2.0, 2.0, 4.0, 32.0]);
        let x = [0.3, -1.2, 0.7, 2.5];
        let back = dilate(&dilate(&x, &W, 1.7), &W, 1.0 / 1.7);
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn homogeneous_field_is_scale_invariant() {
        let x1 = ag_frame().generator(1).unwrap().clone();
        for lam in [rat(2), ratio(1, 3), rat(1)] {
            assert_eq!(scale_field(&x1, &W, 1, &lam).unwrap(), x1);
        }
        assert_eq!(limit_field(&x1, &W, 1).unwrap(), x1);
    }

    #[test]
    fn off_degree_terms() {
        let n = 4;
        let mut f = VectorField::zero(n);
        // x1^3 on a weight-2 axis, length 1: degree 3 != 1
        f.set_coeff(2, Polynomial::var(n, 0).pow(3)).unwrap();
        assert!(limit_field(&f, &W, 1).unwrap().is_zero());
        // the same term scales like lambda^(2-1-3)
        let s = scale_field(&f, &W, 1, &rat(2)).unwrap();
        assert_eq!(s.coeff(2), &Polynomial::var(n, 0).pow(3).scale(&ratio(1, 4)));
    }

    #[test]
    fn decomposition() {
        let n = 4;
        let x = |i| Polynomial::var(n, i);
        let mut f = ag_frame().generator(1).unwrap().clone();
        f.set_coeff(3, &x(2).pow(2) + &x(0).pow(5)).unwrap();
        let (p, r) = decompose(&f, &W, 1).unwrap();
        assert_eq!(p.coeff(3), &x(2).pow(2));
        assert_eq!(r.coeff(3), &x(0).pow(5));
        assert!((0..3).all(|i| r.coeff(i).is_zero()));
        let decay = residual_decay(&r, &W, 1, &[0.4, -0.8, 1.1, 0.3], &[10.0, 100.0, 1000.0]).unwrap();
        assert!(decay[0] > decay[1] && decay[1] > decay[2] && decay[2] < 1e-2);
        let (_, r0) = decompose(&ag_frame().generator(2).unwrap().clone(), &W, 1).unwrap();
        assert!(r0.is_zero());
        // constant on a weight-2 axis is below degree 1
        let mut bad = VectorField::zero(n);
        bad.set_coeff(2, Polynomial::one(n)).unwrap();
        assert!(matches!(decompose(&bad, &W, 1), Err(Error::StructureViolation(_))));
    }

    #[test]
    fn bracket_preservation_examples() {
        let f = ag_frame();
        let b21 = MultiIndex::new(vec![2, 1], 2).unwrap();
        let b211 = MultiIndex::new(vec![2, 1, 1], 2).unwrap();
        assert!(verify_bracket_preservation(&f, &W, &b21, Some(&rat(3))).unwrap());
        assert!(verify_bracket_preservation(&f, &W, &b21, Some(&rat(1))).unwrap());
        assert!(verify_bracket_preservation(&f, &W, &b211, None).unwrap());
    }

    #[test]
    fn bracket_preservation_with_residuals() {
        // add a higher-degree residual so that X^lambda differs from X
        let n = 4;
        let mut x1 = ag_frame().generator(1).unwrap().clone();
        x1.set_coeff(3, &Polynomial::var(n, 2).pow(2) + &Polynomial::var(n, 0).pow(5)).unwrap();
        let f = Frame::with_identity_metric(vec![x1, ag_frame().generator(2).unwrap().clone()]).unwrap();
        let b = MultiIndex::new(vec![1, 2, 1], 2).unwrap();
        for lam in [rat(2), ratio(1, 2)] {
            assert!(verify_bracket_preservation(&f, &W, &b, Some(&lam)).unwrap());
        }
        assert!(verify_bracket_preservation(&f, &W, &b, None).unwrap());
        assert!(!is_graded_homogeneous(&f, &W).unwrap());
        let g = nilpotentize(&f, &W).unwrap();
        assert_eq!(g.limit_frame, ag_frame());
        assert_eq!(g.homogeneous_dimension, 9);
    }

    #[test]
    fn limit_frame_keeps_condition_13() {
        let g = nilpotentize(&ag_frame(), &W).unwrap();
        let z = vec![rat(0); 4];
        assert!(growth_report(&g.limit_frame, &z, 6).unwrap().condition_13);
    }

    #[test]
    fn limit_frame_commutators_are_homogeneous() {
        let table = CommutatorTable::build(&ag_frame(), 5).unwrap();
        let x = [ratio(1, 3), rat(-2), ratio(5, 7), rat(1)].to_vec();
        for (beta, f) in table.iter() {
            for lam in [rat(2), ratio(-3, 5)] {
                assert!(homogeneity_holds(f, &W, beta.len(), &x, &lam).unwrap(), "{beta}");
            }
        }
    }

    #[test]
    fn blow_up() {
        let c = HorizontalCurve::from_legs(vec![0.0, 0.0], &[(1.0, vec![1.0, 0.0])]).unwrap();
        assert_eq!(blow_up_curve(&c, &[1, 1], 1.0).unwrap(), c);
        // the R^4 corner through 0 is invariant: states of the blow-up sit on the same rays
        let f = ag_frame();
        let corner = HorizontalCurve::new(vec![-1.0, 1.0, 0.0, 0.0], vec![-1.0, 0.0, 1.0], vec![vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        let lifted = horizontal_lift(&f, &corner, DEFAULT_TOL).unwrap();
        for lam in [10.0, 100.0] {
            let b = blow_up_curve(&lifted, &W, lam).unwrap();
            let relifted = horizontal_lift(&f, &b, DEFAULT_TOL).unwrap();
            let (s1, s2) = (b.states.unwrap(), relifted.states.unwrap());
            for (p, q) in s1.iter().zip(&s2) {
                assert!(p.iter().zip(q).all(|(a, b)| (a - b).abs() <= 1e-9 * lam.powi(5)));
            }
            assert_eq!(s1[1], vec![0.0; 4]);
        }
    }

    #[test]
    fn heisenberg_limit_is_itself() {
        let h = heisenberg_frame();
        let g = nilpotentize(&h, &[1, 1, 2]).unwrap();
        assert_eq!(g.limit_frame, h);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn limit_is_idempotent_and_homogeneous(
            terms in prop::collection::vec((0usize..4, prop::collection::vec(0u32..3, 4), -4i64..=4), 1..8),
            lam_n in 1i64..6, lam_d in 1i64..6,
            x in prop::collection::vec(-5i64..=5, 4),
        ) {
            let n = 4;
            let mut f = VectorField::zero(n);
            for (axis, e, c) in terms {
                let p = f.coeff(axis).try_add(&Polynomial::monomial(n, e, rat(c))).unwrap();
                f.set_coeff(axis, p).unwrap();
            }
            let l = limit_field(&f, &W, 1).unwrap();
            prop_assert_eq!(limit_field(&l, &W, 1).unwrap(), l.clone());
            let x: Vec<Rational> = x.into_iter().map(rat).collect();
            prop_assert!(homogeneity_holds(&l, &W, 1, &x, &ratio(lam_n, lam_d)).unwrap());
            // X^lambda then X^mu equals X^(lambda mu)
            let a = ratio(lam_n, lam_d);
            let b = ratio(lam_d + 1, 2);
            let ab = scale_field(&scale_field(&f, &W, 1, &a).unwrap(), &W, 1, &b).unwrap();
            prop_assert_eq!(ab, scale_field(&f, &W, 1, &(&a * &b)).unwrap());
        }
    }
}
