//! Triangular graded frames `X1 = d1`, `X2 = d2 + sum p_i d_i`, their
//! projections, the bracket direction `Z`, and the change to triangular
//! coordinates adapted to a corner.

use num::{One, Zero};
use serde::Serialize;

use crate::bracket::{adapted_basis, iterated_commutator, Frame, Metric, MultiIndex, VectorField};
use crate::error::{check_dim, Error, Result};
use crate::linalg::rational_inverse;
use crate::nilpotent::is_graded_homogeneous;
use crate::polynomial::{to_f64, CompiledPolynomial, Polynomial, Rational};

/// A rank-2 frame in triangular graded form with its coordinate weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangularFrame {
    frame: Frame,
    weights: Vec<u32>,
}

impl TriangularFrame {
    pub fn new(frame: Frame, weights: Vec<u32>) -> Result<Self> {
        let n = frame.dimension();
        check_dim(n, weights.len())?;
        if frame.num_generators() != 2 || n < 2 {
            return Err(Error::StructureViolation("triangular frames have two generators in dimension >= 2".into()));
        }
        if weights[0] != 1 || weights[1] != 1 || weights.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::StructureViolation(format!("weights {weights:?} are not graded with w1 = w2 = 1")));
        }
        let x1 = frame.generator(1)?;
        if *x1 != VectorField::coordinate(n, 0) {
            return Err(Error::StructureViolation(format!("X1 = {x1} is not d/dx1")));
        }
        let x2 = frame.generator(2)?;
        if !x2.coeff(0).is_zero() || *x2.coeff(1) != Polynomial::one(n) {
            return Err(Error::StructureViolation(format!("X2 = {x2} is not of the form d/dx2 + ...")));
        }
        for i in 2..n {
            let p = x2.coeff(i);
            if !p.is_weighted_homogeneous(&weights, weights[i] as i64 - 1) {
                return Err(Error::StructureViolation(format!("p_{} = {p} is not homogeneous of degree {}", i + 1, weights[i] - 1)));
            }
            if (i..n).any(|j| p.depends_on(j)) {
                return Err(Error::StructureViolation(format!("p_{} = {p} depends on x_j with j >= {}", i + 1, i + 1)));
            }
        }
        Ok(TriangularFrame { frame, weights })
    }

    /// Reads the weights from the adapted basis at the origin.
    pub fn detect(frame: Frame) -> Result<Self> {
        let zero = vec![Rational::zero(); frame.dimension()];
        let basis = adapted_basis(&frame, &zero, frame.dimension() + 2)?;
        Self::new(frame, basis.weights)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn dimension(&self) -> usize {
        self.frame.dimension()
    }

    /// Drops the last axis from both fields.
    pub fn project(&self) -> Result<TriangularFrame> {
        let n = self.dimension();
        if n < 3 {
            return Err(Error::Hypothesis("projection needs dimension >= 3".into()));
        }
        let gens = self
            .frame
            .generators()
            .iter()
            .map(|g| VectorField::new(g.coeffs()[..n - 1].iter().map(Polynomial::drop_last_var).collect::<Result<Vec<_>>>()?))
            .collect::<Result<Vec<_>>>()?;
        TriangularFrame::new(Frame::new(gens, self.frame.metric().clone())?, self.weights[..n - 1].to_vec())
    }
}

/// The field `Z = X_beta_hat` used to patch the endpoint drift.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChosenZ {
    pub beta: MultiIndex,
    pub beta_hat: MultiIndex,
    pub outer: usize,
    /// `Z` rescaled so that `db_n/dx_outer = 1`.
    pub z: VectorField,
    /// Scale applied: `z = scale * X_beta_hat`.
    pub scale: String,
    /// `db_n/dx1` and `db_n/dx2` after rescaling.
    pub c1: String,
    pub c2: String,
    #[serde(skip)]
    pub c_exact: (Rational, Rational),
}

pub fn choose_z(tf: &TriangularFrame) -> Result<ChosenZ> {
    let n = tf.dimension();
    let wn = tf.weights[n - 1];
    if wn < 3 {
        return Err(Error::Hypothesis(format!("top weight {wn} < 3: base case, no patch field")));
    }
    let zero = vec![Rational::zero(); n];
    let basis = adapted_basis(tf.frame(), &zero, wn as usize + 1)?;
    let (beta, _) = basis
        .indices
        .iter()
        .zip(&basis.fields)
        .rev()
        .find(|(b, f)| b.len() == wn as usize && !f.coeff(n - 1).constant_term().is_zero())
        .ok_or_else(|| Error::Hypothesis("no weight-w_n basis element reaches the last axis".into()))?;
    let beta_hat = beta.inner().expect("length >= 3");
    let raw = iterated_commutator(tf.frame(), &beta_hat)?;
    if !raw.is_zero_at(&zero)? {
        return Err(Error::Hypothesis(format!("Z = X{beta_hat} does not vanish at 0")));
    }
    for i in 0..n {
        let b = raw.coeff(i);
        if b.is_zero() {
            continue;
        }
        if tf.weights[i] != wn {
            return Err(Error::Hypothesis(format!("Z has a component on axis {} of weight {} != {wn}", i + 1, tf.weights[i])));
        }
        if b.terms().any(|(m, _)| m.degree() != 1 || m.0[2..].iter().any(|&e| e > 0)) {
            return Err(Error::Hypothesis(format!("b_{} = {b} is not linear in x1, x2", i + 1)));
        }
    }
    let bn = raw.coeff(n - 1);
    let e = |j: usize| {
        let mut v = vec![0u32; n];
        v[j] = 1;
        v
    };
    let outer = beta.outer();
    let lead = bn.coefficient(&e(outer - 1));
    if lead.is_zero() {
        return Err(Error::Hypothesis(format!("db_n/dx{outer} = 0; normalization impossible")));
    }
    let scale = Rational::one() / &lead;
    let z = raw.scale(&scale);
    let c1 = bn.coefficient(&e(0)) * &scale;
    let c2 = bn.coefficient(&e(1)) * &scale;
    Ok(ChosenZ {
        beta: beta.clone(),
        beta_hat,
        outer,
        z,
        scale: scale.to_string(),
        c1: c1.to_string(),
        c2: c2.to_string(),
        c_exact: (c1, c2),
    })
}

/// Coordinates `z` with `x = exp(z1 Y1) o ... o exp(zn Yn)(0)` in which a
/// graded homogeneous rank-2 frame, rotated to the corner directions, is
/// triangular.
#[derive(Clone, Debug)]
pub struct Triangularization {
    pub triangular: TriangularFrame,
    /// `x = phi(z)`.
    pub phi: Vec<Polynomial>,
    /// `z = psi(x)`.
    pub psi: Vec<Polynomial>,
    /// Columns: coefficients of `Y1`, `Y2` in the original generators.
    pub control_map: Vec<Vec<Rational>>,
    phi_c: Vec<CompiledPolynomial>,
    psi_c: Vec<CompiledPolynomial>,
}

/// Point of the exponential map `exp(s B)(p)` as polynomials, via the finite
/// Lie series `sum_k s^k / k! (B^k x_i)(p)`.
fn flow_series(b: &VectorField, s: &Polynomial, p: &[Polynomial]) -> Result<Vec<Polynomial>> {
    let n = b.dimension();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut term = Polynomial::var(n, i);
        let mut acc = Polynomial::zero(s.dimension());
        let mut k = 0u32;
        let mut fact = Rational::one();
        while !term.is_zero() {
            if k > 64 {
                return Err(Error::StructureViolation("Lie series does not terminate; frame is not nilpotent".into()));
            }
            let piece = term.compose(p)?.try_mul(&s.pow(k))?.scale(&(Rational::one() / &fact));
            acc = acc.try_add(&piece)?;
            term = b.apply(&term)?;
            k += 1;
            fact *= Rational::from_integer(k.into());
        }
        out.push(acc);
    }
    Ok(out)
}

impl Triangularization {
    /// `incoming`/`outgoing` are the corner's one-sided velocities in the
    /// generators of `frame`, which must be homogeneous of degree -1 under
    /// `weights`.
    pub fn new(frame: &Frame, weights: &[u32], incoming: &[Rational], outgoing: &[Rational]) -> Result<Self> {
        let n = frame.dimension();
        check_dim(n, weights.len())?;
        if frame.num_generators() != 2 {
            return Err(Error::Hypothesis("corner shortening needs a rank-2 frame".into()));
        }
        check_dim(2, incoming.len())?;
        check_dim(2, outgoing.len())?;
        if !is_graded_homogeneous(frame, weights)? {
            return Err(Error::StructureViolation(format!(
                "frame is not homogeneous under weights {weights:?}; nilpotentize it first"
            )));
        }
        let (x1, x2) = (frame.generator(1)?, frame.generator(2)?);
        let comb = |a: &Rational, b: &Rational| -> Result<VectorField> { x1.scale(a).try_add(&x2.scale(b)) };
        let y1 = comb(&outgoing[0], &outgoing[1])?;
        let y2 = comb(&-incoming[0].clone(), &-incoming[1].clone())?;
        let control_map = vec![vec![outgoing[0].clone(), -incoming[0].clone()], vec![outgoing[1].clone(), -incoming[1].clone()]];
        if (&control_map[0][0] * &control_map[1][1] - &control_map[0][1] * &control_map[1][0]).is_zero() {
            return Err(Error::Hypothesis("corner directions are linearly dependent".into()));
        }
        let metric: Metric = frame.metric().pull_back(&control_map)?;
        let yframe = Frame::new(vec![y1, y2], metric.clone())?;
        let zero = vec![Rational::zero(); n];
        let basis = adapted_basis(&yframe, &zero, *weights.iter().max().unwrap() as usize + 1)?;
        if basis.weights != weights {
            return Err(Error::Hypothesis(format!("adapted weights {:?} differ from coordinate weights {weights:?}", basis.weights)));
        }
        // phi(z) = exp(z1 B1)( ... exp(zn Bn)(0))
        let mut p: Vec<Polynomial> = (0..n).map(|_| Polynomial::zero(n)).collect();
        for j in (0..n).rev() {
            p = flow_series(&basis.fields[j], &Polynomial::var(n, j), &p)?;
        }
        let phi = p;
        // psi by the graded fixed point z = A^-1 (x - N(z))
        let a: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut e = vec![0u32; n];
                        e[j] = 1;
                        phi[i].coefficient(&e)
                    })
                    .collect()
            })
            .collect();
        let ainv = rational_inverse(&a).ok_or_else(|| Error::Singular("exponential coordinates are degenerate at 0".into()))?;
        let linear = |v: &[Polynomial], mat: &[Vec<Rational>]| -> Result<Vec<Polynomial>> {
            (0..n)
                .map(|i| {
                    let mut acc = Polynomial::zero(n);
                    for (j, vj) in v.iter().enumerate() {
                        if !mat[i][j].is_zero() {
                            acc = acc.try_add(&vj.scale(&mat[i][j]))?;
                        }
                    }
                    Ok(acc)
                })
                .collect()
        };
        let vars: Vec<Polynomial> = (0..n).map(|i| Polynomial::var(n, i)).collect();
        let lin_phi = linear(&vars, &a)?;
        let nonlinear: Vec<Polynomial> = phi.iter().zip(&lin_phi).map(|(f, l)| f.try_sub(l)).collect::<Result<_>>()?;
        let mut psi = linear(&vars, &ainv)?;
        for _ in 0..=n {
            let nz: Vec<Polynomial> = nonlinear.iter().map(|q| q.compose(&psi)).collect::<Result<_>>()?;
            let rhs: Vec<Polynomial> = vars.iter().zip(&nz).map(|(x, q)| x.try_sub(q)).collect::<Result<_>>()?;
            let next = linear(&rhs, &ainv)?;
            if next == psi {
                break;
            }
            psi = next;
        }
        let round: Vec<Polynomial> = phi.iter().map(|f| f.compose(&psi)).collect::<Result<_>>()?;
        if round != vars {
            return Err(Error::StructureViolation("inverse of the exponential coordinates did not close".into()));
        }
        // pulled-back fields T_j,i(z) = (Y_j psi_i)(phi(z))
        let gens = yframe
            .generators()
            .iter()
            .map(|y| VectorField::new(psi.iter().map(|q| y.apply(q)?.compose(&phi)).collect::<Result<Vec<_>>>()?))
            .collect::<Result<Vec<_>>>()?;
        let triangular = TriangularFrame::new(Frame::new(gens, metric)?, weights.to_vec())?;
        Ok(Triangularization {
            triangular,
            phi_c: phi.iter().map(Polynomial::compile).collect(),
            psi_c: psi.iter().map(Polynomial::compile).collect(),
            phi,
            psi,
            control_map,
        })
    }

    pub fn to_original(&self, z: &[f64]) -> Vec<f64> {
        self.phi_c.iter().map(|p| p.eval(z)).collect()
    }

    pub fn to_triangular(&self, x: &[f64]) -> Vec<f64> {
        self.psi_c.iter().map(|p| p.eval(x)).collect()
    }

    /// Controls for the original generators from triangular-frame controls.
    pub fn original_controls(&self, v: &[f64]) -> Vec<f64> {
        self.control_map.iter().map(|row| row.iter().zip(v).map(|(a, b)| to_f64(a) * b).sum()).collect()
    }
}
