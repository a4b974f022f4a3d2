use num::Zero;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::polynomial::{CompiledPolynomial, Polynomial, PolynomialJson, Rational};

/// A vector field `sum_i a_i(x) d/dx_i` with polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VectorField {
    coeffs: Vec<Polynomial>,
}

impl VectorField {
    pub fn new(coeffs: Vec<Polynomial>) -> Result<Self> {
        let n = coeffs.len();
        if n == 0 {
            return Err(Error::StructureViolation("vector field needs at least one coordinate".into()));
        }
        for c in &coeffs {
            check_dim(n, c.dimension())?;
        }
        Ok(VectorField { coeffs })
    }

    pub fn zero(dim: usize) -> Self {
        VectorField { coeffs: vec![Polynomial::zero(dim); dim] }
    }

    /// The coordinate field `d/dx_axis` (zero-based axis).
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut f = Self::zero(dim);
        f.coeffs[axis] = Polynomial::one(dim);
        f
    }

    pub fn dimension(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Polynomial] {
        &self.coeffs
    }

    pub fn coeff(&self, axis: usize) -> &Polynomial {
        &self.coeffs[axis]
    }

    pub fn set_coeff(&mut self, axis: usize, p: Polynomial) -> Result<()> {
        check_dim(self.dimension(), p.dimension())?;
        self.coeffs[axis] = p;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Polynomial::is_zero)
    }

    /// The derivation `X f = sum_j a_j df/dx_j`.
    pub fn apply(&self, f: &Polynomial) -> Result<Polynomial> {
        check_dim(self.dimension(), f.dimension())?;
        let mut acc = Polynomial::zero(self.dimension());
        for (j, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let d = f.partial(j)?;
            if !d.is_zero() {
                acc = &acc + &(a * &d);
            }
        }
        Ok(acc)
    }

    pub fn try_add(&self, other: &VectorField) -> Result<VectorField> {
        check_dim(self.dimension(), other.dimension())?;
        Ok(VectorField { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() })
    }

    pub fn try_sub(&self, other: &VectorField) -> Result<VectorField> {
        check_dim(self.dimension(), other.dimension())?;
        Ok(VectorField { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() })
    }

    pub fn scale(&self, c: &Rational) -> VectorField {
        VectorField { coeffs: self.coeffs.iter().map(|a| a.scale(c)).collect() }
    }

    /// Multiplies every coefficient by the polynomial `f`.
    pub fn mul_poly(&self, f: &Polynomial) -> Result<VectorField> {
        check_dim(self.dimension(), f.dimension())?;
        Ok(VectorField { coeffs: self.coeffs.iter().map(|a| a * f).collect() })
    }

    pub fn eval(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        self.coeffs.iter().map(|a| a.eval(x)).collect()
    }

    pub fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|a| a.eval_f64(x)).collect()
    }

    pub fn compile(&self) -> CompiledField {
        CompiledField { coeffs: self.coeffs.iter().map(Polynomial::compile).collect() }
    }

    pub fn is_zero_at(&self, x: &[Rational]) -> Result<bool> {
        Ok(self.eval(x)?.iter().all(Zero::is_zero))
    }

    pub fn to_json(&self) -> Vec<PolynomialJson> {
        self.coeffs.iter().map(Polynomial::to_json).collect()
    }

    pub fn from_json(raw: &[PolynomialJson]) -> Result<VectorField> {
        let n = raw.len();
        VectorField::new(raw.iter().map(|p| Polynomial::from_json(p, n)).collect::<Result<_>>()?)
    }
}

impl Serialize for VectorField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl std::fmt::Display for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, a)| format!("({a})*d{}", i + 1))
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Float evaluation form of a vector field.
#[derive(Clone, Debug)]
pub struct CompiledField {
    coeffs: Vec<CompiledPolynomial>,
}

impl CompiledField {
    pub fn dimension(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.coeffs) {
            *o = c.eval(x);
        }
    }

    /// Adds `scale * X(x)` into `out`.
    #[inline]
    pub fn accumulate(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        if scale == 0.0 {
            return;
        }
        for (o, c) in out.iter_mut().zip(&self.coeffs) {
            if !c.is_zero() {
                *o += scale * c.eval(x);
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs.len()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Lie bracket `[X, Y]_i = X(Y_i) - Y(X_i)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    check_dim(x.dimension(), y.dimension())?;
    let coeffs = x
        .coeffs
        .iter()
        .zip(&y.coeffs)
        .map(|(xi, yi)| Ok(&x.apply(yi)? - &y.apply(xi)?))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(coeffs)
}
