//! Frames shipped with the toolkit.

use crate::bracket::{Frame, VectorField};
use crate::polynomial::{rat, Polynomial};

fn field(coeffs: Vec<Polynomial>) -> VectorField {
    VectorField::new(coeffs).expect("model fields are well formed")
}

/// The R^4 frame `X1 = d1 + 2 x2 d3 + x3^2 d4`, `X2 = d2 - 2 x1 d3`, orthonormal.
pub fn ag_frame() -> Frame {
    let n = 4;
    let x = |i| Polynomial::var(n, i);
    let x1 = field(vec![Polynomial::one(n), Polynomial::zero(n), x(1).scale(&rat(2)), x(2).pow(2)]);
    let x2 = field(vec![Polynomial::zero(n), Polynomial::one(n), x(0).scale(&rat(-2)), Polynomial::zero(n)]);
    Frame::with_identity_metric(vec![x1, x2]).unwrap()
}

/// First Heisenberg group in triangular form: `X1 = d1`, `X2 = d2 + x1 d3`.
pub fn heisenberg_frame() -> Frame {
    let n = 3;
    let x1 = VectorField::coordinate(n, 0);
    let x2 = field(vec![Polynomial::zero(n), Polynomial::one(n), Polynomial::var(n, 0)]);
    Frame::with_identity_metric(vec![x1, x2]).unwrap()
}

/// Coordinate frame `d1, ..., dn` of Euclidean space.
pub fn euclidean_frame(n: usize) -> Frame {
    Frame::with_identity_metric((0..n).map(|i| VectorField::coordinate(n, i)).collect()).unwrap()
}

/// Heisenberg frame with a weight-4 coordinate: `X1 = d1`, `X2 = d2 + x1 d3 + x1^3 d4`.
pub fn heisenberg_quartic_frame() -> Frame {
    let n = 4;
    let x1 = VectorField::coordinate(n, 0);
    let x2 = field(vec![Polynomial::zero(n), Polynomial::one(n), Polynomial::var(n, 0), Polynomial::var(n, 0).pow(3)]);
    Frame::with_identity_metric(vec![x1, x2]).unwrap()
}
