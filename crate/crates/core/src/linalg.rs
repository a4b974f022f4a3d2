//! Small exact and floating-point linear algebra helpers.

use nalgebra::{DMatrix, DVector};
use num::{Signed, Zero};

use crate::polynomial::Rational;

/// Incrementally maintained row-echelon basis over the rationals.
#[derive(Clone, Debug, Default)]
pub struct RationalEchelon {
    rows: Vec<(usize, Vec<Rational>)>,
}

impl RationalEchelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, v: &[Rational]) -> Vec<Rational> {
        let mut v = v.to_vec();
        for (pivot, row) in &self.rows {
            if v[*pivot].is_zero() {
                continue;
            }
            let f = v[*pivot].clone() / &row[*pivot];
            for (a, b) in v.iter_mut().zip(row) {
                if !b.is_zero() {
                    *a -= &f * b;
                }
            }
        }
        v
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        self.reduce(v).iter().all(Zero::is_zero)
    }

    /// Inserts `v`; returns true iff the rank increased.
    pub fn insert(&mut self, v: &[Rational]) -> bool {
        let r = self.reduce(v);
        match r.iter().position(|a| !a.is_zero()) {
            Some(p) => {
                self.rows.push((p, r));
                true
            }
            None => false,
        }
    }
}

/// Rank of a set of float vectors with a relative singular-value threshold.
pub fn numeric_rank(vectors: &[Vec<f64>], rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let n = vectors[0].len();
    let m = DMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Greedy numeric basis selection: keeps the vectors that raise the rank.
#[derive(Clone, Debug)]
pub struct NumericEchelon {
    kept: Vec<Vec<f64>>,
    rel_tol: f64,
    scale: f64,
}

impl NumericEchelon {
    pub fn new(rel_tol: f64) -> Self {
        NumericEchelon { kept: Vec::new(), rel_tol, scale: 0.0 }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn insert(&mut self, v: &[f64]) -> bool {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return false;
        }
        // compare against the largest vector seen so far, not just this one
        let scale = self.scale.max(norm);
        let mut trial: Vec<Vec<f64>> = self.kept.iter().map(|k| k.iter().map(|a| a / scale).collect()).collect();
        trial.push(v.iter().map(|a| a / scale).collect());
        let n = v.len();
        let m = DMatrix::from_fn(n, trial.len(), |i, j| trial[j][i]);
        let sv = m.singular_values();
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if sv.len() == trial.len() && smin > self.rel_tol {
            self.kept.push(v.to_vec());
            self.scale = scale;
            true
        } else {
            false
        }
    }
}

/// Solves the square system `a x = b` with column vectors `cols`.
pub fn solve_columns(cols: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let a = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let rhs = DVector::from_column_slice(b);
    a.lu().solve(&rhs).map(|x| x.iter().cloned().collect())
}

/// Exact inverse of a square rational matrix, or None if singular.
pub fn rational_inverse(a: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::from_integer(1.into()) } else { Rational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v /= &p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (a, b) in m[r].iter_mut().zip(&pivot_row) {
                    *a -= &f * b;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Determinant via fraction-free elimination on rationals.
pub fn rational_det(a: &[Vec<Rational>]) -> Rational {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = Rational::from_integer(1.into());
    for col in 0..n {
        let piv = match (col..n).find(|&r| !m[r][col].is_zero()) {
            Some(p) => p,
            None => return Rational::zero(),
        };
        if piv != col {
            m.swap(col, piv);
            det = -det;
        }
        let p = m[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone() / &p;
            let pivot_row = m[col].clone();
            for (a, b) in m[r].iter_mut().zip(&pivot_row) {
                *a -= &f * b;
            }
        }
    }
    det
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive()
}
