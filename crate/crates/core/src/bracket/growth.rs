//! Layers `D_i`, `L_i`, growth vectors, the pointwise structure conditions
//! and greedy adapted bases.

use serde::Serialize;

use super::field::{lie_bracket, VectorField};
use super::frame::{Frame, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{NumericEchelon, RationalEchelon};
use crate::polynomial::Rational;

/// Default maximal multi-index length.
pub const DEFAULT_CAP: usize = 8;

/// Relative singular-value threshold for rank decisions at float points.
pub const FLOAT_RANK_TOL: f64 = 1e-9;

/// Right-nested commutator `X_b = [X_bi, [X_b(i-1), ... [X_b2, X_b1]...]]`.
pub fn iterated_commutator(frame: &Frame, beta: &MultiIndex) -> Result<VectorField> {
    let entries = beta.entries();
    let mut acc = frame.generator(entries[0])?.clone();
    for &j in &entries[1..] {
        acc = lie_bracket(frame.generator(j)?, &acc)?;
    }
    Ok(acc)
}

/// All nonzero right-nested commutators up to a length cap.
///
/// Indices with `b1 <= b2` are skipped: they are zero or the negative of the
/// index with the first two entries swapped, so the kept fields still span
/// every `D_i`. Within a length, entries are in lexicographic order.
#[derive(Clone, Debug)]
pub struct CommutatorTable {
    levels: Vec<Vec<(MultiIndex, VectorField)>>,
}

impl CommutatorTable {
    pub fn build(frame: &Frame, cap: usize) -> Result<Self> {
        let m = frame.num_generators();
        let mut levels: Vec<Vec<(MultiIndex, VectorField)>> = Vec::with_capacity(cap);
        if cap == 0 {
            return Ok(CommutatorTable { levels });
        }
        levels.push(
            (1..=m)
                .map(|j| (MultiIndex::from_vec_unchecked(vec![j]), frame.generators()[j - 1].clone()))
                .collect(),
        );
        for len in 2..=cap {
            let mut next = Vec::new();
            for (beta, field) in &levels[len - 2] {
                for j in 1..=m {
                    if len == 2 && beta.entries()[0] <= j {
                        continue;
                    }
                    let f = lie_bracket(&frame.generators()[j - 1], field)?;
                    if f.is_zero() {
                        continue;
                    }
                    let mut e = beta.entries().to_vec();
                    e.push(j);
                    next.push((MultiIndex::from_vec_unchecked(e), f));
                }
            }
            levels.push(next);
        }
        Ok(CommutatorTable { levels })
    }

    pub fn cap(&self) -> usize {
        self.levels.len()
    }

    /// Fields of length `len` (one-based).
    pub fn level(&self, len: usize) -> &[(MultiIndex, VectorField)] {
        if len == 0 || len > self.levels.len() {
            &[]
        } else {
            &self.levels[len - 1]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &(MultiIndex, VectorField)> {
        self.levels.iter().flatten()
    }
}

/// Basis of `D_i(x)`: a maximal independent subset of the length-`i` commutators at `x`.
pub fn layer_at(frame: &Frame, x: &[Rational], i: usize) -> Result<Vec<Vec<Rational>>> {
    check_dim(frame.dimension(), x.len())?;
    if i == 0 {
        return Err(Error::IndexOutOfRange { index: 0, limit: 0 });
    }
    let table = CommutatorTable::build(frame, i)?;
    let mut ech = RationalEchelon::new();
    let mut basis = Vec::new();
    for (_, f) in table.level(i) {
        let v = f.eval(x)?;
        if ech.insert(&v) {
            basis.push(v);
        }
    }
    Ok(basis)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    #[serde(serialize_with = "ser_rationals")]
    pub base_point: Vec<Rational>,
    /// `dim L_i(x)` for `i = 1..` until full rank (or the cap).
    pub layer_dims: Vec<usize>,
    pub step: Option<usize>,
    pub weights: Vec<u32>,
    pub basis: Vec<MultiIndex>,
    pub condition_12: bool,
    pub condition_13: bool,
    pub bracket_generating: bool,
}

pub(crate) fn ser_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    let strs: Vec<String> = v.iter().map(|r| r.to_string()).collect();
    strs.serialize(s)
}

/// Whether `L_i != L_(i-1)` forces `L_(i+1) = L_i` for every `i >= 2`,
/// given the cumulative dims (index 0 is `L_1`). Layers past full rank stay full.
pub fn condition_13_from_dims(dims: &[usize], n: usize) -> bool {
    let at = |i: usize| -> Option<usize> {
        if i == 0 {
            Some(0)
        } else if i <= dims.len() {
            Some(dims[i - 1])
        } else if dims.last() == Some(&n) {
            Some(n)
        } else {
            None
        }
    };
    for i in 2..=dims.len() {
        let (prev, cur) = (at(i - 1).unwrap(), at(i).unwrap());
        if cur != prev {
            match at(i + 1) {
                Some(next) if next != cur => return false,
                _ => {}
            }
        }
    }
    true
}

pub fn growth_report(frame: &Frame, x: &[Rational], cap: usize) -> Result<GrowthReport> {
    check_dim(frame.dimension(), x.len())?;
    if cap == 0 {
        return Err(Error::IndexOutOfRange { index: 0, limit: 0 });
    }
    let n = frame.dimension();
    let table = CommutatorTable::build(frame, cap)?;
    // cumulative echelons per layer, kept for the bracket test below
    let mut layers: Vec<RationalEchelon> = Vec::new();
    let mut ech = RationalEchelon::new();
    let mut dims = Vec::new();
    let mut weights = Vec::new();
    let mut basis = Vec::new();
    let mut step = None;
    for len in 1..=cap {
        for (beta, f) in table.level(len) {
            if ech.insert(&f.eval(x)?) {
                weights.push(len as u32);
                basis.push(beta.clone());
            }
        }
        dims.push(ech.rank());
        layers.push(ech.clone());
        if ech.rank() == n {
            step = Some(len);
            break;
        }
    }
    let bracket_generating = step.is_some();
    let condition_13 = condition_13_from_dims(&dims, n);

    // [D_i, D_j](x) inside L_(i+j-1)(x) for i, j >= 2, i + j > 4
    let mut condition_12 = true;
    'outer: for i in 2..=cap {
        for j in i..=cap {
            if i + j <= 4 || i + j - 1 > cap {
                continue;
            }
            let target = i + j - 1;
            if target > layers.len() {
                // past full rank, containment is automatic
                continue;
            }
            let l = &layers[target - 1];
            if l.rank() == n {
                continue;
            }
            for (_, a) in table.level(i) {
                for (_, b) in table.level(j) {
                    let br = lie_bracket(a, b)?;
                    if !l.contains(&br.eval(x)?) {
                        condition_12 = false;
                        break 'outer;
                    }
                }
            }
        }
    }

    Ok(GrowthReport {
        base_point: x.to_vec(),
        layer_dims: dims,
        step,
        weights,
        basis,
        condition_12,
        condition_13,
        bracket_generating,
    })
}

/// Commutator frame completing the generators to a basis at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedBasis {
    pub base_point: Vec<Rational>,
    pub indices: Vec<MultiIndex>,
    pub fields: Vec<VectorField>,
    pub weights: Vec<u32>,
}

impl AdaptedBasis {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

impl Serialize for AdaptedBasis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            multi_index: &'a MultiIndex,
            weight: u32,
            field: &'a VectorField,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            base_point: Vec<String>,
            weights: &'a [u32],
            entries: Vec<Entry<'a>>,
        }
        Out {
            base_point: self.base_point.iter().map(|r| r.to_string()).collect(),
            weights: &self.weights,
            entries: self
                .indices
                .iter()
                .zip(&self.fields)
                .zip(&self.weights)
                .map(|((b, f), &w)| Entry { multi_index: b, weight: w, field: f })
                .collect(),
        }
        .serialize(s)
    }
}

/// Greedy completion of the generators to a frame of `T_x R^n`.
pub fn adapted_basis(frame: &Frame, x: &[Rational], cap: usize) -> Result<AdaptedBasis> {
    check_dim(frame.dimension(), x.len())?;
    if !frame.independent_at(x)? {
        return Err(Error::Hypothesis("generators are linearly dependent at the base point".into()));
    }
    let n = frame.dimension();
    let table = CommutatorTable::build(frame, cap)?;
    let mut ech = RationalEchelon::new();
    let mut out = AdaptedBasis { base_point: x.to_vec(), indices: vec![], fields: vec![], weights: vec![] };
    for (beta, f) in table.iter() {
        if ech.insert(&f.eval(x)?) {
            out.indices.push(beta.clone());
            out.fields.push(f.clone());
            out.weights.push(beta.len() as u32);
            if ech.rank() == n {
                return Ok(out);
            }
        }
    }
    Err(Error::NotBracketGenerating { cap })
}

/// Weight-gap test: `w_j + 2 <= w_k` whenever `2 <= w_j < w_k`.
pub fn weight_gap_check(report: &GrowthReport) -> bool {
    weights_satisfy_gap(&report.weights)
}

pub fn weights_satisfy_gap(weights: &[u32]) -> bool {
    weights
        .iter()
        .all(|&wj| wj < 2 || weights.iter().all(|&wk| wk <= wj || wj + 2 <= wk))
}

/// Layer dimensions at a float point, rank decided by singular values.
pub fn layer_dims_f64(table: &CommutatorTable, x: &[f64], n: usize) -> Vec<usize> {
    let mut ech = NumericEchelon::new(FLOAT_RANK_TOL);
    let mut dims = Vec::new();
    for len in 1..=table.cap() {
        for (_, f) in table.level(len) {
            ech.insert(&f.eval_f64(x));
        }
        dims.push(ech.rank());
        if ech.rank() == n {
            break;
        }
    }
    dims
}

#[derive(Clone, Debug, Serialize)]
pub struct EquiregularitySample {
    pub point: Vec<f64>,
    pub layer_dims: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquiregularityReport {
    pub samples: Vec<EquiregularitySample>,
    pub equiregular_on_samples: bool,
}

/// Per-sample layer dimensions; equiregular iff they all agree.
pub fn equiregularity(frame: &Frame, samples: &[Vec<f64>], cap: usize) -> Result<EquiregularityReport> {
    let table = CommutatorTable::build(frame, cap)?;
    let n = frame.dimension();
    let samples: Vec<EquiregularitySample> = samples
        .iter()
        .map(|p| {
            check_dim(n, p.len())?;
            Ok(EquiregularitySample { point: p.clone(), layer_dims: layer_dims_f64(&table, p, n) })
        })
        .collect::<Result<_>>()?;
    let equiregular_on_samples = samples.windows(2).all(|w| w[0].layer_dims == w[1].layer_dims);
    Ok(EquiregularityReport { samples, equiregular_on_samples })
}
