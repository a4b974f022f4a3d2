use std::fmt;

use num::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::field::{CompiledField, VectorField};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{is_positive, rational_det, RationalEchelon};
use crate::polynomial::{parse_rational, to_f64, PolynomialJson, Rational};

/// A right-nested commutator index `(b1, ..., bi)` with one-based entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>, generators: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::StructureViolation("multi-index must be nonempty".into()));
        }
        for &e in &entries {
            if e == 0 || e > generators {
                return Err(Error::IndexOutOfRange { index: e, limit: generators });
            }
        }
        Ok(MultiIndex(entries))
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<usize>) -> Self {
        MultiIndex(entries)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The outermost generator index.
    pub fn outer(&self) -> usize {
        *self.0.last().unwrap()
    }

    /// The index with the outermost entry removed.
    pub fn inner(&self) -> Option<MultiIndex> {
        if self.0.len() < 2 {
            None
        } else {
            Some(MultiIndex(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn parse(s: &str, generators: usize) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad multi-index entry {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, generators)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// Constant symmetric positive-definite metric on the control space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metric {
    matrix: Vec<Vec<Rational>>,
}

impl Metric {
    pub fn identity(m: usize) -> Self {
        Metric {
            matrix: (0..m)
                .map(|i| (0..m).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
                .collect(),
        }
    }

    pub fn new(matrix: Vec<Vec<Rational>>) -> Result<Self> {
        let m = matrix.len();
        for row in &matrix {
            check_dim(m, row.len())?;
        }
        for i in 0..m {
            for j in 0..i {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::InvalidMetric("matrix is not symmetric".into()));
                }
            }
        }
        for k in 1..=m {
            let minor: Vec<Vec<Rational>> = matrix[..k].iter().map(|r| r[..k].to_vec()).collect();
            if !is_positive(&rational_det(&minor)) {
                return Err(Error::InvalidMetric(format!("leading principal minor {k} is not positive")));
            }
        }
        Ok(Metric { matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<Rational>] {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        *self == Metric::identity(self.size())
    }

    pub fn to_f64(&self) -> MetricF64 {
        MetricF64 { g: self.matrix.iter().map(|r| r.iter().map(to_f64).collect()).collect() }
    }

    /// `M^T G M` for a control-space change of basis `u = M v`.
    pub fn pull_back(&self, m: &[Vec<Rational>]) -> Result<Metric> {
        let k = self.size();
        check_dim(k, m.len())?;
        let cols = m[0].len();
        let mut out = vec![vec![Rational::zero(); cols]; cols];
        for a in 0..cols {
            for b in 0..cols {
                let mut s = Rational::zero();
                for i in 0..k {
                    for j in 0..k {
                        s += &m[i][a] * &self.matrix[i][j] * &m[j][b];
                    }
                }
                out[a][b] = s;
            }
        }
        Metric::new(out)
    }
}

/// Float copy of a metric used for length quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricF64 {
    pub g: Vec<Vec<f64>>,
}

impl MetricF64 {
    pub fn identity(m: usize) -> Self {
        MetricF64 { g: (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect() }
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, ui) in u.iter().enumerate() {
            for (j, uj) in u.iter().enumerate() {
                s += ui * self.g[i][j] * uj;
            }
        }
        s.max(0.0).sqrt()
    }

    pub fn quadratic(&self, u: &[f64]) -> f64 {
        let n = self.norm(u);
        n * n
    }
}

/// Ambient dimension, generator fields and metric of a polynomial frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    dimension: usize,
    generators: Vec<VectorField>,
    metric: Metric,
}

impl Frame {
    pub fn new(generators: Vec<VectorField>, metric: Metric) -> Result<Self> {
        let dimension = generators
            .first()
            .map(VectorField::dimension)
            .ok_or_else(|| Error::StructureViolation("frame needs at least one generator".into()))?;
        for g in &generators {
            check_dim(dimension, g.dimension())?;
        }
        check_dim(generators.len(), metric.size())?;
        Ok(Frame { dimension, generators, metric })
    }

    pub fn with_identity_metric(generators: Vec<VectorField>) -> Result<Self> {
        let m = generators.len();
        Self::new(generators, Metric::identity(m))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    /// Generator `X_j` with one-based index.
    pub fn generator(&self, j: usize) -> Result<&VectorField> {
        if j == 0 || j > self.generators.len() {
            return Err(Error::IndexOutOfRange { index: j, limit: self.generators.len() });
        }
        Ok(&self.generators[j - 1])
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn with_metric(&self, metric: Metric) -> Result<Frame> {
        Frame::new(self.generators.clone(), metric)
    }

    pub fn compile(&self) -> CompiledFrame {
        CompiledFrame {
            dimension: self.dimension,
            generators: self.generators.iter().map(VectorField::compile).collect(),
            metric: self.metric.to_f64(),
        }
    }

    /// Linear independence of the generators at `x`.
    pub fn independent_at(&self, x: &[Rational]) -> Result<bool> {
        let mut e = RationalEchelon::new();
        for g in &self.generators {
            if !e.insert(&g.eval(x)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> FrameJson {
        FrameJson {
            dimension: self.dimension,
            generators: self.generators.iter().map(VectorField::to_json).collect(),
            metric: if self.metric.is_identity() {
                Value::String("identity".into())
            } else {
                Value::Array(
                    self.metric
                        .matrix
                        .iter()
                        .map(|r| Value::Array(r.iter().map(|c| Value::String(c.to_string())).collect()))
                        .collect(),
                )
            },
        }
    }

    pub fn from_json(raw: &FrameJson) -> Result<Frame> {
        let generators = raw
            .generators
            .iter()
            .map(|g| {
                check_dim(raw.dimension, g.len())?;
                VectorField::from_json(g)
            })
            .collect::<Result<Vec<_>>>()?;
        let m = generators.len();
        let metric = match &raw.metric {
            Value::Null => Metric::identity(m),
            Value::String(s) if s == "identity" => Metric::identity(m),
            Value::Array(rows) => Metric::new(
                rows.iter()
                    .map(|r| {
                        r.as_array()
                            .ok_or_else(|| Error::Parse("metric rows must be arrays".into()))?
                            .iter()
                            .map(json_rational)
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )?,
            other => return Err(Error::Parse(format!("unsupported metric {other}"))),
        };
        Frame::new(generators, metric)
    }

    pub fn from_json_str(s: &str) -> Result<Frame> {
        Frame::from_json(&serde_json::from_str(s)?)
    }
}

pub(crate) fn json_rational(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::Parse(format!("expected a rational, got {other}"))),
    }
}

/// Wire form `{"dimension":n,"generators":[...],"metric":"identity"|[[...]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameJson {
    pub dimension: usize,
    pub generators: Vec<Vec<PolynomialJson>>,
    #[serde(default)]
    pub metric: Value,
}

impl Serialize for Frame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Float evaluation form of a frame.
#[derive(Clone, Debug)]
pub struct CompiledFrame {
    pub dimension: usize,
    pub generators: Vec<CompiledField>,
    pub metric: MetricF64,
}

impl CompiledFrame {
    /// Velocity `sum_j u_j X_j(x)` written into `out`.
    #[inline]
    pub fn velocity(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (g, &uj) in self.generators.iter().zip(u) {
            g.accumulate(x, uj, out);
        }
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }
}
