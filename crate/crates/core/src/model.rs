//! Single-hidden-layer random-weight model shared by the source and
//! target estimators, plus its JSON file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::numcore::{dot, Matrix};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rscn,
    Citl,
}

/// Output of one hidden node over every row of `x`.
pub fn node_output(omega: &[f64], bias: f64, act: Activation, x: &Matrix) -> Vec<f64> {
    (0..x.rows())
        .map(|i| act.apply(dot(omega, x.row(i)) + bias))
        .collect()
}

/// L×N matrix of hidden outputs, entry `(j, i) = g(ω_j·x_i + b_j)`.
pub fn hidden_output(w: &Matrix, b: &[f64], act: Activation, x: &Matrix) -> Result<Matrix> {
    if w.rows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weight rows, {} biases",
            w.rows(),
            b.len()
        )));
    }
    if w.rows() > 0 && w.cols() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "weights expect {} features, input has {}",
            w.cols(),
            x.cols()
        )));
    }
    let mut h = Matrix::zeros(w.rows(), x.rows());
    for j in 0..w.rows() {
        h.row_mut(j)
            .copy_from_slice(&node_output(w.row(j), b[j], act, x));
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowModel {
    pub kind: ModelKind,
    /// L×d input weights, one row per hidden node.
    pub w: Matrix,
    pub b: Vec<f64>,
    /// L×m output weights.
    pub beta: Matrix,
    pub activation: Activation,
    pub norm: NormStats,
    pub d: usize,
    pub m: usize,
    pub seed: u64,
    /// Resolved training configuration, echoed into the model file.
    pub config: serde_json::Value,
}

impl ShallowModel {
    pub fn empty(kind: ModelKind, d: usize, m: usize, activation: Activation, norm: NormStats) -> Self {
        ShallowModel {
            kind,
            w: Matrix::zeros(0, d),
            b: Vec::new(),
            beta: Matrix::zeros(0, m),
            activation,
            norm,
            d,
            m,
            seed: 0,
            config: serde_json::Value::Null,
        }
    }

    pub fn node_count(&self) -> usize {
        self.b.len()
    }

    /// Number of stored weights: L·d + L + L·m.
    pub fn parameter_count(&self) -> usize {
        self.w.as_slice().len() + self.b.len() + self.beta.as_slice().len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.b.len();
        if self.w.shape() != (l, self.d) || self.beta.shape() != (l, self.m) {
            return Err(Error::DimensionMismatch(format!(
                "model shapes W {:?}, b {}, beta {:?} for d={}, m={}",
                self.w.shape(),
                l,
                self.beta.shape(),
                self.d,
                self.m
            )));
        }
        if self.norm.dim() != self.d || self.norm.std.len() != self.d {
            return Err(Error::DimensionMismatch("normalization dimension".into()));
        }
        if !self.w.is_finite() || !self.beta.is_finite() || self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(())
    }

    /// Predictions for already-normalized inputs, N×m.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        predict(self, x)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            kind: self.kind,
            d: self.d,
            l: self.node_count(),
            m: self.m,
            activation: self.activation,
            norm: self.norm.clone(),
            w: self.w.to_rows(),
            b: self.b.clone(),
            beta: self.beta.to_rows(),
            seed: self.seed,
            config: self.config.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format_version {}",
                f.format_version
            )));
        }
        if f.w.len() != f.l || f.beta.len() != f.l || f.b.len() != f.l {
            return Err(Error::Parse("row counts disagree with L".into()));
        }
        let w = if f.l == 0 {
            Matrix::zeros(0, f.d)
        } else {
            Matrix::from_rows(&f.w)?
        };
        let beta = if f.l == 0 {
            Matrix::zeros(0, f.m)
        } else {
            Matrix::from_rows(&f.beta)?
        };
        let model = ShallowModel {
            kind: f.kind,
            w,
            b: f.b,
            beta,
            activation: f.activation,
            norm: f.norm,
            d: f.d,
            m: f.m,
            seed: f.seed,
            config: f.config,
        };
        model.validate()?;
        Ok(model)
    }
}

/// `Hᵀβ` for inputs already normalized with the model's statistics. A
/// model with no nodes predicts zeros.
pub fn predict(model: &ShallowModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.d {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, input has {}",
            model.d,
            x.cols()
        )));
    }
    if model.node_count() == 0 {
        return Ok(Matrix::zeros(x.rows(), model.m));
    }
    let h = hidden_output(&model.w, &model.b, model.activation, x)?;
    h.transpose().matmul(&model.beta)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    d: usize,
    #[serde(rename = "L")]
    l: usize,
    m: usize,
    activation: Activation,
    norm: NormStats,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    beta: Vec<Vec<f64>>,
    seed: u64,
    config: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngStream;
    use proptest::prelude::*;

    fn one_node(beta: f64) -> ShallowModel {
        let mut m = ShallowModel::empty(ModelKind::Rscn, 3, 1, Activation::Sigmoid, NormStats::identity(3));
        m.w = Matrix::zeros(1, 3);
        m.b = vec![0.0];
        m.beta = Matrix::from_rows(&[vec![beta]]).unwrap();
        m
    }

    #[test]
    fn hidden_output_constant_cases() {
        let x = Matrix::from_vec(4, 3, (0..12).map(|v| v as f64).collect()).unwrap();
        let h = hidden_output(&Matrix::zeros(2, 3), &[0.0, 0.0], Activation::Sigmoid, &x).unwrap();
        assert_eq!(h.shape(), (2, 4));
        assert!(h.as_slice().iter().all(|&v| v == 0.5));
        let h = hidden_output(&Matrix::zeros(1, 3), &[100.0], Activation::Sigmoid, &x).unwrap();
        assert!(h.as_slice().iter().all(|&v| (v - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn hidden_output_shape_mismatch() {
        let x = Matrix::zeros(4, 2);
        assert!(hidden_output(&Matrix::zeros(1, 3), &[0.0], Activation::Sigmoid, &x).is_err());
        assert!(hidden_output(&Matrix::zeros(2, 2), &[0.0], Activation::Sigmoid, &x).is_err());
    }

    #[test]
    fn predict_constant_node() {
        let x = Matrix::from_vec(5, 3, (0..15).map(|v| v as f64 * 0.3).collect()).unwrap();
        let y = one_node(2.0).predict(&x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn predict_zero_nodes() {
        let m = ShallowModel::empty(ModelKind::Citl, 3, 1, Activation::Sigmoid, NormStats::identity(3));
        let y = m.predict(&Matrix::zeros(7, 3)).unwrap();
        assert_eq!(y.shape(), (7, 1));
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
        assert!(m.predict(&Matrix::zeros(7, 4)).is_err());
    }

    #[test]
    fn parameter_count_matches_layout() {
        let mut rng = RngStream::new(3);
        let (l, d) = (9, 102);
        let mut m = ShallowModel::empty(ModelKind::Citl, d, 1, Activation::Sigmoid, NormStats::identity(d));
        m.w = Matrix::from_vec(l, d, (0..l * d).map(|_| rng.uniform()).collect()).unwrap();
        m.b = vec![0.1; l];
        m.beta = Matrix::zeros(l, 1);
        assert_eq!(m.parameter_count(), l * (d + 2));
    }

    proptest! {
        #[test]
        fn json_roundtrip_is_bitwise(seed in any::<u64>(), l in 0usize..5, d in 1usize..6) {
            let mut rng = RngStream::new(seed);
            let mut m = ShallowModel::empty(ModelKind::Rscn, d, 1, Activation::Tanh, NormStats::identity(d));
            m.w = Matrix::from_vec(l, d, (0..l * d).map(|_| rng.normal(0.0, 50.0)).collect()).unwrap();
            m.b = (0..l).map(|_| rng.normal(0.0, 1e-3)).collect();
            m.beta = Matrix::from_vec(l, 1, (0..l).map(|_| rng.normal(0.0, 1e4)).collect()).unwrap();
            m.seed = seed;
            let text = m.to_json().unwrap();
            let back = ShallowModel::from_json(&text).unwrap();
            prop_assert_eq!(&back, &m);
            let x = Matrix::from_vec(4, d, (0..4 * d).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap();
            let a = m.predict(&x).unwrap();
            let b = back.predict(&x).unwrap();
            prop_assert!(a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
            prop_assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn json_has_expected_fields() {
        let text = one_node(2.0).to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["format_version", "kind", "d", "L", "m", "activation", "norm", "W", "b", "beta", "seed", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["kind"], "rscn");
        assert_eq!(v["activation"], "sigmoid");
    }
}
