use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

use super::adam::AdamState;
use super::GruConfig;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// `out += x · self` for a row vector `x` of length `rows`.
    pub(crate) fn add_vec_mul(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += xi * w;
            }
        }
    }

    /// `out += self · d` for a column vector `d` of length `cols`.
    pub(crate) fn add_mul_vec(&self, d: &[T], out: &mut [T]) {
        debug_assert_eq!(d.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.row(i).iter().zip(d).map(|(&w, &dj)| w * dj).sum::<T>();
        }
    }

    /// `self += x ⊗ d`.
    pub(crate) fn add_outer(&mut self, x: &[T], d: &[T]) {
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (w, &dj) in self.row_mut(i).iter_mut().zip(d) {
                *w += xi * dj;
            }
        }
    }
}

/// All trainable tensors of the classifier.
///
/// Row-vector convention: a gate pre-activation is `x·W + h·U + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    /// vocab_size × embed_dim
    pub embedding: Matrix<T>,
    /// embed_dim × hidden
    pub w_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub w_h: Matrix<T>,
    /// hidden × hidden
    pub u_z: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_z: Vec<T>,
    pub b_r: Vec<T>,
    pub b_h: Vec<T>,
    /// hidden × n_classes
    pub w_out: Matrix<T>,
    pub b_out: Vec<T>,
}

/// Name and shape of a stored tensor. Vectors have shape `[len]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const TENSOR_NAMES: [&str; 12] = [
    "embedding",
    "w_z",
    "w_r",
    "w_h",
    "u_z",
    "u_r",
    "u_h",
    "b_z",
    "b_r",
    "b_h",
    "w_out",
    "b_out",
];

impl<T: Scalar> GruParams<T> {
    pub fn zeros(vocab_size: usize, embed_dim: usize, hidden: usize, n_classes: usize) -> Self {
        GruParams {
            embedding: Matrix::zeros(vocab_size, embed_dim),
            w_z: Matrix::zeros(embed_dim, hidden),
            w_r: Matrix::zeros(embed_dim, hidden),
            w_h: Matrix::zeros(embed_dim, hidden),
            u_z: Matrix::zeros(hidden, hidden),
            u_r: Matrix::zeros(hidden, hidden),
            u_h: Matrix::zeros(hidden, hidden),
            b_z: vec![T::zero(); hidden],
            b_r: vec![T::zero(); hidden],
            b_h: vec![T::zero(); hidden],
            w_out: Matrix::zeros(hidden, n_classes),
            b_out: vec![T::zero(); n_classes],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(
            self.vocab_size(),
            self.embed_dim(),
            self.hidden(),
            self.n_classes(),
        )
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    pub fn n_classes(&self) -> usize {
        self.b_out.len()
    }

    pub fn manifest(&self) -> Vec<TensorSpec> {
        let mat = |name: &str, m: &Matrix<T>| TensorSpec {
            name: name.to_string(),
            shape: vec![m.rows(), m.cols()],
        };
        let vec = |name: &str, v: &[T]| TensorSpec {
            name: name.to_string(),
            shape: vec![v.len()],
        };
        vec![
            mat("embedding", &self.embedding),
            mat("w_z", &self.w_z),
            mat("w_r", &self.w_r),
            mat("w_h", &self.w_h),
            mat("u_z", &self.u_z),
            mat("u_r", &self.u_r),
            mat("u_h", &self.u_h),
            vec("b_z", &self.b_z),
            vec("b_r", &self.b_r),
            vec("b_h", &self.b_h),
            mat("w_out", &self.w_out),
            vec("b_out", &self.b_out),
        ]
    }

    /// Flat views of every tensor, in manifest order.
    pub fn tensors(&self) -> [(&'static str, &[T]); 12] {
        [
            ("embedding", self.embedding.as_slice()),
            ("w_z", self.w_z.as_slice()),
            ("w_r", self.w_r.as_slice()),
            ("w_h", self.w_h.as_slice()),
            ("u_z", self.u_z.as_slice()),
            ("u_r", self.u_r.as_slice()),
            ("u_h", self.u_h.as_slice()),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
            ("w_out", self.w_out.as_slice()),
            ("b_out", &self.b_out),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [T]); 12] {
        [
            ("embedding", self.embedding.as_mut_slice()),
            ("w_z", self.w_z.as_mut_slice()),
            ("w_r", self.w_r.as_mut_slice()),
            ("w_h", self.w_h.as_mut_slice()),
            ("u_z", self.u_z.as_mut_slice()),
            ("u_r", self.u_r.as_mut_slice()),
            ("u_h", self.u_h.as_mut_slice()),
            ("b_z", &mut self.b_z),
            ("b_r", &mut self.b_r),
            ("b_h", &mut self.b_h),
            ("w_out", self.w_out.as_mut_slice()),
            ("b_out", &mut self.b_out),
        ]
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Rebuilds parameters from flat tensors listed in manifest order.
    pub fn from_tensors(specs: &[TensorSpec], mut data: Vec<Vec<T>>) -> Result<Self> {
        if specs.len() != TENSOR_NAMES.len() || data.len() != specs.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, got {}",
                TENSOR_NAMES.len(),
                specs.len()
            )));
        }
        for (spec, name) in specs.iter().zip(TENSOR_NAMES) {
            if spec.name != name {
                return Err(Error::Shape(format!(
                    "expected tensor {name:?}, found {:?}",
                    spec.name
                )));
            }
        }
        let dims = |i: usize, rank: usize| -> Result<&[usize]> {
            let s = &specs[i].shape;
            if s.len() != rank {
                return Err(Error::Shape(format!(
                    "tensor {} should have rank {rank}",
                    specs[i].name
                )));
            }
            Ok(s)
        };
        let emb = dims(0, 2)?;
        let (vocab, embed) = (emb[0], emb[1]);
        let hidden = dims(4, 2)?[0];
        let n_classes = dims(11, 1)?[0];
        let expected = Self::zeros(vocab, embed, hidden, n_classes).manifest();
        if expected != specs {
            return Err(Error::Shape(
                "tensor shapes are inconsistent with each other".into(),
            ));
        }
        let mut take = |i: usize| std::mem::take(&mut data[i]);
        let m = |s: &TensorSpec, d: Vec<T>| Matrix::from_vec(s.shape[0], s.shape[1], d);
        let v = |s: &TensorSpec, d: Vec<T>| -> Result<Vec<T>> {
            if d.len() != s.shape[0] {
                return Err(Error::Shape(format!("tensor {} has wrong length", s.name)));
            }
            Ok(d)
        };
        Ok(GruParams {
            embedding: m(&specs[0], take(0))?,
            w_z: m(&specs[1], take(1))?,
            w_r: m(&specs[2], take(2))?,
            w_h: m(&specs[3], take(3))?,
            u_z: m(&specs[4], take(4))?,
            u_r: m(&specs[5], take(5))?,
            u_h: m(&specs[6], take(6))?,
            b_z: v(&specs[7], take(7))?,
            b_r: v(&specs[8], take(8))?,
            b_h: v(&specs[9], take(9))?,
            w_out: m(&specs[10], take(10))?,
            b_out: v(&specs[11], take(11))?,
        })
    }
}

/// Seeded initial parameters and a zeroed optimizer state.
///
/// Embedding entries are standard normal. GRU and output weights are
/// uniform in ±1/√hidden. Biases start at zero.
pub fn init_params<T: Scalar>(
    config: &GruConfig,
    vocab_size: usize,
    n_classes: usize,
) -> Result<(GruParams<T>, AdamState<T>)> {
    config.validate()?;
    if vocab_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "vocab_size must be >= 2, got {vocab_size}"
        )));
    }
    if n_classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_classes must be >= 2, got {n_classes}"
        )));
    }
    let mut params = GruParams::zeros(vocab_size, config.embed_dim, config.hidden, n_classes);
    let mut rng = rng::seeded(config.seed);

    for x in params.embedding.as_mut_slice() {
        let sample: f64 = StandardNormal.sample(&mut rng);
        *x = T::lit(sample);
    }
    let bound = 1.0 / (config.hidden as f64).sqrt();
    let uniform = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    for (name, tensor) in params.tensors_mut() {
        if name == "embedding" || name.starts_with("b_") {
            continue;
        }
        for x in tensor.iter_mut() {
            *x = T::lit(rng.sample(uniform));
        }
    }
    let state = AdamState::new(&params);
    Ok((params, state))
}
