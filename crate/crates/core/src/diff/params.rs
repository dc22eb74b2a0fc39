use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Mat, Tape, Var};
use super::DiffError;

pub const PARAMS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Ordered collection of named weight matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Mat>,
}

/// Tape handles for every parameter of a set, in set order.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Mat] {
        &mut self.values
    }

    /// Total number of scalars.
    pub fn size(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }

    /// Places every parameter on the tape as a gradient-collecting variable.
    pub fn bind(&self, tape: &mut Tape) -> Result<Bound, DiffError> {
        self.values.iter().map(|v| tape.variable(v.clone())).collect::<Result<_, _>>().map(Bound)
    }

    /// Places every parameter on the tape as a constant.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Result<Bound, DiffError> {
        self.values.iter().map(|v| tape.constant(v.clone())).collect::<Result<_, _>>().map(Bound)
    }

    /// Gradients after `tape.backward`, in set order.
    pub fn grads(&self, tape: &Tape, bound: &Bound) -> Vec<Mat> {
        bound.0.iter().map(|&v| tape.grad_or_zeros(v).as_standard_layout().into_owned()).collect()
    }

    pub fn to_file(&self) -> ParamsFile {
        let params = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| {
                let (r, c) = v.dim();
                (n.clone(), TensorFile { shape: [r, c], values: v.iter().copied().collect() })
            })
            .collect();
        ParamsFile { format_version: PARAMS_FORMAT_VERSION, params }
    }

    /// Overwrites every parameter from `file`, which must hold exactly the
    /// same names and shapes.
    pub fn load_file(&mut self, file: &ParamsFile) -> Result<(), DiffError> {
        if file.format_version != PARAMS_FORMAT_VERSION {
            return Err(DiffError::Invalid(format!("unsupported parameter format_version {}", file.format_version)));
        }
        if file.params.len() != self.names.len() {
            return Err(DiffError::Invalid(format!(
                "expected {} parameters, file has {}",
                self.names.len(),
                file.params.len()
            )));
        }
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let t = file.params.get(name).ok_or_else(|| DiffError::Invalid(format!("missing parameter {name}")))?;
            if t.shape != [value.nrows(), value.ncols()] || t.values.len() != value.len() {
                return Err(DiffError::Invalid(format!(
                    "parameter {name}: shape {:?} does not match {:?}",
                    t.shape,
                    value.dim()
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(DiffError::Invalid(format!("parameter {name} has non-finite values")));
            }
            *value = Mat::from_shape_vec((t.shape[0], t.shape[1]), t.values.clone()).expect("shape checked");
        }
        Ok(())
    }
}

/// Serialized form: name -> shape and row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub format_version: u32,
    pub params: BTreeMap<String, TensorFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Uniform in `[-bound, bound]`.
pub fn uniform<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Mat {
    Mat::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

/// `x · wᵀ + b` with `w: out×in`, `b: 1×out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Affine {
    /// Registers `{name}.w` and `{name}.b`, both uniform in ±1/√in.
    pub fn new<R: Rng>(set: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let w = set.add(format!("{name}.w"), uniform(out_dim, in_dim, bound, rng));
        let b = set.add(format!("{name}.b"), uniform(1, out_dim, bound, rng));
        Affine { w, b, in_dim, out_dim }
    }

    pub fn apply(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var, DiffError> {
        tape.linear(x, bound.var(self.w), bound.var(self.b))
    }
}
