use rand::Rng;

use super::params::{uniform, Bound, ParamId, ParamSet};
use super::tape::{Mat, Tape, Var};
use super::DiffError;

const GATES: [&str; 4] = ["i", "f", "o", "g"];

/// Weights of one LSTM layer. Gate order is input, forget, output,
/// candidate; each `W` is `hidden × (input + hidden)` and acts on `[x ‖ h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: [ParamId; 4],
    pub b: [ParamId; 4],
}

/// Gate weights stacked into one `4·hidden × (input + hidden)` matrix on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BoundLstm {
    w: Var,
    b: Var,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmParams {
    /// Uniform ±1/√(input+hidden) init with the forget bias set to 1.
    pub fn new<R: Rng>(set: &mut ParamSet, name: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let fan_in = input_dim + hidden_dim;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = GATES.map(|g| set.add(format!("{name}.w_{g}"), uniform(hidden_dim, fan_in, bound, rng)));
        let b = GATES.map(|g| {
            let init = if g == "f" { Mat::ones((1, hidden_dim)) } else { uniform(1, hidden_dim, bound, rng) };
            set.add(format!("{name}.b_{g}"), init)
        });
        LstmParams { input_dim, hidden_dim, w, b }
    }

    pub fn bind(&self, tape: &mut Tape, bound: &Bound) -> Result<BoundLstm, DiffError> {
        let w = tape.concat_rows(&self.w.map(|id| bound.var(id)))?;
        let b = tape.concat_cols(&self.b.map(|id| bound.var(id)))?;
        Ok(BoundLstm { w, b, input_dim: self.input_dim, hidden_dim: self.hidden_dim })
    }
}

impl BoundLstm {
    /// One recurrence step over a batch: `x: n×input`, `h, c: n×hidden`.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> Result<(Var, Var), DiffError> {
        let (xd, hd) = (tape.value(x).ncols(), tape.value(h).ncols());
        if xd != self.input_dim || hd != self.hidden_dim || tape.value(c).ncols() != self.hidden_dim {
            return Err(DiffError::Shape { op: "lstm_step", left: (xd, hd), right: (self.input_dim, self.hidden_dim) });
        }
        let xh = tape.concat_cols(&[x, h])?;
        let gates = tape.linear(xh, self.w, self.b)?;
        let n = self.hidden_dim;
        let pre: Vec<Var> = (0..4).map(|k| tape.slice_cols(gates, k * n, (k + 1) * n)).collect::<Result<_, _>>()?;
        let i = tape.sigmoid(pre[0])?;
        let f = tape.sigmoid(pre[1])?;
        let o = tape.sigmoid(pre[2])?;
        let g = tape.tanh(pre[3])?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.tanh(c_next)?;
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }
}

/// Single-vector LSTM step outside of training.
pub fn lstm_step(
    p: &LstmParams,
    set: &ParamSet,
    input: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), DiffError> {
    let row = |v: &[f64]| Mat::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector");
    let mut tape = Tape::new();
    let bound = set.bind_frozen(&mut tape)?;
    let lstm = p.bind(&mut tape, &bound)?;
    let x = tape.constant(row(input))?;
    let h = tape.constant(row(h))?;
    let c = tape.constant(row(c))?;
    let (h2, c2) = lstm.step(&mut tape, x, h, c)?;
    Ok((tape.value(h2).iter().copied().collect(), tape.value(c2).iter().copied().collect()))
}
