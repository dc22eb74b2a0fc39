//! Reverse-mode differentiation over a recorded tape of 2-D `f64` matrices.
//!
//! Rows are batch elements, columns are features. Every operation checks its
//! output for NaN/Inf and fails with the operation's name. A tape supports
//! exactly one `backward` pass until `reset_grads` is called.

use ndarray::{s, Array2, Axis, Zip};

use super::DiffError;

pub type Mat = Array2<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    SumCols(Var),
    Sum(Var),
    Mean(Var),
    MinOf(Vec<Var>),
    BceWithLogits(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Mat>>,
    backward_done: bool,
}

type Result<T> = std::result::Result<T, DiffError>;

fn shape(m: &Mat) -> (usize, usize) {
    m.dim()
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy of a logit against a label.
pub fn bce_logit(x: f64, target: f64) -> f64 {
    x.max(0.0) - x * target + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, name: &'static str, value: Mat, op: Op, needs_grad: bool) -> Result<Var> {
        let finite = match value.as_slice_memory_order() {
            Some(xs) => xs.iter().all(|v| v.is_finite()),
            None => value.iter().all(|v| v.is_finite()),
        };
        if !finite {
            return Err(DiffError::NonFinite { op: name });
        }
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Mat) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    /// Leaf whose gradient is collected by `backward` (a parameter).
    pub fn variable(&mut self, value: Mat) -> Result<Var> {
        self.push("variable", value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.node(v).value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[[0, 0]]
    }

    fn same_shape(&self, name: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        if sa != sb {
            return Err(DiffError::Shape { op: name, left: sa, right: sb });
        }
        Ok(())
    }

    /// `x · wᵀ + b` with `x: n×in`, `w: out×in`, `b: 1×out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.ncols() != wv.ncols() {
            return Err(DiffError::Shape { op: "linear", left: shape(xv), right: shape(wv) });
        }
        if bv.dim() != (1, wv.nrows()) {
            return Err(DiffError::Shape { op: "linear", left: shape(wv), right: shape(bv) });
        }
        let out = xv.dot(&wv.t()) + bv;
        let ng = self.needs(&[x, w, b]);
        self.push("linear", out, Op::Linear { x, w, b }, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        let ng = self.needs(&[a, b]);
        self.push("add", out, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        let ng = self.needs(&[a, b]);
        self.push("sub", out, Op::Sub(a, b), ng)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        let ng = self.needs(&[a, b]);
        self.push("mul", out, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let out = self.value(a) * k;
        let ng = self.needs(&[a]);
        self.push("scale", out, Op::Scale(a, k), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(f64::tanh);
        let ng = self.needs(&[a]);
        self.push("tanh", out, Op::Tanh(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(logistic);
        let ng = self.needs(&[a]);
        self.push("sigmoid", out, Op::Sigmoid(a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(|v| v.max(0.0));
        let ng = self.needs(&[a]);
        self.push("relu", out, Op::Relu(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let out = self.value(a).mapv(|v| if v > 0.0 { v } else { slope * v });
        let ng = self.needs(&[a]);
        self.push("leaky_relu", out, Op::LeakyRelu(a, slope), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).map_err(|_| DiffError::Shape {
            op: "concat_cols",
            left: views.first().map_or((0, 0), |v| v.dim()),
            right: views.last().map_or((0, 0), |v| v.dim()),
        })?;
        let ng = self.needs(parts);
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).map_err(|_| DiffError::Shape {
            op: "concat_rows",
            left: views.first().map_or((0, 0), |v| v.dim()),
            right: views.last().map_or((0, 0), |v| v.dim()),
        })?;
        let ng = self.needs(parts);
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()), ng)
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a);
        if start > end || end > v.ncols() {
            return Err(DiffError::Shape { op: "slice_cols", left: shape(v), right: (start, end) });
        }
        let out = v.slice(s![.., start..end]).to_owned();
        let ng = self.needs(&[a]);
        self.push("slice_cols", out, Op::SliceCols(a, start), ng)
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a);
        if start > end || end > v.nrows() {
            return Err(DiffError::Shape { op: "slice_rows", left: shape(v), right: (start, end) });
        }
        let out = v.slice(s![start..end, ..]).to_owned();
        let ng = self.needs(&[a]);
        self.push("slice_rows", out, Op::SliceRows(a, start), ng)
    }

    /// Row sums, `n×m -> n×1`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ng = self.needs(&[a]);
        self.push("sum_cols", out, Op::SumCols(a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Mat::from_elem((1, 1), self.value(a).sum());
        let ng = self.needs(&[a]);
        self.push("sum", out, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(DiffError::Shape { op: "mean", left: shape(v), right: (1, 1) });
        }
        let out = Mat::from_elem((1, 1), v.sum() / v.len() as f64);
        let ng = self.needs(&[a]);
        self.push("mean", out, Op::Mean(a), ng)
    }

    /// Elementwise minimum over same-shaped inputs; ties go to the first.
    pub fn min_of(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(DiffError::Invalid("min_of needs at least one input".into()))?;
        for &p in &parts[1..] {
            self.same_shape("min_of", first, p)?;
        }
        let mut out = self.value(first).clone();
        for &p in &parts[1..] {
            Zip::from(&mut out).and(self.value(p)).for_each(|o, &v| {
                if v < *o {
                    *o = v
                }
            });
        }
        let ng = self.needs(parts);
        self.push("min_of", out, Op::MinOf(parts.to_vec()), ng)
    }

    /// Elementwise binary cross-entropy of logits against a fixed label.
    pub fn bce_with_logits(&mut self, logits: Var, target: f64) -> Result<Var> {
        let out = self.value(logits).mapv(|x| bce_logit(x, target));
        let ng = self.needs(&[logits]);
        self.push("bce_with_logits", out, Op::BceWithLogits(logits, target), ng)
    }

    pub fn reset_grads(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    /// Accumulates `d loss / d node` for every node that leads to a variable.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(DiffError::NoForward);
        }
        if self.backward_done {
            return Err(DiffError::AlreadyBackward);
        }
        let dim = self.value(loss).dim();
        if dim != (1, 1) {
            return Err(DiffError::NotScalar(dim));
        }
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Mat::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let nodes = &self.nodes;
            let mut acc = |v: Var, d: Mat| {
                if !nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &d,
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Linear { x, w, b } => {
                    if nodes[x.0].needs_grad {
                        acc(*x, g.dot(&nodes[w.0].value));
                    }
                    if nodes[w.0].needs_grad {
                        acc(*w, g.t().dot(&nodes[x.0].value));
                    }
                    acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, -&g);
                }
                Op::Mul(a, b) => {
                    acc(*a, &g * &nodes[b.0].value);
                    acc(*b, &g * &nodes[a.0].value);
                }
                Op::Scale(a, k) => acc(*a, &g * *k),
                Op::Tanh(a) => {
                    acc(*a, Zip::from(&g).and(&node.value).map_collect(|&d, &y| d * (1.0 - y * y)));
                }
                Op::Sigmoid(a) => {
                    acc(*a, Zip::from(&g).and(&node.value).map_collect(|&d, &y| d * (y * (1.0 - y))));
                }
                Op::Relu(a) => {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(&nodes[a.0].value).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    acc(*a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(&nodes[a.0].value).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d *= slope
                        }
                    });
                    acc(*a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let w = nodes[p.0].value.ncols();
                        acc(*p, g.slice(s![.., at..at + w]).to_owned());
                        at += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let h = nodes[p.0].value.nrows();
                        acc(*p, g.slice(s![at..at + h, ..]).to_owned());
                        at += h;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut d = Mat::zeros(nodes[a.0].value.dim());
                    d.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(*a, d);
                }
                Op::SliceRows(a, start) => {
                    let mut d = Mat::zeros(nodes[a.0].value.dim());
                    d.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(*a, d);
                }
                Op::SumCols(a) => {
                    let src = &nodes[a.0].value;
                    let d = g.broadcast(src.dim()).expect("n×1 broadcasts over columns").to_owned();
                    acc(*a, d);
                }
                Op::Sum(a) => acc(*a, Mat::from_elem(nodes[a.0].value.dim(), g[[0, 0]])),
                Op::Mean(a) => {
                    let src = &nodes[a.0].value;
                    acc(*a, Mat::from_elem(src.dim(), g[[0, 0]] / src.len() as f64));
                }
                Op::MinOf(parts) => {
                    let mut ds: Vec<Mat> = parts.iter().map(|_| Mat::zeros(g.dim())).collect();
                    for ((r, c), &gv) in g.indexed_iter() {
                        let target = node.value[[r, c]];
                        let winner = parts
                            .iter()
                            .position(|p| nodes[p.0].value[[r, c]] == target)
                            .expect("minimum comes from an input");
                        ds[winner][[r, c]] = gv;
                    }
                    for (p, d) in parts.iter().zip(ds) {
                        acc(*p, d);
                    }
                }
                Op::BceWithLogits(a, t) => {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(&nodes[a.0].value).for_each(|d, &x| *d *= logistic(x) - t);
                    acc(*a, d);
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        self.backward_done = true;
        Ok(())
    }

    pub fn grad(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zeros if the loss does not depend on it.
    pub fn grad_or_zeros(&self, v: Var) -> Mat {
        self.grad(v).cloned().unwrap_or_else(|| Mat::zeros(self.value(v).dim()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn half_squared_norm_has_gradient_x() {
        let mut t = Tape::new();
        let x = t.variable(array![[1.5, -2.0, 0.25]]).unwrap();
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq).unwrap();
        let loss = t.scale(s, 0.5).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap(), &array![[1.5, -2.0, 0.25]]);
    }

    #[test]
    fn unrelated_variable_gets_zero() {
        let mut t = Tape::new();
        let x = t.variable(array![[1.0]]).unwrap();
        let y = t.variable(array![[3.0, 4.0]]).unwrap();
        let loss = t.sum(x).unwrap();
        t.backward(loss).unwrap();
        assert!(t.grad(y).is_none());
        assert_eq!(t.grad_or_zeros(y), array![[0.0, 0.0]]);
    }

    #[test]
    fn backward_errors() {
        let mut t = Tape::new();
        assert_eq!(t.backward(Var(0)), Err(DiffError::NoForward));
        let x = t.variable(array![[1.0, 2.0]]).unwrap();
        assert_eq!(t.backward(x), Err(DiffError::NotScalar((1, 2))));
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.backward(s), Err(DiffError::AlreadyBackward));
        t.reset_grads();
        t.backward(s).unwrap();
    }

    #[test]
    fn shape_and_finiteness_errors_name_the_op() {
        let mut t = Tape::new();
        let a = t.constant(array![[1.0, 2.0]]).unwrap();
        let b = t.constant(array![[1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(t.add(a, b), Err(DiffError::Shape { op: "add", .. })));
        let big = t.constant(array![[1e308]]).unwrap();
        assert_eq!(t.scale(big, 10.0), Err(DiffError::NonFinite { op: "scale" }));
        assert!(matches!(t.constant(array![[f64::NAN]]), Err(DiffError::NonFinite { op: "constant" })));
    }

    #[test]
    fn identity_affine_and_nonlinearity_values() {
        let mut t = Tape::new();
        let x = t.constant(array![[0.3, -1.2, 4.0]]).unwrap();
        let w = t.constant(Mat::eye(3)).unwrap();
        let b = t.constant(Mat::zeros((1, 3))).unwrap();
        let y = t.linear(x, w, b).unwrap();
        assert_eq!(t.value(y), t.value(x));
        let z = t.constant(array![[0.0]]).unwrap();
        let th = t.tanh(z).unwrap();
        let sg = t.sigmoid(z).unwrap();
        assert_eq!(t.scalar(th), 0.0);
        assert_eq!(t.scalar(sg), 0.5);
    }

    #[test]
    fn saturating_ops_stay_finite() {
        let mut t = Tape::new();
        let x = t.variable(array![[-1e3, 1e3, 0.0]]).unwrap();
        let s = t.sigmoid(x).unwrap();
        let h = t.tanh(x).unwrap();
        let l0 = t.bce_with_logits(x, 0.0).unwrap();
        let l1 = t.bce_with_logits(x, 1.0).unwrap();
        let parts = [s, h, l0, l1].map(|v| t.sum(v).unwrap());
        let a = t.add(parts[0], parts[1]).unwrap();
        let b = t.add(parts[2], parts[3]).unwrap();
        let loss = t.add(a, b).unwrap();
        t.backward(loss).unwrap();
        assert!(t.grad(x).unwrap().iter().all(|v| v.is_finite()));
        assert!((t.value(l0)[[0, 1]] - 1e3).abs() < 1e-9);
    }

    #[test]
    fn min_of_routes_gradient_to_winner() {
        let mut t = Tape::new();
        let a = t.variable(array![[1.0, 5.0]]).unwrap();
        let b = t.variable(array![[2.0, 3.0]]).unwrap();
        let m = t.min_of(&[a, b]).unwrap();
        assert_eq!(t.value(m), &array![[1.0, 3.0]]);
        let loss = t.sum(m).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(a).unwrap(), &array![[1.0, 0.0]]);
        assert_eq!(t.grad(b).unwrap(), &array![[0.0, 1.0]]);
    }
}
