use std::collections::HashMap;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    /// `m x n` plus a `1 x n` row, repeated over the batch axis.
    AddRow(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Neg(Var),
    Square(Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    LogSumExpRows(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    Clamp(Var, f64, f64),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Relu(_) => "relu",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Neg(_) => "neg",
            Op::Square(_) => "square",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::SumCols(_) => "sum_cols",
            Op::LogSumExpRows(_) => "logsumexp_rows",
            Op::ConcatCols(_) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::Clamp(..) => "clamp",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Input | Op::Param => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) => {
                vec![*a, *b]
            }
            Op::Relu(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Neg(a)
            | Op::Square(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumCols(a)
            | Op::LogSumExpRows(a)
            | Op::SliceCols(a, _, _)
            | Op::Clamp(a, _, _) => vec![*a],
            Op::ConcatCols(vs) => vs.clone(),
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Append-only record of a computation, evaluated eagerly as it is built.
///
/// Leaves are either inputs (constants) or parameters; [`Graph::backward`]
/// returns gradients for parameters only. Inputs always precede the nodes
/// that consume them, so the node order is a topological order.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_err(id: usize, op: &Op, msg: String) -> Error {
    Error::Graph {
        node: id,
        op: op.name(),
        msg,
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn row_lse(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Forward rule for a single op given the values of its inputs.
fn compute(id: usize, op: &Op, vals: &dyn Fn(Var) -> Tensor) -> Result<Tensor> {
    let same = |a: &Tensor, b: &Tensor| -> Result<()> {
        if a.shape() != b.shape() {
            return Err(shape_err(
                id,
                op,
                format!("operand shapes {:?} and {:?} differ", a.shape(), b.shape()),
            ));
        }
        Ok(())
    };
    let matrix = |a: &Tensor| -> Result<()> {
        if !a.is_matrix() {
            return Err(shape_err(id, op, format!("expected a matrix, got {:?}", a.shape())));
        }
        Ok(())
    };
    let out = match op {
        Op::Input | Op::Param => unreachable!("leaves are not computed"),
        Op::MatMul(a, b) => {
            let (a, b) = (vals(*a), vals(*b));
            matrix(&a)?;
            matrix(&b)?;
            if a.cols() != b.rows() {
                return Err(shape_err(
                    id,
                    op,
                    format!("cannot multiply {:?} by {:?}", a.shape(), b.shape()),
                ));
            }
            a.matmul(&b)
        }
        Op::Add(a, b) => {
            let (a, b) = (vals(*a), vals(*b));
            same(&a, &b)?;
            a.zip_map(&b, |x, y| x + y)
        }
        Op::Sub(a, b) => {
            let (a, b) = (vals(*a), vals(*b));
            same(&a, &b)?;
            a.zip_map(&b, |x, y| x - y)
        }
        Op::Mul(a, b) => {
            let (a, b) = (vals(*a), vals(*b));
            same(&a, &b)?;
            a.zip_map(&b, |x, y| x * y)
        }
        Op::AddRow(a, b) => {
            let (a, b) = (vals(*a), vals(*b));
            matrix(&a)?;
            matrix(&b)?;
            if b.rows() != 1 || b.cols() != a.cols() {
                return Err(shape_err(
                    id,
                    op,
                    format!("row {:?} does not broadcast over {:?}", b.shape(), a.shape()),
                ));
            }
            let n = a.cols();
            let mut out = a.clone();
            for (i, v) in out.data_mut().iter_mut().enumerate() {
                *v += b.data()[i % n];
            }
            out
        }
        Op::Relu(a) => vals(*a).map(|x| x.max(0.0)),
        Op::Tanh(a) => vals(*a).map(f64::tanh),
        Op::Sigmoid(a) => vals(*a).map(stable_sigmoid),
        Op::Exp(a) => vals(*a).map(f64::exp),
        Op::Log(a) => {
            let a = vals(*a);
            if let Some(v) = a.data().iter().find(|&&v| v <= 0.0) {
                return Err(shape_err(id, op, format!("log of non-positive value {v}")));
            }
            a.map(f64::ln)
        }
        Op::Neg(a) => vals(*a).map(|x| -x),
        Op::Square(a) => vals(*a).map(|x| x * x),
        Op::Scale(a, s) => vals(*a).map(|x| x * s),
        Op::AddScalar(a, s) => vals(*a).map(|x| x + s),
        Op::Sum(a) => Tensor::scalar(vals(*a).sum()),
        Op::Mean(a) => Tensor::scalar(vals(*a).mean()),
        Op::SumCols(a) => {
            let a = vals(*a);
            matrix(&a)?;
            let data = (0..a.rows()).map(|r| a.row_slice(r).iter().sum()).collect();
            Tensor::from_vec(a.rows(), 1, data)
        }
        Op::LogSumExpRows(a) => {
            let a = vals(*a);
            matrix(&a)?;
            let data = (0..a.rows()).map(|r| row_lse(a.row_slice(r))).collect();
            Tensor::from_vec(a.rows(), 1, data)
        }
        Op::ConcatCols(vs) => {
            let parts: Vec<Tensor> = vs.iter().map(|&v| vals(v)).collect();
            let rows = parts[0].rows();
            for p in &parts {
                matrix(p)?;
                if p.rows() != rows {
                    return Err(shape_err(
                        id,
                        op,
                        format!("row counts differ: {} vs {}", rows, p.rows()),
                    ));
                }
            }
            let cols: usize = parts.iter().map(Tensor::cols).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for p in &parts {
                    data.extend_from_slice(p.row_slice(r));
                }
            }
            Tensor::from_vec(rows, cols, data)
        }
        Op::SliceCols(a, start, end) => {
            let a = vals(*a);
            matrix(&a)?;
            if start >= end || *end > a.cols() {
                return Err(shape_err(
                    id,
                    op,
                    format!("column range {start}..{end} out of bounds for {:?}", a.shape()),
                ));
            }
            let mut data = Vec::with_capacity(a.rows() * (end - start));
            for r in 0..a.rows() {
                data.extend_from_slice(&a.row_slice(r)[*start..*end]);
            }
            Tensor::from_vec(a.rows(), end - start, data)
        }
        Op::Clamp(a, lo, hi) => vals(*a).map(|x| x.clamp(*lo, *hi)),
    };
    if !out.all_finite() {
        return Err(Error::NonFinite {
            node: id,
            op: op.name(),
        });
    }
    Ok(out)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn leaf(&mut self, op: Op, value: Tensor) -> Var {
        let needs_grad = matches!(op, Op::Param);
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf (data, labels, noise).
    pub fn input(&mut self, value: Tensor) -> Var {
        self.leaf(Op::Input, value)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(Op::Param, value)
    }

    pub fn is_param(&self, v: Var) -> bool {
        matches!(self.nodes[v.0].op, Op::Param)
    }

    fn push(&mut self, op: Op) -> Result<Var> {
        let id = self.nodes.len();
        let nodes = &self.nodes;
        let value = compute(id, &op, &|v: Var| nodes[v.0].value.clone())?;
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Ok(Var(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul(a, b))
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add(a, b))
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Sub(a, b))
    }
    /// Bias-style add of a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.push(Op::AddRow(a, row))
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Mul(a, b))
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Relu(a))
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Tanh(a))
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sigmoid(a))
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Exp(a))
    }
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Log(a))
    }
    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Neg(a))
    }
    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Square(a))
    }
    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.push(Op::Scale(a, s))
    }
    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        self.push(Op::AddScalar(a, s))
    }
    /// Sum of all entries, `1 x 1`.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sum(a))
    }
    /// Mean of all entries, `1 x 1`.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Mean(a))
    }
    /// Per-row sum, `m x n -> m x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        self.push(Op::SumCols(a))
    }
    /// Per-row max-shifted log-sum-exp, `m x n -> m x 1`.
    pub fn logsumexp_rows(&mut self, a: Var) -> Result<Var> {
        self.push(Op::LogSumExpRows(a))
    }
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Graph {
                node: self.nodes.len(),
                op: "concat_cols",
                msg: "nothing to concatenate".into(),
            });
        }
        self.push(Op::ConcatCols(parts.to_vec()))
    }
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.push(Op::SliceCols(a, start, end))
    }
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.push(Op::Clamp(a, lo, hi))
    }

    /// Repeat a `1 x n` row `rows` times, as `ones(rows x 1) @ row`.
    pub fn repeat_row(&mut self, row: Var, rows: usize) -> Result<Var> {
        let ones = self.input(Tensor::ones(rows, 1));
        self.matmul(ones, row)
    }

    /// Repeat an `m x 1` column `cols` times, as `col @ ones(1 x cols)`.
    pub fn repeat_col(&mut self, col: Var, cols: usize) -> Result<Var> {
        let ones = self.input(Tensor::ones(1, cols));
        self.matmul(col, ones)
    }

    /// Recompute every node with some leaves rebound. Unbound leaves keep
    /// their recorded values. Returns the value of every node, indexed by
    /// node id; the graph itself is unchanged.
    pub fn evaluate(&self, bindings: &HashMap<Var, Tensor>) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let v = match node.op {
                Op::Input | Op::Param => bindings
                    .get(&Var(id))
                    .cloned()
                    .unwrap_or_else(|| node.value.clone()),
                _ => compute(id, &node.op, &|v: Var| values[v.0].clone())?,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Like [`Graph::evaluate`] but stores the new values, so a following
    /// [`Graph::backward`] differentiates at the rebound point.
    pub fn rebind(&mut self, bindings: &HashMap<Var, Tensor>) -> Result<()> {
        let values = self.evaluate(bindings)?;
        for (node, v) in self.nodes.iter_mut().zip(values) {
            node.value = v;
        }
        Ok(())
    }

    /// Reverse-mode gradients of the scalar `loss` for every parameter leaf.
    /// Parameters with no path to `loss` get zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_val = self.value(loss);
        if loss_val.len() != 1 {
            return Err(Error::NonScalarLoss {
                node: loss.0,
                shape: loss_val.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::from_vec(1, 1, vec![1.0]).reshaped_like(loss_val));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Param | Op::Input) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let y = &node.value;
            let mut acc = |v: Var, t: Tensor| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            };
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Input | Op::Param => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        acc(*a, g.matmul(&val(*b).transpose()));
                    }
                    if self.nodes[b.0].needs_grad {
                        acc(*b, val(*a).transpose().matmul(&g));
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.map(|x| -x));
                }
                Op::AddRow(a, b) => {
                    let n = g.cols();
                    let mut col_sums = vec![0.0; n];
                    for (i, v) in g.data().iter().enumerate() {
                        col_sums[i % n] += v;
                    }
                    acc(*b, Tensor::from_vec(1, n, col_sums));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(val(*b), |gi, bi| gi * bi));
                    acc(*b, g.zip_map(val(*a), |gi, ai| gi * ai));
                }
                Op::Relu(a) => acc(*a, g.zip_map(val(*a), |gi, ai| if ai > 0.0 { gi } else { 0.0 })),
                Op::Tanh(a) => acc(*a, g.zip_map(y, |gi, yi| gi * (1.0 - yi * yi))),
                Op::Sigmoid(a) => acc(*a, g.zip_map(y, |gi, yi| gi * yi * (1.0 - yi))),
                Op::Exp(a) => acc(*a, g.zip_map(y, |gi, yi| gi * yi)),
                Op::Log(a) => acc(*a, g.zip_map(val(*a), |gi, ai| gi / ai)),
                Op::Neg(a) => acc(*a, g.map(|x| -x)),
                Op::Square(a) => acc(*a, g.zip_map(val(*a), |gi, ai| 2.0 * ai * gi)),
                Op::Scale(a, s) => acc(*a, g.map(|x| x * s)),
                Op::AddScalar(a, _) => acc(*a, g),
                Op::Sum(a) => {
                    let gv = g.item();
                    acc(*a, val(*a).map(|_| gv));
                }
                Op::Mean(a) => {
                    let n = val(*a).len() as f64;
                    let gv = g.item() / n;
                    acc(*a, val(*a).map(|_| gv));
                }
                Op::SumCols(a) => {
                    let av = val(*a);
                    let n = av.cols();
                    let data = (0..av.len()).map(|i| g.data()[i / n]).collect();
                    acc(*a, Tensor::from_vec(av.rows(), n, data));
                }
                Op::LogSumExpRows(a) => {
                    let av = val(*a);
                    let n = av.cols();
                    let data = (0..av.len())
                        .map(|i| {
                            let r = i / n;
                            g.data()[r] * (av.data()[i] - y.data()[r]).exp()
                        })
                        .collect();
                    acc(*a, Tensor::from_vec(av.rows(), n, data));
                }
                Op::ConcatCols(vs) => {
                    let mut start = 0;
                    for &v in vs {
                        let w = val(v).cols();
                        let mut data = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.row_slice(r)[start..start + w]);
                        }
                        acc(v, Tensor::from_vec(g.rows(), w, data));
                        start += w;
                    }
                }
                Op::SliceCols(a, start, _) => {
                    let av = val(*a);
                    let mut full = av.zeros_like();
                    for r in 0..g.rows() {
                        for (c, &gv) in g.row_slice(r).iter().enumerate() {
                            full.set(r, start + c, gv);
                        }
                    }
                    acc(*a, full);
                }
                Op::Clamp(a, lo, hi) => acc(
                    *a,
                    g.zip_map(val(*a), |gi, ai| if ai >= *lo && ai <= *hi { gi } else { 0.0 }),
                ),
            }
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::Param))
            .map(|(id, n)| {
                let g = grads
                    .get_mut(id)
                    .and_then(Option::take)
                    .unwrap_or_else(|| n.value.zeros_like());
                (Var(id), g)
            })
            .collect();
        Ok(Gradients { params })
    }
}

impl Tensor {
    fn reshaped_like(self, like: &Tensor) -> Tensor {
        Tensor::new(like.shape(), self.into_data()).expect("same element count")
    }
}

/// Gradients of one backward pass, keyed by parameter leaf.
#[derive(Clone, Debug)]
pub struct Gradients {
    params: HashMap<Var, Tensor>,
}

impl Gradients {
    /// Gradient for a parameter leaf. Panics if `v` is not a parameter of
    /// the graph the gradients came from.
    pub fn get(&self, v: Var) -> &Tensor {
        self.params
            .get(&v)
            .unwrap_or_else(|| panic!("node {} is not a parameter", v.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.params.iter().map(|(v, t)| (*v, t))
    }
}
