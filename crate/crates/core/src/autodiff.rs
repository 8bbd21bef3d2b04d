//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation as a node in an arena; [`Var`] is a
//! handle into it. [`Tape::grad`] runs one backward sweep, returns plain
//! arrays, and then clears the tape: gradients are not themselves recorded,
//! so higher-order derivatives are unavailable by construction, and any
//! handle from before the sweep is rejected as stale.
//!
//! Every value is two-dimensional. Scalars are `1 × 1`. Elementwise binary
//! operations broadcast along axes of length one.

use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array2, Axis, Zip};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("gradient requires a scalar output, got shape {0:?}")]
    NotAScalar((usize, usize)),
    #[error("cosine similarity of a zero vector (row {0})")]
    ZeroVector(usize),
    #[error("variable belongs to another tape or to one already consumed by a backward pass")]
    StaleVar,
    #[error("{0}: empty input")]
    Empty(&'static str),
}

type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    idx: usize,
    generation: u64,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    MatMul(usize, usize),
    Sum(usize),
    Mean(usize),
    SumRows(usize),
    SumCols(usize),
    Exp(usize),
    Log(usize),
    Sqrt(usize),
    Pow(usize, f64),
    Scale(usize, f64),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Gather(usize, Rc<[usize]>),
    ScatterAdd(usize, Rc<[usize]>),
    CosineRows(usize, usize),
    LogSumExpCols(usize),
    Sigmoid(usize),
    Silu(usize),
    CosineCutoff(usize, f64),
    Transpose(usize),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn fresh_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

pub struct Tape {
    nodes: Vec<Node>,
    generation: u64,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

fn shape(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

fn broadcast_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(AutodiffError::ShapeMismatch { op, left: a, right: b }),
    }
}

/// Sums `g` down to `target`, undoing broadcasting.
fn reduce_to(g: Array2<f64>, target: (usize, usize)) -> Array2<f64> {
    let mut g = g;
    if target.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if target.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

fn binary(a: &Array2<f64>, b: &Array2<f64>, out: (usize, usize), f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
    let a = a.broadcast(out).expect("checked broadcast");
    let b = b.broadcast(out).expect("checked broadcast");
    Zip::from(&a).and(&b).map_collect(|&x, &y| f(x, y))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn cutoff_value(d: f64, rc: f64) -> f64 {
    if d < rc {
        0.5 * ((std::f64::consts::PI * d / rc).cos() + 1.0)
    } else {
        0.0
    }
}

fn cutoff_slope(d: f64, rc: f64) -> f64 {
    if d < rc {
        -0.5 * std::f64::consts::PI / rc * (std::f64::consts::PI * d / rc).sin()
    } else {
        0.0
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), generation: fresh_generation() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn id(&self, v: Var) -> Result<usize> {
        if v.generation != self.generation || v.idx >= self.nodes.len() {
            return Err(AutodiffError::StaleVar);
        }
        Ok(v.idx)
    }

    fn push(&mut self, value: Array2<f64>, op: Op, parents: &[usize]) -> Var {
        let needs_grad = match op {
            Op::Leaf => false,
            _ => parents.iter().any(|&p| self.nodes[p].needs_grad),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var { idx: self.nodes.len() - 1, generation: self.generation }
    }

    /// A differentiable leaf.
    pub fn var(&mut self, value: Array2<f64>) -> Var {
        let v = self.push(value, Op::Leaf, &[]);
        self.nodes[v.idx].needs_grad = true;
        v
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, &[])
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), x))
    }

    pub fn value(&self, v: Var) -> Result<&Array2<f64>> {
        Ok(&self.nodes[self.id(v)?].value)
    }

    pub fn shape(&self, v: Var) -> Result<(usize, usize)> {
        Ok(shape(self.value(v)?))
    }

    pub fn scalar_value(&self, v: Var) -> Result<f64> {
        let value = self.value(v)?;
        if value.dim() != (1, 1) {
            return Err(AutodiffError::NotAScalar(value.dim()));
        }
        Ok(value[[0, 0]])
    }

    fn elementwise(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: fn(usize, usize) -> Op) -> Result<Var> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let out = broadcast_shape(name, shape(&self.nodes[ia].value), shape(&self.nodes[ib].value))?;
        let value = binary(&self.nodes[ia].value, &self.nodes[ib].value, out, f);
        Ok(self.push(value, op(ia, ib), &[ia, ib]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "add", |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "sub", |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "mul", |x, y| x * y, Op::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "div", |x, y| x / y, Op::Div)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let (sa, sb) = (shape(&self.nodes[ia].value), shape(&self.nodes[ib].value));
        if sa.1 != sb.0 {
            return Err(AutodiffError::ShapeMismatch { op: "matmul", left: sa, right: sb });
        }
        let value = self.nodes[ia].value.dot(&self.nodes[ib].value);
        Ok(self.push(value, Op::MatMul(ia, ib), &[ia, ib]))
    }

    fn unary(&mut self, a: Var, f: impl Fn(&Array2<f64>) -> Array2<f64>, op: fn(usize) -> Op) -> Result<Var> {
        let ia = self.id(a)?;
        let value = f(&self.nodes[ia].value);
        Ok(self.push(value, op(ia), &[ia]))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| Array2::from_elem((1, 1), x.sum()), Op::Sum)
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ia = self.id(a)?;
        if self.nodes[ia].value.is_empty() {
            return Err(AutodiffError::Empty("mean"));
        }
        self.unary(a, |x| Array2::from_elem((1, 1), x.sum() / x.len() as f64), Op::Mean)
    }

    /// Column sums, `r × c → 1 × c`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.sum_axis(Axis(0)).insert_axis(Axis(0)), Op::SumRows)
    }

    /// Row sums, `r × c → r × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.sum_axis(Axis(1)).insert_axis(Axis(1)), Op::SumCols)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(f64::exp), Op::Exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(f64::ln), Op::Log)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(f64::sqrt), Op::Sqrt)
    }

    pub fn pow(&mut self, a: Var, p: f64) -> Result<Var> {
        let ia = self.id(a)?;
        let value = self.nodes[ia].value.mapv(|x| x.powf(p));
        Ok(self.push(value, Op::Pow(ia, p), &[ia]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.id(a)?;
        let value = &self.nodes[ia].value * c;
        Ok(self.push(value, Op::Scale(ia, c), &[ia]))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(sigmoid), Op::Sigmoid)
    }

    pub fn silu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(|v| v * sigmoid(v)), Op::Silu)
    }

    /// Smooth envelope `(cos(π d / rc) + 1) / 2` for `d < rc`, else 0.
    pub fn cosine_cutoff(&mut self, a: Var, rc: f64) -> Result<Var> {
        let ia = self.id(a)?;
        let value = self.nodes[ia].value.mapv(|d| cutoff_value(d, rc));
        Ok(self.push(value, Op::CosineCutoff(ia, rc), &[ia]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.t().to_owned(), Op::Transpose)
    }

    fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        let name = if axis == Axis(1) { "concat_cols" } else { "concat_rows" };
        let ids = parts.iter().map(|&v| self.id(v)).collect::<Result<Vec<_>>>()?;
        let first = *ids.first().ok_or(AutodiffError::Empty(name))?;
        let other = 1 - axis.index();
        let base = shape(&self.nodes[first].value);
        let dims = |s: (usize, usize)| if other == 0 { s.0 } else { s.1 };
        for &i in &ids {
            let s = shape(&self.nodes[i].value);
            if dims(s) != dims(base) {
                return Err(AutodiffError::ShapeMismatch { op: name, left: base, right: s });
            }
        }
        let views: Vec<_> = ids.iter().map(|&i| self.nodes[i].value.view()).collect();
        let value = ndarray::concatenate(axis, &views).expect("checked shapes");
        let op = if axis == Axis(1) { Op::ConcatCols(ids.clone()) } else { Op::ConcatRows(ids.clone()) };
        Ok(self.push(value, op, &ids))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(1))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(0))
    }

    /// Row `k` of the result is row `index[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: &Rc<[usize]>) -> Result<Var> {
        let ia = self.id(a)?;
        let src = &self.nodes[ia].value;
        let n = src.nrows();
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(AutodiffError::IndexOutOfRange { op: "gather_rows", index: bad, len: n });
        }
        let value = src.select(Axis(0), index);
        Ok(self.push(value, Op::Gather(ia, index.clone()), &[ia]))
    }

    /// Row `index[k]` of the `n × c` result accumulates row `k` of `a`.
    pub fn scatter_add_rows(&mut self, a: Var, index: &Rc<[usize]>, n: usize) -> Result<Var> {
        let ia = self.id(a)?;
        let src = &self.nodes[ia].value;
        if index.len() != src.nrows() {
            return Err(AutodiffError::ShapeMismatch { op: "scatter_add_rows", left: shape(src), right: (index.len(), 1) });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(AutodiffError::IndexOutOfRange { op: "scatter_add_rows", index: bad, len: n });
        }
        let mut value = Array2::zeros((n, src.ncols()));
        for (k, &i) in index.iter().enumerate() {
            let mut row = value.row_mut(i);
            row += &src.row(k);
        }
        Ok(self.push(value, Op::ScatterAdd(ia, index.clone()), &[ia]))
    }

    /// Row-wise cosine similarity of two `r × c` matrices, giving `r × 1`.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let (x, y) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if x.dim() != y.dim() {
            return Err(AutodiffError::ShapeMismatch { op: "cosine_similarity", left: x.dim(), right: y.dim() });
        }
        let mut value = Array2::zeros((x.nrows(), 1));
        for r in 0..x.nrows() {
            let (xr, yr) = (x.row(r), y.row(r));
            let (nx, ny) = (xr.dot(&xr).sqrt(), yr.dot(&yr).sqrt());
            if nx == 0.0 || ny == 0.0 {
                return Err(AutodiffError::ZeroVector(r));
            }
            value[[r, 0]] = xr.dot(&yr) / (nx * ny);
        }
        Ok(self.push(value, Op::CosineRows(ia, ib), &[ia, ib]))
    }

    /// Row-wise `log Σ_j exp(a_ij)`, computed with the max-shift, giving
    /// `r × 1`.
    pub fn logsumexp(&mut self, a: Var) -> Result<Var> {
        let ia = self.id(a)?;
        let x = &self.nodes[ia].value;
        if x.ncols() == 0 {
            return Err(AutodiffError::Empty("logsumexp"));
        }
        let value = Array2::from_shape_fn((x.nrows(), 1), |(r, _)| {
            let row = x.row(r);
            let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + row.fold(0.0, |s, &v| s + (v - m).exp()).ln()
        });
        Ok(self.push(value, Op::LogSumExpCols(ia), &[ia]))
    }

    /// Gradients of the scalar `out` with respect to each of `wrt`, then
    /// clears the tape. Inputs that `out` does not depend on, and
    /// constants, get zeros.
    pub fn grad(&mut self, out: Var, wrt: &[Var]) -> Result<Vec<Array2<f64>>> {
        let io = self.id(out)?;
        let targets = wrt.iter().map(|&v| self.id(v)).collect::<Result<Vec<_>>>()?;
        let out_shape = shape(&self.nodes[io].value);
        if out_shape != (1, 1) {
            return Err(AutodiffError::NotAScalar(out_shape));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; io + 1];
        grads[io] = Some(Array2::ones((1, 1)));
        for i in (0..=io).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            let contributions = self.backward_step(i, g.clone());
            grads[i] = Some(g);
            for (p, gp) in contributions {
                if !self.nodes[p].needs_grad {
                    continue;
                }
                match &mut grads[p] {
                    Some(acc) => *acc += &gp,
                    slot @ None => *slot = Some(gp),
                }
            }
        }
        let result = targets
            .iter()
            .map(|&t| grads.get(t).cloned().flatten().unwrap_or_else(|| Array2::zeros(self.nodes[t].value.dim())))
            .collect();
        self.nodes.clear();
        self.generation = fresh_generation();
        Ok(result)
    }

    fn backward_step(&self, i: usize, g: Array2<f64>) -> Vec<(usize, Array2<f64>)> {
        let val = |k: usize| &self.nodes[k].value;
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => vec![(*a, reduce_to(g.clone(), val(*a).dim())), (*b, reduce_to(g, val(*b).dim()))],
            Op::Sub(a, b) => vec![(*a, reduce_to(g.clone(), val(*a).dim())), (*b, reduce_to(-g, val(*b).dim()))],
            Op::Mul(a, b) => {
                let ga = binary(&g, val(*b), g.dim(), |x, y| x * y);
                let gb = binary(&g, val(*a), g.dim(), |x, y| x * y);
                vec![(*a, reduce_to(ga, val(*a).dim())), (*b, reduce_to(gb, val(*b).dim()))]
            }
            Op::Div(a, b) => {
                let ga = binary(&g, val(*b), g.dim(), |x, y| x / y);
                let gy = binary(&g, out, g.dim(), |x, q| -x * q);
                let gb = binary(&gy, val(*b), g.dim(), |x, y| x / y);
                vec![(*a, reduce_to(ga, val(*a).dim())), (*b, reduce_to(gb, val(*b).dim()))]
            }
            Op::MatMul(a, b) => vec![(*a, g.dot(&val(*b).t())), (*b, val(*a).t().dot(&g))],
            Op::Sum(a) => vec![(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]]))],
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                vec![(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]] / n))]
            }
            Op::SumRows(a) | Op::SumCols(a) => {
                vec![(*a, g.broadcast(val(*a).dim()).expect("reduced shape").to_owned())]
            }
            Op::Exp(a) => vec![(*a, g * out)],
            Op::Log(a) => vec![(*a, g / val(*a))],
            Op::Sqrt(a) => vec![(*a, g * &out.mapv(|y| 0.5 / y))],
            Op::Pow(a, p) => vec![(*a, g * &val(*a).mapv(|x| p * x.powf(p - 1.0)))],
            Op::Scale(a, c) => vec![(*a, g * *c)],
            Op::Sigmoid(a) => vec![(*a, g * &out.mapv(|s| s * (1.0 - s)))],
            Op::Silu(a) => vec![(*a, g * &val(*a).mapv(|x| {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }))],
            Op::CosineCutoff(a, rc) => vec![(*a, g * &val(*a).mapv(|d| cutoff_slope(d, *rc)))],
            Op::Transpose(a) => vec![(*a, g.t().to_owned())],
            Op::ConcatCols(parts) | Op::ConcatRows(parts) => {
                let cols = matches!(self.nodes[i].op, Op::ConcatCols(_));
                let mut start = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let (r, c) = val(p).dim();
                        let piece = if cols {
                            g.slice(s![.., start..start + c]).to_owned()
                        } else {
                            g.slice(s![start..start + r, ..]).to_owned()
                        };
                        start += if cols { c } else { r };
                        (p, piece)
                    })
                    .collect()
            }
            Op::Gather(a, index) => {
                let mut ga = Array2::zeros(val(*a).dim());
                for (k, &r) in index.iter().enumerate() {
                    let mut row = ga.row_mut(r);
                    row += &g.row(k);
                }
                vec![(*a, ga)]
            }
            Op::ScatterAdd(a, index) => vec![(*a, g.select(Axis(0), index))],
            Op::CosineRows(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let mut ga = Array2::zeros(x.dim());
                let mut gb = Array2::zeros(y.dim());
                for r in 0..x.nrows() {
                    let (xr, yr) = (x.row(r), y.row(r));
                    let (nx, ny) = (xr.dot(&xr).sqrt(), yr.dot(&yr).sqrt());
                    let sim = out[[r, 0]];
                    let gr = g[[r, 0]];
                    ga.row_mut(r).assign(&((&yr / (nx * ny) - &xr * (sim / (nx * nx))) * gr));
                    gb.row_mut(r).assign(&((&xr / (nx * ny) - &yr * (sim / (ny * ny))) * gr));
                }
                vec![(*a, ga), (*b, gb)]
            }
            Op::LogSumExpCols(a) => {
                let x = val(*a);
                let mut ga = Array2::zeros(x.dim());
                for r in 0..x.nrows() {
                    let lse = out[[r, 0]];
                    if lse == f64::NEG_INFINITY {
                        continue;
                    }
                    let gr = g[[r, 0]];
                    ga.row_mut(r).assign(&x.row(r).mapv(|v| (v - lse).exp() * gr));
                }
                vec![(*a, ga)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn square_at_three() {
        let mut t = Tape::new();
        let x = t.var(array![[3.0]]);
        let y = t.mul(x, x).unwrap();
        assert_eq!(t.grad(y, &[x]).unwrap()[0], array![[6.0]]);
    }

    #[test]
    fn logsumexp_gradient_is_softmax() {
        let mut t = Tape::new();
        let v = t.var(array![[0.0, 0.0]]);
        let l = t.logsumexp(v).unwrap();
        assert!((t.scalar_value(l).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(t.grad(l, &[v]).unwrap()[0], array![[0.5, 0.5]]);
        let mut t = Tape::new();
        let v = t.var(array![[1000.0, 1000.0]]);
        let l = t.logsumexp(v).unwrap();
        assert!((t.scalar_value(l).unwrap() - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn scatter_add_and_adjoint() {
        let mut t = Tape::new();
        let m = t.var(array![[1.0], [2.0], [3.0]]);
        let idx: Rc<[usize]> = Rc::from(vec![0, 0, 1]);
        let s = t.scatter_add_rows(m, &idx, 2).unwrap();
        assert_eq!(t.value(s).unwrap(), &array![[3.0], [3.0]]);
        let w = t.constant(array![[10.0], [20.0]]);
        let p = t.mul(s, w).unwrap();
        let total = t.sum(p).unwrap();
        assert_eq!(t.grad(total, &[m]).unwrap()[0], array![[10.0], [10.0], [20.0]]);
    }

    #[test]
    fn sum_and_half_square_norm() {
        let mut t = Tape::new();
        let x = t.var(array![[1.0, -2.0], [0.5, 4.0]]);
        let s = t.sum(x).unwrap();
        assert_eq!(t.grad(s, &[x]).unwrap()[0], Array2::<f64>::ones((2, 2)));
        let mut t = Tape::new();
        let xv = array![[1.0, -2.0], [0.5, 4.0]];
        let x = t.var(xv.clone());
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq).unwrap();
        let h = t.scale(s, 0.5).unwrap();
        assert_eq!(t.grad(h, &[x]).unwrap()[0], xv);
    }

    #[test]
    fn unreached_and_constant_inputs_get_zeros() {
        let mut t = Tape::new();
        let x = t.var(array![[1.0, 2.0]]);
        let y = t.var(array![[5.0]]);
        let c = t.constant(array![[3.0, 3.0]]);
        let p = t.mul(x, c).unwrap();
        let s = t.sum(p).unwrap();
        let g = t.grad(s, &[x, y, c]).unwrap();
        assert_eq!(g[0], array![[3.0, 3.0]]);
        assert_eq!(g[1], array![[0.0]]);
        assert_eq!(g[2], array![[0.0, 0.0]]);
    }

    #[test]
    fn broadcasting_reduces_gradients() {
        let mut t = Tape::new();
        let a = t.var(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let b = t.var(array![[10.0, 20.0, 30.0]]);
        let c = t.var(array![[2.0]]);
        let ab = t.add(a, b).unwrap();
        let abc = t.mul(ab, c).unwrap();
        let s = t.sum(abc).unwrap();
        let g = t.grad(s, &[a, b, c]).unwrap();
        assert_eq!(g[0], Array2::from_elem((2, 3), 2.0));
        assert_eq!(g[1], array![[4.0, 4.0, 4.0]]);
        assert_eq!(g[2], array![[21.0 + 120.0]]);
    }

    #[test]
    fn errors() {
        let mut t = Tape::new();
        let a = t.var(Array2::zeros((2, 3)));
        let b = t.var(Array2::zeros((3, 2)));
        assert!(matches!(t.add(a, b), Err(AutodiffError::ShapeMismatch { .. })));
        assert!(matches!(t.matmul(a, a), Err(AutodiffError::ShapeMismatch { .. })));
        let idx: Rc<[usize]> = Rc::from(vec![5]);
        assert!(matches!(t.gather_rows(a, &idx), Err(AutodiffError::IndexOutOfRange { index: 5, len: 2, .. })));
        assert!(matches!(t.cosine_similarity(a, a), Err(AutodiffError::ZeroVector(0))));
        assert_eq!(t.grad(a, &[a]), Err(AutodiffError::NotAScalar((2, 3))));
        let mut other = Tape::new();
        assert_eq!(other.sum(a), Err(AutodiffError::StaleVar));
    }

    #[test]
    fn tape_is_consumed_by_backward() {
        let mut t = Tape::new();
        let x = t.var(array![[2.0]]);
        let y = t.exp(x).unwrap();
        t.grad(y, &[x]).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.grad(y, &[x]), Err(AutodiffError::StaleVar));
        assert_eq!(t.value(x).err(), Some(AutodiffError::StaleVar));
    }

    #[test]
    fn cutoff_envelope() {
        let mut t = Tape::new();
        let d = t.var(array![[0.0], [2.5], [5.0], [7.0]]);
        let e = t.cosine_cutoff(d, 5.0).unwrap();
        let v = t.value(e).unwrap().clone();
        assert_eq!(v[[0, 0]], 1.0);
        assert!((v[[1, 0]] - 0.5).abs() < 1e-15);
        assert_eq!(v[[2, 0]], 0.0);
        assert_eq!(v[[3, 0]], 0.0);
        let s = t.sum(e).unwrap();
        let g = t.grad(s, &[d]).unwrap().remove(0);
        assert!((g[[1, 0]] + 0.5 * std::f64::consts::PI / 5.0).abs() < 1e-15);
        assert_eq!(g[[3, 0]], 0.0);
    }
}
