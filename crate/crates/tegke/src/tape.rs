//! Reverse-mode automatic differentiation over `f64` tensors.
//!
//! The tape is a define-by-run arena: every operation appends a node holding
//! its value and the indices of its inputs. `backward` walks the arena in
//! reverse and *emits new tape nodes* for the adjoints, so gradients are
//! themselves differentiable. That property is what lets the critic's
//! gradient-penalty term (a function of a gradient norm) be trained with the
//! same machinery as everything else.

use ndarray::{ArrayD, Axis, IxDyn};
use std::rc::Rc;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub usize);

#[derive(Debug, Clone)]
#[allow(dead_code)] // some size fields exist for debuggability only
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    AddConst(Var, f64),
    MulConst(Var, f64),
    /// Elementwise x^p with constant exponent.
    PowConst(Var, f64),
    /// Scalar (0-d) times tensor, elementwise broadcast.
    ScalarMul(Var, Var),
    Matmul(Var, Var),
    MatVec(Var, Var),
    Outer(Var, Var),
    Dot(Var, Var),
    Transpose(Var),
    SumAll(Var),
    SumAxis0(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Exp(Var),
    Ln(Var),
    Concat1(Vec<Var>),
    Slice1(Var, usize, usize),
    /// Place a 1-D slice back into a zero vector of length `n` at `start`.
    Pad1(Var, usize, usize),
    SliceRows(Var, usize, usize),
    /// Place rows back into a zero matrix of `n` rows at `start`.
    PadRows(Var, usize, usize),
    StackRows(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Rc<Vec<usize>>),
    /// Scatter-add rows of the input into a zero matrix of `n` rows.
    ScatterRows(Var, Rc<Vec<usize>>, usize),
    Reshape(Var, Vec<usize>),
}

struct Node {
    value: ArrayD<f64>,
    op: Op,
}

/// Arena of computation nodes. Rebuilt per forward pass.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: ArrayD<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable input (parameter or probe point).
    pub fn leaf(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Constant: structurally a leaf, gradients simply stop here.
    pub fn constant(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(ArrayD::from_elem(IxDyn(&[]), v))
    }

    pub fn vector(&mut self, v: &[f64]) -> Var {
        self.constant(ArrayD::from_shape_vec(IxDyn(&[v.len()]), v.to_vec()).unwrap())
    }

    pub fn value(&self, v: Var) -> &ArrayD<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a 0-d node as a plain `f64`.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let a = &self.nodes[v.0].value;
        debug_assert_eq!(a.ndim(), 0, "scalar_value on non-scalar node");
        *a.first().unwrap()
    }

    /// New leaf carrying a copy of the value; gradients do not flow through.
    pub fn detach(&mut self, v: Var) -> Var {
        let val = self.nodes[v.0].value.clone();
        self.constant(val)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(v, Op::Mul(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| -x);
        self.push(v, Op::Neg(a))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x + c);
        self.push(v, Op::AddConst(a, c))
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x * c);
        self.push(v, Op::MulConst(a, c))
    }

    pub fn pow_const(&mut self, a: Var, p: f64) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x.powf(p));
        self.push(v, Op::PowConst(a, p))
    }

    pub fn scalar_mul(&mut self, s: Var, t: Var) -> Var {
        let sv = self.scalar_value(s);
        let v = self.nodes[t.0].value.mapv(|x| x * sv);
        self.push(v, Op::ScalarMul(s, t))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("matmul lhs must be 2-d");
        let bv = self.nodes[b.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("matmul rhs must be 2-d");
        let v = av.dot(&bv).into_dyn();
        self.push(v, Op::Matmul(a, b))
    }

    pub fn matvec(&mut self, a: Var, x: Var) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("matvec lhs must be 2-d");
        let xv = self.nodes[x.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("matvec rhs must be 1-d");
        let v = av.dot(&xv).into_dyn();
        self.push(v, Op::MatVec(a, x))
    }

    pub fn outer(&mut self, a: Var, b: Var) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("outer lhs must be 1-d");
        let bv = self.nodes[b.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("outer rhs must be 1-d");
        let (n, m) = (av.len(), bv.len());
        let mut v = ndarray::Array2::<f64>::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                v[[i, j]] = av[i] * bv[j];
            }
        }
        self.push(v.into_dyn(), Op::Outer(a, b))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("dot lhs must be 1-d");
        let bv = self.nodes[b.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("dot rhs must be 1-d");
        let v = ArrayD::from_elem(IxDyn(&[]), av.dot(&bv));
        self.push(v, Op::Dot(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = ArrayD::from_elem(IxDyn(&[]), self.nodes[a.0].value.sum());
        self.push(v, Op::SumAll(a))
    }

    pub fn sum_axis0(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.sum_axis(Axis(0));
        self.push(v, Op::SumAxis0(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn concat1(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for p in parts {
            data.extend(self.nodes[p.0].value.iter().copied());
        }
        let v = ArrayD::from_shape_vec(IxDyn(&[data.len()]), data).unwrap();
        self.push(v, Op::Concat1(parts.to_vec()))
    }

    pub fn slice1(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = &self.nodes[a.0].value;
        let data: Vec<f64> = av.iter().skip(start).take(len).copied().collect();
        debug_assert_eq!(data.len(), len);
        let v = ArrayD::from_shape_vec(IxDyn(&[len]), data).unwrap();
        self.push(v, Op::Slice1(a, start, len))
    }

    pub fn pad1(&mut self, a: Var, start: usize, n: usize) -> Var {
        let av = &self.nodes[a.0].value;
        let mut data = vec![0.0; n];
        for (i, x) in av.iter().enumerate() {
            data[start + i] = *x;
        }
        let v = ArrayD::from_shape_vec(IxDyn(&[n]), data).unwrap();
        self.push(v, Op::Pad1(a, start, n))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("slice_rows input must be 2-d");
        let v = av.slice(ndarray::s![start..start + len, ..]).to_owned();
        self.push(v.into_dyn(), Op::SliceRows(a, start, len))
    }

    pub fn pad_rows(&mut self, a: Var, start: usize, n: usize) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("pad_rows input must be 2-d");
        let d = av.ncols();
        let mut v = ndarray::Array2::<f64>::zeros((n, d));
        v.slice_mut(ndarray::s![start..start + av.nrows(), ..])
            .assign(&av);
        self.push(v.into_dyn(), Op::PadRows(a, start, n))
    }

    /// Stack 1-d vectors of equal length into a matrix, one per row.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "stack_rows of nothing");
        let d = self.nodes[parts[0].0].value.len();
        let mut v = ndarray::Array2::<f64>::zeros((parts.len(), d));
        for (i, p) in parts.iter().enumerate() {
            for (j, x) in self.nodes[p.0].value.iter().enumerate() {
                v[[i, j]] = *x;
            }
        }
        self.push(v.into_dyn(), Op::StackRows(parts.to_vec()))
    }

    /// Concatenate matrices along rows (axis 0). Column counts must match.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let views: Vec<_> = parts
            .iter()
            .map(|p| {
                self.nodes[p.0]
                    .value
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .expect("concat_rows inputs must be 2-d")
            })
            .collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows shape mismatch");
        self.push(v.into_dyn(), Op::ConcatRows(parts.to_vec()))
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("gather_rows input must be 2-d");
        let d = av.ncols();
        let mut v = ndarray::Array2::<f64>::zeros((indices.len(), d));
        for (i, &ix) in indices.iter().enumerate() {
            v.row_mut(i).assign(&av.row(ix));
        }
        self.push(
            v.into_dyn(),
            Op::GatherRows(a, Rc::new(indices.to_vec())),
        )
    }

    /// Scatter-add rows of `a` into a zero matrix with `n` rows; duplicate
    /// indices accumulate.
    pub fn scatter_rows(&mut self, a: Var, indices: &[usize], n: usize) -> Var {
        let av = self.nodes[a.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("scatter_rows input must be 2-d");
        assert_eq!(av.nrows(), indices.len(), "scatter_rows index count");
        let d = av.ncols();
        let mut v = ndarray::Array2::<f64>::zeros((n, d));
        for (i, &ix) in indices.iter().enumerate() {
            let mut row = v.row_mut(ix);
            row += &av.row(i);
        }
        self.push(
            v.into_dyn(),
            Op::ScatterRows(a, Rc::new(indices.to_vec()), n),
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = self.nodes[a.0]
            .value
            .clone()
            .into_shape(IxDyn(shape))
            .expect("reshape size mismatch");
        self.push(v, Op::Reshape(a, shape.to_vec()))
    }

    /// Row `i` of a matrix as a 1-d vector.
    pub fn row(&mut self, a: Var, i: usize) -> Var {
        let d = {
            let av = self.nodes[a.0]
                .value
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("row input must be 2-d");
            av.ncols()
        };
        let g = self.gather_rows(a, &[i]);
        self.reshape(g, &[d])
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.len();
        let s = self.sum_all(a);
        self.mul_const(s, 1.0 / n as f64)
    }

    /// Numerically stable softmax of a 1-d vector.
    pub fn softmax1(&mut self, a: Var) -> Var {
        // Shifting by the (constant) max leaves value and gradient exact.
        let m = self
            .value(a)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let shifted = self.add_const(a, -m);
        let e = self.exp(shifted);
        let s = self.sum_all(e);
        let inv = self.pow_const(s, -1.0);
        self.scalar_mul(inv, e)
    }

    /// Numerically stable log-softmax of a 1-d vector.
    pub fn log_softmax1(&mut self, a: Var) -> Var {
        let m = self
            .value(a)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let shifted = self.add_const(a, -m);
        let e = self.exp(shifted);
        let s = self.sum_all(e);
        let ls = self.ln(s);
        let ones = self.constant(ArrayD::from_elem(self.nodes[a.0].value.raw_dim(), 1.0));
        let b = self.scalar_mul(ls, ones);
        self.sub(shifted, b)
    }

    /// Euclidean norm of all entries.
    pub fn norm(&mut self, a: Var) -> Var {
        let sq = self.mul(a, a);
        let s = self.sum_all(sq);
        self.pow_const(s, 0.5)
    }

    /// Max over axis 0, expressed through a constant argmax mask so that the
    /// result stays differentiable (exact almost everywhere).
    pub fn max_axis0(&mut self, a: Var) -> Var {
        let (n, d) = {
            let av = self.nodes[a.0]
                .value
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("max_axis0 input must be 2-d");
            (av.nrows(), av.ncols())
        };
        let mut mask = ndarray::Array2::<f64>::zeros((n, d));
        {
            let av = self.nodes[a.0]
                .value
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .unwrap();
            for j in 0..d {
                let mut best = 0usize;
                for i in 1..n {
                    if av[[i, j]] > av[[best, j]] {
                        best = i;
                    }
                }
                mask[[best, j]] = 1.0;
            }
        }
        let mask = self.constant(mask.into_dyn());
        let picked = self.mul(a, mask);
        self.sum_axis0(picked)
    }

    /// Reverse-mode sweep from `target`, which must be 0-d. Adjoints are
    /// appended to the tape as ordinary nodes, so they can be differentiated
    /// again by a later `backward` call.
    pub fn backward(&mut self, target: Var) -> Grads {
        assert_eq!(
            self.nodes[target.0].value.ndim(),
            0,
            "backward target must be scalar"
        );
        let mut grads: Vec<Option<Var>> = vec![None; target.0 + 1];
        let seed = self.scalar(1.0);
        grads[target.0] = Some(seed);
        for i in (0..=target.0).rev() {
            let Some(g) = grads[i] else { continue };
            let op = self.nodes[i].op.clone();
            let acc = |tape: &mut Tape, grads: &mut Vec<Option<Var>>, p: Var, c: Var| {
                grads[p.0] = Some(match grads[p.0] {
                    Some(prev) => tape.add(prev, c),
                    None => c,
                });
            };
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(self, &mut grads, a, g);
                    acc(self, &mut grads, b, g);
                }
                Op::Sub(a, b) => {
                    acc(self, &mut grads, a, g);
                    let ng = self.neg(g);
                    acc(self, &mut grads, b, ng);
                }
                Op::Mul(a, b) => {
                    let ga = self.mul(g, b);
                    let gb = self.mul(g, a);
                    acc(self, &mut grads, a, ga);
                    acc(self, &mut grads, b, gb);
                }
                Op::Neg(a) => {
                    let ng = self.neg(g);
                    acc(self, &mut grads, a, ng);
                }
                Op::AddConst(a, _) => acc(self, &mut grads, a, g),
                Op::MulConst(a, c) => {
                    let ga = self.mul_const(g, c);
                    acc(self, &mut grads, a, ga);
                }
                Op::PowConst(a, p) => {
                    let d = self.pow_const(a, p - 1.0);
                    let gd = self.mul(g, d);
                    let ga = self.mul_const(gd, p);
                    acc(self, &mut grads, a, ga);
                }
                Op::ScalarMul(s, t) => {
                    let gt_t = self.mul(g, t);
                    let gs = self.sum_all(gt_t);
                    let gt = self.scalar_mul(s, g);
                    acc(self, &mut grads, s, gs);
                    acc(self, &mut grads, t, gt);
                }
                Op::Matmul(a, b) => {
                    let bt = self.transpose(b);
                    let ga = self.matmul(g, bt);
                    let at = self.transpose(a);
                    let gb = self.matmul(at, g);
                    acc(self, &mut grads, a, ga);
                    acc(self, &mut grads, b, gb);
                }
                Op::MatVec(a, x) => {
                    let ga = self.outer(g, x);
                    let at = self.transpose(a);
                    let gx = self.matvec(at, g);
                    acc(self, &mut grads, a, ga);
                    acc(self, &mut grads, x, gx);
                }
                Op::Outer(a, b) => {
                    let ga = self.matvec(g, b);
                    let gt = self.transpose(g);
                    let gb = self.matvec(gt, a);
                    acc(self, &mut grads, a, ga);
                    acc(self, &mut grads, b, gb);
                }
                Op::Dot(a, b) => {
                    let ga = self.scalar_mul(g, b);
                    let gb = self.scalar_mul(g, a);
                    acc(self, &mut grads, a, ga);
                    acc(self, &mut grads, b, gb);
                }
                Op::Transpose(a) => {
                    let ga = self.transpose(g);
                    acc(self, &mut grads, a, ga);
                }
                Op::SumAll(a) => {
                    let ones =
                        self.constant(ArrayD::from_elem(self.nodes[a.0].value.raw_dim(), 1.0));
                    let ga = self.scalar_mul(g, ones);
                    acc(self, &mut grads, a, ga);
                }
                Op::SumAxis0(a) => {
                    let n = self.nodes[a.0].value.shape()[0];
                    let ones = self.vector(&vec![1.0; n]);
                    let ga = self.outer(ones, g);
                    acc(self, &mut grads, a, ga);
                }
                Op::Tanh(a) => {
                    let y = Var(i);
                    let y2 = self.mul(y, y);
                    let ny2 = self.neg(y2);
                    let d = self.add_const(ny2, 1.0);
                    let ga = self.mul(g, d);
                    acc(self, &mut grads, a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = Var(i);
                    let ny = self.neg(y);
                    let om = self.add_const(ny, 1.0);
                    let d = self.mul(y, om);
                    let ga = self.mul(g, d);
                    acc(self, &mut grads, a, ga);
                }
                Op::Relu(a) => {
                    let mask = self.nodes[a.0].value.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    let mask = self.constant(mask);
                    let ga = self.mul(g, mask);
                    acc(self, &mut grads, a, ga);
                }
                Op::Exp(a) => {
                    let y = Var(i);
                    let ga = self.mul(g, y);
                    acc(self, &mut grads, a, ga);
                }
                Op::Ln(a) => {
                    let inv = self.pow_const(a, -1.0);
                    let ga = self.mul(g, inv);
                    acc(self, &mut grads, a, ga);
                }
                Op::Concat1(parts) => {
                    let mut off = 0usize;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        let gp = self.slice1(g, off, len);
                        acc(self, &mut grads, p, gp);
                        off += len;
                    }
                }
                Op::Slice1(a, start, _) => {
                    let n = self.nodes[a.0].value.len();
                    let ga = self.pad1(g, start, n);
                    acc(self, &mut grads, a, ga);
                }
                Op::Pad1(a, start, _) => {
                    let len = self.nodes[a.0].value.len();
                    let ga = self.slice1(g, start, len);
                    acc(self, &mut grads, a, ga);
                }
                Op::SliceRows(a, start, _) => {
                    let n = self.nodes[a.0].value.shape()[0];
                    let ga = self.pad_rows(g, start, n);
                    acc(self, &mut grads, a, ga);
                }
                Op::PadRows(a, start, _) => {
                    let len = self.nodes[a.0].value.shape()[0];
                    let ga = self.slice_rows(g, start, len);
                    acc(self, &mut grads, a, ga);
                }
                Op::StackRows(parts) => {
                    for (r, p) in parts.into_iter().enumerate() {
                        let d = self.nodes[p.0].value.len();
                        let gr = self.slice_rows(g, r, 1);
                        let gr = self.reshape(gr, &[d]);
                        acc(self, &mut grads, p, gr);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0usize;
                    for p in parts {
                        let rows = self.nodes[p.0].value.shape()[0];
                        let gp = self.slice_rows(g, off, rows);
                        acc(self, &mut grads, p, gp);
                        off += rows;
                    }
                }
                Op::GatherRows(a, idx) => {
                    let n = self.nodes[a.0].value.shape()[0];
                    let ga = self.scatter_rows(g, &idx, n);
                    acc(self, &mut grads, a, ga);
                }
                Op::ScatterRows(a, idx, _) => {
                    let ga = self.gather_rows(g, &idx);
                    acc(self, &mut grads, a, ga);
                }
                Op::Reshape(a, _) => {
                    let shape: Vec<usize> = self.nodes[a.0].value.shape().to_vec();
                    let ga = self.reshape(g, &shape);
                    acc(self, &mut grads, a, ga);
                }
            }
        }
        Grads { grads }
    }
}

/// Adjoints produced by [`Tape::backward`], indexed by node id.
pub struct Grads {
    grads: Vec<Option<Var>>,
}

impl Grads {
    /// Gradient node for `v`, if `v` influenced the target.
    pub fn wrt(&self, v: Var) -> Option<Var> {
        self.grads.get(v.0).copied().flatten()
    }

    /// Gradient value for `v`, zeros if it did not influence the target.
    pub fn value(&self, tape: &Tape, v: Var) -> ArrayD<f64> {
        match self.wrt(v) {
            Some(g) => tape.value(g).clone(),
            None => ArrayD::zeros(tape.value(v).raw_dim()),
        }
    }
}
