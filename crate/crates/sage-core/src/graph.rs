//! Reverse-mode automatic differentiation on an arena tape.
//!
//! A [`Graph`] owns a flat vector of nodes. Insertion order is the
//! topological order: every op only refers to earlier nodes, so the backward
//! pass is a single reverse sweep over the arena. Values are computed
//! eagerly when an op is recorded; [`Graph::backward`] then fills a gradient
//! slot per node, allocating only for nodes that require gradients.
//!
//! Shape errors in op constructors are programmer errors and panic.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node inside one specific [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    AddConst(NodeId),
    MulConst(NodeId, f64),
    PowConst(NodeId, f64),
    Exp(NodeId),
    Log(NodeId),
    Sigmoid(NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    RowMean(NodeId),
    MeanRows(NodeId),
    ScaleRows(NodeId, NodeId),
    MulRowVec(NodeId, NodeId),
    GatherRows(NodeId, Vec<usize>),
    PickPerRow(NodeId, Vec<usize>),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    Reshape(NodeId),
}

struct Node<S: Scalar> {
    op: Op,
    value: Tensor<S>,
    requires_grad: bool,
}

/// Gradients of one scalar root with respect to every node that needed them.
pub struct Gradients<S: Scalar> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient for `id`, if the node required one and influenced the root.
    pub fn get(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.grads[id.0].as_ref()
    }

    /// Gradient for `id`; panics when absent.
    pub fn wrt(&self, id: NodeId) -> &Tensor<S> {
        self.grads[id.0]
            .as_ref()
            .unwrap_or_else(|| panic!("no gradient recorded for node {}", id.0))
    }
}

#[derive(Default)]
pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
}

fn matmul_raw<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
    let mut out = vec![S::zero(); m * n];
    for i in 0..m {
        let arow = a.row(i);
        for (p, &av) in arow.iter().enumerate() {
            if av == S::zero() {
                continue;
            }
            let brow = b.row(p);
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    Tensor::new(vec![m, n], out).expect("matmul shape")
}

fn transpose_raw<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    let (m, n) = (a.rows(), a.cols());
    let mut out = vec![S::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.at2(i, j);
        }
    }
    Tensor::new(vec![n, m], out).expect("transpose shape")
}

fn stable_sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Row-wise softmax with max subtraction; tolerates `-inf` entries as long
/// as at least one entry per row is finite.
fn softmax_row_into<S: Scalar>(row: &[S], out: &mut [S]) {
    let mx = row.iter().cloned().fold(S::neg_infinity(), S::max);
    debug_assert!(mx.is_finite(), "softmax row has no finite entry");
    let mut sum = S::zero();
    for (o, &x) in out.iter_mut().zip(row) {
        let e = (x - mx).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Tensor<S>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Inserts a tensor as a leaf. Gradients are only tracked through leaves
    /// with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> NodeId {
        self.push(Op::Leaf, value, requires_grad)
    }

    /// Leaf that never tracks gradients.
    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.leaf(value, false)
    }

    pub fn scalar_const(&mut self, v: f64) -> NodeId {
        self.constant(Tensor::scalar(S::of_f64(v)))
    }

    fn binary_same_shape(&self, a: NodeId, b: NodeId, what: &str) {
        assert_eq!(
            self.value(a).shape(),
            self.value(b).shape(),
            "{what}: shape mismatch"
        );
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "add");
        let data: Vec<S> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        let rg = self.needs(&[a, b]);
        self.push(Op::Add(a, b), t, rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "sub");
        let data: Vec<S> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x - y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        let rg = self.needs(&[a, b]);
        self.push(Op::Sub(a, b), t, rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "mul");
        let data: Vec<S> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        let rg = self.needs(&[a, b]);
        self.push(Op::Mul(a, b), t, rg)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(|x| -x);
        let rg = self.needs(&[a]);
        self.push(Op::Neg(a), t, rg)
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let cs = S::of_f64(c);
        let t = self.value(a).map(|x| x + cs);
        let rg = self.needs(&[a]);
        self.push(Op::AddConst(a), t, rg)
    }

    pub fn mul_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let cs = S::of_f64(c);
        let t = self.value(a).map(|x| x * cs);
        let rg = self.needs(&[a]);
        self.push(Op::MulConst(a, c), t, rg)
    }

    /// Elementwise power with a constant exponent. For fractional exponents
    /// the inputs must be positive.
    pub fn pow_const(&mut self, a: NodeId, p: f64) -> NodeId {
        let ps = S::of_f64(p);
        let t = self.value(a).map(|x| x.powf(ps));
        let rg = self.needs(&[a]);
        self.push(Op::PowConst(a, p), t, rg)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(|x| x.exp());
        let rg = self.needs(&[a]);
        self.push(Op::Exp(a), t, rg)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(|x| x.ln());
        let rg = self.needs(&[a]);
        self.push(Op::Log(a), t, rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a).map(stable_sigmoid);
        let rg = self.needs(&[a]);
        self.push(Op::Sigmoid(a), t, rg)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let t = matmul_raw(self.value(a), self.value(b));
        let rg = self.needs(&[a, b]);
        self.push(Op::MatMul(a, b), t, rg)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let t = transpose_raw(self.value(a));
        let rg = self.needs(&[a]);
        self.push(Op::Transpose(a), t, rg)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: S = self.value(a).data().iter().cloned().sum();
        let rg = self.needs(&[a]);
        self.push(Op::SumAll(a), Tensor::scalar(s), rg)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert!(!v.is_empty(), "mean of empty tensor");
        let n = S::of_f64(v.len() as f64);
        let s: S = v.data().iter().cloned().sum();
        let rg = self.needs(&[a]);
        self.push(Op::MeanAll(a), Tensor::scalar(s / n), rg)
    }

    /// Per-row mean of a matrix: `[n, c] -> [n]`.
    pub fn row_mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rank(), 2, "row_mean wants rank 2");
        let c = S::of_f64(v.cols() as f64);
        let data: Vec<S> = (0..v.rows())
            .map(|i| v.row(i).iter().cloned().sum::<S>() / c)
            .collect();
        let rg = self.needs(&[a]);
        self.push(Op::RowMean(a), Tensor::from_vec(data), rg)
    }

    /// Mean across rows: `[n, c] -> [1, c]`.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rank(), 2, "mean_rows wants rank 2");
        assert!(v.rows() > 0, "mean_rows on zero rows");
        let (n, c) = (v.rows(), v.cols());
        let inv = S::of_f64(1.0 / n as f64);
        let mut data = vec![S::zero(); c];
        for i in 0..n {
            for (acc, &x) in data.iter_mut().zip(v.row(i)) {
                *acc += x;
            }
        }
        for x in data.iter_mut() {
            *x *= inv;
        }
        let rg = self.needs(&[a]);
        self.push(Op::MeanRows(a), Tensor::matrix(1, c, data).unwrap(), rg)
    }

    /// Scales row `i` of `a` by element `i` of the rank-1 tensor `s`.
    pub fn scale_rows(&mut self, a: NodeId, s: NodeId) -> NodeId {
        let (va, vs) = (self.value(a), self.value(s));
        assert_eq!(va.rank(), 2, "scale_rows wants rank-2 lhs");
        assert_eq!(vs.rank(), 1, "scale_rows wants rank-1 scales");
        assert_eq!(va.rows(), vs.len(), "scale_rows row count");
        let c = va.cols();
        let mut data = Vec::with_capacity(va.len());
        for i in 0..va.rows() {
            let f = vs.data()[i];
            data.extend(va.row(i).iter().map(|&x| x * f));
        }
        let t = Tensor::matrix(va.rows(), c, data).unwrap();
        let rg = self.needs(&[a, s]);
        self.push(Op::ScaleRows(a, s), t, rg)
    }

    /// Multiplies every row of `a` elementwise by the rank-1 tensor `r`.
    pub fn mul_row_vec(&mut self, a: NodeId, r: NodeId) -> NodeId {
        let (va, vr) = (self.value(a), self.value(r));
        assert_eq!(va.rank(), 2, "mul_row_vec wants rank-2 lhs");
        assert_eq!(vr.rank(), 1, "mul_row_vec wants rank-1 rhs");
        assert_eq!(va.cols(), vr.len(), "mul_row_vec width");
        let mut data = Vec::with_capacity(va.len());
        for i in 0..va.rows() {
            data.extend(va.row(i).iter().zip(vr.data()).map(|(&x, &y)| x * y));
        }
        let t = Tensor::matrix(va.rows(), va.cols(), data).unwrap();
        let rg = self.needs(&[a, r]);
        self.push(Op::MulRowVec(a, r), t, rg)
    }

    /// Selects rows of `a` by index; rows may repeat. Gradient scatters back
    /// with accumulation, which is what embedding lookups need.
    pub fn gather_rows(&mut self, a: NodeId, idx: &[usize]) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rank(), 2, "gather_rows wants rank 2");
        for &i in idx {
            assert!(i < v.rows(), "gather_rows index {i} out of {}", v.rows());
        }
        let c = v.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(v.row(i));
        }
        let t = Tensor::matrix(idx.len(), c, data).unwrap();
        let rg = self.needs(&[a]);
        self.push(Op::GatherRows(a, idx.to_vec()), t, rg)
    }

    /// Picks element `idx[i]` from row `i`: `[n, c] -> [n]`.
    pub fn pick_per_row(&mut self, a: NodeId, idx: &[usize]) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rank(), 2, "pick_per_row wants rank 2");
        assert_eq!(v.rows(), idx.len(), "pick_per_row row count");
        for &j in idx {
            assert!(j < v.cols(), "pick_per_row index {j} out of {}", v.cols());
        }
        let data: Vec<S> = idx.iter().enumerate().map(|(i, &j)| v.at2(i, j)).collect();
        let rg = self.needs(&[a]);
        self.push(Op::PickPerRow(a, idx.to_vec()), Tensor::from_vec(data), rg)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rank(), 2, "softmax_rows wants rank 2");
        let (n, c) = (v.rows(), v.cols());
        let mut data = vec![S::zero(); n * c];
        for i in 0..n {
            softmax_row_into(v.row(i), &mut data[i * c..(i + 1) * c]);
        }
        let t = Tensor::matrix(n, c, data).unwrap();
        let rg = self.needs(&[a]);
        self.push(Op::SoftmaxRows(a), t, rg)
    }

    /// Same data, new shape; element count must match.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        let v = self.value(a);
        assert_eq!(
            v.len(),
            shape.iter().product::<usize>(),
            "reshape {:?} -> {:?}",
            v.shape(),
            shape
        );
        let t = Tensor::new(shape, v.data().to_vec()).unwrap();
        let rg = self.needs(&[a]);
        self.push(Op::Reshape(a), t, rg)
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rank(), 2, "log_softmax_rows wants rank 2");
        let (n, c) = (v.rows(), v.cols());
        let mut data = vec![S::zero(); n * c];
        for i in 0..n {
            let row = v.row(i);
            let mx = row.iter().cloned().fold(S::neg_infinity(), S::max);
            debug_assert!(mx.is_finite(), "log_softmax row has no finite entry");
            let lse = row
                .iter()
                .map(|&x| (x - mx).exp())
                .sum::<S>()
                .ln()
                + mx;
            for (o, &x) in data[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o = x - lse;
            }
        }
        let t = Tensor::matrix(n, c, data).unwrap();
        let rg = self.needs(&[a]);
        self.push(Op::LogSoftmaxRows(a), t, rg)
    }

    /// Reverse sweep from a single-element root. Returns one gradient per
    /// node that requires gradients and influences the root.
    pub fn backward(&self, root: NodeId) -> Gradients<S> {
        assert_eq!(
            self.value(root).len(),
            1,
            "backward root must be a single element, got shape {:?}",
            self.value(root).shape()
        );
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::full(self.value(root).shape().to_vec(), S::one()));

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.accumulate_inputs(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn add_grad(&self, grads: &mut [Option<Tensor<S>>], id: NodeId, delta: Tensor<S>) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(acc) => {
                debug_assert_eq!(acc.shape(), delta.shape());
                for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                    *a += *d;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn accumulate_inputs(&self, i: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.add_grad(grads, *a, g.clone());
                self.add_grad(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.add_grad(grads, *a, g.clone());
                self.add_grad(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let da: Vec<S> = g.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
                let db: Vec<S> = g.data().iter().zip(va.data()).map(|(&x, &y)| x * y).collect();
                self.add_grad(grads, *a, Tensor::new(va.shape().to_vec(), da).unwrap());
                self.add_grad(grads, *b, Tensor::new(vb.shape().to_vec(), db).unwrap());
            }
            Op::Neg(a) => self.add_grad(grads, *a, g.map(|x| -x)),
            Op::AddConst(a) => self.add_grad(grads, *a, g.clone()),
            Op::MulConst(a, c) => {
                let cs = S::of_f64(*c);
                self.add_grad(grads, *a, g.map(|x| x * cs));
            }
            Op::PowConst(a, p) => {
                let ps = S::of_f64(*p);
                let va = self.value(*a);
                let da: Vec<S> = g
                    .data()
                    .iter()
                    .zip(va.data())
                    .map(|(&gi, &x)| gi * ps * x.powf(ps - S::one()))
                    .collect();
                self.add_grad(grads, *a, Tensor::new(va.shape().to_vec(), da).unwrap());
            }
            Op::Exp(a) => {
                let out = &node.value;
                let da: Vec<S> = g.data().iter().zip(out.data()).map(|(&x, &y)| x * y).collect();
                self.add_grad(grads, *a, Tensor::new(out.shape().to_vec(), da).unwrap());
            }
            Op::Log(a) => {
                let va = self.value(*a);
                let da: Vec<S> = g.data().iter().zip(va.data()).map(|(&x, &y)| x / y).collect();
                self.add_grad(grads, *a, Tensor::new(va.shape().to_vec(), da).unwrap());
            }
            Op::Sigmoid(a) => {
                let out = &node.value;
                let da: Vec<S> = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(&gi, &s)| gi * s * (S::one() - s))
                    .collect();
                self.add_grad(grads, *a, Tensor::new(out.shape().to_vec(), da).unwrap());
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.add_grad(grads, *a, matmul_raw(g, &transpose_raw(vb)));
                self.add_grad(grads, *b, matmul_raw(&transpose_raw(va), g));
            }
            Op::Transpose(a) => self.add_grad(grads, *a, transpose_raw(g)),
            Op::SumAll(a) => {
                let va = self.value(*a);
                self.add_grad(grads, *a, Tensor::full(va.shape().to_vec(), g.item()));
            }
            Op::MeanAll(a) => {
                let va = self.value(*a);
                let f = g.item() / S::of_f64(va.len() as f64);
                self.add_grad(grads, *a, Tensor::full(va.shape().to_vec(), f));
            }
            Op::RowMean(a) => {
                let va = self.value(*a);
                let (n, c) = (va.rows(), va.cols());
                let inv = S::of_f64(1.0 / c as f64);
                let mut da = vec![S::zero(); n * c];
                for i in 0..n {
                    let gi = g.data()[i] * inv;
                    for x in da[i * c..(i + 1) * c].iter_mut() {
                        *x = gi;
                    }
                }
                self.add_grad(grads, *a, Tensor::matrix(n, c, da).unwrap());
            }
            Op::MeanRows(a) => {
                let va = self.value(*a);
                let (n, c) = (va.rows(), va.cols());
                let inv = S::of_f64(1.0 / n as f64);
                let mut da = Vec::with_capacity(n * c);
                for _ in 0..n {
                    da.extend(g.data().iter().map(|&x| x * inv));
                }
                self.add_grad(grads, *a, Tensor::matrix(n, c, da).unwrap());
            }
            Op::ScaleRows(a, s) => {
                let (va, vs) = (self.value(*a), self.value(*s));
                let (n, c) = (va.rows(), va.cols());
                let mut da = Vec::with_capacity(n * c);
                let mut ds = vec![S::zero(); n];
                for i in 0..n {
                    let f = vs.data()[i];
                    let grow = g.row(i);
                    da.extend(grow.iter().map(|&x| x * f));
                    ds[i] = grow
                        .iter()
                        .zip(va.row(i))
                        .map(|(&x, &y)| x * y)
                        .sum();
                }
                self.add_grad(grads, *a, Tensor::matrix(n, c, da).unwrap());
                self.add_grad(grads, *s, Tensor::from_vec(ds));
            }
            Op::MulRowVec(a, r) => {
                let (va, vr) = (self.value(*a), self.value(*r));
                let (n, c) = (va.rows(), va.cols());
                let mut da = Vec::with_capacity(n * c);
                let mut dr = vec![S::zero(); c];
                for i in 0..n {
                    let grow = g.row(i);
                    da.extend(grow.iter().zip(vr.data()).map(|(&x, &y)| x * y));
                    for ((d, &gx), &ax) in dr.iter_mut().zip(grow).zip(va.row(i)) {
                        *d += gx * ax;
                    }
                }
                self.add_grad(grads, *a, Tensor::matrix(n, c, da).unwrap());
                self.add_grad(grads, *r, Tensor::from_vec(dr));
            }
            Op::GatherRows(a, idx) => {
                let va = self.value(*a);
                let c = va.cols();
                let mut da = vec![S::zero(); va.len()];
                for (out_i, &src) in idx.iter().enumerate() {
                    let grow = g.row(out_i);
                    for (d, &x) in da[src * c..(src + 1) * c].iter_mut().zip(grow) {
                        *d += x;
                    }
                }
                self.add_grad(grads, *a, Tensor::matrix(va.rows(), c, da).unwrap());
            }
            Op::PickPerRow(a, idx) => {
                let va = self.value(*a);
                let c = va.cols();
                let mut da = vec![S::zero(); va.len()];
                for (i, &j) in idx.iter().enumerate() {
                    da[i * c + j] += g.data()[i];
                }
                self.add_grad(grads, *a, Tensor::matrix(va.rows(), c, da).unwrap());
            }
            Op::SoftmaxRows(a) => {
                let p = &node.value;
                let (n, c) = (p.rows(), p.cols());
                let mut da = vec![S::zero(); n * c];
                for i in 0..n {
                    let prow = p.row(i);
                    let grow = g.row(i);
                    let dot: S = prow.iter().zip(grow).map(|(&x, &y)| x * y).sum();
                    for ((d, &pi), &gi) in da[i * c..(i + 1) * c].iter_mut().zip(prow).zip(grow) {
                        *d = pi * (gi - dot);
                    }
                }
                self.add_grad(grads, *a, Tensor::matrix(n, c, da).unwrap());
            }
            Op::Reshape(a) => {
                let va = self.value(*a);
                let back = Tensor::new(va.shape().to_vec(), g.data().to_vec()).unwrap();
                self.add_grad(grads, *a, back);
            }
            Op::LogSoftmaxRows(a) => {
                let out = &node.value;
                let (n, c) = (out.rows(), out.cols());
                let mut da = vec![S::zero(); n * c];
                for i in 0..n {
                    let orow = out.row(i);
                    let grow = g.row(i);
                    let gsum: S = grow.iter().cloned().sum();
                    for ((d, &o), &gi) in da[i * c..(i + 1) * c].iter_mut().zip(orow).zip(grow) {
                        *d = gi - o.exp() * gsum;
                    }
                }
                self.add_grad(grads, *a, Tensor::matrix(n, c, da).unwrap());
            }
        }
    }
}
