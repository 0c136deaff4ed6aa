//! Fixed-architecture tanh MLPs with exact spatial jets and exact parameter
//! gradients.
//!
//! Spatial derivatives (up to second order, including the 2D mixed partial)
//! are obtained by forward propagation of (value, gradient, Hessian) jets
//! through the affine/tanh layers in closed form; parameter gradients by
//! reverse accumulation over that jet computation. No finite differences and
//! no external autodiff are involved.
//!
//! # Parameter layout
//!
//! The flat parameter/gradient layout is frozen so Jacobian columns align
//! with optimizer state: layer-major, and within each layer the weight
//! matrix in row-major order followed by the bias vector. A network with
//! dims `(1, 64, 64, 64, 64, 1)` has 12,673 parameters.
//!
//! # Jet component order
//!
//! Batched jets store one `(width × n)` matrix per component:
//! 1D `[v, dx, dxx]`; 2D `[v, dx, dy, dxx, dxy, dyy]`.

use crate::rng::SplitMix64;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};

/// One dense layer: weights `(out × in)` and bias `(out)`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Parameters of one segregated network. Hidden activations are tanh, the
/// output layer is affine.
#[derive(Debug, Clone)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

/// Number of jet components carried for spatial dimension `dim`:
/// value, gradient entries, and the upper triangle of the Hessian.
pub fn jet_comps(dim: usize) -> usize {
    1 + dim + dim * (dim + 1) / 2
}

impl MlpParams {
    /// Xavier-uniform initialization: weights drawn uniformly on
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]` (gain 1),
    /// biases zero. Deterministic in `seed`; draw order is layer-major,
    /// row-major.
    pub fn init_xavier(seed: u64, dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut rng = SplitMix64::new(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = Array2::zeros((fan_out, fan_in));
            for i in 0..fan_out {
                for j in 0..fan_in {
                    w[[i, j]] = rng.uniform(-bound, bound);
                }
            }
            layers.push(DenseLayer {
                w,
                b: Array1::zeros(fan_out),
            });
        }
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.w.nrows()));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat offset ranges of each layer's parameters (weights then bias).
    pub fn layer_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            let len = l.w.len() + l.b.len();
            out.push(off..off + len);
            off += len;
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            for x in l.w.iter_mut() {
                *x = flat[off];
                off += 1;
            }
            for x in l.b.iter_mut() {
                *x = flat[off];
                off += 1;
            }
        }
    }

    /// Forward pass carrying full second-order jets for a batch of points
    /// `x` of shape `(dim × n)`. Returns the output jets and the tape needed
    /// for reverse accumulation.
    pub fn forward_jets(&self, x: &ArrayView2<f64>) -> (JetBatch, Tape) {
        let dim = self.input_dim();
        assert_eq!(x.nrows(), dim, "point batch has wrong dimension");
        let n = x.ncols();
        let ncomp = jet_comps(dim);
        let mut comps: Vec<Array2<f64>> = Vec::with_capacity(ncomp);
        comps.push(x.to_owned());
        for g in 0..dim {
            let mut c = Array2::zeros((dim, n));
            c.row_mut(g).fill(1.0);
            comps.push(c);
        }
        for _ in 0..dim * (dim + 1) / 2 {
            comps.push(Array2::zeros((dim, n)));
        }
        self.forward_from(comps, dim, ncomp, n)
    }

    /// Forward pass carrying values only (used for boundary terms and field
    /// evaluation).
    pub fn forward_values(&self, x: &ArrayView2<f64>) -> (Array2<f64>, Tape) {
        let dim = self.input_dim();
        assert_eq!(x.nrows(), dim);
        let n = x.ncols();
        let (out, tape) = self.forward_from(vec![x.to_owned()], dim, 1, n);
        (out.into_comps().pop().unwrap(), tape)
    }

    fn forward_from(
        &self,
        seed: Vec<Array2<f64>>,
        dim: usize,
        ncomp: usize,
        n: usize,
    ) -> (JetBatch, Tape) {
        let nl = self.layers.len();
        let mut tape = Tape {
            dim,
            ncomp,
            n,
            layer_in: Vec::with_capacity(nl),
            z: Vec::with_capacity(nl - 1),
            t: Vec::with_capacity(nl - 1),
        };
        let mut a = seed;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<Array2<f64>> = a.iter().map(|c| layer.w.dot(c)).collect();
            {
                let b = &layer.b;
                for mut col in z[0].axis_iter_mut(Axis(1)) {
                    col += b;
                }
            }
            tape.layer_in.push(a);
            if l + 1 < nl {
                let t = z[0].mapv(f64::tanh);
                let act = tanh_forward(&z, &t, dim, ncomp);
                tape.z.push(z);
                tape.t.push(t);
                a = act;
            } else {
                return (JetBatch { dim, comps: z }, tape);
            }
        }
        unreachable!()
    }

    /// Reverse accumulation: adds the gradient of `sum_q <adjoint_q, jet_q>`
    /// to `grad`. `adjoint` must have the tape's component count, each matrix
    /// shaped `(output_dim × n)`.
    pub fn backward(&self, tape: &Tape, adjoint: &[Array2<f64>], grad: &mut NetGrad) {
        assert_eq!(adjoint.len(), tape.ncomp);
        let nl = self.layers.len();
        let mut zbar: Vec<Array2<f64>> = adjoint.to_vec();
        for l in (0..nl).rev() {
            let ain = &tape.layer_in[l];
            let (gw, gb) = {
                let lg = &mut grad.layers[l];
                (&mut lg.0, &mut lg.1)
            };
            for c in 0..tape.ncomp {
                general_mat_mul(1.0, &zbar[c], &ain[c].t(), 1.0, gw);
            }
            *gb += &zbar[0].sum_axis(Axis(1));
            if l > 0 {
                let wt = self.layers[l].w.t();
                let abar: Vec<Array2<f64>> = zbar.iter().map(|zc| wt.dot(zc)).collect();
                zbar = tanh_backward(&tape.z[l - 1], &tape.t[l - 1], &abar, tape.dim, tape.ncomp);
            }
        }
    }

    /// Per-sample reverse accumulation: returns an `(n × p)` matrix whose
    /// row `q` is the gradient of `<adjoint_q, jet_q>` with respect to this
    /// network's flat parameters.
    pub fn per_sample_rows(&self, tape: &Tape, adjoint: &[Array2<f64>]) -> Array2<f64> {
        assert_eq!(adjoint.len(), tape.ncomp);
        let nl = self.layers.len();
        let n = tape.n;
        let p = self.param_count();
        let ranges = self.layer_ranges();
        let mut rows = Array2::zeros((n, p));
        let mut zbar: Vec<Array2<f64>> = adjoint.to_vec();
        let max_out = self.layers.iter().map(|l| l.w.nrows()).max().unwrap();
        let max_in = self.layers.iter().map(|l| l.w.ncols()).max().unwrap();
        let mut zcol = vec![0.0; max_out];
        let mut acol = vec![0.0; max_in];
        for l in (0..nl).rev() {
            let ain = &tape.layer_in[l];
            let (out_w, in_w) = (self.layers[l].w.nrows(), self.layers[l].w.ncols());
            let w_off = ranges[l].start;
            let b_off = w_off + out_w * in_w;
            for c in 0..tape.ncomp {
                let zc = &zbar[c];
                let ac = &ain[c];
                for q in 0..n {
                    for (i, z) in zcol[..out_w].iter_mut().enumerate() {
                        *z = zc[[i, q]];
                    }
                    for (j, a) in acol[..in_w].iter_mut().enumerate() {
                        *a = ac[[j, q]];
                    }
                    let mut row = rows.row_mut(q);
                    let row = row.as_slice_mut().unwrap();
                    for (i, &zi) in zcol[..out_w].iter().enumerate() {
                        if zi == 0.0 {
                            continue;
                        }
                        let dst = &mut row[w_off + i * in_w..w_off + (i + 1) * in_w];
                        for (d, &aj) in dst.iter_mut().zip(&acol[..in_w]) {
                            *d += zi * aj;
                        }
                    }
                    if c == 0 {
                        for (i, &zi) in zcol[..out_w].iter().enumerate() {
                            row[b_off + i] += zi;
                        }
                    }
                }
            }
            if l > 0 {
                let wt = self.layers[l].w.t();
                let abar: Vec<Array2<f64>> = zbar.iter().map(|zc| wt.dot(zc)).collect();
                zbar = tanh_backward(&tape.z[l - 1], &tape.t[l - 1], &abar, tape.dim, tape.ncomp);
            }
        }
        rows
    }

    /// Full jet (value, gradient, Hessian) of the network at a single point.
    pub fn eval_jet(&self, x: &[f64]) -> FieldJet {
        let dim = self.input_dim();
        assert_eq!(x.len(), dim);
        let xb = Array2::from_shape_vec((dim, 1), x.to_vec()).unwrap();
        let (jets, _) = self.forward_jets(&xb.view());
        let m = self.output_dim();
        let mut fj = FieldJet::zeros(dim, m);
        for o in 0..m {
            fj.value[o] = jets.comps[0][[o, 0]];
            for g in 0..dim {
                fj.grad[o][g] = jets.comps[1 + g][[o, 0]];
            }
            for (slot, &(i, j)) in hess_pairs(dim).iter().enumerate() {
                fj.second[o][hess_slot(i, j)] = jets.comps[1 + dim + slot][[o, 0]];
            }
        }
        fj
    }
}

/// Upper-triangle Hessian component ordering for dimension `dim`.
pub fn hess_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &[(0, 0)],
        2 => &[(0, 0), (0, 1), (1, 1)],
        _ => panic!("unsupported dimension"),
    }
}

fn hess_slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => panic!("unsupported index"),
    }
}

/// Batched output jets: one `(output_dim × n)` matrix per component.
#[derive(Debug, Clone)]
pub struct JetBatch {
    pub dim: usize,
    pub comps: Vec<Array2<f64>>,
}

impl JetBatch {
    pub fn into_comps(self) -> Vec<Array2<f64>> {
        self.comps
    }

    /// Zero adjoint matching this batch's shapes.
    pub fn zero_adjoint(&self) -> Vec<Array2<f64>> {
        self.comps.iter().map(|c| Array2::zeros(c.raw_dim())).collect()
    }
}

/// Intermediates saved by a forward pass, consumed by reverse accumulation.
#[derive(Debug)]
pub struct Tape {
    dim: usize,
    ncomp: usize,
    n: usize,
    layer_in: Vec<Vec<Array2<f64>>>,
    z: Vec<Vec<Array2<f64>>>,
    t: Vec<Array2<f64>>,
}

impl Tape {
    pub fn points(&self) -> usize {
        self.n
    }
}

/// Value/gradient/Hessian of every network output at one point. The Hessian
/// is stored as its upper triangle `[xx, xy, yy]` per output; it is symmetric
/// by construction.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub dim: usize,
    pub value: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub second: Vec<[f64; 3]>,
}

impl FieldJet {
    pub fn zeros(dim: usize, outputs: usize) -> Self {
        Self {
            dim,
            value: vec![0.0; outputs],
            grad: vec![[0.0; 2]; outputs],
            second: vec![[0.0; 3]; outputs],
        }
    }

    /// Second derivative `∂²/∂x_a ∂x_b` of output `o`.
    pub fn second_at(&self, o: usize, a: usize, b: usize) -> f64 {
        self.second[o][hess_slot(a, b)]
    }
}

fn tanh_forward(z: &[Array2<f64>], t: &Array2<f64>, dim: usize, ncomp: usize) -> Vec<Array2<f64>> {
    let mut out: Vec<Array2<f64>> = Vec::with_capacity(ncomp);
    out.push(t.clone());
    let ts = t.as_slice().unwrap();
    for g in 0..dim {
        let mut c = z[1 + g].clone();
        let cs = c.as_slice_mut().unwrap();
        for (x, &tv) in cs.iter_mut().zip(ts) {
            *x *= 1.0 - tv * tv;
        }
        out.push(c);
    }
    if ncomp > 1 + dim {
        for (slot, &(i, j)) in hess_pairs(dim).iter().enumerate() {
            let mut c = Array2::zeros(t.raw_dim());
            {
                let cs = c.as_slice_mut().unwrap();
                let zi = z[1 + i].as_slice().unwrap();
                let zj = z[1 + j].as_slice().unwrap();
                let zh = z[1 + dim + slot].as_slice().unwrap();
                for k in 0..cs.len() {
                    let tv = ts[k];
                    let s = 1.0 - tv * tv;
                    let t2 = -2.0 * tv * s;
                    cs[k] = s * zh[k] + t2 * zi[k] * zj[k];
                }
            }
            out.push(c);
        }
    }
    out
}

fn tanh_backward(
    z: &[Array2<f64>],
    t: &Array2<f64>,
    abar: &[Array2<f64>],
    dim: usize,
    ncomp: usize,
) -> Vec<Array2<f64>> {
    let ts = t.as_slice().unwrap();
    let len = ts.len();
    let mut out: Vec<Array2<f64>> = (0..ncomp).map(|_| Array2::zeros(t.raw_dim())).collect();

    if ncomp == 1 {
        let av = abar[0].as_slice().unwrap();
        let o = out[0].as_slice_mut().unwrap();
        for k in 0..len {
            let s = 1.0 - ts[k] * ts[k];
            o[k] = s * av[k];
        }
        return out;
    }

    let pairs = hess_pairs(dim);
    let nhess = if ncomp > 1 + dim { pairs.len() } else { 0 };

    // Split mutable access: adjoint of value comp written last.
    for k in 0..len {
        let tv = ts[k];
        let s = 1.0 - tv * tv;
        let t2 = -2.0 * tv * s;
        let t3 = s * (6.0 * tv * tv - 2.0);

        let mut vbar = abar[0].as_slice().unwrap()[k] * s;
        for slot in 0..nhess {
            let (i, j) = pairs[slot];
            let ah = abar[1 + dim + slot].as_slice().unwrap()[k];
            if ah == 0.0 {
                continue;
            }
            let zi = z[1 + i].as_slice().unwrap()[k];
            let zj = z[1 + j].as_slice().unwrap()[k];
            let zh = z[1 + dim + slot].as_slice().unwrap()[k];
            out[1 + dim + slot].as_slice_mut().unwrap()[k] = s * ah;
            vbar += ah * (t2 * zh + t3 * zi * zj);
            out[1 + i].as_slice_mut().unwrap()[k] += t2 * zj * ah;
            out[1 + j].as_slice_mut().unwrap()[k] += t2 * zi * ah;
        }
        for g in 0..dim {
            let ag = abar[1 + g].as_slice().unwrap()[k];
            let zg = z[1 + g].as_slice().unwrap()[k];
            out[1 + g].as_slice_mut().unwrap()[k] += s * ag;
            vbar += t2 * zg * ag;
        }
        out[0].as_slice_mut().unwrap()[k] = vbar;
    }
    out
}

/// Parameter-shaped gradient accumulator for one network.
#[derive(Debug, Clone)]
pub struct NetGrad {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl NetGrad {
    pub fn zeros_like(p: &MlpParams) -> Self {
        Self {
            layers: p
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for (w, b) in &mut self.layers {
            w.fill(0.0);
            b.fill(0.0);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in &self.layers {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn l2_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| {
                w.iter().map(|x| x * x).sum::<f64>() + b.iter().map(|x| x * x).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| {
                let mw = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let mb = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                mw.max(mb)
            })
            .fold(0.0, f64::max)
    }

    /// `self += c * other`
    pub fn scaled_add(&mut self, c: f64, other: &NetGrad) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.scaled_add(c, ow);
            b.scaled_add(c, ob);
        }
    }

    pub fn add_assign(&mut self, other: &NetGrad) {
        self.scaled_add(1.0, other);
    }
}

/// Exact gradient of a scalar functional of the jets of several networks at
/// a common set of collocation points.
///
/// The functional receives the batched output jets of every network and
/// returns the scalar together with its partial derivatives with respect to
/// every jet component of every network (same shapes as the jets). Those
/// partials are mechanical to produce with [`crate::dual::Dual`]. The
/// returned gradients follow the frozen flat layout.
pub fn param_gradient<F>(
    nets: &[MlpParams],
    points: &ArrayView2<f64>,
    functional: F,
) -> (f64, Vec<NetGrad>)
where
    F: FnOnce(&[JetBatch]) -> (f64, Vec<Vec<Array2<f64>>>),
{
    let fwd: Vec<(JetBatch, Tape)> = nets.iter().map(|p| p.forward_jets(points)).collect();
    let jets: Vec<JetBatch> = fwd.iter().map(|(j, _)| j.clone()).collect();
    let (value, adjoints) = functional(&jets);
    assert_eq!(adjoints.len(), nets.len());
    let mut grads: Vec<NetGrad> = nets.iter().map(NetGrad::zeros_like).collect();
    for (k, p) in nets.iter().enumerate() {
        p.backward(&fwd[k].1, &adjoints[k], &mut grads[k]);
    }
    (value, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    const XAVIER_DIMS: &[usize] = &[1, 64, 64, 64, 64, 1];

    #[test]
    fn init_is_deterministic() {
        let a = MlpParams::init_xavier(0, XAVIER_DIMS);
        let b = MlpParams::init_xavier(0, XAVIER_DIMS);
        assert_eq!(a.flatten(), b.flatten());
        let c = MlpParams::init_xavier(1, XAVIER_DIMS);
        assert_ne!(a.flatten(), c.flatten());
    }

    #[test]
    fn param_count_standard_architecture() {
        let p = MlpParams::init_xavier(0, XAVIER_DIMS);
        assert_eq!(p.param_count(), 12_673);
    }

    #[test]
    fn xavier_bounds_hold() {
        let p = MlpParams::init_xavier(3, XAVIER_DIMS);
        for l in &p.layers {
            let bound = (6.0 / (l.w.ncols() + l.w.nrows()) as f64).sqrt();
            for &w in l.w.iter() {
                assert!(w.abs() <= bound);
            }
            for &b in l.b.iter() {
                assert_eq!(b, 0.0);
            }
        }
    }

    #[test]
    fn zero_network_jet_is_bias() {
        let mut p = MlpParams::init_xavier(0, &[1, 8, 8, 1]);
        for l in &mut p.layers {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
        p.layers.last_mut().unwrap().b[0] = 3.5;
        let jet = p.eval_jet(&[0.4]);
        assert_eq!(jet.value[0], 3.5);
        assert_eq!(jet.grad[0][0], 0.0);
        assert_eq!(jet.second[0][0], 0.0);
    }

    fn fd_jet_check(dims: &[usize], seed: u64) {
        let p = MlpParams::init_xavier(seed, dims);
        let dim = dims[0];
        let mut rng = SplitMix64::new(seed ^ 0xABCD);
        for _ in 0..8 {
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform(0.1, 0.9)).collect();
            let jet = p.eval_jet(&x);
            let h = 1e-5;
            for g in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[g] += h;
                xm[g] -= h;
                let vp = p.eval_jet(&xp).value[0];
                let vm = p.eval_jet(&xm).value[0];
                let fd = (vp - vm) / (2.0 * h);
                let an = jet.grad[0][g];
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                    "grad[{g}] fd={fd} analytic={an}"
                );
                let v0 = jet.value[0];
                let fd2 = (vp - 2.0 * v0 + vm) / (h * h);
                let an2 = jet.second_at(0, g, g);
                assert!(
                    (fd2 - an2).abs() <= 2e-4 * an2.abs().max(1.0),
                    "second[{g}{g}] fd={fd2} analytic={an2}"
                );
            }
            if dim == 2 {
                let eval = |dx: f64, dy: f64| p.eval_jet(&[x[0] + dx, x[1] + dy]).value[0];
                let fd = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
                let an = jet.second_at(0, 0, 1);
                assert!((fd - an).abs() <= 2e-4 * an.abs().max(1.0));
                assert_eq!(jet.second_at(0, 0, 1), jet.second_at(0, 1, 0));
            }
        }
    }

    #[test]
    fn jets_match_finite_differences_1d() {
        fd_jet_check(&[1, 16, 16, 1], 11);
        fd_jet_check(XAVIER_DIMS, 12);
    }

    #[test]
    fn jets_match_finite_differences_2d() {
        fd_jet_check(&[2, 16, 16, 3], 13);
    }

    #[test]
    fn jet_expansion_is_second_order() {
        // |f(x+h) - f(x) - h f'(x)| must shrink like h^2.
        let p = MlpParams::init_xavier(5, &[1, 32, 32, 1]);
        let x = 0.37;
        let j = p.eval_jet(&[x]);
        let hs = [1e-2, 1e-3, 1e-4, 1e-5];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| (p.eval_jet(&[x + h]).value[0] - j.value[0] - h * j.grad[0][0]).abs())
            .collect();
        let slope = (errs[0].ln() - errs[3].ln()) / (hs[0].ln() - hs[3].ln());
        assert!(slope >= 1.9, "observed slope {slope}, errors {errs:?}");
    }

    #[test]
    fn constant_functional_has_zero_gradient() {
        let nets = vec![MlpParams::init_xavier(0, &[1, 8, 1])];
        let pts = Array2::from_shape_vec((1, 4), vec![0.1, 0.3, 0.6, 0.9]).unwrap();
        let (v, grads) = param_gradient(&nets, &pts.view(), |jets| {
            let adj = jets.iter().map(|j| j.zero_adjoint()).collect();
            (7.0, adj)
        });
        assert_eq!(v, 7.0);
        assert_eq!(grads[0].l2_norm(), 0.0);
    }

    /// Functional used by the gradient tests: F = sum_q (dxx_q + v_q^2) * c_q.
    fn test_functional(jets: &[JetBatch], weights: &[f64]) -> (f64, Vec<Vec<Array2<f64>>>) {
        let j = &jets[0];
        let n = j.comps[0].ncols();
        let mut value = 0.0;
        let mut adj = j.zero_adjoint();
        for q in 0..n {
            let v = j.comps[0][[0, q]];
            let dxx = j.comps[2][[0, q]];
            value += weights[q] * (dxx + v * v);
            adj[2][[0, q]] = weights[q];
            adj[0][[0, q]] = weights[q] * 2.0 * v;
        }
        (value, vec![adj])
    }

    #[test]
    fn param_gradient_matches_directional_fd() {
        let nets = vec![MlpParams::init_xavier(21, &[1, 16, 16, 1])];
        let pts = Array2::from_shape_vec((1, 5), vec![0.1, 0.25, 0.5, 0.75, 0.9]).unwrap();
        let weights = [0.7, -1.1, 0.4, 2.0, -0.3];
        let (_, grads) = param_gradient(&nets, &pts.view(), |j| test_functional(j, &weights));
        let flat_grad = grads[0].flatten();

        let mut rng = SplitMix64::new(99);
        let p0 = nets[0].flatten();
        let dir: Vec<f64> = (0..p0.len()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let eval = |scale: f64| {
            let mut pp = nets[0].clone();
            let flat: Vec<f64> = p0.iter().zip(&dir).map(|(p, d)| p + scale * d).collect();
            pp.assign_from_flat(&flat);
            let (v, _) = param_gradient(
                std::slice::from_ref(&pp),
                &pts.view(),
                |j| test_functional(j, &weights),
            );
            v
        };
        let h = 1e-6;
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let analytic: f64 = flat_grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        assert!(
            (fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0),
            "fd={fd} analytic={analytic}"
        );
    }

    #[test]
    fn gradient_is_linear_in_functional() {
        let nets = vec![MlpParams::init_xavier(4, &[1, 12, 1])];
        let pts = Array2::from_shape_vec((1, 3), vec![0.2, 0.5, 0.8]).unwrap();
        let w1 = [1.0, 0.5, -0.25];
        let w2 = [-2.0, 3.0, 0.1];
        let (_, g1) = param_gradient(&nets, &pts.view(), |j| test_functional(j, &w1));
        let (_, g2) = param_gradient(&nets, &pts.view(), |j| test_functional(j, &w2));
        let lam = (0.3, -1.7);
        let combined: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lam.0 * a + lam.1 * b).collect();
        let (_, gc) = param_gradient(&nets, &pts.view(), |j| test_functional(j, &combined));
        let f1 = g1[0].flatten();
        let f2 = g2[0].flatten();
        let fc = gc[0].flatten();
        for i in 0..f1.len() {
            let want = lam.0 * f1[i] + lam.1 * f2[i];
            assert!((fc[i] - want).abs() <= 1e-12 * want.abs().max(1e-9));
        }
    }

    #[test]
    fn per_sample_rows_match_single_point_backward() {
        let p = MlpParams::init_xavier(8, &[1, 16, 16, 1]);
        let pts = Array2::from_shape_vec((1, 4), vec![0.15, 0.4, 0.6, 0.85]).unwrap();
        let (jets, tape) = p.forward_jets(&pts.view());
        let mut adj = jets.zero_adjoint();
        for q in 0..4 {
            adj[2][[0, q]] = 1.0;
        }
        let rows = p.per_sample_rows(&tape, &adj);
        for q in 0..4 {
            let single = pts.slice(ndarray::s![.., q..q + 1]).to_owned();
            let (sj, st) = p.forward_jets(&single.view());
            let mut sadj = sj.zero_adjoint();
            sadj[2][[0, 0]] = 1.0;
            let mut g = NetGrad::zeros_like(&p);
            p.backward(&st, &sadj, &mut g);
            let gf = g.flatten();
            for (i, &x) in gf.iter().enumerate() {
                assert!(
                    (rows[[q, i]] - x).abs() <= 1e-12 * x.abs().max(1e-12),
                    "row {q} param {i}"
                );
            }
        }
    }
}
