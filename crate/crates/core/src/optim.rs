//! Parameter-update engines: Adam and SOAP.
//!
//! SOAP maintains, per weight matrix `W ∈ R^{m×n}`, exponential moving
//! averages `L = EMA(G·Gᵀ)` and `R = EMA(Gᵀ·G)` of the gradient's Kronecker
//! factors. Every `precondition_frequency` steps their eigenbases `Q_L`,
//! `Q_R` are refreshed (cyclic Jacobi, warm-started with the previous
//! basis); the step rotates the gradient into the eigenbasis, runs a
//! bias-corrected Adam update there, and rotates back:
//!
//! ```text
//! G' = Q_Lᵀ G Q_R,   W ← W − lr · Q_L [ Adam(G') ] Q_Rᵀ
//! ```
//!
//! The first moment is kept in the original coordinates and projected each
//! step, so a basis refresh never invalidates it; the rotated second moment
//! is reinterpreted in the new basis (the standard approximation). Bias
//! vectors use the one-sided (`Q_L` only) degenerate case. Before the first
//! refresh both bases are identity and the step coincides exactly with the
//! Adam step.
//!
//! Each weight matrix of each network carries its own factors: the
//! preconditioner never mixes parameters of different networks or layers.

use crate::linalg::sym_eig_jacobi_continuation;
use crate::mlp::{MlpParams, NetGrad};
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Optimizer selector, parsed from config strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerId {
    Adam,
    Soap,
}

impl OptimizerId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Self::Adam),
            "soap" => Ok(Self::Soap),
            _ => Err(Error::BadConfig(format!(
                "unknown optimizer `{s}` (expected adam|soap)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Adam => "adam",
            Self::Soap => "soap",
        }
    }
}

const EPS_NUM: f64 = 1e-8;

/// Standard bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct AdamOpt {
    pub beta1: f64,
    pub beta2: f64,
    t: usize,
    m: Vec<NetGrad>,
    v: Vec<NetGrad>,
}

impl AdamOpt {
    pub fn new(nets: &[MlpParams], beta1: f64, beta2: f64) -> Self {
        Self {
            beta1,
            beta2,
            t: 0,
            m: nets.iter().map(NetGrad::zeros_like).collect(),
            v: nets.iter().map(NetGrad::zeros_like).collect(),
        }
    }

    pub fn step(&mut self, nets: &mut [MlpParams], grads: &[NetGrad], lr: f64) {
        self.t += 1;
        let inv_bc1 = 1.0 / (1.0 - self.beta1.powi(self.t as i32));
        let inv_bc2 = 1.0 / (1.0 - self.beta2.powi(self.t as i32));
        for k in 0..nets.len() {
            for l in 0..nets[k].layers.len() {
                let g = &grads[k].layers[l];
                let m = &mut self.m[k].layers[l];
                let v = &mut self.v[k].layers[l];
                adam_update(
                    nets[k].layers[l].w.as_slice_mut().unwrap(),
                    g.0.as_slice().unwrap(),
                    m.0.as_slice_mut().unwrap(),
                    v.0.as_slice_mut().unwrap(),
                    (self.beta1, self.beta2, inv_bc1, inv_bc2, lr),
                );
                adam_update(
                    nets[k].layers[l].b.as_slice_mut().unwrap(),
                    g.1.as_slice().unwrap(),
                    m.1.as_slice_mut().unwrap(),
                    v.1.as_slice_mut().unwrap(),
                    (self.beta1, self.beta2, inv_bc1, inv_bc2, lr),
                );
            }
        }
    }
}

fn adam_update(
    theta: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (beta1, beta2, inv_bc1, inv_bc2, lr): (f64, f64, f64, f64, f64),
) {
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let denom = (v[i] * inv_bc2).sqrt() + EPS_NUM;
        theta[i] -= lr * m[i] * inv_bc1 / denom;
    }
}

/// SOAP state for one weight matrix.
#[derive(Debug, Clone)]
struct MatSoap {
    l: Array2<f64>,
    r: Array2<f64>,
    ql: Array2<f64>,
    qr: Array2<f64>,
    /// First moment, original coordinates.
    m: Array2<f64>,
    /// Second moment, rotated coordinates.
    v: Array2<f64>,
}

/// SOAP state for one bias vector (one-sided rotation).
#[derive(Debug, Clone)]
struct VecSoap {
    l: Array2<f64>,
    ql: Array2<f64>,
    m: Array1<f64>,
    v: Array1<f64>,
}

#[derive(Debug, Clone)]
struct NetSoap {
    mats: Vec<MatSoap>,
    vecs: Vec<VecSoap>,
}

/// SOAP: Kronecker-factored preconditioning with rotated-space Adam.
#[derive(Debug, Clone)]
pub struct SoapOpt {
    pub beta1: f64,
    pub beta2: f64,
    pub precondition_frequency: usize,
    t: usize,
    nets: Vec<NetSoap>,
    /// Eigendecomposition failures survived by retaining the previous basis.
    pub eig_failures: usize,
}

const JACOBI_SWEEPS: usize = 40;

impl SoapOpt {
    pub fn new(nets: &[MlpParams], beta1: f64, beta2: f64, precondition_frequency: usize) -> Self {
        assert!(precondition_frequency >= 1);
        let states = nets
            .iter()
            .map(|p| NetSoap {
                mats: p
                    .layers
                    .iter()
                    .map(|layer| {
                        let (o, i) = (layer.w.nrows(), layer.w.ncols());
                        MatSoap {
                            l: Array2::zeros((o, o)),
                            r: Array2::zeros((i, i)),
                            ql: Array2::eye(o),
                            qr: Array2::eye(i),
                            m: Array2::zeros((o, i)),
                            v: Array2::zeros((o, i)),
                        }
                    })
                    .collect(),
                vecs: p
                    .layers
                    .iter()
                    .map(|layer| {
                        let o = layer.b.len();
                        VecSoap {
                            l: Array2::zeros((o, o)),
                            ql: Array2::eye(o),
                            m: Array1::zeros(o),
                            v: Array1::zeros(o),
                        }
                    })
                    .collect(),
            })
            .collect();
        Self {
            beta1,
            beta2,
            precondition_frequency,
            t: 0,
            nets: states,
            eig_failures: 0,
        }
    }

    pub fn step(&mut self, nets: &mut [MlpParams], grads: &[NetGrad], lr: f64) {
        self.t += 1;
        let refresh = self.t % self.precondition_frequency == 0;
        let (b1, b2) = (self.beta1, self.beta2);
        let inv_bc1 = 1.0 / (1.0 - b1.powi(self.t as i32));
        let inv_bc2 = 1.0 / (1.0 - b2.powi(self.t as i32));
        for k in 0..nets.len() {
            let state = &mut self.nets[k];
            for l in 0..nets[k].layers.len() {
                let (gw, gb) = (&grads[k].layers[l].0, &grads[k].layers[l].1);

                // Kronecker factor EMAs (rate tied to beta2).
                let ms = &mut state.mats[l];
                ema_sym(&mut ms.l, &gw.dot(&gw.t()), b2);
                ema_sym(&mut ms.r, &gw.t().dot(gw), b2);
                let vs = &mut state.vecs[l];
                let gb2 = gb.view().insert_axis(ndarray::Axis(1));
                ema_sym(&mut vs.l, &gb2.dot(&gb2.t()), b2);

                if refresh {
                    let ms = &mut state.mats[l];
                    match sym_eig_jacobi_continuation(&ms.l.view(), &ms.ql, JACOBI_SWEEPS) {
                        Ok((_, q)) => ms.ql = q,
                        Err(_) => self.eig_failures += 1,
                    }
                    match sym_eig_jacobi_continuation(&ms.r.view(), &ms.qr, JACOBI_SWEEPS) {
                        Ok((_, q)) => ms.qr = q,
                        Err(_) => self.eig_failures += 1,
                    }
                    let vs = &mut state.vecs[l];
                    match sym_eig_jacobi_continuation(&vs.l.view(), &vs.ql, JACOBI_SWEEPS) {
                        Ok((_, q)) => vs.ql = q,
                        Err(_) => self.eig_failures += 1,
                    }
                }

                // Weight matrix update in the rotated coordinates.
                let ms = &mut state.mats[l];
                ms.m.zip_mut_with(gw, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
                let g_rot = ms.ql.t().dot(gw).dot(&ms.qr);
                let m_rot = ms.ql.t().dot(&ms.m).dot(&ms.qr);
                ms.v
                    .zip_mut_with(&g_rot, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
                let mut upd_rot = Array2::zeros(g_rot.raw_dim());
                ndarray::Zip::from(&mut upd_rot)
                    .and(&m_rot)
                    .and(&ms.v)
                    .for_each(|u, &m, &v| {
                        let denom = (v * inv_bc2).sqrt() + EPS_NUM;
                        *u = m * inv_bc1 / denom;
                    });
                let upd = ms.ql.dot(&upd_rot).dot(&ms.qr.t());
                nets[k].layers[l].w.scaled_add(-lr, &upd);

                // Bias update, one-sided rotation.
                let vs = &mut state.vecs[l];
                vs.m.zip_mut_with(gb, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
                let g_rot = vs.ql.t().dot(gb);
                let m_rot = vs.ql.t().dot(&vs.m);
                vs.v
                    .zip_mut_with(&g_rot, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
                let mut upd_rot = Array1::zeros(g_rot.len());
                ndarray::Zip::from(&mut upd_rot)
                    .and(&m_rot)
                    .and(&vs.v)
                    .for_each(|u, &m, &v| {
                        let denom = (v * inv_bc2).sqrt() + EPS_NUM;
                        *u = m * inv_bc1 / denom;
                    });
                let upd = vs.ql.dot(&upd_rot);
                nets[k].layers[l].b.scaled_add(-lr, &upd);
            }
        }
    }

    /// Orthogonality defect `max ‖QᵀQ − I‖_∞` over all current bases.
    pub fn max_orthogonality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut check = |q: &Array2<f64>| {
            let qtq = q.t().dot(q);
            for i in 0..qtq.nrows() {
                for j in 0..qtq.ncols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((qtq[[i, j]] - want).abs());
                }
            }
        };
        for net in &self.nets {
            for m in &net.mats {
                check(&m.ql);
                check(&m.qr);
            }
            for v in &net.vecs {
                check(&v.ql);
            }
        }
        worst
    }

    #[cfg(test)]
    fn basis(&self, net: usize, layer: usize) -> (Array2<f64>, Array2<f64>) {
        (
            self.nets[net].mats[layer].ql.clone(),
            self.nets[net].mats[layer].qr.clone(),
        )
    }
}

/// `dst = beta·dst + (1−beta)·src`, re-symmetrized.
fn ema_sym(dst: &mut Array2<f64>, src: &Array2<f64>, beta: f64) {
    dst.zip_mut_with(src, |d, &s| *d = beta * *d + (1.0 - beta) * s);
    let n = dst.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let x = 0.5 * (dst[[i, j]] + dst[[j, i]]);
            dst[[i, j]] = x;
            dst[[j, i]] = x;
        }
    }
}

/// Either optimizer behind one dispatch point.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(AdamOpt),
    Soap(SoapOpt),
}

impl Optimizer {
    pub fn step(&mut self, nets: &mut [MlpParams], grads: &[NetGrad], lr: f64) {
        match self {
            Optimizer::Adam(o) => o.step(nets, grads, lr),
            Optimizer::Soap(o) => o.step(nets, grads, lr),
        }
    }

    pub fn eig_failures(&self) -> usize {
        match self {
            Optimizer::Adam(_) => 0,
            Optimizer::Soap(o) => o.eig_failures,
        }
    }
}
