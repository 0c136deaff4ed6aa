//! The coupled PDE benchmark systems: residual operators, manufactured or
//! reference exact solutions, boundary conditions, and collocation sampling.
//!
//! Five systems are defined, addressable by string id:
//!
//! | id          | equations                                 | nets | residuals |
//! |-------------|-------------------------------------------|------|-----------|
//! | `symmetric` | u'' + γv = f₁, v'' + γu = f₂              | 2    | 2         |
//! | `thermo`    | −κT'' = f_T, −Eu'' + γT' = f_u            | 2    | 2         |
//! | `rd`        | three-species reaction-diffusion          | 3    | 3         |
//! | `npp`       | 1D Nernst-Planck-Poisson                  | 3    | 3         |
//! | `npps2d`    | 2D Nernst-Planck-Poisson-Stokes (6 PDEs)  | 4    | 6         |
//!
//! Residual operators are written once, generically over [`Scalar`], so the
//! same definition is evaluated with `f64` (values) or [`crate::dual::Dual`]
//! (partial derivatives with respect to the field jet components).

use crate::dual::{Dual, Scalar};
use crate::pb::{solve_pb, PbProfile, PbVariant};
use crate::rng::SplitMix64;
use crate::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Benchmark system identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemId {
    Symmetric,
    Thermo,
    Rd,
    Npp,
    Npps2d,
}

impl SystemId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "thermo" => Ok(Self::Thermo),
            "rd" => Ok(Self::Rd),
            "npp" => Ok(Self::Npp),
            "npps2d" => Ok(Self::Npps2d),
            _ => Err(Error::BadConfig(format!(
                "unknown system `{s}` (expected symmetric|thermo|rd|npp|npps2d)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric",
            Self::Thermo => "thermo",
            Self::Rd => "rd",
            Self::Npp => "npp",
            Self::Npps2d => "npps2d",
        }
    }
}

impl std::fmt::Display for SystemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value, gradient and upper-triangle Hessian of one scalar field at one
/// point, over a generic scalar type. `dd` is `[xx, xy, yy]`; 1D systems use
/// only slot 0.
#[derive(Debug, Clone, Copy)]
pub struct ScalarJet<T> {
    pub v: T,
    pub d: [T; 2],
    pub dd: [T; 3],
}

impl<T: Scalar> ScalarJet<T> {
    fn lap2(&self) -> T {
        self.dd[0] + self.dd[2]
    }
}

/// Dual tangent slots needed per point: 3 fields × 3 jet components in 1D,
/// 6 fields × 6 components in 2D.
pub const SLOTS_1D: usize = 9;
pub const SLOTS_2D: usize = 36;

/// One coupled benchmark instance: system id plus its coupling value and
/// (for the electrokinetic systems) the solved equilibrium profile.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub id: SystemId,
    /// γ for symmetric/thermo, k for rd, ε for npp/npps2d.
    pub coupling: f64,
    pub zeta: f64,
    pub pb: Option<Arc<PbProfile>>,
}

impl SystemSpec {
    /// Build a system at the given coupling value, solving the reference BVP
    /// where one is needed.
    pub fn new(id: SystemId, coupling: f64) -> Result<Self> {
        if !coupling.is_finite() || coupling < 0.0 {
            return Err(Error::BadConfig(format!(
                "coupling must be a non-negative number, got {coupling}"
            )));
        }
        let (zeta, pb) = match id {
            SystemId::Npp => {
                let zeta = 1.0;
                let profile = solve_pb(coupling, zeta, PbVariant::Half, 4001)?;
                (zeta, Some(Arc::new(profile)))
            }
            SystemId::Npps2d => {
                let zeta = 2.0;
                let profile = solve_pb(coupling, zeta, PbVariant::Channel, 20001)?;
                (zeta, Some(Arc::new(profile)))
            }
            _ => (0.0, None),
        };
        Ok(Self {
            id,
            coupling,
            zeta,
            pb,
        })
    }

    pub fn dim(&self) -> usize {
        match self.id {
            SystemId::Npps2d => 2,
            _ => 1,
        }
    }

    pub fn num_networks(&self) -> usize {
        match self.id {
            SystemId::Symmetric | SystemId::Thermo => 2,
            SystemId::Rd | SystemId::Npp => 3,
            SystemId::Npps2d => 4,
        }
    }

    pub fn num_residuals(&self) -> usize {
        match self.id {
            SystemId::Symmetric | SystemId::Thermo => 2,
            SystemId::Rd | SystemId::Npp => 3,
            SystemId::Npps2d => 6,
        }
    }

    pub fn num_fields(&self) -> usize {
        match self.id {
            SystemId::Symmetric | SystemId::Thermo => 2,
            SystemId::Rd | SystemId::Npp => 3,
            SystemId::Npps2d => 6,
        }
    }

    pub fn field_names(&self) -> &'static [&'static str] {
        match self.id {
            SystemId::Symmetric => &["u", "v"],
            SystemId::Thermo => &["T", "u"],
            SystemId::Rd => &["c_A", "c_B", "c_C"],
            SystemId::Npp => &["c_plus", "c_minus", "phi"],
            SystemId::Npps2d => &["phi", "c_plus", "c_minus", "u", "v", "p"],
        }
    }

    /// Map each field to `(network index, output index)`.
    pub fn field_map(&self) -> Vec<(usize, usize)> {
        match self.id {
            SystemId::Npps2d => vec![(0, 0), (1, 0), (2, 0), (3, 0), (3, 1), (3, 2)],
            _ => (0..self.num_fields()).map(|k| (k, 0)).collect(),
        }
    }

    /// Output width of each network.
    pub fn network_output_dims(&self) -> Vec<usize> {
        match self.id {
            SystemId::Npps2d => vec![1, 1, 1, 3],
            _ => vec![1; self.num_networks()],
        }
    }

    /// Full layer-dimension chain for network `k`.
    pub fn network_dims(&self, k: usize, hidden: &[usize]) -> Vec<usize> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(self.dim());
        dims.extend_from_slice(hidden);
        dims.push(self.network_output_dims()[k]);
        dims
    }

    /// Coupling values swept by the benchmark runs.
    pub fn sweep_grid(&self) -> &'static [f64] {
        match self.id {
            SystemId::Symmetric => &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0],
            SystemId::Thermo => &[1.0, 5.0, 10.0, 25.0, 50.0],
            SystemId::Rd => &[1.0, 5.0, 10.0, 30.0],
            SystemId::Npp => &[1.0, 0.5, 0.2],
            SystemId::Npps2d => &[0.2, 0.1, 0.05],
        }
    }

    /// Weakest and strongest coupling of the sweep, in degradation-ratio
    /// order (for the electrokinetic systems strong coupling is *small* ε).
    pub fn weak_strong(&self) -> (f64, f64) {
        match self.id {
            SystemId::Symmetric => (1.0, 100.0),
            SystemId::Thermo => (1.0, 50.0),
            SystemId::Rd => (1.0, 30.0),
            SystemId::Npp => (1.0, 0.2),
            SystemId::Npps2d => (0.2, 0.05),
        }
    }

    /// Residual vector at one point, in the paper-order of the equations.
    pub fn residuals<T: Scalar>(&self, jets: &[ScalarJet<T>], x: &[f64]) -> Vec<T> {
        assert_eq!(jets.len(), self.num_fields(), "field/jet count mismatch");
        let g = self.coupling;
        match self.id {
            SystemId::Symmetric => {
                let (u, v) = (&jets[0], &jets[1]);
                let f1 = -PI * PI * (PI * x[0]).sin() + g * (2.0 * PI * x[0]).sin();
                let f2 = -4.0 * PI * PI * (2.0 * PI * x[0]).sin() + g * ((PI * x[0]).sin() + 1.0);
                vec![
                    u.dd[0] + v.v.scale(g).shift(-f1),
                    v.dd[0] + u.v.scale(g).shift(-f2),
                ]
            }
            SystemId::Thermo => {
                let (t, u) = (&jets[0], &jets[1]);
                let (kappa, e) = (1.0, 1.0);
                let f_t = kappa * PI * PI * (PI * x[0]).sin();
                let f_u = e * 4.0 * PI * PI * (2.0 * PI * x[0]).sin() + g * PI * (PI * x[0]).cos();
                vec![
                    t.dd[0].scale(-kappa).shift(-f_t),
                    u.dd[0].scale(-e) + t.d[0].scale(g).shift(-f_u),
                ]
            }
            SystemId::Rd => {
                let (a, b, c) = (&jets[0], &jets[1], &jets[2]);
                let k = g;
                let sa = (PI * x[0]).sin() + 2.0;
                let cb = (PI * x[0]).cos() + 2.0;
                let sc = (2.0 * PI * x[0]).sin() + 2.0;
                let f1 = -PI * PI * (PI * x[0]).sin() - k * sa + k * cb;
                let f2 = -PI * PI * (PI * x[0]).cos() + k * sa - 2.0 * k * cb + k * sc;
                let f3 = -4.0 * PI * PI * (2.0 * PI * x[0]).sin() + k * cb - k * sc;
                vec![
                    a.dd[0] + (b.v - a.v).scale(k).shift(-f1),
                    b.dd[0] + (a.v - b.v.scale(2.0) + c.v).scale(k).shift(-f2),
                    c.dd[0] + (b.v - c.v).scale(k).shift(-f3),
                ]
            }
            SystemId::Npp => {
                let (cp, cm, phi) = (&jets[0], &jets[1], &jets[2]);
                let eps2 = g * g;
                vec![
                    cp.dd[0] + cp.d[0] * phi.d[0] + cp.v * phi.dd[0],
                    cm.dd[0] - cm.d[0] * phi.d[0] - cm.v * phi.dd[0],
                    phi.dd[0].scale(eps2) + cp.v - cm.v,
                ]
            }
            SystemId::Npps2d => {
                let (phi, cp, cm) = (&jets[0], &jets[1], &jets[2]);
                let (u, v, p) = (&jets[3], &jets[4], &jets[5]);
                let (e_x, mu) = (1.0, 1.0);
                let eps2 = g * g;
                let grad_dot =
                    |a: &ScalarJet<T>, b: &ScalarJet<T>| a.d[0] * b.d[0] + a.d[1] * b.d[1];
                vec![
                    phi.lap2().scale(eps2) + cp.v - cm.v,
                    cp.lap2() + grad_dot(cp, phi) + cp.v * phi.lap2(),
                    cm.lap2() - grad_dot(cm, phi) - cm.v * phi.lap2(),
                    -p.d[0] + u.lap2().scale(mu) + (cp.v - cm.v).scale(e_x),
                    -p.d[1] + v.lap2().scale(mu),
                    u.d[0] + v.d[1],
                ]
            }
        }
    }

    /// Residual values together with their partial derivatives with respect
    /// to every field jet component. `partials[r][f*ncomp + c]` is
    /// `∂R_r/∂(component c of field f)` with component order
    /// `[v, dx(, dy), dxx(, dxy, dyy)]`.
    pub fn residuals_and_partials(
        &self,
        jets: &[ScalarJet<f64>],
        x: &[f64],
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        if self.dim() == 1 {
            self.partials_impl::<SLOTS_1D>(jets, x, 3)
        } else {
            self.partials_impl::<SLOTS_2D>(jets, x, 6)
        }
    }

    fn partials_impl<const N: usize>(
        &self,
        jets: &[ScalarJet<f64>],
        x: &[f64],
        ncomp: usize,
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let dim = self.dim();
        let nhess = dim * (dim + 1) / 2;
        let seeded: Vec<ScalarJet<Dual<N>>> = jets
            .iter()
            .enumerate()
            .map(|(f, j)| {
                let base = f * ncomp;
                let mut out = ScalarJet {
                    v: Dual::<N>::seeded(j.v, base),
                    d: [Dual::constant(0.0); 2],
                    dd: [Dual::constant(0.0); 3],
                };
                for g in 0..dim {
                    out.d[g] = Dual::seeded(j.d[g], base + 1 + g);
                }
                for h in 0..nhess {
                    out.dd[h] = Dual::seeded(j.dd[h], base + 1 + dim + h);
                }
                out
            })
            .collect();
        let res = self.residuals(&seeded, x);
        let nslots = self.num_fields() * ncomp;
        let values = res.iter().map(|r| r.v).collect();
        let partials = res.iter().map(|r| r.d[..nslots].to_vec()).collect();
        (values, partials)
    }

    /// Exact field values at a point, in field order.
    pub fn exact_fields(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.exact_jets(x)?.iter().map(|j| j.v).collect())
    }

    /// Exact solution jets at a point, in field order.
    pub fn exact_jets(&self, x: &[f64]) -> Result<Vec<ScalarJet<f64>>> {
        let zero = ScalarJet {
            v: 0.0,
            d: [0.0; 2],
            dd: [0.0; 3],
        };
        match self.id {
            SystemId::Symmetric => Ok(vec![
                sin_jet(x[0], PI, 1.0, 1.0),
                sin_jet(x[0], 2.0 * PI, 1.0, 0.0),
            ]),
            SystemId::Thermo => Ok(vec![
                sin_jet(x[0], PI, 1.0, 1.0),
                sin_jet(x[0], 2.0 * PI, 1.0, 0.0),
            ]),
            SystemId::Rd => Ok(vec![
                sin_jet(x[0], PI, 1.0, 2.0),
                cos_jet(x[0], PI, 1.0, 2.0),
                sin_jet(x[0], 2.0 * PI, 1.0, 2.0),
            ]),
            SystemId::Npp => {
                let pb = self.profile()?;
                let (p, dp, ddp) = pb.phi_jet(x[0])?;
                Ok(vec![
                    boltzmann_jet(p, dp, ddp, -1.0, 0),
                    boltzmann_jet(p, dp, ddp, 1.0, 0),
                    ScalarJet {
                        v: p,
                        d: [dp, 0.0],
                        dd: [ddp, 0.0, 0.0],
                    },
                ])
            }
            SystemId::Npps2d => {
                let pb = self.profile()?;
                let y = x[1];
                let (p, dp, ddp) = pb.phi_jet(y)?;
                let phi = ScalarJet {
                    v: p,
                    d: [0.0, dp],
                    dd: [0.0, 0.0, ddp],
                };
                let cp = boltzmann_jet(p, dp, ddp, -1.0, 1);
                let cm = boltzmann_jet(p, dp, ddp, 1.0, 1);
                let (uv, ud, udd) = pb.u_ref_jet(y, 1.0, 1.0)?;
                let u = ScalarJet {
                    v: uv,
                    d: [0.0, ud],
                    dd: [0.0, 0.0, udd],
                };
                Ok(vec![phi, cp, cm, u, zero, zero])
            }
        }
    }

    fn profile(&self) -> Result<&Arc<PbProfile>> {
        self.pb.as_ref().ok_or(Error::MissingOracle {
            eps: self.coupling,
            zeta: self.zeta,
        })
    }

    /// Interior and boundary collocation points. Deterministic given `seed`;
    /// the 1D samplers are fully deterministic (equispaced/exponential laws)
    /// and ignore the seed.
    pub fn sample_collocation(&self, seed: u64) -> CollocationSet {
        match self.id {
            SystemId::Symmetric | SystemId::Thermo | SystemId::Rd => CollocationSet {
                interior: Array2::from_shape_vec((1, 200), open_uniform(200)).unwrap(),
                boundary: endpoints_1d(),
            },
            SystemId::Npp => {
                let mut xs = open_uniform(150);
                xs.extend(exponential_points(150, self.coupling));
                CollocationSet {
                    interior: Array2::from_shape_vec((1, 300), xs).unwrap(),
                    boundary: endpoints_1d(),
                }
            }
            SystemId::Npps2d => {
                let mut rng = SplitMix64::stream(seed, 0x2D);
                let eps = self.coupling;
                let mut pts = Vec::with_capacity(6000);
                for _ in 0..1500 {
                    pts.push(rng.next_f64());
                    pts.push(rng.next_f64());
                }
                // wall-concentrated half: exponential law in distance from
                // the wall, alternately mirrored to y = 1
                for i in 0..1500 {
                    let x = rng.next_f64();
                    let u = rng.next_f64();
                    let mut y = (eps * (1.0 / (1.0 - u)).ln()).clamp(1e-4, 0.5);
                    if i % 2 == 1 {
                        y = 1.0 - y;
                    }
                    pts.push(x);
                    pts.push(y);
                }
                let interior = Array2::from_shape_vec((3000, 2), pts)
                    .unwrap()
                    .reversed_axes()
                    .to_owned();
                let mut boundary = Vec::with_capacity(800);
                for (edge, along) in [
                    (Edge::Wall0, 0usize),
                    (Edge::Wall1, 0),
                    (Edge::End0, 1),
                    (Edge::End1, 1),
                ] {
                    for j in 0..200 {
                        let s = (j as f64 + 1.0) / 201.0;
                        let mut x = [0.0, 0.0];
                        x[along] = s;
                        x[1 - along] = match edge {
                            Edge::Wall0 | Edge::End0 => 0.0,
                            _ => 1.0,
                        };
                        boundary.push(BoundaryPoint { x, edge });
                    }
                }
                CollocationSet { interior, boundary }
            }
        }
    }

    /// Dirichlet boundary terms: one per field, with target values from the
    /// exact solution.
    pub fn boundary_terms(&self, colloc: &CollocationSet) -> Result<Vec<BcTerm>> {
        let dim = self.dim();
        let mut terms = Vec::with_capacity(self.num_fields());
        for field in 0..self.num_fields() {
            let mut xs: Vec<f64> = Vec::new();
            let mut targets = Vec::new();
            for bp in &colloc.boundary {
                if !self.field_has_bc(field, bp.edge) {
                    continue;
                }
                let exact = self.exact_fields(&bp.x[..dim])?;
                xs.extend_from_slice(&bp.x[..dim]);
                targets.push(exact[field]);
            }
            let n = targets.len();
            let points = Array2::from_shape_vec((n, dim), xs)
                .unwrap()
                .reversed_axes()
                .to_owned();
            terms.push(BcTerm {
                field,
                points,
                targets,
            });
        }
        Ok(terms)
    }

    /// Whether a field carries a Dirichlet condition on the given edge.
    fn field_has_bc(&self, field: usize, edge: Edge) -> bool {
        match self.id {
            SystemId::Npps2d => {
                let name = self.field_names()[field];
                match edge {
                    // walls: φ, c±, u, v (no pressure condition)
                    Edge::Wall0 | Edge::Wall1 => name != "p",
                    // channel ends: everything including p = 0
                    Edge::End0 | Edge::End1 => true,
                    _ => false,
                }
            }
            _ => matches!(edge, Edge::Left | Edge::Right),
        }
    }
}

/// Jet of `a·sin(ωx) + c`.
fn sin_jet(x: f64, w: f64, a: f64, c: f64) -> ScalarJet<f64> {
    ScalarJet {
        v: a * (w * x).sin() + c,
        d: [a * w * (w * x).cos(), 0.0],
        dd: [-a * w * w * (w * x).sin(), 0.0, 0.0],
    }
}

/// Jet of `a·cos(ωx) + c`.
fn cos_jet(x: f64, w: f64, a: f64, c: f64) -> ScalarJet<f64> {
    ScalarJet {
        v: a * (w * x).cos() + c,
        d: [-a * w * (w * x).sin(), 0.0],
        dd: [-a * w * w * (w * x).cos(), 0.0, 0.0],
    }
}

/// Jet of `exp(s·φ)` given the jet of φ, varying along axis `axis`.
fn boltzmann_jet(p: f64, dp: f64, ddp: f64, s: f64, axis: usize) -> ScalarJet<f64> {
    let e = (s * p).exp();
    let mut out = ScalarJet {
        v: e,
        d: [0.0; 2],
        dd: [0.0; 3],
    };
    out.d[axis] = s * dp * e;
    // dd slots are [xx, xy, yy]
    out.dd[if axis == 0 { 0 } else { 2 }] = (s * ddp + s * s * dp * dp) * e;
    out
}

fn endpoints_1d() -> Vec<BoundaryPoint> {
    vec![
        BoundaryPoint {
            x: [0.0, 0.0],
            edge: Edge::Left,
        },
        BoundaryPoint {
            x: [1.0, 0.0],
            edge: Edge::Right,
        },
    ]
}

/// Equispaced open grid on (0, 1).
fn open_uniform(n: usize) -> Vec<f64> {
    (1..=n).map(|j| j as f64 / (n + 1) as f64).collect()
}

/// Boundary-layer-concentrated points `x_j = ε·ln(1/(1−q_j))` clipped to
/// (0, 1), matching the exp(−x/ε) decay of the layer.
fn exponential_points(n: usize, eps: f64) -> Vec<f64> {
    (1..=n)
        .map(|j| {
            let q = j as f64 / (n + 1) as f64;
            (eps * (1.0 / (1.0 - q)).ln()).min(1.0 - 1e-4)
        })
        .collect()
}

/// Interior collocation points (`dim × N_r`) plus tagged boundary points.
#[derive(Debug, Clone)]
pub struct CollocationSet {
    pub interior: Array2<f64>,
    pub boundary: Vec<BoundaryPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub x: [f64; 2],
    pub edge: Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// x = 0 (1D)
    Left,
    /// x = 1 (1D)
    Right,
    /// y = 0
    Wall0,
    /// y = 1
    Wall1,
    /// x = 0
    End0,
    /// x = 1
    End1,
}

/// One per-field Dirichlet loss term: points (`dim × N_b`) and targets.
#[derive(Debug, Clone)]
pub struct BcTerm {
    pub field: usize,
    pub points: Array2<f64>,
    pub targets: Vec<f64>,
}
