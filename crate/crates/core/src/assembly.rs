//! Assembly of the Nitsche-coupled multimesh system.
//!
//! The unknowns are the dofs of all active cells of all meshes, numbered
//! mesh by mesh. The bilinear form is
//!
//! ```text
//! A(v,w) = Σ_i (∇v_i,∇w_i)_{Ω_i} [+ ε⁻² (v_i,w_i)_{Ω_i}]
//!        − Σ_{Γ_ij} (⟨n_i·∇v⟩,[w]) + ([v],⟨n_i·∇w⟩)
//!        + Σ_{Γ_ij} β₀/(h_i+h_j) ([v],[w])
//!        + Σ_{O_ij} β₁ ([∇v],[∇w])      (or β₁/(h_i+h_j)² ([v],[w]))
//! ```
//!
//! with `[v] = v_upper − v_lower`, `n_i` pointing out of the upper
//! predomain and `⟨n_i·∇v⟩ = κ_i n_i·∇v_i + κ_j n_i·∇v_j`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::Point2;
use crate::mesh::{BoundaryTag, CellMap, MAX_LOCAL_DOFS};
use crate::multimesh::{CellRef, CutTopology};
use crate::solver::CsrMatrix;

pub type Triplet = (usize, usize, f64);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabVariant {
    /// `β₁ ([∇v],[∇w])` on the overlaps.
    #[default]
    #[serde(rename = "grad")]
    GradientJump,
    /// `β₁ (h_i+h_j)⁻² ([v],[w])` on the overlaps.
    #[serde(rename = "l2")]
    ValueJump,
}

impl std::str::FromStr for StabVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(StabVariant::GradientJump),
            "l2" => Ok(StabVariant::ValueJump),
            _ => Err(Error::InvalidParameter(format!("unknown stabilization '{s}' (grad|l2)"))),
        }
    }
}

/// Default `β₁` of the value-jump stabilization.
pub const VALUE_JUMP_BETA1: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormParams {
    pub beta0: f64,
    pub beta1: f64,
    pub stab: StabVariant,
    /// Adds `ε⁻² (v,w)` when set.
    pub reaction_eps: Option<f64>,
    pub quad_order: usize,
}

impl FormParams {
    /// `β₀ = 10p²`, `β₁ = 0.1`, gradient-jump stabilization, order `2p`.
    pub fn defaults(degree: usize) -> Self {
        Self {
            beta0: 10.0 * (degree * degree) as f64,
            beta1: 0.1,
            stab: StabVariant::GradientJump,
            reaction_eps: None,
            quad_order: 2 * degree,
        }
    }

    /// Defaults for the chosen stabilization. The value-jump form only
    /// controls the gradient jump through an inverse estimate, which costs a
    /// mesh-independent factor, so its default `β₁` is larger
    /// ([`VALUE_JUMP_BETA1`]); with `β₁ = 0.1` it loses definiteness on
    /// stacks with nested overlaps.
    pub fn with_stab(degree: usize, stab: StabVariant) -> Self {
        let beta1 = match stab {
            StabVariant::GradientJump => 0.1,
            StabVariant::ValueJump => VALUE_JUMP_BETA1,
        };
        Self {
            beta1,
            stab,
            ..Self::defaults(degree)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0) || !(self.beta1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta0 = {} and beta1 = {} must be positive",
                self.beta0, self.beta1
            )));
        }
        if let Some(e) = self.reaction_eps {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("reaction eps = {e} must be positive")));
            }
        }
        Ok(())
    }
}

/// `κ_l = h_l / (h_i + h_j)`.
pub fn kappa_weights(h_i: f64, h_j: f64) -> Result<(f64, f64)> {
    if !(h_i > 0.0) || !(h_j > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh sizes {h_i}, {h_j} must be positive")));
    }
    let k_i = h_i / (h_i + h_j);
    Ok((k_i, 1.0 - k_i))
}

/// Numbering of the active dofs of all meshes.
#[derive(Clone, Debug)]
pub struct DofMap {
    local_to_global: Vec<Vec<Option<usize>>>,
    global: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    boundary: Vec<Option<BoundaryTag>>,
}

impl DofMap {
    pub fn new(topo: &CutTopology) -> Self {
        let n = topo.num_meshes();
        let mut local_to_global = Vec::with_capacity(n);
        let mut global = Vec::new();
        let mut offsets = vec![0];
        for i in 0..n {
            let space = topo.space(i);
            let mut used = vec![false; space.dim()];
            for cc in topo.cut_cells(i) {
                for &d in space.cell_dofs(cc.cell) {
                    used[d] = true;
                }
            }
            let map: Vec<Option<usize>> = used
                .iter()
                .enumerate()
                .map(|(d, &u)| {
                    u.then(|| {
                        global.push((i, d));
                        global.len() - 1
                    })
                })
                .collect();
            local_to_global.push(map);
            offsets.push(global.len());
        }
        let mut boundary = vec![None; global.len()];
        for i in 0..n {
            let space = topo.space(i);
            for f in space.mesh().boundary_facets() {
                // only the background's outer loop and hole loops are physical
                if i > 0 && f.tag == BoundaryTag::Outer {
                    continue;
                }
                for d in space.facet_dofs(f.cell, f.edge) {
                    if let Some(g) = local_to_global[i][d] {
                        boundary[g] = Some(f.tag);
                    }
                }
            }
        }
        Self {
            local_to_global,
            global,
            offsets,
            boundary,
        }
    }

    /// Total number of active dofs `M = Σ M_i`.
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// First global index of each mesh's block, plus the total at the end.
    pub fn block_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn global_index(&self, mesh: usize, dof: usize) -> Option<usize> {
        self.local_to_global[mesh][dof]
    }

    /// `(mesh, local dof)` of a global index.
    pub fn local(&self, g: usize) -> (usize, usize) {
        self.global[g]
    }

    /// Tag of the physical boundary the dof lies on, if any.
    pub fn boundary_tag(&self, g: usize) -> Option<BoundaryTag> {
        self.boundary[g]
    }

    pub fn boundary_dofs(&self) -> impl Iterator<Item = (usize, BoundaryTag)> + '_ {
        self.boundary.iter().enumerate().filter_map(|(g, t)| t.map(|t| (g, t)))
    }

    fn cell_globals(&self, topo: &CutTopology, r: CellRef) -> [usize; MAX_LOCAL_DOFS] {
        let mut out = [usize::MAX; MAX_LOCAL_DOFS];
        for (o, &d) in out.iter_mut().zip(topo.space(r.mesh).cell_dofs(r.cell)) {
            *o = self.local_to_global[r.mesh][d].expect("dofs of active cells are numbered");
        }
        out
    }
}

/// Basis values and gradients of one cell at one point.
struct Eval {
    n: usize,
    vals: [f64; MAX_LOCAL_DOFS],
    grads: [Point2; MAX_LOCAL_DOFS],
}

impl Eval {
    fn at(map: &CellMap, degree: usize, n: usize, x: Point2) -> Self {
        let mut e = Self {
            n,
            vals: [0.0; MAX_LOCAL_DOFS],
            grads: [Point2::default(); MAX_LOCAL_DOFS],
        };
        map.basis(degree, x, &mut e.vals, &mut e.grads);
        e
    }
}

fn push_block(out: &mut Vec<Triplet>, rows: &[usize], cols: &[usize], block: &[f64], ncols: usize) {
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            let v = block[a * ncols + b];
            if v != 0.0 {
                out.push((r, c, v));
            }
        }
    }
}

/// Volume terms over the visible part of every active cell.
pub fn assemble_volume(topo: &CutTopology, dofs: &DofMap, params: &FormParams) -> Vec<Triplet> {
    let degree = topo.degree();
    let react = params.reaction_eps.map_or(0.0, |e| e.powi(-2));
    let chunks: Vec<Vec<Triplet>> = (0..topo.num_meshes())
        .flat_map(|i| topo.cut_cells(i).iter())
        .collect::<Vec<_>>()
        .par_iter()
        .map(|cc| {
            let space = topo.space(cc.mesh);
            let n = space.n_local();
            let map = space.cell_map(cc.cell);
            let mut k = [0.0; MAX_LOCAL_DOFS * MAX_LOCAL_DOFS];
            for (x, w) in cc.quad.iter() {
                let e = Eval::at(&map, degree, n, x);
                for a in 0..n {
                    for b in 0..n {
                        k[a * n + b] += w * (e.grads[a].dot(e.grads[b]) + react * e.vals[a] * e.vals[b]);
                    }
                }
            }
            let g = dofs.cell_globals(topo, CellRef::new(cc.mesh, cc.cell));
            let mut out = Vec::with_capacity(n * n);
            push_block(&mut out, &g[..n], &g[..n], &k, n);
            out
        })
        .collect();
    chunks.concat()
}

/// Jump and weighted-flux coefficients of the `2n` local functions of an
/// upper/lower cell pair at one point.
struct PairEval {
    n: usize,
    jump: [f64; 2 * MAX_LOCAL_DOFS],
    grad_jump: [Point2; 2 * MAX_LOCAL_DOFS],
    flux: [f64; 2 * MAX_LOCAL_DOFS],
}

fn pair_eval(a: &Eval, b: &Eval, normal: Point2, ka: f64, kb: f64) -> PairEval {
    let n = a.n;
    let mut p = PairEval {
        n: 2 * n,
        jump: [0.0; 2 * MAX_LOCAL_DOFS],
        grad_jump: [Point2::default(); 2 * MAX_LOCAL_DOFS],
        flux: [0.0; 2 * MAX_LOCAL_DOFS],
    };
    for k in 0..n {
        p.jump[k] = a.vals[k];
        p.jump[n + k] = -b.vals[k];
        p.grad_jump[k] = a.grads[k];
        p.grad_jump[n + k] = -b.grads[k];
        p.flux[k] = ka * normal.dot(a.grads[k]);
        p.flux[n + k] = kb * normal.dot(b.grads[k]);
    }
    p
}

fn pair_globals(topo: &CutTopology, dofs: &DofMap, a: CellRef, b: CellRef) -> Vec<usize> {
    let n = topo.space(0).n_local();
    let (ga, gb) = (dofs.cell_globals(topo, a), dofs.cell_globals(topo, b));
    ga[..n].iter().chain(&gb[..n]).copied().collect()
}

/// Nitsche coupling on every interface facet.
pub fn assemble_interface(topo: &CutTopology, dofs: &DofMap, params: &FormParams) -> Result<Vec<Triplet>> {
    let degree = topo.degree();
    let n = topo.space(0).n_local();
    let chunks: Vec<Vec<Triplet>> = topo
        .facets()
        .par_iter()
        .map(|f| -> Result<Vec<Triplet>> {
            let (hi, hj) = (topo.h(f.upper.mesh), topo.h(f.lower.mesh));
            let (ki, kj) = kappa_weights(hi, hj)?;
            let gamma = params.beta0 / (hi + hj);
            let mi = topo.space(f.upper.mesh).cell_map(f.upper.cell);
            let mj = topo.space(f.lower.mesh).cell_map(f.lower.cell);
            let m = 2 * n;
            let mut k = vec![0.0; m * m];
            for (x, w) in f.quad.iter() {
                let p = pair_eval(&Eval::at(&mi, degree, n, x), &Eval::at(&mj, degree, n, x), f.normal, ki, kj);
                for a in 0..p.n {
                    for b in 0..p.n {
                        k[a * m + b] += w
                            * (-p.flux[b] * p.jump[a] - p.jump[b] * p.flux[a] + gamma * p.jump[a] * p.jump[b]);
                    }
                }
            }
            let g = pair_globals(topo, dofs, f.upper, f.lower);
            let mut out = Vec::with_capacity(m * m);
            push_block(&mut out, &g, &g, &k, m);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Overlap stabilization in the selected variant.
pub fn assemble_stabilization(topo: &CutTopology, dofs: &DofMap, params: &FormParams) -> Vec<Triplet> {
    let degree = topo.degree();
    let n = topo.space(0).n_local();
    let chunks: Vec<Vec<Triplet>> = topo
        .overlaps()
        .par_iter()
        .map(|o| {
            let ml = topo.space(o.lower.mesh).cell_map(o.lower.cell);
            let mu = topo.space(o.upper.mesh).cell_map(o.upper.cell);
            let scale = match params.stab {
                StabVariant::GradientJump => params.beta1,
                StabVariant::ValueJump => params.beta1 / (topo.h(o.lower.mesh) + topo.h(o.upper.mesh)).powi(2),
            };
            let m = 2 * n;
            let mut k = vec![0.0; m * m];
            for (x, w) in o.quad.iter() {
                let p = pair_eval(&Eval::at(&ml, degree, n, x), &Eval::at(&mu, degree, n, x), Point2::default(), 0.0, 0.0);
                for a in 0..p.n {
                    for b in 0..p.n {
                        let v = match params.stab {
                            StabVariant::GradientJump => p.grad_jump[a].dot(p.grad_jump[b]),
                            StabVariant::ValueJump => p.jump[a] * p.jump[b],
                        };
                        k[a * m + b] += w * scale * v;
                    }
                }
            }
            let g = pair_globals(topo, dofs, o.lower, o.upper);
            let mut out = Vec::with_capacity(m * m);
            push_block(&mut out, &g, &g, &k, m);
            out
        })
        .collect();
    chunks.concat()
}

/// `Σ_i (f, v_i)_{Ω_i}` using the visible-region quadrature.
pub fn assemble_load(topo: &CutTopology, dofs: &DofMap, f: impl Fn(Point2) -> f64 + Sync) -> Vec<f64> {
    let degree = topo.degree();
    let mut b = vec![0.0; dofs.len()];
    for i in 0..topo.num_meshes() {
        let space = topo.space(i);
        let n = space.n_local();
        let local: Vec<([usize; MAX_LOCAL_DOFS], [f64; MAX_LOCAL_DOFS])> = topo
            .cut_cells(i)
            .par_iter()
            .map(|cc| {
                let map = space.cell_map(cc.cell);
                let mut v = [0.0; MAX_LOCAL_DOFS];
                for (x, w) in cc.quad.iter() {
                    let e = Eval::at(&map, degree, n, x);
                    let fx = f(x);
                    for a in 0..n {
                        v[a] += w * fx * e.vals[a];
                    }
                }
                (dofs.cell_globals(topo, CellRef::new(i, cc.cell)), v)
            })
            .collect();
        for (g, v) in local {
            for a in 0..n {
                b[g[a]] += v[a];
            }
        }
    }
    b
}

/// Assembled matrix and right-hand side over all active dofs.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Full matrix `A_h` (all three contributions) without boundary conditions.
pub fn assemble_matrix(topo: &CutTopology, dofs: &DofMap, params: &FormParams) -> Result<CsrMatrix> {
    params.validate()?;
    if topo.quad_order() != params.quad_order {
        return Err(Error::InvalidParameter(format!(
            "topology carries order {} quadrature, parameters ask for {}",
            topo.quad_order(),
            params.quad_order
        )));
    }
    let mut t = assemble_volume(topo, dofs, params);
    t.extend(assemble_interface(topo, dofs, params)?);
    t.extend(assemble_stabilization(topo, dofs, params));
    CsrMatrix::from_triplets(dofs.len(), t)
}

pub fn assemble_system(
    topo: &CutTopology,
    dofs: &DofMap,
    params: &FormParams,
    f: impl Fn(Point2) -> f64 + Sync,
) -> Result<LinearSystem> {
    Ok(LinearSystem {
        matrix: assemble_matrix(topo, dofs, params)?,
        rhs: assemble_load(topo, dofs, f),
    })
}

/// Prescribed values on a set of boundary dofs (global indices).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DirichletBC {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl DirichletBC {
    /// Every flagged boundary dof, with `g_outer` on the background's outer
    /// loop and `g_inner` on hole boundaries.
    pub fn on_boundary(
        topo: &CutTopology,
        dofs: &DofMap,
        g_outer: impl Fn(Point2) -> f64,
        g_inner: impl Fn(Point2) -> f64,
    ) -> Self {
        let mut bc = Self::default();
        for (g, tag) in dofs.boundary_dofs() {
            let (mesh, d) = dofs.local(g);
            let x = topo.space(mesh).dof_coords()[d];
            bc.dofs.push(g);
            bc.values.push(match tag {
                BoundaryTag::Outer => g_outer(x),
                BoundaryTag::Inner => g_inner(x),
            });
        }
        bc
    }

    pub fn homogeneous(topo: &CutTopology, dofs: &DofMap) -> Self {
        Self::on_boundary(topo, dofs, |_| 0.0, |_| 0.0)
    }
}

/// System restricted to the free dofs, with the boundary lift moved to the
/// right-hand side.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global indices of the free dofs, increasing.
    pub free: Vec<usize>,
    full: Vec<f64>,
}

impl ReducedSystem {
    /// Global vector with the boundary values in place and `x` on the free
    /// dofs.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.full.clone();
        for (&g, &v) in self.free.iter().zip(x) {
            out[g] = v;
        }
        out
    }
}

/// Symmetric elimination of the constrained dofs.
pub fn apply_dirichlet(sys: &LinearSystem, dofs: &DofMap, bc: &DirichletBC) -> Result<ReducedSystem> {
    let n = sys.matrix.dim();
    if bc.dofs.len() != bc.values.len() {
        return Err(Error::DimensionMismatch {
            expected: bc.dofs.len(),
            got: bc.values.len(),
        });
    }
    let mut full = vec![0.0; n];
    let mut fixed = vec![false; n];
    for (&g, &v) in bc.dofs.iter().zip(&bc.values) {
        if g >= n || dofs.boundary_tag(g).is_none() {
            return Err(Error::NotOnBoundary { dof: g });
        }
        fixed[g] = true;
        full[g] = v;
    }
    let free: Vec<usize> = (0..n).filter(|&g| !fixed[g]).collect();
    let lift = sys.matrix.mul(&full);
    let rhs = free.iter().map(|&g| sys.rhs[g] - lift[g]).collect();
    Ok(ReducedSystem {
        matrix: sys.matrix.principal_submatrix(&free),
        rhs,
        free,
        full,
    })
}

/// MatrixMarket coordinate dump (1-based, general).
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.dim(), a.dim(), a.nnz())?;
    for i in 0..a.dim() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.17e}", i + 1, c + 1, v)?;
        }
    }
    Ok(())
}
