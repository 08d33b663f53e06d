//! Artificial diffusion, antidiffusive fluxes and the LED limiter.
//!
//! Sign conventions: the convection matrix `T` carries the derivative on the
//! test function, so the semi-discrete system reads `M a' = T a`. Adding
//! `d_ij = max(-tau_ij, 0, -tau_ji)` makes every off-diagonal entry of `T + D`
//! nonnegative, which is the condition for a local extremum diminishing
//! low-order operator in this form. The raw fluxes `r_ij = d_ij (a_i - a_j)`
//! satisfy `sum_j r_ij = -(D a)_i`, so adding all of them back to `(T + D) a`
//! recovers the Galerkin operator `T a`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::SparseMatrix;
use crate::mesh::Mesh;

/// Symmetric, zero-row-sum matrix `D` with nonnegative off-diagonal entries.
#[derive(Clone, Debug)]
pub struct DiffusionOperator {
    pub matrix: SparseMatrix,
}

/// Edge fluxes `r_ij`, stored on the matrix pattern; antisymmetric.
#[derive(Clone, Debug)]
pub struct FluxSet {
    pub matrix: SparseMatrix,
}

/// Correction factors `a_ij` on the matrix pattern plus the per-node limiter
/// quantities. Boundary nodes carry `P = Q = 0`, `R = 1`.
#[derive(Clone, Debug)]
pub struct LimiterFactors {
    pub factors: SparseMatrix,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub r_plus: Vec<f64>,
    pub r_minus: Vec<f64>,
    /// Limiter weights `q_i = gamma_i * sum_j d_ij`.
    pub q: Vec<f64>,
}

impl LimiterFactors {
    pub fn new(pattern: &SparseMatrix) -> Self {
        let n = pattern.n();
        Self {
            factors: pattern.zeros_like(),
            p_plus: vec![0.0; n],
            p_minus: vec![0.0; n],
            q_plus: vec![0.0; n],
            q_minus: vec![0.0; n],
            r_plus: vec![1.0; n],
            r_minus: vec![1.0; n],
            q: vec![0.0; n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.factors.get(i, j)
    }
}

pub fn artificial_diffusion(t: &SparseMatrix) -> Result<DiffusionOperator> {
    let mut d = DiffusionOperator { matrix: t.zeros_like() };
    artificial_diffusion_into(t, &mut d)?;
    Ok(d)
}

/// `d_ij = max(-tau_ij, 0, -tau_ji)` off the diagonal, `d_ii = -sum_j d_ij`.
/// `out` must share the pattern of `t`.
pub fn artificial_diffusion_into(t: &SparseMatrix, out: &mut DiffusionOperator) -> Result<()> {
    if !t.is_symmetric_pattern() {
        return Err(Error::invalid(
            "artificial diffusion needs a symmetric sparsity pattern",
        ));
    }
    let d = &mut out.matrix;
    for i in 0..t.n() {
        let mut diag = 0.0;
        for k in t.row_range(i) {
            if t.col(k) == i {
                continue;
            }
            let kt = t.transpose_slot(k).expect("symmetric pattern");
            let v = (-t.values[k]).max(0.0).max(-t.values[kt]);
            d.values[k] = v;
            diag -= v;
        }
        if let Some(k) = t.diag_slot(i) {
            d.values[k] = diag;
        } else if diag != 0.0 {
            return Err(Error::invalid(format!("row {i} has no diagonal slot")));
        }
    }
    Ok(())
}

pub fn antidiffusive_fluxes(d: &DiffusionOperator, alpha: &[f64]) -> FluxSet {
    let mut f = FluxSet {
        matrix: d.matrix.zeros_like(),
    };
    antidiffusive_fluxes_into(d, alpha, &mut f);
    f
}

/// `r_ij = d_ij (a_i - a_j)`, computed once per unordered pair so that
/// `r_ji = -r_ij` holds bitwise.
pub fn antidiffusive_fluxes_into(d: &DiffusionOperator, alpha: &[f64], out: &mut FluxSet) {
    let dm = &d.matrix;
    for i in 0..dm.n() {
        for k in dm.row_range(i) {
            let j = dm.col(k);
            if j == i {
                out.matrix.values[k] = 0.0;
            } else if j > i {
                let r = dm.values[k] * (alpha[i] - alpha[j]);
                out.matrix.values[k] = r;
                out.matrix.values[dm.transpose_slot(k).expect("symmetric pattern")] = -r;
            }
        }
    }
}

pub fn correction_factors(
    mesh: &Mesh,
    d: &DiffusionOperator,
    fluxes: &FluxSet,
    alpha: &[f64],
    gamma: Option<&[f64]>,
) -> LimiterFactors {
    let mut out = LimiterFactors::new(&d.matrix);
    correction_factors_into(mesh, d, fluxes, alpha, gamma, &mut out);
    out
}

/// Zalesak-type limiter with linearity-preserving weights.
///
/// For each interior node: signed flux sums `P_i^+-`, bounds
/// `Q_i^+- = q_i (a_i^max/min - a_i)` over the node and its neighbours,
/// ratios `R_i^+- = min(1, Q/P)` (1 when `P = 0`), and nodal factors chosen
/// by the sign of `r_ij`. Boundary nodes contribute a nodal factor of 1, so
/// boundary-boundary edges get `a_ij = 1` and interior-boundary edges are
/// constrained by the interior endpoint only. Final factors are symmetrized
/// with `a_ij = min(abar_ij, abar_ji)`.
pub fn correction_factors_into(
    mesh: &Mesh,
    d: &DiffusionOperator,
    fluxes: &FluxSet,
    alpha: &[f64],
    gamma: Option<&[f64]>,
    out: &mut LimiterFactors,
) {
    let dm = &d.matrix;
    let r = &fluxes.matrix;
    let n = dm.n();
    for i in 0..n {
        if mesh.is_boundary[i] {
            out.p_plus[i] = 0.0;
            out.p_minus[i] = 0.0;
            out.q_plus[i] = 0.0;
            out.q_minus[i] = 0.0;
            out.q[i] = 0.0;
            out.r_plus[i] = 1.0;
            out.r_minus[i] = 1.0;
            continue;
        }
        let (mut pp, mut pm, mut dsum) = (0.0, 0.0, 0.0);
        let (mut amax, mut amin) = (alpha[i], alpha[i]);
        for k in dm.row_range(i) {
            let j = dm.col(k);
            if j == i {
                continue;
            }
            let rij = r.values[k];
            if rij > 0.0 {
                pp += rij;
            } else {
                pm += rij;
            }
            dsum += dm.values[k];
            amax = amax.max(alpha[j]);
            amin = amin.min(alpha[j]);
        }
        let q = gamma.map_or(1.0, |g| g[i]) * dsum;
        let qp = q * (amax - alpha[i]);
        let qm = q * (amin - alpha[i]);
        out.p_plus[i] = pp;
        out.p_minus[i] = pm;
        out.q[i] = q;
        out.q_plus[i] = qp;
        out.q_minus[i] = qm;
        out.r_plus[i] = if pp > 0.0 { (qp / pp).min(1.0) } else { 1.0 };
        out.r_minus[i] = if pm < 0.0 { (qm / pm).min(1.0) } else { 1.0 };
    }

    let nodal = |i: usize, rij: f64| -> f64 {
        if mesh.is_boundary[i] || rij == 0.0 {
            1.0
        } else if rij > 0.0 {
            out.r_plus[i]
        } else {
            out.r_minus[i]
        }
    };
    let mut factors = std::mem::take(&mut out.factors.values);
    for i in 0..n {
        for k in dm.row_range(i) {
            let j = dm.col(k);
            if j == i {
                factors[k] = 0.0;
            } else if j > i {
                let kt = dm.transpose_slot(k).expect("symmetric pattern");
                let a = nodal(i, r.values[k]).min(nodal(j, r.values[kt]));
                factors[k] = a;
                factors[kt] = a;
            }
        }
    }
    out.factors.values = factors;
}

pub fn afc_correction(factors: &LimiterFactors, fluxes: &FluxSet) -> Vec<f64> {
    let mut out = vec![0.0; fluxes.matrix.n()];
    afc_correction_into(factors, fluxes, &mut out);
    out
}

/// `rbar_i = sum_{j != i} a_ij r_ij`.
pub fn afc_correction_into(factors: &LimiterFactors, fluxes: &FluxSet, out: &mut [f64]) {
    let r = &fluxes.matrix;
    for (i, o) in out.iter_mut().enumerate() {
        *o = r
            .row_range(i)
            .filter(|&k| r.col(k) != i)
            .map(|k| factors.factors.values[k] * r.values[k])
            .sum();
    }
}

/// `d_h(v, z) = sum_{i<j} d_ij (v_i - v_j)(z_i - z_j)`.
pub fn dh_form(d: &DiffusionOperator, v: &[f64], z: &[f64]) -> f64 {
    edge_form(&d.matrix, |_| 1.0, v, z)
}

/// `dhat_h(v, z) = sum_{i<j} d_ij (1 - a_ij)(v_i - v_j)(z_i - z_j)`.
pub fn dhat_form(d: &DiffusionOperator, factors: &LimiterFactors, v: &[f64], z: &[f64]) -> f64 {
    edge_form(&d.matrix, |k| 1.0 - factors.factors.values[k], v, z)
}

fn edge_form(dm: &SparseMatrix, weight: impl Fn(usize) -> f64, v: &[f64], z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..dm.n() {
        for k in dm.row_range(i) {
            let j = dm.col(k);
            if j > i {
                acc += dm.values[k] * weight(k) * (v[i] - v[j]) * (z[i] - z[j]);
            }
        }
    }
    acc
}

/// Per-node limiter quantities as CSV.
pub fn write_limiter_nodes_csv<W: Write>(mesh: &Mesh, lf: &LimiterFactors, mut w: W) -> Result<()> {
    writeln!(w, "node,x,y,is_boundary,p_plus,p_minus,q_plus,q_minus,r_plus,r_minus,q")?;
    for i in 0..mesh.num_nodes() {
        let z = mesh.nodes[i];
        writeln!(
            w,
            "{i},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            z[0],
            z[1],
            u8::from(mesh.is_boundary[i]),
            lf.p_plus[i],
            lf.p_minus[i],
            lf.q_plus[i],
            lf.q_minus[i],
            lf.r_plus[i],
            lf.r_minus[i],
            lf.q[i]
        )?;
    }
    Ok(())
}

/// Per-edge (`i < j`) diffusion, flux and correction factor as CSV.
pub fn write_limiter_edges_csv<W: Write>(
    d: &DiffusionOperator,
    fluxes: &FluxSet,
    lf: &LimiterFactors,
    mut w: W,
) -> Result<()> {
    writeln!(w, "i,j,d_ij,r_ij,a_ij")?;
    let dm = &d.matrix;
    for i in 0..dm.n() {
        for k in dm.row_range(i) {
            let j = dm.col(k);
            if j > i {
                writeln!(
                    w,
                    "{i},{j},{:e},{:e},{:e}",
                    dm.values[k], fluxes.matrix.values[k], lf.factors.values[k]
                )?;
            }
        }
    }
    Ok(())
}
