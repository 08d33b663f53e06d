//! P1 assembly, row-compressed matrices and the linear algebra the schemes
//! need.
//!
//! Every matrix is assembled over the full node set; Dirichlet conditions are
//! imposed later by the time integrator, which zeroes boundary rows of the
//! right-hand side and pins boundary states to zero.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problems::FluxField;

/// Square matrix in compressed sparse row form. Column indices within a row
/// are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    pub values: Vec<f64>,
    diag: Vec<Option<usize>>,
    /// Slot of `(j, i)` for every slot `(i, j)`; present iff the pattern is symmetric.
    transpose: Option<Vec<usize>>,
}

impl SparseMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Rows need not be
    /// sorted; a repeated column within a row is rejected.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::invalid(format!("duplicate entry ({i}, {})", w[0].0)));
                }
            }
            for (j, v) in row {
                if j >= n {
                    return Err(Error::invalid(format!("column {j} out of range in row {i}")));
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::finish(n, row_ptr, col_idx, values))
    }

    /// Zero matrix on the mesh adjacency graph plus the diagonal.
    pub fn from_mesh_pattern(mesh: &Mesh) -> Self {
        let n = mesh.num_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let mut cols = mesh.node_patch[i].clone();
            cols.push(i);
            cols.sort_unstable();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self::finish(n, row_ptr, col_idx, values)
    }

    fn finish(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        let mut m = Self {
            n,
            row_ptr,
            col_idx,
            values,
            diag: vec![None; n],
            transpose: None,
        };
        for i in 0..n {
            m.diag[i] = m.slot(i, i);
        }
        let mut transpose = vec![0; m.col_idx.len()];
        let mut symmetric = true;
        'outer: for i in 0..n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                match m.slot(m.col_idx[k], i) {
                    Some(s) => transpose[k] = s,
                    None => {
                        symmetric = false;
                        break 'outer;
                    }
                }
            }
        }
        if symmetric {
            m.transpose = Some(transpose);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn is_symmetric_pattern(&self) -> bool {
        self.transpose.is_some()
    }

    /// Same pattern, all values zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.values.iter_mut().for_each(|v| *v = 0.0);
        z
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col(&self, slot: usize) -> usize {
        self.col_idx[slot]
    }

    pub fn diag_slot(&self, i: usize) -> Option<usize> {
        self.diag[i]
    }

    pub fn transpose_slot(&self, slot: usize) -> Option<usize> {
        self.transpose.as_ref().map(|t| t[slot])
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_range(i).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row_range(i).map(|k| self.values[k] * x[self.col_idx[k]]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|k| self.values[k]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// `A + B` for matrices sharing one pattern.
    pub fn add_same_pattern(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::invalid("matrices do not share a sparsity pattern"));
        }
        let mut s = self.clone();
        s.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(s)
    }
}

/// A P1 coefficient vector together with the time it represents.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl NodalField {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        Self { values, time }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn pin_boundary(&mut self, mesh: &Mesh) {
        for &i in &mesh.boundary_ids {
            self.values[i] = 0.0;
        }
    }
}

/// Quadrature on a triangle in barycentric coordinates; weights sum to one
/// and are scaled by `|K|` at use.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Vertex rule, exact for degree 1. Equivalent to mass lumping.
    pub fn vertex() -> Self {
        Self {
            points: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            weights: vec![1.0 / 3.0; 3],
            degree: 1,
        }
    }

    /// Edge-midpoint rule, exact for degree 2.
    pub fn midpoint() -> Self {
        Self {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Six-point symmetric rule (Dunavant), exact for degree 4.
    pub fn six_point() -> Self {
        let (a1, b1, w1) = (0.445_948_490_915_965, 0.108_103_018_168_070, 0.223_381_589_678_011);
        let (a2, b2, w2) = (0.091_576_213_509_771, 0.816_847_572_980_459, 0.109_951_743_655_322);
        Self {
            points: vec![
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ],
            weights: vec![w1, w1, w1, w2, w2, w2],
            degree: 4,
        }
    }
}

/// Precomputed element geometry and element-to-matrix slot maps for a mesh.
#[derive(Clone, Debug)]
pub struct FemSpace<'a> {
    pub mesh: &'a Mesh,
    pattern: SparseMatrix,
    /// `elem_slots[t][3 * a + b]` is the slot of `(tri[a], tri[b])`.
    elem_slots: Vec<[usize; 9]>,
    grads: Vec<[[f64; 2]; 3]>,
    areas: Vec<f64>,
}

impl<'a> FemSpace<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let pattern = SparseMatrix::from_mesh_pattern(mesh);
        let mut elem_slots = Vec::with_capacity(mesh.num_triangles());
        let mut grads = Vec::with_capacity(mesh.num_triangles());
        let mut areas = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut s = [0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    s[3 * a + b] = pattern.slot(tri[a], tri[b]).expect("element entry outside pattern");
                }
            }
            elem_slots.push(s);
            let area = mesh.area(t);
            let z = tri.map(|i| mesh.nodes[i]);
            let mut g = [[0.0; 2]; 3];
            for a in 0..3 {
                let p = z[(a + 1) % 3];
                let q = z[(a + 2) % 3];
                g[a] = [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)];
            }
            grads.push(g);
            areas.push(area);
        }
        Self {
            mesh,
            pattern,
            elem_slots,
            grads,
            areas,
        }
    }

    pub fn pattern(&self) -> &SparseMatrix {
        &self.pattern
    }

    /// Gradients of the three local basis functions on triangle `t`.
    pub fn gradients(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }

    fn point(&self, t: usize, bary: &[f64; 3]) -> [f64; 2] {
        let tri = &self.mesh.triangles[t];
        let mut x = [0.0; 2];
        for a in 0..3 {
            let z = self.mesh.nodes[tri[a]];
            x[0] += bary[a] * z[0];
            x[1] += bary[a] * z[1];
        }
        x
    }

    /// Consistent mass matrix, local matrix `|K| [[2,1,1],[1,2,1],[1,1,2]] / 12`.
    pub fn assemble_mass(&self) -> SparseMatrix {
        let mut m = self.pattern.zeros_like();
        for (t, slots) in self.elem_slots.iter().enumerate() {
            let c = self.areas[t] / 12.0;
            for a in 0..3 {
                for b in 0..3 {
                    m.values[slots[3 * a + b]] += if a == b { 2.0 * c } else { c };
                }
            }
        }
        m
    }

    /// Convection matrix `tau_ij = (beta phi_j psi^l, grad phi_i)` using the
    /// edge-midpoint rule. `psi` is required when the flux exponent is 1.
    pub fn assemble_convection(&self, flux: &FluxField, psi: Option<&[f64]>, t: f64) -> Result<SparseMatrix> {
        let mut out = self.pattern.zeros_like();
        self.assemble_convection_into(&mut out, flux, psi, t)?;
        Ok(out)
    }

    pub fn assemble_convection_into(
        &self,
        out: &mut SparseMatrix,
        flux: &FluxField,
        psi: Option<&[f64]>,
        time: f64,
    ) -> Result<()> {
        let psi = match (flux.exponent, psi) {
            (0, _) => None,
            (1, Some(p)) if p.len() == self.mesh.num_nodes() => Some(p),
            (1, Some(_)) => return Err(Error::invalid("psi length does not match the mesh")),
            (1, None) => return Err(Error::invalid("flux exponent 1 needs a state psi")),
            (l, _) => {
                return Err(Error::invalid(format!(
                    "unsupported flux exponent {l} (expected 0 or 1)"
                )))
            }
        };
        out.values.iter_mut().for_each(|v| *v = 0.0);
        let rule = QuadratureRule::midpoint();
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let g = &self.grads[t];
            let slots = &self.elem_slots[t];
            let mut local = [0.0; 9];
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = self.point(t, bary);
                let beta = (flux.beta)(x[0], x[1], time);
                let mut scale = w * self.areas[t];
                if let Some(p) = psi {
                    scale *= bary[0] * p[tri[0]] + bary[1] * p[tri[1]] + bary[2] * p[tri[2]];
                }
                for a in 0..3 {
                    let adv = scale * (beta[0] * g[a][0] + beta[1] * g[a][1]);
                    for b in 0..3 {
                        local[3 * a + b] += adv * bary[b];
                    }
                }
            }
            for k in 0..9 {
                out.values[slots[k]] += local[k];
            }
        }
        Ok(())
    }

    /// Consistent load vector `(f, phi_i)` of the P1 interpolant of `f` (`M f_nodal`).
    pub fn consistent_load(&self, mass: &SparseMatrix, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let nodal: Vec<f64> = self.mesh.nodes.iter().map(|z| f(z[0], z[1])).collect();
        mass.mul_vec(&nodal)
    }

    /// Evaluates the P1 function with coefficients `values` at a barycentric point of triangle `t`.
    pub fn eval(&self, values: &[f64], t: usize, bary: &[f64; 3]) -> f64 {
        let tri = &self.mesh.triangles[t];
        bary[0] * values[tri[0]] + bary[1] * values[tri[1]] + bary[2] * values[tri[2]]
    }

    /// `(sum_K sum_q w_q |K| (u_h - u)^2)^(1/2)` at time `t`.
    pub fn l2_error(&self, values: &[f64], exact: impl Fn(f64, f64, f64) -> f64, t: f64, rule: &QuadratureRule) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.mesh.num_triangles() {
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = self.point(k, bary);
                let e = self.eval(values, k, bary) - exact(x[0], x[1], t);
                acc += w * self.areas[k] * e * e;
            }
        }
        acc.sqrt()
    }
}

pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    FemSpace::new(mesh).assemble_mass()
}

pub fn assemble_convection(mesh: &Mesh, flux: &FluxField, psi: Option<&[f64]>, t: f64) -> Result<SparseMatrix> {
    FemSpace::new(mesh).assemble_convection(flux, psi, t)
}

/// Row sums of the mass matrix.
pub fn lump_mass(mass: &SparseMatrix) -> Result<Vec<f64>> {
    let m = mass.row_sums();
    if let Some(i) = m.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Internal(format!("nonpositive lumped mass {} at node {i}", m[i])));
    }
    Ok(m)
}

/// Vertex-quadrature inner product `(psi, chi)_h = sum_i m_i psi_i chi_i`.
pub fn lumped_inner_product(lumped: &[f64], psi: &[f64], chi: &[f64]) -> f64 {
    lumped.iter().zip(psi).zip(chi).map(|((m, p), c)| m * p * c).sum()
}

/// `sqrt(e^T M e)`, the exact L2 norm of the P1 function with coefficients `e`.
pub fn mass_norm(mass: &SparseMatrix, e: &[f64]) -> f64 {
    let me = mass.mul_vec(e);
    me.iter().zip(e).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

/// Nodal interpolation of `g`; boundary entries are zeroed when `enforce_bc` is set.
pub fn interpolate(mesh: &Mesh, g: impl Fn(f64, f64) -> f64, enforce_bc: bool) -> Result<NodalField> {
    let mut values = Vec::with_capacity(mesh.num_nodes());
    for (i, z) in mesh.nodes.iter().enumerate() {
        let v = g(z[0], z[1]);
        if !v.is_finite() {
            return Err(Error::invalid(format!("non-finite value {v} at node {i}")));
        }
        values.push(if enforce_bc && mesh.is_boundary[i] { 0.0 } else { v });
    }
    Ok(NodalField::new(values, 0.0))
}

pub fn l2_error(
    mesh: &Mesh,
    field: &NodalField,
    exact: impl Fn(f64, f64, f64) -> f64,
    t: f64,
    rule: &QuadratureRule,
) -> f64 {
    FemSpace::new(mesh).l2_error(&field.values, exact, t, rule)
}

/// Jacobi-preconditioned conjugate gradients on the unconstrained rows.
///
/// Rows and columns flagged in `constrained` are removed; the corresponding
/// entries of the result are zero. Stops once `||A x - b||_2 <= tol ||b||_2`
/// over the free rows.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], constrained: &[bool], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n();
    if b.len() != n || constrained.len() != n {
        return Err(Error::invalid("cg_solve: dimension mismatch"));
    }
    let free = |i: usize| !constrained[i];
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            y[i] = if free(i) {
                a.row_range(i)
                    .filter(|&k| free(a.col(k)))
                    .map(|k| a.values[k] * x[a.col(k)])
                    .sum()
            } else {
                0.0
            };
        }
    };
    let dot = |x: &[f64], y: &[f64]| -> f64 { (0..n).filter(|&i| free(i)).map(|i| x[i] * y[i]).sum() };

    let mut inv_diag = vec![0.0; n];
    for i in (0..n).filter(|&i| free(i)) {
        let d = a.diag_slot(i).map_or(0.0, |k| a.values[k]);
        if !(d > 0.0) {
            return Err(Error::invalid(format!("cg_solve: nonpositive diagonal at row {i}")));
        }
        inv_diag[i] = 1.0 / d;
    }

    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = (0..n).map(|i| if free(i) { b[i] } else { 0.0 }).collect();
    let bnorm = dot(&r, &r).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            // confirm against the true residual
            apply(&x, &mut ap);
            let true_res: f64 = (0..n)
                .filter(|&i| free(i))
                .map(|i| (b[i] - ap[i]).powi(2))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            if true_res <= tol {
                return Ok(x);
            }
            for i in 0..n {
                r[i] = if free(i) { b[i] - ap[i] } else { 0.0 };
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior_mask(mesh: &Mesh) -> Vec<bool> {
        mesh.is_boundary.clone()
    }

    #[test]
    fn rejects_duplicate_columns() {
        let r = SparseMatrix::from_rows(vec![vec![(0, 1.0), (0, 2.0)]]);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pattern_flags() {
        let sym = SparseMatrix::from_rows(vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 3.0)]]).unwrap();
        assert!(sym.is_symmetric_pattern());
        let asym = SparseMatrix::from_rows(vec![vec![(0, 1.0), (1, 2.0)], vec![(1, 3.0)]]).unwrap();
        assert!(!asym.is_symmetric_pattern());
        let mesh = Mesh::uniform(4).unwrap();
        assert!(SparseMatrix::from_mesh_pattern(&mesh).is_symmetric_pattern());
    }

    #[test]
    fn mass_matrix_small_mesh() {
        let mesh = Mesh::uniform(2).unwrap();
        let m = assemble_mass(&mesh);
        assert!((m.get(4, 4) - 0.125).abs() < 1e-15);
        let total: f64 = m.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(m.values.iter().all(|&v| v >= 0.0));
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        let lumped = lump_mass(&m).unwrap();
        assert!((lumped[4] - 0.25).abs() < 1e-15);
        // corner (0,0) touches both triangles of its cell, corner (1,0) only one
        assert!((lumped[0] - 2.0 / 24.0).abs() < 1e-15);
        assert!((lumped[2] - 1.0 / 24.0).abs() < 1e-15);
        assert!((lumped.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lump_mass_rejects_nonpositive_rows() {
        let m = SparseMatrix::from_rows(vec![vec![(0, 1.0)], vec![(1, 0.0)]]).unwrap();
        assert!(matches!(lump_mass(&m), Err(Error::Internal(_))));
    }

    #[test]
    fn lumped_product_matches_element_vertex_loop() {
        let mesh = Mesh::uniform(3).unwrap();
        let lumped = lump_mass(&assemble_mass(&mesh)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let chi: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut brute = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            brute += mesh.area(t) / 3.0 * tri.iter().map(|&i| psi[i] * chi[i]).sum::<f64>();
        }
        assert!((lumped_inner_product(&lumped, &psi, &chi) - brute).abs() < 1e-14);
        assert_eq!(lumped_inner_product(&lumped, &vec![0.0; 16], &vec![0.0; 16]), 0.0);
        let mut e = vec![0.0; 16];
        e[5] = 1.0;
        assert_eq!(lumped_inner_product(&lumped, &e, &e), lumped[5]);
    }

    #[test]
    fn convection_zero_beta_and_bad_exponent() {
        let mesh = Mesh::uniform(3).unwrap();
        let zero = FluxField {
            name: "zero",
            exponent: 0,
            beta: |_, _, _| [0.0, 0.0],
            divergence_free: true,
        };
        let t = assemble_convection(&mesh, &zero, None, 0.0).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
        let bad = FluxField { exponent: 2, ..zero };
        assert!(matches!(
            assemble_convection(&mesh, &bad, None, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        let burgers = problems::builtin_flux("burgers").unwrap();
        assert!(assemble_convection(&mesh, &burgers, None, 0.0).is_err());
    }

    #[test]
    fn quadratic_flux_with_constant_state_scales_linear_matrix() {
        let mesh = Mesh::uniform(4).unwrap();
        let burgers = problems::builtin_flux("burgers").unwrap();
        let linear = FluxField { exponent: 0, ..burgers };
        let c = 1.7;
        let psi = vec![c; mesh.num_nodes()];
        let t1 = assemble_convection(&mesh, &burgers, Some(&psi), 0.0).unwrap();
        let t0 = assemble_convection(&mesh, &linear, None, 0.0).unwrap();
        for (a, b) in t1.values.iter().zip(&t0.values) {
            assert!((a - c * b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_beta_interior_row_sums_vanish() {
        let mesh = Mesh::uniform(6).unwrap();
        let flux = problems::builtin_flux("advect-13").unwrap();
        let t = assemble_convection(&mesh, &flux, None, 0.0).unwrap();
        let sums = t.row_sums();
        for &i in &mesh.interior_ids {
            assert!(sums[i].abs() < 1e-14, "row {i}: {}", sums[i]);
        }
    }

    #[test]
    fn cg_identity_zero_and_mass() {
        let mesh = Mesh::uniform(8).unwrap();
        let n = mesh.num_nodes();
        let mask = interior_mask(&mesh);
        let ident = SparseMatrix::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect()).unwrap();
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        for &i in &mesh.boundary_ids {
            b[i] = 0.0;
        }
        let x = cg_solve(&ident, &b, &mask, 1e-12, 10).unwrap();
        assert_eq!(x, b);
        let zero = cg_solve(&ident, &vec![0.0; n], &mask, 1e-12, 10).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let mass = assemble_mass(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for &i in &mesh.boundary_ids {
            xs[i] = 0.0;
        }
        let b = mass.mul_vec(&xs);
        let x = cg_solve(&mass, &b, &mask, 1e-13, 200).unwrap();
        for (a, e) in x.iter().zip(&xs) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let mesh = Mesh::uniform(10).unwrap();
        let mass = assemble_mass(&mesh);
        let b: Vec<f64> = (0..mesh.num_nodes())
            .map(|i| {
                if mesh.is_boundary[i] {
                    0.0
                } else {
                    (i as f64 * 0.37).cos()
                }
            })
            .collect();
        match cg_solve(&mass, &b, &mesh.is_boundary, 1e-14, 2) {
            Err(Error::CgNotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn interpolation_cases() {
        let mesh = Mesh::uniform(2).unwrap();
        let ones = interpolate(&mesh, |_, _| 1.0, false).unwrap();
        assert!(ones.values.iter().all(|&v| v == 1.0));
        let poly = interpolate(&mesh, |x, y| x * (1.0 - x) * y * (1.0 - y), false).unwrap();
        assert_eq!(poly.values[4], 0.0625);
        assert!(matches!(
            interpolate(&mesh, |x, _| 1.0 / x, false),
            Err(Error::InvalidArgument(_))
        ));

        let mesh = Mesh::uniform(10).unwrap();
        let g = problems::builtin_initial("gauss").unwrap();
        let u0 = interpolate(&mesh, g.func, true).unwrap();
        for (i, z) in mesh.nodes.iter().enumerate() {
            if mesh.is_boundary[i] {
                assert_eq!(u0.values[i], 0.0);
            } else {
                let e = (-100.0 * ((z[0] - 0.5).powi(2) + (z[1] - 0.5).powi(2))).exp();
                assert_eq!(u0.values[i], e);
            }
        }
    }

    #[test]
    fn l2_error_cases() {
        let mesh = Mesh::uniform(5).unwrap();
        let rule = QuadratureRule::six_point();
        let affine = |x: f64, y: f64, _t: f64| 1.0 + 2.0 * x - 3.0 * y;
        let field = interpolate(&mesh, |x, y| affine(x, y, 0.0), false).unwrap();
        assert!(l2_error(&mesh, &field, affine, 0.0, &rule) < 1e-14);

        let mesh = Mesh::uniform(16).unwrap();
        let zero = NodalField::zeros(mesh.num_nodes());
        let s = |x: f64, y: f64, _t: f64| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
        let e = l2_error(&mesh, &zero, s, 0.0, &rule);
        assert!((e - 0.5).abs() < 1e-4, "{e}");
    }

    #[test]
    fn quadrature_rules_integrate_declared_degree() {
        // integral over the unit right triangle of x^a y^b = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for rule in [
            QuadratureRule::vertex(),
            QuadratureRule::midpoint(),
            QuadratureRule::six_point(),
        ] {
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for a in 0..=rule.degree as u32 {
                for b in 0..=(rule.degree as u32 - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| 0.5 * w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    assert!((approx - exact).abs() < 1e-13, "degree {} a={a} b={b}", rule.degree);
                }
            }
        }
    }

    #[test]
    fn discrete_norm_from_mass_matches_quadrature() {
        let mesh = Mesh::uniform(6).unwrap();
        let space = FemSpace::new(&mesh);
        let mass = space.assemble_mass();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let via_rule = space.l2_error(&e, |_, _, _| 0.0, 0.0, &QuadratureRule::six_point());
        assert!((mass_norm(&mass, &e) - via_rule).abs() < 1e-13);
    }
}
