//! Triangulations of the unit square.
//!
//! The built-in generator splits the square into `M x M` cells of side
//! `h0 = 1/M` and cuts every cell along its lower-left to upper-right
//! diagonal. With one global diagonal direction all interior patches are
//! congruent and point-symmetric about their centre node; every interior node
//! has exactly six neighbours.
//!
//! Node numbering is lexicographic in `(q, p)`: the node at grid position
//! `(p, q)` (coordinates `(p/M, q/M)`) has index `q * (M + 1) + p`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Mesh {
    /// Subdivisions per side; 0 for meshes not produced by the uniform generator.
    pub m: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub is_boundary: Vec<bool>,
    pub interior_ids: Vec<usize>,
    pub boundary_ids: Vec<usize>,
    /// Sorted neighbour lists, node itself excluded.
    pub node_patch: Vec<Vec<usize>>,
    /// Triangles incident to each node.
    pub node_triangles: Vec<Vec<usize>>,
    pub h0: f64,
    /// Largest triangle diameter.
    pub h: f64,
}

impl Mesh {
    /// Uniform right-triangle mesh of `[0,1]^2` with `m` subdivisions per side.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(format!(
                "uniform mesh needs M >= 2 (M = {m} has no interior node)"
            )));
        }
        let n1 = m + 1;
        let h0 = 1.0 / m as f64;
        let mut nodes = Vec::with_capacity(n1 * n1);
        let mut is_boundary = Vec::with_capacity(n1 * n1);
        for q in 0..n1 {
            for p in 0..n1 {
                nodes.push([p as f64 / m as f64, q as f64 / m as f64]);
                is_boundary.push(p == 0 || q == 0 || p == m || q == m);
            }
        }
        let id = |p: usize, q: usize| q * n1 + p;
        let mut triangles = Vec::with_capacity(2 * m * m);
        for q in 0..m {
            for p in 0..m {
                let a = id(p, q);
                let b = id(p + 1, q);
                let c = id(p + 1, q + 1);
                let d = id(p, q + 1);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut mesh = Self::from_parts(nodes, triangles, is_boundary)?;
        mesh.m = m;
        mesh.h0 = h0;
        Ok(mesh)
    }

    /// Builds adjacency for an arbitrary triangulation. Triangles with
    /// clockwise orientation are reordered.
    pub fn from_parts(nodes: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>, is_boundary: Vec<bool>) -> Result<Self> {
        let n = nodes.len();
        if is_boundary.len() != n {
            return Err(Error::invalid("boundary flags and nodes differ in length"));
        }
        let mut node_patch = vec![Vec::new(); n];
        let mut node_triangles = vec![Vec::new(); n];
        let mut h: f64 = 0.0;
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::invalid(format!("triangle {t} references a missing node")));
            }
            let area = signed_area(&nodes, tri);
            if area == 0.0 {
                return Err(Error::invalid(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
            for a in 0..3 {
                let i = tri[a];
                node_triangles[i].push(t);
                for b in 0..3 {
                    if a != b {
                        node_patch[i].push(tri[b]);
                    }
                }
            }
            h = h.max(diameter(&nodes, tri));
        }
        for patch in &mut node_patch {
            patch.sort_unstable();
            patch.dedup();
        }
        let interior_ids = (0..n).filter(|&i| !is_boundary[i]).collect();
        let boundary_ids = (0..n).filter(|&i| is_boundary[i]).collect();
        Ok(Self {
            m: 0,
            nodes,
            triangles,
            is_boundary,
            interior_ids,
            boundary_ids,
            node_patch,
            node_triangles,
            h0: f64::NAN,
            h,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    /// Node index at grid position `(p, q)` of a uniform mesh.
    pub fn grid_index(&self, p: usize, q: usize) -> usize {
        q * (self.m + 1) + p
    }

    /// Shape-regularity constant `max h_K / rho_K` (with `rho_K` the diameter
    /// of the inscribed circle) and quasi-uniformity ratio `max h_K / min h_K`.
    pub fn quality(&self) -> (f64, f64) {
        let mut gamma: f64 = 0.0;
        let mut hmax: f64 = 0.0;
        let mut hmin = f64::INFINITY;
        for tri in &self.triangles {
            let hk = diameter(&self.nodes, tri);
            let area = signed_area(&self.nodes, tri);
            let inscribed = 4.0 * area / perimeter(&self.nodes, tri);
            gamma = gamma.max(hk / inscribed);
            hmax = hmax.max(hk);
            hmin = hmin.min(hk);
        }
        (gamma, hmax / hmin)
    }

    /// Plain-text dump: `N_nodes N_triangles`, then `x y is_boundary` per
    /// node, then `i j k` per triangle (0-based). Coordinates carry 17
    /// significant digits.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.num_nodes(), self.num_triangles())?;
        for (z, &b) in self.nodes.iter().zip(&self.is_boundary) {
            writeln!(w, "{:.16e} {:.16e} {}", z[0], z[1], u8::from(b))?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::invalid("mesh dump truncated"))?
                .map_err(Error::from)
        };
        let header = next()?;
        let mut it = header.split_whitespace().map(str::parse::<usize>);
        let (n, nt) = match (it.next(), it.next()) {
            (Some(Ok(n)), Some(Ok(nt))) => (n, nt),
            _ => return Err(Error::invalid(format!("bad mesh header '{header}'"))),
        };
        let bad = |l: &str| Error::invalid(format!("bad mesh line '{l}'"));
        let mut nodes = Vec::with_capacity(n);
        let mut is_boundary = Vec::with_capacity(n);
        for _ in 0..n {
            let l = next()?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(&l));
            }
            let x = f[0].parse::<f64>().map_err(|_| bad(&l))?;
            let y = f[1].parse::<f64>().map_err(|_| bad(&l))?;
            nodes.push([x, y]);
            is_boundary.push(f[2] == "1");
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = next()?;
            let v: std::result::Result<Vec<usize>, _> = l.split_whitespace().map(str::parse::<usize>).collect();
            match v {
                Ok(v) if v.len() == 3 => triangles.push([v[0], v[1], v[2]]),
                _ => return Err(bad(&l)),
            }
        }
        Self::from_parts(nodes, triangles, is_boundary)
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|i| nodes[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_lengths(nodes: &[[f64; 2]], tri: &[usize; 3]) -> [f64; 3] {
    let [a, b, c] = tri.map(|i| nodes[i]);
    let d = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
    [d(a, b), d(b, c), d(c, a)]
}

fn diameter(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    edge_lengths(nodes, tri).into_iter().fold(0.0, f64::max)
}

fn perimeter(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    edge_lengths(nodes, tri).iter().sum()
}
