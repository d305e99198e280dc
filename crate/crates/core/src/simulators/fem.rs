//! Linear finite elements on interval and triangle meshes.

use crate::error::{Error, Result};
use crate::graph::CIGraph;
use crate::sparse::{SparseMatrix, SparseSpd};

const AREA_TOL: f64 = 1e-14;

/// Nodes of an interval mesh, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1d {
    pub nodes: Vec<f64>,
}

/// Triangle mesh in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2d {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mesh {
    D1(Mesh1d),
    D2(Mesh2d),
}

impl Mesh1d {
    /// `p` equally spaced nodes on `[0, length]`.
    pub fn uniform(p: usize, length: f64) -> Self {
        let h = length / (p.max(2) - 1) as f64;
        Self {
            nodes: (0..p).map(|i| i as f64 * h).collect(),
        }
    }
}

impl Mesh2d {
    /// Rectangle `[0, lx] x [0, ly]` with `nx x ny` vertices; each cell is
    /// split along its lower-left to upper-right diagonal.
    pub fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        let hx = lx / (nx.max(2) - 1) as f64;
        let hy = ly / (ny.max(2) - 1) as f64;
        let vertices = (0..ny)
            .flat_map(|r| (0..nx).map(move |c| [c as f64 * hx, r as f64 * hy]))
            .collect();
        let idx = |r: usize, c: usize| r * nx + c;
        let mut triangles = Vec::new();
        for r in 0..ny.saturating_sub(1) {
            for c in 0..nx.saturating_sub(1) {
                triangles.push([idx(r, c), idx(r, c + 1), idx(r + 1, c + 1)]);
                triangles.push([idx(r, c), idx(r + 1, c + 1), idx(r + 1, c)]);
            }
        }
        Self {
            vertices,
            triangles,
        }
    }

    /// Parses `vertices N` followed by `N` lines `x y`, then `triangles T`
    /// followed by `T` lines `i j k` (0-based). `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let nv = section_header(lines.next(), "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| eof("vertex"))?;
            let v = parse_numbers::<f64>(ln, l, 2)?;
            vertices.push([v[0], v[1]]);
        }
        let nt = section_header(lines.next(), "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| eof("triangle"))?;
            let t = parse_numbers::<usize>(ln, l, 3)?;
            if t.iter().any(|&i| i >= nv) {
                return Err(Error::Parse {
                    line: ln,
                    message: "vertex index out of range".into(),
                });
            }
            triangles.push([t[0], t[1], t[2]]);
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    fn corners(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[e];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        ]
    }
}

fn eof(what: &str) -> Error {
    Error::Parse {
        line: 0,
        message: format!("unexpected end of input while reading {what} lines"),
    }
}

fn section_header(line: Option<(usize, &str)>, want: &str) -> Result<usize> {
    let (ln, l) = line.ok_or_else(|| eof(want))?;
    let mut it = l.split_whitespace();
    match (it.next(), it.next().and_then(|c| c.parse().ok())) {
        (Some(w), Some(n)) if w == want => Ok(n),
        _ => Err(Error::Parse {
            line: ln,
            message: format!("expected `{want} <count>`"),
        }),
    }
}

fn parse_numbers<T: std::str::FromStr>(line: usize, text: &str, count: usize) -> Result<Vec<T>> {
    let v: Vec<T> = text
        .split_whitespace()
        .map(|s| s.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line,
            message: format!("could not parse `{text}`"),
        })?;
    if v.len() != count {
        return Err(Error::Parse {
            line,
            message: format!("expected {count} fields, found {}", v.len()),
        });
    }
    Ok(v)
}

fn signed_area(v: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

/// `Area/12 · [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// Row sums of [`local_mass`]: `Area/3` on each vertex.
pub fn local_lumped_mass(area: f64) -> [f64; 3] {
    [area / 3.0; 3]
}

/// `α ∫ ∇φ_i · ∇φ_j` over one triangle.
///
/// With `β_i = y_j - y_k` and `γ_i = x_k - x_j` over cyclic `(i, j, k)`,
/// `∇φ_i = (β_i, γ_i) / (2 Area)` and the entry is
/// `α/(4 Area) · (β_i β_j + γ_i γ_j)`.
pub fn local_stiffness(v: [[f64; 2]; 3], alpha: f64) -> Result<[[f64; 3]; 3]> {
    let area = signed_area(&v).abs();
    if area <= AREA_TOL {
        return Err(Error::DegenerateElement { element: 0, area });
    }
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = v[j][1] - v[k][1];
        c[i] = v[k][0] - v[j][0];
    }
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = alpha / (4.0 * area) * (b[i] * b[j] + c[i] * c[j]);
        }
    }
    Ok(a)
}

/// Global matrices of a mesh.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub mass: SparseSpd,
    /// Diagonal of the lumped mass `M̃`.
    pub lumped: Vec<f64>,
    pub stiffness: SparseSpd,
}

impl FemMatrices {
    pub fn lumped_matrix(&self) -> SparseSpd {
        SparseSpd::diagonal(&self.lumped)
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        match self {
            Mesh::D1(m) => m.nodes.len(),
            Mesh::D2(m) => m.vertices.len(),
        }
    }

    fn elements(&self) -> Vec<Vec<usize>> {
        match self {
            Mesh::D1(m) => (1..m.nodes.len()).map(|i| vec![i - 1, i]).collect(),
            Mesh::D2(m) => m.triangles.iter().map(|t| t.to_vec()).collect(),
        }
    }

    /// Vertices sharing an element.
    pub fn graph(&self) -> CIGraph {
        let edges = self.elements().into_iter().flat_map(|e| {
            let mut out = Vec::new();
            for a in 0..e.len() {
                for b in a + 1..e.len() {
                    out.push((e[a], e[b]));
                }
            }
            out
        });
        CIGraph::from_edges(self.n_vertices(), edges).expect("mesh indices were validated")
    }

    /// Assembles mass, lumped mass and stiffness (with diffusivity `alpha`).
    pub fn assemble(&self, alpha: f64) -> Result<FemMatrices> {
        let p = self.n_vertices();
        let mut mt = Vec::new();
        let mut at = Vec::new();
        let mut lumped = vec![0.0; p];
        let mut push = |idx: &[usize], m: &[&[f64]], a: &[&[f64]]| {
            for (r, &i) in idx.iter().enumerate() {
                for (s, &j) in idx.iter().enumerate() {
                    if i >= j {
                        mt.push((i, j, m[r][s]));
                        at.push((i, j, a[r][s]));
                    }
                }
                lumped[i] += m[r].iter().sum::<f64>();
            }
        };
        match self {
            Mesh::D1(mesh) => {
                for e in 1..mesh.nodes.len() {
                    let h = mesh.nodes[e] - mesh.nodes[e - 1];
                    if h <= AREA_TOL {
                        return Err(Error::DegenerateElement {
                            element: e - 1,
                            area: h,
                        });
                    }
                    let m = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
                    let a = [[alpha / h, -alpha / h], [-alpha / h, alpha / h]];
                    push(&[e - 1, e], &[&m[0], &m[1]], &[&a[0], &a[1]]);
                }
            }
            Mesh::D2(mesh) => {
                for (e, t) in mesh.triangles.iter().enumerate() {
                    let v = mesh.corners(e);
                    let area = signed_area(&v).abs();
                    if area <= AREA_TOL {
                        return Err(Error::DegenerateElement { element: e, area });
                    }
                    let m = local_mass(area);
                    let a = local_stiffness(v, alpha)
                        .map_err(|_| Error::DegenerateElement { element: e, area })?;
                    push(t, &[&m[0], &m[1], &m[2]], &[&a[0], &a[1], &a[2]]);
                }
            }
        }
        Ok(FemMatrices {
            mass: SparseSpd::from_triplets(p, mt)?,
            lumped,
            stiffness: SparseSpd::from_triplets(p, at)?,
        })
    }
}

/// Precision `(κ²M̃ + A)ᵀ M̃⁻¹ (κ²M̃ + A)` of the α=2 Matérn field.
pub fn matern_fem_precision(kappa: f64, mesh: &Mesh) -> Result<SparseSpd> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let fem = mesh.assemble(1.0)?;
    let k = fem
        .lumped_matrix()
        .scale(kappa * kappa)
        .add(&fem.stiffness)?;
    let inv: Vec<f64> = fem.lumped.iter().map(|m| 1.0 / m).collect();
    k.to_general().gram_weighted(&SparseSpd::diagonal(&inv))
}

/// Euler-Maruyama discretisation of the stochastic heat equation
/// `u_{t+1} = B u_t + w_t` on a mesh, with lumped mass.
///
/// `B = I - dt M̃⁻¹(A + γ M̃)`, where `A` is the (positive semi-definite)
/// stiffness and `γ >= 0` a linear decay. `w_t` has precision
/// `M̃ / (σ² dt²)`.
#[derive(Debug, Clone)]
pub struct HeatModel {
    pub fem: FemMatrices,
    pub b: SparseMatrix,
    pub innovation_prec: SparseSpd,
    pub sigma: f64,
    pub dt: f64,
    pub decay: f64,
}

pub fn heat_model(mesh: &Mesh, alpha: f64, sigma: f64, dt: f64, decay: f64) -> Result<HeatModel> {
    if !(sigma > 0.0 && dt > 0.0 && decay >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need sigma > 0, dt > 0, decay >= 0 (got {sigma}, {dt}, {decay})"
        )));
    }
    let fem = mesh.assemble(alpha)?;
    let p = fem.lumped.len();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..p).map(|i| vec![(i, 1.0 - dt * decay)]).collect();
    for (i, j, a) in fem.stiffness.triplets() {
        rows[i].push((j, -dt * a / fem.lumped[i]));
        if i != j {
            rows[j].push((i, -dt * a / fem.lumped[j]));
        }
    }
    let b = SparseMatrix::from_rows(p, rows)?;
    let scale = 1.0 / (sigma * sigma * dt * dt);
    let innovation_prec = fem.lumped_matrix().scale(scale);
    Ok(HeatModel {
        fem,
        b,
        innovation_prec,
        sigma,
        dt,
        decay,
    })
}

impl HeatModel {
    pub fn p(&self) -> usize {
        self.fem.lumped.len()
    }

    /// Joint precision of `(u_1, …, u_T)` stacked time-major:
    /// diagonal blocks `M̃` (first, last) and `BᵀM̃B + M̃` (interior),
    /// neighbouring blocks `-M̃B` below and `-BᵀM̃` above, all divided by
    /// `σ² dt²`.
    pub fn smoothing_precision(&self, steps: usize) -> Result<SparseSpd> {
        let p = self.p();
        let m = &self.innovation_prec;
        let btmb = self.b.gram_weighted(m)?;
        let mut trip = Vec::new();
        for t in 0..steps {
            let off = t * p;
            trip.extend(m.triplets().map(|(i, j, v)| (off + i, off + j, v)));
            if t > 0 && t + 1 < steps {
                trip.extend(btmb.triplets().map(|(i, j, v)| (off + i, off + j, v)));
            }
            if t + 1 < steps {
                // Block (t+1, t) = -M̃B / (σ² dt²).
                for (i, j, bij) in self.b.triplets() {
                    trip.push((off + p + i, off + j, -m.get(i, i) * bij));
                }
            }
        }
        SparseSpd::from_triplets(p * steps, trip)
    }

    /// Spatial graph of each time slice plus links to the neighbouring slices.
    pub fn smoothing_graph(&self, steps: usize) -> Result<CIGraph> {
        Ok(crate::graph::graph_from_sparsity(
            &self.smoothing_precision(steps)?,
        ))
    }
}

impl SparseSpd {
    /// Full symmetric matrix as a general sparse matrix.
    pub fn to_general(&self) -> SparseMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim()];
        for (i, j, v) in self.triplets() {
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        SparseMatrix::from_rows(self.dim(), rows).expect("indices are in range")
    }
}
