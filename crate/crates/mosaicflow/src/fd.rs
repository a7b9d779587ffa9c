//! Classical 5-point finite-difference Laplace solver on rectilinear domains.
//!
//! Serves as training-data generator, ground-truth oracle, and numerical
//! genome solver. The genome grid is fixed so that a boundary trace's points
//! coincide exactly with boundary vertices: `n_per_edge` cells per unit edge,
//! i.e. a 33x33 vertex grid for the default 128-point trace.

use crate::error::{Error, Result};
use crate::field::{BoundaryTrace, DomainMask, FieldGrid};

/// Relative residual target for the conjugate-gradient solve.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Sparse SPD system assembled from the interior-Laplace stencil.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in entries {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut indices = vec![0usize; entries.len()];
        let mut values = vec![0.0; entries.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in entries {
            let k = cursor[r];
            indices[k] = c;
            values[k] = v;
            cursor[r] += 1;
        }
        Csr {
            n,
            indptr: counts,
            indices,
            values,
        }
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[k] == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }
}

impl SparseSystem {
    /// Jacobi-preconditioned conjugate gradient to relative residual
    /// [`CG_TOLERANCE`].
    pub fn solve_cg(&self) -> Result<Vec<f64>> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Contract(
                "empty interior: nothing to solve".to_string(),
            ));
        }
        let a = Csr::from_triplets(n, &self.entries);
        let inv_diag: Vec<f64> = a
            .diagonal()
            .iter()
            .map(|&d| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::Numerical(format!("non-positive diagonal {d}")))
                }
            })
            .collect::<Result<_>>()?;

        let b_norm = norm2(&self.rhs);
        if b_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let target = CG_TOLERANCE * b_norm;

        let mut x = vec![0.0; n];
        let mut r = self.rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut rz: f64 = dot(&r, &z);
        let mut ap = vec![0.0; n];

        let max_iter = 20 * n + 200;
        for _ in 0..max_iter {
            a.matvec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                return Err(Error::Numerical(format!(
                    "conjugate gradient broke down (pAp = {pap})"
                )));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm2(&r) <= target {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Numerical(format!(
            "conjugate gradient did not reach {CG_TOLERANCE:e} within {max_iter} iterations"
        )))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Vertex classification on the fine grid induced by a cell mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VertexKind {
    Outside,
    Boundary,
    Interior,
}

/// Discretization of a rectilinear domain: bounding-box vertex grid plus a
/// per-vertex classification.
pub struct Discretization {
    pub nx: usize,
    pub ny: usize,
    pub origin: (f64, f64),
    pub h: f64,
    kinds: Vec<VertexKind>,
    cell_bounds: (i64, i64),
    cells_per_unit: usize,
}

impl Discretization {
    pub fn new(mask: &DomainMask, cells_per_unit: usize, l: f64) -> Result<Self> {
        if cells_per_unit < 3 {
            return Err(Error::Contract(format!(
                "resolution must be at least 3 cells per genome edge, got {cells_per_unit}"
            )));
        }
        if l <= 0.0 {
            return Err(Error::Contract(format!("edge length must be positive, got {l}")));
        }
        let (cx0, cy0, cx1, cy1) = mask.bounds();
        let nx = ((cx1 - cx0 + 1) as usize) * cells_per_unit + 1;
        let ny = ((cy1 - cy0 + 1) as usize) * cells_per_unit + 1;
        let h = l / cells_per_unit as f64;
        let mut kinds = vec![VertexKind::Outside; nx * ny];
        let r = cells_per_unit as i64;
        for j in 0..ny {
            for i in 0..nx {
                // Vertex position in 1/r cell units, kept integral.
                let gx = cx0 * r + i as i64;
                let gy = cy0 * r + j as i64;
                kinds[j * nx + i] = classify(mask, gx, gy, r);
            }
        }
        Ok(Self {
            nx,
            ny,
            origin: (cx0 as f64 * l, cy0 as f64 * l),
            h,
            kinds,
            cell_bounds: (cx0, cy0),
            cells_per_unit,
        })
    }

    fn kind(&self, i: usize, j: usize) -> VertexKind {
        self.kinds[j * self.nx + i]
    }

    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.h,
            self.origin.1 + j as f64 * self.h,
        )
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.kind(i, j) == VertexKind::Interior
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        self.kind(i, j) == VertexKind::Boundary
    }

    #[allow(dead_code)]
    fn cell_origin(&self) -> (i64, i64) {
        self.cell_bounds
    }

    #[allow(dead_code)]
    fn resolution(&self) -> usize {
        self.cells_per_unit
    }
}

/// Classifies a fine vertex at lattice position (gx, gy) in units of 1/r cells.
fn classify(mask: &DomainMask, gx: i64, gy: i64, r: i64) -> VertexKind {
    let on_x_line = gx.rem_euclid(r) == 0;
    let on_y_line = gy.rem_euclid(r) == 0;
    let cx = gx.div_euclid(r);
    let cy = gy.div_euclid(r);
    let xs = if on_x_line { vec![cx - 1, cx] } else { vec![cx] };
    let ys = if on_y_line { vec![cy - 1, cy] } else { vec![cy] };
    let mut any = false;
    let mut all = true;
    for &x in &xs {
        for &y in &ys {
            if mask.contains((x, y)) {
                any = true;
            } else {
                all = false;
            }
        }
    }
    match (any, all) {
        (false, _) => VertexKind::Outside,
        (true, true) => VertexKind::Interior,
        (true, false) => VertexKind::Boundary,
    }
}

/// Assembles the interior-Laplace system for Dirichlet data `bc` evaluated at
/// boundary vertices. Returns the system plus the vertex-to-unknown map.
pub fn assemble_dirichlet(
    disc: &Discretization,
    bc: &dyn Fn(f64, f64) -> f64,
) -> Result<(SparseSystem, Vec<Option<usize>>)> {
    let (nx, ny) = (disc.nx, disc.ny);
    let mut unknown = vec![None; nx * ny];
    let mut n = 0usize;
    for j in 0..ny {
        for i in 0..nx {
            if disc.is_interior(i, j) {
                unknown[j * nx + i] = Some(n);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Contract(
            "domain discretization has no interior vertices".to_string(),
        ));
    }
    let inv_h2 = 1.0 / (disc.h * disc.h);
    let mut entries = Vec::with_capacity(5 * n);
    let mut rhs = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let Some(row) = unknown[j * nx + i] else {
                continue;
            };
            entries.push((row, row, 4.0 * inv_h2));
            let neighbors = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (ni, nj) in neighbors {
                if ni >= nx || nj >= ny {
                    return Err(Error::Numerical(format!(
                        "interior vertex ({i},{j}) touches the grid edge; inconsistent mask"
                    )));
                }
                match unknown[nj * nx + ni] {
                    Some(col) => entries.push((row, col, -inv_h2)),
                    None => {
                        if !disc.is_boundary(ni, nj) {
                            return Err(Error::Numerical(format!(
                                "interior vertex ({i},{j}) has an outside neighbor ({ni},{nj})"
                            )));
                        }
                        let (x, y) = disc.position(ni, nj);
                        let g = bc(x, y);
                        if !g.is_finite() {
                            return Err(Error::Data(format!(
                                "non-finite boundary value at ({x}, {y})"
                            )));
                        }
                        rhs[row] += g * inv_h2;
                    }
                }
            }
        }
    }
    Ok((SparseSystem { n, entries, rhs }, unknown))
}

/// Solves the Laplace equation with Dirichlet data on a rectilinear domain.
///
/// `cells_per_unit` is the number of grid cells per genome edge (33x33
/// vertices on the unit genome at the default 32). The returned grid spans the
/// mask's bounding box; vertices outside the domain closure are zero.
pub fn solve_dirichlet(
    mask: &DomainMask,
    bc: &dyn Fn(f64, f64) -> f64,
    cells_per_unit: usize,
    l: f64,
) -> Result<FieldGrid> {
    let disc = Discretization::new(mask, cells_per_unit, l)?;
    let (system, unknown) = assemble_dirichlet(&disc, bc)?;
    let solution = system.solve_cg()?;
    let mut grid = FieldGrid::zeros(disc.nx, disc.ny, disc.origin, (disc.h, disc.h))?;
    for j in 0..disc.ny {
        for i in 0..disc.nx {
            if let Some(k) = unknown[j * disc.nx + i] {
                grid.set(i, j, solution[k]);
            } else if disc.is_boundary(i, j) {
                let (x, y) = disc.position(i, j);
                grid.set(i, j, bc(x, y));
            }
        }
    }
    Ok(grid)
}

/// A solved genome BVP, queryable anywhere inside the genome by bilinear
/// interpolation between the native grid vertices.
#[derive(Debug, Clone)]
pub struct GenomeField {
    grid: FieldGrid,
    l: f64,
}

impl GenomeField {
    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn edge_length(&self) -> f64 {
        self.l
    }

    /// Value at genome-local coordinates (x, y) in [0, l]^2.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let tol = 1e-9 * self.l;
        if !(-tol..=self.l + tol).contains(&x) || !(-tol..=self.l + tol).contains(&y) {
            return Err(Error::Domain(format!(
                "query ({x}, {y}) outside genome [0, {}]^2",
                self.l
            )));
        }
        let x = x.clamp(0.0, self.l);
        let y = y.clamp(0.0, self.l);
        let (hx, hy) = self.grid.spacing;
        let cells_x = self.grid.nx - 1;
        let cells_y = self.grid.ny - 1;
        let i = ((x / hx) as usize).min(cells_x - 1);
        let j = ((y / hy) as usize).min(cells_y - 1);
        let tx = (x - i as f64 * hx) / hx;
        let ty = (y - j as f64 * hy) / hy;
        let v00 = self.grid.at(i, j);
        let v10 = self.grid.at(i + 1, j);
        let v01 = self.grid.at(i, j + 1);
        let v11 = self.grid.at(i + 1, j + 1);
        Ok(v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty)
    }
}

/// Solves the genome BVP for a boundary trace on its native grid.
///
/// Trace points land exactly on boundary vertices, so no boundary
/// interpolation is involved.
pub fn genome_solver_numeric(trace: &BoundaryTrace) -> Result<GenomeField> {
    let l = trace.edge_length();
    let r = trace.n_per_edge();
    let mask = DomainMask::new([(0, 0)])?;
    let bc = trace_boundary_function(trace);
    let disc = Discretization::new(&mask, r, l)?;
    let (system, unknown) = assemble_dirichlet(&disc, &bc)?;
    let solution = system.solve_cg()?;
    let mut grid = FieldGrid::zeros(disc.nx, disc.ny, (0.0, 0.0), (disc.h, disc.h))?;
    for j in 0..disc.ny {
        for i in 0..disc.nx {
            if let Some(k) = unknown[j * disc.nx + i] {
                grid.set(i, j, solution[k]);
            } else {
                grid.set(i, j, trace.values()[boundary_vertex_trace_index(i, j, r)]);
            }
        }
    }
    Ok(GenomeField { grid, l })
}

/// Trace index owning boundary vertex (i, j) of an (r+1)x(r+1) genome grid.
pub fn boundary_vertex_trace_index(i: usize, j: usize, r: usize) -> usize {
    debug_assert!(i <= r && j <= r);
    debug_assert!(i == 0 || i == r || j == 0 || j == r);
    if j == 0 && i < r {
        i
    } else if i == r && j < r {
        r + j
    } else if j == r && i > 0 {
        3 * r - i
    } else {
        4 * r - j
    }
}

/// Boundary function that bilinearly interpolates a trace along the perimeter
/// (exact at trace points).
pub fn trace_boundary_function(trace: &BoundaryTrace) -> impl Fn(f64, f64) -> f64 + '_ {
    let l = trace.edge_length();
    let n = trace.len();
    move |x: f64, y: f64| {
        let s = crate::field::point_to_perimeter(x, y, l, 1e-9 * l)
            .expect("boundary function queried off the perimeter");
        let step = l / trace.n_per_edge() as f64;
        let t = s / step;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        let a = trace.values()[i];
        let b = trace.values()[(i + 1) % n];
        a + frac * (b - a)
    }
}

/// Values of a genome solution at `n_points` equispaced locations on an
/// axis-aligned segment (endpoints included).
pub fn sample_on_segment(
    solution: &GenomeField,
    from: (f64, f64),
    to: (f64, f64),
    n_points: usize,
) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::Contract(format!(
            "segment sampling needs at least 2 points, got {n_points}"
        )));
    }
    let axis_aligned = (from.0 - to.0).abs() < 1e-12 || (from.1 - to.1).abs() < 1e-12;
    if !axis_aligned {
        return Err(Error::Domain(format!(
            "segment {from:?} -> {to:?} is not axis-aligned"
        )));
    }
    (0..n_points)
        .map(|k| {
            let t = k as f64 / (n_points - 1) as f64;
            let x = from.0 + t * (to.0 - from.0);
            let y = from.1 + t * (to.1 - from.1);
            solution.eval(x, y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{compute_mae, compute_mar_fd, trace_from_function, N_PER_EDGE};
    use approx::assert_abs_diff_eq;

    fn unit_mask() -> DomainMask {
        DomainMask::new([(0, 0)]).unwrap()
    }

    fn harmonic(x: f64, y: f64) -> f64 {
        x * x - y * y + x * y
    }

    #[test]
    fn constant_bc_gives_constant_field() {
        let g = solve_dirichlet(&unit_mask(), &|_, _| 2.5, 8, 1.0).unwrap();
        for &v in g.data() {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-11);
        }
    }

    #[test]
    fn stencil_exact_on_harmonic_polynomials() {
        let g = solve_dirichlet(&unit_mask(), &harmonic, N_PER_EDGE, 1.0).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.position(i, j);
                assert!(
                    (g.at(i, j) - harmonic(x, y)).abs() <= 1e-9,
                    "vertex ({i},{j}) off by {}",
                    (g.at(i, j) - harmonic(x, y)).abs()
                );
            }
        }
        let mar = compute_mar_fd(&g).unwrap();
        assert!(mar <= 1e-10 * (N_PER_EDGE * N_PER_EDGE) as f64);
    }

    #[test]
    fn richardson_ratio_for_sine_bc() {
        let bc = |x: f64, y: f64| {
            let s = crate::field::point_to_perimeter(x, y, 1.0, 1e-9).unwrap();
            (2.0 * std::f64::consts::PI * s).sin()
        };
        let coarse = solve_dirichlet(&unit_mask(), &bc, 32, 1.0).unwrap();
        let mid = solve_dirichlet(&unit_mask(), &bc, 64, 1.0).unwrap();
        let fine = solve_dirichlet(&unit_mask(), &bc, 128, 1.0).unwrap();
        // Compare on the coarse vertices.
        let restrict = |g: &FieldGrid, f: usize| {
            let mut out = FieldGrid::zeros(33, 33, (0.0, 0.0), coarse.spacing).unwrap();
            for j in 0..33 {
                for i in 0..33 {
                    out.set(i, j, g.at(i * f, j * f));
                }
            }
            out
        };
        let e1 = compute_mae(&coarse, &restrict(&mid, 2)).unwrap();
        let e2 = compute_mae(&restrict(&mid, 2), &restrict(&fine, 4)).unwrap();
        let ratio = e1 / e2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "Richardson ratio {ratio} not near 4"
        );
    }

    #[test]
    fn solver_is_linear_in_bc() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let (f1, f2) = (
                rng.random_range(0.5..3.0_f64),
                rng.random_range(0.5..3.0_f64),
            );
            let bc1 = move |x: f64, y: f64| (f1 * x).sin() + (f1 * y).cos();
            let bc2 = move |x: f64, y: f64| (f2 * (x + y)).cos();
            let combined = move |x: f64, y: f64| a * bc1(x, y) + b * bc2(x, y);
            let u1 = solve_dirichlet(&unit_mask(), &bc1, 16, 1.0).unwrap();
            let u2 = solve_dirichlet(&unit_mask(), &bc2, 16, 1.0).unwrap();
            let uc = solve_dirichlet(&unit_mask(), &combined, 16, 1.0).unwrap();
            let scale: f64 = uc.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (k, &v) in uc.data().iter().enumerate() {
                let lin = a * u1.data()[k] + b * u2.data()[k];
                assert!(
                    (v - lin).abs() <= 1e-9 * scale.max(1.0),
                    "superposition violated: {v} vs {lin}"
                );
            }
        }
    }

    #[test]
    fn empty_interior_is_a_contract_error() {
        let disc = Discretization::new(&unit_mask(), 3, 1.0).unwrap();
        assert!(assemble_dirichlet(&disc, &|_, _| 0.0).is_ok());
        assert!(Discretization::new(&unit_mask(), 2, 1.0).is_err());
    }

    #[test]
    fn genome_solver_constant_trace() {
        let trace = trace_from_function(|_, _| 4.0, 1.0, N_PER_EDGE).unwrap();
        let sol = genome_solver_numeric(&trace).unwrap();
        assert_abs_diff_eq!(sol.eval(0.37, 0.61).unwrap(), 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.eval(0.0, 0.0).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn genome_solver_harmonic_center_query() {
        let trace = trace_from_function(harmonic, 1.0, N_PER_EDGE).unwrap();
        let sol = genome_solver_numeric(&trace).unwrap();
        assert_abs_diff_eq!(sol.eval(0.5, 0.5).unwrap(), 0.25, epsilon = 1e-9);
        assert!(sol.eval(1.5, 0.5).is_err());
    }

    #[test]
    fn genome_solver_boundary_vertices_match_trace() {
        let trace = trace_from_function(|x, y| (3.0 * x).sin() - y, 1.0, N_PER_EDGE).unwrap();
        let sol = genome_solver_numeric(&trace).unwrap();
        for i in 0..trace.len() {
            let (x, y) = trace.point(i);
            assert_eq!(sol.eval(x, y).unwrap(), trace.values()[i]);
        }
    }

    #[test]
    fn segment_sampling() {
        let trace = trace_from_function(harmonic, 1.0, N_PER_EDGE).unwrap();
        let sol = genome_solver_numeric(&trace).unwrap();
        let vals = sample_on_segment(&sol, (0.5, 0.0), (0.5, 1.0), 3).unwrap();
        assert_abs_diff_eq!(vals[0], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(vals[1], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(vals[2], -0.25, epsilon = 1e-9);

        let edge = sample_on_segment(&sol, (0.0, 0.0), (1.0, 0.0), N_PER_EDGE + 1).unwrap();
        for (k, &v) in edge.iter().enumerate().take(N_PER_EDGE) {
            assert_eq!(v, trace.values()[k]);
        }
        assert!(sample_on_segment(&sol, (0.2, 0.2), (0.8, 0.9), 5).is_err());
        assert!(sample_on_segment(&sol, (0.5, 0.5), (0.5, 1.2), 5).is_err());
    }

    #[test]
    fn l_shaped_mask_solve_keeps_max_principle() {
        let mask = DomainMask::new([(0, 0), (1, 0), (0, 1)]).unwrap();
        let bc = |x: f64, y: f64| (x - y).tanh();
        let g = solve_dirichlet(&mask, &bc, 8, 1.0).unwrap();
        let disc = Discretization::new(&mask, 8, 1.0).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..disc.ny {
            for i in 0..disc.nx {
                if disc.is_boundary(i, j) {
                    let v = g.at(i, j);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        for j in 0..disc.ny {
            for i in 0..disc.nx {
                if disc.is_interior(i, j) {
                    let v = g.at(i, j);
                    assert!(v >= lo - 1e-10 && v <= hi + 1e-10);
                }
            }
        }
    }
}
