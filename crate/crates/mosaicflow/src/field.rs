//! Shared geometric and field types: boundary traces on a genome perimeter,
//! uniform vertex grids, rectilinear domain masks, and the MAE/MAR metrics.
//!
//! Perimeter convention: arclength s in [0, 4l) runs counterclockwise from the
//! genome's lower-left corner — bottom edge left-to-right, right edge
//! bottom-to-top, top edge right-to-left, left edge top-to-bottom. Each corner
//! is owned by the edge that starts at it, so a trace of N_bc = 4 * n_per_edge
//! values visits every corner exactly once.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Default number of trace points per genome edge.
pub const N_PER_EDGE: usize = 32;
/// Default trace length (boundary points around the perimeter).
pub const N_BC: usize = 4 * N_PER_EDGE;

/// Ordered discretized boundary function on a genome perimeter.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    values: Vec<f64>,
    edge_length: f64,
    n_per_edge: usize,
}

impl BoundaryTrace {
    pub fn new(values: Vec<f64>, edge_length: f64, n_per_edge: usize) -> Result<Self> {
        if n_per_edge == 0 || edge_length <= 0.0 || !edge_length.is_finite() {
            return Err(Error::Contract(format!(
                "boundary trace requires positive edge length and n_per_edge, got l={edge_length}, n={n_per_edge}"
            )));
        }
        if values.len() != 4 * n_per_edge {
            return Err(Error::Contract(format!(
                "boundary trace needs {} values, got {}",
                4 * n_per_edge,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite boundary value at index {i}"
            )));
        }
        Ok(Self {
            values,
            edge_length,
            n_per_edge,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    pub fn n_per_edge(&self) -> usize {
        self.n_per_edge
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Arclength of trace point `i`.
    pub fn arclength(&self, i: usize) -> f64 {
        i as f64 * self.edge_length / self.n_per_edge as f64
    }

    /// Position of trace point `i` on the perimeter.
    pub fn point(&self, i: usize) -> (f64, f64) {
        perimeter_to_point(self.arclength(i), self.edge_length).expect("trace index in range")
    }

    /// All trace point positions in index order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Maps arclength s in [0, 4l) to the counterclockwise perimeter position.
pub fn perimeter_to_point(s: f64, l: f64) -> Result<(f64, f64)> {
    if !(0.0..4.0 * l).contains(&s) {
        return Err(Error::Domain(format!(
            "arclength {s} outside [0, {}) for edge length {l}",
            4.0 * l
        )));
    }
    Ok(if s < l {
        (s, 0.0)
    } else if s < 2.0 * l {
        (l, s - l)
    } else if s < 3.0 * l {
        (3.0 * l - s, l)
    } else {
        (0.0, 4.0 * l - s)
    })
}

/// Inverse of [`perimeter_to_point`] for points on the perimeter. Corners map
/// to the owning edge's start.
pub fn point_to_perimeter(x: f64, y: f64, l: f64, tol: f64) -> Result<f64> {
    let s = if y.abs() <= tol && x < l - tol {
        x.max(0.0)
    } else if (x - l).abs() <= tol && y < l - tol {
        l + y.max(0.0)
    } else if (y - l).abs() <= tol && x > tol {
        3.0 * l - x.min(l)
    } else if x.abs() <= tol && y > tol {
        4.0 * l - y.min(l)
    } else {
        return Err(Error::Domain(format!(
            "point ({x}, {y}) not on the perimeter of [0, {l}]^2"
        )));
    };
    Ok(s.clamp(0.0, 4.0 * l * (1.0 - f64::EPSILON)))
}

/// Samples a boundary function at the trace arclengths.
pub fn trace_from_function<F>(g: F, l: f64, n_per_edge: usize) -> Result<BoundaryTrace>
where
    F: Fn(f64, f64) -> f64,
{
    let n = 4 * n_per_edge;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let s = i as f64 * l / n_per_edge as f64;
        let (x, y) = perimeter_to_point(s, l)?;
        let v = g(x, y);
        if !v.is_finite() {
            return Err(Error::Data(format!(
                "boundary function returned non-finite value at index {i} (x={x}, y={y})"
            )));
        }
        values.push(v);
    }
    BoundaryTrace::new(values, l, n_per_edge)
}

/// Scalar field on a uniform vertex grid. Data is row-major with x varying
/// fastest: `data[j * nx + i]` is the value at vertex (i, j).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub origin: (f64, f64),
    pub spacing: (f64, f64),
    data: Vec<f64>,
}

impl FieldGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        origin: (f64, f64),
        spacing: (f64, f64),
        data: Vec<f64>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || spacing.0 <= 0.0 || spacing.1 <= 0.0 {
            return Err(Error::Contract(format!(
                "field grid requires positive vertex counts and spacing, got {nx}x{ny}, spacing {spacing:?}"
            )));
        }
        if data.len() != nx * ny {
            return Err(Error::Contract(format!(
                "field grid {nx}x{ny} needs {} values, got {}",
                nx * ny,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite field value at index {i}")));
        }
        Ok(Self {
            nx,
            ny,
            origin,
            spacing,
            data,
        })
    }

    pub fn zeros(nx: usize, ny: usize, origin: (f64, f64), spacing: (f64, f64)) -> Result<Self> {
        Self::new(nx, ny, origin, spacing, vec![0.0; nx * ny])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.nx && j < self.ny);
        self.data[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nx && j < self.ny);
        self.data[j * self.nx + i] = v;
    }

    /// Position of vertex (i, j).
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.spacing.0,
            self.origin.1 + j as f64 * self.spacing.1,
        )
    }

    fn same_layout(&self, other: &FieldGrid) -> bool {
        const TOL: f64 = 1e-12;
        self.nx == other.nx
            && self.ny == other.ny
            && (self.origin.0 - other.origin.0).abs() <= TOL
            && (self.origin.1 - other.origin.1).abs() <= TOL
            && (self.spacing.0 - other.spacing.0).abs() <= TOL
            && (self.spacing.1 - other.spacing.1).abs() <= TOL
    }

    /// Serializes to the grid CSV format: header `nx,ny,x0,y0,dx,dy`, then one
    /// line per row j with nx values at full double precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            self.nx,
            self.ny,
            fmt_f64(self.origin.0),
            fmt_f64(self.origin.1),
            fmt_f64(self.spacing.0),
            fmt_f64(self.spacing.1)
        );
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx).map(|i| fmt_f64(self.at(i, j))).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty grid CSV".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!(
                "grid CSV header needs 6 fields, got {}",
                fields.len()
            )));
        }
        let nx: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad nx `{}`", fields[0])))?;
        let ny: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad ny `{}`", fields[1])))?;
        let mut nums = [0.0f64; 4];
        for (k, f) in fields[2..].iter().enumerate() {
            nums[k] = f
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad header float `{f}`")))?;
        }
        let mut data = Vec::with_capacity(nx * ny);
        for (j, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if j >= ny {
                return Err(Error::Format(format!("grid CSV has more than {ny} rows")));
            }
            for f in line.split(',') {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad value `{f}` in row {j}")))?;
                data.push(v);
            }
        }
        if data.len() != nx * ny {
            return Err(Error::Format(format!(
                "grid CSV body has {} values, expected {}",
                data.len(),
                nx * ny
            )));
        }
        Self::new(nx, ny, (nums[0], nums[1]), (nums[2], nums[3]), data)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Set of unit genome cells occupied by a rectilinear domain, in
/// genome-edge-length units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainMask {
    cells: BTreeSet<(i64, i64)>,
}

impl DomainMask {
    pub fn new(cells: impl IntoIterator<Item = (i64, i64)>) -> Result<Self> {
        let cells: BTreeSet<(i64, i64)> = cells.into_iter().collect();
        if cells.is_empty() {
            return Err(Error::Contract("domain mask must be non-empty".into()));
        }
        let mask = Self { cells };
        if !mask.is_edge_connected() {
            return Err(Error::Contract(
                "domain mask cells must be edge-connected".into(),
            ));
        }
        Ok(mask)
    }

    /// Axis-aligned w x h rectangle of cells with lower-left cell at (0, 0).
    pub fn rectangle(w: i64, h: i64) -> Result<Self> {
        if w <= 0 || h <= 0 {
            return Err(Error::Contract(format!(
                "rectangle mask needs positive extents, got {w}x{h}"
            )));
        }
        Self::new((0..w).flat_map(|x| (0..h).map(move |y| (x, y))))
    }

    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: (i64, i64)) -> bool {
        self.cells.contains(&cell)
    }

    /// Inclusive cell-coordinate bounds (min_x, min_y, max_x, max_y).
    pub fn bounds(&self) -> (i64, i64, i64, i64) {
        let mut b = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &(x, y) in &self.cells {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }

    fn is_edge_connected(&self) -> bool {
        let start = *self.cells.iter().next().expect("non-empty");
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some((x, y)) = stack.pop() {
            for next in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                if self.cells.contains(&next) && seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        seen.len() == self.cells.len()
    }

    /// True when the union of cells has a single boundary loop (no holes).
    /// Arclength-parameterized boundary conditions are only defined there.
    pub fn is_simply_connected(&self) -> bool {
        // Flood-fill the complement inside a 1-cell margin of the bounding
        // box; a hole is a complement component not touching the margin.
        let (x0, y0, x1, y1) = self.bounds();
        let (w, h) = ((x1 - x0 + 3) as usize, (y1 - y0 + 3) as usize);
        let idx = |x: i64, y: i64| ((y - y0 + 1) as usize) * w + ((x - x0 + 1) as usize);
        let mut outside = vec![false; w * h];
        let mut stack = vec![(x0 - 1, y0 - 1)];
        outside[idx(x0 - 1, y0 - 1)] = true;
        while let Some((x, y)) = stack.pop() {
            for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                if nx < x0 - 1 || nx > x1 + 1 || ny < y0 - 1 || ny > y1 + 1 {
                    continue;
                }
                if self.cells.contains(&(nx, ny)) || outside[idx(nx, ny)] {
                    continue;
                }
                outside[idx(nx, ny)] = true;
                stack.push((nx, ny));
            }
        }
        for x in x0..=x1 {
            for y in y0..=y1 {
                if !self.cells.contains(&(x, y)) && !outside[idx(x, y)] {
                    return false;
                }
            }
        }
        true
    }

    /// Total area in genome-edge-length units squared, given edge length l.
    pub fn area(&self, l: f64) -> f64 {
        self.len() as f64 * l * l
    }
}

/// Accuracy summary of a predicted field.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mar: f64,
    pub n_points: usize,
}

/// Mean absolute pointwise difference between two fields on the same grid.
pub fn compute_mae(pred: &FieldGrid, truth: &FieldGrid) -> Result<f64> {
    if !pred.same_layout(truth) {
        return Err(Error::Contract(format!(
            "MAE requires identical grids, got {}x{} at {:?}/{:?} vs {}x{} at {:?}/{:?}",
            pred.nx, pred.ny, pred.origin, pred.spacing, truth.nx, truth.ny, truth.origin,
            truth.spacing
        )));
    }
    let n = pred.data.len() as f64;
    Ok(pred
        .data
        .iter()
        .zip(&truth.data)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n)
}

/// Mean absolute 5-point discrete Laplacian over interior vertices.
pub fn compute_mar_fd(field: &FieldGrid) -> Result<f64> {
    if field.nx < 3 || field.ny < 3 {
        return Err(Error::Contract(format!(
            "FD residual needs at least a 3x3 grid, got {}x{}",
            field.nx, field.ny
        )));
    }
    let (dx2, dy2) = (
        field.spacing.0 * field.spacing.0,
        field.spacing.1 * field.spacing.1,
    );
    let mut sum = 0.0;
    for j in 1..field.ny - 1 {
        for i in 1..field.nx - 1 {
            let c = field.at(i, j);
            let rx = (field.at(i - 1, j) - 2.0 * c + field.at(i + 1, j)) / dx2;
            let ry = (field.at(i, j - 1) - 2.0 * c + field.at(i, j + 1)) / dy2;
            sum += (rx + ry).abs();
        }
    }
    Ok(sum / ((field.nx - 2) * (field.ny - 2)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perimeter_map_known_points() {
        assert_eq!(perimeter_to_point(0.0, 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(perimeter_to_point(1.5, 1.0).unwrap(), (1.0, 0.5));
        // top edge runs right-to-left
        assert_eq!(perimeter_to_point(2.25, 1.0).unwrap(), (0.75, 1.0));
        assert!(perimeter_to_point(4.0, 1.0).is_err());
        assert!(perimeter_to_point(-0.1, 1.0).is_err());
    }

    #[test]
    fn corners_owned_by_starting_edge() {
        let l = 1.0;
        assert_eq!(perimeter_to_point(0.0, l).unwrap(), (0.0, 0.0));
        assert_eq!(perimeter_to_point(1.0, l).unwrap(), (1.0, 0.0));
        assert_eq!(perimeter_to_point(2.0, l).unwrap(), (1.0, 1.0));
        assert_eq!(perimeter_to_point(3.0, l).unwrap(), (0.0, 1.0));
    }

    proptest! {
        #[test]
        fn perimeter_roundtrip(s in 0.0f64..3.9999, l in 0.5f64..4.0) {
            let s = s.min(3.9999) * l;
            let (x, y) = perimeter_to_point(s, l).unwrap();
            let back = point_to_perimeter(x, y, l, 1e-12).unwrap();
            prop_assert!((back - s).abs() <= 1e-12 * (1.0 + s.abs()));
        }

        #[test]
        fn mae_symmetric_and_triangle(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let grid = |rng: &mut rand_chacha::ChaCha8Rng| {
                let data: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
                FieldGrid::new(3, 3, (0.0, 0.0), (1.0, 1.0), data).unwrap()
            };
            let (a, b, c) = (grid(&mut rng), grid(&mut rng), grid(&mut rng));
            let ab = compute_mae(&a, &b).unwrap();
            let ba = compute_mae(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            let ac = compute_mae(&a, &c).unwrap();
            let cb = compute_mae(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-15);
        }
    }

    #[test]
    fn trace_from_constant_function() {
        let t = trace_from_function(|_, _| 3.0, 1.0, N_PER_EDGE).unwrap();
        assert_eq!(t.len(), N_BC);
        assert!(t.values().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn trace_from_harmonic_polynomial() {
        let t = trace_from_function(|x, y| x * x - y * y + x * y, 1.0, N_PER_EDGE).unwrap();
        assert_eq!(t.values()[0], 0.0);
        assert_eq!(t.values()[32], 1.0); // g(1, 0)
    }

    #[test]
    fn trace_of_arclength_sine() {
        let l = 1.0;
        let t = trace_from_function(
            |x, y| {
                let s = point_to_perimeter(x, y, l, 1e-12).unwrap();
                (2.0 * std::f64::consts::PI * s).sin()
            },
            l,
            N_PER_EDGE,
        )
        .unwrap();
        for (i, &v) in t.values().iter().enumerate() {
            let expect = (2.0 * std::f64::consts::PI * (i as f64 * 4.0 / 128.0)).sin();
            assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_rejects_non_finite() {
        let err = trace_from_function(|x, _| 1.0 / (x - 0.5), 1.0, 2).unwrap_err();
        match err {
            Error::Data(msg) => assert!(msg.contains("index")),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn mae_identity_and_offset() {
        let a = FieldGrid::new(3, 3, (0.0, 0.0), (1.0, 1.0), vec![1.0; 9]).unwrap();
        assert_eq!(compute_mae(&a, &a).unwrap(), 0.0);
        let b = FieldGrid::new(3, 3, (0.0, 0.0), (1.0, 1.0), vec![1.5; 9]).unwrap();
        assert_abs_diff_eq!(compute_mae(&a, &b).unwrap(), 0.5, epsilon = 1e-15);
        let c = FieldGrid::new(3, 4, (0.0, 0.0), (1.0, 1.0), vec![0.0; 12]).unwrap();
        assert!(compute_mae(&a, &c).is_err());
    }

    #[test]
    fn mae_hand_computed_3x3() {
        let p = FieldGrid::new(
            3,
            3,
            (0.0, 0.0),
            (1.0, 1.0),
            vec![0.1, -0.4, 0.9, 0.0, 0.25, -1.0, 2.0, 0.5, -0.5],
        )
        .unwrap();
        let t = FieldGrid::new(
            3,
            3,
            (0.0, 0.0),
            (1.0, 1.0),
            vec![0.0, 0.6, 0.9, -0.5, 0.25, 1.0, 1.0, -0.5, -0.25],
        )
        .unwrap();
        // |0.1| + |-1.0| + 0 + 0.5 + 0 + |-2.0| + 1.0 + 1.0 + |-0.25| = 5.85
        assert_abs_diff_eq!(compute_mae(&p, &t).unwrap(), 5.85 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn mar_zero_for_discretely_harmonic_fields() {
        // a + bx + cy + d*xy + e*(x^2 - y^2) is annihilated by the stencil.
        let (a, b, c, d, e) = (0.7, -1.2, 0.3, 2.0, -0.8);
        let n = 9;
        let h = 0.125;
        let mut g = FieldGrid::zeros(n, n, (0.0, 0.0), (h, h)).unwrap();
        for j in 0..n {
            for i in 0..n {
                let (x, y) = g.position(i, j);
                g.set(i, j, a + b * x + c * y + d * x * y + e * (x * x - y * y));
            }
        }
        assert!(compute_mar_fd(&g).unwrap() <= 1e-12);
    }

    #[test]
    fn mar_exact_on_quadratic() {
        let mut g = FieldGrid::zeros(5, 5, (0.0, 0.0), (0.25, 0.25)).unwrap();
        for j in 0..5 {
            for i in 0..5 {
                let (x, _) = g.position(i, j);
                g.set(i, j, x * x);
            }
        }
        assert_abs_diff_eq!(compute_mar_fd(&g).unwrap(), 2.0, epsilon = 1e-12);
        assert!(compute_mar_fd(&FieldGrid::zeros(2, 5, (0.0, 0.0), (1.0, 1.0)).unwrap()).is_err());
    }

    #[test]
    fn grid_csv_roundtrip_is_exact() {
        let data: Vec<f64> = (0..12).map(|k| (k as f64).sin() * 1e3).collect();
        let g = FieldGrid::new(4, 3, (-1.5, 2.25), (0.125, 0.5), data).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("4,3,"));
        let back = FieldGrid::from_csv(&csv).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn mask_connectivity_and_holes() {
        assert!(DomainMask::new([(0, 0), (2, 0)]).is_err());
        let l_shape = DomainMask::new([(0, 0), (1, 0), (0, 1)]).unwrap();
        assert!(l_shape.is_simply_connected());
        let ring = DomainMask::new([
            (0, 0),
            (1, 0),
            (2, 0),
            (0, 1),
            (2, 1),
            (0, 2),
            (1, 2),
            (2, 2),
        ])
        .unwrap();
        assert!(!ring.is_simply_connected());
        assert_eq!(ring.bounds(), (0, 0, 2, 2));
    }
}
