//! Zonotopes, constrained zonotopes, and H-rep polytopes.

use nalgebra::DVector;

use crate::num::lp::{LinearProgram, LpError};
use crate::num::sparse::SpMat;
use crate::set::{SetError, SetResult};

/// Zonotope `{ G xi + c | xi in [0,1]^{n_g} }`.
#[derive(Debug, Clone)]
pub struct Zonotope {
    pub generators: SpMat,
    pub center: DVector<f64>,
}

impl Zonotope {
    pub fn new(generators: SpMat, center: DVector<f64>) -> SetResult<Self> {
        if generators.nrows() != center.len() {
            return Err(SetError::DimMismatch {
                context: "zonotope generators vs center".into(),
                expected: center.len(),
                got: generators.nrows(),
            });
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(SetError::NonFinite("zonotope center"));
        }
        Ok(Self { generators, center })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
        Self {
            generators: SpMat::diag(&widths),
            center: DVector::from_column_slice(lo),
        }
    }

    /// Singleton `{x}`.
    pub fn point(x: &[f64]) -> Self {
        Self {
            generators: SpMat::zeros(x.len(), 0),
            center: DVector::from_column_slice(x),
        }
    }

    /// Regular hexagon of circumradius `r` centered at the origin,
    /// vertices at 0, 60, ..., 300 degrees. Inscribed in the disk of
    /// radius `r`, so it under-approximates a 2-norm bound.
    pub fn hexagon(r: f64) -> Self {
        let dirs = [0.0_f64, 60.0, 120.0];
        let mut triplets = Vec::new();
        let mut center = DVector::zeros(2);
        for (k, d) in dirs.iter().enumerate() {
            let a = d.to_radians();
            let gx = r * a.cos();
            let gy = r * a.sin();
            triplets.push((0, k, gx));
            triplets.push((1, k, gy));
            center[0] -= 0.5 * gx;
            center[1] -= 0.5 * gy;
        }
        Self {
            generators: SpMat::from_triplets(2, 3, &triplets),
            center,
        }
    }
}

/// Constrained zonotope `{ G xi + c | xi in [0,1]^{n_g}, A xi = b }`.
#[derive(Debug, Clone)]
pub struct ConstrainedZonotope {
    pub generators: SpMat,
    pub center: DVector<f64>,
    pub con_matrix: SpMat,
    pub con_rhs: DVector<f64>,
}

impl ConstrainedZonotope {
    pub fn new(
        generators: SpMat,
        center: DVector<f64>,
        con_matrix: SpMat,
        con_rhs: DVector<f64>,
    ) -> SetResult<Self> {
        if generators.nrows() != center.len() {
            return Err(SetError::DimMismatch {
                context: "conzono generators vs center".into(),
                expected: center.len(),
                got: generators.nrows(),
            });
        }
        if con_matrix.ncols() != generators.ncols() {
            return Err(SetError::DimMismatch {
                context: "conzono constraint columns vs generators".into(),
                expected: generators.ncols(),
                got: con_matrix.ncols(),
            });
        }
        if con_rhs.len() != con_matrix.nrows() {
            return Err(SetError::DimMismatch {
                context: "conzono constraint rhs".into(),
                expected: con_matrix.nrows(),
                got: con_rhs.len(),
            });
        }
        Ok(Self {
            generators,
            center,
            con_matrix,
            con_rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_gens(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_cons(&self) -> usize {
        self.con_matrix.nrows()
    }
}

impl From<Zonotope> for ConstrainedZonotope {
    fn from(z: Zonotope) -> Self {
        let n_g = z.generators.ncols();
        Self {
            generators: z.generators,
            center: z.center,
            con_matrix: SpMat::zeros(0, n_g),
            con_rhs: DVector::zeros(0),
        }
    }
}

/// H-rep polytope `{ x | L x <= r, A x = b }`. Either block may have
/// zero rows. Boundedness is not enforced structurally.
#[derive(Debug, Clone)]
pub struct HPolytope {
    pub ineq_matrix: SpMat,
    pub ineq_rhs: DVector<f64>,
    pub eq_matrix: SpMat,
    pub eq_rhs: DVector<f64>,
}

impl HPolytope {
    pub fn new(
        ineq_matrix: SpMat,
        ineq_rhs: DVector<f64>,
        eq_matrix: SpMat,
        eq_rhs: DVector<f64>,
    ) -> SetResult<Self> {
        if ineq_matrix.nrows() != ineq_rhs.len() {
            return Err(SetError::DimMismatch {
                context: "H-rep inequality rhs".into(),
                expected: ineq_matrix.nrows(),
                got: ineq_rhs.len(),
            });
        }
        if eq_matrix.nrows() != eq_rhs.len() {
            return Err(SetError::DimMismatch {
                context: "H-rep equality rhs".into(),
                expected: eq_matrix.nrows(),
                got: eq_rhs.len(),
            });
        }
        if ineq_matrix.nrows() > 0 && eq_matrix.nrows() > 0 && ineq_matrix.ncols() != eq_matrix.ncols()
        {
            return Err(SetError::Shape(format!(
                "inequality block has {} columns, equality block {}",
                ineq_matrix.ncols(),
                eq_matrix.ncols()
            )));
        }
        Ok(Self {
            ineq_matrix,
            ineq_rhs,
            eq_matrix,
            eq_rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.ineq_matrix.ncols().max(self.eq_matrix.ncols())
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_matrix.nrows()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_matrix.nrows()
    }

    /// The entire space (zero constraint rows).
    pub fn entire_space(dim: usize) -> Self {
        Self {
            ineq_matrix: SpMat::zeros(0, dim),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: SpMat::zeros(0, dim),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn inequalities(l: SpMat, r: DVector<f64>) -> SetResult<Self> {
        let dim = l.ncols();
        Self::new(l, r, SpMat::zeros(0, dim), DVector::zeros(0))
    }

    pub fn equalities(a: SpMat, b: DVector<f64>) -> SetResult<Self> {
        let dim = a.ncols();
        Self::new(SpMat::zeros(0, dim), DVector::zeros(0), a, b)
    }

    /// `{x = point}`.
    pub fn fixed_point(point: &[f64]) -> Self {
        Self {
            ineq_matrix: SpMat::zeros(0, point.len()),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: SpMat::identity(point.len()),
            eq_rhs: DVector::from_column_slice(point),
        }
    }

    /// Axis-aligned box `[lo, hi]` as `2 n` inequalities.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let n = lo.len();
        let mut triplets = Vec::with_capacity(2 * n);
        let mut rhs = DVector::zeros(2 * n);
        for i in 0..n {
            triplets.push((2 * i, i, 1.0));
            rhs[2 * i] = hi[i];
            triplets.push((2 * i + 1, i, -1.0));
            rhs[2 * i + 1] = -lo[i];
        }
        Self {
            ineq_matrix: SpMat::from_triplets(2 * n, n, &triplets),
            ineq_rhs: rhs,
            eq_matrix: SpMat::zeros(0, n),
            eq_rhs: DVector::zeros(0),
        }
    }

    /// Box over a subset of coordinates of an `ambient`-dimensional
    /// space; the other coordinates are unconstrained.
    pub fn from_box_on_dims(ambient: usize, dims: &[usize], lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(dims.len(), lo.len());
        assert_eq!(dims.len(), hi.len());
        let mut triplets = Vec::new();
        let mut rhs = Vec::new();
        for (k, &d) in dims.iter().enumerate() {
            triplets.push((rhs.len(), d, 1.0));
            rhs.push(hi[k]);
            triplets.push((rhs.len(), d, -1.0));
            rhs.push(-lo[k]);
        }
        Self {
            ineq_matrix: SpMat::from_triplets(rhs.len(), ambient, &triplets),
            ineq_rhs: DVector::from_vec(rhs),
            eq_matrix: SpMat::zeros(0, ambient),
            eq_rhs: DVector::zeros(0),
        }
    }

    /// Regular hexagon (circumradius `r`, centered at `center`) over two
    /// designated coordinates of an `ambient`-dimensional space.
    pub fn hexagon_on_dims(ambient: usize, dims: [usize; 2], center: [f64; 2], r: f64) -> Self {
        // Edge normals of a hexagon with vertices at 0, 60, ... degrees
        // point at 30, 90, ... degrees; apothem is r * sqrt(3)/2.
        let apothem = r * 3.0_f64.sqrt() / 2.0;
        let mut triplets = Vec::new();
        let mut rhs = Vec::new();
        for k in 0..6 {
            let a = (30.0 + 60.0 * k as f64).to_radians();
            let (nx, ny) = (a.cos(), a.sin());
            triplets.push((k, dims[0], nx));
            triplets.push((k, dims[1], ny));
            rhs.push(apothem + nx * center[0] + ny * center[1]);
        }
        Self {
            ineq_matrix: SpMat::from_triplets(6, ambient, &triplets),
            ineq_rhs: DVector::from_vec(rhs),
            eq_matrix: SpMat::zeros(0, ambient),
            eq_rhs: DVector::zeros(0),
        }
    }

    /// Maximum constraint violation at `x`; `<= 0` means contained,
    /// negative values measure interior depth (up to row scaling).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = f64::NEG_INFINITY;
        if self.num_ineq() > 0 {
            let lx = self.ineq_matrix.matvec(x);
            for i in 0..lx.len() {
                v = v.max(lx[i] - self.ineq_rhs[i]);
            }
        }
        if self.num_eq() > 0 {
            let ax = self.eq_matrix.matvec(x);
            for i in 0..ax.len() {
                v = v.max((ax[i] - self.eq_rhs[i]).abs());
            }
        }
        v
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Tight coordinate bounds via 2n LPs. `Err(Infeasible)` means the
    /// polytope is empty, `Err(Unbounded)` that some direction is
    /// unbounded.
    pub fn interval_hull_lp(&self) -> Result<(DVector<f64>, DVector<f64>), LpError> {
        let dim = self.dim();
        let lp = LinearProgram {
            num_vars: dim,
            ineq: if self.num_ineq() > 0 {
                Some((&self.ineq_matrix, &self.ineq_rhs))
            } else {
                None
            },
            eq: if self.num_eq() > 0 {
                Some((&self.eq_matrix, &self.eq_rhs))
            } else {
                None
            },
            bounds: None,
        };
        let mut lo = DVector::zeros(dim);
        let mut hi = DVector::zeros(dim);
        for i in 0..dim {
            let mut c = vec![0.0; dim];
            c[i] = 1.0;
            lo[i] = lp.minimize(&c)?.0;
            hi[i] = lp.maximize(&c)?.0;
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(LpError::Unbounded);
            }
        }
        Ok((lo, hi))
    }

    /// Exact conversion to a constrained zonotope. Requires the
    /// polytope to be nonempty and bounded.
    ///
    /// The base box comes from the interval hull; each inequality row
    /// coupling two or more coordinates gains one slack factor scaled
    /// so the slack stays in `[0,1]` over the box. Single-coordinate
    /// rows are already implied by the tight hull and add nothing, so
    /// axis-aligned boxes convert without slack factors.
    pub fn to_constrained_zonotope(&self) -> SetResult<ConstrainedZonotope> {
        let (lo, hi) = self.interval_hull_lp()?;
        let dim = self.dim();
        let n_e = self.num_eq();
        let widths: Vec<f64> = (0..dim).map(|i| hi[i] - lo[i]).collect();
        let gbox = SpMat::diag(&widths);

        let coupled: Vec<usize> = (0..self.num_ineq())
            .filter(|&i| self.ineq_matrix.row(i).count() > 1)
            .collect();
        let n_s = coupled.len();
        let generators = SpMat::hstack(&[&gbox, &SpMat::zeros(dim, n_s)]);

        let mut rows: Vec<SpMat> = Vec::new();
        let mut rhs = Vec::new();
        if n_s > 0 {
            // L diag(w) xi + diag(s) sigma = r - L lo over the coupled
            // rows only.
            let mut tri = Vec::new();
            for (k, &i) in coupled.iter().enumerate() {
                for (j, v) in self.ineq_matrix.row(i) {
                    tri.push((k, j, v));
                }
            }
            let l_sub = SpMat::from_triplets(n_s, dim, &tri);
            let t = l_sub.matmul(&gbox);
            let (neg, _) = t.row_ranges_unit_box();
            let base_all = &self.ineq_rhs - self.ineq_matrix.matvec(&lo);
            let mut s = vec![0.0; n_s];
            for (k, &i) in coupled.iter().enumerate() {
                s[k] = base_all[i] - neg[k];
                rhs.push(base_all[i]);
            }
            rows.push(SpMat::hstack(&[&t, &SpMat::diag(&s)]));
        }
        if n_e > 0 {
            let t = self.eq_matrix.matmul(&gbox);
            let base = &self.eq_rhs - self.eq_matrix.matvec(&lo);
            for i in 0..n_e {
                rhs.push(base[i]);
            }
            rows.push(SpMat::hstack(&[&t, &SpMat::zeros(n_e, n_s)]));
        }
        let con_matrix = if rows.is_empty() {
            SpMat::zeros(0, dim + n_s)
        } else {
            SpMat::vstack(&rows.iter().collect::<Vec<_>>())
        };
        ConstrainedZonotope::new(generators, lo, con_matrix, DVector::from_vec(rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_polytope_contains() {
        let h = HPolytope::from_box(&[0.0, 0.0], &[1.0, 2.0]);
        assert!(h.contains(&DVector::from_vec(vec![0.5, 1.5]), 0.0));
        assert!(!h.contains(&DVector::from_vec(vec![1.1, 0.5]), 1e-9));
        let (lo, hi) = h.interval_hull_lp().unwrap();
        assert!((lo[0] - 0.0).abs() < 1e-9 && (hi[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_and_unbounded_detected() {
        let l = SpMat::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, -1.0)]);
        let r = DVector::from_vec(vec![-1.0, -1.0]);
        let h = HPolytope::inequalities(l, r).unwrap();
        assert!(matches!(h.interval_hull_lp(), Err(LpError::Infeasible)));

        let l = SpMat::from_triplets(1, 1, &[(0, 0, 1.0)]);
        let h = HPolytope::inequalities(l, DVector::from_vec(vec![1.0])).unwrap();
        assert!(matches!(h.interval_hull_lp(), Err(LpError::Unbounded)));
    }

    #[test]
    fn conzono_conversion_preserves_membership() {
        // Triangle x >= 0, y >= 0, x + y <= 1.
        let l = SpMat::from_triplets(3, 2, &[(0, 0, -1.0), (1, 1, -1.0), (2, 0, 1.0), (2, 1, 1.0)]);
        let r = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let h = HPolytope::inequalities(l, r).unwrap();
        let cz = h.to_constrained_zonotope().unwrap();
        assert_eq!(cz.dim(), 2);
        // Two box factors plus one slack for the coupled row; the
        // single-coordinate rows are absorbed by the tight hull.
        assert_eq!(cz.num_gens(), 2 + 1);
        assert_eq!(cz.num_cons(), 1);
        // Every feasible factor decodes into the triangle.
        // Factor feasibility is checked by substituting xi and solving
        // the slack row for sigma.
        let gd = cz.generators.to_dense();
        let ad = cz.con_matrix.to_dense();
        for &(x0, x1) in &[(0.2, 0.3), (0.0, 0.0), (1.0, 0.0), (0.5, 0.5)] {
            // xi for the box part is the point itself (box is [0,1]^2).
            let mut factor = nalgebra::DVector::zeros(3);
            factor[0] = x0;
            factor[1] = x1;
            let mut acc = 0.0;
            for j in 0..2 {
                acc += ad[(0, j)] * factor[j];
            }
            let sigma = (cz.con_rhs[0] - acc) / ad[(0, 2)];
            assert!((-1e-12..=1.0 + 1e-12).contains(&sigma), "sigma {sigma}");
            factor[2] = sigma;
            let decoded = &gd * &factor + &cz.center;
            assert!((decoded[0] - x0).abs() < 1e-12);
            assert!((decoded[1] - x1).abs() < 1e-12);
        }
    }

    #[test]
    fn hexagon_zonotope_and_hrep_agree() {
        let z = Zonotope::hexagon(2.0);
        let h = HPolytope::hexagon_on_dims(2, [0, 1], [0.0, 0.0], 2.0);
        // Vertices of the zonotope (all 0/1 factor corners) lie on the
        // H-rep boundary.
        let gd = z.generators.to_dense();
        for bits in 0..8u32 {
            let f = DVector::from_iterator(3, (0..3).map(|i| ((bits >> i) & 1) as f64));
            let p = &gd * &f + &z.center;
            assert!(h.contains(&p, 1e-9), "corner {p:?} outside H-rep");
        }
        // The hexagon is inscribed: the circumradius point on an axis
        // direction at angle 30 degrees (edge midpoint) is on the edge.
        let apothem = 2.0 * 3.0_f64.sqrt() / 2.0;
        let edge_mid = DVector::from_vec(vec![
            apothem * 30.0_f64.to_radians().cos(),
            apothem * 30.0_f64.to_radians().sin(),
        ]);
        assert!(h.violation(&edge_mid).abs() < 1e-9);
    }
}
