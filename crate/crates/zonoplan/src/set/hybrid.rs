//! Hybrid zonotopes: unions of polytopes in generator form with
//! continuous factors in `[0,1]` and binary factors in `{0,1}`.

use nalgebra::DVector;

use crate::num::sparse::SpMat;
use crate::set::base::{ConstrainedZonotope, HPolytope, Zonotope};
use crate::set::{SetError, SetResult};

/// Representation complexity triple `(n_g, n_b, n_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Complexity {
    pub n_g: usize,
    pub n_b: usize,
    pub n_c: usize,
}

impl std::ops::Add for Complexity {
    type Output = Complexity;
    fn add(self, rhs: Complexity) -> Complexity {
        Complexity {
            n_g: self.n_g + rhs.n_g,
            n_b: self.n_b + rhs.n_b,
            n_c: self.n_c + rhs.n_c,
        }
    }
}

impl std::fmt::Display for Complexity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(n_g={}, n_b={}, n_c={})", self.n_g, self.n_b, self.n_c)
    }
}

/// A factor assignment: continuous factors in `[0,1]`, binary factors
/// in `{0,1}`. Decodes to a concrete point through the owning set's
/// generators and center.
#[derive(Debug, Clone)]
pub struct FactorPoint {
    pub cont: DVector<f64>,
    pub bin: DVector<f64>,
}

impl FactorPoint {
    pub fn new(cont: DVector<f64>, bin: DVector<f64>) -> Self {
        Self { cont, bin }
    }

    /// Largest deviation of the binary block from exact 0/1 values.
    pub fn bin_fractionality(&self) -> f64 {
        self.bin
            .iter()
            .map(|&v| (v - v.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Largest excursion of the continuous block outside `[0,1]`.
    pub fn box_violation(&self) -> f64 {
        self.cont
            .iter()
            .chain(self.bin.iter())
            .map(|&v| (v - v.clamp(0.0, 1.0)).abs())
            .fold(0.0, f64::max)
    }
}

/// Hybrid zonotope
/// `{ Gc xi + Gb delta + c | xi in [0,1]^{n_g}, delta in {0,1}^{n_b},
///    Ac xi + Ab delta = b }`.
#[derive(Debug, Clone)]
pub struct HybridZonotope {
    cont_generators: SpMat,
    bin_generators: SpMat,
    center: DVector<f64>,
    con_cont: SpMat,
    con_bin: SpMat,
    con_rhs: DVector<f64>,
}

impl HybridZonotope {
    pub fn new(
        cont_generators: SpMat,
        bin_generators: SpMat,
        center: DVector<f64>,
        con_cont: SpMat,
        con_bin: SpMat,
        con_rhs: DVector<f64>,
    ) -> SetResult<Self> {
        let n = center.len();
        if cont_generators.nrows() != n || bin_generators.nrows() != n {
            return Err(SetError::Shape(format!(
                "generator rows {} / {} vs dimension {}",
                cont_generators.nrows(),
                bin_generators.nrows(),
                n
            )));
        }
        let n_c = con_rhs.len();
        if con_cont.nrows() != n_c || con_bin.nrows() != n_c {
            return Err(SetError::Shape(format!(
                "constraint rows {} / {} vs rhs {}",
                con_cont.nrows(),
                con_bin.nrows(),
                n_c
            )));
        }
        if con_cont.ncols() != cont_generators.ncols() || con_bin.ncols() != bin_generators.ncols()
        {
            return Err(SetError::Shape(format!(
                "constraint cols ({}, {}) vs generator cols ({}, {})",
                con_cont.ncols(),
                con_bin.ncols(),
                cont_generators.ncols(),
                bin_generators.ncols()
            )));
        }
        if center.iter().any(|v| !v.is_finite()) || con_rhs.iter().any(|v| !v.is_finite()) {
            return Err(SetError::NonFinite("hybrid zonotope vectors"));
        }
        Ok(Self {
            cont_generators,
            bin_generators,
            center,
            con_cont,
            con_bin,
            con_rhs,
        })
    }

    pub fn cont_generators(&self) -> &SpMat {
        &self.cont_generators
    }

    pub fn bin_generators(&self) -> &SpMat {
        &self.bin_generators
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn con_cont(&self) -> &SpMat {
        &self.con_cont
    }

    pub fn con_bin(&self) -> &SpMat {
        &self.con_bin
    }

    pub fn con_rhs(&self) -> &DVector<f64> {
        &self.con_rhs
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_cont_gens(&self) -> usize {
        self.cont_generators.ncols()
    }

    pub fn num_bin_gens(&self) -> usize {
        self.bin_generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.con_rhs.len()
    }

    pub fn complexity(&self) -> Complexity {
        Complexity {
            n_g: self.num_cont_gens(),
            n_b: self.num_bin_gens(),
            n_c: self.num_constraints(),
        }
    }

    /// Singleton `{x}`.
    pub fn point(x: &[f64]) -> Self {
        Zonotope::point(x).into()
    }

    /// Axis-aligned box.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        Zonotope::from_box(lo, hi).into()
    }

    /// The discrete cube `{0,1}^{n_b}`.
    pub fn unit_binaries(n_b: usize) -> Self {
        Self {
            cont_generators: SpMat::zeros(n_b, 0),
            bin_generators: SpMat::identity(n_b),
            center: DVector::zeros(n_b),
            con_cont: SpMat::zeros(0, 0),
            con_bin: SpMat::zeros(0, n_b),
            con_rhs: DVector::zeros(0),
        }
    }

    /// Decode a factor assignment to a point.
    pub fn decode(&self, fp: &FactorPoint) -> DVector<f64> {
        let mut x = self.center.clone();
        x += self.cont_generators.matvec(&fp.cont);
        x += self.bin_generators.matvec(&fp.bin);
        x
    }

    /// Infinity norm of `Ac xi + Ab delta - b`.
    pub fn constraint_residual(&self, fp: &FactorPoint) -> f64 {
        if self.num_constraints() == 0 {
            return 0.0;
        }
        let mut r = self.con_cont.matvec(&fp.cont);
        r += self.con_bin.matvec(&fp.bin);
        r -= &self.con_rhs;
        r.amax()
    }

    /// Affine map `R Z + t` (Eq. of the linear-map identity).
    /// Constraints and factor counts are unchanged.
    pub fn affine_map(&self, r: &SpMat, t: &DVector<f64>) -> SetResult<Self> {
        if r.ncols() != self.dim() {
            return Err(SetError::DimMismatch {
                context: "affine map columns vs set dimension".into(),
                expected: self.dim(),
                got: r.ncols(),
            });
        }
        if t.len() != r.nrows() {
            return Err(SetError::DimMismatch {
                context: "affine map translation".into(),
                expected: r.nrows(),
                got: t.len(),
            });
        }
        Ok(Self {
            cont_generators: r.matmul(&self.cont_generators),
            bin_generators: r.matmul(&self.bin_generators),
            center: r.matvec(&self.center) + t,
            con_cont: self.con_cont.clone(),
            con_bin: self.con_bin.clone(),
            con_rhs: self.con_rhs.clone(),
        })
    }

    /// Projection onto a coordinate subset (special affine map).
    pub fn project(&self, coords: &[usize]) -> SetResult<Self> {
        let r = SpMat::selection(coords, self.dim());
        self.affine_map(&r, &DVector::zeros(coords.len()))
    }

    /// Cartesian product `X x Z`; complexities add componentwise.
    pub fn cartesian_product(&self, other: &Self) -> Self {
        let n1 = self.dim();
        let n2 = other.dim();
        let center = DVector::from_iterator(
            n1 + n2,
            self.center.iter().chain(other.center.iter()).copied(),
        );
        let con_rhs = DVector::from_iterator(
            self.num_constraints() + other.num_constraints(),
            self.con_rhs.iter().chain(other.con_rhs.iter()).copied(),
        );
        Self {
            cont_generators: SpMat::block_diag(&[&self.cont_generators, &other.cont_generators]),
            bin_generators: SpMat::block_diag(&[&self.bin_generators, &other.bin_generators]),
            center,
            con_cont: SpMat::block_diag(&[&self.con_cont, &other.con_cont]),
            con_bin: SpMat::block_diag(&[&self.con_bin, &other.con_bin]),
            con_rhs,
        }
    }

    /// Minkowski sum `X + Y`.
    pub fn minkowski_sum(&self, other: &Self) -> SetResult<Self> {
        if self.dim() != other.dim() {
            return Err(SetError::DimMismatch {
                context: "Minkowski sum".into(),
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let con_rhs = DVector::from_iterator(
            self.num_constraints() + other.num_constraints(),
            self.con_rhs.iter().chain(other.con_rhs.iter()).copied(),
        );
        Ok(Self {
            cont_generators: SpMat::hstack(&[&self.cont_generators, &other.cont_generators]),
            bin_generators: SpMat::hstack(&[&self.bin_generators, &other.bin_generators]),
            center: &self.center + &other.center,
            con_cont: SpMat::block_diag(&[&self.con_cont, &other.con_cont]),
            con_bin: SpMat::block_diag(&[&self.con_bin, &other.con_bin]),
            con_rhs,
        })
    }

    /// Generalized intersection with an H-rep polytope:
    /// `{ x in Z | R x in H }`.
    ///
    /// Adds one continuous (slack) generator per inequality row and one
    /// constraint per row of `H`; no binary generators. The slack
    /// scaling keeps each slack factor in `[0,1]` over the factor box.
    pub fn generalized_intersection_hz(&self, r: &SpMat, h: &HPolytope) -> SetResult<Self> {
        if r.ncols() != self.dim() {
            return Err(SetError::DimMismatch {
                context: "generalized intersection map columns".into(),
                expected: self.dim(),
                got: r.ncols(),
            });
        }
        if h.dim() != 0 && r.nrows() != h.dim() {
            return Err(SetError::DimMismatch {
                context: "generalized intersection map rows vs H dimension".into(),
                expected: h.dim(),
                got: r.nrows(),
            });
        }
        let n = self.dim();
        let n_i = h.num_ineq();
        let n_e = h.num_eq();

        let cont_generators = SpMat::hstack(&[&self.cont_generators, &SpMat::zeros(n, n_i)]);
        let bin_generators = self.bin_generators.clone();

        let mut con_rows: Vec<SpMat> = vec![SpMat::hstack(&[
            &self.con_cont,
            &SpMat::zeros(self.num_constraints(), n_i),
        ])];
        let mut bin_rows: Vec<SpMat> = vec![self.con_bin.clone()];
        let mut rhs: Vec<f64> = self.con_rhs.iter().copied().collect();

        if n_i > 0 {
            let lr = h.ineq_matrix.matmul(r);
            let t_c = lr.matmul(&self.cont_generators);
            let t_b = lr.matmul(&self.bin_generators);
            let base = &h.ineq_rhs - lr.matvec(&self.center);
            // s = r_h - L R c + sum_i |L R g^c_i| + sum_i |L R g^b_i|
            let s_vec = &base + t_c.row_abs_sum() + t_b.row_abs_sum();
            let s: Vec<f64> = s_vec.iter().copied().collect();
            con_rows.push(SpMat::hstack(&[&t_c, &SpMat::diag(&s)]));
            bin_rows.push(t_b);
            rhs.extend(base.iter().copied());
        }
        if n_e > 0 {
            let ar = h.eq_matrix.matmul(r);
            let t_c = ar.matmul(&self.cont_generators);
            let t_b = ar.matmul(&self.bin_generators);
            let base = &h.eq_rhs - ar.matvec(&self.center);
            con_rows.push(SpMat::hstack(&[&t_c, &SpMat::zeros(n_e, n_i)]));
            bin_rows.push(t_b);
            rhs.extend(base.iter().copied());
        }

        Ok(Self {
            cont_generators,
            bin_generators,
            center: self.center.clone(),
            con_cont: SpMat::vstack(&con_rows.iter().collect::<Vec<_>>()),
            con_bin: SpMat::vstack(&bin_rows.iter().collect::<Vec<_>>()),
            con_rhs: DVector::from_vec(rhs),
        })
    }

    /// Generalized intersection with another hybrid zonotope,
    /// `{ x in Z | R x in C }`, composed from the Cartesian product,
    /// an equality-only intersection, and a projection.
    pub fn intersect_hybrid(&self, r: &SpMat, c: &HybridZonotope) -> SetResult<Self> {
        if r.ncols() != self.dim() || r.nrows() != c.dim() {
            return Err(SetError::DimMismatch {
                context: "hybrid intersection map".into(),
                expected: c.dim(),
                got: r.nrows(),
            });
        }
        let n = self.dim();
        let m = c.dim();
        let prod = self.cartesian_product(c);
        // Link rows: R x - y = 0 over the product coordinates.
        let link = SpMat::hstack(&[r, &SpMat::identity(m).scale(-1.0)]);
        let h0 = HPolytope::equalities(SpMat::identity(m), DVector::zeros(m))
            .expect("zero rhs equalities");
        let linked = prod.generalized_intersection_hz(&link, &h0)?;
        let coords: Vec<usize> = (0..n).collect();
        linked.project(&coords)
    }

    /// Append the binary factors as extra trailing coordinates
    /// (identity binary generators on the new block).
    pub fn augment_with_binaries(&self) -> Self {
        let n = self.dim();
        let n_b = self.num_bin_gens();
        let cont_generators =
            SpMat::vstack(&[&self.cont_generators, &SpMat::zeros(n_b, self.num_cont_gens())]);
        let bin_generators = SpMat::vstack(&[&self.bin_generators, &SpMat::identity(n_b)]);
        let mut center = DVector::zeros(n + n_b);
        for i in 0..n {
            center[i] = self.center[i];
        }
        Self {
            cont_generators,
            bin_generators,
            center,
            con_cont: self.con_cont.clone(),
            con_bin: self.con_bin.clone(),
            con_rhs: self.con_rhs.clone(),
        }
    }

    /// A box guaranteed to contain the set: binaries relaxed to
    /// `[0,1]`, constraints ignored. May be loose.
    pub fn interval_hull(&self) -> (DVector<f64>, DVector<f64>) {
        let (neg_c, pos_c) = self.cont_generators.row_ranges_unit_box();
        let (neg_b, pos_b) = self.bin_generators.row_ranges_unit_box();
        let lo = &self.center + neg_c + neg_b;
        let hi = &self.center + pos_c + pos_b;
        (lo, hi)
    }

    /// Rows of the constraint system of the form `sum delta_i = 1` with
    /// no continuous involvement: each is a one-hot indicator group.
    /// Overlapping groups are dropped so the result is disjoint.
    pub fn one_hot_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut used = vec![false; self.num_bin_gens()];
        for i in 0..self.num_constraints() {
            if self.con_cont.row(i).any(|(_, v)| v != 0.0) {
                continue;
            }
            if (self.con_rhs[i] - 1.0).abs() > 1e-12 {
                continue;
            }
            let cols: Vec<usize> = self.con_bin.row(i).map(|(j, _)| j).collect();
            if cols.is_empty() || !self.con_bin.row(i).all(|(_, v)| (v - 1.0).abs() < 1e-12) {
                continue;
            }
            if cols.iter().any(|&j| used[j]) {
                continue;
            }
            for &j in &cols {
                used[j] = true;
            }
            groups.push(cols);
        }
        groups
    }
}

impl From<Zonotope> for HybridZonotope {
    fn from(z: Zonotope) -> Self {
        ConstrainedZonotope::from(z).into()
    }
}

impl From<ConstrainedZonotope> for HybridZonotope {
    fn from(cz: ConstrainedZonotope) -> Self {
        let n = cz.dim();
        let n_c = cz.num_cons();
        Self {
            cont_generators: cz.generators,
            bin_generators: SpMat::zeros(n, 0),
            center: cz.center,
            con_cont: cz.con_matrix,
            con_bin: SpMat::zeros(n_c, 0),
            con_rhs: cz.con_rhs,
        }
    }
}
