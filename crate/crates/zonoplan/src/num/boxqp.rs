//! Operator-splitting (ADMM) solver for box-constrained QPs
//!
//! ```text
//!     minimize   1/2 x' P x + q' x + const
//!     subject to A x = b,   lo <= x <= hi
//! ```
//!
//! The splitting follows the OSQP scheme with constraint stack
//! `[A; I]`. The KKT matrix `P + sigma I + rho_eq A'A + rho_box I`
//! depends only on the matrices and the penalty, so its factorization
//! is shared across branch-and-bound nodes (which differ in `lo`/`hi`
//! only). The penalty adapts to the primal/dual residual ratio with a
//! refactorization, which handles thin feasible sets where a fixed
//! penalty stalls. Primal infeasibility is certified from the dual
//! update direction.

use std::cell::RefCell;

use nalgebra::{Cholesky, DVector, Dyn};
use thiserror::Error;

use crate::num::sparse::SpMat;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("KKT matrix not positive definite (is P PSD?)")]
    KktNotPd,
    #[error("dimension mismatch: {0}")]
    Dims(String),
}

#[derive(Debug, Clone, Copy)]
pub struct AdmmSettings {
    /// Base penalty (box rows); equality rows use `rho * rho_eq_scale`.
    pub rho: f64,
    pub rho_eq_scale: f64,
    pub sigma: f64,
    /// Over-relaxation.
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_pinf: f64,
    pub max_iter: usize,
    pub check_every: usize,
    pub adaptive_rho: bool,
    /// Refactor when the suggested penalty differs by this factor.
    pub adaptive_threshold: f64,
    pub max_refactors: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            rho_eq_scale: 1e3,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_pinf: 1e-6,
            max_iter: 50_000,
            check_every: 25,
            adaptive_rho: true,
            adaptive_threshold: 5.0,
            max_refactors: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    PrimalInfeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: DVector<f64>,
    /// Duals over the stacked rows `[equality; box]`.
    pub y: DVector<f64>,
    pub objective: f64,
    pub prim_res: f64,
    pub dual_res: f64,
    pub iterations: usize,
}

/// Warm-start state carried between related solves.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
}

struct KktState {
    rho: f64,
    chol: Cholesky<f64, Dyn>,
}

pub struct QpWorkspace {
    pub p: SpMat,
    pub a: SpMat,
    ata: SpMat,
    settings: AdmmSettings,
    state: RefCell<KktState>,
    n: usize,
    m_eq: usize,
}

/// Per-solve data: linear cost, equality rhs, bounds, objective offset.
pub struct QpInstance<'a> {
    pub q: &'a DVector<f64>,
    pub b: &'a DVector<f64>,
    pub lo: &'a DVector<f64>,
    pub hi: &'a DVector<f64>,
    pub obj_const: f64,
}

fn factorize(
    p: &SpMat,
    ata: &SpMat,
    s: &AdmmSettings,
    rho: f64,
) -> Result<Cholesky<f64, Dyn>, QpError> {
    let n = p.nrows();
    let mut kkt = p.add(&ata.scale(rho * s.rho_eq_scale)).to_dense();
    let shift = s.sigma + rho;
    for i in 0..n {
        kkt[(i, i)] += shift;
    }
    Cholesky::new(kkt).ok_or(QpError::KktNotPd)
}

impl QpWorkspace {
    /// Factorize the KKT matrix for cost quadratic `p` and equality
    /// rows `a`. The linear cost, rhs, and bounds vary per solve.
    pub fn new(p: SpMat, a: SpMat, settings: AdmmSettings) -> Result<Self, QpError> {
        let n = p.nrows();
        if p.ncols() != n || a.ncols() != n {
            return Err(QpError::Dims(format!(
                "P {}x{}, A {}x{}",
                p.nrows(),
                p.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        let at = a.transpose();
        let ata = at.matmul(&a);
        let chol = factorize(&p, &ata, &settings, settings.rho)?;
        Ok(Self {
            m_eq: a.nrows(),
            state: RefCell::new(KktState {
                rho: settings.rho,
                chol,
            }),
            p,
            a,
            ata,
            settings,
            n,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_eq(&self) -> usize {
        self.m_eq
    }

    pub fn settings(&self) -> &AdmmSettings {
        &self.settings
    }

    /// Solve one instance. `warm` reuses iterates from a related solve
    /// (parent branch-and-bound node). Penalty adaptations persist in
    /// the workspace, so later solves start from the tuned value.
    pub fn solve(&self, inst: &QpInstance, warm: Option<&WarmStart>) -> QpSolution {
        self.solve_with_eps(inst, warm, 1.0)
    }

    /// As [`solve`](Self::solve) with the convergence tolerances
    /// scaled; interior branch-and-bound relaxations run looser than
    /// incumbent solves.
    pub fn solve_with_eps(
        &self,
        inst: &QpInstance,
        warm: Option<&WarmStart>,
        eps_scale: f64,
    ) -> QpSolution {
        let QpInstance {
            q,
            b,
            lo,
            hi,
            obj_const,
        } = *inst;
        let s = &self.settings;
        let n = self.n;
        let m_eq = self.m_eq;
        let m = m_eq + n;
        let mut rho = self.state.borrow().rho;

        let mut x = DVector::<f64>::zeros(n);
        let mut z = DVector::<f64>::zeros(m);
        let mut y = DVector::<f64>::zeros(m);
        if let Some(w) = warm {
            x = w.x.clone();
            z = w.z.clone();
            y = w.y.clone();
            for i in 0..n {
                x[i] = x[i].clamp(lo[i], hi[i]);
                z[m_eq + i] = z[m_eq + i].clamp(lo[i], hi[i]);
            }
            for i in 0..m_eq {
                z[i] = b[i];
            }
        } else {
            for i in 0..n {
                let mid = 0.5 * (lo[i] + hi[i]);
                x[i] = mid;
                z[m_eq + i] = mid;
            }
            for i in 0..m_eq {
                z[i] = b[i];
            }
        }

        let mut y_prev_check = y.clone();
        let mut iterations = 0;
        let mut status = QpStatus::MaxIter;
        let mut prim_res = f64::INFINITY;
        let mut dual_res = f64::INFINITY;
        let mut refactors = 0usize;

        for iter in 1..=s.max_iter {
            iterations = iter;
            let rho_eq = rho * s.rho_eq_scale;
            // x-update: KKT solve.
            let mut rhs = DVector::zeros(n);
            for i in 0..n {
                rhs[i] = s.sigma * x[i] - q[i];
            }
            let mut weq = DVector::zeros(m_eq);
            for i in 0..m_eq {
                weq[i] = rho_eq * z[i] - y[i];
            }
            rhs += self.a.tr_matvec(&weq);
            for i in 0..n {
                rhs[i] += rho * z[m_eq + i] - y[m_eq + i];
            }
            let x_tilde = self.state.borrow().chol.solve(&rhs);

            // z-update with over-relaxation, then projection.
            let ax = self.a.matvec(&x_tilde);
            for i in 0..m {
                let z_tilde = if i < m_eq { ax[i] } else { x_tilde[i - m_eq] };
                let rho_i = if i < m_eq { rho_eq } else { rho };
                let v = s.alpha * z_tilde + (1.0 - s.alpha) * z[i] + y[i] / rho_i;
                let z_new = if i < m_eq {
                    b[i]
                } else {
                    v.clamp(lo[i - m_eq], hi[i - m_eq])
                };
                y[i] += rho_i * (s.alpha * z_tilde + (1.0 - s.alpha) * z[i] - z_new);
                z[i] = z_new;
            }
            x = x_tilde;

            if iter % s.check_every == 0 {
                let ax = self.a.matvec(&x);
                let mut rp: f64 = 0.0;
                let mut ax_norm: f64 = 0.0;
                let mut z_norm: f64 = 0.0;
                for i in 0..m {
                    let axi = if i < m_eq { ax[i] } else { x[i - m_eq] };
                    rp = rp.max((axi - z[i]).abs());
                    ax_norm = ax_norm.max(axi.abs());
                    z_norm = z_norm.max(z[i].abs());
                }
                let px = self.p.matvec(&x);
                let mut aty = self
                    .a
                    .tr_matvec(&DVector::from_iterator(m_eq, y.iter().take(m_eq).copied()));
                for i in 0..n {
                    aty[i] += y[m_eq + i];
                }
                let mut rd: f64 = 0.0;
                let mut px_norm: f64 = 0.0;
                let mut aty_norm: f64 = 0.0;
                let mut q_norm: f64 = 0.0;
                for i in 0..n {
                    rd = rd.max((px[i] + q[i] + aty[i]).abs());
                    px_norm = px_norm.max(px[i].abs());
                    aty_norm = aty_norm.max(aty[i].abs());
                    q_norm = q_norm.max(q[i].abs());
                }
                prim_res = rp;
                dual_res = rd;
                let eps_prim = eps_scale * (s.eps_abs + s.eps_rel * ax_norm.max(z_norm));
                let eps_dual =
                    eps_scale * (s.eps_abs + s.eps_rel * px_norm.max(aty_norm).max(q_norm));
                if rp <= eps_prim && rd <= eps_dual {
                    status = QpStatus::Solved;
                    break;
                }

                // Primal infeasibility certificate from the dual drift
                // accumulated since the previous check.
                let dy = &y - &y_prev_check;
                let dy_norm = dy.amax();
                if dy_norm > 1e-12 {
                    let dy_eq = DVector::from_iterator(m_eq, dy.iter().take(m_eq).copied());
                    let mut at_dy = self.a.tr_matvec(&dy_eq);
                    for i in 0..n {
                        at_dy[i] += dy[m_eq + i];
                    }
                    let support: f64 = (0..m)
                        .map(|i| {
                            let (l, u) = if i < m_eq {
                                (b[i], b[i])
                            } else {
                                (lo[i - m_eq], hi[i - m_eq])
                            };
                            if dy[i] > 0.0 {
                                u * dy[i]
                            } else {
                                l * dy[i]
                            }
                        })
                        .sum();
                    if at_dy.amax() <= s.eps_pinf * dy_norm && support <= -s.eps_pinf * dy_norm {
                        status = QpStatus::PrimalInfeasible;
                        break;
                    }
                }
                y_prev_check = y.clone();

                // Residual-balance penalty adaptation.
                if s.adaptive_rho && refactors < s.max_refactors {
                    let rp_rel = rp / ax_norm.max(z_norm).max(1e-10);
                    let rd_rel = rd / px_norm.max(aty_norm).max(q_norm).max(1e-10);
                    if rd_rel > 0.0 {
                        let ratio = (rp_rel / rd_rel).sqrt();
                        if ratio > s.adaptive_threshold || ratio < 1.0 / s.adaptive_threshold {
                            let new_rho = (rho * ratio).clamp(1e-6, 1e6);
                            if (new_rho / rho > s.adaptive_threshold
                                || rho / new_rho > s.adaptive_threshold)
                                && new_rho != rho
                            {
                                if let Ok(chol) = factorize(&self.p, &self.ata, s, new_rho) {
                                    *self.state.borrow_mut() = KktState { rho: new_rho, chol };
                                    rho = new_rho;
                                    refactors += 1;
                                }
                            }
                        }
                    }
                }
            }
        }

        let objective = 0.5 * x.dot(&self.p.matvec(&x)) + q.dot(&x) + obj_const;
        QpSolution {
            status,
            x,
            y,
            objective,
            prim_res,
            dual_res,
            iterations,
        }
    }
}

/// Alternating projections between the affine set `{x : A x = rhs}` and
/// a box. Cleans a nearly-feasible point to equality residuals near
/// machine precision without disturbing it much; used on final solver
/// incumbents before decoding.
pub struct AffineProjector {
    a: SpMat,
    chol: Cholesky<f64, Dyn>,
}

impl AffineProjector {
    pub fn new(a: SpMat) -> Result<Self, QpError> {
        let m = a.nrows();
        let at = a.transpose();
        let mut aat = a.matmul(&at).to_dense();
        let scale = (0..m).map(|i| aat[(i, i)]).fold(1.0_f64, f64::max);
        for i in 0..m {
            aat[(i, i)] += 1e-12 * scale;
        }
        let chol = Cholesky::new(aat).ok_or(QpError::KktNotPd)?;
        Ok(Self { a, chol })
    }

    pub fn refine(
        &self,
        x0: &DVector<f64>,
        rhs: &DVector<f64>,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
        tol: f64,
        max_iter: usize,
    ) -> (DVector<f64>, f64) {
        // Alternating projections are not monotone when box corners
        // clamp the affine step, so track the best point seen instead
        // of stopping on the first non-improving iterate.
        let mut x = x0.clone();
        let mut best_res = (rhs - self.a.matvec(&x)).amax();
        let mut best_x = x.clone();
        for _ in 0..max_iter {
            if best_res <= tol {
                break;
            }
            let r = rhs - self.a.matvec(&x);
            let dual = self.chol.solve(&r);
            x += self.a.tr_matvec(&dual);
            for i in 0..x.len() {
                x[i] = x[i].clamp(lo[i], hi[i]);
            }
            let res = (rhs - self.a.matvec(&x)).amax();
            if res < best_res {
                best_res = res;
                best_x = x.clone();
            }
        }
        (best_x, best_res)
    }
}
