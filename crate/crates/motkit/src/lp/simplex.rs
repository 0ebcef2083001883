//! Dense two-phase primal simplex for equality-constrained maximization:
//!
//! ```text
//!     maximize c'x   subject to   A x = b,  x >= 0,  b >= 0.
//! ```
//!
//! Pivoting uses Dantzig pricing with deterministic tie-breaking and falls
//! back to Bland's rule after a degeneracy stall, which guarantees
//! termination. Redundant rows (the transport-plus-martingale systems here
//! are rank-deficient by construction) keep their artificial variable basic
//! at level zero.
//!
//! Accumulated tableau error is removed at the end: the final basis matrix
//! is refactorized from the original data and both the basic solution and
//! the dual multipliers are recomputed by LU solves. If the refactorized
//! duals reveal a not-yet-optimal reduced cost, the tableau is rebuilt from
//! that basis and pivoting resumes (at most a few rounds).

use thiserror::Error;

/// Feasibility tolerance on constraint residuals and phase-1 mass.
pub const FEAS_TOL: f64 = 1e-9;

/// Optimality tolerance on reduced costs during pivoting.
pub const OPT_TOL: f64 = 1e-10;

/// Minimum magnitude accepted for a pivot element.
const PIVOT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("iteration limit reached after {0} pivots")]
    IterationLimit(usize),
    #[error("basis matrix is numerically singular")]
    SingularBasis,
    #[error("refactorized solution failed optimality checks after {0} restarts")]
    Unstable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub status: SimplexStatus,
    /// Primal values, one per structural variable; empty unless optimal.
    pub x: Vec<f64>,
    /// Dual multipliers, one per constraint row; empty unless optimal.
    pub duals: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

/// Dense row-major matrix, the original constraint data.
pub struct Problem {
    pub rows: usize,
    pub cols: usize,
    /// `rows x cols`, row-major.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Problem {
    fn a_at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }
}

/// Working tableau: `rows` constraint rows plus an objective row, over the
/// structural columns and a right-hand side. Artificial columns are not
/// stored; artificial basic variables are tracked through `basis` entries
/// `>= cols`.
struct Tableau {
    rows: usize,
    cols: usize, // structural columns
    /// `(rows + 1) x (cols + 1)`; last row is the objective (reduced costs
    /// and negated objective value), last column the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn objective(&self) -> f64 {
        -self.at(self.rows, self.cols)
    }

    /// Pivot on `(row, col)`: scale the pivot row, eliminate the column from
    /// every other row including the objective row.
    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let inv = 1.0 / self.t[row * w + col];
        for j in 0..w {
            self.t[row * w + j] *= inv;
        }
        self.t[row * w + col] = 1.0;
        for i in 0..=self.rows {
            if i == row {
                continue;
            }
            let factor = self.t[i * w + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..w {
                self.t[i * w + j] -= factor * self.t[row * w + j];
            }
            self.t[i * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// One phase of pivoting to optimality of the current objective row.
    /// Entering candidates are structural columns with positive reduced
    /// cost; Dantzig pricing switches to Bland's rule after `stall_limit`
    /// non-improving pivots.
    fn run(&mut self, max_pivots: usize, stall_limit: usize) -> Result<PhaseOutcome, SimplexError> {
        let w = self.width();
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_obj = self.objective();
        for pivots in 0..max_pivots {
            let obj_row = self.rows * w;
            let mut entering: Option<usize> = None;
            if bland {
                for j in 0..self.cols {
                    if self.t[obj_row + j] > OPT_TOL {
                        entering = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = OPT_TOL;
                for j in 0..self.cols {
                    if self.t[obj_row + j] > best {
                        best = self.t[obj_row + j];
                        entering = Some(j);
                    }
                }
            }
            let Some(col) = entering else {
                return Ok(PhaseOutcome::Optimal { pivots });
            };

            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leaving {
                        None => true,
                        Some((cur, best_ratio)) => {
                            ratio < best_ratio - 1e-12
                                || (ratio < best_ratio + 1e-12 && self.basis[i] < self.basis[cur])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(PhaseOutcome::Unbounded);
            };
            self.pivot(row, col);

            let obj = self.objective();
            if obj > last_obj + 1e-13 * (1.0 + obj.abs()) {
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }
            last_obj = obj;
        }
        Err(SimplexError::IterationLimit(max_pivots))
    }
}

enum PhaseOutcome {
    Optimal { pivots: usize },
    Unbounded,
}

/// LU factorization with partial pivoting of a dense square matrix.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Lu, SimplexError> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = a[k * n + k].abs();
            for i in (k + 1)..n {
                if a[i * n + k].abs() > pivot_val {
                    pivot_val = a[i * n + k].abs();
                    pivot_row = i;
                }
            }
            if pivot_val < 1e-13 {
                return Err(SimplexError::SingularBasis);
            }
            if pivot_row != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let inv = 1.0 / a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] * inv;
                a[i * n + k] = factor;
                for j in (k + 1)..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu: a, perm })
    }

    /// Solves `A x = rhs`.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Solves `A' y = rhs` using the same factorization:
    /// `A = P' L U`, so `U' z = rhs`, `L' w = z`, `y = P' w`.
    fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = rhs.to_vec();
        for i in 0..n {
            for j in 0..i {
                z[i] -= self.lu[j * n + i] * z[j];
            }
            z[i] /= self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                z[i] -= self.lu[j * n + i] * z[j];
            }
        }
        let mut y = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = z[i];
        }
        y
    }
}

/// Column `j` of the basis matrix for basis entry `var`: a structural column
/// of `A`, or a unit vector for an artificial kept in a redundant row.
fn basis_column(p: &Problem, var: usize, out: &mut [f64]) {
    if var < p.cols {
        for i in 0..p.rows {
            out[i] = p.a_at(i, var);
        }
    } else {
        out.fill(0.0);
        out[var - p.cols] = 1.0;
    }
}

struct Factored {
    lu: Lu,
    x_basic: Vec<f64>,
    duals: Vec<f64>,
}

/// Refactorizes the basis from original data: LU of the basis matrix, basic
/// primal values from `B x_B = b`, duals from `B' y = c_B` (artificials
/// carry cost zero).
fn refactor(p: &Problem, basis: &[usize]) -> Result<Factored, SimplexError> {
    let m = p.rows;
    let mut bmat = vec![0.0; m * m];
    let mut col = vec![0.0; m];
    for (k, &var) in basis.iter().enumerate() {
        basis_column(p, var, &mut col);
        for i in 0..m {
            bmat[i * m + k] = col[i];
        }
    }
    let lu = Lu::factor(bmat, m)?;
    let x_basic = lu.solve(&p.b);
    let c_b: Vec<f64> = basis
        .iter()
        .map(|&var| if var < p.cols { p.c[var] } else { 0.0 })
        .collect();
    let duals = lu.solve_transpose(&c_b);
    Ok(Factored { lu, x_basic, duals })
}

/// Rebuilds a clean tableau for the given basis: constraint rows are
/// `B^{-1} A` and `B^{-1} b`, the objective row holds reduced costs
/// `c - y'A` and `-c_B' x_B`.
fn rebuild_tableau(p: &Problem, basis: &[usize]) -> Result<Tableau, SimplexError> {
    let f = refactor(p, basis)?;
    let m = p.rows;
    let n = p.cols;
    let w = n + 1;
    let mut t = vec![0.0; (m + 1) * w];
    let mut col = vec![0.0; m];
    for j in 0..n {
        for i in 0..m {
            col[i] = p.a_at(i, j);
        }
        let solved = f.lu.solve(&col);
        for i in 0..m {
            t[i * w + j] = solved[i];
        }
        let reduced = p.c[j] - f.duals.iter().enumerate().map(|(i, y)| y * p.a_at(i, j)).sum::<f64>();
        t[m * w + j] = reduced;
    }
    let mut value = 0.0;
    for i in 0..m {
        t[i * w + n] = f.x_basic[i];
        if basis[i] < n {
            value += p.c[basis[i]] * f.x_basic[i];
        }
    }
    t[m * w + n] = -value;
    // Basic columns of the rebuilt tableau are unit vectors up to rounding;
    // snap them so later pivots see exact zeros.
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            for r in 0..=m {
                t[r * w + var] = if r == i { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(Tableau {
        rows: m,
        cols: n,
        t,
        basis: basis.to_vec(),
    })
}

/// Solves the phase-1 problem (minimize the total artificial mass) with a
/// full tableau that includes artificial columns, returning the feasible
/// basis, or `None` when infeasible.
fn phase_one(p: &Problem) -> Result<Option<Vec<usize>>, SimplexError> {
    let m = p.rows;
    let n = p.cols;
    let cols = n + m;
    let w = cols + 1;
    let mut t = vec![0.0; (m + 1) * w];
    for i in 0..m {
        for j in 0..n {
            t[i * w + j] = p.a_at(i, j);
        }
        t[i * w + n + i] = 1.0;
        t[i * w + cols] = p.b[i];
    }
    // Phase-1 objective: maximize -sum(artificials); with the artificial
    // basis the reduced cost of column j is the column sum of A.
    for j in 0..n {
        let col_sum: f64 = (0..m).map(|i| p.a_at(i, j)).sum();
        t[m * w + j] = col_sum;
    }
    let rhs_sum: f64 = p.b.iter().sum();
    t[m * w + cols] = rhs_sum; // objective starts at -sum(b)

    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        basis: (n..n + m).collect(),
    };
    let max_pivots = 60 * (m + 10);
    match tab.run(max_pivots, 2 * m + 10)? {
        PhaseOutcome::Unbounded => unreachable!("phase-1 objective is bounded above by zero"),
        PhaseOutcome::Optimal { .. } => {}
    }
    if tab.objective() < -FEAS_TOL {
        return Ok(None);
    }
    // Drive artificials out of the basis where a usable pivot exists;
    // otherwise the row is redundant and the artificial stays at level zero.
    for row in 0..m {
        if tab.basis[row] >= n {
            if let Some(col) = (0..n).find(|&j| tab.at(row, j).abs() > PIVOT_TOL) {
                tab.pivot(row, col);
            }
        }
    }
    Ok(Some(tab.basis))
}

/// Maximizes `c'x` over `A x = b, x >= 0`. Requires `b >= 0`.
pub fn maximize(p: &Problem) -> Result<SimplexSolution, SimplexError> {
    debug_assert!(p.b.iter().all(|&bi| bi >= 0.0));
    debug_assert_eq!(p.a.len(), p.rows * p.cols);

    let Some(mut basis) = phase_one(p)? else {
        return Ok(SimplexSolution {
            status: SimplexStatus::Infeasible,
            x: Vec::new(),
            duals: Vec::new(),
            value: f64::NAN,
            pivots: 0,
        });
    };

    let max_pivots = 60 * (p.rows + 10);
    let mut total_pivots = 0usize;
    const MAX_ROUNDS: usize = 4;
    for _round in 0..MAX_ROUNDS {
        let mut tab = rebuild_tableau(p, &basis)?;
        match tab.run(max_pivots, 2 * p.rows + 10)? {
            PhaseOutcome::Unbounded => {
                return Ok(SimplexSolution {
                    status: SimplexStatus::Unbounded,
                    x: Vec::new(),
                    duals: Vec::new(),
                    value: f64::INFINITY,
                    pivots: total_pivots,
                });
            }
            PhaseOutcome::Optimal { pivots } => total_pivots += pivots,
        }
        basis = tab.basis.clone();

        // Clean solution and duals from the refactorized basis.
        let f = refactor(p, &basis)?;
        let worst_reduced = (0..p.cols)
            .map(|j| {
                p.c[j]
                    - f.duals
                        .iter()
                        .enumerate()
                        .map(|(i, y)| y * p.a_at(i, j))
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let worst_primal = f.x_basic.iter().cloned().fold(f64::INFINITY, f64::min);
        if worst_reduced <= FEAS_TOL && worst_primal >= -FEAS_TOL {
            let mut x = vec![0.0; p.cols];
            let mut value = 0.0;
            for (k, &var) in basis.iter().enumerate() {
                if var < p.cols {
                    let xi = f.x_basic[k].max(0.0);
                    x[var] = xi;
                    value += p.c[var] * xi;
                }
            }
            return Ok(SimplexSolution {
                status: SimplexStatus::Optimal,
                x,
                duals: f.duals,
                value,
                pivots: total_pivots,
            });
        }
        // Reduced costs drifted past tolerance: resume pivoting from the
        // refactorized tableau.
    }
    Err(SimplexError::Unstable(MAX_ROUNDS))
}
