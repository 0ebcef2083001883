//! Finite linear programming for the martingale transport problem.
//!
//! The primal maximizes `Σ p_ij c(x_i, y_j)` over couplings with prescribed
//! marginals and conditional barycenters:
//!
//! ```text
//!   Σ_j p_ij            = mu_i      (one row per source atom)
//!   Σ_i p_ij            = nu_j      (one row per target atom)
//!   Σ_j p_ij (y_j - x_i) = 0        (one row per source atom)
//!   p_ij >= 0.
//! ```
//!
//! The dual multipliers of the three row families are exactly the
//! superhedging certificate `(phi, psi, h)`: feasibility reads
//! `phi(x) + psi(y) + h(x)(y - x) >= c(x, y)` on the full grid, and the
//! dual value `mu(phi) + nu(psi)` matches the primal optimum.

mod simplex;

pub use simplex::{SimplexError, SimplexStatus, FEAS_TOL, OPT_TOL};

use crate::coupling::{Coupling, CouplingError, MASS_FLOOR};
use crate::curtain::{build_left_monotone, CurtainError};
use crate::measures::Measure;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("tabulated cost grid mismatch: expected {expected_x}x{expected_y}, got {got_x}x{got_y}")]
    CostGridMismatch {
        expected_x: usize,
        expected_y: usize,
        got_x: usize,
        got_y: usize,
    },
    #[error("cost is not defined at ({x}, {y})")]
    CostUndefined { x: f64, y: f64 },
    #[error("linear program is not solvable: {0:?}")]
    NotOptimal(SimplexStatus),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Curtain(#[from] CurtainError),
}

/// Coupling functions used as transport objectives.
///
/// `XySquared` and `ExpSum` have a strictly convex x-derivative in the second
/// argument, so their optimizers are left-monotone; `NegXySquared` satisfies
/// the reflected condition and selects right-monotone plans. `Tabulated`
/// carries explicit values over a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub enum CostSpec {
    /// `c(x, y) = x * y^2`
    XySquared,
    /// `c(x, y) = exp(x + y)`
    ExpSum,
    /// `c(x, y) = -x * y^2`
    NegXySquared,
    /// Explicit values `values[i][j] = c(x_grid[i], y_grid[j])`.
    Tabulated {
        x_grid: Vec<f64>,
        y_grid: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl CostSpec {
    pub fn tabulated(
        x_grid: Vec<f64>,
        y_grid: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, LpError> {
        let ok = values.len() == x_grid.len()
            && values.iter().all(|row| row.len() == y_grid.len())
            && values.iter().flatten().all(|v| v.is_finite());
        if !ok {
            return Err(LpError::CostGridMismatch {
                expected_x: x_grid.len(),
                expected_y: y_grid.len(),
                got_x: values.len(),
                got_y: values.first().map_or(0, |r| r.len()),
            });
        }
        Ok(CostSpec::Tabulated {
            x_grid,
            y_grid,
            values,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, LpError> {
        match self {
            CostSpec::XySquared => Ok(x * y * y),
            CostSpec::ExpSum => Ok((x + y).exp()),
            CostSpec::NegXySquared => Ok(-x * y * y),
            CostSpec::Tabulated {
                x_grid,
                y_grid,
                values,
            } => {
                let find = |grid: &[f64], v: f64| {
                    grid.iter().position(|g| (g - v).abs() <= 1e-12)
                };
                match (find(x_grid, x), find(y_grid, y)) {
                    (Some(i), Some(j)) => Ok(values[i][j]),
                    _ => Err(LpError::CostUndefined { x, y }),
                }
            }
        }
    }

    fn is_tabulated(&self) -> bool {
        matches!(self, CostSpec::Tabulated { .. })
    }
}

/// A grid triple witnessing failure of strict midpoint convexity of `c_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpenceMirrleesWitness {
    pub x: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Numerical check of the martingale Spence-Mirrlees condition: the
/// x-derivative (central difference with step `dx` for analytic kinds, grid
/// differences for tabulated ones) must be strictly midpoint-convex in the
/// second argument over the grid, with margin `1e-12 * scale`.
pub fn check_spence_mirrlees(cost: &CostSpec, x_grid: &[f64], y_grid: &[f64], dx: f64) -> bool {
    spence_mirrlees_witness(cost, x_grid, y_grid, dx).is_none()
}

/// Like [`check_spence_mirrlees`] but returns the first failing triple.
pub fn spence_mirrlees_witness(
    cost: &CostSpec,
    x_grid: &[f64],
    y_grid: &[f64],
    dx: f64,
) -> Option<SpenceMirrleesWitness> {
    if y_grid.len() < 3 {
        return Some(SpenceMirrleesWitness {
            x: x_grid.first().copied().unwrap_or(0.0),
            y0: f64::NAN,
            y1: f64::NAN,
        });
    }
    if cost.is_tabulated() {
        return tabulated_witness(cost, x_grid, y_grid);
    }
    let cx = |x: f64, y: f64| {
        let hi = cost.eval(x + dx, y).expect("analytic cost");
        let lo = cost.eval(x - dx, y).expect("analytic cost");
        (hi - lo) / (2.0 * dx)
    };
    let scale = x_grid
        .iter()
        .flat_map(|&x| y_grid.iter().map(move |&y| cx(x, y).abs()))
        .fold(1.0, f64::max);
    let margin = 1e-12 * scale;
    for &x in x_grid {
        for (a, &y0) in y_grid.iter().enumerate() {
            for &y1 in &y_grid[a + 1..] {
                let mid = 0.5 * (y0 + y1);
                if cx(x, mid) >= 0.5 * cx(x, y0) + 0.5 * cx(x, y1) - margin {
                    return Some(SpenceMirrleesWitness { x, y0, y1 });
                }
            }
        }
    }
    None
}

/// Tabulated variant: x-derivative by grid differences, strict convexity in
/// y via second divided differences on consecutive triples.
fn tabulated_witness(
    cost: &CostSpec,
    x_grid: &[f64],
    y_grid: &[f64],
) -> Option<SpenceMirrleesWitness> {
    let m = x_grid.len();
    let n = y_grid.len();
    let c = |i: usize, j: usize| cost.eval(x_grid[i], y_grid[j]).expect("tabulated grid");
    let cx = |i: usize, j: usize| -> f64 {
        if m == 1 {
            return 0.0;
        }
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == m - 1 {
            (m - 2, m - 1)
        } else {
            (i - 1, i + 1)
        };
        (c(hi, j) - c(lo, j)) / (x_grid[hi] - x_grid[lo])
    };
    let scale = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| cx(i, j).abs())
        .fold(1.0, f64::max);
    let margin = 1e-12 * scale;
    for i in 0..m {
        for j in 1..n - 1 {
            let left = (cx(i, j) - cx(i, j - 1)) / (y_grid[j] - y_grid[j - 1]);
            let right = (cx(i, j + 1) - cx(i, j)) / (y_grid[j + 1] - y_grid[j]);
            if right <= left + margin {
                return Some(SpenceMirrleesWitness {
                    x: x_grid[i],
                    y0: y_grid[j - 1],
                    y1: y_grid[j + 1],
                });
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Primal solution: the optimal transport value and the optimizing coupling
/// (cleaned of sub-[`MASS_FLOOR`] dust), when one exists.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub status: LpStatus,
    pub coupling: Option<Coupling>,
}

/// Superhedging certificate: functions on the two atom grids plus the
/// hedging gradient, with value `mu(phi) + nu(psi)`.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub h: Vec<f64>,
    pub value: f64,
}

impl DualCertificate {
    /// Largest violation of `phi(x) + psi(y) + h(x)(y - x) >= c(x, y)` over
    /// the full grid (positive means infeasible by that much).
    pub fn feasibility_gap(
        &self,
        mu: &Measure,
        nu: &Measure,
        cost: &CostSpec,
    ) -> Result<f64, LpError> {
        let mut worst = f64::NEG_INFINITY;
        for (i, &x) in mu.atoms().iter().enumerate() {
            for (j, &y) in nu.atoms().iter().enumerate() {
                let hedge = self.phi[i] + self.psi[j] + self.h[i] * (y - x);
                worst = worst.max(cost.eval(x, y)? - hedge);
            }
        }
        Ok(worst)
    }

    /// Largest absolute slack `|phi + psi + h(y - x) - c|` over the support
    /// of `pi` (complementary slackness demands equality there).
    pub fn support_gap(
        &self,
        mu: &Measure,
        nu: &Measure,
        pi: &Coupling,
        cost: &CostSpec,
    ) -> Result<f64, LpError> {
        let index_of = |grid: &[f64], v: f64| {
            grid.iter()
                .position(|g| (g - v).abs() <= 1e-9)
                .expect("support point on marginal grid")
        };
        let mut worst = 0.0f64;
        for e in pi.entries() {
            let i = index_of(mu.atoms(), e.x);
            let j = index_of(nu.atoms(), e.y);
            let hedge = self.phi[i] + self.psi[j] + self.h[i] * (e.y - e.x);
            worst = worst.max((hedge - cost.eval(e.x, e.y)?).abs());
        }
        Ok(worst)
    }
}

/// Everything one solve produces; [`solve_primal`] and [`solve_dual`] are
/// thin views of this.
#[derive(Debug, Clone)]
pub struct SolvedInstance {
    pub primal: LpSolution,
    pub dual: Option<DualCertificate>,
    pub pivots: usize,
}

/// Solves the martingale transport maximization for the given cost.
pub fn solve_with_certificate(
    mu: &Measure,
    nu: &Measure,
    cost: &CostSpec,
) -> Result<SolvedInstance, LpError> {
    let m = mu.len();
    let n = nu.len();
    let xs = mu.atoms();
    let ys = nu.atoms();

    // Large exponential costs destabilize pivoting; solve with a rescaled
    // objective and undo the scaling on the way out (the argmax is
    // invariant under positive scaling).
    let cost_scale = match cost {
        CostSpec::ExpSum => {
            let max_sum = xs[m - 1] + ys[n - 1];
            (-max_sum).exp()
        }
        _ => 1.0,
    };

    let rows = 2 * m + n;
    let cols = m * n;
    let mut a = vec![0.0; rows * cols];
    let mut b = vec![0.0; rows];
    let mut c = vec![0.0; cols];
    // Equilibrate the martingale rows, whose coefficients (y - x) are not
    // mass-scale; dual multipliers are unscaled accordingly below.
    let mut mart_scale = vec![1.0; m];
    for i in 0..m {
        let max_coef = ys
            .iter()
            .map(|y| (y - xs[i]).abs())
            .fold(0.0f64, f64::max);
        if max_coef > 0.0 {
            mart_scale[i] = 1.0 / max_coef;
        }
    }
    for i in 0..m {
        b[i] = mu.weights()[i];
        for j in 0..n {
            let v = i * n + j;
            a[i * cols + v] = 1.0; // row sums
            a[(m + j) * cols + v] = 1.0; // column sums
            a[(m + n + i) * cols + v] = (ys[j] - xs[i]) * mart_scale[i];
            c[v] = cost.eval(xs[i], ys[j])? * cost_scale;
        }
    }
    b[m..m + n].copy_from_slice(nu.weights());

    let sol = simplex::maximize(&simplex::Problem {
        rows,
        cols,
        a,
        b,
        c,
    })?;

    match sol.status {
        SimplexStatus::Infeasible => Ok(SolvedInstance {
            primal: LpSolution {
                value: f64::NAN,
                status: LpStatus::Infeasible,
                coupling: None,
            },
            dual: None,
            pivots: sol.pivots,
        }),
        SimplexStatus::Unbounded => Ok(SolvedInstance {
            primal: LpSolution {
                value: f64::INFINITY,
                status: LpStatus::Unbounded,
                coupling: None,
            },
            dual: None,
            pivots: sol.pivots,
        }),
        SimplexStatus::Optimal => {
            let mut entries = Vec::new();
            for i in 0..m {
                for j in 0..n {
                    let w = sol.x[i * n + j];
                    if w > MASS_FLOOR {
                        entries.push((xs[i], ys[j], w));
                    }
                }
            }
            let coupling = Coupling::new(entries)?;
            let value = sol.value / cost_scale;
            let phi: Vec<f64> = (0..m).map(|i| sol.duals[i] / cost_scale).collect();
            let psi: Vec<f64> = (0..n).map(|j| sol.duals[m + j] / cost_scale).collect();
            let h: Vec<f64> = (0..m)
                .map(|i| sol.duals[m + n + i] * mart_scale[i] / cost_scale)
                .collect();
            let dual_value = phi
                .iter()
                .zip(mu.weights())
                .map(|(p, w)| p * w)
                .sum::<f64>()
                + psi.iter().zip(nu.weights()).map(|(p, w)| p * w).sum::<f64>();
            Ok(SolvedInstance {
                primal: LpSolution {
                    value,
                    status: LpStatus::Optimal,
                    coupling: Some(coupling),
                },
                dual: Some(DualCertificate {
                    phi,
                    psi,
                    h,
                    value: dual_value,
                }),
                pivots: sol.pivots,
            })
        }
    }
}

/// Maximizes `E[c(X, Y)]` over martingale couplings of `(mu, nu)`.
/// Infeasibility (marginals not in convex order) is reported through the
/// status, not as an error.
pub fn solve_primal(mu: &Measure, nu: &Measure, cost: &CostSpec) -> Result<LpSolution, LpError> {
    Ok(solve_with_certificate(mu, nu, cost)?.primal)
}

/// Returns the superhedging certificate of the same linear program: the
/// dual multipliers of the row, column, and martingale constraints.
pub fn solve_dual(mu: &Measure, nu: &Measure, cost: &CostSpec) -> Result<DualCertificate, LpError> {
    let solved = solve_with_certificate(mu, nu, cost)?;
    solved
        .dual
        .ok_or(LpError::NotOptimal(match solved.primal.status {
            LpStatus::Infeasible => SimplexStatus::Infeasible,
            _ => SimplexStatus::Unbounded,
        }))
}

/// A support configuration on which the pairwise competitor test fails:
/// swapping the mass between the fan at `x` and the point at `x_prime`
/// would improve the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityViolation {
    pub x: f64,
    pub y0: f64,
    pub y1: f64,
    pub x_prime: f64,
    pub y_prime: f64,
    pub g_at_x: f64,
    pub g_at_x_prime: f64,
}

/// Competitor test over a finite support: for every `(x, y0), (x, y1),
/// (x', y')` in `gamma` with `x < x'` and `y0 < y' < y1`, the function
/// `g(s) = lambda c(s, y0) + (1 - lambda) c(s, y1) - c(s, y')` with
/// `lambda = (y1 - y') / (y1 - y0)` must satisfy `g(x) >= g(x')`; a
/// violation means mass could be profitably rerouted between the two
/// conditional laws without moving the marginals or barycenters.
pub fn verify_monotonicity_principle(
    gamma: &[(f64, f64)],
    cost: &CostSpec,
) -> Result<Vec<MonotonicityViolation>, LpError> {
    const TOL: f64 = 1e-10;
    let mut sorted = gamma.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut violations = Vec::new();
    for (k, &(x, y0)) in sorted.iter().enumerate() {
        for &(x_same, y1) in &sorted[k + 1..] {
            if (x_same - x).abs() > 1e-12 {
                break; // entries sharing x are contiguous
            }
            if y1 - y0 <= 1e-12 {
                continue;
            }
            for &(xp, yp) in &sorted {
                if xp <= x + 1e-12 || yp <= y0 + 1e-12 || yp >= y1 - 1e-12 {
                    continue;
                }
                let lambda = (y1 - yp) / (y1 - y0);
                let g = |s: f64| -> Result<f64, LpError> {
                    Ok(lambda * cost.eval(s, y0)?
                        + (1.0 - lambda) * cost.eval(s, y1)?
                        - cost.eval(s, yp)?)
                };
                let g_at_x = g(x)?;
                let g_at_xp = g(xp)?;
                if g_at_x < g_at_xp - TOL {
                    violations.push(MonotonicityViolation {
                        x,
                        y0,
                        y1,
                        x_prime: xp,
                        y_prime: yp,
                        g_at_x,
                        g_at_x_prime: g_at_xp,
                    });
                }
            }
        }
    }
    Ok(violations)
}

/// Solves the same instance under two costs and returns the total-variation
/// distance between the cleaned optimizers. When both costs satisfy the
/// strict Spence-Mirrlees condition (see [`check_spence_mirrlees`]) the
/// optimizers coincide with the cost-independent left-monotone plan and the
/// distance is zero up to solver accuracy; without strictness the distance
/// is still well-defined and distinguishes, say, left- from right-monotone
/// selections.
pub fn uniqueness_cross_check(
    mu: &Measure,
    nu: &Measure,
    c1: &CostSpec,
    c2: &CostSpec,
) -> Result<f64, LpError> {
    let p1 = solve_primal(mu, nu, c1)?;
    let p2 = solve_primal(mu, nu, c2)?;
    match (p1.coupling, p2.coupling) {
        (Some(a), Some(b)) => Ok(a.total_variation(&b)),
        _ => Err(LpError::NotOptimal(SimplexStatus::Infeasible)),
    }
}

/// Convenience: the greedy left-monotone coupling for comparison against LP
/// optimizers.
pub fn greedy_reference(mu: &Measure, nu: &Measure) -> Result<Coupling, LpError> {
    Ok(build_left_monotone(mu, nu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;

    fn measure(pairs: &[(f64, f64)]) -> Measure {
        Measure::from_pairs(pairs).unwrap()
    }

    #[test]
    fn spence_mirrlees_examples() {
        let xg = [-1.0, 0.0, 1.0];
        let yg = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert!(check_spence_mirrlees(&CostSpec::XySquared, &xg, &yg, 1e-5));
        assert!(check_spence_mirrlees(&CostSpec::ExpSum, &xg, &yg, 1e-5));
        // c(x, y) = x y has a linear x-derivative: not strictly convex.
        let values: Vec<Vec<f64>> = xg
            .iter()
            .map(|x| yg.iter().map(|y| x * y).collect())
            .collect();
        let tab = CostSpec::tabulated(xg.to_vec(), yg.to_vec(), values).unwrap();
        let w = spence_mirrlees_witness(&tab, &xg, &yg, 1e-5).unwrap();
        assert!(w.y0 < w.y1);
        // The reflected cost fails the left condition too.
        assert!(!check_spence_mirrlees(&CostSpec::NegXySquared, &xg, &yg, 1e-5));
    }

    #[test]
    fn singleton_feasible_instance() {
        // M(delta_0, (1/2)(delta_{-1} + delta_1)) is a single coupling.
        let mu = Measure::dirac(0.0);
        let nu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let solved = solve_with_certificate(&mu, &nu, &CostSpec::XySquared).unwrap();
        assert_eq!(solved.primal.status, LpStatus::Optimal);
        assert!(solved.primal.value.abs() < 1e-10);
        let dual = solved.dual.unwrap();
        assert!((dual.value - solved.primal.value).abs() < 1e-9);
        assert!(dual.feasibility_gap(&mu, &nu, &CostSpec::XySquared).unwrap() < 1e-9);
    }

    #[test]
    fn forced_two_by_two_instance() {
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-2.0, 0.5), (2.0, 0.5)]);
        let sol = solve_primal(&mu, &nu, &CostSpec::XySquared).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.value.abs() < 1e-10);
        let expect = Coupling::new(vec![
            (-1.0, -2.0, 0.375),
            (-1.0, 2.0, 0.125),
            (1.0, -2.0, 0.125),
            (1.0, 2.0, 0.375),
        ])
        .unwrap();
        assert!(sol.coupling.unwrap().total_variation(&expect) < 1e-9);
    }

    /// Brute-force LP oracle: enumerate candidate bases (column subsets),
    /// solve each square system, keep the best feasible value.
    fn vertex_enumeration_value(mu: &Measure, nu: &Measure, cost: &CostSpec) -> f64 {
        let m = mu.len();
        let n = nu.len();
        let xs = mu.atoms();
        let ys = nu.atoms();
        let rows = 2 * m + n;
        let cols = m * n;
        let a = |r: usize, v: usize| -> f64 {
            let (i, j) = (v / n, v % n);
            if r < m {
                if i == r { 1.0 } else { 0.0 }
            } else if r < m + n {
                if j == r - m { 1.0 } else { 0.0 }
            } else {
                if i == r - m - n { ys[j] - xs[i] } else { 0.0 }
            }
        };
        let mut b = vec![0.0; rows];
        b[..m].copy_from_slice(mu.weights());
        b[m..m + n].copy_from_slice(nu.weights());

        let mut best = f64::NEG_INFINITY;
        // All column subsets (the instances used here have at most ~10 vars).
        assert!(cols <= 16, "oracle meant for tiny instances");
        for mask in 0u32..(1 << cols) {
            let subset: Vec<usize> = (0..cols).filter(|v| mask & (1 << v) != 0).collect();
            if subset.is_empty() || subset.len() > rows {
                continue;
            }
            // Least-squares solve by normal equations built from Gaussian
            // elimination on the rectangular system [A_S | b].
            let k = subset.len();
            let mut mat = vec![0.0; rows * (k + 1)];
            for r in 0..rows {
                for (c_idx, &v) in subset.iter().enumerate() {
                    mat[r * (k + 1) + c_idx] = a(r, v);
                }
                mat[r * (k + 1) + k] = b[r];
            }
            // Gaussian elimination with partial pivoting to row echelon.
            let mut rank = 0usize;
            for col in 0..k {
                let piv = (rank..rows)
                    .max_by(|&p, &q| {
                        mat[p * (k + 1) + col]
                            .abs()
                            .total_cmp(&mat[q * (k + 1) + col].abs())
                    })
                    .unwrap();
                if mat[piv * (k + 1) + col].abs() < 1e-10 {
                    continue;
                }
                for c2 in 0..=k {
                    mat.swap(rank * (k + 1) + c2, piv * (k + 1) + c2);
                }
                let inv = 1.0 / mat[rank * (k + 1) + col];
                for r in 0..rows {
                    if r == rank {
                        continue;
                    }
                    let f = mat[r * (k + 1) + col] * inv;
                    if f == 0.0 {
                        continue;
                    }
                    for c2 in 0..=k {
                        mat[r * (k + 1) + c2] -= f * mat[rank * (k + 1) + c2];
                    }
                }
                rank += 1;
            }
            if rank < k {
                continue; // dependent columns: solution not unique, skip
            }
            // Read the solution and check consistency of the dropped rows.
            let mut x = vec![0.0; k];
            let mut row = 0;
            'cols: for col in 0..k {
                while row < rows {
                    if mat[row * (k + 1) + col].abs() > 1e-10 {
                        x[col] = mat[row * (k + 1) + k] / mat[row * (k + 1) + col];
                        row += 1;
                        continue 'cols;
                    }
                    row += 1;
                }
            }
            let feasible = x.iter().all(|&xi| xi >= -1e-9)
                && (0..rows).all(|r| {
                    let lhs: f64 = subset
                        .iter()
                        .enumerate()
                        .map(|(c_idx, &v)| a(r, v) * x[c_idx])
                        .sum();
                    (lhs - b[r]).abs() <= 1e-9
                });
            if feasible {
                let value: f64 = subset
                    .iter()
                    .enumerate()
                    .map(|(c_idx, &v)| {
                        x[c_idx] * cost.eval(xs[v / n], ys[v % n]).unwrap()
                    })
                    .sum();
                best = best.max(value);
            }
        }
        best
    }

    #[test]
    fn matches_vertex_enumeration_and_greedy() {
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let cost = CostSpec::XySquared;
        let sol = solve_primal(&mu, &nu, &cost).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // Independent value from exhaustive basis enumeration; the optimal
        // coupling evaluates to 2 by direct arithmetic.
        let oracle = vertex_enumeration_value(&mu, &nu, &cost);
        assert!((sol.value - oracle).abs() < 1e-9, "lp {} oracle {oracle}", sol.value);
        assert!((sol.value - 2.0).abs() < 1e-9);
        let greedy = greedy_reference(&mu, &nu).unwrap();
        assert!(sol.coupling.unwrap().total_variation(&greedy) < 1e-9);
    }

    #[test]
    fn optimizer_satisfies_the_constraints() {
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let pi = solve_primal(&mu, &nu, &CostSpec::ExpSum)
            .unwrap()
            .coupling
            .unwrap();
        let (m1, m2) = pi.marginals();
        assert!(m1.approx_eq(&mu, 1e-9, 1e-9));
        assert!(m2.approx_eq(&nu, 1e-9, 1e-9));
        assert!(pi.is_martingale(1e-9));
    }

    #[test]
    fn tabulated_costs_validate_their_grids() {
        assert!(CostSpec::tabulated(vec![0.0, 1.0], vec![0.0], vec![vec![1.0]]).is_err());
        assert!(CostSpec::tabulated(vec![0.0], vec![0.0], vec![vec![f64::NAN]]).is_err());
        let tab = CostSpec::tabulated(vec![0.0], vec![1.0], vec![vec![2.0]]).unwrap();
        assert_eq!(tab.eval(0.0, 1.0).unwrap(), 2.0);
        assert!(tab.eval(0.5, 1.0).is_err());
        // Solving with a mismatched tabulated cost surfaces the lookup error.
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-2.0, 0.5), (2.0, 0.5)]);
        assert!(solve_primal(&mu, &nu, &tab).is_err());
    }

    #[test]
    fn infeasible_reported_as_status() {
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = Measure::dirac(0.0);
        let sol = solve_primal(&mu, &nu, &CostSpec::XySquared).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(sol.coupling.is_none());
        assert!(solve_dual(&mu, &nu, &CostSpec::XySquared).is_err());
    }

    #[test]
    fn dual_certificate_properties() {
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        for cost in [CostSpec::XySquared, CostSpec::ExpSum] {
            let solved = solve_with_certificate(&mu, &nu, &cost).unwrap();
            let dual = solved.dual.unwrap();
            assert!((dual.value - solved.primal.value).abs() < 1e-8);
            assert!(dual.feasibility_gap(&mu, &nu, &cost).unwrap() <= 1e-9);
            let pi = solved.primal.coupling.unwrap();
            assert!(dual.support_gap(&mu, &nu, &pi, &cost).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn monotonicity_principle_examples() {
        let cost = CostSpec::XySquared;
        // Crossing fan: lambda = 1/2, g(s) = s, g(0) < g(1).
        let bad = [(0.0, -1.0), (0.0, 1.0), (1.0, 0.0)];
        let violations = verify_monotonicity_principle(&bad, &cost).unwrap();
        assert_eq!(violations.len(), 1);
        let v = violations[0];
        assert_eq!((v.x, v.x_prime, v.y_prime), (0.0, 1.0, 0.0));
        assert!((v.g_at_x - 0.0).abs() < 1e-12 && (v.g_at_x_prime - 1.0).abs() < 1e-12);

        // Mirrored pattern is out of scope (x' < x).
        let mirrored = [(0.0, -1.0), (0.0, 1.0), (-1.0, 0.0)];
        assert!(verify_monotonicity_principle(&mirrored, &cost)
            .unwrap()
            .is_empty());

        // Greedy supports pass.
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let greedy = greedy_reference(&mu, &nu).unwrap();
        assert!(verify_monotonicity_principle(&greedy.support(), &cost)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn uniqueness_cross_check_examples() {
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let same =
            uniqueness_cross_check(&mu, &nu, &CostSpec::XySquared, &CostSpec::XySquared).unwrap();
        assert!(same < 1e-12);
        let cross =
            uniqueness_cross_check(&mu, &nu, &CostSpec::XySquared, &CostSpec::ExpSum).unwrap();
        assert!(cross < 1e-8);
        // A right-monotone cost selects a genuinely different plan on an
        // asymmetric instance.
        let flipped =
            uniqueness_cross_check(&mu, &nu, &CostSpec::XySquared, &CostSpec::NegXySquared)
                .unwrap();
        assert!(flipped > 1e-3, "left vs right selection TV {flipped}");
    }

    #[test]
    fn reflection_duality() {
        // Optimizer for -x y^2 equals the reflected optimizer of x y^2 on
        // the reflected marginals. The target splits each source atom.
        let mu = measure(&[(-1.0, 0.25), (0.5, 0.75)]);
        let nu = measure(&[(-2.0, 0.125), (-0.5, 0.375), (0.0, 0.125), (1.5, 0.375)]);
        assert!(crate::measures::is_convex_order(&mu, &nu, 1e-9));
        let right = solve_primal(&mu, &nu, &CostSpec::NegXySquared)
            .unwrap()
            .coupling
            .unwrap();
        let left_reflected = solve_primal(&mu.reflect(), &nu.reflect(), &CostSpec::XySquared)
            .unwrap()
            .coupling
            .unwrap()
            .reflect();
        assert!(right.total_variation(&left_reflected) < 1e-9);
    }

    #[test]
    fn objective_shift_keeps_the_argmax() {
        // Adding a(x) + b(y) + h(x)(y - x) to the cost shifts every feasible
        // objective by the same constant, so the optimizer support stays.
        let mu = measure(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = measure(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let base: Vec<Vec<f64>> = mu
            .atoms()
            .iter()
            .map(|&x| nu.atoms().iter().map(|&y| x * y * y).collect())
            .collect();
        let shifted: Vec<Vec<f64>> = mu
            .atoms()
            .iter()
            .map(|&x| {
                nu.atoms()
                    .iter()
                    .map(|&y| {
                        x * y * y + (2.0 * x - 1.0) + (0.3 * y + 2.0) + (1.5 * x + 0.2) * (y - x)
                    })
                    .collect()
            })
            .collect();
        let c1 = CostSpec::tabulated(mu.atoms().to_vec(), nu.atoms().to_vec(), base).unwrap();
        let c2 = CostSpec::tabulated(mu.atoms().to_vec(), nu.atoms().to_vec(), shifted).unwrap();
        let p1 = solve_primal(&mu, &nu, &c1).unwrap().coupling.unwrap();
        let p2 = solve_primal(&mu, &nu, &c2).unwrap().coupling.unwrap();
        assert!(p1.total_variation(&p2) < 1e-9);
    }
}
