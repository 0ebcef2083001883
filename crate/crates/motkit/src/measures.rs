//! Finitely supported probability measures on the real line.
//!
//! A [`Measure`] is a sorted list of atoms with positive weights summing to
//! one. Everything downstream (couplings, the greedy constructor, the LP)
//! assumes strict sortedness, so construction canonicalizes: near-duplicate
//! atoms are merged, zero weights dropped, and the total renormalized.
//!
//! Convex order between two measures is decided through their potential
//! functions `u_m(x) = ∫ |x - y| m(dy)`: with equal means, `mu` precedes `nu`
//! in convex order iff `u_mu <= u_nu` pointwise, and since both potentials
//! are piecewise linear with kinks only at atoms, checking the union of the
//! two atom sets is sufficient.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Atoms closer than this are merged during canonicalization.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Allowed deviation of the input weight total from one.
pub const MASS_TOL: f64 = 1e-12;

/// Default tolerance for convex-order checks (mean gap and potential gap).
pub const CONVEX_ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("measure must have at least one atom")]
    Empty,
    #[error("atoms and weights have different lengths ({atoms} vs {weights})")]
    LengthMismatch { atoms: usize, weights: usize },
    #[error("atoms and weights must be finite")]
    NonFinite,
    #[error("weights must be non-negative (found {0})")]
    NegativeWeight(f64),
    #[error("weights sum to {0}, expected 1 within 1e-12")]
    TotalMass(f64),
    #[error("quantile level {0} outside (0, 1]")]
    QuantileDomain(f64),
    #[error("invalid parametric family: {0}")]
    BadFamily(String),
}

/// A finitely supported probability measure: strictly increasing atoms with
/// positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl Measure {
    /// Builds a measure, canonicalizing the input: entries are sorted by
    /// position, atoms within [`ATOM_MERGE_TOL`] merged (mass-weighted
    /// position), zero weights dropped, and weights renormalized to sum to
    /// one. The raw total must already be within [`MASS_TOL`] of one.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if atoms.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                atoms: atoms.len(),
                weights: weights.len(),
            });
        }
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if atoms.iter().chain(weights.iter()).any(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite);
        }
        if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(MeasureError::NegativeWeight(w));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(MeasureError::TotalMass(total));
        }

        let mut pairs: Vec<(f64, f64)> = atoms
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if pairs.is_empty() {
            return Err(MeasureError::Empty);
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match merged.last_mut() {
                Some((mx, mw)) if (x - *mx).abs() <= ATOM_MERGE_TOL => {
                    // Mass-weighted position keeps the mean unchanged.
                    *mx = (*mx * *mw + x * w) / (*mw + w);
                    *mw += w;
                }
                _ => merged.push((x, w)),
            }
        }

        let (atoms, mut weights): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Measure { atoms, weights })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, MeasureError> {
        let (atoms, weights) = pairs.iter().copied().unzip();
        Self::new(atoms, weights)
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Measure {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    /// Two-point measure `(1 - p_hi) δ_lo + p_hi δ_hi`.
    pub fn two_point(lo: f64, hi: f64, p_hi: f64) -> Result<Self, MeasureError> {
        if !(0.0..=1.0).contains(&p_hi) {
            return Err(MeasureError::BadFamily(format!(
                "two-point weight {p_hi} outside [0, 1]"
            )));
        }
        Self::new(vec![lo, hi], vec![1.0 - p_hi, p_hi])
    }

    /// Equal-mass discretization of the uniform law on `[lo, hi]`: `n`
    /// quantile slices, each represented by its conditional mean (the slice
    /// midpoint).
    pub fn uniform_slices(lo: f64, hi: f64, n: usize) -> Result<Self, MeasureError> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi || n == 0 {
            return Err(MeasureError::BadFamily(format!(
                "uniform[{lo}, {hi}] with {n} slices"
            )));
        }
        let width = (hi - lo) / n as f64;
        let atoms = (0..n).map(|i| lo + (i as f64 + 0.5) * width).collect();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    /// Equal-mass discretization of the normal law: the representative of a
    /// quantile slice `(p_i, p_{i+1}]` is its exact conditional mean
    /// `mean + std * (pdf(z_i) - pdf(z_{i+1})) / (p_{i+1} - p_i)`, not the
    /// slice midpoint. The telescoping pdf differences keep the discretized
    /// mean equal to `mean`.
    pub fn gaussian_slices(mean: f64, std: f64, n: usize) -> Result<Self, MeasureError> {
        if !(mean.is_finite() && std.is_finite()) || std <= 0.0 || n == 0 {
            return Err(MeasureError::BadFamily(format!(
                "gaussian({mean}, {std}) with {n} slices"
            )));
        }
        let unit = Normal::new(0.0, 1.0).expect("standard normal");
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // pdf at the interior slice boundaries; the two tails contribute 0.
        let mut phi = Vec::with_capacity(n + 1);
        phi.push(0.0);
        for i in 1..n {
            phi.push(pdf(unit.inverse_cdf(i as f64 / n as f64)));
        }
        phi.push(0.0);
        let atoms = (0..n)
            .map(|i| mean + std * (phi[i] - phi[i + 1]) * n as f64)
            .collect();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// First moment `Σ wᵢ xᵢ`.
    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    /// Potential function `u(x) = Σ wᵢ |x - xᵢ|`: convex, piecewise linear
    /// with kinks exactly at the atoms, slope -1 left of the support and +1
    /// right of it.
    pub fn potential(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * (x - a).abs())
            .sum()
    }

    /// Left-continuous generalized inverse of the CDF at level `p ∈ (0, 1]`.
    pub fn quantile(&self, p: f64) -> Result<f64, MeasureError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(MeasureError::QuantileDomain(p));
        }
        let mut cum = 0.0;
        for (x, w) in self.atoms.iter().zip(&self.weights) {
            cum += w;
            if cum >= p {
                return Ok(*x);
            }
        }
        // Rounding left cum marginally below 1; the top quantile is the last atom.
        Ok(*self.atoms.last().expect("nonempty"))
    }

    /// Smallest and largest atom.
    pub fn hull(&self) -> (f64, f64) {
        (self.atoms[0], *self.atoms.last().expect("nonempty"))
    }

    /// Push-forward under `x ↦ -x`.
    pub fn reflect(&self) -> Self {
        let atoms = self.atoms.iter().rev().map(|x| -x).collect();
        let weights = self.weights.iter().rev().copied().collect();
        Measure { atoms, weights }
    }

    /// Atom-wise comparison: same length, positions within `pos_tol`, weights
    /// within `mass_tol`.
    pub fn approx_eq(&self, other: &Measure, pos_tol: f64, mass_tol: f64) -> bool {
        self.len() == other.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(a, b)| (a - b).abs() <= pos_tol)
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| (a - b).abs() <= mass_tol)
    }
}

/// Decides `mu ⪯ nu` in convex order: means within `tol` and
/// `u_mu(x) <= u_nu(x) + tol` at every atom of either measure. Both
/// potentials are piecewise linear with kinks only at atoms and agree at
/// infinity when the means agree, so the finite check is sufficient.
pub fn is_convex_order(mu: &Measure, nu: &Measure, tol: f64) -> bool {
    if (mu.mean() - nu.mean()).abs() > tol {
        return false;
    }
    mu.atoms
        .iter()
        .chain(nu.atoms.iter())
        .all(|&x| mu.potential(x) <= nu.potential(x) + tol)
}

/// Exact 1-Wasserstein distance `∫₀¹ |Q_a(p) - Q_b(p)| dp` between two step
/// quantile functions, by merging their jump levels.
pub fn wasserstein1(a: &Measure, b: &Measure) -> f64 {
    let mut total = 0.0;
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut cum, mut cum_a, mut cum_b) = (0.0f64, a.weights[0], b.weights[0]);
    loop {
        let next = cum_a.min(cum_b).min(1.0);
        total += (next - cum) * (a.atoms[ia] - b.atoms[ib]).abs();
        cum = next;
        if cum >= 1.0 - 1e-15 {
            return total;
        }
        if cum_a <= next + 1e-15 && ia + 1 < a.len() {
            ia += 1;
            cum_a += a.weights[ia];
        }
        if cum_b <= next + 1e-15 && ib + 1 < b.len() {
            ib += 1;
            cum_b += b.weights[ib];
        }
    }
}
