//! Joint measures on the plane: marginal/martingale checks, conditional
//! kernels, and the left-monotone support test.
//!
//! A coupling is stored as its support entries `(x, y, w)` sorted
//! lexicographically. The support is left-monotone when no configuration
//! `(x, y0), (x, y1), (x', y')` with `x < x'` places `y'` strictly inside
//! the open interval `(y0, y1)`; endpoint coincidences do not count.

use crate::measures::{Measure, MeasureError};
use thiserror::Error;

/// Coordinates closer than this are treated as equal when grouping and when
/// testing the strict interval condition.
pub const COORD_TOL: f64 = 1e-12;

/// Allowed deviation of the total mass from one.
pub const COUPLING_MASS_TOL: f64 = 1e-10;

/// Entries below this are stripped before support-based tests; simplex
/// degeneracy leaves dust at roughly machine precision.
pub const MASS_FLOOR: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("coupling must have at least one entry")]
    Empty,
    #[error("coupling entries must be finite")]
    NonFinite,
    #[error("entry masses must be non-negative (found {0})")]
    NegativeMass(f64),
    #[error("masses sum to {0}, expected 1 within 1e-10")]
    TotalMass(f64),
    #[error("x = {0} is not in the first marginal support")]
    NotInSupport(f64),
    #[error("mixture weight {0} outside [0, 1]")]
    BadMixtureWeight(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// One support point with its mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

/// Conditional law of the second coordinate given the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub x: f64,
    pub targets: Measure,
}

/// A triple of support points violating left-monotonicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeftMonotoneViolation {
    pub x: f64,
    pub y0: f64,
    pub y1: f64,
    pub x_prime: f64,
    pub y_prime: f64,
}

/// Finitely supported joint probability measure on `ℝ × ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    entries: Vec<Entry>,
}

impl Coupling {
    /// Builds a coupling from `(x, y, mass)` triples: entries are sorted,
    /// duplicates (within [`COORD_TOL`] in both coordinates) merged, zero
    /// masses dropped. The total mass must be one within
    /// [`COUPLING_MASS_TOL`].
    pub fn new(entries: Vec<(f64, f64, f64)>) -> Result<Self, CouplingError> {
        if entries
            .iter()
            .any(|&(x, y, w)| !(x.is_finite() && y.is_finite() && w.is_finite()))
        {
            return Err(CouplingError::NonFinite);
        }
        if let Some(&(_, _, w)) = entries.iter().find(|&&(_, _, w)| w < 0.0) {
            return Err(CouplingError::NegativeMass(w));
        }
        let total: f64 = entries.iter().map(|e| e.2).sum();
        if (total - 1.0).abs() > COUPLING_MASS_TOL {
            return Err(CouplingError::TotalMass(total));
        }
        let mut entries: Vec<Entry> = entries
            .into_iter()
            .filter(|&(_, _, w)| w > 0.0)
            .map(|(x, y, w)| Entry { x, y, w })
            .collect();
        if entries.is_empty() {
            return Err(CouplingError::Empty);
        }
        entries.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        let mut merged: Vec<Entry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(m) if (e.x - m.x).abs() <= COORD_TOL && (e.y - m.y).abs() <= COORD_TOL => {
                    m.w += e.w;
                }
                _ => merged.push(e),
            }
        }
        Ok(Coupling { entries: merged })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.w).sum()
    }

    /// Support as a plain point set.
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.x, e.y)).collect()
    }

    /// Groups of entries sharing the same first coordinate (within
    /// [`COORD_TOL`]), in increasing x order. Each group is a contiguous
    /// slice of the sorted entry list.
    fn x_groups(&self) -> Vec<&[Entry]> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.entries.len() {
            if i == self.entries.len()
                || (self.entries[i].x - self.entries[start].x).abs() > COORD_TOL
            {
                groups.push(&self.entries[start..i]);
                start = i;
            }
        }
        groups
    }

    /// First and second coordinate push-forwards, canonicalized.
    pub fn marginals(&self) -> (Measure, Measure) {
        let total = self.total_mass();
        let first = Measure::new(
            self.entries.iter().map(|e| e.x).collect(),
            self.entries.iter().map(|e| e.w / total).collect(),
        )
        .expect("first marginal of a valid coupling");
        let second = Measure::new(
            self.entries.iter().map(|e| e.y).collect(),
            self.entries.iter().map(|e| e.w / total).collect(),
        )
        .expect("second marginal of a valid coupling");
        (first, second)
    }

    /// True iff every conditional barycenter matches the conditioning point:
    /// `|Σ_y w(x,y) y / Σ_y w(x,y) - x| <= tol` for each distinct `x`.
    pub fn is_martingale(&self, tol: f64) -> bool {
        self.martingale_defect() <= tol
    }

    /// Largest conditional barycenter deviation over the first marginal.
    pub fn martingale_defect(&self) -> f64 {
        self.x_groups()
            .iter()
            .map(|g| {
                let mass: f64 = g.iter().map(|e| e.w).sum();
                let bary: f64 = g.iter().map(|e| e.w * e.y).sum::<f64>() / mass;
                (bary - g[0].x).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Normalized conditional law of the second coordinate given `x`.
    pub fn kernel_at(&self, x: f64) -> Result<Kernel, CouplingError> {
        let group = self
            .x_groups()
            .into_iter()
            .find(|g| (g[0].x - x).abs() <= COORD_TOL)
            .ok_or(CouplingError::NotInSupport(x))?;
        let mass: f64 = group.iter().map(|e| e.w).sum();
        let targets = Measure::new(
            group.iter().map(|e| e.y).collect(),
            group.iter().map(|e| e.w / mass).collect(),
        )?;
        Ok(Kernel {
            x: group[0].x,
            targets,
        })
    }

    /// All conditional kernels in increasing x order.
    pub fn kernels(&self) -> Result<Vec<Kernel>, CouplingError> {
        self.x_groups()
            .into_iter()
            .map(|group| {
                let mass: f64 = group.iter().map(|e| e.w).sum();
                let targets = Measure::new(
                    group.iter().map(|e| e.y).collect(),
                    group.iter().map(|e| e.w / mass).collect(),
                )?;
                Ok(Kernel {
                    x: group[0].x,
                    targets,
                })
            })
            .collect()
    }

    /// Exhaustive search for a configuration `(x, y0), (x, y1), (x', y')`
    /// with `x < x'` and `y0 < y' < y1` strictly (open interval; endpoint
    /// coincidences within [`COORD_TOL`] are not violations). Returns the
    /// lexicographically smallest violating tuple, or `None`.
    ///
    /// The scan groups entries by x and tests each later point against the
    /// group envelope: `y'` lies strictly inside some pair interval of a
    /// group iff it lies strictly inside the group's min/max envelope.
    pub fn find_left_monotone_violation(&self) -> Option<LeftMonotoneViolation> {
        let groups = self.x_groups();
        for (gi, group) in groups.iter().enumerate() {
            let x = group[0].x;
            let lo = group.first().map(|e| e.y).unwrap();
            let hi = group.last().map(|e| e.y).unwrap();
            if hi - lo <= 2.0 * COORD_TOL {
                continue;
            }
            // Smallest y1 for which some later (x', y') falls strictly
            // inside (lo, y1); y0 = lo is always admissible.
            for y1 in group.iter().map(|e| e.y) {
                if y1 - lo <= 2.0 * COORD_TOL {
                    continue;
                }
                let hit = groups[gi + 1..]
                    .iter()
                    .flat_map(|g| g.iter())
                    .filter(|e| e.x - x > COORD_TOL)
                    .find(|e| e.y > lo + COORD_TOL && e.y < y1 - COORD_TOL);
                if let Some(e) = hit {
                    return Some(LeftMonotoneViolation {
                        x,
                        y0: lo,
                        y1,
                        x_prime: e.x,
                        y_prime: e.y,
                    });
                }
            }
        }
        None
    }

    /// Entry-wise convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Coupling, lambda: f64) -> Result<Coupling, CouplingError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(CouplingError::BadMixtureWeight(lambda));
        }
        let mut entries: Vec<(f64, f64, f64)> = self
            .entries
            .iter()
            .map(|e| (e.x, e.y, lambda * e.w))
            .collect();
        entries.extend(other.entries.iter().map(|e| (e.x, e.y, (1.0 - lambda) * e.w)));
        Coupling::new(entries)
    }

    /// Drops entries with mass at or below `floor` (degenerate-basis dust).
    pub fn clean(&self, floor: f64) -> Result<Coupling, CouplingError> {
        Coupling::new(
            self.entries
                .iter()
                .filter(|e| e.w > floor)
                .map(|e| (e.x, e.y, e.w))
                .collect(),
        )
    }

    /// Total-variation distance `sup_A |π₁(A) - π₂(A)| = ½ Σ |w₁ - w₂|`,
    /// matching entries by coordinates within [`COORD_TOL`].
    pub fn total_variation(&self, other: &Coupling) -> f64 {
        let (mut i, mut j) = (0usize, 0usize);
        let mut sum = 0.0;
        let cmp = |a: &Entry, b: &Entry| -> std::cmp::Ordering {
            if (a.x - b.x).abs() <= COORD_TOL && (a.y - b.y).abs() <= COORD_TOL {
                std::cmp::Ordering::Equal
            } else {
                a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
            }
        };
        while i < self.entries.len() && j < other.entries.len() {
            match cmp(&self.entries[i], &other.entries[j]) {
                std::cmp::Ordering::Equal => {
                    sum += (self.entries[i].w - other.entries[j].w).abs();
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    sum += self.entries[i].w;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    sum += other.entries[j].w;
                    j += 1;
                }
            }
        }
        sum += self.entries[i..].iter().map(|e| e.w).sum::<f64>();
        sum += other.entries[j..].iter().map(|e| e.w).sum::<f64>();
        0.5 * sum
    }

    /// Expectation `Σ w f(x, y)`.
    pub fn expectation(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.entries.iter().map(|e| e.w * f(e.x, e.y)).sum()
    }

    /// Push-forward under `(x, y) ↦ (-x, -y)`; exchanges left- and
    /// right-monotone structure.
    pub fn reflect(&self) -> Coupling {
        Coupling::new(
            self.entries
                .iter()
                .rev()
                .map(|e| (-e.x, -e.y, e.w))
                .collect(),
        )
        .expect("reflection preserves validity")
    }
}
