//! Probabilities stored by their smaller tail.
//!
//! A CDF value close to 1 loses almost all of its significant digits when
//! stored as `u`; storing `1 - u` instead keeps the upper tail as precise as
//! the lower one. The transform carries [`Tail`] values between the forward
//! CDF and the inverse CDF so that pass-through stays exact far into both
//! tails.

use core::cmp::Ordering;

/// A probability `u` in `[0, 1]`, represented by the mass of its nearer tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// `u = p`, with `p <= 0.5`.
    Lower(f64),
    /// `u = 1 - q`, with `q < 0.5`.
    Upper(f64),
}

impl Tail {
    /// Builds a tail from accurately computed lower (`u`) and upper (`1 - u`)
    /// masses, keeping whichever is smaller.
    pub fn from_masses(lower: f64, upper: f64) -> Self {
        if lower <= upper {
            Tail::Lower(lower)
        } else {
            Tail::Upper(upper)
        }
    }

    pub fn from_value(u: f64) -> Self {
        if u <= 0.5 {
            Tail::Lower(u)
        } else {
            Tail::Upper(1.0 - u)
        }
    }

    /// The plain probability `u`.
    pub fn value(self) -> f64 {
        match self {
            Tail::Lower(p) => p,
            Tail::Upper(q) => 1.0 - q,
        }
    }

    /// Mass of the nearer tail, `min(u, 1 - u)`.
    pub fn mass(self) -> f64 {
        match self {
            Tail::Lower(p) | Tail::Upper(p) => p,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Tail::Upper(_))
    }

    /// Clamps `u` to `[eps, 1 - eps]`. The flag is set when clamping changed
    /// the value.
    pub fn clamp(self, eps: f64) -> (Self, bool) {
        match self {
            Tail::Lower(p) if p.is_nan() || p < eps => (Tail::Lower(eps), true),
            Tail::Upper(q) if q.is_nan() || q < eps => (Tail::Upper(eps), true),
            t => (t, false),
        }
    }

    /// Orders two probabilities by `u`, comparing upper tails by their
    /// complementary masses so no precision is lost near 1.
    pub fn cmp_value(self, other: Tail) -> Ordering {
        match (self, other) {
            (Tail::Lower(a), Tail::Lower(b)) => a.total_cmp(&b),
            (Tail::Upper(a), Tail::Upper(b)) => b.total_cmp(&a),
            (Tail::Lower(a), Tail::Upper(b)) => {
                if a == 0.5 && b == 0.5 {
                    Ordering::Equal
                } else {
                    Ordering::Less
                }
            }
            (Tail::Upper(a), Tail::Lower(b)) => {
                if a == 0.5 && b == 0.5 {
                    Ordering::Equal
                } else {
                    Ordering::Greater
                }
            }
        }
    }
}
