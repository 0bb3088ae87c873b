//! Closed-form `q` ranges for the Hilbert-type settings of each problem.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::bundles::qhat;
use super::feasible::{contains, hull, is_connected, Constraint, Lin, Piece, Rel, System};
use super::query::Problem;
use super::xrat::{Rational, XRat};
use crate::error::{Error, Result};

/// Range of admissible `q`. The pieces are kept in the reciprocal variable
/// `1/q` so that membership tests stay exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QRange {
    pub lower: XRat,
    pub lower_attained: bool,
    pub upper: XRat,
    pub upper_attained: bool,
    /// False if the admissible set has holes between `lower` and `upper`.
    pub connected: bool,
    #[serde(skip)]
    pieces: Vec<Piece>,
}

impl QRange {
    pub fn contains(&self, q: XRat) -> bool {
        match q.recip().ok().and_then(|r| r.finite()) {
            Some(x) if q >= XRat::int(1) => contains(&self.pieces, x),
            _ => false,
        }
    }
}

fn k(c: Rational) -> Lin {
    Lin::k(c)
}

/// `u = 1/q`, `v` a free auxiliary reciprocal index where needed.
fn range_of(sys: System) -> Option<QRange> {
    let pieces = sys.project_u();
    let (inf, inf_att, sup, sup_att) = hull(&pieces)?;
    Some(QRange {
        lower: XRat::from_recip(sup),
        lower_attained: sup_att,
        upper: XRat::from_recip(inf),
        upper_attained: inf_att,
        connected: is_connected(&pieces),
        pieces,
    })
}

/// Evaluates the closed-form range of `q` for the Hilbert settings (`m = n = 2`)
/// of `problem` in dimension `d` with parameter space `L^p`. Returns `None`
/// when the range is empty.
pub fn corollary_q_range(problem: Problem, d: i128, p: XRat) -> Result<Option<QRange>> {
    if !(1..=4).contains(&d) {
        return Err(Error::InvalidArgument(format!("d must be one of 1, 2, 3, 4, got {d}")));
    }
    if p < XRat::int(1) {
        return Err(Error::InvalidArgument(format!("p must lie in [1, inf], got {p}")));
    }
    let dd = Rational::from_integer(d);
    let one = Rational::one();
    let zero = Rational::zero();
    let half = Rational::new(1, 2);
    let p_r = p.recip()?.finite().expect("finite reciprocal");
    let ps_r = one - p_r;
    let unit = (zero, one);
    let pinned = (zero, zero);
    let q_le_2 = Constraint::new("1/q >= 1/2", Lin::u(one), Rel::Ge, k(half));
    let q_ge_pstar = Constraint::new("1/q <= 1/p*", Lin::u(one), Rel::Le, k(ps_r));
    let sys = match problem {
        Problem::CProb => System::new(
            vec![
                q_ge_pstar,
                Constraint::new("2 - d/2 ⪰ -d/p* + d/q", k(-(dd / 2) + 2), Rel::Succeq, Lin { c: -dd * ps_r, a: dd, b: zero }),
                q_le_2,
            ],
            unit,
            pinned,
        ),
        Problem::AProb => {
            if p <= XRat::int(d) {
                return Err(Error::InvalidArgument(format!("the diffusion range needs p > d, got p = {p}, d = {d}")));
            }
            System::new(
                vec![
                    q_ge_pstar,
                    Constraint::new("1 - d/2 ⪰ -d/p* + d/q", k(one - dd / 2), Rel::Succeq, Lin { c: -dd * ps_r, a: dd, b: zero }),
                    Constraint::new("-d/2 >= -d + d/p - 1", k(-dd / 2), Rel::Ge, k(-dd + dd * p_r - 1)),
                    q_le_2,
                ],
                unit,
                pinned,
            )
        }
        // v = 1/R with V ↪ W^{1,R}.
        Problem::LogProb => System::new(
            vec![
                Constraint::new("2 - d/2 ⪰ 1 - d + d/q + d/R", k(-(dd / 2) + 2), Rel::Succeq, Lin { c: one - dd, a: dd, b: dd }),
                Constraint::new("1/q <= 1 - 1/R", Lin::u(one), Rel::Le, Lin { c: one, a: zero, b: -one }),
                Constraint::new("2 - d/2 ⪰ 1 - d/R", k(-(dd / 2) + 2), Rel::Succeq, Lin { c: one, a: zero, b: -dd }),
                q_le_2,
            ],
            unit,
            unit,
        ),
        // v = 1/p̄ with H¹₀ ↪ L^p̄; the upper end is the largest such p̄.
        Problem::CubicProb => {
            let qbar = qhat(XRat::int(1), XRat::int(2), XRat::int(d))?;
            let qbar_r = qbar.sup.recip()?.finite().expect("finite reciprocal");
            let upper = if qbar.attained {
                Constraint::new("1/q >= 1/qbar", Lin::u(one), Rel::Ge, k(qbar_r))
            } else {
                Constraint::new("1/q > 1/qbar", Lin::u(one), Rel::Gt, k(qbar_r))
            };
            System::new(
                vec![
                    Constraint::new("1 - d/2 ⪰ -d + d/q + 2d/pbar", k(one - dd / 2), Rel::Succeq, Lin { c: -dd, a: dd, b: dd * 2 }),
                    Constraint::new("1/q <= 1 - 2/pbar", Lin::u(one), Rel::Le, Lin { c: one, a: zero, b: Rational::from_integer(-2) }),
                    Constraint::new("1 - d/2 ⪰ -d/pbar", k(one - dd / 2), Rel::Succeq, Lin::v(-dd)),
                    upper,
                ],
                unit,
                unit,
            )
        }
        Problem::NonlinearSource(_) => {
            return Err(Error::InvalidArgument("no closed-form q range for the general source bundles".into()))
        }
    };
    Ok(range_of(sys))
}
