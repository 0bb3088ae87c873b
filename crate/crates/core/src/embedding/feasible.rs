//! Exact feasibility for affine inequality systems in at most two variables.
//!
//! Every index condition becomes affine once indices are replaced by their
//! reciprocals, so the truth value of a system only changes on the
//! arrangement of its boundary lines. Testing every vertex, every line root and
//! one point in each gap between them is therefore a complete search.

use num_traits::Zero;

use super::xrat::{succeq, Rational, XRat};

/// `c + a·u + b·v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lin {
    pub c: Rational,
    pub a: Rational,
    pub b: Rational,
}

impl Lin {
    pub fn k(c: Rational) -> Self {
        Lin { c, a: Rational::zero(), b: Rational::zero() }
    }

    pub fn u(a: Rational) -> Self {
        Lin { c: Rational::zero(), a, b: Rational::zero() }
    }

    pub fn v(b: Rational) -> Self {
        Lin { c: Rational::zero(), a: Rational::zero(), b }
    }

    pub fn plus(self, o: Lin) -> Lin {
        Lin { c: self.c + o.c, a: self.a + o.a, b: self.b + o.b }
    }

    pub fn minus(self, o: Lin) -> Lin {
        Lin { c: self.c - o.c, a: self.a - o.a, b: self.b - o.b }
    }

    pub fn eval(&self, u: Rational, v: Rational) -> Rational {
        self.c + self.a * u + self.b * v
    }

    fn is_zero(&self) -> bool {
        self.c.is_zero() && self.a.is_zero() && self.b.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Succeq,
    Ge,
    Gt,
    Le,
    Lt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Succeq => "⪰",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Le => "<=",
            Rel::Lt => "<",
        }
    }

    pub fn holds(self, l: Rational, r: Rational) -> bool {
        match self {
            Rel::Succeq => succeq(XRat::Finite(l), XRat::Finite(r)),
            Rel::Ge => l >= r,
            Rel::Gt => l > r,
            Rel::Le => l <= r,
            Rel::Lt => l < r,
        }
    }

    /// True when equality of both sides makes the condition fail.
    pub fn strict_at(self, r: Rational) -> bool {
        match self {
            Rel::Succeq => r.is_zero(),
            Rel::Gt | Rel::Lt => true,
            Rel::Ge | Rel::Le => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub lhs: Lin,
    pub rel: Rel,
    pub rhs: Lin,
}

impl Constraint {
    pub fn new(name: impl Into<String>, lhs: Lin, rel: Rel, rhs: Lin) -> Self {
        Constraint { name: name.into(), lhs, rel, rhs }
    }

    pub fn holds(&self, u: Rational, v: Rational) -> bool {
        self.rel.holds(self.lhs.eval(u, v), self.rhs.eval(u, v))
    }

    /// Affine functions whose signs determine the truth value.
    fn boundaries(&self) -> Vec<Lin> {
        let mut out = vec![self.lhs.minus(self.rhs)];
        if self.rel == Rel::Succeq {
            out.push(self.rhs);
        }
        out
    }
}

/// A piece of a one-dimensional feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Point(Rational),
    Open(Rational, Rational),
}

/// Feasibility problem over the box `u ∈ [u0,u1]`, `v ∈ [v0,v1]`.
#[derive(Debug, Clone)]
pub struct System {
    pub constraints: Vec<Constraint>,
    pub u_box: (Rational, Rational),
    pub v_box: (Rational, Rational),
}

fn half() -> Rational {
    Rational::new(1, 2)
}

/// Sorted unique candidates in `[lo, hi]` plus the midpoints between them.
fn with_midpoints(mut pts: Vec<Rational>, lo: Rational, hi: Rational) -> Vec<Rational> {
    pts.push(lo);
    pts.push(hi);
    pts.retain(|p| *p >= lo && *p <= hi);
    pts.sort();
    pts.dedup();
    let mut out = Vec::with_capacity(2 * pts.len());
    for w in pts.windows(2) {
        out.push(w[0]);
        out.push((w[0] + w[1]) * half());
    }
    out.extend(pts.last().copied());
    out
}

impl System {
    pub fn new(constraints: Vec<Constraint>, u_box: (Rational, Rational), v_box: (Rational, Rational)) -> Self {
        System { constraints, u_box, v_box }
    }

    pub fn holds(&self, u: Rational, v: Rational) -> bool {
        self.constraints.iter().all(|c| c.holds(u, v))
    }

    fn boundaries(&self) -> Vec<Lin> {
        let mut out: Vec<Lin> = self.constraints.iter().flat_map(|c| c.boundaries()).filter(|l| !l.is_zero()).collect();
        let one = Rational::from_integer(1);
        out.push(Lin { c: -self.v_box.0, a: Rational::zero(), b: one });
        out.push(Lin { c: -self.v_box.1, a: Rational::zero(), b: one });
        out
    }

    /// Candidate `v` values for fixed `u`, preferred value first.
    fn v_candidates(&self, u: Rational, pref: Rational) -> Vec<Rational> {
        let roots = self
            .boundaries()
            .iter()
            .filter(|l| !l.b.is_zero())
            .map(|l| -(l.c + l.a * u) / l.b)
            .collect();
        let mut out = vec![pref];
        out.extend(with_midpoints(roots, self.v_box.0, self.v_box.1));
        out
    }

    /// A feasible `v` at fixed `u`, trying `pref` first.
    pub fn solve_v(&self, u: Rational, pref: Rational) -> Option<Rational> {
        self.v_candidates(u, pref).into_iter().find(|v| *v >= self.v_box.0 && *v <= self.v_box.1 && self.holds(u, *v))
    }

    /// Values of `u` at which the structure of the `v`-problem can change.
    fn u_breakpoints(&self) -> Vec<Rational> {
        let bs = self.boundaries();
        let mut pts = Vec::new();
        for l in &bs {
            if l.b.is_zero() && !l.a.is_zero() {
                pts.push(-l.c / l.a);
            }
        }
        for (i, l1) in bs.iter().enumerate() {
            for l2 in &bs[i + 1..] {
                if l1.b.is_zero() || l2.b.is_zero() {
                    continue;
                }
                let den = l1.a * l2.b - l2.a * l1.b;
                if !den.is_zero() {
                    pts.push((l2.c * l1.b - l1.c * l2.b) / den);
                }
            }
        }
        pts
    }

    fn u_candidates(&self) -> Vec<Rational> {
        with_midpoints(self.u_breakpoints(), self.u_box.0, self.u_box.1)
    }

    /// A feasible point, trying `pref` first and then the candidate grid in
    /// ascending order.
    pub fn witness(&self, pref: (Rational, Rational)) -> Option<(Rational, Rational)> {
        if self.in_box(pref) && self.holds(pref.0, pref.1) {
            return Some(pref);
        }
        if let Some(v) = self.solve_v(pref.0, pref.1).filter(|_| self.in_u_box(pref.0)) {
            return Some((pref.0, v));
        }
        self.u_candidates().into_iter().find_map(|u| self.solve_v(u, pref.1).map(|v| (u, v)))
    }

    fn in_u_box(&self, u: Rational) -> bool {
        u >= self.u_box.0 && u <= self.u_box.1
    }

    fn in_box(&self, p: (Rational, Rational)) -> bool {
        self.in_u_box(p.0) && p.1 >= self.v_box.0 && p.1 <= self.v_box.1
    }

    /// Exact projection of the feasible set onto the `u` axis.
    pub fn project_u(&self) -> Vec<Piece> {
        let mut pts = self.u_breakpoints();
        pts.push(self.u_box.0);
        pts.push(self.u_box.1);
        pts.retain(|p| self.in_u_box(*p));
        pts.sort();
        pts.dedup();
        let ok = |u: Rational| self.solve_v(u, self.v_box.0).is_some();
        let mut pieces = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            if ok(*p) {
                pieces.push(Piece::Point(*p));
            }
            if let Some(q) = pts.get(i + 1) {
                if ok((*p + *q) * half()) {
                    pieces.push(Piece::Open(*p, *q));
                }
            }
        }
        pieces
    }
}

/// Hull of a union of pieces: `(inf, inf attained, sup, sup attained)`.
pub fn hull(pieces: &[Piece]) -> Option<(Rational, bool, Rational, bool)> {
    let lo = pieces.first()?;
    let hi = pieces.last()?;
    let (inf, inf_att) = match lo {
        Piece::Point(p) => (*p, true),
        Piece::Open(a, _) => (*a, false),
    };
    let (sup, sup_att) = match hi {
        Piece::Point(p) => (*p, true),
        Piece::Open(_, b) => (*b, false),
    };
    Some((inf, inf_att, sup, sup_att))
}

/// Whether the pieces (sorted, as produced by [`System::project_u`]) cover
/// one connected interval.
pub fn is_connected(pieces: &[Piece]) -> bool {
    pieces.windows(2).all(|w| match (w[0], w[1]) {
        (Piece::Point(p), Piece::Open(a, _)) => p == a,
        (Piece::Open(_, b), Piece::Point(p)) => b == p,
        _ => false,
    })
}

pub fn contains(pieces: &[Piece], x: Rational) -> bool {
    pieces.iter().any(|p| match p {
        Piece::Point(q) => *q == x,
        Piece::Open(a, b) => *a < x && x < *b,
    })
}
