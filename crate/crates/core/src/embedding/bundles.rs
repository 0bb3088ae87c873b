//! Condition bundles for each problem class.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::feasible::{hull, Constraint, Lin, Rel, System};
use super::query::{IndexQuery, Ix, Problem, SourceCase};
use super::xrat::{Rational, XRat};
use crate::error::{Error, Result};

fn r(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

fn k(c: Rational) -> Lin {
    Lin::k(c)
}

fn unit() -> (Rational, Rational) {
    (Rational::zero(), Rational::one())
}

fn pinned() -> (Rational, Rational) {
    (Rational::zero(), Rational::zero())
}

fn max(a: Rational, b: Rational) -> Rational {
    if a >= b {
        a
    } else {
        b
    }
}

fn min(a: Rational, b: Rational) -> Rational {
    if a <= b {
        a
    } else {
        b
    }
}

/// One inequality evaluated at the reported point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    pub lhs: XRat,
    pub relation: String,
    pub rhs: XRat,
    pub holds: bool,
    /// Both sides are equal, so the strict/non-strict reading decides it.
    pub marginal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub problem: String,
    pub admissible: bool,
    pub failed_conditions: Vec<ConditionRecord>,
    pub conditions: Vec<ConditionRecord>,
    /// Auxiliary indices that make every condition hold (empty when the
    /// problem is inadmissible).
    pub witnesses: BTreeMap<String, String>,
    /// Whether the closed-form auxiliary choices alone satisfy the bundle.
    pub preferred_choice_feasible: bool,
    /// Some condition holds or fails only through strictness at equality.
    pub marginal: bool,
    pub notes: Vec<String>,
}

type WitnessFn = Box<dyn Fn(Rational, Rational) -> Vec<(String, String)>>;

/// Conditions sharing the same auxiliary unknowns `(u, v)`.
struct Group {
    system: System,
    preferred: (Rational, Rational),
    witnesses: WitnessFn,
}

impl Group {
    fn fixed(constraints: Vec<Constraint>) -> Self {
        Group {
            system: System::new(constraints, pinned(), pinned()),
            preferred: (Rational::zero(), Rational::zero()),
            witnesses: Box::new(|_, _| Vec::new()),
        }
    }
}

fn recip_str(x: Rational) -> String {
    XRat::from_recip(x).to_string()
}

fn evaluate(problem: &Problem, groups: Vec<Group>, mut notes: Vec<String>) -> Verdict {
    let mut conditions = Vec::new();
    let mut witnesses = BTreeMap::new();
    let mut admissible = true;
    let mut preferred_ok = true;
    for g in groups {
        let (u0, v0) = g.preferred;
        preferred_ok &= g.system.holds(u0, v0);
        let found = g.system.witness(g.preferred);
        admissible &= found.is_some();
        let (u, v) = found.unwrap_or(g.preferred);
        if found.is_some() {
            witnesses.extend((g.witnesses)(u, v));
        }
        for c in &g.system.constraints {
            let (l, rr) = (c.lhs.eval(u, v), c.rhs.eval(u, v));
            conditions.push(ConditionRecord {
                name: c.name.clone(),
                lhs: l.into(),
                relation: c.rel.symbol().to_string(),
                rhs: rr.into(),
                holds: c.rel.holds(l, rr),
                marginal: l == rr,
            });
        }
    }
    if !admissible {
        witnesses.clear();
    }
    if admissible && !preferred_ok {
        notes.push("closed-form auxiliary choice fails; another choice satisfies every condition".into());
    }
    let failed_conditions: Vec<_> = if admissible { Vec::new() } else { conditions.iter().filter(|c| !c.holds).cloned().collect() };
    Verdict {
        problem: problem.to_string(),
        admissible,
        marginal: conditions.iter().any(|c| c.marginal),
        failed_conditions,
        conditions,
        witnesses,
        preferred_choice_feasible: preferred_ok,
        notes,
    }
}

/// Largest admissible `q̂` for `W^{s,m} ↪ L^q̂` in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QHat {
    pub sup: XRat,
    /// False when every finite `q̂` works but `∞` does not.
    pub attained: bool,
}

fn qhat_constraint(ix: &Ix) -> Constraint {
    Constraint::new("s - d/m ⪰ -d/qhat", k(ix.s_excess()), Rel::Succeq, Lin::u(-ix.d))
}

pub fn qhat(s: XRat, m: XRat, d: XRat) -> Result<QHat> {
    let q = IndexQuery { s, m, d, ..IndexQuery::new(Problem::CProb, 1, XRat::int(1), XRat::int(1), s, XRat::zero()) };
    let ix = q.indices()?;
    let sys = System::new(vec![qhat_constraint(&ix)], unit(), pinned());
    let (inf, att, _, _) = hull(&sys.project_u()).expect("q̂ = 1 always satisfies the embedding");
    Ok(QHat { sup: XRat::from_recip(inf), attained: att })
}

/// Supremum of admissible `q̂`.
pub fn qhat_max(s: XRat, m: XRat, d: XRat) -> Result<XRat> {
    qhat(s, m, d).map(|q| q.sup)
}

/// `u = 1/q̂`: the embedding itself, `q ≤ q̂`, and any extra conditions on `q̂`.
fn qhat_group(ix: &Ix, extra: Vec<Constraint>) -> Group {
    let mut cs = vec![qhat_constraint(ix), Constraint::new("1/q >= 1/qhat", k(ix.q_r), Rel::Ge, Lin::u(Rational::one()))];
    cs.extend(extra);
    let sys = System::new(cs, unit(), pinned());
    let pref = match hull(&sys.project_u()) {
        Some((inf, true, _, _)) => inf,
        _ => ix.q_r,
    };
    Group {
        system: sys,
        preferred: (pref, Rational::zero()),
        witnesses: Box::new(|u, _| vec![("qhat".into(), recip_str(u))]),
    }
}

fn q_ge_pstar(ix: &Ix) -> Constraint {
    Constraint::new("1/q <= 1/p*", k(ix.q_r), Rel::Le, k(ix.ps_r))
}

pub fn check_cprob(q: &IndexQuery) -> Result<Verdict> {
    let ix = q.indices()?;
    let fixed = Group::fixed(vec![
        q_ge_pstar(&ix),
        Constraint::new("t - d/n ⪰ -d(1/p* - 1/q)", k(ix.t_excess()), Rel::Succeq, k(-ix.d * (ix.ps_r - ix.q_r))),
    ]);
    Ok(evaluate(&q.problem, vec![fixed, qhat_group(&ix, vec![])], vec![]))
}

pub fn check_aprob(q: &IndexQuery) -> Result<Verdict> {
    let ix = q.indices()?;
    let d = ix.d;
    let lhs2 = k(ix.t - 2 - d * ix.n_r);
    let mut cs = vec![
        q_ge_pstar(&ix),
        Constraint::new("t - 1 - d/n ⪰ -d(1/p* - 1/q)", k(ix.t - 1 - d * ix.n_r), Rel::Succeq, k(-d * (ix.ps_r - ix.q_r))),
    ];
    let dp = d * ix.p_r;
    let branch = if dp < Rational::one() {
        cs.push(Constraint::new("t - 2 - d/n ⪰ -d + d/q", lhs2, Rel::Succeq, k(-d + d * ix.q_r)));
        "p > d"
    } else if dp == Rational::one() {
        cs.push(Constraint::new("t - 2 - d/n > -d + d/q", lhs2, Rel::Gt, k(-d + d * ix.q_r)));
        cs.push(Constraint::new("1/q < 1", k(ix.q_r), Rel::Lt, k(Rational::one())));
        "p = d"
    } else {
        cs.push(Constraint::new("t - 2 - d/n ⪰ -d + d/p - 1 + d/q", lhs2, Rel::Succeq, k(-d + dp - 1 + d * ix.q_r)));
        "p < d"
    };
    Ok(evaluate(&q.problem, vec![Group::fixed(cs), qhat_group(&ix, vec![])], vec![format!("branch {branch}")]))
}

/// `γ+κ > 2`, or `γ+κ = 2` with `q = 1`.
fn high_growth(ix: &Ix) -> bool {
    let gk = ix.gamma + ix.kappa;
    gk > r(2, 1) || (gk == r(2, 1) && ix.q_r == Rational::one())
}

/// `1/r` for `r = max{1, q*(γ+κ)}`, with `q*·0 = 0`.
fn moderate_r_recip(ix: &Ix) -> Rational {
    let gk = ix.gamma + ix.kappa;
    if gk.is_zero() {
        Rational::one()
    } else {
        min(Rational::one(), ix.qs_r / gk)
    }
}

/// Growth conditions with the auxiliary exponents eliminated.
fn case_a_groups(ix: &Ix) -> (Vec<Group>, Vec<String>) {
    let d = ix.d;
    let s_gt_qhat = Constraint::new("s > d/m - d/qhat", k(ix.s), Rel::Gt, Lin { c: d * ix.m_r, a: -d, b: Rational::zero() });
    let gk = ix.gamma + ix.kappa;
    let (fixed, wit, note) = if high_growth(ix) {
        let fixed = vec![
            Constraint::new("t > d/n - d/q*", k(ix.t), Rel::Gt, k(d * ix.n_r - d * ix.qs_r)),
            Constraint::new(
                "s > t + d + max{0, d/m - d/n}",
                k(ix.s),
                Rel::Gt,
                k(ix.t + d + max(Rational::zero(), d * ix.m_r - d * ix.n_r)),
            ),
        ];
        let wit = vec![("r".to_string(), "inf".to_string()), ("s_tilde".to_string(), format!("> {}", XRat::from(d / 2)))];
        (fixed, wit, "growth branch gamma+kappa > 2 (or = 2 with q = 1)")
    } else {
        let rr = moderate_r_recip(ix);
        let fixed = vec![
            Constraint::new(
                "t > d/n + min{0, -d/q* + d(gamma+kappa)}",
                k(ix.t),
                Rel::Gt,
                k(d * ix.n_r + min(Rational::zero(), -d * ix.qs_r + d * gk)),
            ),
            Constraint::new("s > t + max{0, d - 2d/r}", k(ix.s), Rel::Gt, k(ix.t + max(Rational::zero(), d - d * rr * 2))),
        ];
        let wit = vec![
            ("r".to_string(), recip_str(rr)),
            ("s_tilde".to_string(), XRat::from(max(Rational::zero(), d / 2 - d * rr)).to_string()),
        ];
        (fixed, wit, "growth branch gamma+kappa < 2 (or = 2 with q > 1)")
    };
    let mut fixed = Group::fixed(fixed);
    fixed.witnesses = Box::new(move |_, _| wit.clone());
    (vec![fixed, qhat_group(ix, vec![s_gt_qhat])], vec![note.to_string()])
}

/// Gradient terms with `ϱ = 2`, `R = ∞` inserted.
fn grad_group(ix: &Ix) -> Group {
    let d = ix.d;
    let te = ix.t_excess();
    let base = ix.t + 2 + max(r(2, 1), d);
    let mut g = Group::fixed(vec![
        Constraint::new("t > d/n", k(ix.t), Rel::Gt, k(d * ix.n_r)),
        Constraint::new("t - d/n ⪰ 1 - d/q*", k(te), Rel::Succeq, k(Rational::one() - d * ix.qs_r)),
        Constraint::new("s ⪰ t + 2 + max{2,d} + d/m - d/n", k(ix.s), Rel::Succeq, k(base + d * ix.m_r - d * ix.n_r)),
        Constraint::new("s >= t + 2 + max{2,d}", k(ix.s), Rel::Ge, k(base)),
    ]);
    let s_check = format!("> {}", XRat::from(d / 2));
    g.witnesses = Box::new(move |_, _| {
        vec![
            ("rho".into(), "2".into()),
            ("R".into(), "inf".into()),
            ("s_hat".into(), "0".into()),
            ("s_check".into(), s_check.clone()),
        ]
    });
    g
}

/// `u = 1/r`: `γ+κ ≤ r/q*` and the `t` condition on the `L^r` bound.
fn phi_group(ix: &Ix) -> Group {
    let d = ix.d;
    let gk = ix.gamma + ix.kappa;
    let sys = System::new(
        vec![
            Constraint::new("(gamma+kappa)/r <= 1/q*", Lin::u(gk), Rel::Le, k(ix.qs_r)),
            Constraint::new(
                "t - d/n ⪰ -d/q* + d(gamma+kappa)/r",
                k(ix.t_excess()),
                Rel::Succeq,
                Lin { c: -d * ix.qs_r, a: d * gk, b: Rational::zero() },
            ),
        ],
        unit(),
        pinned(),
    );
    let pref = if high_growth(ix) { Rational::zero() } else { moderate_r_recip(ix) };
    Group { system: sys, preferred: (pref, Rational::zero()), witnesses: Box::new(|u, _| vec![("r".into(), recip_str(u))]) }
}

/// `u = 1/ϱ`, `v = 1/R` for the gradient nonlinearity bounds.
fn psi_group(ix: &Ix, extra: Vec<Constraint>) -> Group {
    let d = ix.d;
    let gh = ix.gamma_hat;
    let te = k(ix.t_excess());
    let mut cs = vec![
        Constraint::new(
            "t - d/n ⪰ 1 - d/q* + d(gamma_hat+1)/R",
            te,
            Rel::Succeq,
            Lin { c: Rational::one() - d * ix.qs_r, a: Rational::zero(), b: d * (gh + 1) },
        ),
        Constraint::new("t - d/n ⪰ -d/2 + d/rho + d*gamma_hat/R", te, Rel::Succeq, Lin { c: -d / 2, a: d, b: d * gh }),
        Constraint::new("(gamma_hat+1)/R <= 1/q*", Lin::v(gh + 1), Rel::Le, k(ix.qs_r)),
        Constraint::new("1/rho <= 1/2", Lin::u(Rational::one()), Rel::Le, k(r(1, 2))),
        Constraint::new("2*gamma_hat/R <= 1 - 2/rho", Lin::v(gh * 2), Rel::Le, Lin { c: Rational::one(), a: r(-2, 1), b: Rational::zero() }),
    ];
    cs.extend(extra);
    Group {
        system: System::new(cs, unit(), unit()),
        preferred: (r(1, 2), Rational::zero()),
        witnesses: Box::new(|u, v| vec![("rho".into(), recip_str(u)), ("R".into(), recip_str(v))]),
    }
}

fn require_unit_kappa_hat(ix: &Ix) -> Result<()> {
    if ix.kappa_hat != Rational::one() {
        return Err(Error::MalformedQuery(format!(
            "gradient bundles assume kappa_hat = 1, got {}",
            XRat::from(ix.kappa_hat)
        )));
    }
    Ok(())
}

pub fn check_nonlinear_source(q: &IndexQuery) -> Result<Verdict> {
    let ix = q.indices()?;
    let case = match q.problem {
        Problem::NonlinearSource(c) => c,
        other => return Err(Error::MalformedQuery(format!("{other} is not a nonlinear source query"))),
    };
    let (groups, notes) = match case {
        SourceCase::A => case_a_groups(&ix),
        SourceCase::B => {
            require_unit_kappa_hat(&ix)?;
            let (mut g, n) = case_a_groups(&ix);
            g.push(grad_group(&ix));
            (g, n)
        }
        SourceCase::C => (vec![phi_group(&ix), qhat_group(&ix, vec![])], vec![]),
        SourceCase::D => {
            require_unit_kappa_hat(&ix)?;
            (vec![phi_group(&ix), psi_group(&ix, vec![]), qhat_group(&ix, vec![])], vec![])
        }
    };
    Ok(evaluate(&q.problem, groups, notes))
}

/// Exponential nonlinearity: the gradient bundle with vanishing growth
/// exponents plus `V ↪ W^{1,R}`.
pub fn check_log(q: &IndexQuery) -> Result<Verdict> {
    let mut ix = q.indices()?;
    ix.gamma = Rational::zero();
    ix.kappa = Rational::zero();
    ix.gamma_hat = Rational::zero();
    let embed = Constraint::new("s - d/m ⪰ 1 - d/R", k(ix.s_excess()), Rel::Succeq, Lin { c: Rational::one(), a: Rational::zero(), b: -ix.d });
    let groups = vec![phi_group(&ix), psi_group(&ix, vec![embed]), qhat_group(&ix, vec![])];
    Ok(evaluate(&q.problem, groups, vec![]))
}

/// Cubic source: the `L^r` bundle with `r = q̂`, one shared unknown.
pub fn check_cubic(q: &IndexQuery) -> Result<Verdict> {
    let ix = q.indices()?;
    let mut phi = phi_group(&ix);
    let qh = qhat_group(&ix, vec![]);
    phi.system.constraints.extend(qh.system.constraints);
    phi.preferred = qh.preferred;
    phi.witnesses = Box::new(|u, _| {
        let v = recip_str(u);
        vec![("r".into(), v.clone()), ("qhat".into(), v)]
    });
    Ok(evaluate(&q.problem, vec![phi], vec![]))
}

/// Dispatches on the query's problem class.
pub fn check(q: &IndexQuery) -> Result<Verdict> {
    match q.problem {
        Problem::CProb => check_cprob(q),
        Problem::AProb => check_aprob(q),
        Problem::NonlinearSource(_) => check_nonlinear_source(q),
        Problem::LogProb => check_log(q),
        Problem::CubicProb => check_cubic(q),
    }
}
