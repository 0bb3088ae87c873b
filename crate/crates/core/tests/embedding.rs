use parcone::embedding::{
    check, check_aprob, check_cprob, check_cubic, check_log, check_nonlinear_source, corollary_q_range, dual_index, qhat_max,
    succeq, IndexQuery, Problem, SourceCase, XRat,
};
use proptest::prelude::*;

fn x(s: &str) -> XRat {
    s.parse().unwrap()
}

fn query(problem: Problem, d: i128, p: &str, q: &str, s: &str, t: &str) -> IndexQuery {
    IndexQuery::new(problem, d, x(p), x(q), x(s), x(t))
}

fn failed(v: &parcone::embedding::Verdict) -> Vec<&str> {
    v.failed_conditions.iter().map(|c| c.name.as_str()).collect()
}

#[test]
fn succeq_examples() {
    assert!(succeq(x("1/2"), x("0")));
    assert!(!succeq(x("0"), x("0")));
    assert!(succeq(x("-1"), x("-1")));
}

#[test]
fn dual_index_examples() {
    assert_eq!(dual_index(x("2")).unwrap(), x("2"));
    assert_eq!(dual_index(x("1")).unwrap(), XRat::PosInf);
    assert_eq!(dual_index(x("4")).unwrap(), x("4/3"));
}

#[test]
fn qhat_examples() {
    assert_eq!(qhat_max(x("0"), x("2"), x("3")).unwrap(), x("2"));
    assert_eq!(qhat_max(x("1"), x("2"), x("3")).unwrap(), x("6"));
    assert_eq!(qhat_max(x("2"), x("2"), x("3")).unwrap(), XRat::PosInf);
}

#[test]
fn cprob_examples() {
    let v = check_cprob(&query(Problem::CProb, 3, "2", "2", "0", "2")).unwrap();
    assert!(v.admissible, "{v:?}");
    assert_eq!(v.witnesses["qhat"], "2");

    let v = check_cprob(&query(Problem::CProb, 4, "2", "2", "0", "2")).unwrap();
    assert!(!v.admissible);
    assert_eq!(failed(&v), vec!["t - d/n ⪰ -d(1/p* - 1/q)"]);
    assert_eq!(v.failed_conditions[0].lhs, x("0"));
    assert_eq!(v.failed_conditions[0].rhs, x("0"));

    let v = check_cprob(&query(Problem::CProb, 3, "1", "2", "0", "2")).unwrap();
    assert!(!v.admissible);
    assert!(failed(&v).contains(&"1/q <= 1/p*"));
}

#[test]
fn aprob_examples() {
    let v = check_aprob(&query(Problem::AProb, 1, "2", "2", "0", "2")).unwrap();
    assert!(v.admissible, "{v:?}");

    let v = check_aprob(&query(Problem::AProb, 2, "2", "2", "0", "2")).unwrap();
    assert!(!v.admissible);
    let branch = v.failed_conditions.iter().find(|c| c.name == "t - 2 - d/n > -d + d/q").unwrap();
    assert_eq!((branch.lhs, branch.rhs), (x("-1"), x("-1")));

    // Regression value for the p > d branch in three dimensions.
    let v = check_aprob(&query(Problem::AProb, 3, "4", "2", "0", "3")).unwrap();
    assert!(v.notes.iter().any(|n| n == "branch p > d"));
    assert!(v.admissible, "{v:?}");
}

#[test]
fn cubic_as_source_case_c() {
    let q = query(Problem::NonlinearSource(SourceCase::C), 3, "2", "2", "1", "1").with_exponents(x("1"), x("1"));
    let v = check_nonlinear_source(&q).unwrap();
    assert!(v.admissible, "{v:?}");

    // Tying r to the embedding index q̂ = 6 leaves the t condition at equality.
    let v = check_cubic(&query(Problem::CubicProb, 3, "2", "2", "1", "1")).unwrap();
    assert!(v.admissible, "{v:?}");
    assert_eq!(v.witnesses["r"], "6");
    let tcond = v.conditions.iter().find(|c| c.name.starts_with("t - d/n")).unwrap();
    assert_eq!((tcond.lhs, tcond.rhs), (x("-1/2"), x("-1/2")));
    assert!(tcond.marginal);
}

#[test]
fn growth_two_with_q_one_takes_high_branch() {
    let q = query(Problem::NonlinearSource(SourceCase::A), 1, "2", "1", "6", "1").with_exponents(x("1"), x("1"));
    let v = check_nonlinear_source(&q).unwrap();
    assert!(v.notes[0].contains("> 2"));
    assert_eq!(v.witnesses.get("r").map(String::as_str), Some("inf"));
    let q = query(Problem::NonlinearSource(SourceCase::A), 1, "2", "2", "6", "1").with_exponents(x("1"), x("1"));
    let v = check_nonlinear_source(&q).unwrap();
    assert!(v.notes[0].contains("< 2"));
}

#[test]
fn affine_source_spot_value() {
    let q = query(Problem::NonlinearSource(SourceCase::A), 1, "2", "2", "2", "1");
    assert!(check_nonlinear_source(&q).unwrap().admissible);
    let q = query(Problem::NonlinearSource(SourceCase::C), 1, "2", "2", "2", "1");
    assert!(check_nonlinear_source(&q).unwrap().admissible);
}

#[test]
fn gradient_bundle_uses_rho_two_and_r_infinite() {
    let q = query(Problem::NonlinearSource(SourceCase::B), 1, "2", "2", "6", "2");
    let v = check_nonlinear_source(&q).unwrap();
    assert!(v.admissible, "{v:?}");
    assert_eq!(v.witnesses["rho"], "2");
    assert_eq!(v.witnesses["R"], "inf");
    let q = query(Problem::NonlinearSource(SourceCase::B), 1, "2", "2", "11/2", "2");
    assert!(!check_nonlinear_source(&q).unwrap().admissible);
}

#[test]
fn general_gradient_bundle_searches_rho() {
    // t = d/n rules out ϱ = 2 through strictness at zero; any larger ϱ works.
    let q = query(Problem::NonlinearSource(SourceCase::D), 2, "2", "4", "1", "1");
    let v = check_nonlinear_source(&q).unwrap();
    assert!(v.admissible, "{v:?}");
    assert!(!v.preferred_choice_feasible);
    assert_ne!(v.witnesses["rho"], "2");
}

#[test]
fn hilbert_settings_up_to_three_dimensions() {
    for d in 1..=4 {
        let c = check(&query(Problem::CProb, d, "2", "2", "0", "2")).unwrap().admissible;
        let a = check(&query(Problem::AProb, d, "2", "2", "0", "2")).unwrap().admissible;
        let l = check_log(&query(Problem::LogProb, d, "2", "2", "2", "2")).unwrap().admissible;
        let k = check_cubic(&query(Problem::CubicProb, d, "2", "2", "1", "1")).unwrap().admissible;
        assert_eq!(c, d <= 3, "cprob d={d}");
        assert_eq!(a, d == 1, "aprob d={d}");
        assert_eq!(l, d <= 3, "log d={d}");
        assert_eq!(k, d <= 3, "cubic d={d}");
    }
}

#[test]
fn corollary_examples() {
    let r = corollary_q_range(Problem::CProb, 3, x("2")).unwrap().unwrap();
    assert_eq!(r.upper, x("2"));
    assert!(r.lower <= x("2") && r.contains(x("2")));
    let r = corollary_q_range(Problem::AProb, 1, x("2")).unwrap().unwrap();
    assert!(r.contains(x("2")));
    let r = corollary_q_range(Problem::CubicProb, 1, x("2")).unwrap().unwrap();
    assert_eq!(r.upper, XRat::PosInf);
    assert!(corollary_q_range(Problem::AProb, 3, x("2")).is_err());
    assert!(corollary_q_range(Problem::CProb, 5, x("2")).is_err());
}

#[test]
fn verdict_json_has_exact_sides() {
    let v = check(&IndexQuery::parse("problem=cprob d=4 p=2 q=2 s=0 t=2").unwrap()).unwrap();
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["admissible"], false);
    assert_eq!(json["failed_conditions"][0]["lhs"], "0");
    assert_eq!(json["failed_conditions"][0]["relation"], "⪰");
}

/// Half-integers in [1, 6].
fn q_grid() -> Vec<XRat> {
    (2..=12).map(|k| XRat::frac(k, 2)).collect()
}

fn hilbert(problem: Problem, d: i128, p: XRat, q: XRat) -> IndexQuery {
    let (s, t) = match problem {
        Problem::CProb | Problem::AProb => (0, 2),
        Problem::LogProb => (2, 2),
        _ => (1, 1),
    };
    IndexQuery::new(problem, d, p, q, XRat::int(s), XRat::int(t))
}

#[test]
fn bundles_agree_with_corollary_ranges() {
    let ps = ["1", "3/2", "2", "3", "4", "6", "inf"];
    for d in 1..=4 {
        for p in ps.iter().map(|p| x(p)) {
            let cases: Vec<(Problem, bool)> = vec![
                (Problem::CProb, true),
                // The diffusion bundle additionally needs q >= 2 when p > d,
                // which the closed-form range omits; only one direction holds.
                (Problem::AProb, p == x("2")),
                (Problem::LogProb, d <= 3),
                (Problem::CubicProb, true),
            ];
            for (problem, two_sided) in cases {
                let range = match corollary_q_range(problem, d, p) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                for q in q_grid() {
                    if problem == Problem::LogProb && q > x("2") {
                        continue;
                    }
                    let bundle = check(&hilbert(problem, d, p, q)).unwrap().admissible;
                    let corollary = range.as_ref().is_some_and(|r| r.contains(q));
                    if two_sided {
                        assert_eq!(bundle, corollary, "{problem} d={d} p={p} q={q}");
                    } else if bundle {
                        assert!(corollary, "{problem} d={d} p={p} q={q}");
                    }
                }
            }
        }
    }
}

fn xrat_small() -> impl Strategy<Value = XRat> {
    (-12i128..=12, 1i128..=6).prop_map(|(n, d)| XRat::frac(n, d))
}

fn index() -> impl Strategy<Value = XRat> {
    prop_oneof![(2i128..=24).prop_map(|n| XRat::frac(n, 2)), Just(XRat::PosInf)]
}

fn smoothness() -> impl Strategy<Value = XRat> {
    (0i128..=16).prop_map(|n| XRat::frac(n, 2))
}

fn exponent() -> impl Strategy<Value = XRat> {
    (0i128..=8).prop_map(|n| XRat::frac(n, 2))
}

fn problem() -> impl Strategy<Value = Problem> {
    prop_oneof![
        Just(Problem::CProb),
        Just(Problem::AProb),
        Just(Problem::NonlinearSource(SourceCase::A)),
        Just(Problem::NonlinearSource(SourceCase::B)),
        Just(Problem::NonlinearSource(SourceCase::C)),
        Just(Problem::NonlinearSource(SourceCase::D)),
        Just(Problem::LogProb),
        Just(Problem::CubicProb),
    ]
}

prop_compose! {
    fn any_query()(problem in problem(), d in 1i128..=4, p in index(), q in index(), s in smoothness(), t in smoothness(),
                   m in index(), n in index(), g in exponent(), k in exponent(), gh in exponent()) -> IndexQuery {
        IndexQuery::new(problem, d, p, q, s, t)
            .with_mn(m, n)
            .with_exponents(g, k)
            .with_gradient_exponents(gh, XRat::int(1))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn succeq_upward_closed(a in xrat_small(), b in xrat_small(), c in xrat_small()) {
        if succeq(a, b) && a <= c {
            prop_assert!(succeq(c, b));
        }
    }

    #[test]
    fn verdicts_are_deterministic_and_consistent(q in any_query()) {
        let v1 = check(&q).unwrap();
        let v2 = check(&q).unwrap();
        prop_assert_eq!(&v1, &v2);
        prop_assert_eq!(v1.admissible, v1.failed_conditions.is_empty());
        prop_assert_eq!(v1.admissible, !v1.witnesses.is_empty() || v1.conditions.is_empty());
    }

    #[test]
    fn raising_s_keeps_admissibility(q in any_query(), ds in 1i128..=6) {
        if check(&q).unwrap().admissible {
            let mut q2 = q.clone();
            q2.s = q.s.add(XRat::frac(ds, 2)).unwrap();
            prop_assert!(check(&q2).unwrap().admissible);
        }
    }

    #[test]
    fn raising_t_keeps_admissibility(q in any_query(), dt in 1i128..=6) {
        // The growth bundles couple s and t through s > t + ..., so t is
        // monotone only where it enters on the left alone.
        let coupled = matches!(q.problem, Problem::NonlinearSource(SourceCase::A | SourceCase::B));
        if !coupled && check(&q).unwrap().admissible {
            let mut q2 = q.clone();
            q2.t = q.t.add(XRat::frac(dt, 2)).unwrap();
            prop_assert!(check(&q2).unwrap().admissible);
        }
    }
}
