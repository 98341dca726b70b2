//! Randomized invariants: weak p-morphisms compose, printing round-trips
//! through the parser, skeleton witnesses restrict, validity transfers to
//! subalgebras, and the quantifier-free formula families agree with their
//! brute-force semantics.

use proptest::prelude::*;

use pdl_core::algebra::{
    atoms, closure_family, from_dual, generated_subalgebra, is_exact, join_irreducibles,
};
use pdl_core::bits::ElemSet;
use pdl_core::config::Caps;
use pdl_core::formulas::{
    eval_fs, fs_rhs_oracle, gen_dn, holds_universal, parse_formula, search_counterexample,
    QfFormula, SPairReading, Term, UniversalSentence,
};
use pdl_core::free::free_pdl;
use pdl_core::poset::{
    build_poset, find_surjective_wpm, is_weak_p_morphism, max_closed_subsets, FinitePoset,
    PosetMap,
};
use pdl_core::skeleton::{check_free_skeleton, restrict_witness, verify_witness};

/// Posets on up to `max_n` elements, from an upper-triangular relation mask
/// (the closure makes any mask a valid order).
fn poset_strategy(max_n: usize) -> impl Strategy<Value = FinitePoset> {
    (1..=max_n, any::<u16>()).prop_map(|(n, mask)| {
        let names: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        let mut pairs = Vec::new();
        let mut bit = 0;
        for i in 0..n {
            for j in i + 1..n {
                if mask >> (bit % 16) & 1 == 1 {
                    pairs.push((names[i].clone(), names[j].clone()));
                }
                bit += 1;
            }
        }
        build_poset(&names, &pairs).expect("index order extends the relation")
    })
}

fn term_strategy() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::Zero),
        Just(Term::One),
        Just(Term::Var("x1".into())),
        Just(Term::Var("x2".into())),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::Not(Box::new(t))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Term::Meet(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Term::Join(Box::new(a), Box::new(b))),
        ]
    })
}

fn formula_strategy() -> impl Strategy<Value = QfFormula> {
    let atom = prop_oneof![
        (term_strategy(), term_strategy()).prop_map(|(a, b)| QfFormula::Eq(a, b)),
        (term_strategy(), term_strategy()).prop_map(|(a, b)| QfFormula::Neq(a, b)),
    ];
    atom.prop_recursive(2, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| QfFormula::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| QfFormula::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner)
                .prop_map(|(a, b)| QfFormula::Implies(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_identity(f in formula_strategy()) {
        let text = f.to_string();
        let back = parse_formula(&text).expect("printed formulas parse");
        prop_assert_eq!(f, back);
    }

    #[test]
    fn weak_p_morphisms_compose(
        x in poset_strategy(4),
        y in poset_strategy(3),
        z in poset_strategy(3),
    ) {
        let caps = Caps::default();
        let (Ok(Some(f)), Ok(Some(g))) =
            (find_surjective_wpm(&x, &y, &caps), find_surjective_wpm(&y, &z, &caps))
        else {
            return Ok(());
        };
        let composed = PosetMap {
            source: x.clone(),
            target: z.clone(),
            map: f.map.iter().map(|&i| g.map[i]).collect(),
        };
        prop_assert!(is_weak_p_morphism(&composed));
    }

    #[test]
    fn skeleton_witnesses_restrict(p in poset_strategy(5), mask in any::<u8>()) {
        let Some(w) = check_free_skeleton(&p) else { return Ok(()) };
        prop_assert!(verify_witness(&w));
        let maxs: Vec<usize> = p.maximals().iter().collect();
        let mut y = ElemSet::empty(p.len());
        for (b, &m) in maxs.iter().enumerate() {
            if mask >> (b % 8) & 1 == 1 {
                y.insert(m);
            }
        }
        if y.is_empty() {
            y.insert(maxs[0]);
        }
        let r = restrict_witness(&w, &y).expect("restriction stays a witness");
        prop_assert!(verify_witness(&r));
    }

    #[test]
    fn dual_counts_and_quotient_transfer(p in poset_strategy(4), pick in any::<u16>()) {
        let caps = Caps::default();
        let a = from_dual(&p, &caps).unwrap();
        // join-irreducible upsets are the principal ones; atoms sit at
        // maximal points
        prop_assert_eq!(join_irreducibles(&a).len(), p.len());
        prop_assert_eq!(atoms(&a).len(), p.maximals().count());

        // quotients arise from max-closed subsets; atoms again match
        let subs = max_closed_subsets(&p, &caps).unwrap();
        let s = &subs[pick as usize % subs.len()];
        if s.is_empty() {
            return Ok(());
        }
        let (sub, _) = p.induced(s);
        let b = from_dual(&sub, &caps).unwrap();
        prop_assert_eq!(atoms(&b).len(), sub.maximals().count());
        prop_assert_eq!(join_irreducibles(&b).len(), sub.len());
    }

    #[test]
    fn validity_persists_in_subalgebras(
        p in poset_strategy(4),
        f in formula_strategy(),
        gens_mask in any::<u8>(),
    ) {
        let caps = Caps::default();
        let a = from_dual(&p, &caps).unwrap();
        let s = UniversalSentence::new(f);
        if !holds_universal(&a, &s, &caps).unwrap() {
            return Ok(());
        }
        let gens: Vec<usize> = (0..a.len()).filter(|i| gens_mask >> (i % 8) & 1 == 1).collect();
        let (sub, _) = generated_subalgebra(&a, &gens, &caps).unwrap();
        prop_assert!(holds_universal(&sub, &s, &caps).unwrap());
    }

    #[test]
    fn fs_formula_matches_brute_force_semantics(
        p in poset_strategy(4),
        xi in any::<u16>(),
        yi in any::<u16>(),
    ) {
        let caps = Caps::default();
        let a = from_dual(&p, &caps).unwrap();
        let x1 = xi as usize % a.len();
        let y1 = yi as usize % a.len();
        prop_assert_eq!(
            eval_fs(&a, 1, 1, 1, &[x1], &[y1], SPairReading::Corrected),
            fs_rhs_oracle(&a, 1, &[x1], &[y1])
        );
        // a second variable pair, still with h <= m
        let y2 = (yi / 64) as usize % a.len();
        prop_assert_eq!(
            eval_fs(&a, 1, 2, 1, &[x1], &[y1, y2], SPairReading::Corrected),
            fs_rhs_oracle(&a, 1, &[x1], &[y1, y2])
        );
    }

    #[test]
    fn exact_algebras_model_dn(p in poset_strategy(5)) {
        if check_free_skeleton(&p).is_none() {
            return Ok(());
        }
        let caps = Caps::default();
        let a = from_dual(&p, &caps).unwrap();
        prop_assert!(is_exact(&a));
        prop_assert!(a.zero() != a.one());
        let dn = UniversalSentence::new(gen_dn());
        prop_assert!(holds_universal(&a, &dn, &caps).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn decide_agrees_with_free_algebra_oracles(f in formula_strategy()) {
        use pdl_core::decide::{decide, verify_verdict, Verdict};
        let caps = Caps::default();
        // restrict to one variable: rename x2 out of the way
        let s = UniversalSentence::new(f);
        if s.variables.len() > 2 {
            return Ok(());
        }
        let v = decide(&s, &caps).unwrap();
        prop_assert!(verify_verdict(&s, &v, &caps).unwrap());
        let f2 = free_pdl(2, &caps).unwrap();
        let fails_in_free2 =
            search_counterexample(&f2.algebra, &s, &caps).unwrap().counterexample.is_some();
        match v {
            // soundness: a valid sentence holds in every free algebra
            Verdict::Valid { .. } => prop_assert!(!fails_in_free2),
            Verdict::Invalid { .. } => {}
            Verdict::Unknown { .. } => prop_assert!(s.variables.len() > caps.decide_k_max),
        }
        // completeness: a failure in a free algebra forces Invalid
        if fails_in_free2 {
            let again = decide(&s, &caps).unwrap();
            prop_assert!(matches!(again, Verdict::Invalid { .. }), "missed counterexample");
        }
    }

    #[test]
    fn universal_mapping_property(p in poset_strategy(3), im in any::<u32>()) {
        use pdl_core::free::hom_extending;
        let caps = Caps::default();
        let c = from_dual(&p, &caps).unwrap();
        let f = free_pdl(1, &caps).unwrap();
        let image = im as usize % c.len();
        let h = hom_extending(&f, &c, &[image]).expect("total on one generator");
        prop_assert_eq!(h[f.generators[0]], image);
        for i in 0..f.algebra.len() {
            prop_assert_eq!(h[f.algebra.neg(i)], c.neg(h[i]));
            for j in 0..f.algebra.len() {
                prop_assert_eq!(h[f.algebra.meet(i, j)], c.meet(h[i], h[j]));
                prop_assert_eq!(h[f.algebra.join(i, j)], c.join(h[i], h[j]));
            }
        }
    }
}

#[test]
fn closure_family_is_monotone_and_idempotent() {
    let caps = Caps::default();
    let p = build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap();
    let a = from_dual(&p, &caps).unwrap();
    for g in 0..a.len() {
        let fam = closure_family(&a, &[g]);
        let again = closure_family(&a, &fam);
        assert_eq!(fam, again);
    }
}
