//! Deciding validity of universal sentences in the free algebra.
//!
//! For a sentence in k variables (k within the cap), the decision is
//! exhaustive: every quotient of the k-generated free algebra whose dual
//! poset carries a free skeleton is an exact algebra, and the sentence is
//! valid iff its matrix holds in each of them under the canonical image of
//! the generators. Quotients are enumerated dually as the max-closed
//! subsets of P(2^k), which keeps the search over cheap bitmasks.
//!
//! Above the cap the verdict is Unknown, after a bounded counterexample
//! search through the materialized free algebras: any counterexample found
//! there is definitive and is returned as Invalid with a self-contained
//! witness (the subalgebra generated by the counterexample values).

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::algebra::{closure_family, from_dual, generated_subalgebra, FinitePdl};
use crate::bits::ElemSet;
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::formulas::{
    eval_formula, eval_term, search_counterexample, Assignment, QfFormula, UniversalSentence,
};
use crate::free::free_pdl;
use crate::poset::{
    boolean_poset, max_closed_subset_masks, p_extension, poset_to_json, FinitePoset,
};
use crate::skeleton::check_free_skeleton;

/// One fallback model check recorded inside an Unknown verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct FallbackCheck {
    /// Generator count of the free algebra scanned.
    pub n: usize,
    /// Whether the whole assignment space fit in the evaluation budget.
    pub complete: bool,
}

/// The decision output. Invalid carries a witness that re-verifies from
/// scratch: the dual has a free skeleton (so the algebra is exact), the
/// assignment's values generate the algebra, and the matrix is false.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Valid {
        checked_quotients: usize,
    },
    Invalid {
        /// Dual poset of the witness algebra.
        witness_dual: FinitePoset,
        /// The max-closed subset of P(2^k) behind the dual. Witnesses from
        /// the fallback path are not cut out of a materialized P(2^k); for
        /// them this is the full element set of `witness_dual`.
        witness_subset: ElemSet,
        assignment: Assignment,
        evaluation_trace: Option<Vec<String>>,
    },
    Unknown {
        reason: String,
        partial: Vec<FallbackCheck>,
    },
}

/// An exact quotient of the free algebra on `k` generators, dually: a
/// skeleton-bearing max-closed subset of P(2^k).
#[derive(Clone, Debug)]
pub struct Quotient {
    /// The subset, over the point indices of P(2^k).
    pub subset: ElemSet,
    /// The induced subposet (the quotient's dual).
    pub dual: FinitePoset,
    pub algebra: FinitePdl,
    /// Canonical image of generator i+1 in `algebra`: its upset restricted
    /// to the subset.
    pub canonical: Vec<usize>,
}

/// Every nonempty max-closed, skeleton-bearing subset of P(2^k), exactly
/// once, ascending by (size, point bitmask), with its upset algebra and the
/// canonical generator assignment. Partitions are checked in parallel and
/// merged back in enumeration order, so the output is deterministic.
pub fn enumerate_exact_quotients(k: usize, caps: &Caps) -> Result<Vec<Quotient>> {
    if k == 0 || k > caps.decide_k_max {
        return Err(Error::CapExceeded(format!(
            "exhaustive decision for {k} variables (cap {})",
            caps.decide_k_max
        )));
    }
    let bp = boolean_poset(k)?;
    let ext = p_extension(&bp, caps)?;
    let masks = max_closed_subset_masks(&ext.poset, caps)?;
    let quotients: Result<Vec<Option<Quotient>>> = masks
        .par_iter()
        .map(|&mask| {
            if mask == 0 {
                return Ok(None);
            }
            let mut subset = ElemSet::empty(ext.poset.len());
            for i in 0..ext.poset.len() {
                if mask >> i & 1 == 1 {
                    subset.insert(i);
                }
            }
            let (dual, old) = ext.poset.induced(&subset);
            if check_free_skeleton(&dual).is_none() {
                return Ok(None);
            }
            let algebra = from_dual(&dual, caps)?;
            let canonical: Vec<usize> = (1..=k)
                .map(|i| {
                    let mut g = ElemSet::empty(dual.len());
                    for (new, &o) in old.iter().enumerate() {
                        if ext.points[o].base >> (i - 1) & 1 == 1 {
                            g.insert(new);
                        }
                    }
                    algebra
                        .index_of(&g)
                        .expect("a generator upset restricted to a max-closed subset is an upset")
                })
                .collect();
            let algebra = algebra.with_generators(canonical.clone());
            Ok(Some(Quotient { subset, dual, algebra, canonical }))
        })
        .collect();
    Ok(quotients?.into_iter().flatten().collect())
}

/// Decide validity of `s` in the free algebra.
///
/// Deterministic: identical inputs produce identical verdicts, including
/// the first Invalid witness in enumeration order.
pub fn decide(s: &UniversalSentence, caps: &Caps) -> Result<Verdict> {
    let k = s.variables.len();
    if k <= caps.decide_k_max {
        // a variable-free matrix still needs one nontrivial quotient to
        // evaluate in; reuse the k = 1 enumeration
        let quotients = enumerate_exact_quotients(k.max(1), caps)?;
        for q in &quotients {
            let v: Assignment = s
                .variables
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), q.canonical[i]))
                .collect();
            if !eval_formula(&q.algebra, &s.matrix, &v)? {
                let mut trace = Vec::new();
                trace_formula(&q.algebra, &s.matrix, &v, &mut trace)?;
                return Ok(Verdict::Invalid {
                    witness_dual: q.dual.clone(),
                    witness_subset: q.subset.clone(),
                    assignment: v,
                    evaluation_trace: Some(trace),
                });
            }
        }
        return Ok(Verdict::Valid { checked_quotients: quotients.len() });
    }

    // fallback: bounded counterexample search in small free algebras; a hit
    // is definitive, exhausting them is not
    let mut partial = Vec::new();
    for n in 1..=caps.free_n_max {
        let f = free_pdl(n, caps)?;
        let out = search_counterexample(&f.algebra, s, caps)?;
        if let Some(ce) = out.counterexample {
            return invalid_from_values(&f.algebra, s, &ce, caps);
        }
        partial.push(FallbackCheck { n, complete: out.complete });
    }
    Ok(Verdict::Unknown {
        reason: format!(
            "{k} variables exceeds the exhaustive cap of {}; no counterexample found in the \
             fallback scan",
            caps.decide_k_max
        ),
        partial,
    })
}

/// Package a falsifying assignment found inside some exact algebra as a
/// self-contained Invalid witness: the subalgebra generated by its values.
fn invalid_from_values(
    a: &FinitePdl,
    s: &UniversalSentence,
    values: &[usize],
    caps: &Caps,
) -> Result<Verdict> {
    let (sub, inclusion) = generated_subalgebra(a, values, caps)?;
    let assignment: Assignment = s
        .variables
        .iter()
        .zip(values)
        .map(|(name, &val)| {
            let idx = inclusion
                .iter()
                .position(|&v| v == val)
                .expect("generators lie in the subalgebra they generate");
            (name.clone(), idx)
        })
        .collect();
    debug_assert!(!eval_formula(&sub, &s.matrix, &assignment)?);
    let mut trace = Vec::new();
    trace_formula(&sub, &s.matrix, &assignment, &mut trace)?;
    let witness_subset = ElemSet::full(sub.dual().len());
    Ok(Verdict::Invalid {
        witness_dual: sub.dual().clone(),
        witness_subset,
        assignment,
        evaluation_trace: Some(trace),
    })
}

/// One line per (in)equation of the matrix, with both sides' values named.
fn trace_formula(
    a: &FinitePdl,
    f: &QfFormula,
    v: &Assignment,
    out: &mut Vec<String>,
) -> Result<bool> {
    Ok(match f {
        QfFormula::Eq(s, t) | QfFormula::Neq(s, t) => {
            let (x, y) = (eval_term(a, s, v)?, eval_term(a, t, v)?);
            let holds = matches!(f, QfFormula::Eq(..)) == (x == y);
            out.push(format!(
                "{f}: {} vs {} [{}]",
                a.element_name(x),
                a.element_name(y),
                if holds { "holds" } else { "fails" }
            ));
            holds
        }
        QfFormula::And(x, y) => trace_formula(a, x, v, out)? & trace_formula(a, y, v, out)?,
        QfFormula::Or(x, y) => trace_formula(a, x, v, out)? | trace_formula(a, y, v, out)?,
        QfFormula::Implies(x, y) => !trace_formula(a, x, v, out)? | trace_formula(a, y, v, out)?,
    })
}

/// Re-check a verdict from scratch.
///
/// Invalid: the dual must carry a free skeleton, the assignment's values
/// must generate the rebuilt algebra, and the matrix must be false. Valid
/// and Unknown: re-run the corresponding computation and compare.
pub fn verify_verdict(s: &UniversalSentence, v: &Verdict, caps: &Caps) -> Result<bool> {
    match v {
        Verdict::Valid { checked_quotients } => Ok(matches!(
            decide(s, caps)?,
            Verdict::Valid { checked_quotients: c } if c == *checked_quotients
        )),
        Verdict::Invalid { witness_dual, assignment, .. } => {
            if check_free_skeleton(witness_dual).is_none() {
                return Ok(false);
            }
            let b = from_dual(witness_dual, caps)?;
            let mut values = Vec::new();
            for name in &s.variables {
                match assignment.get(name) {
                    Some(&i) if i < b.len() => values.push(i),
                    _ => return Ok(false),
                }
            }
            if closure_family(&b, &values).len() != b.len() {
                return Ok(false);
            }
            Ok(!eval_formula(&b, &s.matrix, assignment)?)
        }
        Verdict::Unknown { partial, .. } => {
            if s.variables.len() <= caps.decide_k_max {
                return Ok(false);
            }
            for check in partial {
                let f = free_pdl(check.n, caps)?;
                let out = search_counterexample(&f.algebra, s, caps)?;
                if out.counterexample.is_some() || out.complete != check.complete {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Stable JSON form of a verdict, with the full witness where present.
pub fn verdict_to_json(v: &Verdict) -> Value {
    match v {
        Verdict::Valid { checked_quotients } => json!({
            "verdict": "valid",
            "checked_quotients": checked_quotients,
        }),
        Verdict::Invalid { witness_dual, witness_subset, assignment, evaluation_trace } => {
            let subset: Vec<&str> =
                (0..witness_dual.len()).map(|i| witness_dual.name(i)).collect();
            debug_assert_eq!(subset.len(), witness_subset.count());
            let assignment: std::collections::BTreeMap<&str, usize> =
                assignment.iter().map(|(k, &i)| (k.as_str(), i)).collect();
            json!({
                "verdict": "invalid",
                "witness_dual": poset_to_json(witness_dual),
                "witness_subset": subset,
                "assignment": assignment,
                "evaluation_trace": evaluation_trace,
            })
        }
        Verdict::Unknown { reason, partial } => json!({
            "verdict": "unknown",
            "reason": reason,
            "partial": partial
                .iter()
                .map(|c| json!({"n": c.n, "complete": c.complete}))
                .collect::<Vec<_>>(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::{gen_dn, parse_sentence};

    fn dec(text: &str) -> Verdict {
        decide(&parse_sentence(text).unwrap(), &Caps::default()).unwrap()
    }

    #[test]
    fn one_variable_quotients() {
        let caps = Caps::default();
        let qs = enumerate_exact_quotients(1, &caps).unwrap();
        assert_eq!(qs.len(), 5);
        let sizes: Vec<usize> = qs.iter().map(|q| q.dual.len()).collect();
        assert_eq!(sizes, [1, 1, 2, 3, 4]);
        // canonical x1 images: bottom, top, atom, atom, the generator
        assert_eq!(qs[0].canonical[0], qs[0].algebra.zero());
        assert_eq!(qs[1].canonical[0], qs[1].algebra.one());
        for q in &qs[2..4] {
            assert!(crate::algebra::atoms(&q.algebra).contains(&q.canonical[0]));
        }
        assert_eq!(qs[4].algebra.len(), 7);
        // determinism
        let again = enumerate_exact_quotients(1, &caps).unwrap();
        let masks: Vec<u64> = again.iter().map(|q| q.subset.as_mask()).collect();
        assert_eq!(masks, qs.iter().map(|q| q.subset.as_mask()).collect::<Vec<_>>());
        assert!(enumerate_exact_quotients(0, &caps).is_err());
        assert!(enumerate_exact_quotients(3, &caps).is_err());
    }

    #[test]
    fn two_variable_quotient_count_regression() {
        let qs = enumerate_exact_quotients(2, &Caps::default()).unwrap();
        assert_eq!(qs.len(), 409);
    }

    #[test]
    fn valid_vignettes() {
        assert_eq!(dec("x1 & !x1 = 0"), Verdict::Valid { checked_quotients: 5 });
        // valid in the free algebra even though it fails in the 4-element
        // Boolean algebra
        assert!(matches!(
            dec("x1 | !x1 = 1 -> (x1 = 1 or x1 = 0)"),
            Verdict::Valid { checked_quotients: 5 }
        ));
        assert!(matches!(dec("0 != 1"), Verdict::Valid { .. }));
    }

    #[test]
    fn invalid_vignettes() {
        let v = dec("!!x1 = x1");
        let Verdict::Invalid { witness_dual, witness_subset, assignment, evaluation_trace } = &v
        else {
            panic!("expected Invalid, got {v:?}");
        };
        // first failing quotient: the 2-element chain inside P(2^1)
        assert_eq!(witness_dual.len(), 2);
        assert_eq!(witness_subset.as_mask(), 0b1010);
        assert_eq!(assignment.len(), 1);
        assert!(evaluation_trace.as_ref().unwrap()[0].contains("fails"));
        assert!(
            verify_verdict(&parse_sentence("!!x1 = x1").unwrap(), &v, &Caps::default()).unwrap()
        );

        // the counterexample is not at a generator of the free algebra, so
        // it only appears through quotient enumeration
        let v2 = dec("x1 = !!x1 or !x1 != 0");
        let Verdict::Invalid { witness_subset: s2, .. } = &v2 else {
            panic!("expected Invalid, got {v2:?}");
        };
        assert_eq!(s2.as_mask(), 0b1010);

        let v3 = dec("!x1 | !!x1 = 1");
        let Verdict::Invalid { witness_dual: d3, .. } = &v3 else {
            panic!("expected Invalid, got {v3:?}");
        };
        assert_eq!(d3.len(), 3);
        assert!(
            verify_verdict(&parse_sentence("!x1 | !!x1 = 1").unwrap(), &v3, &Caps::default())
                .unwrap()
        );
    }

    #[test]
    fn unknown_for_three_variables() {
        let caps = Caps::default();
        let s = UniversalSentence::new(gen_dn());
        assert_eq!(s.variables.len(), 3);
        let v = decide(&s, &caps).unwrap();
        let Verdict::Unknown { partial, .. } = &v else {
            panic!("expected Unknown, got {v:?}");
        };
        assert_eq!(partial.len(), 2);
        assert!(partial[0].complete);
        assert!(verify_verdict(&s, &v, &caps).unwrap());
    }

    #[test]
    fn fallback_counterexample_is_definitive() {
        let caps = Caps::default();
        let s = parse_sentence("x1 = !!x1 or x2 = x3").unwrap();
        let v = decide(&s, &caps).unwrap();
        let Verdict::Invalid { witness_dual, assignment, .. } = &v else {
            panic!("expected Invalid, got {v:?}");
        };
        assert_eq!(assignment.len(), 3);
        assert!(check_free_skeleton(witness_dual).is_some());
        assert!(verify_verdict(&s, &v, &caps).unwrap());
    }

    #[test]
    fn tampered_witness_fails_verification() {
        let s = parse_sentence("!!x1 = x1").unwrap();
        let caps = Caps::default();
        let v = decide(&s, &caps).unwrap();
        let Verdict::Invalid { witness_dual, witness_subset, assignment, .. } = v else {
            panic!("expected Invalid");
        };
        let mut tampered = assignment.clone();
        // any element of the 3-chain other than the atom satisfies the
        // matrix, so shifting the image breaks the witness
        tampered.insert("x1".into(), (assignment["x1"] + 1) % 3);
        let bad = Verdict::Invalid {
            witness_dual,
            witness_subset,
            assignment: tampered,
            evaluation_trace: None,
        };
        assert!(!verify_verdict(&s, &bad, &caps).unwrap());
    }

    #[test]
    fn verdict_variable_renaming() {
        assert!(matches!(dec("y & !y = 0"), Verdict::Valid { .. }));
        assert!(matches!(dec("!!z = z"), Verdict::Invalid { .. }));
    }

    #[test]
    fn verdict_json_shapes() {
        let v = dec("x1 & !x1 = 0");
        assert_eq!(
            verdict_to_json(&v).to_string(),
            r#"{"checked_quotients":5,"verdict":"valid"}"#
        );
        let j = verdict_to_json(&dec("!!x1 = x1"));
        assert_eq!(j["verdict"], "invalid");
        assert!(j["witness_dual"]["elements"].is_array());
        assert_eq!(j["witness_subset"].as_array().unwrap().len(), 2);
        let u = verdict_to_json(&decide(
            &UniversalSentence::new(gen_dn()),
            &Caps::default(),
        )
        .unwrap());
        assert_eq!(u["verdict"], "unknown");
        assert_eq!(u["partial"].as_array().unwrap().len(), 2);
    }
}
