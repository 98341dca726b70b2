//! Finitely generated free algebras: `F(n)` is the upset algebra of the
//! pair extension of the Boolean poset `2^n`, with generator `g_i` the set
//! of points whose base has coordinate `i`. Also the term-level
//! characterizations of atoms (`a_T` values) and join-irreducibles
//! (`p_L^𝒯` values) with their order isomorphism check.

use serde::{Deserialize, Serialize};

use crate::algebra::{atoms, closure_family, from_dual, join_irreducibles, FinitePdl};
use crate::bits::ElemSet;
use crate::config::Caps;
use crate::error::{Error, Result};
pub use crate::formulas::{a_term, p_term, s_pairs, SPair, SPairReading};
use crate::formulas::tuple_values;
use crate::poset::{boolean_poset, p_extension, PairPoint};

#[derive(Clone, Debug)]
pub struct FreeAlgebra {
    pub n: usize,
    pub algebra: FinitePdl,
    /// Indices of `g_1..g_n`.
    pub generators: Vec<usize>,
    /// The pair structure of the dual's points, aligned with dual indices.
    pub points: Vec<PairPoint>,
}

/// The free algebra on `n` generators. `n = 3` already has a 310-point dual
/// (and 10^93 elements), so construction is capped.
pub fn free_pdl(n: usize, caps: &Caps) -> Result<FreeAlgebra> {
    if n == 0 || n > caps.free_n_max {
        return Err(Error::CapExceeded(format!(
            "free_pdl({n}) (cap {})",
            caps.free_n_max
        )));
    }
    let base = boolean_poset(n)?;
    let ext = p_extension(&base, caps)?;
    let algebra = from_dual(&ext.poset, caps)?;
    let mut generators = Vec::with_capacity(n);
    for i in 1..=n {
        let mut g = ElemSet::empty(ext.poset.len());
        for (idx, pt) in ext.points.iter().enumerate() {
            // boolean_poset indexes elements by coordinate bitmask
            if pt.base >> (i - 1) & 1 == 1 {
                g.insert(idx);
            }
        }
        let gi = algebra
            .index_of(&g)
            .expect("a coordinate set of bases is an upset");
        generators.push(gi);
    }
    assert_eq!(
        closure_family(&algebra, &generators).len(),
        algebra.len(),
        "generators must generate the whole upset algebra"
    );
    let algebra = algebra.with_generators(generators.clone());
    Ok(FreeAlgebra { n, algebra, generators, points: ext.points })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeReport {
    pub n: usize,
    pub atoms_ok: bool,
    pub jirr_ok: bool,
    pub order_iso_ok: bool,
    pub mismatches: Vec<String>,
}

impl FreeReport {
    pub fn clean(&self) -> bool {
        self.atoms_ok && self.jirr_ok && self.order_iso_ok
    }
}

/// Check, in `F(n)`, that the `a_T` values are exactly the atoms, the
/// `p_L^𝒯` values are exactly the join-irreducibles, and that the pair
/// order matches the algebra order on those values.
pub fn check_free_characterizations(
    n: usize,
    reading: SPairReading,
    caps: &Caps,
) -> Result<FreeReport> {
    let f = free_pdl(n, caps)?;
    let a = &f.algebra;
    let tv = tuple_values(a, &f.generators, reading);
    let mut mismatches = Vec::new();

    let mut a_vals = tv.a_vals.clone();
    a_vals.sort_unstable();
    a_vals.dedup();
    let expected_atoms = atoms(a);
    let atoms_ok = a_vals == expected_atoms;
    if !atoms_ok {
        mismatches.push(format!(
            "a_T values {:?} vs atoms {:?}",
            a_vals.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>(),
            expected_atoms.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>()
        ));
    }

    let mut p_vals = tv.p_vals.clone();
    p_vals.sort_unstable();
    p_vals.dedup();
    let expected_jirr = join_irreducibles(a);
    let jirr_ok = p_vals == expected_jirr;
    if !jirr_ok {
        mismatches.push(format!(
            "p values {:?} vs join-irreducibles {:?}",
            p_vals.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>(),
            expected_jirr.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>()
        ));
    }

    let pairs = s_pairs(n, reading);
    let mut order_iso_ok = pairs.len() == expected_jirr.len() && p_vals.len() == pairs.len();
    if !order_iso_ok {
        mismatches.push(format!(
            "evaluation is not injective onto Jirr: |S({n})| = {}, {} distinct values, {} join-irreducibles",
            pairs.len(),
            p_vals.len(),
            expected_jirr.len()
        ));
    }
    if order_iso_ok {
        'outer: for (i, &s1) in pairs.iter().enumerate() {
            for (j, &s2) in pairs.iter().enumerate() {
                if s1.leq(s2) != a.leq(tv.p_vals[i], tv.p_vals[j]) {
                    order_iso_ok = false;
                    mismatches.push(format!(
                        "order mismatch at pairs {s1:?}, {s2:?}: pair order {} vs value order {}",
                        s1.leq(s2),
                        a.leq(tv.p_vals[i], tv.p_vals[j])
                    ));
                    break 'outer;
                }
            }
        }
    }
    Ok(FreeReport { n, atoms_ok, jirr_ok, order_iso_ok, mismatches })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratedReport {
    pub atoms_ok: bool,
    pub jirr_ok: bool,
    pub mismatches: Vec<String>,
}

impl GeneratedReport {
    pub fn clean(&self) -> bool {
        self.atoms_ok && self.jirr_ok
    }
}

/// Check on an arbitrary algebra with a generating tuple that the atoms are
/// exactly the nonzero `a_T` values and the join-irreducibles are exactly
/// the `p_L^𝒯` values not matched by the join of strictly smaller `p`
/// values.
pub fn check_generated_characterization(
    a: &FinitePdl,
    gens: &[usize],
    reading: SPairReading,
) -> Result<GeneratedReport> {
    if closure_family(a, gens).len() != a.len() {
        return Err(Error::Precondition(
            "the given elements do not generate the algebra".into(),
        ));
    }
    let tv = tuple_values(a, gens, reading);
    let mut mismatches = Vec::new();
    let expected_atoms = atoms(a);
    let atoms_ok = tv.at_vals == expected_atoms;
    if !atoms_ok {
        mismatches.push(format!(
            "nonzero a_T values {:?} vs atoms {:?}",
            tv.at_vals.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>(),
            expected_atoms.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>()
        ));
    }
    let expected_jirr = join_irreducibles(a);
    let jirr_ok = tv.jirr_vals == expected_jirr;
    if !jirr_ok {
        mismatches.push(format!(
            "unmatched p values {:?} vs join-irreducibles {:?}",
            tv.jirr_vals.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>(),
            expected_jirr.iter().map(|&v| a.element_name(v)).collect::<Vec<_>>()
        ));
    }
    Ok(GeneratedReport { atoms_ok, jirr_ok, mismatches })
}

/// The unique homomorphism `F(n) → C` sending `g_i ↦ images[i]`, as an
/// element-indexed vector. Computed by closing the generator pairs under the
/// operations in both coordinates; freeness guarantees no conflicts, but a
/// conflict is reported as `None` rather than trusted away.
pub fn hom_extending(f: &FreeAlgebra, c: &FinitePdl, images: &[usize]) -> Option<Vec<usize>> {
    assert_eq!(images.len(), f.n);
    let a = &f.algebra;
    let mut img = vec![usize::MAX; a.len()];
    img[a.zero()] = c.zero();
    img[a.one()] = c.one();
    for (&g, &i) in f.generators.iter().zip(images) {
        if img[g] != usize::MAX && img[g] != i {
            return None;
        }
        img[g] = i;
    }
    loop {
        let known: Vec<usize> = (0..a.len()).filter(|&i| img[i] != usize::MAX).collect();
        let mut changed = false;
        for &i in &known {
            let targets = [(a.neg(i), c.neg(img[i]))];
            for (at, val) in targets {
                if img[at] == usize::MAX {
                    img[at] = val;
                    changed = true;
                } else if img[at] != val {
                    return None;
                }
            }
            for &j in &known {
                for (at, val) in [
                    (a.meet(i, j), c.meet(img[i], img[j])),
                    (a.join(i, j), c.join(img[i], img[j])),
                ] {
                    if img[at] == usize::MAX {
                        img[at] = val;
                        changed = true;
                    } else if img[at] != val {
                        return None;
                    }
                }
            }
        }
        if !changed {
            if img.iter().any(|&i| i == usize::MAX) {
                return None;
            }
            return Some(img);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::build_poset;

    #[test]
    fn free1_structure() {
        let caps = Caps::default();
        let f = free_pdl(1, &caps).unwrap();
        let a = &f.algebra;
        assert_eq!(a.len(), 7);
        assert_eq!(atoms(a).len(), 2);
        assert_eq!(join_irreducibles(a).len(), 4);
        // dual indices: 0:0 = Q, 0:1 = P, 0:0+1 = B, 1:1 = M
        let g1 = f.generators[0];
        assert_eq!(a.element(g1), &ElemSet::from_mask(4, 0b1000));
        assert_eq!(a.element(a.neg(g1)), &ElemSet::from_mask(4, 0b0001));
        assert_eq!(a.element(a.neg(a.neg(g1))), &ElemSet::from_mask(4, 0b1010));
    }

    #[test]
    fn free2_structure_and_cap() {
        let caps = Caps::default();
        let f = free_pdl(2, &caps).unwrap();
        assert_eq!(f.algebra.dual().len(), 22);
        assert_eq!(atoms(&f.algebra).len(), 4);
        assert_eq!(join_irreducibles(&f.algebra).len(), 22);
        assert!(matches!(free_pdl(3, &caps), Err(Error::CapExceeded(_))));
        assert!(matches!(free_pdl(0, &caps), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn p_term_example_values() {
        let caps = Caps::default();
        let f = free_pdl(1, &caps).unwrap();
        let a = &f.algebra;
        let tv = tuple_values(a, &f.generators, SPairReading::Corrected);
        let pairs = s_pairs(1, SPairReading::Corrected);
        let val_of = |l: u32, t: u32| {
            let i = pairs.iter().position(|s| s.l == l && s.t == t).unwrap();
            tv.p_vals[i]
        };
        let g1 = f.generators[0];
        assert_eq!(val_of(0b1, 0b10), g1); // x & !!x = x
        assert_eq!(val_of(0, 0b01), a.neg(g1)); // !!(!x) = !x
        assert_eq!(val_of(0, 0b11), a.one()); // !!(x | !x) = 1
        assert_eq!(val_of(0, 0b10), a.neg(a.neg(g1))); // !!x
    }

    #[test]
    fn characterization_reports() {
        let caps = Caps::default();
        let r1 = check_free_characterizations(1, SPairReading::Corrected, &caps).unwrap();
        assert!(r1.clean(), "{:?}", r1.mismatches);
        let r2 = check_free_characterizations(2, SPairReading::Corrected, &caps).unwrap();
        assert!(r2.clean(), "{:?}", r2.mismatches);
        // the literal side condition drops too many pairs to cover Jirr
        let lit = check_free_characterizations(1, SPairReading::Literal, &caps).unwrap();
        assert!(!lit.clean());
        let text = serde_json::to_string(&r1).unwrap();
        assert!(text.contains("\"atoms_ok\":true"));
    }

    #[test]
    fn generated_characterization() {
        let caps = Caps::default();
        let f = free_pdl(1, &caps).unwrap();
        let r = check_generated_characterization(&f.algebra, &f.generators, SPairReading::Corrected)
            .unwrap();
        assert!(r.clean(), "{:?}", r.mismatches);
        // 5-element algebra generated by one atom
        let fork = build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap();
        let a = from_dual(&fork, &caps).unwrap();
        let atom = atoms(&a)[0];
        let r = check_generated_characterization(&a, &[atom], SPairReading::Corrected).unwrap();
        assert!(r.clean(), "{:?}", r.mismatches);
        // 2-element algebra generated by 1
        let two = from_dual(&build_poset(&["s"], &[]).unwrap(), &caps).unwrap();
        let r = check_generated_characterization(&two, &[two.one()], SPairReading::Corrected)
            .unwrap();
        assert!(r.clean(), "{:?}", r.mismatches);
        // non-generating tuple is refused
        assert!(matches!(
            check_generated_characterization(&a, &[a.zero()], SPairReading::Corrected),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn universal_mapping_property_sample() {
        let caps = Caps::default();
        let f = free_pdl(1, &caps).unwrap();
        let fork = build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap();
        let c = from_dual(&fork, &caps).unwrap();
        for img in 0..c.len() {
            let h = hom_extending(&f, &c, &[img]).expect("freeness: every assignment extends");
            assert_eq!(h[f.generators[0]], img);
            // verify it is a homomorphism
            let a = &f.algebra;
            for i in 0..a.len() {
                assert_eq!(h[a.neg(i)], c.neg(h[i]));
                for j in 0..a.len() {
                    assert_eq!(h[a.meet(i, j)], c.meet(h[i], h[j]));
                    assert_eq!(h[a.join(i, j)], c.join(h[i], h[j]));
                }
            }
        }
    }

    #[test]
    fn free1_embeds_into_free2() {
        let caps = Caps::default();
        let f1 = free_pdl(1, &caps).unwrap();
        let f2 = free_pdl(2, &caps).unwrap();
        let emb = crate::algebra::embeds(&f1.algebra, &f2.algebra, &caps).unwrap();
        assert!(emb.is_some());
    }
}
