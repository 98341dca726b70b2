//! Free skeletons: a poset `X` with minimum `⊥` has a free skeleton when a
//! family `s_{x,Y}` (one value for each element `x` and nonempty
//! `Y ⊆ max↑x`) satisfies
//!
//!   (i)   `s_{x,Y} ∈ ↑x` and `max↑s_{x,Y} = Y`;
//!   (ii)  `Y ⊆ Z` implies `s_{x,Z} ≤ s_{x,Y}`;
//!   (iii) `max↑x ⊆ Y` implies `s_{⊥,Y} ≤ x`.
//!
//! Existence of such a family is exactly the dual criterion for the upset
//! algebra of `X` to embed into the free algebra.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::ElemSet;
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::poset::{is_weak_p_morphism, FinitePoset, PosetMap};

/// A complete choice family certifying the three conditions. Keys are
/// `(x, Y)` with `Y` a global-index subset; every key is stored explicitly,
/// including the forced ones, so verification needs no recomputation.
#[derive(Clone, Debug)]
pub struct SkeletonWitness {
    pub poset: FinitePoset,
    pub bottom: usize,
    pub s: BTreeMap<(usize, ElemSet), usize>,
}

impl SkeletonWitness {
    pub fn get(&self, x: usize, y: &ElemSet) -> Option<usize> {
        self.s.get(&(x, y.clone())).copied()
    }
}

/// Nonempty subsets of `of` in increasing bitmask order.
fn nonempty_subsets(of: &ElemSet) -> Vec<ElemSet> {
    let positions: Vec<usize> = of.iter().collect();
    let mut out = Vec::with_capacity((1usize << positions.len()) - 1);
    for m in 1u64..1u64 << positions.len() {
        let mut s = ElemSet::empty(of.universe_len());
        for (b, &p) in positions.iter().enumerate() {
            if m >> b & 1 == 1 {
                s.insert(p);
            }
        }
        out.push(s);
    }
    out
}

/// Decide whether `x` has a free skeleton and produce a witness.
///
/// The bottom family is forced: condition (iii) with `Y = max↑x` forces
/// `s_{⊥,Y}` to be the minimum of `{x : max↑x ⊆ Y}`, which then must satisfy
/// (i) exactly. For every other element the conditions couple only choices
/// sharing that element, so an independent backtracking search per element
/// (largest `Y` first, candidates in element order) is complete.
pub fn check_free_skeleton(x: &FinitePoset) -> Option<SkeletonWitness> {
    let bottom = x.minimum()?;
    let n = x.len();
    let mut s = BTreeMap::new();
    for y in nonempty_subsets(x.maximals()) {
        let mut cand = ElemSet::empty(n);
        for i in 0..n {
            if x.max_above(i).is_subset(&y) {
                cand.insert(i);
            }
        }
        let m = cand.iter().find(|&i| cand.is_subset(x.up_row(i)))?;
        if *x.max_above(m) != y {
            return None;
        }
        s.insert((bottom, y), m);
    }
    for xe in 0..n {
        if xe == bottom {
            continue;
        }
        let mut ys = nonempty_subsets(x.max_above(xe));
        ys.sort_by(|a, b| b.count().cmp(&a.count()).then(a.cmp(b)));
        let cands: Vec<Vec<usize>> = ys
            .iter()
            .map(|y| x.up_row(xe).iter().filter(|&v| x.max_above(v) == y).collect())
            .collect();
        let mut chosen: Vec<usize> = Vec::with_capacity(ys.len());
        if !assign_monotone(x, &ys, &cands, &mut chosen) {
            return None;
        }
        for (y, v) in ys.into_iter().zip(chosen) {
            s.insert((xe, y), v);
        }
    }
    let w = SkeletonWitness { poset: x.clone(), bottom, s };
    debug_assert!(verify_witness(&w));
    Some(w)
}

/// Backtracking selection of one candidate per `Y` respecting condition (ii).
fn assign_monotone(
    x: &FinitePoset,
    ys: &[ElemSet],
    cands: &[Vec<usize>],
    chosen: &mut Vec<usize>,
) -> bool {
    let i = chosen.len();
    if i == ys.len() {
        return true;
    }
    'cand: for &v in &cands[i] {
        for (j, &w) in chosen.iter().enumerate() {
            if ys[i].is_subset(&ys[j]) && !x.leq(w, v) {
                continue 'cand;
            }
            if ys[j].is_subset(&ys[i]) && !x.leq(v, w) {
                continue 'cand;
            }
        }
        chosen.push(v);
        if assign_monotone(x, ys, cands, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Exhaustively check the type invariants of a witness.
pub fn verify_witness(w: &SkeletonWitness) -> bool {
    let x = &w.poset;
    let n = x.len();
    if x.minimum() != Some(w.bottom) {
        return false;
    }
    // totality of the key set
    for xe in 0..n {
        for y in nonempty_subsets(x.max_above(xe)) {
            if !w.s.contains_key(&(xe, y)) {
                return false;
            }
        }
    }
    for ((xe, y), &v) in &w.s {
        if !x.leq(*xe, v) || x.max_above(v) != y {
            return false;
        }
    }
    for ((x1, y), &v1) in &w.s {
        for ((x2, z), &v2) in w.s.range((*x1, ElemSet::empty(n))..) {
            if x2 != x1 {
                break;
            }
            if y.is_subset(z) && !x.leq(v2, v1) {
                return false;
            }
        }
    }
    for y in nonempty_subsets(x.maximals()) {
        let v = w.s[&(w.bottom, y.clone())];
        for xe in 0..n {
            if x.max_above(xe).is_subset(&y) && !x.leq(v, xe) {
                return false;
            }
        }
    }
    true
}

/// Oracle: enumerate choice families directly, in flat key order, and return
/// the first family satisfying (i)-(iii). Exhaustive within budget.
pub fn brute_force_skeleton(x: &FinitePoset, caps: &Caps) -> Result<Option<SkeletonWitness>> {
    let Some(bottom) = x.minimum() else { return Ok(None) };
    let n = x.len();
    let mut keys: Vec<(usize, ElemSet)> = Vec::new();
    for xe in 0..n {
        for y in nonempty_subsets(x.max_above(xe)) {
            keys.push((xe, y));
        }
    }
    let cands: Vec<Vec<usize>> = keys
        .iter()
        .map(|(xe, y)| x.up_row(*xe).iter().filter(|&v| x.max_above(v) == y).collect())
        .collect();
    if cands.iter().any(|c| c.is_empty()) {
        return Ok(None);
    }
    let mut chosen: Vec<usize> = Vec::new();
    let mut nodes = 0u64;
    let found = bf_search(x, bottom, &keys, &cands, &mut chosen, &mut nodes, caps)?;
    if !found {
        return Ok(None);
    }
    let s = keys.into_iter().zip(chosen).collect();
    let w = SkeletonWitness { poset: x.clone(), bottom, s };
    debug_assert!(verify_witness(&w));
    Ok(Some(w))
}

fn bf_search(
    x: &FinitePoset,
    bottom: usize,
    keys: &[(usize, ElemSet)],
    cands: &[Vec<usize>],
    chosen: &mut Vec<usize>,
    nodes: &mut u64,
    caps: &Caps,
) -> Result<bool> {
    let i = chosen.len();
    if i == keys.len() {
        return Ok(true);
    }
    let (xe, y) = &keys[i];
    'cand: for &v in &cands[i] {
        *nodes += 1;
        if *nodes > caps.skeleton_bf_budget {
            return Err(Error::BudgetExceeded("brute_force_skeleton".into()));
        }
        for (j, &w) in chosen.iter().enumerate() {
            let (x2, z) = &keys[j];
            if x2 == xe {
                // the bigger family gets the smaller element
                if y.is_subset(z) && !x.leq(w, v) {
                    continue 'cand;
                }
                if z.is_subset(y) && !x.leq(v, w) {
                    continue 'cand;
                }
            }
        }
        if *xe == bottom {
            for z in 0..x.len() {
                if x.max_above(z).is_subset(y) && !x.leq(v, z) {
                    continue 'cand;
                }
            }
        }
        chosen.push(v);
        if bf_search(x, bottom, keys, cands, chosen, nodes, caps)? {
            return Ok(true);
        }
        chosen.pop();
    }
    Ok(false)
}

/// Restrict a witness to the upset `↑s_{⊥,Y}`, which again has a free
/// skeleton: take `s*_{x,Z} = s_{x,Z}` for `x` strictly above `s_{⊥,Y}` and
/// `s*_{x,Z} = s_{⊥,Z}` at `x = s_{⊥,Y}` itself.
pub fn restrict_witness(w: &SkeletonWitness, y: &ElemSet) -> Result<SkeletonWitness> {
    if y.is_empty() || !y.is_subset(w.poset.maximals()) {
        return Err(Error::Precondition("Y must be a nonempty subset of max X".into()));
    }
    if !verify_witness(w) {
        return Err(Error::Precondition("witness does not verify".into()));
    }
    let x = &w.poset;
    let root = w.s[&(w.bottom, y.clone())];
    let (sub, old) = x.induced(x.up_row(root));
    let new_of_old: BTreeMap<usize, usize> = old.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let to_local = |s: &ElemSet| {
        let mut r = ElemSet::empty(sub.len());
        for i in s.iter() {
            r.insert(new_of_old[&i]);
        }
        r
    };
    let mut s = BTreeMap::new();
    for (&g, &l) in &new_of_old {
        for z in nonempty_subsets(x.max_above(g)) {
            let v = if g == root { w.s[&(w.bottom, z.clone())] } else { w.s[&(g, z.clone())] };
            s.insert((l, to_local(&z)), new_of_old[&v]);
        }
    }
    let out = SkeletonWitness { poset: sub, bottom: new_of_old[&root], s };
    if !verify_witness(&out) {
        return Err(Error::Precondition("restricted witness failed verification".into()));
    }
    Ok(out)
}

/// Extend a weak p-morphism `p : U -> Y` defined on an upset `U ⊆ X` to all
/// of `X`, given a skeleton witness for `Y`.
///
/// Fixing `w` as the least-index maximal of `Y`, the extension sends `x ∉ U`
/// to `w` when `x` is maximal and otherwise to `s_{⊥,e(x)}`, where
/// `e(x) = p[U ∩ max↑x]`, plus `w` when some maximal above `x` escapes `U`.
pub fn extend_weak_p_morphism(
    x: &FinitePoset,
    u: &ElemSet,
    p: &[Option<usize>],
    witness: &SkeletonWitness,
) -> Result<PosetMap> {
    let y = &witness.poset;
    if !x.is_upset(u) {
        return Err(Error::Precondition("U is not an upset".into()));
    }
    if !verify_witness(witness) {
        return Err(Error::Precondition("witness does not verify".into()));
    }
    for i in u.iter() {
        if p[i].is_none() {
            return Err(Error::Precondition("map not total on U".into()));
        }
    }
    // p must be a weak p-morphism on the induced subposet
    {
        let (sub, old) = x.induced(u);
        let map = old.iter().map(|&o| p[o].unwrap()).collect();
        let pm = PosetMap { source: sub, target: y.clone(), map };
        if !is_weak_p_morphism(&pm) {
            return Err(Error::Precondition("p is not a weak p-morphism on U".into()));
        }
    }
    let w_fixed = y.maximals().first().expect("target has a maximal element");
    let mut map = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        if u.contains(i) {
            map.push(p[i].unwrap());
            continue;
        }
        if x.maximals().contains(i) {
            map.push(w_fixed);
            continue;
        }
        let mut e = ElemSet::empty(y.len());
        let mut all_in_u = true;
        for z in x.max_above(i).iter() {
            if u.contains(z) {
                e.insert(p[z].unwrap());
            } else {
                all_in_u = false;
            }
        }
        if !all_in_u {
            e.insert(w_fixed);
        }
        map.push(witness.s[&(witness.bottom, e)]);
    }
    let out = PosetMap { source: x.clone(), target: y.clone(), map };
    debug_assert!(is_weak_p_morphism(&out));
    Ok(out)
}

/// Witness JSON: `{"bottom": "b", "s": [{"x": ..., "Y": [...], "val": ...}]}`.
#[derive(Serialize, Deserialize)]
struct WitnessEntryJson {
    x: String,
    #[serde(rename = "Y")]
    y: Vec<String>,
    val: String,
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    bottom: String,
    s: Vec<WitnessEntryJson>,
}

pub fn witness_to_json(w: &SkeletonWitness) -> serde_json::Value {
    let p = &w.poset;
    let s: Vec<WitnessEntryJson> = w
        .s
        .iter()
        .map(|((x, y), &v)| WitnessEntryJson {
            x: p.name(*x).to_string(),
            y: y.iter().map(|i| p.name(i).to_string()).collect(),
            val: p.name(v).to_string(),
        })
        .collect();
    serde_json::to_value(WitnessJson { bottom: p.name(w.bottom).to_string(), s }).unwrap()
}

pub fn witness_from_json(poset: &FinitePoset, text: &str) -> Result<SkeletonWitness> {
    let j: WitnessJson = serde_json::from_str(text)?;
    let bottom = poset.index_of(&j.bottom)?;
    let mut s = BTreeMap::new();
    for e in j.s {
        let x = poset.index_of(&e.x)?;
        let mut y = ElemSet::empty(poset.len());
        for name in &e.y {
            y.insert(poset.index_of(name)?);
        }
        s.insert((x, y), poset.index_of(&e.val)?);
    }
    Ok(SkeletonWitness { poset: poset.clone(), bottom, s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::{boolean_poset, build_poset, p_extension};

    fn fork() -> FinitePoset {
        build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap()
    }

    fn trifork() -> FinitePoset {
        build_poset(&["b", "a1", "a2", "a3"], &[("b", "a1"), ("b", "a2"), ("b", "a3")]).unwrap()
    }

    #[test]
    fn fork_has_skeleton_trifork_does_not() {
        let w = check_free_skeleton(&fork()).expect("fork");
        assert!(verify_witness(&w));
        // s(⊥,{a1}) = a1, s(⊥,{a2}) = a2, s(⊥,{a1,a2}) = ⊥
        assert_eq!(w.get(0, &ElemSet::from_mask(3, 0b010)), Some(1));
        assert_eq!(w.get(0, &ElemSet::from_mask(3, 0b100)), Some(2));
        assert_eq!(w.get(0, &ElemSet::from_mask(3, 0b110)), Some(0));
        assert!(check_free_skeleton(&trifork()).is_none());
    }

    #[test]
    fn bounded_posets_have_skeletons() {
        let chain3 = build_poset(&["c0", "c1", "c2"], &[("c0", "c1"), ("c1", "c2")]).unwrap();
        let diamond = build_poset(
            &["0", "a", "b", "1"],
            &[("0", "a"), ("0", "b"), ("a", "1"), ("b", "1")],
        )
        .unwrap();
        assert!(check_free_skeleton(&chain3).is_some());
        assert!(check_free_skeleton(&diamond).is_some());
        assert!(check_free_skeleton(&build_poset(&["a"], &[]).unwrap()).is_some());
    }

    #[test]
    fn no_minimum_no_skeleton() {
        let anti = build_poset(&["a", "b"], &[]).unwrap();
        assert!(check_free_skeleton(&anti).is_none());
        assert!(brute_force_skeleton(&anti, &Caps::default()).unwrap().is_none());
    }

    #[test]
    fn tampered_witness_rejected() {
        let mut w = check_free_skeleton(&fork()).unwrap();
        assert!(verify_witness(&w));
        // redefine s(⊥,{a1,a2}) to a1: max↑a1 = {a1} ≠ {a1,a2}, violating (i)
        w.s.insert((0, ElemSet::from_mask(3, 0b110)), 1);
        assert!(!verify_witness(&w));
    }

    #[test]
    fn brute_force_agrees_on_examples() {
        let caps = Caps::default();
        assert!(brute_force_skeleton(&fork(), &caps).unwrap().is_some());
        assert!(brute_force_skeleton(&trifork(), &caps).unwrap().is_none());
        let p1 = p_extension(&boolean_poset(1).unwrap(), &caps).unwrap().poset;
        assert!(check_free_skeleton(&p1).is_some());
        assert!(brute_force_skeleton(&p1, &caps).unwrap().is_some());
        let p2 = p_extension(&boolean_poset(2).unwrap(), &caps).unwrap().poset;
        assert!(check_free_skeleton(&p2).is_some());
    }

    #[test]
    fn restrict_witness_examples() {
        let w = check_free_skeleton(&fork()).unwrap();
        let full = restrict_witness(&w, &ElemSet::from_mask(3, 0b110)).unwrap();
        assert_eq!(full.poset.len(), 3);
        assert!(verify_witness(&full));
        let single = restrict_witness(&w, &ElemSet::from_mask(3, 0b010)).unwrap();
        assert_eq!(single.poset.len(), 1);
        assert!(verify_witness(&single));
        let caps = Caps::default();
        let p1 = p_extension(&boolean_poset(1).unwrap(), &caps).unwrap().poset;
        let w1 = check_free_skeleton(&p1).unwrap();
        // Y = {Q}: ↑s(⊥,{Q}) = {Q}, a singleton (Q is index 0 and maximal)
        let r = restrict_witness(&w1, &ElemSet::from_mask(4, 0b0001)).unwrap();
        assert_eq!(r.poset.len(), 1);
    }

    #[test]
    fn extend_examples() {
        // X = TRIFORK, U = {a1,a2,a3}, Y = FORK, p: a1↦a1', a2↦a2', a3↦a1'
        let x = trifork();
        let y = fork();
        let w = check_free_skeleton(&y).unwrap();
        let u = ElemSet::from_mask(4, 0b1110);
        let p = vec![None, Some(1), Some(2), Some(1)];
        let ext = extend_weak_p_morphism(&x, &u, &p, &w).unwrap();
        assert!(is_weak_p_morphism(&ext));
        assert_eq!(ext.map, vec![0, 1, 2, 1], "e(b) = {{a1',a2'}} lands on FORK's bottom");

        // total map: extension is the identity extension
        let full = ElemSet::full(3);
        let py = vec![Some(0), Some(1), Some(2)];
        let ext2 = extend_weak_p_morphism(&y, &full, &py, &w).unwrap();
        assert_eq!(ext2.map, vec![0, 1, 2]);

        // constant map to a singleton from U = {top} of a 2-chain
        let chain2 = build_poset(&["u", "v"], &[("u", "v")]).unwrap();
        let single = build_poset(&["s"], &[]).unwrap();
        let ws = check_free_skeleton(&single).unwrap();
        let ext3 = extend_weak_p_morphism(
            &chain2,
            &ElemSet::from_mask(2, 0b10),
            &[None, Some(0)],
            &ws,
        )
        .unwrap();
        assert_eq!(ext3.map, vec![0, 0]);
    }

    #[test]
    fn extend_rejects_bad_inputs() {
        let x = trifork();
        let y = fork();
        let w = check_free_skeleton(&y).unwrap();
        // not an upset
        let res = extend_weak_p_morphism(&x, &ElemSet::from_mask(4, 0b0001), &[Some(0), None, None, None], &w);
        assert!(matches!(res, Err(Error::Precondition(_))));
        // not a weak p-morphism on U: a1↦b' is order preserving on the
        // discrete subposet but fails the maximality condition
        let u = ElemSet::from_mask(4, 0b1110);
        let p = vec![None, Some(0), Some(2), Some(1)];
        assert!(matches!(
            extend_weak_p_morphism(&x, &u, &p, &w),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn witness_json_round_trip() {
        let w = check_free_skeleton(&fork()).unwrap();
        let j = witness_to_json(&w).to_string();
        let back = witness_from_json(&fork(), &j).unwrap();
        assert!(verify_witness(&back));
        assert_eq!(back.s, w.s);
    }
}
