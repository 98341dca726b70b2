//! Finite posets, maps between them, weak p-morphisms, and the pair-extension
//! construction P(X).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::ElemSet;
use crate::config::Caps;
use crate::error::{Error, Result};

/// A finite partially ordered set. The full `<=` relation is stored as one
/// bit row per element (`up[i]` = set of `j` with `i <= j`), computed once by
/// transitive closure at construction.
#[derive(Clone, PartialEq, Eq)]
pub struct FinitePoset {
    elements: Vec<String>,
    index: HashMap<String, usize>,
    up: Vec<ElemSet>,
    maximals: ElemSet,
    max_above: Vec<ElemSet>,
    minimum: Option<usize>,
}

impl std::fmt::Debug for FinitePoset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FinitePoset({:?})", self.elements)
    }
}

impl FinitePoset {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn name(&self, i: usize) -> &str {
        &self.elements[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownElement(name.to_string()))
    }

    pub fn leq(&self, i: usize, j: usize) -> bool {
        self.up[i].contains(j)
    }

    /// The principal upset `↑i` as a bit row.
    pub fn up_row(&self, i: usize) -> &ElemSet {
        &self.up[i]
    }

    pub fn up_set(&self, s: &ElemSet) -> ElemSet {
        let mut r = ElemSet::empty(self.len());
        for i in s.iter() {
            r.union_with(&self.up[i]);
        }
        r
    }

    pub fn down_set(&self, s: &ElemSet) -> ElemSet {
        let mut r = ElemSet::empty(self.len());
        for j in 0..self.len() {
            if self.up[j].intersects(s) {
                r.insert(j);
            }
        }
        r
    }

    pub fn is_upset(&self, s: &ElemSet) -> bool {
        s.iter().all(|i| self.up[i].is_subset(s))
    }

    pub fn maximals(&self) -> &ElemSet {
        &self.maximals
    }

    /// `max ↑x`: the maximal elements of the poset that lie above `x`.
    pub fn max_above(&self, x: usize) -> &ElemSet {
        &self.max_above[x]
    }

    pub fn minimum(&self) -> Option<usize> {
        self.minimum
    }

    /// Subposet induced by `s`, together with the map from new to old indices.
    pub fn induced(&self, s: &ElemSet) -> (FinitePoset, Vec<usize>) {
        let old: Vec<usize> = s.iter().collect();
        let names: Vec<String> = old.iter().map(|&i| self.elements[i].clone()).collect();
        let mut new_of_old = vec![usize::MAX; self.len()];
        for (n, &o) in old.iter().enumerate() {
            new_of_old[o] = n;
        }
        let up: Vec<ElemSet> = old
            .iter()
            .map(|&o| {
                let mut row = ElemSet::empty(old.len());
                for j in self.up[o].iter() {
                    if s.contains(j) {
                        row.insert(new_of_old[j]);
                    }
                }
                row
            })
            .collect();
        (FinitePoset::from_closed_rows(names, up), old)
    }

    /// Assemble a poset from rows already known to be a reflexive transitive
    /// antisymmetric relation (internal fast path).
    fn from_closed_rows(elements: Vec<String>, up: Vec<ElemSet>) -> FinitePoset {
        let n = elements.len();
        let mut maximals = ElemSet::empty(n);
        for i in 0..n {
            if up[i].count() == 1 {
                maximals.insert(i);
            }
        }
        let max_above: Vec<ElemSet> = (0..n).map(|i| up[i].intersection(&maximals)).collect();
        let minimum = (0..n).find(|&i| up[i].count() == n);
        let index = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        FinitePoset { elements, index, up, maximals, max_above, minimum }
    }
}

/// Build a poset from named elements and relation pairs `(lower, upper)`,
/// taking the reflexive-transitive closure.
pub fn build_poset<S: AsRef<str>>(elements: &[S], relation: &[(S, S)]) -> Result<FinitePoset> {
    let names: Vec<String> = elements.iter().map(|e| e.as_ref().to_string()).collect();
    let mut index = HashMap::new();
    for (i, e) in names.iter().enumerate() {
        if index.insert(e.clone(), i).is_some() {
            return Err(Error::DuplicateElement(e.clone()));
        }
    }
    let n = names.len();
    let mut up: Vec<ElemSet> = (0..n).map(|i| ElemSet::singleton(n, i)).collect();
    for (a, b) in relation {
        let ia = *index
            .get(a.as_ref())
            .ok_or_else(|| Error::UnknownElement(a.as_ref().to_string()))?;
        let ib = *index
            .get(b.as_ref())
            .ok_or_else(|| Error::UnknownElement(b.as_ref().to_string()))?;
        up[ia].insert(ib);
    }
    // Warshall closure on the bit rows.
    for k in 0..n {
        for i in 0..n {
            if up[i].contains(k) && i != k {
                let row = up[k].clone();
                up[i].union_with(&row);
            }
        }
    }
    for i in 0..n {
        for j in up[i].iter() {
            if i != j && up[j].contains(i) {
                return Err(Error::Cycle(vec![names[i].clone(), names[j].clone()]));
            }
        }
    }
    Ok(FinitePoset::from_closed_rows(names, up))
}

/// All posets on `n` labelled elements whose order extends the index order.
/// Every finite poset admits such a labelling (topologically sort it), so the
/// output covers every poset on `n` elements up to isomorphism, with
/// duplicates. Elements are named `e0 .. e{n-1}`.
pub fn enumerate_posets(n: usize, caps: &Caps) -> Result<Vec<FinitePoset>> {
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    if pairs.len() > caps.enum_max_bits {
        return Err(Error::CapExceeded(format!(
            "poset enumeration over {} pairs (cap {})",
            pairs.len(),
            caps.enum_max_bits
        )));
    }
    let names: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
    let mut out = Vec::new();
    'mask: for mask in 0u64..1 << pairs.len() {
        let mut up: Vec<ElemSet> = (0..n).map(|i| ElemSet::singleton(n, i)).collect();
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if mask >> b & 1 == 1 {
                up[i].insert(j);
            }
        }
        for i in 0..n {
            for j in up[i].iter() {
                if i != j && !up[j].is_subset(&up[i]) {
                    continue 'mask;
                }
            }
        }
        out.push(FinitePoset::from_closed_rows(names.clone(), up));
    }
    Ok(out)
}

/// JSON file format: `{"elements": [...], "leq": [["lower","upper"], ...]}`.
#[derive(Serialize, Deserialize)]
struct PosetJson {
    elements: Vec<String>,
    leq: Vec<(String, String)>,
}

pub fn poset_from_json(text: &str) -> Result<FinitePoset> {
    let j: PosetJson = serde_json::from_str(text)?;
    build_poset(&j.elements, &j.leq)
}

pub fn poset_to_json(p: &FinitePoset) -> serde_json::Value {
    let mut leq = Vec::new();
    for i in 0..p.len() {
        for j in p.up_row(i).iter() {
            if i != j {
                leq.push((p.name(i).to_string(), p.name(j).to_string()));
            }
        }
    }
    serde_json::json!({ "elements": p.elements(), "leq": leq })
}

/// A total map between two posets, by target index per source index.
#[derive(Clone, Debug)]
pub struct PosetMap {
    pub source: FinitePoset,
    pub target: FinitePoset,
    pub map: Vec<usize>,
}

impl PosetMap {
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn image(&self) -> ElemSet {
        let mut s = ElemSet::empty(self.target.len());
        for &y in &self.map {
            s.insert(y);
        }
        s
    }

    pub fn is_surjective(&self) -> bool {
        self.image().count() == self.target.len()
    }
}

/// A map `p` is a weak p-morphism when it is order preserving and, whenever
/// `p(x) <= y` for `y` maximal in the target, some `z ∈ max↑x` has `p(z) = y`.
pub fn is_weak_p_morphism(f: &PosetMap) -> bool {
    let src = &f.source;
    let tgt = &f.target;
    for x in 0..src.len() {
        for x2 in src.up_row(x).iter() {
            if !tgt.leq(f.map[x], f.map[x2]) {
                return false;
            }
        }
    }
    for x in 0..src.len() {
        for y in tgt.max_above(f.map[x]).iter() {
            if !src.max_above(x).iter().any(|z| f.map[z] == y) {
                return false;
            }
        }
    }
    true
}

/// The poset `2^n` of n-bit vectors under coordinatewise order. Element `v`
/// has coordinate `i` (1-based) equal to bit `i-1` of its index; names list
/// coordinate 1 first.
pub fn boolean_poset(n: usize) -> Result<FinitePoset> {
    if n == 0 || n > 20 {
        return Err(Error::CapExceeded(format!("boolean_poset({n})")));
    }
    let size = 1usize << n;
    let names: Vec<String> = (0..size)
        .map(|v| (0..n).map(|i| if v >> i & 1 == 1 { '1' } else { '0' }).collect())
        .collect();
    let up: Vec<ElemSet> = (0..size)
        .map(|v| {
            let mut row = ElemSet::empty(size);
            for w in 0..size {
                if v | w == w {
                    row.insert(w);
                }
            }
            row
        })
        .collect();
    Ok(FinitePoset::from_closed_rows(names, up))
}

/// A point `⟨base, cloud⟩` of P(X) with `∅ ≠ cloud ⊆ ↑base`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairPoint {
    pub base: usize,
    pub cloud: ElemSet,
}

/// P(X) together with the pair structure of its points.
#[derive(Clone, Debug)]
pub struct PExtension {
    pub poset: FinitePoset,
    pub points: Vec<PairPoint>,
}

/// Number of points of P(X): Σ_x (2^{|↑x|} − 1). `None` when it overflows.
pub fn p_extension_size(x: &FinitePoset) -> Option<u64> {
    let mut total: u64 = 0;
    for i in 0..x.len() {
        let h = x.up_row(i).count();
        if h >= 63 {
            return None;
        }
        total = total.checked_add((1u64 << h) - 1)?;
    }
    Some(total)
}

/// The pair extension `P(X) = {⟨x,C⟩ : ∅ ≠ C ⊆ ↑x}` ordered by
/// `⟨x,C⟩ ≤ ⟨y,D⟩ ⟺ x ≤ y and C ⊇ D`. Points are ordered lexicographically
/// by (base index, cloud bitmask value).
pub fn p_extension(x: &FinitePoset, caps: &Caps) -> Result<PExtension> {
    let size = p_extension_size(x)
        .filter(|&s| s <= caps.p_extension_max)
        .ok_or_else(|| Error::CapExceeded(format!("|P(X)| over cap {}", caps.p_extension_max)))?;
    let mut points = Vec::with_capacity(size as usize);
    for base in 0..x.len() {
        let positions: Vec<usize> = x.up_row(base).iter().collect();
        // Submasks of ↑base in increasing local-mask order; the position list
        // is ascending, so this is also increasing global-mask order.
        for m in 1u64..1u64 << positions.len() {
            let mut cloud = ElemSet::empty(x.len());
            for (b, &p) in positions.iter().enumerate() {
                if m >> b & 1 == 1 {
                    cloud.insert(p);
                }
            }
            points.push(PairPoint { base, cloud });
        }
    }
    let names: Vec<String> = points
        .iter()
        .map(|p| {
            let cloud: Vec<&str> = p.cloud.iter().map(|i| x.name(i)).collect();
            format!("{}:{}", x.name(p.base), cloud.join("+"))
        })
        .collect();
    let n = points.len();
    let up: Vec<ElemSet> = (0..n)
        .map(|i| {
            let mut row = ElemSet::empty(n);
            for j in 0..n {
                if x.leq(points[i].base, points[j].base) && points[j].cloud.is_subset(&points[i].cloud)
                {
                    row.insert(j);
                }
            }
            row
        })
        .collect();
    Ok(PExtension { poset: FinitePoset::from_closed_rows(names, up), points })
}

/// All subsets `S` with `max↑s ⊆ S` for every `s ∈ S` (including `∅`),
/// as bitmasks sorted by (popcount, mask value).
///
/// These are exactly the subposet inclusions that are weak p-morphisms, i.e.
/// dually the quotients of the upset algebra.
pub fn max_closed_subset_masks(p: &FinitePoset, caps: &Caps) -> Result<Vec<u64>> {
    let n = p.len();
    if n > caps.enum_max_bits || n > 63 {
        return Err(Error::CapExceeded(format!(
            "subset enumeration over {n} elements (cap {})",
            caps.enum_max_bits
        )));
    }
    let maximals = p.maximals().as_mask();
    let nonmax_rows: Vec<(usize, u64)> = (0..n)
        .filter(|&i| !p.maximals().contains(i))
        .map(|i| (i, p.max_above(i).as_mask()))
        .collect();
    let mut out = Vec::new();
    // Enumerate the maximal-element seed, then free choices among the
    // non-maximal elements whose max↑ the seed already covers.
    let mut seed: u64 = 0;
    loop {
        let allowed: Vec<u64> = nonmax_rows
            .iter()
            .filter(|&&(_, ma)| ma & !seed == 0)
            .map(|&(i, _)| 1u64 << i)
            .collect();
        let mut pick = 0usize;
        loop {
            let mut mask = seed;
            for (b, bit) in allowed.iter().enumerate() {
                if pick >> b & 1 == 1 {
                    mask |= bit;
                }
            }
            out.push(mask);
            pick += 1;
            if pick >= 1usize << allowed.len() {
                break;
            }
        }
        if seed == maximals {
            break;
        }
        seed = (seed.wrapping_sub(maximals)) & maximals;
    }
    out.sort_unstable_by_key(|&m| (m.count_ones(), m));
    Ok(out)
}

pub fn max_closed_subsets(p: &FinitePoset, caps: &Caps) -> Result<Vec<ElemSet>> {
    let masks = max_closed_subset_masks(p, caps)?;
    Ok(masks.into_iter().map(|m| ElemSet::from_mask(p.len(), m)).collect())
}

/// Exhaustive search for a surjective weak p-morphism `source -> target`.
///
/// Complete within budget: a `None` after a finished search is definitive.
/// The search assigns images top-down and prunes with two necessary
/// conditions of weak p-morphisms: order preservation and the image identity
/// `f[max↑x] = max↑f(x)`.
pub fn find_surjective_wpm(
    source: &FinitePoset,
    target: &FinitePoset,
    caps: &Caps,
) -> Result<Option<PosetMap>> {
    if target.is_empty() || source.is_empty() {
        return Ok(None);
    }
    // The image of a surjective weak p-morphism from a poset with a minimum
    // has a minimum, and every maximal of the target is hit from max(source).
    if source.minimum().is_some() && target.minimum().is_none() {
        return Ok(None);
    }
    if source.maximals().count() < target.maximals().count() {
        return Ok(None);
    }
    let n = source.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| source.up_row(i).count());
    let mut assignment = vec![usize::MAX; n];
    let mut nodes: u64 = 0;
    let found = search_wpm(source, target, &order, 0, &mut assignment, &mut nodes, caps)?;
    if !found {
        return Ok(None);
    }
    let map = PosetMap { source: source.clone(), target: target.clone(), map: assignment };
    debug_assert!(is_weak_p_morphism(&map) && map.is_surjective());
    Ok(Some(map))
}

fn search_wpm(
    source: &FinitePoset,
    target: &FinitePoset,
    order: &[usize],
    depth: usize,
    assignment: &mut Vec<usize>,
    nodes: &mut u64,
    caps: &Caps,
) -> Result<bool> {
    if depth == order.len() {
        let mut covered = ElemSet::empty(target.len());
        for &y in assignment.iter() {
            covered.insert(y);
        }
        return Ok(covered.count() == target.len());
    }
    let x = order[depth];
    // Elements above x are already assigned (processing order is by
    // decreasing height), so both constraints are fully determined.
    let x_maximal = source.maximals().contains(x);
    let mut max_image = ElemSet::empty(target.len());
    for z in source.max_above(x).iter() {
        if z != x {
            max_image.insert(assignment[z]);
        }
    }
    'cand: for y in 0..target.len() {
        *nodes += 1;
        if *nodes > caps.search_budget {
            return Err(Error::BudgetExceeded("find_surjective_wpm".into()));
        }
        let want = if x_maximal {
            // f[max↑x] = {f(x)}, so f(x) must be maximal
            ElemSet::singleton(target.len(), y)
        } else {
            max_image.clone()
        };
        if *target.max_above(y) != want {
            continue;
        }
        for z in source.up_row(x).iter() {
            if z != x && !target.leq(y, assignment[z]) {
                continue 'cand;
            }
        }
        assignment[x] = y;
        if search_wpm(source, target, order, depth + 1, assignment, nodes, caps)? {
            return Ok(true);
        }
        assignment[x] = usize::MAX;
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fork() -> FinitePoset {
        build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap()
    }

    pub(crate) fn trifork() -> FinitePoset {
        build_poset(&["b", "a1", "a2", "a3"], &[("b", "a1"), ("b", "a2"), ("b", "a3")]).unwrap()
    }

    pub(crate) fn chain3() -> FinitePoset {
        build_poset(&["c0", "c1", "c2"], &[("c0", "c1"), ("c1", "c2")]).unwrap()
    }

    #[test]
    fn build_closure_and_cycle() {
        let p = build_poset(&["a"], &[]).unwrap();
        assert_eq!(p.len(), 1);
        let f = fork();
        assert_eq!(f.minimum(), Some(0));
        assert_eq!(f.maximals().count(), 2);
        let c = chain3();
        assert!(c.leq(0, 2), "transitive closure");
        assert!(matches!(
            build_poset(&["x", "y"], &[("x", "y"), ("y", "x")]),
            Err(Error::Cycle(_))
        ));
        assert!(matches!(
            build_poset(&["x", "x"], &[]),
            Err(Error::DuplicateElement(_))
        ));
    }

    #[test]
    fn up_down_sets() {
        let f = fork();
        assert_eq!(f.up_set(&ElemSet::singleton(3, 0)).count(), 3);
        assert_eq!(f.up_set(&ElemSet::singleton(3, 1)).count(), 1);
        let c = chain3();
        let u = c.up_set(&ElemSet::singleton(3, 1));
        assert_eq!(u.iter().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(c.down_set(&ElemSet::singleton(3, 1)).iter().collect::<Vec<_>>(), vec![0, 1]);
        // round trip: S ⊆ up(down(S)), both idempotent
        let s = ElemSet::singleton(3, 1);
        let ud = c.up_set(&c.down_set(&s));
        assert!(s.is_subset(&ud));
        assert_eq!(c.up_set(&c.up_set(&s)), c.up_set(&s));
    }

    #[test]
    fn maximal_above() {
        let f = fork();
        assert_eq!(f.max_above(0).iter().collect::<Vec<_>>(), vec![1, 2]);
        let c = chain3();
        assert_eq!(c.max_above(0).iter().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn boolean_posets() {
        let b1 = boolean_poset(1).unwrap();
        assert_eq!(b1.len(), 2);
        assert!(b1.leq(0, 1));
        let b3 = boolean_poset(3).unwrap();
        assert_eq!(b3.len(), 8);
        let atoms = (0..8).filter(|&v| b3.up_row(0).contains(v) && (v as u32).count_ones() == 1);
        assert_eq!(atoms.count(), 3);
        assert_eq!(b3.maximals().count(), 1);
    }

    #[test]
    fn p_extension_small() {
        let caps = Caps::default();
        let single = build_poset(&["a"], &[]).unwrap();
        assert_eq!(p_extension(&single, &caps).unwrap().poset.len(), 1);
        let p1 = p_extension(&boolean_poset(1).unwrap(), &caps).unwrap();
        assert_eq!(p1.poset.len(), 4);
        // order: 0:{0}, 0:{1}, 0:{0,1}, 1:{1}; chain B < P < M plus B < Q
        assert_eq!(p1.poset.name(0), "0:0");
        assert_eq!(p1.poset.name(1), "0:1");
        assert_eq!(p1.poset.name(2), "0:0+1");
        assert_eq!(p1.poset.name(3), "1:1");
        assert!(p1.poset.leq(2, 1) && p1.poset.leq(1, 3) && p1.poset.leq(2, 0));
        assert!(!p1.poset.leq(0, 3) && !p1.poset.leq(1, 0));
        let p2 = p_extension(&boolean_poset(2).unwrap(), &caps).unwrap();
        assert_eq!(p2.poset.len(), 22);
        assert_eq!(p_extension_size(&boolean_poset(3).unwrap()), Some(310));
    }

    #[test]
    fn p_extension_structure() {
        // minimum ⟨0, 2^n⟩, atoms ⟨0, 2^n − {x}⟩, maximals ⟨x,{x}⟩, no atom
        // maximal, for n = 2, 3
        let caps = Caps::default();
        for n in [2usize, 3] {
            let base = boolean_poset(n).unwrap();
            let px = p_extension(&base, &caps).unwrap();
            let m = px.poset.minimum().expect("minimum exists");
            assert_eq!(px.points[m].base, 0);
            assert_eq!(px.points[m].cloud.count(), 1 << n);
            assert_eq!(px.poset.maximals().count(), 1 << n);
            for i in px.poset.maximals().iter() {
                let pt = &px.points[i];
                assert_eq!(pt.cloud, ElemSet::singleton(base.len(), pt.base));
            }
            let atoms: Vec<usize> = (0..px.poset.len())
                .filter(|&i| {
                    i != m
                        && (0..px.poset.len())
                            .all(|j| !px.poset.leq(j, i) || j == i || j == m)
                })
                .collect();
            assert_eq!(atoms.len(), 1 << n);
            for &a in &atoms {
                assert_eq!(px.points[a].base, 0);
                assert_eq!(px.points[a].cloud.count(), (1 << n) - 1);
                assert!(!px.poset.maximals().contains(a));
            }
        }
    }

    #[test]
    fn max_closed_enumeration() {
        let caps = Caps::default();
        let chain2 = build_poset(&["u", "v"], &[("u", "v")]).unwrap();
        let subs = max_closed_subset_masks(&chain2, &caps).unwrap();
        assert_eq!(subs, vec![0b00, 0b10, 0b11]);
        let f = fork();
        let subs = max_closed_subset_masks(&f, &caps).unwrap();
        assert_eq!(subs, vec![0b000, 0b010, 0b100, 0b110, 0b111]);
        let p1 = p_extension(&boolean_poset(1).unwrap(), &caps).unwrap();
        let subs = max_closed_subset_masks(&p1.poset, &caps).unwrap();
        // Q=bit0, P=bit1, B=bit2, M=bit3:
        // ∅, {Q}, {M}, {Q,M}, {P,M}, {P,Q,M}, {B,Q,M}, {B,P,Q,M}
        assert_eq!(subs, vec![0b0000, 0b0001, 0b1000, 0b1001, 0b1010, 0b1011, 0b1101, 0b1111]);
        // brute-force cross-check on a couple of small posets
        for p in [&f, &trifork(), &p1.poset] {
            let brute: Vec<u64> = (0..1u64 << p.len())
                .filter(|&m| {
                    (0..p.len())
                        .all(|i| m >> i & 1 == 0 || p.max_above(i).as_mask() & !m == 0)
                })
                .collect();
            let mut got = max_closed_subset_masks(p, &caps).unwrap();
            got.sort_unstable();
            assert_eq!(got, brute);
        }
    }

    #[test]
    fn wpm_check_and_search() {
        let caps = Caps::default();
        let f = fork();
        let id = PosetMap { source: f.clone(), target: f.clone(), map: vec![0, 1, 2] };
        assert!(is_weak_p_morphism(&id));
        let p1 = p_extension(&boolean_poset(1).unwrap(), &caps).unwrap().poset;
        // B↦b, Q↦a1, P↦a2, M↦a2 (indices: Q=0,P=1,B=2,M=3)
        let good = PosetMap { source: p1.clone(), target: f.clone(), map: vec![1, 2, 0, 2] };
        assert!(is_weak_p_morphism(&good));
        let bad = PosetMap { source: p1.clone(), target: f.clone(), map: vec![1, 0, 0, 2] };
        assert!(!is_weak_p_morphism(&bad));

        let found = find_surjective_wpm(&p1, &f, &caps).unwrap().expect("fork is covered");
        assert!(is_weak_p_morphism(&found) && found.is_surjective());
        assert!(find_surjective_wpm(&p1, &trifork(), &caps).unwrap().is_none());
        let idf = find_surjective_wpm(&f, &f, &caps).unwrap().unwrap();
        assert!(is_weak_p_morphism(&idf) && idf.is_surjective());
    }

    #[test]
    fn wpm_preserves_maximal_exhaustive() {
        // On every weak p-morphism between small posets found by scanning all
        // maps: f[max↑x] = max↑f(x) and f[max X] ⊆ max Y.
        let posets = [fork(), chain3(), trifork()];
        for src in &posets {
            for tgt in &posets {
                let n = src.len();
                let t = tgt.len();
                for code in 0..t.pow(n as u32) {
                    let mut c = code;
                    let map: Vec<usize> = (0..n)
                        .map(|_| {
                            let y = c % t;
                            c /= t;
                            y
                        })
                        .collect();
                    let pm = PosetMap { source: src.clone(), target: tgt.clone(), map };
                    if !is_weak_p_morphism(&pm) {
                        continue;
                    }
                    for x in 0..n {
                        let mut img = ElemSet::empty(t);
                        for z in src.max_above(x).iter() {
                            img.insert(pm.map[z]);
                        }
                        assert_eq!(&img, tgt.max_above(pm.map[x]));
                    }
                    for x in src.maximals().iter() {
                        assert!(tgt.maximals().contains(pm.map[x]));
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let f = fork();
        let j = poset_to_json(&f).to_string();
        let back = poset_from_json(&j).unwrap();
        assert_eq!(back.elements(), f.elements());
        for i in 0..3 {
            for j2 in 0..3 {
                assert_eq!(back.leq(i, j2), f.leq(i, j2));
            }
        }
        assert!(poset_from_json("{\"elements\": [\"a\"").is_err());
    }
}
