//! Finite pseudocomplemented distributive lattices.
//!
//! The canonical form is the upset algebra of a dual poset: meet and join are
//! intersection and union, and `¬U` is the complement of `↓U`. Explicit
//! lattices given by their order relation are validated by the Birkhoff round
//! trip (join-irreducibles, reversed order, rebuild) and converted to this
//! form; a failed round trip is exactly a failure of distributivity.

use std::collections::{BTreeSet, HashMap};

use crate::bits::ElemSet;
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::poset::{find_surjective_wpm, FinitePoset};
use crate::skeleton::check_free_skeleton;

/// A finite PDL as the upset algebra of its dual poset. Elements are all
/// upsets of `dual`, sorted by bitmask value.
#[derive(Clone, Debug)]
pub struct FinitePdl {
    dual: FinitePoset,
    elements: Vec<ElemSet>,
    index: HashMap<ElemSet, usize>,
    generators: Option<Vec<usize>>,
}

impl FinitePdl {
    pub fn dual(&self) -> &FinitePoset {
        &self.dual
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn element(&self, i: usize) -> &ElemSet {
        &self.elements[i]
    }

    pub fn index_of(&self, u: &ElemSet) -> Option<usize> {
        self.index.get(u).copied()
    }

    pub fn generators(&self) -> Option<&[usize]> {
        self.generators.as_deref()
    }

    pub fn with_generators(mut self, gens: Vec<usize>) -> Self {
        self.generators = Some(gens);
        self
    }

    pub fn zero(&self) -> usize {
        0
    }

    pub fn one(&self) -> usize {
        self.index[&ElemSet::full(self.dual.len())]
    }

    pub fn meet(&self, a: usize, b: usize) -> usize {
        self.index[&self.elements[a].intersection(&self.elements[b])]
    }

    pub fn join(&self, a: usize, b: usize) -> usize {
        self.index[&self.elements[a].union(&self.elements[b])]
    }

    /// `¬U` = complement of `↓U`.
    pub fn neg(&self, a: usize) -> usize {
        self.index[&self.dual.down_set(&self.elements[a]).complement()]
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.elements[a].is_subset(&self.elements[b])
    }

    /// External name of an element: the dual elements of the upset, in index
    /// order, e.g. `{P,M}`.
    pub fn element_name(&self, i: usize) -> String {
        let names: Vec<&str> = self.elements[i].iter().map(|d| self.dual.name(d)).collect();
        format!("{{{}}}", names.join(","))
    }

    /// The order of the algebra re-encoded as a poset (for round trips).
    pub fn order_poset(&self) -> FinitePoset {
        let names: Vec<String> = (0..self.len()).map(|i| self.element_name(i)).collect();
        let pairs: Vec<(String, String)> = (0..self.len())
            .flat_map(|a| {
                (0..self.len())
                    .filter(move |&b| a != b && self.elements[a].is_subset(&self.elements[b]))
                    .map(move |b| (a, b))
            })
            .map(|(a, b)| (names[a].clone(), names[b].clone()))
            .collect();
        crate::poset::build_poset(&names, &pairs).expect("lattice order is a poset")
    }
}

/// The upset algebra of a poset.
pub fn from_dual(x: &FinitePoset, caps: &Caps) -> Result<FinitePdl> {
    let n = x.len();
    // Add elements from maximal to minimal; an element may join an upset only
    // when everything strictly above it is already present.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| x.up_row(i).count());
    let mut upsets: Vec<ElemSet> = vec![ElemSet::empty(n)];
    for i in order {
        let mut need = x.up_row(i).clone();
        need.remove(i);
        let extra: Vec<ElemSet> = upsets
            .iter()
            .filter(|u| need.is_subset(u))
            .map(|u| {
                let mut v = u.clone();
                v.insert(i);
                v
            })
            .collect();
        upsets.extend(extra);
        if upsets.len() as u64 > caps.p_extension_max {
            return Err(Error::CapExceeded(format!(
                "upset algebra larger than {}",
                caps.p_extension_max
            )));
        }
    }
    upsets.sort();
    let index = upsets.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
    let a = FinitePdl { dual: x.clone(), elements: upsets, index, generators: None };
    if n <= 10 {
        debug_assert!(adjunction_holds(&a));
    }
    Ok(a)
}

/// The adjunction `a ≤ ¬b ⟺ a ∧ b = 0`, checked over all pairs.
pub fn adjunction_holds(a: &FinitePdl) -> bool {
    for i in 0..a.len() {
        let ni = a.neg(i);
        for j in 0..a.len() {
            let left = a.leq(j, ni);
            let right = a.meet(j, i) == a.zero();
            if left != right {
                return false;
            }
        }
    }
    true
}

/// Join-irreducible elements: the principal upsets `↑s`.
pub fn join_irreducibles(a: &FinitePdl) -> Vec<usize> {
    let x = a.dual();
    let mut out: Vec<usize> = (0..x.len()).map(|s| a.index[x.up_row(s)]).collect();
    out.sort_unstable();
    out
}

/// Atoms: the singletons `{s}` for `s` maximal in the dual.
pub fn atoms(a: &FinitePdl) -> Vec<usize> {
    let x = a.dual();
    let mut out: Vec<usize> = x
        .maximals()
        .iter()
        .map(|s| a.index[&ElemSet::singleton(x.len(), s)])
        .collect();
    out.sort_unstable();
    out
}

/// Definition-level oracle: nonzero elements that are not joins of two
/// strictly smaller elements.
pub fn join_irreducibles_direct(a: &FinitePdl) -> Vec<usize> {
    (1..a.len())
        .filter(|&j| {
            !(0..a.len()).any(|u| {
                u != j
                    && a.leq(u, j)
                    && (0..a.len()).any(|v| v != j && a.leq(v, j) && a.join(u, v) == j)
            })
        })
        .collect()
}

/// Definition-level oracle: minimal nonzero elements.
pub fn atoms_direct(a: &FinitePdl) -> Vec<usize> {
    (1..a.len())
        .filter(|&i| !(1..a.len()).any(|j| j != i && a.leq(j, i)))
        .collect()
}

pub fn pseudocomplement(a: &FinitePdl, i: usize) -> usize {
    a.neg(i)
}

/// An explicit lattice input: named elements plus an order relation. The
/// carrier is just a poset; `validate_explicit` decides whether it is a
/// pseudocomplemented distributive lattice.
#[derive(Clone, Debug)]
pub struct ExplicitLattice(pub FinitePoset);

/// A validated explicit lattice: the canonical upset algebra plus the
/// Birkhoff isomorphism from the input's elements to algebra indices.
#[derive(Clone, Debug)]
pub struct ValidatedLattice {
    pub algebra: FinitePdl,
    /// `iso[i]` = algebra index of input element `i`.
    pub iso: Vec<usize>,
}

fn glb(p: &FinitePoset, a: usize, b: usize) -> Option<usize> {
    let lower: Vec<usize> =
        (0..p.len()).filter(|&z| p.leq(z, a) && p.leq(z, b)).collect();
    lower.iter().copied().find(|&m| lower.iter().all(|&z| p.leq(z, m)))
}

fn lub(p: &FinitePoset, a: usize, b: usize) -> Option<usize> {
    let upper: Vec<usize> = p.up_row(a).intersection(p.up_row(b)).iter().collect();
    upper.iter().copied().find(|&m| upper.iter().all(|&z| p.leq(m, z)))
}

pub fn validate_explicit(l: &ExplicitLattice, caps: &Caps) -> Result<ValidatedLattice> {
    let p = &l.0;
    let n = p.len();
    if n == 0 {
        return Err(Error::NotALattice("empty carrier".into()));
    }
    let bottom = p
        .minimum()
        .ok_or_else(|| Error::NotALattice("no bottom element".into()))?;
    let mut meet = vec![vec![0usize; n]; n];
    let mut join = vec![vec![0usize; n]; n];
    for a in 0..n {
        for b in 0..n {
            meet[a][b] = glb(p, a, b).ok_or_else(|| {
                Error::NotALattice(format!("no meet of {} and {}", p.name(a), p.name(b)))
            })?;
            join[a][b] = lub(p, a, b).ok_or_else(|| {
                Error::NotALattice(format!("no join of {} and {}", p.name(a), p.name(b)))
            })?;
        }
    }
    // join-irreducibles by definition, then the dual poset: their order
    // reversed, so that upsets of the dual give back the lattice
    let jirr: Vec<usize> = (0..n)
        .filter(|&j| {
            j != bottom
                && !(0..n).any(|u| {
                    u != j
                        && p.leq(u, j)
                        && (0..n).any(|v| v != j && p.leq(v, j) && join[u][v] == j)
                })
        })
        .collect();
    let names: Vec<String> = jirr.iter().map(|&j| p.name(j).to_string()).collect();
    let pairs: Vec<(String, String)> = jirr
        .iter()
        .flat_map(|&a| jirr.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| a != b && p.leq(b, a))
        .map(|(a, b)| (p.name(a).to_string(), p.name(b).to_string()))
        .collect();
    let dual = crate::poset::build_poset(&names, &pairs)?;
    let algebra = from_dual(&dual, caps)?;
    if algebra.len() != n {
        return Err(Error::NotDistributive(format!(
            "{} elements but {} upsets of the join-irreducible poset",
            n,
            algebra.len()
        )));
    }
    // canonical map a ↦ {j ∈ Jirr : j ≤ a}, an upset of the reversed order
    let mut iso = vec![0usize; n];
    for a in 0..n {
        let mut u = ElemSet::empty(jirr.len());
        for (k, &j) in jirr.iter().enumerate() {
            if p.leq(j, a) {
                u.insert(k);
            }
        }
        iso[a] = algebra
            .index_of(&u)
            .ok_or_else(|| Error::NotDistributive(format!("image of {} not an upset", p.name(a))))?;
    }
    let mut seen = vec![false; n];
    for &i in &iso {
        if seen[i] {
            return Err(Error::NotDistributive("canonical map not injective".into()));
        }
        seen[i] = true;
    }
    // pseudocomplements last: distributivity failures are reported as such
    // even when the input is not pseudocomplemented either
    let mut neg = vec![0usize; n];
    for a in 0..n {
        let zs: Vec<usize> = (0..n).filter(|&b| meet[a][b] == bottom).collect();
        neg[a] = zs
            .iter()
            .copied()
            .find(|&m| zs.iter().all(|&z| p.leq(z, m)))
            .ok_or_else(|| Error::Pseudocomplement(p.name(a).to_string()))?;
    }
    for a in 0..n {
        for b in 0..n {
            if algebra.meet(iso[a], iso[b]) != iso[meet[a][b]]
                || algebra.join(iso[a], iso[b]) != iso[join[a][b]]
            {
                return Err(Error::NotDistributive(format!(
                    "operation mismatch at ({}, {})",
                    p.name(a),
                    p.name(b)
                )));
            }
        }
        if algebra.neg(iso[a]) != iso[neg[a]] {
            return Err(Error::NotDistributive(format!(
                "pseudocomplement mismatch at {}",
                p.name(a)
            )));
        }
    }
    Ok(ValidatedLattice { algebra, iso })
}

/// The dual poset of a validated explicit lattice.
pub fn dual_of(l: &ExplicitLattice, caps: &Caps) -> Result<FinitePoset> {
    Ok(validate_explicit(l, caps)?.algebra.dual().clone())
}

/// Closure of `gens ∪ {0,1}` under meet, join, and pseudocomplement, as a
/// sorted set of element indices.
pub fn closure_family(a: &FinitePdl, gens: &[usize]) -> Vec<usize> {
    let mut family: BTreeSet<usize> = gens.iter().copied().collect();
    family.insert(a.zero());
    family.insert(a.one());
    loop {
        let items: Vec<usize> = family.iter().copied().collect();
        let before = family.len();
        for &i in &items {
            family.insert(a.neg(i));
            for &j in &items {
                family.insert(a.meet(i, j));
                family.insert(a.join(i, j));
            }
        }
        if family.len() == before {
            return family.into_iter().collect();
        }
    }
}

/// The dual poset of the subalgebra whose element set is `family`: its
/// join-irreducible members (not unions of strictly smaller members) with
/// reversed inclusion. Also returns the member value behind each dual index.
fn family_dual(a: &FinitePdl, family: &[usize]) -> (FinitePoset, Vec<ElemSet>) {
    let values: Vec<&ElemSet> = family.iter().map(|&i| a.element(i)).collect();
    let jirr_values: Vec<ElemSet> = (0..values.len())
        .filter(|&j| {
            !values[j].is_empty() && {
                let mut below = ElemSet::empty(a.dual().len());
                for &v in &values {
                    if v.is_subset(values[j]) && v != values[j] {
                        below.union_with(v);
                    }
                }
                below != *values[j]
            }
        })
        .map(|j| values[j].clone())
        .collect();
    let names: Vec<String> = jirr_values
        .iter()
        .map(|v| a.element_name(a.index_of(v).expect("family member")))
        .collect();
    let mut pairs = Vec::new();
    for (i, vi) in jirr_values.iter().enumerate() {
        for (k, vk) in jirr_values.iter().enumerate() {
            if i != k && vk.is_subset(vi) {
                pairs.push((names[i].clone(), names[k].clone()));
            }
        }
    }
    let poset =
        crate::poset::build_poset(&names, &pairs).expect("reversed inclusion is a partial order");
    (poset, jirr_values)
}

/// The subalgebra generated by `gens`, as its own `FinitePdl` plus the
/// element-level inclusion into `a`.
pub fn generated_subalgebra(
    a: &FinitePdl,
    gens: &[usize],
    caps: &Caps,
) -> Result<(FinitePdl, Vec<usize>)> {
    let family = closure_family(a, gens);
    let (dual, jirr_values) = family_dual(a, &family);
    let sub = from_dual(&dual, caps)?;
    debug_assert_eq!(sub.len(), family.len());
    // a sub-element (an upset W of the sub-dual) includes into `a` as the
    // union of the join-irreducible values behind its members
    let inclusion: Vec<usize> = (0..sub.len())
        .map(|w| {
            let mut v = ElemSet::empty(a.dual().len());
            for d in sub.element(w).iter() {
                v.union_with(&jirr_values[d]);
            }
            a.index_of(&v).expect("union of members of the family stays in the family")
        })
        .collect();
    Ok((sub, inclusion))
}

/// Exactness: the algebra embeds into the free algebra iff its dual has a
/// free skeleton.
pub fn is_exact(a: &FinitePdl) -> bool {
    check_free_skeleton(a.dual()).is_some()
}

/// Whether every subalgebra generated by at most `generator_budget` elements
/// has a dual with a free skeleton. With `generator_budget >= |A|` this is
/// exactly the condition that the whole finite algebra models the
/// axiomatization of the free algebra's universal theory.
pub fn satisfies_sigma(a: &FinitePdl, generator_budget: usize) -> bool {
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut gens: Vec<usize> = Vec::new();
    subsets_up_to(a.len(), generator_budget.min(a.len()), 0, &mut gens, &mut |g| {
        let family = closure_family(a, g);
        if !seen.insert(family.clone()) {
            return true;
        }
        check_free_skeleton(&family_dual(a, &family).0).is_some()
    })
}

fn subsets_up_to(
    n: usize,
    budget: usize,
    from: usize,
    acc: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if !f(acc) {
        return false;
    }
    if acc.len() == budget {
        return true;
    }
    for i in from..n {
        acc.push(i);
        let ok = subsets_up_to(n, budget, i + 1, acc, f);
        acc.pop();
        if !ok {
            return false;
        }
    }
    true
}

/// Search for an embedding `A → B` by finding a surjective weak p-morphism
/// `B_* → A_*` and dualizing it as `U ↦ f⁻¹[U]`. Returns the image of each
/// element of `A`.
pub fn embeds(a: &FinitePdl, b: &FinitePdl, caps: &Caps) -> Result<Option<Vec<usize>>> {
    let Some(f) = find_surjective_wpm(b.dual(), a.dual(), caps)? else {
        return Ok(None);
    };
    let emb: Vec<usize> = (0..a.len())
        .map(|u| {
            let mut pre = ElemSet::empty(b.dual().len());
            for (x, &fx) in f.map.iter().enumerate() {
                if a.element(u).contains(fx) {
                    pre.insert(x);
                }
            }
            b.index_of(&pre).expect("preimage of an upset is an upset")
        })
        .collect();
    debug_assert!(is_embedding(a, b, &emb));
    Ok(Some(emb))
}

/// Check that `emb` is an injective homomorphism `A → B`.
pub fn is_embedding(a: &FinitePdl, b: &FinitePdl, emb: &[usize]) -> bool {
    let mut seen = vec![false; b.len()];
    for &i in emb {
        if seen[i] {
            return false;
        }
        seen[i] = true;
    }
    if emb[a.zero()] != b.zero() || emb[a.one()] != b.one() {
        return false;
    }
    for i in 0..a.len() {
        if emb[a.neg(i)] != b.neg(emb[i]) {
            return false;
        }
        for j in 0..a.len() {
            if emb[a.meet(i, j)] != b.meet(emb[i], emb[j])
                || emb[a.join(i, j)] != b.join(emb[i], emb[j])
            {
                return false;
            }
        }
    }
    true
}

/// Lattice JSON: `{"kind":"dual","poset":{...}}` or
/// `{"kind":"explicit","elements":[...],"leq":[...]}`.
pub fn lattice_from_json(text: &str, caps: &Caps) -> Result<FinitePdl> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    match v.get("kind").and_then(|k| k.as_str()) {
        Some("dual") => {
            let poset = v
                .get("poset")
                .ok_or_else(|| Error::Precondition("missing poset field".into()))?;
            let p = crate::poset::poset_from_json(&poset.to_string())?;
            from_dual(&p, caps)
        }
        Some("explicit") => {
            let p = crate::poset::poset_from_json(&v.to_string())?;
            Ok(validate_explicit(&ExplicitLattice(p), caps)?.algebra)
        }
        _ => Err(Error::Precondition("kind must be \"dual\" or \"explicit\"".into())),
    }
}
