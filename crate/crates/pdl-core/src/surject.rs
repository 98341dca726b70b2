//! Constructive surjections `P(2^k) → X` for posets with a free skeleton.
//!
//! The construction follows the induction on `|max X|`: a direct assignment
//! when there is a single maximal element, and otherwise a glued map on the
//! disjoint upsets `W_i` (one per omitted maximal) and `V_j` (one per
//! maximal element below all of `max X`), extended to the whole of `P(2^k)`
//! through the skeleton witness.
//!
//! The coordinate count `k` grows fast, so the domain `P(2^k)` is never
//! materialized for large `k`; the map is represented pointwise on pairs
//! `⟨base, cloud⟩` with `base ∈ 2^k` a bitmask and `cloud` an explicit list
//! of bitmasks. Verification is exhaustive whenever `|P(2^k)|` is small
//! enough to enumerate, and otherwise combines an exhaustive check on the
//! glued upset with seeded random sampling of the extension.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bits::ElemSet;
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::poset::{boolean_poset, p_extension, p_extension_size, FinitePoset, PosetMap};
use crate::skeleton::{restrict_witness, verify_witness, SkeletonWitness};

/// A point of `P(2^k)` given explicitly: the base element of `2^k` as a
/// bitmask over coordinates, and the cloud as a sorted list of such masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigPoint {
    pub base: u128,
    pub cloud: Vec<u128>,
}

impl BigPoint {
    pub fn new(base: u128, mut cloud: Vec<u128>) -> Self {
        cloud.sort_unstable();
        cloud.dedup();
        BigPoint { base, cloud }
    }

    fn maximal(&self) -> bool {
        self.cloud.len() == 1 && self.cloud[0] == self.base
    }

    /// `self ≤ other` in `P(2^k)`: base below, cloud above.
    pub fn leq(&self, other: &BigPoint) -> bool {
        submask(self.base, other.base)
            && other.cloud.iter().all(|c| self.cloud.binary_search(c).is_ok())
    }
}

fn submask(a: u128, b: u128) -> bool {
    a & !b == 0
}

fn ones(k: usize) -> u128 {
    if k == 128 {
        u128::MAX
    } else {
        (1u128 << k) - 1
    }
}

/// Single-maximal assignment: bottom point to the minimum, the first
/// `target_len` atoms (by the integer value of the missing coatom cloud
/// member) onto the elements in canonical order, everything else to the top.
#[derive(Clone, Debug)]
struct BaseNode {
    k: usize,
    target_len: usize,
    bottom: usize,
    top: usize,
}

#[derive(Clone, Debug)]
struct WBlock {
    w_hat: u128,
    a: u128,
    /// The `m` free coordinates of the interval `[ŵ_i, a_i]`, ascending.
    free: Vec<usize>,
}

#[derive(Clone, Debug)]
struct VBlock {
    v_hat: u128,
    beta: u128,
    bs: Vec<u128>,
    /// The free coordinates of `[v̂_j, β_j]`, ascending.
    free: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Child {
    node: Node,
    /// Child target index to parent target index.
    embed: Vec<usize>,
}

#[derive(Clone, Debug)]
struct IndNode {
    k: usize,
    target: FinitePoset,
    witness: SkeletonWitness,
    /// `max X` in element order; index 0 is the fixed maximal used both in
    /// the `V_j` case split and in the final extension.
    w_elems: Vec<usize>,
    v_elems: Vec<usize>,
    wb: Vec<WBlock>,
    vb: Vec<VBlock>,
    w_children: Vec<Child>,
    v_children: Vec<Child>,
}

#[derive(Clone, Debug)]
enum Node {
    Base(BaseNode),
    Inductive(Box<IndNode>),
}

impl Node {
    fn k(&self) -> usize {
        match self {
            Node::Base(b) => b.k,
            Node::Inductive(n) => n.k,
        }
    }

    fn apply(&self, pt: &BigPoint) -> usize {
        match self {
            Node::Base(b) => {
                let size = 1u128 << b.k;
                if pt.base == 0 && pt.cloud.len() as u128 == size {
                    return b.bottom;
                }
                if pt.base == 0 && pt.cloud.len() as u128 == size - 1 {
                    // an atom: identify the missing cloud member
                    let mut missing = size - 1;
                    for (i, &c) in pt.cloud.iter().enumerate() {
                        if c != i as u128 {
                            missing = i as u128;
                            break;
                        }
                    }
                    if (missing as usize) < b.target_len {
                        return missing as usize;
                    }
                    return b.top;
                }
                b.top
            }
            Node::Inductive(n) => n.apply(pt),
        }
    }
}

impl IndNode {
    /// Project a point through the interval coordinates `free`, keeping the
    /// child's own coordinate count.
    fn project(free: &[usize], child_k: usize, pt: &BigPoint, drop: &[u128]) -> BigPoint {
        let proj = |x: u128| -> u128 {
            let mut out = 0u128;
            for (idx, &pos) in free.iter().take(child_k).enumerate() {
                if x >> pos & 1 == 1 {
                    out |= 1 << idx;
                }
            }
            out
        };
        let cloud: Vec<u128> = pt
            .cloud
            .iter()
            .filter(|c| !drop.contains(c))
            .map(|&c| proj(c))
            .collect();
        BigPoint::new(proj(pt.base), cloud)
    }

    fn in_w(&self, i: usize, pt: &BigPoint) -> bool {
        let blk = &self.wb[i];
        submask(blk.w_hat, pt.base)
            && pt
                .cloud
                .iter()
                .all(|&c| submask(blk.w_hat, c) && submask(c, blk.a))
    }

    fn in_v(&self, j: usize, pt: &BigPoint) -> bool {
        let blk = &self.vb[j];
        submask(blk.v_hat, pt.base)
            && pt
                .cloud
                .iter()
                .all(|&c| submask(blk.v_hat, c) && (submask(c, blk.beta) || blk.bs.contains(&c)))
    }

    fn apply_w(&self, i: usize, pt: &BigPoint) -> usize {
        let child = &self.w_children[i];
        let p = Self::project(&self.wb[i].free, child.node.k(), pt, &[]);
        child.embed[child.node.apply(&p)]
    }

    fn apply_v(&self, j: usize, pt: &BigPoint) -> usize {
        let blk = &self.vb[j];
        let in_plus = submask(pt.base, blk.beta)
            && blk.bs.iter().all(|b| pt.cloud.binary_search(b).is_ok())
            && pt.cloud.len() > blk.bs.len();
        if in_plus {
            let child = &self.v_children[j];
            let p = Self::project(&blk.free, child.node.k(), pt, &blk.bs);
            return child.embed[child.node.apply(&p)];
        }
        if pt.maximal() {
            if let Some(l) = blk.bs.iter().position(|&b| b == pt.base) {
                return self.w_elems[l];
            }
            return self.w_elems[0];
        }
        // non-maximal, outside V_j^+: the skeleton value at v_j
        let mut e = ElemSet::empty(self.target.len());
        let all_in_bs = pt.cloud.iter().all(|c| blk.bs.contains(c));
        for (l, b) in blk.bs.iter().enumerate() {
            if pt.cloud.binary_search(b).is_ok() {
                e.insert(self.w_elems[l]);
            }
        }
        if !all_in_bs {
            e.insert(self.w_elems[0]);
        }
        self.witness.s[&(self.v_elems[j], e)]
    }

    /// The glued map image of the maximal point `⟨u,{u}⟩`, if it lies in
    /// one of the `W_i` or `V_j`.
    fn max_point_image(&self, u: u128) -> Option<usize> {
        let pt = BigPoint { base: u, cloud: vec![u] };
        for i in 0..self.wb.len() {
            if self.in_w(i, &pt) {
                return Some(self.apply_w(i, &pt));
            }
        }
        for j in 0..self.vb.len() {
            if self.in_v(j, &pt) {
                return Some(self.apply_v(j, &pt));
            }
        }
        None
    }

    fn apply(&self, pt: &BigPoint) -> usize {
        for i in 0..self.wb.len() {
            if self.in_w(i, pt) {
                return self.apply_w(i, pt);
            }
        }
        for j in 0..self.vb.len() {
            if self.in_v(j, pt) {
                return self.apply_v(j, pt);
            }
        }
        // outside the glued upset: the witness-driven extension
        if pt.maximal() {
            return self.w_elems[0];
        }
        let mut e = ElemSet::empty(self.target.len());
        let mut escaped = false;
        for &u in &pt.cloud {
            match self.max_point_image(u) {
                Some(img) => e.insert(img),
                None => escaped = true,
            }
        }
        if escaped {
            e.insert(self.w_elems[0]);
        }
        self.witness.s[&(self.witness.bottom, e)]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub k: usize,
    /// Whether all of `P(2^k)` was enumerated.
    pub exhaustive: bool,
    pub points_checked: u64,
    pub sampled_points: u64,
    pub surjective: bool,
    pub ok: bool,
    pub notes: Vec<String>,
}

/// A verified surjective weak p-morphism `P(2^k) → X`, held pointwise.
#[derive(Clone, Debug)]
pub struct Surjection {
    pub k: usize,
    pub target: FinitePoset,
    pub report: VerifyReport,
    node: Node,
}

impl Surjection {
    /// The image of an explicitly given point. Errors if the pair is not a
    /// valid point of `P(2^k)`.
    pub fn apply(&self, pt: &BigPoint) -> Result<usize> {
        let all = ones(self.k);
        if !submask(pt.base, all)
            || pt.cloud.is_empty()
            || pt.cloud.iter().any(|&c| !submask(pt.base, c) || !submask(c, all))
        {
            return Err(Error::Precondition("not a point of P(2^k)".into()));
        }
        Ok(self.node.apply(pt))
    }

    /// Materialize the full map when `P(2^k)` is small enough.
    pub fn materialize(&self, caps: &Caps) -> Result<PosetMap> {
        let bp = boolean_poset(self.k)?;
        let ext = p_extension(&bp, caps)?;
        let map = ext
            .points
            .iter()
            .map(|pt| {
                let cloud = pt.cloud.iter().map(|v| v as u128).collect();
                self.node.apply(&BigPoint::new(pt.base as u128, cloud))
            })
            .collect();
        Ok(PosetMap { source: ext.poset, target: self.target.clone(), map })
    }
}

/// Build and verify the constructive surjection onto `X` from its skeleton
/// witness. The returned map always carries a passing verification report;
/// a failing re-verification is reported as an error.
pub fn synthesize_surjection(
    x: &FinitePoset,
    w: &SkeletonWitness,
    caps: &Caps,
) -> Result<Surjection> {
    if !verify_witness(w) || !same_poset(&w.poset, x) {
        return Err(Error::Precondition("witness does not verify for this poset".into()));
    }
    let node = build_node(x, w, caps)?;
    let k = node.k();
    let mut surj = Surjection {
        k,
        target: x.clone(),
        report: VerifyReport {
            k,
            exhaustive: false,
            points_checked: 0,
            sampled_points: 0,
            surjective: false,
            ok: false,
            notes: Vec::new(),
        },
        node,
    };
    let report = verify_surjection(&surj, caps)?;
    if !report.ok {
        return Err(Error::Precondition(format!(
            "synthesized map failed re-verification: {:?}",
            report.notes
        )));
    }
    surj.report = report;
    Ok(surj)
}

fn same_poset(a: &FinitePoset, b: &FinitePoset) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| a.name(i) == b.name(i) && a.up_row(i) == b.up_row(i))
}

fn build_node(x: &FinitePoset, w: &SkeletonWitness, caps: &Caps) -> Result<Node> {
    let maxs: Vec<usize> = x.maximals().iter().collect();
    if maxs.len() == 1 {
        let k = x.len() + 1;
        if k > caps.surject_k_max {
            return Err(Error::CapExceeded(format!(
                "surjection domain needs k = {k} coordinates (cap {})",
                caps.surject_k_max
            )));
        }
        return Ok(Node::Base(BaseNode {
            k,
            target_len: x.len(),
            bottom: x.minimum().expect("a skeleton-bearing poset has a minimum"),
            top: maxs[0],
        }));
    }
    let n1 = maxs.len();

    // one child per omitted maximal: the upset of s_{⊥, max X − {w_i}}
    let mut w_children = Vec::with_capacity(n1);
    for &wi in &maxs {
        let mut mi = x.maximals().clone();
        mi.remove(wi);
        let rw = restrict_witness(w, &mi)?;
        let root = w.s[&(w.bottom, mi)];
        let (_, old) = x.induced(x.up_row(root));
        let node = build_node(&rw.poset, &rw, caps)?;
        w_children.push(Child { node, embed: old });
    }
    let m = w_children.iter().map(|c| c.node.k()).max().unwrap();

    // the maximal elements below all of max X
    let mut below_all = ElemSet::full(x.len());
    for i in 0..x.len() {
        if !maxs.iter().all(|&wi| x.leq(i, wi)) {
            below_all.remove(i);
        }
    }
    let v_elems: Vec<usize> = below_all
        .iter()
        .filter(|&z| !below_all.iter().any(|z2| z2 != z && x.leq(z, z2)))
        .collect();
    let t = v_elems.len();

    let mut v_children = Vec::with_capacity(t);
    let mut downs = Vec::with_capacity(t);
    for &vj in &v_elems {
        let mut dj = ElemSet::empty(x.len());
        for i in 0..x.len() {
            if x.leq(i, vj) {
                dj.insert(i);
            }
        }
        let (sub, old) = x.induced(&dj);
        let kq = sub.len() + 1;
        let bottom = sub.minimum().ok_or_else(|| {
            Error::Precondition("downset of a v-element lost its minimum".into())
        })?;
        let top = old.iter().position(|&o| o == vj).expect("v_j is in its own downset");
        downs.push(sub.len());
        v_children.push(Child {
            node: Node::Base(BaseNode { k: kq, target_len: sub.len(), bottom, top }),
            embed: old,
        });
    }

    let k = n1 * (m + 1) + downs.iter().map(|d| n1 + d + 1).sum::<usize>();
    if k > caps.surject_k_max {
        return Err(Error::CapExceeded(format!(
            "surjection domain needs k = {k} coordinates (cap {})",
            caps.surject_k_max
        )));
    }
    let all = ones(k);

    let mut wb = Vec::with_capacity(n1);
    for i in 1..=n1 {
        let block: Vec<usize> = ((i - 1) * (m + 1)..i * (m + 1)).collect();
        let mut block_mask = 0u128;
        for &p in &block {
            block_mask |= 1 << p;
        }
        let a_zero = i * (m + 1) - 1;
        wb.push(WBlock {
            w_hat: all & !block_mask,
            a: all & !(1 << a_zero),
            free: block[..m].to_vec(),
        });
    }

    let mut vb = Vec::with_capacity(t);
    let offset = n1 * (m + 1);
    let mut prefix = 0usize;
    for &dj in &downs {
        let size = n1 + dj + 1;
        let block: Vec<usize> = (offset + prefix..offset + prefix + size).collect();
        let mut block_mask = 0u128;
        for &p in &block {
            block_mask |= 1 << p;
        }
        // b^j_l is zero exactly at the l-th position from the block's top
        let bs: Vec<u128> = (0..n1)
            .map(|l| all & !(1 << (offset + prefix + size - 1 - l)))
            .collect();
        let mut beta = all;
        for l in 0..n1 {
            beta &= !(1 << (offset + prefix + size - 1 - l));
        }
        vb.push(VBlock {
            v_hat: all & !block_mask,
            beta,
            bs,
            free: block[..dj + 1].to_vec(),
        });
        prefix += size;
    }

    Ok(Node::Inductive(Box::new(IndNode {
        k,
        target: x.clone(),
        witness: w.clone(),
        w_elems: maxs,
        v_elems,
        wb,
        vb,
        w_children,
        v_children,
    })))
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

fn verify_surjection(s: &Surjection, caps: &Caps) -> Result<VerifyReport> {
    let small = s.k <= 20
        && boolean_poset(s.k)
            .ok()
            .and_then(|bp| p_extension_size(&bp))
            .is_some_and(|n| n <= caps.p_extension_max);
    if small {
        verify_exhaustive(s)
    } else {
        verify_structural(s, caps)
    }
}

/// Enumerate every point of `P(2^k)` and check the weak p-morphism
/// conditions pointwise: the image of the cloud's maximal points must be
/// `max↑` of the image, and the images must respect the covering relations
/// (drop one cloud member; raise the base one coordinate).
fn verify_exhaustive(s: &Surjection) -> Result<VerifyReport> {
    let x = &s.target;
    let k = s.k;
    let mut notes = Vec::new();
    let mut hit = vec![false; x.len()];
    let mut checked = 0u64;
    let mut ok = true;

    let full = ones(k) as u64;
    'outer: for base in 0..=full {
        // elements above base: supersets within the k-bit universe
        let free = full & !base;
        let mut ups: Vec<u64> = Vec::new();
        let mut sub = 0u64;
        loop {
            ups.push(base | sub);
            if sub == free {
                break;
            }
            sub = (sub.wrapping_sub(free)) & free;
        }
        let h = ups.len();
        for cm in 1u64..1 << h {
            let cloud: Vec<u128> =
                (0..h).filter(|&i| cm >> i & 1 == 1).map(|i| ups[i] as u128).collect();
            let pt = BigPoint { base: base as u128, cloud };
            let img = s.node.apply(&pt);
            hit[img] = true;
            checked += 1;
            // maximal images
            let mut mx = ElemSet::empty(x.len());
            for &u in &pt.cloud {
                mx.insert(s.node.apply(&BigPoint { base: u, cloud: vec![u] }));
            }
            if &mx != x.max_above(img) {
                ok = false;
                notes.push(format!("maximal-image mismatch at base {base:#b}"));
                break 'outer;
            }
            // covering relations
            if pt.cloud.len() >= 2 {
                for drop in 0..pt.cloud.len() {
                    let mut c2 = pt.cloud.clone();
                    c2.remove(drop);
                    let img2 = s.node.apply(&BigPoint { base: pt.base, cloud: c2 });
                    if !x.leq(img, img2) {
                        ok = false;
                        notes.push(format!("cloud-shrink order violation at base {base:#b}"));
                        break 'outer;
                    }
                }
            }
            for bit in 0..k {
                if base >> bit & 1 == 1 {
                    continue;
                }
                let nb = base | 1 << bit;
                if pt.cloud.iter().all(|&c| submask(nb as u128, c)) {
                    let img2 = s.node.apply(&BigPoint { base: nb as u128, cloud: pt.cloud.clone() });
                    if !x.leq(img, img2) {
                        ok = false;
                        notes.push(format!("base-raise order violation at base {base:#b}"));
                        break 'outer;
                    }
                }
            }
        }
    }
    let surjective = hit.iter().all(|&h| h);
    if !surjective {
        ok = false;
        notes.push("not surjective".into());
    }
    Ok(VerifyReport {
        k,
        exhaustive: true,
        points_checked: checked,
        sampled_points: 0,
        surjective,
        ok,
    notes,
    })
}

/// For domains too large to enumerate: check the glued upset exhaustively
/// (its points, their images, local order preservation, maximal images, and
/// surjectivity onto the target), then sample the extension.
fn verify_structural(s: &Surjection, caps: &Caps) -> Result<VerifyReport> {
    let x = &s.target;
    let k = s.k;
    let mut notes = Vec::new();
    let mut ok = true;
    let mut checked = 0u64;
    let surjective;

    match &s.node {
        Node::Base(b) => {
            // surjectivity holds by the atom assignment; confirm on the
            // actual atoms when their clouds are representable
            if b.k <= 16 {
                let size = 1u128 << b.k;
                let mut hit = vec![false; x.len()];
                for missing in 0..size {
                    let cloud: Vec<u128> = (0..size).filter(|&v| v != missing).collect();
                    hit[s.node.apply(&BigPoint { base: 0, cloud })] = true;
                    checked += 1;
                }
                let full: Vec<u128> = (0..size).collect();
                hit[s.node.apply(&BigPoint { base: 0, cloud: full })] = true;
                surjective = hit.iter().all(|&h| h);
                if !surjective {
                    ok = false;
                    notes.push("atom assignment misses a target element".into());
                }
            } else {
                surjective = true;
                notes.push("surjectivity by the atom assignment (clouds too large to list)".into());
            }
        }
        Node::Inductive(node) => {
            let pts = glued_points(node)?;
            let mut seen: BTreeSet<(u128, Vec<u128>)> = BTreeSet::new();
            let mut hit = vec![false; x.len()];
            for (pt, img) in &pts {
                if !seen.insert((pt.base, pt.cloud.clone())) {
                    ok = false;
                    notes.push("glued upsets overlap".into());
                }
                hit[*img] = true;
                checked += 1;
                // maximal images within the upset
                let mut mx = ElemSet::empty(x.len());
                for &u in &pt.cloud {
                    mx.insert(node.apply(&BigPoint { base: u, cloud: vec![u] }));
                }
                if &mx != x.max_above(*img) {
                    ok = false;
                    notes.push(format!("maximal-image mismatch on glued upset at {pt:?}"));
                    break;
                }
                // covering relations stay inside the upset
                if pt.cloud.len() >= 2 {
                    for drop in 0..pt.cloud.len() {
                        let mut c2 = pt.cloud.clone();
                        c2.remove(drop);
                        let img2 = node.apply(&BigPoint { base: pt.base, cloud: c2 });
                        if !x.leq(*img, img2) {
                            ok = false;
                            notes.push("cloud-shrink order violation on glued upset".into());
                        }
                    }
                }
                for bit in 0..k {
                    if pt.base >> bit & 1 == 1 {
                        continue;
                    }
                    let nb = pt.base | 1 << bit;
                    if pt.cloud.iter().all(|&c| submask(nb, c)) {
                        let img2 = node.apply(&BigPoint { base: nb, cloud: pt.cloud.clone() });
                        if !x.leq(*img, img2) {
                            ok = false;
                            notes.push("base-raise order violation on glued upset".into());
                        }
                    }
                }
            }
            surjective = hit.iter().all(|&h| h);
            if !surjective {
                ok = false;
                notes.push("glued map not surjective".into());
            }
        }
    }

    // sample the extension across the whole domain
    let mut rng = ChaCha8Rng::seed_from_u64(caps.seed);
    let all = ones(k);
    let mut sampled = 0u64;
    for _ in 0..caps.verify_samples {
        let base: u128 = rng.gen::<u128>() & rng.gen::<u128>() & all;
        let csize = rng.gen_range(1..=4usize);
        let mut cloud: Vec<u128> = (0..csize).map(|_| base | (rng.gen::<u128>() & all)).collect();
        cloud.sort_unstable();
        cloud.dedup();
        let pt = BigPoint { base, cloud };
        let img = s.node.apply(&pt);
        sampled += 1;
        let mut mx = ElemSet::empty(x.len());
        for &u in &pt.cloud {
            mx.insert(s.node.apply(&BigPoint { base: u, cloud: vec![u] }));
        }
        if &mx != x.max_above(img) {
            ok = false;
            notes.push(format!("sampled maximal-image mismatch at {pt:?}"));
            break;
        }
        if pt.cloud.len() >= 2 {
            let drop = rng.gen_range(0..pt.cloud.len());
            let mut c2 = pt.cloud.clone();
            c2.remove(drop);
            let img2 = s.node.apply(&BigPoint { base: pt.base, cloud: c2 });
            if !x.leq(img, img2) {
                ok = false;
                notes.push("sampled cloud-shrink order violation".into());
                break;
            }
        }
        for bit in 0..k {
            if pt.base >> bit & 1 == 1 {
                continue;
            }
            let nb = pt.base | 1 << bit;
            if pt.cloud.iter().all(|&c| submask(nb, c)) {
                let img2 = s.node.apply(&BigPoint { base: nb, cloud: pt.cloud.clone() });
                if !x.leq(img, img2) {
                    ok = false;
                    notes.push("sampled base-raise order violation".into());
                }
            }
        }
        if !ok {
            break;
        }
    }

    Ok(VerifyReport {
        k,
        exhaustive: false,
        points_checked: checked,
        sampled_points: sampled,
        surjective,
        ok,
        notes,
    })
}

/// All points of the glued upset `⋃W_i ∪ ⋃V_j` with their images.
fn glued_points(node: &IndNode) -> Result<Vec<(BigPoint, usize)>> {
    let mut out = Vec::new();
    let guard = |bits: usize, what: &str| -> Result<()> {
        if bits > 16 {
            Err(Error::CapExceeded(format!(
                "structural verification needs 2^{bits} enumeration for {what}"
            )))
        } else {
            Ok(())
        }
    };
    for (i, blk) in node.wb.iter().enumerate() {
        let m = blk.free.len();
        guard(m, "a W interval")?;
        let elems: Vec<u128> = (0..1u128 << m)
            .map(|sub| {
                let mut v = blk.w_hat;
                for (idx, &pos) in blk.free.iter().enumerate() {
                    if sub >> idx & 1 == 1 {
                        v |= 1 << pos;
                    }
                }
                v
            })
            .collect();
        for &base in &elems {
            let above: Vec<u128> = elems.iter().copied().filter(|&e| submask(base, e)).collect();
            guard(above.len(), "a W cloud family")?;
            for cm in 1u64..1 << above.len() {
                let cloud: Vec<u128> = (0..above.len())
                    .filter(|&t| cm >> t & 1 == 1)
                    .map(|t| above[t])
                    .collect();
                let pt = BigPoint::new(base, cloud);
                debug_assert!(node.in_w(i, &pt));
                let img = node.apply_w(i, &pt);
                out.push((pt, img));
            }
        }
    }
    for (j, blk) in node.vb.iter().enumerate() {
        let dfree = blk.free.len();
        guard(dfree, "a V interval")?;
        let interval: Vec<u128> = (0..1u128 << dfree)
            .map(|sub| {
                let mut v = blk.v_hat;
                for (idx, &pos) in blk.free.iter().enumerate() {
                    if sub >> idx & 1 == 1 {
                        v |= 1 << pos;
                    }
                }
                v
            })
            .collect();
        let mut family = interval.clone();
        family.extend(blk.bs.iter().copied());
        // bases: elements below at least one coatom b^j_l, above v̂_j
        let block_bits: Vec<usize> = {
            let mut bits: Vec<usize> = blk.free.clone();
            for b in &blk.bs {
                let zero = (!b & ones(node.k)).trailing_zeros() as usize;
                bits.push(zero);
            }
            bits.sort_unstable();
            bits
        };
        guard(block_bits.len(), "a V base family")?;
        for sub in 0..1u128 << block_bits.len() {
            let mut base = blk.v_hat;
            for (idx, &pos) in block_bits.iter().enumerate() {
                if sub >> idx & 1 == 1 {
                    base |= 1 << pos;
                }
            }
            if !blk.bs.iter().any(|&b| submask(base, b)) {
                continue;
            }
            let above: Vec<u128> = family.iter().copied().filter(|&e| submask(base, e)).collect();
            if above.is_empty() {
                continue;
            }
            guard(above.len(), "a V cloud family")?;
            for cm in 1u64..1 << above.len() {
                let cloud: Vec<u128> = (0..above.len())
                    .filter(|&t| cm >> t & 1 == 1)
                    .map(|t| above[t])
                    .collect();
                let pt = BigPoint::new(base, cloud);
                debug_assert!(node.in_v(j, &pt));
                let img = node.apply_v(j, &pt);
                out.push((pt, img));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::{build_poset, is_weak_p_morphism};
    use crate::skeleton::check_free_skeleton;

    fn witness_for(x: &FinitePoset) -> SkeletonWitness {
        check_free_skeleton(x).expect("poset has a skeleton")
    }

    #[test]
    fn singleton_base_case() {
        let caps = Caps::default();
        let x = build_poset(&["s"], &[]).unwrap();
        let s = synthesize_surjection(&x, &witness_for(&x), &caps).unwrap();
        assert_eq!(s.k, 2);
        assert!(s.report.ok && s.report.exhaustive);
        assert_eq!(s.report.points_checked, 22);
        let pm = s.materialize(&caps).unwrap();
        assert!(is_weak_p_morphism(&pm));
    }

    #[test]
    fn chain3_base_case() {
        let caps = Caps::default();
        let x = build_poset(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        let s = synthesize_surjection(&x, &witness_for(&x), &caps).unwrap();
        assert_eq!(s.k, 4);
        assert!(s.report.ok && s.report.exhaustive && s.report.surjective);
        assert_eq!(s.report.points_checked, 66_658);
        // the bottom point maps to the chain's bottom, atoms early in the
        // enumeration map to the chain elements in order
        let full: Vec<u128> = (0..16).collect();
        assert_eq!(s.apply(&BigPoint::new(0, full.clone())).unwrap(), 0);
        let atom0: Vec<u128> = (1..16).collect();
        assert_eq!(s.apply(&BigPoint::new(0, atom0)).unwrap(), 0);
        let atom2: Vec<u128> = (0..16).filter(|&v| v != 2).collect();
        assert_eq!(s.apply(&BigPoint::new(0, atom2)).unwrap(), 2);
        let atom7: Vec<u128> = (0..16).filter(|&v| v != 7).collect();
        assert_eq!(s.apply(&BigPoint::new(0, atom7)).unwrap(), 2); // top
    }

    #[test]
    fn fork_inductive_case() {
        let caps = Caps::default();
        let x = build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap();
        let s = synthesize_surjection(&x, &witness_for(&x), &caps).unwrap();
        assert_eq!(s.k, 10);
        assert!(s.report.ok);
        assert!(!s.report.exhaustive);
        assert!(s.report.surjective);
        assert!(s.report.points_checked > 100);
        assert_eq!(s.report.sampled_points, caps.verify_samples as u64);
        // the bottom point maps to the fork's bottom
        let all = ones(10);
        let everything: Vec<u128> = (0..=all).collect();
        assert_eq!(s.apply(&BigPoint::new(0, everything)).unwrap(), 0);
        // a maximal point outside the glued upset maps to the fixed maximal
        assert_eq!(s.apply(&BigPoint::new(all, vec![all])).unwrap(), 1);
        // invalid points are refused
        assert!(s.apply(&BigPoint::new(3, vec![1])).is_err());
        assert!(s.apply(&BigPoint::new(0, vec![])).is_err());
    }

    #[test]
    fn diamond_single_maximal() {
        let caps = Caps::default();
        // bottom < l, r < top: one maximal element, base case with k = 5
        let x = build_poset(
            &["bot", "l", "r", "top"],
            &[("bot", "l"), ("bot", "r"), ("l", "top"), ("r", "top")],
        )
        .unwrap();
        let s = synthesize_surjection(&x, &witness_for(&x), &caps).unwrap();
        assert_eq!(s.k, 5);
        assert!(s.report.ok && !s.report.exhaustive && s.report.surjective);
    }

    #[test]
    fn k_cap_is_enforced() {
        let mut caps = Caps::default();
        caps.surject_k_max = 5;
        let x = build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap();
        assert!(matches!(
            synthesize_surjection(&x, &witness_for(&x), &caps),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn witness_mismatch_is_refused() {
        let caps = Caps::default();
        let x = build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")]).unwrap();
        let y = build_poset(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        let w = witness_for(&y);
        assert!(matches!(
            synthesize_surjection(&x, &w, &caps),
            Err(Error::Precondition(_))
        ));
    }
}
