//! Explicit finite subgroups of `GL_2(Z/p^e)`.
//!
//! A [`MatGroup`] is built by breadth-first closure from a generator list and
//! keeps the full element table, the right Cayley graph on its generators and a
//! BFS spanning tree, which is what the cohomology solver walks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modarith::{ModArithError, RingSpec};

/// Matrix `[[a, b], [c, d]]` stored as `[a, b, c, d]`.
pub type Mat2 = [u32; 4];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatGroupError {
    #[error("generator {0:?} is not invertible")]
    NonInvertible(Mat2),
    #[error("elements live over different rings")]
    RingMismatch,
    #[error("group is not contained in the ambient group")]
    NotContained,
    #[error("ambient group is not solvable; completeness not guaranteed (use best-effort mode)")]
    NotSolvable,
    #[error("target level {target} must be between 1 and {level}")]
    BadLevel { target: u32, level: u32 },
    #[error("group is not cyclic")]
    NotCyclic,
    #[error(transparent)]
    Ring(#[from] ModArithError),
}

pub fn mat_mul(r: RingSpec, x: &Mat2, y: &Mat2) -> Mat2 {
    let m = r.modulus() as u64;
    let f = |a: u32, b: u32, c: u32, d: u32| ((a as u64 * b as u64 + c as u64 * d as u64) % m) as u32;
    [
        f(x[0], y[0], x[1], y[2]),
        f(x[0], y[1], x[1], y[3]),
        f(x[2], y[0], x[3], y[2]),
        f(x[2], y[1], x[3], y[3]),
    ]
}

pub fn mat_det(r: RingSpec, x: &Mat2) -> u32 {
    r.sub(r.mul(x[0], x[3]), r.mul(x[1], x[2]))
}

pub fn mat_trace(r: RingSpec, x: &Mat2) -> u32 {
    r.add(x[0], x[3])
}

pub fn mat_identity(r: RingSpec) -> Mat2 {
    let one = 1 % r.modulus();
    [one, 0, 0, one]
}

pub fn mat_inv(r: RingSpec, x: &Mat2) -> Option<Mat2> {
    let di = r.inv(mat_det(r, x))?;
    Some([r.mul(di, x[3]), r.neg(r.mul(di, x[1])), r.neg(r.mul(di, x[2])), r.mul(di, x[0])])
}

pub fn mat_pow(r: RingSpec, x: &Mat2, mut k: u64) -> Mat2 {
    let mut acc = mat_identity(r);
    let mut base = *x;
    while k > 0 {
        if k & 1 == 1 {
            acc = mat_mul(r, &acc, &base);
        }
        base = mat_mul(r, &base, &base);
        k >>= 1;
    }
    acc
}

/// `g x g^{-1}`.
pub fn mat_conj(r: RingSpec, g: &Mat2, x: &Mat2) -> Mat2 {
    let gi = mat_inv(r, g).expect("conjugating element must be invertible");
    mat_mul(r, &mat_mul(r, g, x), &gi)
}

pub fn mat_reduce(x: &Mat2, target: RingSpec) -> Mat2 {
    let m = target.modulus();
    [x[0] % m, x[1] % m, x[2] % m, x[3] % m]
}

pub fn mat_order(r: RingSpec, x: &Mat2) -> u64 {
    let id = mat_identity(r);
    let mut y = *x;
    let mut n = 1u64;
    while y != id {
        y = mat_mul(r, &y, x);
        n += 1;
    }
    n
}

pub fn is_scalar(x: &Mat2) -> bool {
    x[1] == 0 && x[2] == 0 && x[0] == x[3]
}

fn encode(r: RingSpec, x: &Mat2) -> u64 {
    let m = r.modulus() as u64;
    ((x[0] as u64 * m + x[1] as u64) * m + x[2] as u64) * m + x[3] as u64
}

/// An invertible 2x2 matrix over `Z/p^e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GL2Element {
    pub ring: RingSpec,
    pub m: Mat2,
}

impl GL2Element {
    pub fn new(ring: RingSpec, a: i64, b: i64, c: i64, d: i64) -> Result<Self, MatGroupError> {
        let m = [ring.reduce(a), ring.reduce(b), ring.reduce(c), ring.reduce(d)];
        Self::from_mat(ring, m)
    }

    pub fn from_mat(ring: RingSpec, m: Mat2) -> Result<Self, MatGroupError> {
        let m = mat_reduce(&m, ring);
        if !ring.is_unit(mat_det(ring, &m)) {
            return Err(MatGroupError::NonInvertible(m));
        }
        Ok(GL2Element { ring, m })
    }

    pub fn det(&self) -> u32 {
        mat_det(self.ring, &self.m)
    }

    pub fn trace(&self) -> u32 {
        mat_trace(self.ring, &self.m)
    }

    pub fn mul(&self, other: &GL2Element) -> GL2Element {
        GL2Element { ring: self.ring, m: mat_mul(self.ring, &self.m, &other.m) }
    }

    pub fn inv(&self) -> GL2Element {
        GL2Element { ring: self.ring, m: mat_inv(self.ring, &self.m).unwrap() }
    }

    pub fn order(&self) -> u64 {
        mat_order(self.ring, &self.m)
    }
}

impl fmt::Display for GL2Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.m;
        write!(f, "({},{};{},{})", m[0], m[1], m[2], m[3])
    }
}

#[derive(Clone, Debug)]
enum Index {
    Dense(Vec<u32>),
    Hashed(FxHashMap<u64, u32>),
}

const DENSE_LIMIT: u64 = 1 << 20;
const NONE: u32 = u32::MAX;

impl Index {
    fn new(r: RingSpec, capacity: usize) -> Self {
        let m = r.modulus() as u64;
        let space = m * m * m * m;
        if space <= DENSE_LIMIT {
            Index::Dense(vec![NONE; space as usize])
        } else {
            let mut h = FxHashMap::default();
            h.reserve(capacity);
            Index::Hashed(h)
        }
    }

    fn get(&self, key: u64) -> Option<u32> {
        match self {
            Index::Dense(v) => {
                let x = v[key as usize];
                (x != NONE).then_some(x)
            }
            Index::Hashed(h) => h.get(&key).copied(),
        }
    }

    fn insert(&mut self, key: u64, i: u32) {
        match self {
            Index::Dense(v) => v[key as usize] = i,
            Index::Hashed(h) => {
                h.insert(key, i);
            }
        }
    }
}

/// A finite subgroup of `GL_2(Z/p^e)` with its element table and Cayley graph.
#[derive(Clone, Debug)]
pub struct MatGroup {
    ring: RingSpec,
    elements: Vec<Mat2>,
    gens: Vec<Mat2>,
    /// `cayley[i * k + j]` is the index of `elements[i] * gens[j]`.
    cayley: Vec<u32>,
    /// BFS tree: element `i > 0` was first reached as `elements[parent.0] * gens[parent.1]`.
    parent: Vec<(u32, u8)>,
    index: Index,
}

impl MatGroup {
    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Mat2] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> GL2Element {
        GL2Element { ring: self.ring, m: self.elements[i] }
    }

    pub fn generators(&self) -> &[Mat2] {
        &self.gens
    }

    pub fn num_generators(&self) -> usize {
        self.gens.len()
    }

    pub fn index_of(&self, x: &Mat2) -> Option<usize> {
        if x.iter().any(|&v| v >= self.ring.modulus()) {
            return None;
        }
        self.index.get(encode(self.ring, x)).map(|i| i as usize)
    }

    pub fn contains(&self, x: &Mat2) -> bool {
        self.index_of(x).is_some()
    }

    /// Index of `elements[i] * gens[j]`.
    pub fn cayley(&self, i: usize, j: usize) -> usize {
        self.cayley[i * self.gens.len() + j] as usize
    }

    /// BFS parent of element `i` together with the generator used; `None` for the identity.
    pub fn bfs_parent(&self, i: usize) -> Option<(usize, usize)> {
        if i == 0 {
            None
        } else {
            let (p, j) = self.parent[i];
            Some((p as usize, j as usize))
        }
    }

    /// Word in the generators (by index) whose product is `elements[i]`.
    pub fn word(&self, i: usize) -> Vec<usize> {
        let mut w = Vec::new();
        let mut cur = i;
        while let Some((p, j)) = self.bfs_parent(cur) {
            w.push(j);
            cur = p;
        }
        w.reverse();
        w
    }

    pub fn is_subgroup_of(&self, other: &MatGroup) -> bool {
        self.ring == other.ring && self.gens.iter().all(|g| other.contains(g))
    }

    pub fn same_elements(&self, other: &MatGroup) -> bool {
        self.ring == other.ring && self.order() == other.order() && self.is_subgroup_of(other)
    }

    /// Sorted element codes; equal for equal subgroups.
    pub fn sorted_codes(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.elements.iter().map(|x| encode(self.ring, x)).collect();
        v.sort_unstable();
        v
    }

    pub fn conjugate(&self, g: &Mat2) -> MatGroup {
        let gens: Vec<Mat2> = self.gens.iter().map(|x| mat_conj(self.ring, g, x)).collect();
        closure_unchecked(self.ring, &gens)
    }

    pub fn element_orders(&self) -> Vec<u64> {
        self.elements.iter().map(|x| mat_order(self.ring, x)).collect()
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic_generator().is_some()
    }

    /// An element whose order equals the group order.
    pub fn cyclic_generator(&self) -> Option<Mat2> {
        let n = self.order() as u64;
        if self.gens.len() == 1 && mat_order(self.ring, &self.gens[0]) == n {
            return Some(self.gens[0]);
        }
        self.elements.iter().copied().find(|x| mat_order(self.ring, x) == n)
    }

    /// The image of `det`, as a sorted list of residues.
    pub fn det_image(&self) -> Vec<u32> {
        let s: BTreeSet<u32> = self.elements.iter().map(|x| mat_det(self.ring, x)).collect();
        s.into_iter().collect()
    }

    pub fn det_surjective(&self) -> bool {
        self.det_image().len() as u32 == self.ring.unit_count()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut hist = BTreeMap::new();
        for o in self.element_orders() {
            *hist.entry(o).or_insert(0usize) += 1;
        }
        let mut traces: Vec<u32> = self.elements.iter().map(|x| mat_trace(self.ring, x)).collect();
        traces.sort_unstable();
        Fingerprint {
            order: self.order(),
            order_histogram: hist.into_iter().collect(),
            det_image_size: self.det_image().len(),
            traces,
        }
    }

    /// Image of the group modulo `p^target`.
    pub fn image_at_level(&self, target: u32) -> Result<MatGroup, MatGroupError> {
        let e = self.ring.e();
        if target == 0 || target > e {
            return Err(MatGroupError::BadLevel { target, level: e });
        }
        let tr = self.ring.with_level(target);
        let gens: Vec<Mat2> = self.gens.iter().map(|g| mat_reduce(g, tr)).collect();
        Ok(closure_unchecked(tr, &gens))
    }

    /// Elements of `self` lying in `sub`, as a subgroup (for `sub` any group over the same ring).
    pub fn intersect(&self, sub: &MatGroup) -> MatGroup {
        let els: Vec<Mat2> = self.elements.iter().copied().filter(|x| sub.contains(x)).collect();
        subgroup_from_elements(self.ring, &els)
    }
}

/// Conjugation-invariant data used to prefilter conjugacy tests.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint {
    pub order: usize,
    pub order_histogram: Vec<(u64, usize)>,
    pub det_image_size: usize,
    pub traces: Vec<u32>,
}

/// Closure of a generator list. Redundant generators are dropped so the
/// recorded generator list is an irredundant prefix-greedy subset.
pub fn closure(ring: RingSpec, gens: &[GL2Element]) -> Result<MatGroup, MatGroupError> {
    let mut mats = Vec::with_capacity(gens.len());
    for g in gens {
        if g.ring != ring {
            return Err(MatGroupError::RingMismatch);
        }
        if !ring.is_unit(mat_det(ring, &g.m)) {
            return Err(MatGroupError::NonInvertible(g.m));
        }
        mats.push(g.m);
    }
    Ok(closure_unchecked(ring, &mats))
}

/// Closure from raw matrices, which the caller guarantees are invertible.
pub fn closure_from_mats(ring: RingSpec, gens: &[Mat2]) -> Result<MatGroup, MatGroupError> {
    for g in gens {
        if !ring.is_unit(mat_det(ring, g)) {
            return Err(MatGroupError::NonInvertible(*g));
        }
    }
    Ok(closure_unchecked(ring, gens))
}

pub(crate) fn closure_unchecked(ring: RingSpec, gens: &[Mat2]) -> MatGroup {
    let id = mat_identity(ring);
    let mut kept: Vec<Mat2> = Vec::new();
    let mut group = bfs(ring, &kept);
    for g in gens {
        let g = mat_reduce(g, ring);
        if g == id || group.contains(&g) {
            continue;
        }
        kept.push(g);
        group = bfs(ring, &kept);
    }
    group
}

/// Smallest subgroup containing the given elements, adding them one at a time.
pub(crate) fn subgroup_from_elements(ring: RingSpec, els: &[Mat2]) -> MatGroup {
    closure_unchecked(ring, els)
}

fn bfs(ring: RingSpec, gens: &[Mat2]) -> MatGroup {
    let id = mat_identity(ring);
    let k = gens.len();
    let mut index = Index::new(ring, 16);
    let mut elements = vec![id];
    let mut parent = vec![(0u32, 0u8)];
    index.insert(encode(ring, &id), 0);
    let mut cayley: Vec<u32> = Vec::new();
    let mut head = 0;
    while head < elements.len() {
        let x = elements[head];
        for (j, g) in gens.iter().enumerate() {
            let y = mat_mul(ring, &x, g);
            let code = encode(ring, &y);
            let idx = match index.get(code) {
                Some(i) => i,
                None => {
                    let i = elements.len() as u32;
                    elements.push(y);
                    parent.push((head as u32, j as u8));
                    index.insert(code, i);
                    i
                }
            };
            cayley.push(idx);
        }
        head += 1;
    }
    debug_assert_eq!(cayley.len(), elements.len() * k);
    MatGroup { ring, elements, gens: gens.to_vec(), cayley, parent, index }
}

pub fn general_linear(ring: RingSpec) -> MatGroup {
    let one = 1;
    let minus = ring.neg(1);
    let mut gens = vec![[one, one, 0, one], [one, 0, one, one]];
    if let Some(u) = ring.unit_generator() {
        gens.push([u, 0, 0, one]);
    } else {
        gens.push([minus, 0, 0, one]);
        gens.push([ring.reduce(5), 0, 0, one]);
    }
    closure_unchecked(ring, &gens)
}

/// Upper-triangular invertible matrices.
pub fn borel(ring: RingSpec) -> MatGroup {
    let one = 1;
    let mut gens = vec![[one, one, 0, one]];
    let units: Vec<u32> = match ring.unit_generator() {
        Some(u) => vec![u],
        None => vec![ring.neg(1), ring.reduce(5)],
    };
    for &u in &units {
        gens.push([u, 0, 0, one]);
        gens.push([one, 0, 0, u]);
    }
    closure_unchecked(ring, &gens)
}

/// Reduction modulo `p^target`: the image group and the kernel (elements congruent to 1).
pub fn reduction(group: &MatGroup, target: u32) -> Result<(MatGroup, MatGroup), MatGroupError> {
    let image = group.image_at_level(target)?;
    let tr = image.ring();
    let id = mat_identity(tr);
    let ker_els: Vec<Mat2> = group.elements.iter().copied().filter(|x| mat_reduce(x, tr) == id).collect();
    let kernel = subgroup_from_elements(group.ring, &ker_els);
    Ok((image, kernel))
}

/// Lift of a level-one matrix with entries in `[0, p)`.
pub fn lift_entries(x: &Mat2, target: RingSpec) -> Mat2 {
    mat_reduce(x, target)
}

/// Full preimage in `GL_2(Z/p^e)` of a subgroup of `GL_2(F_p)`.
pub fn greatest_possible(g: &MatGroup, e: u32) -> Result<MatGroup, MatGroupError> {
    if g.ring.e() != 1 {
        return Err(MatGroupError::BadLevel { target: 1, level: g.ring.e() });
    }
    let r = g.ring.with_level(e);
    let mut gens: Vec<Mat2> = g.gens.iter().map(|x| lift_entries(x, r)).collect();
    gens.extend(congruence_kernel_generators(r, 1));
    Ok(closure_unchecked(r, &gens))
}

/// Generators of `ker(GL_2(Z/p^e) -> GL_2(Z/p^level))`.
pub fn congruence_kernel_generators(r: RingSpec, level: u32) -> Vec<Mat2> {
    let mut gens = Vec::new();
    for j in level..r.e() {
        let q = r.p_pow(j);
        for pos in 0..4 {
            let mut x = mat_identity(r);
            x[pos] = r.add(x[pos], q);
            gens.push(x);
        }
    }
    gens
}

/// `{g in ambient : g sub g^{-1} = sub}`.
pub fn normalizer(ambient: &MatGroup, sub: &MatGroup) -> Result<MatGroup, MatGroupError> {
    if !sub.is_subgroup_of(ambient) {
        return Err(MatGroupError::NotContained);
    }
    let r = ambient.ring;
    let els: Vec<Mat2> = ambient
        .elements
        .iter()
        .copied()
        .filter(|g| sub.gens.iter().all(|s| sub.contains(&mat_conj(r, g, s))))
        .collect();
    Ok(subgroup_from_elements(r, &els))
}

/// One generator (of maximal order) per cyclic subgroup, as element indices.
pub fn cyclic_generator_indices(group: &MatGroup) -> Vec<usize> {
    let r = group.ring;
    let n = group.order();
    let mut done = vec![false; n];
    let mut out = Vec::new();
    // visit elements by decreasing order so each subgroup is found through a generator
    let orders = group.element_orders();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| (std::cmp::Reverse(orders[i]), i));
    for i in idx {
        if done[i] {
            continue;
        }
        out.push(i);
        let x = group.elements[i];
        let ord = orders[i];
        let mut y = mat_identity(r);
        for k in 0..ord {
            let j = group.index_of(&y).expect("powers stay in the group");
            if num_integer::gcd(k, ord) == 1 || ord == 1 {
                done[j] = true;
            }
            y = mat_mul(r, &y, &x);
        }
    }
    out.sort_unstable();
    out
}

/// All distinct cyclic subgroups, each generated by a single element of maximal order.
pub fn cyclic_subgroups(group: &MatGroup) -> Vec<MatGroup> {
    cyclic_generator_indices(group)
        .into_iter()
        .map(|i| closure_unchecked(group.ring, &[group.elements[i]]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralPredicates {
    pub has_nontrivial_homothety_mod_p: bool,
    pub det_surjective: bool,
    pub sylow_p_order: u64,
    pub is_borel_conjugate: bool,
    pub trace_det_pairs: BTreeSet<(u32, u32)>,
}

pub fn structural_predicates(group: &MatGroup) -> StructuralPredicates {
    let r = group.ring;
    let p = r.p() as u64;
    let mut sylow = 1u64;
    let mut n = group.order() as u64;
    while n % p == 0 {
        sylow *= p;
        n /= p;
    }
    StructuralPredicates {
        has_nontrivial_homothety_mod_p: has_homothety_mod_p(group),
        det_surjective: group.det_surjective(),
        sylow_p_order: sylow,
        is_borel_conjugate: !stable_lines(group).is_empty(),
        trace_det_pairs: group.elements.iter().map(|x| (mat_trace(r, x), mat_det(r, x))).collect(),
    }
}

/// Whether the reduction mod `p` contains a scalar matrix other than the identity.
pub fn has_homothety_mod_p(group: &MatGroup) -> bool {
    let r1 = group.ring.with_level(1);
    let id = mat_identity(r1);
    group.elements.iter().any(|x| {
        let y = mat_reduce(x, r1);
        is_scalar(&y) && y != id
    })
}

/// Lines of `F_p^2` (as spanning vectors `(1, t)` or `(0, 1)`) stable under the reduction mod `p`.
pub fn stable_lines(group: &MatGroup) -> Vec<[u32; 2]> {
    let r1 = group.ring.with_level(1);
    let p = r1.p();
    let mut lines: Vec<[u32; 2]> = (0..p).map(|t| [1, t]).collect();
    lines.push([0, 1]);
    lines
        .into_iter()
        .filter(|v| {
            group.gens.iter().all(|g| {
                let g = mat_reduce(g, r1);
                let w = [r1.add(r1.mul(g[0], v[0]), r1.mul(g[1], v[1])), r1.add(r1.mul(g[2], v[0]), r1.mul(g[3], v[1]))];
                r1.sub(r1.mul(w[0], v[1]), r1.mul(w[1], v[0])) == 0
            })
        })
        .collect()
}

/// Commutator subgroup, as the normal closure of generator commutators.
pub fn derived_subgroup(group: &MatGroup) -> MatGroup {
    let r = group.ring;
    let mut seeds = Vec::new();
    for a in &group.gens {
        for b in &group.gens {
            let ai = mat_inv(r, a).unwrap();
            let bi = mat_inv(r, b).unwrap();
            seeds.push(mat_mul(r, &mat_mul(r, a, b), &mat_mul(r, &ai, &bi)));
        }
    }
    let mut d = closure_unchecked(r, &seeds);
    loop {
        let mut extra = Vec::new();
        for g in &group.gens {
            for x in &d.gens {
                let y = mat_conj(r, g, x);
                if !d.contains(&y) {
                    extra.push(y);
                }
            }
        }
        if extra.is_empty() {
            return d;
        }
        let mut gens = d.gens.clone();
        gens.extend(extra);
        d = closure_unchecked(r, &gens);
    }
}

pub fn is_solvable(group: &MatGroup) -> bool {
    let mut g = group.clone();
    loop {
        if g.order() == 1 {
            return true;
        }
        let d = derived_subgroup(&g);
        if d.order() == g.order() {
            return false;
        }
        g = d;
    }
}

/// Some `g` in `ambient` with `g h g^{-1} = k`, if one exists.
pub fn conjugating_element(ambient: &MatGroup, h: &MatGroup, k: &MatGroup) -> Option<Mat2> {
    if h.order() != k.order() {
        return None;
    }
    let r = ambient.ring;
    ambient.elements.iter().copied().find(|g| h.gens.iter().all(|x| k.contains(&mat_conj(r, g, x))))
}

/// Lexicographically least sorted element-code list over all ambient conjugates.
pub fn canonical_key(ambient: &MatGroup, h: &MatGroup) -> Vec<u64> {
    let r = ambient.ring;
    let n = normalizer(ambient, h).expect("subgroup of ambient");
    let mut seen: Vec<bool> = vec![false; ambient.order()];
    let mut best: Option<Vec<u64>> = None;
    for (i, g) in ambient.elements.iter().enumerate() {
        if seen[i] {
            continue;
        }
        // the whole coset g N gives the same conjugate
        for x in &n.elements {
            if let Some(j) = ambient.index_of(&mat_mul(r, g, x)) {
                seen[j] = true;
            }
        }
        let gi = mat_inv(r, g).unwrap();
        let mut codes: Vec<u64> =
            h.elements.iter().map(|x| encode(r, &mat_mul(r, &mat_mul(r, g, x), &gi))).collect();
        codes.sort_unstable();
        if best.as_ref().map_or(true, |b| codes < *b) {
            best = Some(codes);
        }
    }
    best.unwrap()
}

#[cfg(test)]
pub(crate) fn mat_code(r: RingSpec, x: &Mat2) -> u64 {
    encode(r, x)
}

#[cfg(test)]
pub(crate) fn mat_from_code(r: RingSpec, mut code: u64) -> Mat2 {
    let m = r.modulus() as u64;
    let mut out = [0u32; 4];
    for slot in out.iter_mut().rev() {
        *slot = (code % m) as u32;
        code /= m;
    }
    out
}

/// Element-order histogram, handy in reports.
pub fn order_histogram(group: &MatGroup) -> HashMap<u64, usize> {
    let mut h = HashMap::new();
    for o in group.element_orders() {
        *h.entry(o).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(p: u32, e: u32) -> RingSpec {
        RingSpec::new(p, e).unwrap()
    }

    fn el(r: RingSpec, a: i64, b: i64, c: i64, d: i64) -> GL2Element {
        GL2Element::new(r, a, b, c, d).unwrap()
    }

    #[test]
    fn closure_examples() {
        let r = ring(5, 1);
        assert_eq!(closure(r, &[el(r, 1, 1, 0, 1)]).unwrap().order(), 5);
        let b = closure(r, &[el(r, 1, 1, 0, 1), el(r, 2, 0, 0, 1), el(r, 1, 0, 0, 2)]).unwrap();
        assert_eq!(b.order(), 80);
        assert_eq!(general_linear(ring(2, 2)).order(), 96);
    }

    #[test]
    fn general_linear_orders() {
        for (p, e) in [(2, 1), (3, 1), (5, 1), (7, 1), (3, 2)] {
            let r = ring(p, e);
            let q = p as usize;
            let expect = q.pow(4 * (e - 1)) * (q * q - 1) * (q * q - q);
            assert_eq!(general_linear(r).order(), expect, "p={p} e={e}");
        }
    }

    #[test]
    fn non_invertible_generator_rejected() {
        let r = ring(3, 1);
        let bad = GL2Element { ring: r, m: [1, 1, 1, 1] };
        assert!(matches!(closure(r, &[bad]), Err(MatGroupError::NonInvertible(_))));
        assert!(GL2Element::new(r, 3, 0, 0, 1).is_err());
    }

    #[test]
    fn words_multiply_to_elements() {
        let g = general_linear(ring(3, 1));
        for i in 0..g.order() {
            let mut x = mat_identity(g.ring());
            for j in g.word(i) {
                x = mat_mul(g.ring(), &x, &g.generators()[j]);
            }
            assert_eq!(x, g.elements()[i]);
        }
    }

    #[test]
    fn reduction_examples() {
        let g = general_linear(ring(2, 2));
        let (im, ker) = reduction(&g, 1).unwrap();
        assert_eq!((im.order(), ker.order()), (6, 16));

        let r = ring(3, 2);
        let c = closure(r, &[el(r, 1, 3, 0, 1)]).unwrap();
        let (im, ker) = reduction(&c, 1).unwrap();
        assert_eq!((im.order(), ker.order()), (1, 3));

        let b = borel(ring(5, 1));
        let gp = greatest_possible(&b, 2).unwrap();
        let (im, ker) = reduction(&gp, 1).unwrap();
        assert_eq!((im.order(), ker.order()), (80, 625));
    }

    #[test]
    fn greatest_possible_examples() {
        let triv = closure(ring(3, 1), &[]).unwrap();
        assert_eq!(greatest_possible(&triv, 2).unwrap().order(), 81);
        assert_eq!(greatest_possible(&borel(ring(5, 1)), 2).unwrap().order(), 50000);
        assert_eq!(greatest_possible(&general_linear(ring(2, 1)), 2).unwrap().order(), 96);
    }

    #[test]
    fn kernel_elements_have_order_p() {
        for p in [3u32, 5] {
            let r = ring(p, 2);
            let triv = closure(ring(p, 1), &[]).unwrap();
            let k = greatest_possible(&triv, 2).unwrap();
            assert!(k.element_orders().iter().all(|&o| o == 1 || o == p as u64));
            assert_eq!(k.ring(), r);
        }
    }

    #[test]
    fn normalizer_examples() {
        for p in [3u32, 5, 7] {
            let r = ring(p, 1);
            let gl = general_linear(r);
            let h = closure(r, &[el(r, 1, 1, 0, 1)]).unwrap();
            let n = normalizer(&gl, &h).unwrap();
            assert!(n.same_elements(&borel(r)));
            assert!(normalizer(&gl, &gl).unwrap().same_elements(&gl));
            let center = closure_from_mats(r, &[[r.unit_generator().unwrap(), 0, 0, r.unit_generator().unwrap()]]).unwrap();
            assert!(normalizer(&gl, &center).unwrap().same_elements(&gl));
        }
    }

    #[test]
    fn cyclic_subgroup_examples() {
        let r = ring(5, 1);
        assert_eq!(cyclic_subgroups(&closure(r, &[el(r, 1, 1, 0, 1)]).unwrap()).len(), 2);
        let v = closure(r, &[el(r, -1, 0, 0, 1), el(r, 1, 0, 0, -1)]).unwrap();
        assert_eq!(cyclic_subgroups(&v).len(), 4);
        assert_eq!(cyclic_subgroups(&general_linear(ring(2, 1))).len(), 5);
    }

    #[test]
    fn predicates_examples() {
        let r = ring(5, 1);
        let gl = structural_predicates(&general_linear(r));
        assert!(gl.has_nontrivial_homothety_mod_p);
        assert!(!gl.is_borel_conjugate);
        let b = closure(r, &[el(r, 1, 1, 0, 1), el(r, 1, 0, 0, 2)]).unwrap();
        let s = structural_predicates(&b);
        assert!(!s.has_nontrivial_homothety_mod_p);
        assert!(s.det_surjective);
        assert!(s.is_borel_conjugate);
        assert_eq!(s.sylow_p_order, 5);
    }

    #[test]
    fn solvability() {
        assert!(is_solvable(&general_linear(ring(3, 1))));
        assert!(is_solvable(&general_linear(ring(2, 2))));
        assert!(!is_solvable(&general_linear(ring(5, 1))));
    }

    #[test]
    fn canonical_key_is_conjugation_invariant() {
        let r = ring(3, 1);
        let gl = general_linear(r);
        let h = closure(r, &[el(r, 1, 1, 0, 1)]).unwrap();
        let k = h.conjugate(&[0, 1, 1, 0]);
        assert!(!h.same_elements(&k));
        assert_eq!(canonical_key(&gl, &h), canonical_key(&gl, &k));
        assert!(conjugating_element(&gl, &h, &k).is_some());
    }

    #[test]
    fn code_round_trip() {
        let r = ring(7, 1);
        let x = [3, 6, 0, 5];
        assert_eq!(mat_from_code(r, mat_code(r, &x)), x);
    }
}
