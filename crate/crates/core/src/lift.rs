//! Subgroups of `GL_2(Z/p^2)` classified through their reduction mod `p`.
//!
//! A subgroup `G_2` with image `G` and kernel `1 + pS` is determined by `S`
//! (an `Ad(G)`-stable subspace of `Mat_2(F_p)`) and by the cosets of lifts of
//! the generators of `G`. Writing the lift of `s_j` as `σ(s_j)(1 + p k_j)`
//! with `σ` the entrywise lift, the admissible tuples `k` form an affine space
//! modulo `S`, and conjugation by `1 + p Mat_2` moves `k` by
//! `((Ad(s_j^{-1}) - 1) X)_j`. The remaining freedom is conjugation by lifts of
//! elements of `N(G)` stabilizing `S`, handled by explicit orbits.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matgroup::{
    closure_unchecked, general_linear, mat_det, mat_conj, mat_identity, mat_inv, mat_mul, normalizer, subgroup_from_elements,
    Mat2, MatGroup, MatGroupError,
};
use crate::modarith::{howell_form, quotient_decomposition, solve_affine, ResidueMatrix, RingSpec, SpanBuilder, Submodule};

/// One conjugacy class of subgroups of `GL_2(Z/p^2)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Level2Class {
    /// Position of the mod-`p` image in the level-1 class list used for lifting.
    pub image_index: usize,
    pub image_order: usize,
    /// The reduction kernel as a subspace of `Mat_2(F_p)`, entries ordered `(a, b, c, d)`.
    pub kernel: Submodule,
    pub generators: Vec<Mat2>,
    pub order: usize,
    pub key: Vec<u64>,
}

impl Level2Class {
    pub fn ring(&self) -> RingSpec {
        self.kernel.ring().with_level(2)
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.log_size() as usize
    }

    pub fn group(&self) -> MatGroup {
        closure_unchecked(self.ring(), &self.generators)
    }
}

fn unit_matrix(i: usize) -> Mat2 {
    let mut x = [0; 4];
    x[i] = 1;
    x
}

fn lift(x: &Mat2) -> Mat2 {
    *x
}

/// Every subspace of `F_p^4`, each in reduced echelon form.
pub fn all_subspaces(r1: RingSpec) -> Vec<Submodule> {
    let p = r1.p();
    let mut out = Vec::new();
    for mask in 0u32..16 {
        let pivots: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
        // free slots: (row, col) with col > pivot(row) and col not a pivot
        let mut slots = Vec::new();
        for (i, &c) in pivots.iter().enumerate() {
            for col in c + 1..4 {
                if !pivots.contains(&col) {
                    slots.push((i, col));
                }
            }
        }
        let count = (p as u64).pow(slots.len() as u32);
        for mut code in 0..count {
            let mut rows: Vec<Vec<u32>> = pivots
                .iter()
                .map(|&c| {
                    let mut v = vec![0u32; 4];
                    v[c] = 1;
                    v
                })
                .collect();
            for &(i, col) in &slots {
                rows[i][col] = (code % p as u64) as u32;
                code /= p as u64;
            }
            out.push(howell_form(r1, 4, &rows).expect("rank 4 rows"));
        }
    }
    out
}

fn ad_image(r1: RingSpec, g: &Mat2, s: &Submodule) -> Submodule {
    let rows: Vec<Vec<u32>> = s
        .basis()
        .iter()
        .map(|v| {
            let x = [v[0], v[1], v[2], v[3]];
            mat_conj(r1, g, &x).to_vec()
        })
        .collect();
    howell_form(r1, 4, &rows).expect("rank 4 rows")
}

fn is_stable(r1: RingSpec, gens: &[Mat2], s: &Submodule) -> bool {
    gens.iter().all(|g| {
        s.basis().iter().all(|v| {
            let x = [v[0], v[1], v[2], v[3]];
            s.contains(&mat_conj(r1, g, &x))
        })
    })
}

/// Affine description `φ(g) = c + Σ_i k_i cols[i]` of the coset label of each element.
struct Propagation {
    constant: Vec<Mat2>,
    cols: Vec<Vec<Mat2>>,
}

struct Setting<'a> {
    r1: RingSpec,
    r2: RingSpec,
    p: u32,
    g: &'a MatGroup,
    gens: Vec<Mat2>,
    gens_inv: Vec<Mat2>,
}

impl Setting<'_> {
    fn n(&self) -> usize {
        4 * self.gens.len()
    }

    /// `(σ(gh)^{-1} σ(g) σ(h) - 1) / p`.
    fn factor(&self, g: &Mat2, h: &Mat2) -> Mat2 {
        let r2 = self.r2;
        let gh = mat_mul(self.r1, g, h);
        let m = mat_mul(r2, &mat_inv(r2, &lift(&gh)).unwrap(), &mat_mul(r2, &lift(g), &lift(h)));
        self.divide_by_p(&m)
    }

    fn divide_by_p(&self, m: &Mat2) -> Mat2 {
        let id = mat_identity(self.r2);
        let mut t = [0; 4];
        for i in 0..4 {
            let d = self.r2.sub(m[i], id[i]);
            debug_assert_eq!(d % self.p, 0);
            t[i] = d / self.p;
        }
        t
    }

    fn add(&self, x: &Mat2, y: &Mat2) -> Mat2 {
        let r = self.r1;
        [r.add(x[0], y[0]), r.add(x[1], y[1]), r.add(x[2], y[2]), r.add(x[3], y[3])]
    }

    fn sub(&self, x: &Mat2, y: &Mat2) -> Mat2 {
        let r = self.r1;
        [r.sub(x[0], y[0]), r.sub(x[1], y[1]), r.sub(x[2], y[2]), r.sub(x[3], y[3])]
    }

    fn eval(&self, prop: &Propagation, i: usize, k: &[u32]) -> Mat2 {
        let r = self.r1;
        let mut v = prop.constant[i];
        for (c, col) in k.iter().zip(&prop.cols[i]) {
            for t in 0..4 {
                v[t] = r.add(v[t], r.mul(*c, col[t]));
            }
        }
        v
    }

    /// Propagates coset labels along the BFS tree and collects the closing
    /// constraints `P (t + Ad(s^{-1}) φ(g) + k_j - φ(h)) = 0` as `[A | b]` rows.
    fn propagate(&self, annihilator: &[Vec<u32>]) -> (Propagation, Submodule) {
        let r1 = self.r1;
        let n = self.n();
        let order = self.g.order();
        let zero = [0u32; 4];
        let mut constant = vec![zero; order];
        let mut cols = vec![vec![zero; n]; order];
        let mut acc = SpanBuilder::new(r1, n + 1);
        for i in 0..order {
            let x = self.g.elements()[i];
            for (j, s) in self.gens.iter().enumerate() {
                let h = self.g.cayley(i, j);
                let sinv = &self.gens_inv[j];
                let t = self.factor(&x, s);
                let c = self.add(&t, &mat_conj(r1, sinv, &constant[i]));
                let mut cs: Vec<Mat2> = cols[i].iter().map(|col| mat_conj(r1, sinv, col)).collect();
                for e in 0..4 {
                    cs[4 * j + e] = self.add(&cs[4 * j + e], &unit_matrix(e));
                }
                let tree = h != 0 && self.g.bfs_parent(h) == Some((i, j));
                if tree {
                    constant[h] = c;
                    cols[h] = cs;
                } else {
                    let dc = self.sub(&c, &constant[h]);
                    let dcols: Vec<Mat2> = cs.iter().zip(&cols[h]).map(|(a, b)| self.sub(a, b)).collect();
                    for pi in annihilator {
                        let mut row: Vec<u32> = dcols.iter().map(|col| r1.dot(pi, col)).collect();
                        row.push(r1.neg(r1.dot(pi, &dc)));
                        acc.push(&row);
                    }
                }
            }
        }
        (Propagation { constant, cols }, acc.finish())
    }
}

/// Smallest subgroup of `(Z/p^2)^×` containing `dets`, compared to the full unit group.
fn dets_generate_units(r2: RingSpec, dets: &[u32]) -> bool {
    let mut seen = vec![false; r2.modulus() as usize];
    seen[1] = true;
    let mut stack = vec![1u32];
    let mut count = 1;
    while let Some(x) = stack.pop() {
        for d in dets {
            let y = r2.mul(x, *d);
            if !seen[y as usize] {
                seen[y as usize] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    count == r2.unit_count()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.0[hi] = lo;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftOptions {
    pub surjective_det: bool,
    pub kernel_dim: Option<usize>,
}

/// Classes of subgroups of `GL_2(Z/p^2)` whose image mod `p` is conjugate to
/// `images[i]` for some `i`. `images` must be pairwise non-conjugate.
pub fn lift_classes(images: &[MatGroup], opts: LiftOptions) -> Result<Vec<Level2Class>, MatGroupError> {
    let Some(first) = images.first() else { return Ok(Vec::new()) };
    let r1 = first.ring();
    if r1.e() != 1 {
        return Err(MatGroupError::BadLevel { target: 2, level: r1.e() });
    }
    let gl1 = general_linear(r1);
    let spaces = all_subspaces(r1);
    let per_image: Vec<Result<Vec<Level2Class>, MatGroupError>> = images
        .par_iter()
        .enumerate()
        .map(|(idx, g)| lift_one(idx, g, &gl1, &spaces, opts))
        .collect();
    let mut out = Vec::new();
    for r in per_image {
        out.extend(r?);
    }
    Ok(out)
}

fn lift_one(
    idx: usize,
    g: &MatGroup,
    gl1: &MatGroup,
    spaces: &[Submodule],
    opts: LiftOptions,
) -> Result<Vec<Level2Class>, MatGroupError> {
    let r1 = g.ring();
    let r2 = r1.with_level(2);
    let p = r1.p();
    let gens: Vec<Mat2> = g.generators().to_vec();
    let set = Setting {
        r1,
        r2,
        p,
        g,
        gens_inv: gens.iter().map(|s| mat_inv(r1, s).unwrap()).collect(),
        gens,
    };
    let n = set.n();
    let norm = normalizer(gl1, g)?;

    // stable subspaces up to the normalizer
    let stable: Vec<&Submodule> = spaces
        .iter()
        .filter(|s| opts.kernel_dim.map_or(true, |d| s.log_size() as usize == d))
        .filter(|s| is_stable(r1, &set.gens, s))
        .collect();
    let mut seen: HashMap<&Submodule, ()> = HashMap::new();
    let mut reps: Vec<&Submodule> = Vec::new();
    for s in stable {
        if seen.contains_key(s) {
            continue;
        }
        reps.push(s);
        let mut stack = vec![s.clone()];
        let mut orbit = vec![s.clone()];
        while let Some(x) = stack.pop() {
            for m in norm.generators() {
                let y = ad_image(r1, m, &x);
                if !orbit.contains(&y) {
                    orbit.push(y.clone());
                    stack.push(y);
                }
            }
        }
        for y in orbit {
            if let Some(sp) = spaces.iter().find(|sp| **sp == y) {
                seen.insert(sp, ());
            }
        }
    }

    let mut out = Vec::new();
    for s in reps {
        let perp = crate::modarith::kernel(&ResidueMatrix::from_residue_rows(r1, 4, s.basis()).unwrap());
        let (prop, system) = set.propagate(perp.basis());
        let rows = system.basis();
        let a: Vec<Vec<u32>> = rows.iter().map(|row| row[..n].to_vec()).collect();
        let b: Vec<u32> = rows.iter().map(|row| row[n]).collect();
        let a = if a.is_empty() { ResidueMatrix::zeros(r1, 0, n) } else { ResidueMatrix::from_residue_rows(r1, n, &a).unwrap() };
        let Some(sol) = solve_affine(&a, &b).expect("consistent dimensions") else { continue };

        // conjugation by 1 + p Mat_2 and changes of k_j inside S
        let mut brows: Vec<Vec<u32>> = Vec::new();
        for e in 0..4 {
            let x = unit_matrix(e);
            let mut v = Vec::with_capacity(n);
            for sinv in &set.gens_inv {
                v.extend_from_slice(&set.sub(&mat_conj(r1, sinv, &x), &x));
            }
            brows.push(v);
        }
        for w in s.basis() {
            for j in 0..set.gens.len() {
                let mut v = vec![0u32; n];
                v[4 * j..4 * j + 4].copy_from_slice(w);
                brows.push(v);
            }
        }
        let bmod = howell_form(r1, n, &brows).unwrap();
        let dirs = quotient_decomposition(&sol.kernel, &bmod).expect("coboundaries lie in the solution space");
        let d = dirs.len();
        let total = (p as usize).pow(d as u32);
        let mut points: Vec<Vec<u32>> = Vec::with_capacity(total);
        for mut code in 0..total {
            let mut x = sol.particular.clone();
            for f in &dirs {
                r1.axpy(&mut x, (code % p as usize) as u32, &f.generator);
                code /= p as usize;
            }
            points.push(bmod.reduce(&x));
        }
        let lookup: HashMap<Vec<u32>, usize> = points.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();

        // lifts of the stabilizer of S in N(G) act on the torsor
        let stab_els: Vec<Mat2> = norm.elements().iter().copied().filter(|m| ad_image(r1, m, s) == *s).collect();
        let stab = subgroup_from_elements(r1, &stab_els);
        let mut uf = UnionFind((0..total).collect());
        for m in stab.generators() {
            let minv = mat_inv(r1, m).unwrap();
            let mhat = lift(m);
            let mhat_inv = mat_inv(r2, &mhat).unwrap();
            for (i, k) in points.iter().enumerate() {
                let mut image = Vec::with_capacity(n);
                for sj in &set.gens {
                    let h = mat_mul(r1, &mat_mul(r1, &minv, sj), m);
                    let hi = g.index_of(&h).expect("normalizer element");
                    let phi = set.eval(&prop, hi, k);
                    let y = mat_mul(r2, &lift(&h), &one_plus_p(r2, p, &phi));
                    let z = mat_mul(r2, &mat_mul(r2, &mhat, &y), &mhat_inv);
                    let w = mat_mul(r2, &mat_inv(r2, &lift(sj)).unwrap(), &z);
                    image.extend_from_slice(&set.divide_by_p(&w));
                }
                let key = bmod.reduce(&image);
                let target = *lookup.get(&key).expect("conjugation preserves the torsor");
                uf.union(i, target);
            }
        }
        for i in 0..total {
            if uf.find(i) != i {
                continue;
            }
            let k = &points[i];
            let mut gens2: Vec<Mat2> = set
                .gens
                .iter()
                .enumerate()
                .map(|(j, sj)| {
                    let kj = [k[4 * j], k[4 * j + 1], k[4 * j + 2], k[4 * j + 3]];
                    mat_mul(r2, &lift(sj), &one_plus_p(r2, p, &kj))
                })
                .collect();
            gens2.extend(s.basis().iter().map(|w| one_plus_p(r2, p, &[w[0], w[1], w[2], w[3]])));
            let dets: Vec<u32> = gens2.iter().map(|x| mat_det(r2, x)).collect();
            if opts.surjective_det && !dets_generate_units(r2, &dets) {
                continue;
            }
            let mut key = vec![idx as u64];
            key.extend(s.basis().iter().map(|w| w.iter().fold(0u64, |acc, &x| acc * p as u64 + x as u64)));
            key.push(u64::MAX);
            key.extend(k.iter().map(|&x| x as u64));
            out.push(Level2Class {
                image_index: idx,
                image_order: g.order(),
                kernel: s.clone(),
                generators: gens2,
                order: g.order() * (p as usize).pow(s.log_size()),
                key,
            });
        }
    }
    Ok(out)
}

fn one_plus_p(r2: RingSpec, p: u32, x: &Mat2) -> Mat2 {
    let id = mat_identity(r2);
    [
        r2.add(id[0], p * x[0]),
        r2.add(id[1], p * x[1]),
        r2.add(id[2], p * x[2]),
        r2.add(id[3], p * x[3]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subspace_counts() {
        assert_eq!(all_subspaces(RingSpec::new(2, 1).unwrap()).len(), 1 + 15 + 35 + 15 + 1);
        assert_eq!(all_subspaces(RingSpec::new(3, 1).unwrap()).len(), 1 + 40 + 130 + 40 + 1);
    }

    #[test]
    fn trivial_image_gives_kernel_subspaces() {
        let r1 = RingSpec::new(3, 1).unwrap();
        let triv = closure_unchecked(r1, &[]);
        let c = lift_classes(&[triv], LiftOptions::default()).unwrap();
        // subgroups of 1 + 3 Mat_2 up to GL_2(F_3)-conjugation of subspaces
        assert!(c.iter().all(|x| x.order == 3usize.pow(x.kernel_dim() as u32)));
        assert_eq!(c.iter().filter(|x| x.kernel_dim() == 0).count(), 1);
        assert_eq!(c.iter().filter(|x| x.kernel_dim() == 4).count(), 1);
    }
}
