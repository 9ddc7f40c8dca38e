//! Low-degree cohomology of explicit matrix groups.
//!
//! Cocycles are found by propagating `ξ(g s) = ξ(g) + g·ξ(s)` along the BFS
//! tree of the Cayley graph, so every `ξ(g)` is a linear expression in the
//! values on the generators; the remaining Cayley edges give the cocycle
//! equations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matgroup::{
    closure_unchecked, cyclic_generator_indices, mat_conj, mat_identity, mat_inv, mat_mul, mat_reduce, Mat2,
    MatGroup,
};
use crate::modarith::{
    howell_form, kernel, quotient_decomposition, solve_affine, ModArithError, ResidueMatrix, RingSpec, SpanBuilder,
    Submodule,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CohomologyError {
    #[error("module over Z/{module} cannot carry an action of a group over Z/{group}")]
    RingMismatch { module: u32, group: u32 },
    #[error("subgroup is not contained in the group")]
    NotContained,
    #[error("group is not cyclic")]
    NotCyclic,
    #[error("element does not normalize the subgroup")]
    NotNormalizing,
    #[error("first cohomology is trivial")]
    TrivialCohomology,
    #[error("first cohomology is not cyclic")]
    NotCyclicCohomology,
    #[error("unsupported group shape: {0}")]
    UnsupportedShape(String),
    #[error(transparent)]
    Linear(#[from] ModArithError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModuleKind {
    /// Column vectors `(Z/p^e)^2` with the natural left action.
    Natural,
    /// `Mat_2(Z/p^e)` with `g·X = g X g^{-1}`, coordinates `(a, b, c, d)`.
    Adjoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GModule {
    pub ring: RingSpec,
    pub kind: ModuleKind,
}

impl GModule {
    pub fn natural(ring: RingSpec) -> Self {
        GModule { ring, kind: ModuleKind::Natural }
    }

    pub fn adjoint(ring: RingSpec) -> Self {
        GModule { ring, kind: ModuleKind::Adjoint }
    }

    pub fn rank(&self) -> usize {
        match self.kind {
            ModuleKind::Natural => 2,
            ModuleKind::Adjoint => 4,
        }
    }

    fn check(&self, group_ring: RingSpec) -> Result<(), CohomologyError> {
        if self.ring.p() != group_ring.p() || self.ring.e() > group_ring.e() {
            return Err(CohomologyError::RingMismatch { module: self.ring.modulus(), group: group_ring.modulus() });
        }
        Ok(())
    }

    /// Row-major `rank × rank` matrix of the action of `g`.
    pub fn action(&self, g: &Mat2) -> Vec<u32> {
        let r = self.ring;
        let g = mat_reduce(g, r);
        match self.kind {
            ModuleKind::Natural => g.to_vec(),
            ModuleKind::Adjoint => {
                let mut out = vec![0u32; 16];
                for col in 0..4 {
                    let mut x = [0u32; 4];
                    x[col] = 1 % r.modulus();
                    let y = mat_conj(r, &g, &x);
                    for row in 0..4 {
                        out[row * 4 + col] = y[row];
                    }
                }
                out
            }
        }
    }

    pub fn act(&self, g: &Mat2, v: &[u32]) -> Vec<u32> {
        let n = self.rank();
        let a = self.action(g);
        (0..n).map(|i| self.ring.dot(&a[i * n..(i + 1) * n], v)).collect()
    }
}

fn matrix(ring: RingSpec, n: usize, data: &[u32]) -> ResidueMatrix {
    let rows: Vec<Vec<u32>> = data.chunks(n).map(|c| c.to_vec()).collect();
    ResidueMatrix::from_residue_rows(ring, n, &rows).expect("square data")
}

fn minus_identity(ring: RingSpec, n: usize, a: &[u32]) -> Vec<u32> {
    let mut out = a.to_vec();
    for i in 0..n {
        out[i * n + i] = ring.sub(out[i * n + i], 1 % ring.modulus());
    }
    out
}

/// A 1-cocycle given by its value on every group element (in element-table order).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocycleClass {
    pub values: Vec<Vec<u32>>,
}

/// Invariant factors with one representative per cyclic factor. For second
/// cohomology the representative carries a single value: the point of
/// `Ĥ^0` of the Sylow subgroup that it corresponds to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyGroup {
    pub invariant_factors: Vec<u64>,
    pub representatives: Vec<CocycleClass>,
}

impl CohomologyGroup {
    pub fn trivial() -> Self {
        CohomologyGroup { invariant_factors: Vec::new(), representatives: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.invariant_factors.is_empty()
    }

    pub fn order(&self) -> u64 {
        self.invariant_factors.iter().product()
    }
}

/// Cocycles and coboundaries of a group acting on a module, in the
/// coordinates `(ξ(s_1), …, ξ(s_k))`.
pub struct CocycleSpace<'a> {
    group: &'a MatGroup,
    module: GModule,
    /// `r × rk` coefficient matrices, one per element, concatenated.
    coeffs: Vec<u32>,
    pub cocycles: Submodule,
    pub coboundaries: Submodule,
}

impl<'a> CocycleSpace<'a> {
    pub fn new(group: &'a MatGroup, module: GModule) -> Result<Self, CohomologyError> {
        module.check(group.ring())?;
        let ring = module.ring;
        let r = module.rank();
        let k = group.num_generators();
        let n = r * k;
        let size = r * n;
        let order = group.order();
        let mut coeffs = vec![0u32; order * size];
        let actions: Vec<Vec<u32>> = group.elements().iter().map(|g| module.action(g)).collect();
        let mut acc = SpanBuilder::new(ring, n);
        let mut cand = vec![0u32; size];
        for i in 0..order {
            for j in 0..k {
                let h = group.cayley(i, j);
                cand.copy_from_slice(&coeffs[i * size..(i + 1) * size]);
                let a = &actions[i];
                for row in 0..r {
                    for col in 0..r {
                        let at = row * n + j * r + col;
                        cand[at] = ring.add(cand[at], a[row * r + col]);
                    }
                }
                if h != 0 && group.bfs_parent(h) == Some((i, j)) {
                    coeffs[h * size..(h + 1) * size].copy_from_slice(&cand);
                } else {
                    let target = &coeffs[h * size..(h + 1) * size];
                    for row in 0..r {
                        let eq: Vec<u32> =
                            (0..n).map(|c| ring.sub(cand[row * n + c], target[row * n + c])).collect();
                        acc.push(&eq);
                    }
                }
            }
        }
        let constraints = acc.finish();
        let cocycles = if constraints.is_zero() {
            Submodule::full(ring, n)
        } else {
            kernel(&ResidueMatrix::from_residue_rows(ring, n, constraints.basis())?)
        };
        let mut brows = Vec::with_capacity(r);
        for t in 0..r {
            let mut v = vec![0u32; n];
            for (j, s) in group.generators().iter().enumerate() {
                let a = minus_identity(ring, r, &module.action(s));
                for row in 0..r {
                    v[j * r + row] = a[row * r + t];
                }
            }
            brows.push(v);
        }
        let coboundaries = howell_form(ring, n, &brows)?;
        Ok(CocycleSpace { group, module, coeffs, cocycles, coboundaries })
    }

    pub fn group(&self) -> &MatGroup {
        self.group
    }

    pub fn module(&self) -> GModule {
        self.module
    }

    fn width(&self) -> usize {
        self.module.rank() * self.group.num_generators()
    }

    /// `r × rk` coefficient block of element `i`.
    pub fn coefficients(&self, i: usize) -> &[u32] {
        let r = self.module.rank();
        let size = r * self.width();
        &self.coeffs[i * size..(i + 1) * size]
    }

    /// `ξ(g_i)` for the cocycle with generator values `u`.
    pub fn value(&self, i: usize, u: &[u32]) -> Vec<u32> {
        let n = self.width();
        let c = self.coefficients(i);
        (0..self.module.rank()).map(|row| self.module.ring.dot(&c[row * n..(row + 1) * n], u)).collect()
    }

    pub fn expand(&self, u: &[u32]) -> CocycleClass {
        CocycleClass { values: (0..self.group.order()).map(|i| self.value(i, u)).collect() }
    }

    pub fn h1(&self) -> Result<CohomologyGroup, CohomologyError> {
        let factors = quotient_decomposition(&self.cocycles, &self.coboundaries)?;
        Ok(CohomologyGroup {
            invariant_factors: factors.iter().map(|f| f.order).collect(),
            representatives: factors.iter().map(|f| self.expand(&f.generator)).collect(),
        })
    }

    pub fn h1_invariants(&self) -> Result<Vec<u64>, CohomologyError> {
        Ok(quotient_decomposition(&self.cocycles, &self.coboundaries)?.into_iter().map(|f| f.order).collect())
    }

    /// Cocycles whose restriction to every cyclic subgroup is a coboundary.
    pub fn localization_kernel(&self) -> Result<Submodule, CohomologyError> {
        let ring = self.module.ring;
        let r = self.module.rank();
        let n = self.width();
        let mut current = self.cocycles.clone();
        if current == self.coboundaries {
            return Ok(current);
        }
        for c in cyclic_generator_indices(self.group) {
            let gens = current.basis().to_vec();
            let t = gens.len();
            let coef = self.coefficients(c);
            let a = minus_identity(ring, r, &self.module.action(&self.group.elements()[c]));
            // unknowns (λ_1..λ_t, m): Σ λ_i C_c u_i - (c - 1) m = 0
            let mut sys = ResidueMatrix::zeros(ring, r, t + r);
            for row in 0..r {
                for (i, u) in gens.iter().enumerate() {
                    sys.set(row, i, ring.dot(&coef[row * n..(row + 1) * n], u));
                }
                for col in 0..r {
                    sys.set(row, t + col, ring.neg(a[row * r + col]));
                }
            }
            let sol = kernel(&sys);
            let rows: Vec<Vec<u32>> = sol
                .basis()
                .iter()
                .map(|lam| {
                    let mut v = vec![0u32; n];
                    for (i, u) in gens.iter().enumerate() {
                        ring.axpy(&mut v, lam[i], u);
                    }
                    v
                })
                .collect();
            current = howell_form(ring, n, &rows)?.join(&self.coboundaries)?;
            if current == self.coboundaries {
                break;
            }
        }
        Ok(current)
    }
}

pub fn h0(group: &MatGroup, module: GModule) -> Result<Submodule, CohomologyError> {
    module.check(group.ring())?;
    let r = module.rank();
    let ring = module.ring;
    let mut rows = Vec::new();
    for s in group.generators() {
        let a = minus_identity(ring, r, &module.action(s));
        rows.extend(a.chunks(r).map(|c| c.to_vec()));
    }
    if rows.is_empty() {
        return Ok(Submodule::full(ring, r));
    }
    Ok(kernel(&ResidueMatrix::from_residue_rows(ring, r, &rows)?))
}

pub fn h1(group: &MatGroup, module: GModule) -> Result<CohomologyGroup, CohomologyError> {
    CocycleSpace::new(group, module)?.h1()
}

pub fn localization_kernel(group: &MatGroup, module: GModule) -> Result<CohomologyGroup, CohomologyError> {
    let space = CocycleSpace::new(group, module)?;
    let l = space.localization_kernel()?;
    let factors = quotient_decomposition(&l, &space.coboundaries)?;
    Ok(CohomologyGroup {
        invariant_factors: factors.iter().map(|f| f.order).collect(),
        representatives: factors.iter().map(|f| space.expand(&f.generator)).collect(),
    })
}

/// Norm `Σ_{a < ord} A^a` of a matrix of finite multiplicative order `ord`.
fn norm_matrix(ring: RingSpec, n: usize, a: &[u32], ord: u64) -> Vec<u32> {
    let am = matrix(ring, n, a);
    let mut power = ResidueMatrix::identity(ring, n);
    let mut sum = ResidueMatrix::zeros(ring, n, n);
    for _ in 0..ord {
        for i in 0..n {
            for j in 0..n {
                sum.set(i, j, ring.add(sum.get(i, j), power.get(i, j)));
            }
        }
        power = power.mul(&am).unwrap();
    }
    sum.row_vecs().concat()
}

fn cyclic_parts(c: &MatGroup) -> Result<(Mat2, u64), CohomologyError> {
    let x = c.cyclic_generator().ok_or(CohomologyError::NotCyclic)?;
    Ok((x, c.order() as u64))
}

/// `H^1` of a cyclic group as `ker(N) / im(x - 1)`, with cocycles
/// `ξ(x^a) = (1 + x + … + x^{a-1}) ξ(x)` tabulated over the element table of `c`.
pub fn h1_cyclic(c: &MatGroup, module: GModule) -> Result<CohomologyGroup, CohomologyError> {
    module.check(c.ring())?;
    let (x, ord) = cyclic_parts(c)?;
    let ring = module.ring;
    let r = module.rank();
    let a = module.action(&x);
    let nm = norm_matrix(ring, r, &a, ord);
    let ker = kernel(&matrix(ring, r, &nm));
    let im = crate::modarith::image(&matrix(ring, r, &minus_identity(ring, r, &a)));
    let factors = quotient_decomposition(&ker, &im)?;
    let reps = factors
        .iter()
        .map(|f| {
            let mut values = vec![Vec::new(); c.order()];
            let mut g = mat_identity(c.ring());
            let mut v = vec![0u32; r];
            for _ in 0..ord {
                values[c.index_of(&g).unwrap()] = v.clone();
                // ξ(g x) = ξ(g) + g ξ(x)
                let gv = module.act(&g, &f.generator);
                for t in 0..r {
                    v[t] = ring.add(v[t], gv[t]);
                }
                g = mat_mul(c.ring(), &g, &x);
            }
            CocycleClass { values }
        })
        .collect();
    Ok(CohomologyGroup { invariant_factors: factors.iter().map(|f| f.order).collect(), representatives: reps })
}

/// Restriction of a cocycle on `group` to `sub`, together with whether the
/// restricted class is trivial.
pub fn restrict(
    group: &MatGroup,
    module: GModule,
    class: &CocycleClass,
    sub: &MatGroup,
) -> Result<(CocycleClass, bool), CohomologyError> {
    module.check(group.ring())?;
    let mut values = Vec::with_capacity(sub.order());
    for x in sub.elements() {
        let i = group.index_of(x).ok_or(CohomologyError::NotContained)?;
        values.push(class.values[i].clone());
    }
    let restricted = CocycleClass { values };
    Ok((restricted.clone(), is_coboundary(sub, module, &restricted)?))
}

/// Whether a cocycle (tabulated on `group`) has the form `g ↦ g·m - m`.
pub fn is_coboundary(group: &MatGroup, module: GModule, class: &CocycleClass) -> Result<bool, CohomologyError> {
    let ring = module.ring;
    let r = module.rank();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for s in group.generators() {
        let i = group.index_of(s).unwrap();
        let a = minus_identity(ring, r, &module.action(s));
        rows.extend(a.chunks(r).map(|c| c.to_vec()));
        rhs.extend_from_slice(&class.values[i]);
    }
    if rows.is_empty() {
        return Ok(true);
    }
    let sys = ResidueMatrix::from_residue_rows(ring, r, &rows)?;
    Ok(solve_affine(&sys, &rhs)?.is_some())
}

/// The scalar by which `g` acts on a cyclic `H^1(H, M)` through
/// `(g⋆ξ)(h) = g·ξ(g^{-1} h g)`.
pub fn normalizer_action_scalar(g: &Mat2, h: &MatGroup, module: GModule) -> Result<u32, CohomologyError> {
    module.check(h.ring())?;
    let gr = h.ring();
    let (x, _) = cyclic_parts(h)?;
    let ginv = mat_inv(gr, g).ok_or(CohomologyError::NotNormalizing)?;
    let y = mat_mul(gr, &mat_mul(gr, &ginv, &x), g);
    let yi = h.index_of(&y).ok_or(CohomologyError::NotNormalizing)?;
    let h1g = h1_cyclic(h, module)?;
    match h1g.invariant_factors.len() {
        0 => return Err(CohomologyError::TrivialCohomology),
        1 => {}
        _ => return Err(CohomologyError::NotCyclicCohomology),
    }
    let ring = module.ring;
    let r = module.rank();
    let xi = h1g.representatives[0].values[h.index_of(&x).unwrap()].clone();
    let transported = module.act(g, &h1g.representatives[0].values[yi]);
    // transported = λ ξ(x) + (x - 1) m
    let a = minus_identity(ring, r, &module.action(&x));
    let mut sys = ResidueMatrix::zeros(ring, r, 1 + r);
    for row in 0..r {
        sys.set(row, 0, xi[row]);
        for col in 0..r {
            sys.set(row, 1 + col, a[row * r + col]);
        }
    }
    let sol = solve_affine(&sys, &transported)?.ok_or(CohomologyError::NotNormalizing)?;
    Ok((sol.particular[0] as u64 % h1g.invariant_factors[0]) as u32)
}

/// `H^2(G, M)` when the Sylow `p`-subgroup `H` of `G` is cyclic and normal,
/// computed as the `G/H`-invariants of `Ĥ^0(H, M) = M^H / N_H M`. An element
/// `g` with `g^{-1} x g = x^r` acts there by `P ↦ r·(g·P)`.
pub fn h2_normal_cyclic_sylow(group: &MatGroup, module: GModule) -> Result<CohomologyGroup, CohomologyError> {
    module.check(group.ring())?;
    let p = group.ring().p() as u64;
    let mut n = group.order() as u64;
    let mut sylow = 1u64;
    while n % p == 0 {
        n /= p;
        sylow *= p;
    }
    if sylow == 1 {
        return Ok(CohomologyGroup::trivial());
    }
    let orders = group.element_orders();
    let pels: Vec<Mat2> = group
        .elements()
        .iter()
        .zip(&orders)
        .filter(|(_, o)| sylow % **o == 0)
        .map(|(x, _)| *x)
        .collect();
    if pels.len() as u64 != sylow {
        return Err(CohomologyError::UnsupportedShape("Sylow subgroup is not normal".into()));
    }
    let hgrp = closure_unchecked(group.ring(), &pels);
    let x = hgrp
        .cyclic_generator()
        .ok_or_else(|| CohomologyError::UnsupportedShape("Sylow subgroup is not cyclic".into()))?;
    let gr = group.ring();
    let ring = module.ring;
    let r = module.rank();
    let ax = module.action(&x);
    let nm = norm_matrix(ring, r, &ax, sylow);
    let norms = crate::modarith::image(&matrix(ring, r, &nm));
    // unknowns (P, m_1, …, m_k): (x - 1)P = 0 and (r_s s - 1)P = N m_s
    let k = group.num_generators();
    let width = r * (1 + k);
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let axm = minus_identity(ring, r, &ax);
    for row in 0..r {
        let mut v = vec![0u32; width];
        v[..r].copy_from_slice(&axm[row * r..(row + 1) * r]);
        rows.push(v);
    }
    for (j, s) in group.generators().iter().enumerate() {
        let sinv = mat_inv(gr, s).unwrap();
        let conj = mat_mul(gr, &mat_mul(gr, &sinv, &x), s);
        let mut pw = mat_identity(gr);
        let mut rexp = 0u64;
        while pw != conj {
            pw = mat_mul(gr, &pw, &x);
            rexp += 1;
        }
        let rr = ring.reduce(rexp as i64);
        let mut a = module.action(s);
        for v in a.iter_mut() {
            *v = ring.mul(*v, rr);
        }
        let a = minus_identity(ring, r, &a);
        for row in 0..r {
            let mut v = vec![0u32; width];
            v[..r].copy_from_slice(&a[row * r..(row + 1) * r]);
            for col in 0..r {
                v[r * (1 + j) + col] = ring.neg(nm[row * r + col]);
            }
            rows.push(v);
        }
    }
    let sol = kernel(&ResidueMatrix::from_residue_rows(ring, width, &rows)?);
    let fixed: Vec<Vec<u32>> = sol.basis().iter().map(|v| v[..r].to_vec()).collect();
    let fixed = howell_form(ring, r, &fixed)?.join(&norms)?;
    let factors = quotient_decomposition(&fixed, &norms)?;
    Ok(CohomologyGroup {
        invariant_factors: factors.iter().map(|f| f.order).collect(),
        representatives: factors.iter().map(|f| CocycleClass { values: vec![f.generator.clone()] }).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomSource {
    /// All of `Mat_2(F_p)` with the adjoint action.
    Adjoint,
    /// Upper-triangular matrices `(a, b; 0, d)`.
    UpperTriangular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomTarget {
    /// The stable line spanned by the first basis vector; `g` acts by its entry `a`.
    KernelLine,
    /// The quotient by that line; `g` acts by its entry `d`.
    QuotientLine,
    /// `F_p^2` with the natural action.
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomSpace {
    pub dim: usize,
    /// Each map as a row-major `target × source` matrix.
    pub basis: Vec<Vec<u32>>,
}

/// `Hom_G(source, target)` over `F_p`.
pub fn equivariant_homs(group: &MatGroup, source: HomSource, target: HomTarget) -> Result<HomSpace, CohomologyError> {
    let ring = group.ring();
    if ring.e() != 1 {
        return Err(CohomologyError::UnsupportedShape("equivariant homs need a mod-p group".into()));
    }
    let borel = group.generators().iter().all(|g| g[2] == 0);
    if !borel && (source == HomSource::UpperTriangular || target != HomTarget::Full) {
        return Err(CohomologyError::UnsupportedShape("line targets and triangular sources need an upper-triangular group".into()));
    }
    let src_coords: Vec<usize> = match source {
        HomSource::Adjoint => vec![0, 1, 2, 3],
        HomSource::UpperTriangular => vec![0, 1, 3],
    };
    let s = src_coords.len();
    let t = match target {
        HomTarget::Full => 2,
        _ => 1,
    };
    let nvar = t * s;
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for g in group.generators() {
        // Ad(g) restricted to the source, in source coordinates
        let mut ad = vec![0u32; s * s];
        for (col, &c) in src_coords.iter().enumerate() {
            let mut x = [0u32; 4];
            x[c] = 1;
            let y = mat_conj(ring, g, &x);
            for (row, &rc) in src_coords.iter().enumerate() {
                ad[row * s + col] = y[rc];
            }
        }
        let rho: Vec<u32> = match target {
            HomTarget::Full => g.to_vec(),
            HomTarget::KernelLine => vec![g[0]],
            HomTarget::QuotientLine => vec![g[3]],
        };
        // (F Ad - ρ F)[i][j] = Σ_l F[i][l] Ad[l][j] - Σ_l ρ[i][l] F[l][j]
        for i in 0..t {
            for j in 0..s {
                let mut row = vec![0u32; nvar];
                for l in 0..s {
                    row[i * s + l] = ring.add(row[i * s + l], ad[l * s + j]);
                }
                for l in 0..t {
                    row[l * s + j] = ring.sub(row[l * s + j], rho[i * t + l]);
                }
                rows.push(row);
            }
        }
    }
    let sol = if rows.is_empty() {
        Submodule::full(ring, nvar)
    } else {
        kernel(&ResidueMatrix::from_residue_rows(ring, nvar, &rows)?)
    };
    Ok(HomSpace { dim: sol.log_size() as usize, basis: sol.basis().to_vec() })
}

/// Dimension of `{f : S → F_p^2 linear, f(m) ∈ im(m) for all m} / {m ↦ m T}`
/// for the additive span `S` of the given matrices.
pub fn lker_hom_model(ring: RingSpec, algebra: &[Mat2]) -> Result<usize, CohomologyError> {
    if ring.e() != 1 {
        return Err(CohomologyError::UnsupportedShape("the hom model lives over F_p".into()));
    }
    let span = howell_form(ring, 4, &algebra.iter().map(|m| m.to_vec()).collect::<Vec<_>>())?;
    let basis: Vec<Mat2> = span.basis().iter().map(|v| [v[0], v[1], v[2], v[3]]).collect();
    let t = basis.len();
    let nvar = 2 * t;
    let mut acc = SpanBuilder::new(ring, nvar);
    let p = ring.p() as u64;
    for mut code in 0..p.pow(t as u32) {
        let mut coeffs = vec![0u32; t];
        for c in coeffs.iter_mut() {
            *c = (code % p) as u32;
            code /= p;
        }
        let mut m = [0u32; 4];
        for (c, b) in coeffs.iter().zip(&basis) {
            for i in 0..4 {
                m[i] = ring.add(m[i], ring.mul(*c, b[i]));
            }
        }
        let det = ring.sub(ring.mul(m[0], m[3]), ring.mul(m[1], m[2]));
        if det != 0 || m == [0; 4] {
            continue;
        }
        // image spanned by a nonzero column (x, y); normal (-y, x)
        let (x, y) = if m[0] != 0 || m[2] != 0 { (m[0], m[2]) } else { (m[1], m[3]) };
        let normal = [ring.neg(y), x];
        let mut row = vec![0u32; nvar];
        for (i, c) in coeffs.iter().enumerate() {
            row[2 * i] = ring.mul(*c, normal[0]);
            row[2 * i + 1] = ring.mul(*c, normal[1]);
        }
        acc.push(&row);
    }
    let constraints = acc.finish();
    let sol_dim = nvar - constraints.log_size() as usize;
    // coboundaries T ↦ (b_i T)_i
    let cob: Vec<Vec<u32>> = (0..2)
        .map(|k| {
            let mut v = vec![0u32; nvar];
            for (i, b) in basis.iter().enumerate() {
                v[2 * i] = b[k];
                v[2 * i + 1] = b[2 + k];
            }
            v
        })
        .collect();
    let cob_dim = howell_form(ring, nvar, &cob)?.log_size() as usize;
    Ok(sol_dim - cob_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroup::{closure_from_mats, general_linear};

    fn f(p: u32) -> RingSpec {
        RingSpec::new(p, 1).unwrap()
    }

    #[test]
    fn unipotent_h1_is_fp() {
        for p in [3, 5, 7] {
            let h = closure_from_mats(f(p), &[[1, 1, 0, 1]]).unwrap();
            let m = GModule::natural(f(p));
            assert_eq!(h1(&h, m).unwrap().invariant_factors, vec![p as u64]);
            assert_eq!(h1_cyclic(&h, m).unwrap().invariant_factors, vec![p as u64]);
        }
        // for p = 2 the norm 1 + h kills exactly im(h - 1)
        let h = closure_from_mats(f(2), &[[1, 1, 0, 1]]).unwrap();
        assert!(h1(&h, GModule::natural(f(2))).unwrap().is_trivial());
    }

    #[test]
    fn gl2_f5_vanishes() {
        let g = general_linear(f(5));
        assert!(h1(&g, GModule::natural(f(5))).unwrap().is_trivial());
    }

    #[test]
    fn minus_identity_cyclic_vanishes() {
        let c = closure_from_mats(f(7), &[[6, 0, 0, 6]]).unwrap();
        assert!(h1_cyclic(&c, GModule::natural(f(7))).unwrap().is_trivial());
    }

    #[test]
    fn h0_of_unipotent() {
        let h = closure_from_mats(f(5), &[[1, 1, 0, 1]]).unwrap();
        let fixed = h0(&h, GModule::natural(f(5))).unwrap();
        assert_eq!(fixed.basis(), &[vec![1, 0]]);
    }

    #[test]
    fn action_scalar_identity_and_diagonal() {
        let r = f(7);
        let h = closure_from_mats(r, &[[1, 1, 0, 1]]).unwrap();
        let m = GModule::natural(r);
        assert_eq!(normalizer_action_scalar(&[1, 0, 0, 1], &h, m).unwrap(), 1);
        assert_eq!(normalizer_action_scalar(&[2, 0, 0, 3], &h, m).unwrap(), 1);
        assert_eq!(normalizer_action_scalar(&[1, 0, 0, 3], &h, m).unwrap(), 2);
    }

    #[test]
    fn h2_borel_shapes() {
        let r = f(5);
        let m = GModule::natural(r);
        let upper_fixed = closure_from_mats(r, &[[1, 1, 0, 1], [2, 0, 0, 1]]).unwrap();
        assert_eq!(h2_normal_cyclic_sylow(&upper_fixed, m).unwrap().invariant_factors, vec![5]);
        let one_star = closure_from_mats(r, &[[1, 1, 0, 1], [1, 0, 0, 2]]).unwrap();
        assert!(h2_normal_cyclic_sylow(&one_star, m).unwrap().is_trivial());
        let diag = closure_from_mats(r, &[[2, 0, 0, 1]]).unwrap();
        assert!(h2_normal_cyclic_sylow(&diag, m).unwrap().is_trivial());
        assert!(matches!(
            h2_normal_cyclic_sylow(&general_linear(r), m),
            Err(CohomologyError::UnsupportedShape(_))
        ));
    }

    #[test]
    fn hom_model_examples() {
        let r = f(5);
        let full: Vec<Mat2> = (0..4).map(|i| { let mut x = [0; 4]; x[i] = 1; x }).collect();
        assert_eq!(lker_hom_model(r, &full).unwrap(), 0);
        assert_eq!(lker_hom_model(r, &[[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1]]).unwrap(), 0);
        assert_eq!(lker_hom_model(r, &[[1, 0, 0, 1]]).unwrap(), 0);
    }
}
