//! Conjugacy classes of subgroups by cyclic extension.
//!
//! Every subgroup of a solvable group has a normal subgroup of prime index, so
//! starting from the trivial group and repeatedly adjoining an element `x` of
//! `N(U)` whose image in `N(U)/U` has prime order reaches every class.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matgroup::{
    canonical_key, closure_unchecked, conjugating_element, is_solvable, mat_mul, normalizer, Fingerprint, MatGroup,
    MatGroupError,
};

#[derive(Clone, Debug)]
pub struct SubgroupClass {
    pub representative: MatGroup,
    pub canonical_key: Vec<u64>,
    pub fingerprint: Fingerprint,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerateOptions {
    pub surjective_det: bool,
    /// Run on non-solvable ambients anyway. Only solvable subgroups and the
    /// ambient itself are then found.
    pub best_effort: bool,
}

fn is_prime_small(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// Smallest `k >= 1` with `x^k` in `u`.
fn relative_order(u: &MatGroup, x: &[u32; 4]) -> u64 {
    let r = u.ring();
    let mut y = *x;
    let mut k = 1;
    while !u.contains(&y) {
        y = mat_mul(r, &y, x);
        k += 1;
    }
    k
}

/// All classes of subgroups of `ambient` up to `ambient`-conjugacy, unfiltered.
pub fn all_subgroup_classes(ambient: &MatGroup, best_effort: bool) -> Result<Vec<MatGroup>, MatGroupError> {
    let solvable = is_solvable(ambient);
    if !solvable && !best_effort {
        return Err(MatGroupError::NotSolvable);
    }
    let r = ambient.ring();
    let mut classes: Vec<MatGroup> = vec![closure_unchecked(r, &[])];
    let mut by_fp: HashMap<Fingerprint, Vec<usize>> = HashMap::new();
    by_fp.entry(classes[0].fingerprint()).or_default().push(0);
    let mut head = 0;
    while head < classes.len() {
        let u = classes[head].clone();
        head += 1;
        let n = normalizer(ambient, &u)?;
        let mut produced: Vec<MatGroup> = Vec::new();
        for x in n.elements() {
            if u.contains(x) || produced.iter().any(|v| v.contains(x)) {
                continue;
            }
            if !is_prime_small(relative_order(&u, x)) {
                continue;
            }
            let mut gens = u.generators().to_vec();
            gens.push(*x);
            produced.push(closure_unchecked(r, &gens));
        }
        let fps: Vec<Fingerprint> = produced.par_iter().map(|v| v.fingerprint()).collect();
        for (v, fp) in produced.into_iter().zip(fps) {
            let bucket = by_fp.entry(fp).or_default();
            let known = bucket.iter().any(|&i| conjugating_element(ambient, &v, &classes[i]).is_some());
            if !known {
                bucket.push(classes.len());
                classes.push(v);
            }
        }
    }
    if !solvable && !classes.iter().any(|c| c.order() == ambient.order()) {
        classes.push(ambient.clone());
    }
    Ok(classes)
}

/// One representative per conjugacy class passing the filter, sorted by canonical key.
pub fn enumerate_subgroup_classes(
    ambient: &MatGroup,
    opts: EnumerateOptions,
) -> Result<Vec<SubgroupClass>, MatGroupError> {
    let reps = all_subgroup_classes(ambient, opts.best_effort)?;
    let mut out: Vec<SubgroupClass> = reps
        .into_par_iter()
        .filter(|g| !opts.surjective_det || g.det_surjective())
        .map(|g| SubgroupClass { canonical_key: canonical_key(ambient, &g), fingerprint: g.fingerprint(), representative: g })
        .collect();
    out.sort_by(|a, b| {
        (a.representative.order(), &a.canonical_key).cmp(&(b.representative.order(), &b.canonical_key))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroup::{closure_from_mats, general_linear};
    use crate::modarith::RingSpec;

    #[test]
    fn s3_has_four_classes() {
        let gl = general_linear(RingSpec::new(2, 1).unwrap());
        let c = enumerate_subgroup_classes(&gl, EnumerateOptions::default()).unwrap();
        let orders: Vec<usize> = c.iter().map(|c| c.representative.order()).collect();
        assert_eq!(orders, vec![1, 2, 3, 6]);
    }

    #[test]
    fn cyclic_of_order_nine() {
        let r = RingSpec::new(19, 1).unwrap();
        // 4 has order 9 mod 19
        let g = closure_from_mats(r, &[[4, 0, 0, 1]]).unwrap();
        assert_eq!(g.order(), 9);
        let c = enumerate_subgroup_classes(&g, EnumerateOptions::default()).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn non_solvable_needs_best_effort() {
        let gl = general_linear(RingSpec::new(5, 1).unwrap());
        assert!(matches!(
            enumerate_subgroup_classes(&gl, EnumerateOptions::default()),
            Err(MatGroupError::NotSolvable)
        ));
    }

    #[test]
    fn surjective_det_filter() {
        let gl = general_linear(RingSpec::new(3, 1).unwrap());
        let all = enumerate_subgroup_classes(&gl, EnumerateOptions::default()).unwrap();
        let surj =
            enumerate_subgroup_classes(&gl, EnumerateOptions { surjective_det: true, best_effort: false }).unwrap();
        assert!(surj.len() < all.len());
        assert!(surj.iter().all(|c| c.representative.det_surjective()));
    }
}
