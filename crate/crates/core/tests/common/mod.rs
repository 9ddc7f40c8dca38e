#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use galcoh::cohomology::{h1_cyclic, CocycleSpace, GModule};
use galcoh::curves::{count_points, FpCurve};
use galcoh::matgroup::{closure_from_mats, cyclic_subgroups, has_homothety_mod_p, Mat2, MatGroup};
use galcoh::modarith::RingSpec;
use galcoh::report::{table, TableOptions, TableRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn rows(p: u32, localization: bool) -> Vec<TableRow> {
    let opts = TableOptions { localization, ..TableOptions::default() };
    table(p, 2, &opts).expect("table")
}

pub fn group_of(row: &TableRow) -> MatGroup {
    closure_from_mats(RingSpec::new(row.p, row.level).unwrap(), &row.generators).expect("closure")
}

fn mul(n: u32, x: &Mat2, y: &Mat2) -> Mat2 {
    [
        (x[0] * y[0] + x[1] * y[2]) % n,
        (x[0] * y[1] + x[1] * y[3]) % n,
        (x[2] * y[0] + x[3] * y[2]) % n,
        (x[2] * y[1] + x[3] * y[3]) % n,
    ]
}

fn act(n: u32, g: &Mat2, v: [u32; 2]) -> [u32; 2] {
    [(g[0] * v[0] + g[1] * v[1]) % n, (g[2] * v[0] + g[3] * v[1]) % n]
}

fn add(n: u32, a: [u32; 2], b: [u32; 2]) -> [u32; 2] {
    [(a[0] + b[0]) % n, (a[1] + b[1]) % n]
}

fn span(n: u32, gens: &[Mat2]) -> HashSet<Mat2> {
    let id = [1, 0, 0, 1];
    let mut seen: HashSet<Mat2> = [id].into_iter().collect();
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = mul(n, &x, g);
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    seen
}

fn minimal_generators(n: u32, elements: &[Mat2]) -> Vec<Mat2> {
    let order = elements.len();
    for k in 0..=elements.len() {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let gens: Vec<Mat2> = idx.iter().map(|&i| elements[i]).collect();
            if span(n, &gens).len() == order {
                return gens;
            }
            // next combination
            let mut i = k;
            while i > 0 && idx[i - 1] == elements.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    unreachable!()
}

/// Invariant factors of `H^1(G, (Z/n)^2)` by exhaustive search over cocycle
/// values on a minimal generating set. Only for tiny groups.
pub fn brute_force_h1(n: u32, p: u32, elements: &[Mat2]) -> Vec<u64> {
    let gens = minimal_generators(n, elements);
    let k = gens.len();
    let id = [1, 0, 0, 1];
    // BFS spanning tree and all Cayley edges
    let mut index: HashMap<Mat2, usize> = HashMap::new();
    let mut order = vec![id];
    index.insert(id, 0);
    let mut tree: Vec<Option<(usize, usize)>> = vec![None];
    let mut head = 0;
    while head < order.len() {
        let x = order[head];
        for (j, g) in gens.iter().enumerate() {
            let y = mul(n, &x, g);
            if !index.contains_key(&y) {
                index.insert(y, order.len());
                order.push(y);
                tree.push(Some((head, j)));
            }
        }
        head += 1;
    }
    let vectors: Vec<[u32; 2]> = (0..n * n).map(|c| [c / n, c % n]).collect();
    let m = vectors.len();
    let mut z1: Vec<Vec<[u32; 2]>> = Vec::new();
    let total = m.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let vals: Vec<[u32; 2]> = (0..k)
            .map(|_| {
                let v = vectors[c % m];
                c /= m;
                v
            })
            .collect();
        // f(x g) = f(x) + x f(g)
        let mut f = vec![[0u32; 2]; order.len()];
        for i in 1..order.len() {
            let (parent, j) = tree[i].unwrap();
            f[i] = add(n, f[parent], act(n, &order[parent], vals[j]));
        }
        let ok = order.iter().enumerate().all(|(i, x)| {
            gens.iter().enumerate().all(|(j, g)| {
                let y = index[&mul(n, x, g)];
                f[y] == add(n, f[i], act(n, x, vals[j]))
            })
        });
        if ok {
            z1.push(vals);
        }
    }
    let b1: BTreeSet<Vec<[u32; 2]>> = vectors
        .iter()
        .map(|&v| gens.iter().map(|g| { let gv = act(n, g, v); [(gv[0] + n - v[0]) % n, (gv[1] + n - v[1]) % n] }).collect())
        .collect();
    // |p^j H| for j = 0, 1, ...
    let mut sizes = Vec::new();
    let mut scale = 1u32;
    loop {
        let scaled: BTreeSet<Vec<[u32; 2]>> =
            z1.iter().map(|z| z.iter().map(|v| [v[0] * scale % n, v[1] * scale % n]).collect()).collect();
        let mut sum: BTreeSet<Vec<[u32; 2]>> = BTreeSet::new();
        for a in &scaled {
            for b in &b1 {
                sum.insert(a.iter().zip(b).map(|(x, y)| add(n, *x, *y)).collect());
            }
        }
        let size = sum.len() / b1.len();
        sizes.push(size);
        if size == 1 {
            break;
        }
        scale *= p;
    }
    // number of cyclic factors of order >= p^(j+1) is log_p(|p^j H| / |p^(j+1) H|)
    let log = |mut x: usize| {
        let mut e = 0;
        while x > 1 {
            x /= p as usize;
            e += 1;
        }
        e
    };
    let mut factors = Vec::new();
    for j in 0..sizes.len() - 1 {
        let at_least = log(sizes[j] / sizes[j + 1]);
        let next = if j + 2 < sizes.len() { log(sizes[j + 1] / sizes[j + 2]) } else { 0 };
        for _ in 0..at_least - next {
            factors.push((p as u64).pow(j as u32 + 1));
        }
    }
    factors.sort();
    factors
}

/// Every representative returned by `h1` satisfies `ξ(gh) = ξ(g) + g ξ(h)`.
pub fn cocycle_identity(rows: &[TableRow]) -> Check {
    let mut reps = 0;
    for row in rows.iter().filter(|r| !r.h1.is_empty()) {
        let g = group_of(row);
        let n = g.ring().modulus();
        let h1 = CocycleSpace::new(&g, GModule::natural(g.ring())).unwrap().h1().unwrap();
        for rep in &h1.representatives {
            let f = |i: usize| [rep.values[i][0], rep.values[i][1]];
            for (i, x) in g.elements().iter().enumerate() {
                for (j, y) in g.elements().iter().enumerate() {
                    let k = g.index_of(&mul(n, x, y)).unwrap();
                    ensure(f(k) == add(n, f(i), act(n, x, f(j))), || {
                        format!("p={} class {}: cocycle identity fails", row.p, row.id)
                    })?;
                }
            }
            reps += 1;
        }
    }
    Ok(format!("{reps} representatives"))
}

/// `h1` and `h1_cyclic` agree on every cyclic subgroup of every class representative.
pub fn cyclic_agreement(rows: &[TableRow]) -> Check {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for row in rows {
        let g = group_of(row);
        for c in cyclic_subgroups(&g) {
            if !seen.insert(c.sorted_codes()) {
                continue;
            }
            let m = GModule::natural(c.ring());
            let direct = CocycleSpace::new(&c, m).unwrap().h1_invariants().unwrap();
            let cyclic = h1_cyclic(&c, m).unwrap().invariant_factors;
            ensure(direct == cyclic, || format!("p={}: cyclic subgroup of order {}: {direct:?} vs {cyclic:?}", row.p, c.order()))?;
        }
    }
    Ok(format!("{} cyclic subgroups", seen.len()))
}

/// Brute-force oracle on every class of order at most 24.
pub fn oracle_agreement(rows: &[TableRow]) -> Check {
    let mut checked = 0;
    for row in rows.iter().filter(|r| r.order <= 24) {
        let g = group_of(row);
        let oracle = brute_force_h1(g.ring().modulus(), row.p, g.elements());
        ensure(oracle == row.h1, || format!("p={} class {} (order {}): oracle {oracle:?}, table {:?}", row.p, row.id, row.order, row.h1))?;
        checked += 1;
    }
    Ok(format!("{checked} groups"))
}

/// A nontrivial homothety in the image forces `H^1 = 0`.
pub fn homothety_vanishing(rows: &[TableRow]) -> Check {
    let mut with = 0;
    for row in rows {
        let g = group_of(row);
        if has_homothety_mod_p(&g) {
            with += 1;
            ensure(row.h1.is_empty(), || format!("p={} class {} has a homothety but H^1 = {:?}", row.p, row.id, row.h1))?;
        }
    }
    Ok(format!("{with} groups with a homothety"))
}

fn small_primes(from: u64, to: u64) -> Vec<u64> {
    (from..to).filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)).collect()
}

fn naive_count(ell: u64, a: [i64; 5]) -> u64 {
    let r = |x: i64| x.rem_euclid(ell as i64) as u64;
    let [a1, a2, a3, a4, a6] = a.map(r);
    let mut n = 1;
    for x in 0..ell {
        for y in 0..ell {
            let lhs = (y * y + a1 * x % ell * y + a3 * y) % ell;
            let rhs = (x * x % ell * x + a2 * x % ell * x + a4 * x + a6) % ell;
            if lhs == rhs {
                n += 1;
            }
        }
    }
    n
}

/// Hasse bound, `n1 | n2`, `n1 n2 = N`, `n1 | ℓ - 1` on random curves; the
/// count is compared with a naive double loop for `ℓ < 100`.
pub fn hasse_and_structure(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let primes = small_primes(2, 1000);
    let mut done = 0;
    let mut naive = 0;
    while done < samples {
        let ell = primes[rng.gen_range(0..primes.len())];
        let a: [i64; 5] = std::array::from_fn(|_| rng.gen_range(-50..=50));
        let Ok(c) = FpCurve::new(ell, a) else { continue };
        let d = count_points(&c).map_err(|e| e.to_string())?;
        let (n1, n2) = d.group_invariants;
        let a_ell = d.a_ell;
        ensure((a_ell * a_ell) as u64 <= 4 * ell, || format!("Hasse bound fails for {a:?} mod {ell}"))?;
        ensure(n2 % n1 == 0 && n1 * n2 == d.n && (ell - 1) % n1 == 0, || {
            format!("structure ({n1},{n2}) with N={} mod {ell} for {a:?}", d.n)
        })?;
        ensure(d.n as i64 == ell as i64 + 1 - a_ell, || "N and a_ell disagree".into())?;
        if ell < 100 {
            ensure(naive_count(ell, a) == d.n, || format!("naive count differs for {a:?} mod {ell}"))?;
            naive += 1;
        }
        done += 1;
    }
    Ok(format!("{done} pairs, {naive} against naive count"))
}
