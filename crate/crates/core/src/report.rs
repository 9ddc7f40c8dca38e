//! Tables of `H^1(G_2, (Z/p^2)^2)` and localization kernels over all
//! conjugacy classes of `G_2 ≤ GL_2(Z/p^2)` with surjective determinant.
//!
//! For `p ∈ {2, 3}` the classes come from cyclic-extension enumeration of
//! `GL_2(Z/p^2)` itself. For `p ∈ {5, 7}` they are lifted from the classes of
//! `GL_2(F_p)` found in best-effort mode; a non-solvable subgroup of
//! `GL_2(F_p)` contains `SL_2(F_p)`, so with surjective determinant it is the
//! whole group and the list of images is still complete.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cohomology::{h0, h2_normal_cyclic_sylow, CocycleSpace, CohomologyError, GModule};
use crate::enumerate::{all_subgroup_classes, enumerate_subgroup_classes, EnumerateOptions};
use crate::lift::{lift_classes, LiftOptions};
use crate::matgroup::{closure_unchecked, general_linear, has_homothety_mod_p, Mat2, MatGroup, MatGroupError};
use crate::modarith::{quotient_invariants, ModArithError, RingSpec};

pub const CACHE_MAGIC: &str = "galcoh-subgroups v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unsupported prime/level combination p={p}, level={level}; supported: (2,2), (3,2), (5,2), (7,2)")]
    Unsupported { p: u32, level: u32 },
    #[error("p={0}: only groups with surjective determinant can be listed completely")]
    NeedsSurjectiveDet(u32),
    #[error(transparent)]
    Group(#[from] MatGroupError),
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error(transparent)]
    Linear(#[from] ModArithError),
    #[error("cache: {0}")]
    Cache(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    /// Skipped: the image contains a nontrivial homothety, so `H^1` vanishes.
    HomothetyShortcut,
}

/// A class of `G_2` as stored in the cache.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub p: u32,
    pub level: u32,
    pub order: usize,
    pub image_order: usize,
    pub dim_m2: usize,
    pub generators: Vec<Mat2>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub id: usize,
    pub p: u32,
    pub level: u32,
    pub order: usize,
    pub image_order: usize,
    pub dim_m2: usize,
    pub h1: Vec<u64>,
    pub lker: Option<Vec<u64>>,
    /// `H^0(G, F_p^2) ≠ 0` for the image `G`.
    pub h0_image: bool,
    /// `H^2(G, F_p^2) ≠ 0`, when the Sylow `p`-subgroup of `G` is normal.
    pub h2_image: Option<bool>,
    pub method: Method,
    pub generators: Vec<Mat2>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableOptions {
    pub surjective_det: bool,
    pub dim_m2: Option<usize>,
    pub localization: bool,
    /// Groups larger than this whose image contains a homothety are not computed.
    pub shortcut_above: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { surjective_det: true, dim_m2: None, localization: false, shortcut_above: 100_000, cache_dir: None }
    }
}

pub fn is_supported(p: u32, level: u32) -> bool {
    level == 2 && matches!(p, 2 | 3 | 5 | 7)
}

fn check_supported(p: u32, level: u32) -> Result<RingSpec, ReportError> {
    if !is_supported(p, level) {
        return Err(ReportError::Unsupported { p, level });
    }
    Ok(RingSpec::new(p, level).expect("supported ring"))
}

fn record_of(g: &MatGroup) -> ClassRecord {
    let r1 = g.ring().with_level(1);
    let image = g.image_at_level(1).expect("level 2 group");
    let p = r1.p() as usize;
    let mut q = g.order() / image.order();
    let mut dim = 0;
    while q > 1 {
        q /= p;
        dim += 1;
    }
    ClassRecord { p: r1.p(), level: g.ring().e(), order: g.order(), image_order: image.order(), dim_m2: dim, generators: g.generators().to_vec() }
}

/// Classes of `G_2 ≤ GL_2(Z/p^2)`, without cache. For `p ≥ 5` only the
/// surjective-determinant list is available.
pub fn compute_classes(
    p: u32,
    level: u32,
    surjective_det: bool,
    dim_m2: Option<usize>,
) -> Result<Vec<ClassRecord>, ReportError> {
    let r = check_supported(p, level)?;
    let r1 = r.with_level(1);
    let mut out: Vec<ClassRecord> = if p <= 3 {
        let opts = EnumerateOptions { surjective_det, best_effort: false };
        enumerate_subgroup_classes(&general_linear(r), opts)?.iter().map(|c| record_of(&c.representative)).collect()
    } else {
        if !surjective_det {
            return Err(ReportError::NeedsSurjectiveDet(p));
        }
        let images: Vec<MatGroup> =
            all_subgroup_classes(&general_linear(r1), true)?.into_iter().filter(|g| g.det_surjective()).collect();
        let mut lifted = lift_classes(&images, LiftOptions { surjective_det: true, kernel_dim: dim_m2 })?;
        lifted.sort_by(|a, b| (a.order, &a.key).cmp(&(b.order, &b.key)));
        lifted
            .into_iter()
            .map(|c| ClassRecord {
                p,
                level,
                order: c.order,
                image_order: c.image_order,
                dim_m2: c.kernel_dim(),
                generators: c.generators,
            })
            .collect()
    };
    if let Some(d) = dim_m2 {
        out.retain(|c| c.dim_m2 == d);
    }
    Ok(out)
}

fn cache_key(p: u32, level: u32, surjective_det: bool, dim_m2: Option<usize>) -> String {
    let r1 = RingSpec::new(p, 1).expect("prime");
    let mut h = Sha256::new();
    h.update(format!("{CACHE_MAGIC}|p={p}|level={level}|surjective={surjective_det}|dim={dim_m2:?}|").as_bytes());
    for code in general_linear(r1).sorted_codes() {
        h.update(code.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn cache_path(dir: &Path, p: u32, level: u32, key: &str) -> PathBuf {
    dir.join(format!("subgroups-p{p}-e{level}-{}.txt", &key[..16]))
}

/// Line format: a magic line, a key line, then one `class` line per record:
/// `class <order> <image order> <dim M_2> a,b,c,d a,b,c,d …`.
pub fn write_cache(path: &Path, key: &str, records: &[ClassRecord]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
    writeln!(f, "{CACHE_MAGIC}")?;
    writeln!(f, "key {key}")?;
    for c in records {
        write!(f, "class {} {} {}", c.order, c.image_order, c.dim_m2)?;
        for g in &c.generators {
            write!(f, " {},{},{},{}", g[0], g[1], g[2], g[3])?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    drop(f);
    fs::rename(tmp, path)
}

/// `None` when the file is missing, stale or malformed.
pub fn read_cache(path: &Path, key: &str, p: u32, level: u32) -> Option<Vec<ClassRecord>> {
    let f = fs::File::open(path).ok()?;
    let mut lines = io::BufReader::new(f).lines();
    if lines.next()?.ok()? != CACHE_MAGIC {
        return None;
    }
    if lines.next()?.ok()?.strip_prefix("key ")? != key {
        return None;
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line.ok()?;
        let mut parts = line.split_whitespace();
        if parts.next()? != "class" {
            return None;
        }
        let order = parts.next()?.parse().ok()?;
        let image_order = parts.next()?.parse().ok()?;
        let dim_m2 = parts.next()?.parse().ok()?;
        let mut generators = Vec::new();
        for g in parts {
            let v: Vec<u32> = g.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
            generators.push(<[u32; 4]>::try_from(v).ok()?);
        }
        out.push(ClassRecord { p, level, order, image_order, dim_m2, generators });
    }
    Some(out)
}

/// Class list, read from and written to `cache_dir` when given.
pub fn classes(
    p: u32,
    level: u32,
    surjective_det: bool,
    dim_m2: Option<usize>,
    cache_dir: Option<&Path>,
) -> Result<Vec<ClassRecord>, ReportError> {
    check_supported(p, level)?;
    let Some(dir) = cache_dir else { return compute_classes(p, level, surjective_det, dim_m2) };
    let key = cache_key(p, level, surjective_det, dim_m2);
    let path = cache_path(dir, p, level, &key);
    if let Some(c) = read_cache(&path, &key, p, level) {
        log::info!("loaded {} classes from {}", c.len(), path.display());
        return Ok(c);
    }
    let c = compute_classes(p, level, surjective_det, dim_m2)?;
    write_cache(&path, &key, &c)?;
    Ok(c)
}

/// Cohomology columns for one class.
pub fn row_for(id: usize, rec: &ClassRecord, opts: &TableOptions) -> Result<TableRow, ReportError> {
    let ring = check_supported(rec.p, rec.level)?;
    let g = closure_unchecked(ring, &rec.generators);
    let r1 = ring.with_level(1);
    let image = g.image_at_level(1)?;
    let h0_image = !h0(&image, GModule::natural(r1))?.is_zero();
    let h2_image = match h2_normal_cyclic_sylow(&image, GModule::natural(r1)) {
        Ok(h) => Some(!h.is_trivial()),
        Err(CohomologyError::UnsupportedShape(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let (h1, lker, method) = if g.order() > opts.shortcut_above && has_homothety_mod_p(&g) {
        (Vec::new(), opts.localization.then(Vec::new), Method::HomothetyShortcut)
    } else {
        let space = CocycleSpace::new(&g, GModule::natural(ring))?;
        let h1 = space.h1_invariants()?;
        let lker = if opts.localization {
            Some(if h1.is_empty() {
                Vec::new()
            } else {
                quotient_invariants(&space.localization_kernel()?, &space.coboundaries)?
            })
        } else {
            None
        };
        (h1, lker, Method::Direct)
    };
    Ok(TableRow {
        id,
        p: ring.p(),
        level: ring.e(),
        order: rec.order,
        image_order: rec.image_order,
        dim_m2: rec.dim_m2,
        h1,
        lker,
        h0_image,
        h2_image,
        method,
        generators: rec.generators.clone(),
    })
}

/// Rows for every class, in class order. Rows are computed in parallel.
pub fn table(p: u32, level: u32, opts: &TableOptions) -> Result<Vec<TableRow>, ReportError> {
    let recs = classes(p, level, opts.surjective_det, opts.dim_m2, opts.cache_dir.as_deref())?;
    recs.par_iter().enumerate().map(|(i, rec)| row_for(i, rec, opts)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSummary {
    pub classes: usize,
    pub nonvanishing: usize,
    /// `(invariant factors, count)`, sorted by factors.
    pub h1_histogram: Vec<(Vec<u64>, usize)>,
    pub lker_nonzero: Option<usize>,
    pub shortcut: usize,
}

pub fn summarize(rows: &[TableRow]) -> TableSummary {
    let mut hist: std::collections::BTreeMap<Vec<u64>, usize> = Default::default();
    for r in rows.iter().filter(|r| !r.h1.is_empty()) {
        *hist.entry(r.h1.clone()).or_default() += 1;
    }
    let lker_nonzero = if rows.iter().all(|r| r.lker.is_some()) && !rows.is_empty() {
        Some(rows.iter().filter(|r| r.lker.as_ref().is_some_and(|l| !l.is_empty())).count())
    } else {
        None
    };
    TableSummary {
        classes: rows.len(),
        nonvanishing: rows.iter().filter(|r| !r.h1.is_empty()).count(),
        h1_histogram: hist.into_iter().collect(),
        lker_nonzero,
        shortcut: rows.iter().filter(|r| r.method == Method::HomothetyShortcut).count(),
    }
}

/// `TableRow` with every field as a scalar, for CSV. Invariant factors are
/// written `3x3`, the trivial group `0`; absent optional columns are empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatRow {
    pub id: usize,
    pub p: u32,
    pub level: u32,
    pub order: usize,
    pub image_order: usize,
    pub dim_m2: usize,
    pub h1: String,
    pub lker: String,
    pub h0_image: bool,
    pub h2_image: String,
    pub method: Method,
    pub generators: String,
}

pub fn format_factors(f: &[u64]) -> String {
    if f.is_empty() {
        "0".into()
    } else {
        f.iter().map(u64::to_string).collect::<Vec<_>>().join("x")
    }
}

pub fn parse_factors(s: &str) -> Option<Vec<u64>> {
    if s == "0" {
        return Some(Vec::new());
    }
    s.split('x').map(|x| x.parse().ok()).collect()
}

impl From<&TableRow> for FlatRow {
    fn from(r: &TableRow) -> Self {
        FlatRow {
            id: r.id,
            p: r.p,
            level: r.level,
            order: r.order,
            image_order: r.image_order,
            dim_m2: r.dim_m2,
            h1: format_factors(&r.h1),
            lker: r.lker.as_deref().map(format_factors).unwrap_or_default(),
            h0_image: r.h0_image,
            h2_image: r.h2_image.map(|b| b.to_string()).unwrap_or_default(),
            method: r.method,
            generators: r
                .generators
                .iter()
                .map(|g| format!("{},{},{},{}", g[0], g[1], g[2], g[3]))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

impl TryFrom<FlatRow> for TableRow {
    type Error = String;

    fn try_from(f: FlatRow) -> Result<Self, String> {
        let bad = |what: &str, v: &str| format!("row {}: bad {what} {v:?}", f.id);
        let h1 = parse_factors(&f.h1).ok_or_else(|| bad("h1", &f.h1))?;
        let lker = match f.lker.as_str() {
            "" => None,
            s => Some(parse_factors(s).ok_or_else(|| bad("lker", s))?),
        };
        let h2_image = match f.h2_image.as_str() {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("h2_image", s))?),
        };
        let generators = if f.generators.is_empty() {
            Vec::new()
        } else {
            f.generators
                .split(';')
                .map(|g| {
                    let v: Vec<u32> = g.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
                    <[u32; 4]>::try_from(v).ok()
                })
                .collect::<Option<_>>()
                .ok_or_else(|| bad("generators", &f.generators))?
        };
        Ok(TableRow {
            id: f.id,
            p: f.p,
            level: f.level,
            order: f.order,
            image_order: f.image_order,
            dim_m2: f.dim_m2,
            h1,
            lker,
            h0_image: f.h0_image,
            h2_image,
            method: f.method,
            generators,
        })
    }
}

/// Rows with `H^1 ≠ 0` whose image has neither `H^0` nor `H^2`. Empty for `p = 3`.
pub fn h0_h2_exceptions(rows: &[TableRow]) -> Vec<usize> {
    rows.iter()
        .filter(|r| !r.h1.is_empty() && !r.h0_image && r.h2_image != Some(true))
        .map(|r| r.id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = classes(2, 2, true, None, Some(dir.path())).unwrap();
        let b = classes(2, 2, true, None, Some(dir.path())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 43);
        let key = cache_key(2, 2, true, None);
        assert!(read_cache(&cache_path(dir.path(), 2, 2, &key), "other", 2, 2).is_none());
    }

    #[test]
    fn unsupported_is_rejected() {
        assert!(matches!(classes(11, 2, true, None, None), Err(ReportError::Unsupported { .. })));
        assert!(matches!(classes(3, 3, true, None, None), Err(ReportError::Unsupported { .. })));
        assert!(matches!(classes(5, 2, false, None, None), Err(ReportError::NeedsSurjectiveDet(5))));
    }
}
