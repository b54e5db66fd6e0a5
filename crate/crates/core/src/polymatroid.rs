//! Discrete polymatroids: rank tables, the normalized/monotone/submodular
//! axioms, `rho_max`, vector membership, representable tables built from
//! subspaces, and the polymatroidal-network mapping conditions.
//!
//! Ground-set elements are 0-based indices internally. The JSON table form
//! names elements 1..=n.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{stack_refs, FMatrix};
use crate::network::{MessageRef, Network, Role};

/// Largest ground set a full table may have.
pub const MAX_TABLE_GROUND: usize = 20;

/// Source images up to this size have their membership condition checked on
/// every subset; larger ones use the singleton + full-set reduction.
pub const EXHAUSTIVE_MEMBERSHIP_LIMIT: usize = 12;

/// Witnesses kept per violation kind.
const WITNESS_CAP: usize = 16;

/// A rank function queried lazily.
pub trait RankOracle: Sync {
    fn ground_size(&self) -> usize;
    fn rank(&self, subset: &[usize]) -> usize;
}

/// A rank oracle whose ground elements are network messages.
pub trait LabeledRankOracle: RankOracle {
    fn index_of(&self, r: &MessageRef) -> Option<usize>;
    fn label(&self, i: usize) -> Option<&MessageRef>;

    fn rank_of(&self, refs: &[MessageRef]) -> Result<usize> {
        let idx = refs
            .iter()
            .map(|r| self.index_of(r).ok_or_else(|| Error::UnknownMessageRef(r.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.rank(&idx))
    }
}

/// The map `f` from messages to ground-set elements.
pub type DpnMapping = BTreeMap<MessageRef, usize>;

/// A vector in Z_{>=0}^n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundVector(pub Vec<usize>);

impl GroundVector {
    /// `d` times the indicator vector of `support`.
    pub fn scaled_indicator(n: usize, support: impl IntoIterator<Item = usize>, d: usize) -> Self {
        let mut v = vec![0; n];
        for i in support {
            v[i] = d;
        }
        GroundVector(v)
    }
}

/// A complete rank table over 2^N, indexed by bitmask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankTable {
    n: usize,
    ranks: Vec<usize>,
}

fn mask_elements(mask: usize) -> impl Iterator<Item = usize> {
    (0..usize::BITS as usize).filter(move |i| mask >> i & 1 == 1)
}

fn mask_of(subset: &[usize]) -> usize {
    subset.iter().fold(0, |m, &i| m | 1 << i)
}

fn one_based(mask: usize) -> Vec<usize> {
    mask_elements(mask).map(|i| i + 1).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    n: usize,
    ranks: BTreeMap<String, usize>,
}

impl RankTable {
    /// `ranks[mask]` is the rank of the subset whose bits are set in `mask`.
    pub fn new(n: usize, ranks: Vec<usize>) -> Result<Self> {
        if n > MAX_TABLE_GROUND {
            return Err(Error::GroundSetTooLarge(n));
        }
        if ranks.len() != 1 << n {
            return Err(Error::IncompleteTable {
                expected: 1 << n,
                found: ranks.len(),
            });
        }
        Ok(RankTable { n, ranks })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> usize) -> Result<Self> {
        if n > MAX_TABLE_GROUND {
            return Err(Error::GroundSetTooLarge(n));
        }
        Self::new(n, (0..1usize << n).map(f).collect())
    }

    /// Rank table of the uniform matroid U_{k,n}.
    pub fn uniform_matroid(k: usize, n: usize) -> Result<Self> {
        Self::from_fn(n, |mask| (mask.count_ones() as usize).min(k))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank_mask(&self, mask: usize) -> usize {
        self.ranks[mask]
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: TableDoc = serde_path_to_error::deserialize(de)?;
        if doc.n > MAX_TABLE_GROUND {
            return Err(Error::GroundSetTooLarge(doc.n));
        }
        let mut ranks = vec![None; 1 << doc.n];
        for (key, &r) in &doc.ranks {
            let path = format!("ranks.{key:?}");
            let mut mask = 0usize;
            if !key.is_empty() {
                for part in key.split(',') {
                    let i: usize = part
                        .trim()
                        .parse()
                        .map_err(|_| Error::schema(&path, format!("bad element `{part}`")))?;
                    if i == 0 || i > doc.n {
                        return Err(Error::schema(&path, format!("element {i} outside 1..={}", doc.n)));
                    }
                    mask |= 1 << (i - 1);
                }
            }
            if ranks[mask].replace(r).is_some() {
                return Err(Error::schema(&path, "subset listed twice"));
            }
        }
        let found = ranks.iter().filter(|r| r.is_some()).count();
        if found != ranks.len() {
            return Err(Error::IncompleteTable {
                expected: ranks.len(),
                found,
            });
        }
        Self::new(doc.n, ranks.into_iter().map(Option::unwrap).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("table serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("table serializes")
    }

    fn to_doc(&self) -> TableDoc {
        let ranks = self
            .ranks
            .iter()
            .enumerate()
            .map(|(mask, &r)| {
                let key = one_based(mask).iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
                (key, r)
            })
            .collect();
        TableDoc { n: self.n, ranks }
    }
}

impl RankOracle for RankTable {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn rank(&self, subset: &[usize]) -> usize {
        self.ranks[mask_of(subset)]
    }
}

/// One failed axiom instance; subsets are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum AxiomViolation {
    Normalization { rank: usize },
    Monotonicity { smaller: Vec<usize>, larger: Vec<usize>, ranks: (usize, usize) },
    /// rho(A+i) - rho(A) < rho(A+i+j) - rho(A+j)
    Submodularity { base: Vec<usize>, i: usize, j: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub normalized: bool,
    pub monotone: bool,
    pub submodular: bool,
    pub pass: bool,
    pub violation_count: usize,
    /// At most a handful per axiom.
    pub witnesses: Vec<AxiomViolation>,
}

/// Checks the three polymatroid axioms. Submodularity uses the local
/// exchange form over (A, i, j), which is equivalent to the pairwise form.
pub fn check_axioms(t: &RankTable) -> AxiomReport {
    let n = t.n;
    let r = |m: usize| t.ranks[m];
    let normalized = r(0) == 0;

    let per_mask = |mask: usize| -> (Vec<AxiomViolation>, Vec<AxiomViolation>) {
        let mut mono = Vec::new();
        let mut sub = Vec::new();
        for i in 0..n {
            let bi = 1 << i;
            if mask & bi != 0 {
                continue;
            }
            if r(mask) > r(mask | bi) {
                mono.push(AxiomViolation::Monotonicity {
                    smaller: one_based(mask),
                    larger: one_based(mask | bi),
                    ranks: (r(mask), r(mask | bi)),
                });
            }
            for j in i + 1..n {
                let bj = 1 << j;
                if mask & bj != 0 {
                    continue;
                }
                if r(mask | bi) + r(mask | bj) < r(mask | bi | bj) + r(mask) {
                    sub.push(AxiomViolation::Submodularity {
                        base: one_based(mask),
                        i: i + 1,
                        j: j + 1,
                    });
                }
            }
        }
        (mono, sub)
    };

    let (mono, sub): (Vec<_>, Vec<_>) = (0..1usize << n).into_par_iter().map(per_mask).unzip();
    let mono: Vec<AxiomViolation> = mono.into_iter().flatten().collect();
    let sub: Vec<AxiomViolation> = sub.into_iter().flatten().collect();

    let mut witnesses = Vec::new();
    if !normalized {
        witnesses.push(AxiomViolation::Normalization { rank: r(0) });
    }
    let violation_count = usize::from(!normalized) + mono.len() + sub.len();
    let (monotone, submodular) = (mono.is_empty(), sub.is_empty());
    witnesses.extend(mono.into_iter().take(WITNESS_CAP));
    witnesses.extend(sub.into_iter().take(WITNESS_CAP));
    AxiomReport {
        normalized,
        monotone,
        submodular,
        pass: normalized && monotone && submodular,
        violation_count,
        witnesses,
    }
}

/// Smallest d with rho(A) <= d|A| over all nonempty subsets of the table.
pub fn rho_max(t: &RankTable) -> usize {
    (1..1usize << t.n)
        .map(|m| t.ranks[m].div_ceil(m.count_ones() as usize))
        .max()
        .unwrap_or(0)
}

/// Smallest d with rho(A) <= d|A| over a declared family of subsets.
pub fn rho_max_over<O: RankOracle + ?Sized>(oracle: &O, family: &[Vec<usize>]) -> usize {
    family
        .iter()
        .filter_map(|a| {
            let set: BTreeSet<usize> = a.iter().copied().collect();
            (!set.is_empty()).then(|| {
                let v: Vec<usize> = set.into_iter().collect();
                oracle.rank(&v).div_ceil(v.len())
            })
        })
        .max()
        .unwrap_or(0)
}

/// Singleton family `{{0}, {1}, ..., {n-1}}`.
pub fn singletons(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

/// True iff |v(A)| <= rho(A) for every subset A.
pub fn membership(v: &GroundVector, t: &RankTable) -> Result<bool> {
    if v.0.len() != t.n {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, ground set has {} elements",
            v.0.len(),
            t.n
        )));
    }
    Ok((0..1usize << t.n).all(|mask| mask_elements(mask).map(|i| v.0[i]).sum::<usize>() <= t.ranks[mask]))
}

/// Rank table of the subspace arrangement given by the row spaces of `mats`.
pub fn from_subspaces(mats: &[FMatrix]) -> Result<RankTable> {
    let n = mats.len();
    if n > MAX_TABLE_GROUND {
        return Err(Error::GroundSetTooLarge(n));
    }
    let Some(first) = mats.first() else {
        return RankTable::new(0, vec![0]);
    };
    let (field, width) = (first.field(), first.cols());
    for (i, m) in mats.iter().enumerate() {
        if m.field() != field || m.cols() != width {
            return Err(Error::AmbientMismatch(format!(
                "subspace {} lives in GF({})^{}, expected GF({})^{}",
                i + 1,
                m.field().p(),
                m.cols(),
                field.p(),
                width
            )));
        }
    }
    let ranks = (0..1usize << n)
        .into_par_iter()
        .map(|mask| {
            let chosen: Vec<&FMatrix> = mask_elements(mask).map(|i| &mats[i]).collect();
            stack_refs(field, width, &chosen).expect("checked above").rank()
        })
        .collect();
    RankTable::new(n, ranks)
}

/// One failed mapping condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum DpnViolation {
    /// Two source messages share a ground element.
    NotInjective { first: MessageRef, second: MessageRef, element: usize },
    /// d * |A ∩ f(sources)| > rho(A).
    Membership { subset: Vec<usize>, required: usize, rank: usize },
    /// rho(f(I(x))) != rho(f(I(x) ∪ O(x))).
    RankNotPreserved { node: String, input_rank: usize, closure_rank: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct DpnReport {
    pub d: usize,
    pub injective: bool,
    pub membership: bool,
    /// Which subsets the membership condition was evaluated on.
    pub membership_family: String,
    pub membership_checked: usize,
    pub rank_preserving: bool,
    pub pass: bool,
    pub violations: Vec<DpnViolation>,
}

/// Checks that `f` makes `net` a discrete polymatroidal network for the
/// polymatroid behind `oracle` with `rho_max = d`:
///
/// 1. `f` is one-to-one on source messages;
/// 2. `sum_{i in f(sources)} d * e_i` lies in the polymatroid, i.e.
///    `d * |A ∩ f(sources)| <= rho(A)`;
/// 3. `rho(f(I(x))) = rho(f(I(x) ∪ O(x)))` at every node `x`.
///
/// `I(x)` is the source's own message or the node's in-edge messages.
/// `O(x)` is the out-edge messages, and for a terminal, its demanded source
/// messages.
///
/// Condition 2 runs over every subset of the source image when that image
/// has at most [`EXHAUSTIVE_MEMBERSHIP_LIMIT`] elements. Otherwise it runs
/// over the singletons and the full image: together with submodularity and
/// `rho(i) <= d`, `rho(F) = d|F|` forces `rho(A) >= d|A|` for every `A ⊆ F`.
/// `extra` adds arbitrary (mixed) subsets. The report names the family used.
pub fn check_dpn<O: RankOracle + ?Sized>(
    net: &Network,
    oracle: &O,
    f: &DpnMapping,
    d: usize,
    extra: &[Vec<usize>],
) -> Result<DpnReport> {
    for r in net.message_refs() {
        match f.get(&r) {
            None => return Err(Error::PartialMapping(r.to_string())),
            Some(&i) if i >= oracle.ground_size() => {
                return Err(Error::DimensionMismatch(format!(
                    "{r} maps to element {i}, ground set has {}",
                    oracle.ground_size()
                )))
            }
            _ => {}
        }
    }
    let image = |r: &MessageRef| f[r];
    let mut violations = Vec::new();

    // (1)
    let mut owner: BTreeMap<usize, MessageRef> = BTreeMap::new();
    let mut injective = true;
    let mut sources: Vec<MessageRef> = net.source_messages.values().map(|m| MessageRef::Source(m.clone())).collect();
    sources.sort();
    for s in &sources {
        let el = image(s);
        if let Some(prev) = owner.get(&el) {
            injective = false;
            violations.push(DpnViolation::NotInjective {
                first: prev.clone(),
                second: s.clone(),
                element: el,
            });
        } else {
            owner.insert(el, s.clone());
        }
    }

    // (2)
    let src_image: Vec<usize> = owner.keys().copied().collect();
    let src_set: BTreeSet<usize> = src_image.iter().copied().collect();
    let mut family: Vec<Vec<usize>> = Vec::new();
    let membership_family = if src_image.len() <= EXHAUSTIVE_MEMBERSHIP_LIMIT {
        for mask in 1..1usize << src_image.len() {
            family.push(mask_elements(mask).map(|k| src_image[k]).collect());
        }
        format!("all {} nonempty subsets of the source image", family.len())
    } else {
        family.extend(src_image.iter().map(|&i| vec![i]));
        family.push(src_image.clone());
        let exact = src_image.iter().all(|&i| oracle.rank(&[i]) <= d);
        format!(
            "{} singletons and the full source image (submodular reduction{})",
            src_image.len(),
            if exact { "" } else { "; not exact, a singleton exceeds d" }
        )
    };
    let membership_family = if extra.is_empty() {
        membership_family
    } else {
        family.extend(extra.iter().cloned());
        format!("{membership_family} plus {} declared subsets", extra.len())
    };
    let membership_failures: Vec<DpnViolation> = family
        .par_iter()
        .filter_map(|a| {
            let required = d * a.iter().filter(|i| src_set.contains(i)).collect::<BTreeSet<_>>().len();
            let rank = oracle.rank(a);
            (required > rank).then(|| DpnViolation::Membership {
                subset: a.clone(),
                required,
                rank,
            })
        })
        .collect();
    let membership = membership_failures.is_empty();
    violations.extend(membership_failures.into_iter().take(WITNESS_CAP));

    // (3)
    let mut node_ids: Vec<&str> = net.nodes.iter().map(|n| n.id.as_str()).collect();
    node_ids.sort_unstable();
    let preserved: Vec<Option<DpnViolation>> = node_ids
        .par_iter()
        .map(|&x| -> Result<Option<DpnViolation>> {
            let inputs: Vec<usize> = net.node_inputs(x)?.iter().map(image).collect();
            let mut closure = inputs.clone();
            for e in net.out_edges(x)? {
                closure.push(image(&MessageRef::Edge(e.id.clone())));
            }
            if net.role(x) == Some(Role::Terminal) {
                for m in net.demands.get(x).into_iter().flatten() {
                    closure.push(image(&MessageRef::Source(m.clone())));
                }
            }
            let input_rank = oracle.rank(&inputs);
            let closure_rank = oracle.rank(&closure);
            Ok((input_rank != closure_rank).then(|| DpnViolation::RankNotPreserved {
                node: x.to_string(),
                input_rank,
                closure_rank,
            }))
        })
        .collect::<Result<_>>()?;
    let rank_failures: Vec<DpnViolation> = preserved.into_iter().flatten().collect();
    let rank_preserving = rank_failures.is_empty();
    violations.extend(rank_failures);

    Ok(DpnReport {
        d,
        injective,
        membership,
        membership_checked: family.len(),
        membership_family,
        rank_preserving,
        pass: injective && membership && rank_preserving,
        violations,
    })
}
