//! Numerical ledger of the divisibility argument for the generalized
//! M-network, evaluated on a rank oracle over its messages.
//!
//! With `g` the rank of a set of messages:
//! * Set I: for every tuple `(j1..jm)`, `sum_i g(Y_ii, X_i_{ji}) <= (2m-1)d`;
//! * Set II: for every `i`, `sum_j g(Y_ii, X_ij) >= (2m-1)d`;
//! * every `u -> v` edge has `g = d`, and these `m^2` ranks sum to `m^2 d`;
//! * for every tuple, `sum_i g(Y_ii, X_i_{ji}) = g(union of those pairs)`;
//! * for solutions, `g(Y_ii, X_ij) = (2m-1)d/m` for all `i, j`, so `m | d`.
//!
//! Combining Set I and Set II by elimination yields the last line; that chain
//! is not replayed symbolically. Its premises (Set I, Set II) and conclusion
//! are all checked on the same oracle values.

use rayon::prelude::*;
use serde::Serialize;

use crate::code::Verdict;
use crate::error::{Error, Result};
use crate::mnet::MnetLayout;
use crate::network::MessageRef;
use crate::polymatroid::LabeledRankOracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "=")]
    Equal,
}

impl Relation {
    fn holds(self, lhs: usize, rhs: usize) -> bool {
        match self {
            Relation::AtMost => lhs <= rhs,
            Relation::AtLeast => lhs >= rhs,
            Relation::Equal => lhs == rhs,
        }
    }
}

/// One checked (in)equality `sum(terms) <relation> rhs`. Every term is the
/// rank of the matching entry in `queried`; when `rhs_query` is present the
/// right-hand side is that set's rank rather than a constant.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerRecord {
    pub label: String,
    pub queried: Vec<Vec<String>>,
    pub terms: Vec<usize>,
    pub lhs: usize,
    pub relation: Relation,
    pub rhs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs_query: Option<Vec<String>>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FinalRecord {
    /// False when the code is not a solution and the check was skipped.
    pub checked: bool,
    /// `g(Y_ii, X_ij)`, rows indexed by `i`.
    pub g_values: Vec<Vec<usize>>,
    pub expected: String,
    /// `(2m-1)d/m` when it is an integer.
    pub expected_value: Option<usize>,
    pub all_equal: bool,
    pub conservation_sum: usize,
    pub conservation_expected: usize,
    pub divides: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerSummary {
    pub set_one_all_pass: bool,
    pub set_two_all_pass: bool,
    pub edge_ranks_ok: bool,
    pub independence_ok: bool,
    pub final_equality_ok: bool,
    pub divisibility_ok: bool,
    pub all_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerReport {
    pub m: usize,
    pub d: usize,
    pub p: u32,
    pub set_one: Vec<LedgerRecord>,
    pub set_two: Vec<LedgerRecord>,
    pub edge_ranks: Vec<LedgerRecord>,
    pub independence: Vec<LedgerRecord>,
    #[serde(rename = "final")]
    pub final_check: FinalRecord,
    pub summary: LedgerSummary,
}

fn ids(refs: &[MessageRef]) -> Vec<String> {
    refs.iter().map(|r| r.id().to_string()).collect()
}

fn g<O: LabeledRankOracle + ?Sized>(oracle: &O, refs: &[MessageRef]) -> Result<usize> {
    oracle.rank_of(refs).map_err(|e| match e {
        Error::UnknownMessageRef(r) => Error::LayoutMismatch(format!("oracle has no element for {r}")),
        other => other,
    })
}

fn pair(l: &MnetLayout, i: usize, j: usize) -> Vec<MessageRef> {
    vec![l.y_diag_ref(i), l.x_ref(i, j)]
}

fn fmt_tuple(t: &[usize]) -> String {
    t.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn summed<O: LabeledRankOracle + ?Sized>(
    oracle: &O,
    label: String,
    queried: Vec<Vec<MessageRef>>,
    relation: Relation,
    rhs: usize,
) -> Result<LedgerRecord> {
    let terms = queried.iter().map(|q| g(oracle, q)).collect::<Result<Vec<_>>>()?;
    let lhs = terms.iter().sum();
    Ok(LedgerRecord {
        label,
        queried: queried.iter().map(|q| ids(q)).collect(),
        terms,
        lhs,
        relation,
        rhs,
        rhs_query: None,
        pass: relation.holds(lhs, rhs),
    })
}

/// Set I, one record per demand tuple in terminal order.
pub fn check_set_one<O: LabeledRankOracle + ?Sized>(oracle: &O, l: &MnetLayout, d: usize) -> Result<Vec<LedgerRecord>> {
    let bound = (2 * l.m - 1) * d;
    (0..l.terminal_count())
        .into_par_iter()
        .map(|k| {
            let t = l.tuple(k);
            let queried = t.iter().enumerate().map(|(i, &j)| pair(l, i, j)).collect();
            summed(oracle, format!("set_one({})", fmt_tuple(&t)), queried, Relation::AtMost, bound)
        })
        .collect()
}

/// Set II, one record per `i`.
pub fn check_set_two<O: LabeledRankOracle + ?Sized>(oracle: &O, l: &MnetLayout, d: usize) -> Result<Vec<LedgerRecord>> {
    let bound = (2 * l.m - 1) * d;
    (0..l.m)
        .map(|i| {
            let queried = (0..l.m).map(|j| pair(l, i, j)).collect();
            summed(oracle, format!("set_two({})", i + 1), queried, Relation::AtLeast, bound)
        })
        .collect()
}

/// `g(Y) = d` for each of the `m^2` relay edges, then their total `= m^2 d`.
pub fn check_edge_ranks<O: LabeledRankOracle + ?Sized>(oracle: &O, l: &MnetLayout, d: usize) -> Result<Vec<LedgerRecord>> {
    let mut edges = Vec::new();
    for i in 0..l.m {
        edges.push(l.y_diag_ref(i));
        edges.extend((0..l.m - 1).map(|k| l.y_cross_ref(i, k)));
    }
    let mut out = edges
        .iter()
        .map(|e| summed(oracle, format!("rank({})", e.id()), vec![vec![e.clone()]], Relation::Equal, d))
        .collect::<Result<Vec<_>>>()?;
    let queried = edges.into_iter().map(|e| vec![e]).collect();
    out.push(summed(oracle, "rank_total".into(), queried, Relation::Equal, l.m * l.m * d)?);
    Ok(out)
}

/// Additivity over each demand tuple's `(Y_ii, X_i_{ji})` pairs.
pub fn check_independence<O: LabeledRankOracle + ?Sized>(oracle: &O, l: &MnetLayout) -> Result<Vec<LedgerRecord>> {
    (0..l.terminal_count())
        .into_par_iter()
        .map(|k| {
            let t = l.tuple(k);
            let queried: Vec<Vec<MessageRef>> = t.iter().enumerate().map(|(i, &j)| pair(l, i, j)).collect();
            let union: Vec<MessageRef> = queried.iter().flatten().cloned().collect();
            let joint = g(oracle, &union)?;
            let mut rec = summed(oracle, format!("independence({})", fmt_tuple(&t)), queried, Relation::Equal, joint)?;
            rec.rhs_query = Some(ids(&union));
            Ok(rec)
        })
        .collect()
}

fn final_values<O: LabeledRankOracle + ?Sized>(oracle: &O, l: &MnetLayout, d: usize, checked: bool) -> Result<FinalRecord> {
    let m = l.m;
    let g_values = (0..m)
        .map(|i| (0..m).map(|j| g(oracle, &pair(l, i, j))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let numer = (2 * m - 1) * d;
    let expected_value = numer.is_multiple_of(m).then_some(numer / m);
    // m * g = (2m-1)d, compared without division
    let all_equal = g_values.iter().flatten().all(|&v| v * m == numer);
    Ok(FinalRecord {
        checked,
        conservation_sum: g_values.iter().flatten().sum(),
        conservation_expected: m * numer,
        g_values,
        expected: "(2m-1)d/m".into(),
        expected_value,
        all_equal,
        divides: d.is_multiple_of(m),
    })
}

/// The closing equality and `m | d`. Only meaningful for solutions, so a
/// verdict without overall success is rejected.
pub fn check_divisibility<O: LabeledRankOracle + ?Sized>(
    oracle: &O,
    l: &MnetLayout,
    d: usize,
    verdict: &Verdict,
) -> Result<FinalRecord> {
    if !verdict.solution {
        return Err(Error::NotASolution);
    }
    final_values(oracle, l, d, true)
}

/// Runs every check. Non-solutions are rejected unless `allow_nonsolution`,
/// in which case the final equality and divisibility are reported but not
/// counted.
pub fn run_ledger<O: LabeledRankOracle + ?Sized>(
    oracle: &O,
    l: &MnetLayout,
    verdict: &Verdict,
    allow_nonsolution: bool,
) -> Result<LedgerReport> {
    let d = verdict.d;
    if !verdict.solution && !allow_nonsolution {
        return Err(Error::NotASolution);
    }
    let set_one = check_set_one(oracle, l, d)?;
    let set_two = check_set_two(oracle, l, d)?;
    let edge_ranks = check_edge_ranks(oracle, l, d)?;
    let independence = check_independence(oracle, l)?;
    let final_check = if verdict.solution {
        check_divisibility(oracle, l, d, verdict)?
    } else {
        final_values(oracle, l, d, false)?
    };
    let all = |rs: &[LedgerRecord]| rs.iter().all(|r| r.pass);
    let final_equality_ok = final_check.all_equal && final_check.conservation_sum == final_check.conservation_expected;
    let divisibility_ok = final_check.divides;
    let summary = LedgerSummary {
        set_one_all_pass: all(&set_one),
        set_two_all_pass: all(&set_two),
        edge_ranks_ok: all(&edge_ranks),
        independence_ok: all(&independence),
        final_equality_ok,
        divisibility_ok,
        all_pass: all(&set_one)
            && all(&set_two)
            && all(&edge_ranks)
            && all(&independence)
            && (!final_check.checked || (final_equality_ok && divisibility_ok)),
    };
    Ok(LedgerReport {
        m: l.m,
        d,
        p: verdict.p,
        set_one,
        set_two,
        edge_ranks,
        independence,
        final_check,
        summary,
    })
}
