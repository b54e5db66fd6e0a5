//! Exhaustive search for (d,d) vector linear solutions on small networks.
//!
//! The search enumerates local maps on the *interior* edges (edges whose head
//! is not a terminal) in a fixed odometer order: edges sorted by id, each
//! edge's inputs sorted, entries row-major, first edge most significant. For
//! every interior assignment each terminal is then settled on its own, since
//! the maps on its in-edges reach no other terminal.
//!
//! Reductions, each exact:
//! * **source canonicalization**: when every source has a single out-edge and
//!   every source message is demanded somewhere, source-edge maps are fixed to
//!   the identity. A singular map loses symbols some terminal needs; an
//!   invertible one can be folded into the maps downstream.
//! * **interior canonicalization**: an edge map `A` and `G·A` (`G`
//!   invertible) give the same row space, and downstream maps can absorb
//!   `G^-1`, so only maps in reduced row-echelon form are enumerated.
//! * **terminal in-edges**: an in-edge can deliver any subspace of dimension
//!   at most `d` of the span `W` of its tail's inputs. If `dim W <= d` the
//!   whole of `W` is taken. For one remaining edge the demand space `D` is
//!   reachable from the rest `R` iff `D ⊆ R + W` and
//!   `dim(R + D) - dim(R) <= d`. Any further edges are enumerated.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{source_blocks, verify_solution, LinearCode};
use crate::error::{Error, Result};
use crate::field::{solve_decoder, stack_refs, FMatrix, PrimeField};
use crate::network::{MessageRef, Network, Role};

/// Largest reduced-echelon table built for one map shape.
const MAX_RREF_TABLE: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub p: u64,
    pub d: usize,
    /// Maximum number of interior assignments to examine. `None` runs to
    /// exhaustion.
    pub budget: Option<u128>,
    pub canonicalize_sources: bool,
    pub canonicalize_interior: bool,
    /// Settle terminals one at a time. When off, every edge map (terminal
    /// in-edges included) is part of the odometer.
    pub decompose_terminals: bool,
    pub parallel_shards: usize,
}

impl SearchConfig {
    pub fn new(p: u64, d: usize) -> Self {
        SearchConfig {
            p,
            d,
            budget: None,
            canonicalize_sources: true,
            canonicalize_interior: true,
            decompose_terminals: true,
            parallel_shards: 1,
        }
    }

    /// No reductions at all apart from the per-terminal split.
    pub fn naive(p: u64, d: usize) -> Self {
        SearchConfig {
            canonicalize_sources: false,
            canonicalize_interior: false,
            ..Self::new(p, d)
        }
    }
}

/// How one odometer slot ranges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDescription {
    pub edge: String,
    pub inputs: Vec<MessageRef>,
    /// "rref" or "entries"
    pub domain: String,
    pub radix: u128,
}

/// What was enumerated, in which order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enumeration {
    pub sources_canonicalized: bool,
    pub interior_canonicalized: bool,
    pub terminals_decomposed: bool,
    /// Edges whose maps are fixed to the identity.
    pub fixed_identity: Vec<String>,
    pub slots: Vec<SlotDescription>,
    /// Product of the slot radices; `None` if it overflows.
    pub space_size: Option<u128>,
    pub order: String,
}

#[derive(Clone, Debug)]
pub enum SearchOutcome {
    /// A verified solution and the 1-based position at which it was found.
    Found { code: LinearCode, enumerated: u128 },
    /// Every assignment of the (reduced) space was examined.
    ExhaustedNone { enumerated: u128, enumeration: Enumeration },
    /// The budget ran out first.
    Inconclusive { tried: u128 },
}

impl SearchOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            SearchOutcome::Found { .. } => "found",
            SearchOutcome::ExhaustedNone { .. } => "exhausted_none",
            SearchOutcome::Inconclusive { .. } => "inconclusive",
        }
    }

    pub fn enumerated(&self) -> u128 {
        match self {
            SearchOutcome::Found { enumerated, .. } | SearchOutcome::ExhaustedNone { enumerated, .. } => *enumerated,
            SearchOutcome::Inconclusive { tried } => *tried,
        }
    }
}

#[derive(Clone, Debug)]
enum Domain {
    Rref(Arc<Vec<FMatrix>>),
    /// All `rows x cols` matrices; digit = entries in base p, first entry
    /// most significant, entries grouped by input block.
    Entries { count: u128 },
}

impl Domain {
    fn radix(&self) -> u128 {
        match self {
            Domain::Rref(list) => list.len() as u128,
            Domain::Entries { count } => *count,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Domain::Rref(_) => "rref",
            Domain::Entries { .. } => "entries",
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum InputSrc {
    Block(usize),
    Interior(usize),
}

#[derive(Clone, Debug)]
struct EdgeSpec {
    id: String,
    inputs: Vec<MessageRef>,
    srcs: Vec<InputSrc>,
}

#[derive(Clone, Debug)]
enum Choice {
    Identity,
    Slot(usize),
}

#[derive(Clone, Debug)]
struct InteriorEdge {
    spec: EdgeSpec,
    choice: Choice,
}

#[derive(Clone, Debug)]
struct Slot {
    edge: String,
    inputs: Vec<MessageRef>,
    cols: usize,
    domain: Domain,
}

#[derive(Clone, Debug)]
struct TerminalEdge {
    spec: EdgeSpec,
    identity: bool,
    domain: Domain,
}

#[derive(Clone, Debug)]
enum TerminalMode {
    Decomposed(Vec<TerminalEdge>),
    /// In-edges are interior edges at these indices.
    Joint(Vec<usize>),
}

#[derive(Clone, Debug)]
struct TerminalPlan {
    mode: TerminalMode,
    selection: FMatrix,
}

struct Plan {
    field: PrimeField,
    d: usize,
    width: usize,
    block_mats: Vec<FMatrix>,
    interior: Vec<InteriorEdge>,
    slots: Vec<Slot>,
    terminals: Vec<TerminalPlan>,
    enumeration: Enumeration,
}

fn checked_pow(base: u128, exp: usize) -> Option<u128> {
    (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base))
}

/// Every `rows x cols` matrix in reduced row-echelon form (zero rows last),
/// sorted lexicographically by row-major entries.
fn rref_table(field: PrimeField, rows: usize, cols: usize) -> Result<Vec<FMatrix>> {
    let p = field.p() as u128;
    let mut out = Vec::new();
    let mut pivots = Vec::new();
    fn combos(n: usize, r: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
        if cur.len() == r {
            return f(cur);
        }
        for c in start..n {
            cur.push(c);
            combos(n, r, c + 1, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    for r in 0..=rows.min(cols) {
        combos(cols, r, 0, &mut pivots, &mut |piv: &[usize]| {
            let mut free = Vec::new();
            for (i, &c) in piv.iter().enumerate() {
                for j in c + 1..cols {
                    if !piv.contains(&j) {
                        free.push((i, j));
                    }
                }
            }
            let count = checked_pow(p, free.len()).filter(|&c| c <= MAX_RREF_TABLE as u128);
            let Some(count) = count else {
                return Err(Error::SearchSpaceTooLarge(format!(
                    "reduced-echelon table for {rows}x{cols} maps over GF({p}) is too large"
                )));
            };
            for mut k in 0..count {
                let mut m = FMatrix::zeros(field, rows, cols);
                for (i, &c) in piv.iter().enumerate() {
                    m.set(i, c, 1);
                }
                for &(i, j) in free.iter().rev() {
                    m.set(i, j, (k % p) as u32);
                    k /= p;
                }
                out.push(m);
            }
            if out.len() > MAX_RREF_TABLE {
                return Err(Error::SearchSpaceTooLarge(format!(
                    "reduced-echelon table for {rows}x{cols} maps over GF({p}) is too large"
                )));
            }
            Ok(())
        })?;
    }
    out.sort_by(|a, b| a.entries().cmp(b.entries()));
    Ok(out)
}

fn entries_matrix(field: PrimeField, rows: usize, cols: usize, d: usize, mut digit: u128) -> FMatrix {
    // digit layout: input block b, row r, column c; the last position is the
    // least significant
    let p = field.p() as u128;
    let blocks = cols / d;
    let mut m = FMatrix::zeros(field, rows, cols);
    for b in (0..blocks).rev() {
        for r in (0..rows).rev() {
            for c in (0..d).rev() {
                m.set(r, b * d + c, (digit % p) as u32);
                digit /= p;
            }
        }
    }
    m
}

impl Plan {
    fn new(net: &Network, cfg: &SearchConfig) -> Result<Plan> {
        net.ensure_valid()?;
        let field = PrimeField::new(cfg.p)?;
        let d = cfg.d;
        if d == 0 {
            return Err(Error::ShapeMismatch("message dimension must be at least 1".into()));
        }
        let (order, blocks) = source_blocks(net);
        let width = order.len() * d;
        let block_mats: Vec<FMatrix> = (0..order.len())
            .map(|b| {
                let mut m = FMatrix::zeros(field, d, width);
                m.place(0, b * d, &FMatrix::identity(field, d));
                m
            })
            .collect();

        let demanded: std::collections::HashSet<&str> =
            net.demands.values().flatten().map(String::as_str).collect();
        let sources_canonical = cfg.canonicalize_sources
            && net.sources().iter().all(|s| {
                net.out_edges(s).map(|es| es.len() == 1).unwrap_or(false)
                    && net.source_messages.get(*s).is_some_and(|m| demanded.contains(m.as_str()))
            });
        // terminals have no out-edges in a valid network, so a terminal
        // in-edge reaches exactly one terminal
        let decompose = cfg.decompose_terminals
            && net.edges.iter().all(|e| {
                net.role(&e.head) != Some(Role::Terminal) || net.out_edges(&e.head).map(|o| o.is_empty()).unwrap_or(false)
            });

        let topo = net.edges_in_topo_order()?;
        let is_terminal_edge = |head: &str| net.role(head) == Some(Role::Terminal);
        let interior_ids: Vec<&str> = topo
            .iter()
            .filter(|e| !decompose || !is_terminal_edge(&e.head))
            .map(|e| e.id.as_str())
            .collect();
        let interior_pos: HashMap<&str, usize> = interior_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let spec_of = |edge: &str| -> Result<EdgeSpec> {
            let e = net.edge(edge).expect("edge of this network");
            let inputs = net.node_inputs(&e.tail)?;
            let srcs = inputs
                .iter()
                .map(|r| match r {
                    MessageRef::Source(m) => InputSrc::Block(blocks[m]),
                    MessageRef::Edge(prev) => InputSrc::Interior(interior_pos[prev.as_str()]),
                })
                .collect();
            Ok(EdgeSpec {
                id: edge.to_string(),
                inputs,
                srcs,
            })
        };
        let source_tailed = |edge: &str| {
            let e = net.edge(edge).expect("edge of this network");
            net.role(&e.tail) == Some(Role::Source)
        };

        let mut rref_cache: HashMap<usize, Arc<Vec<FMatrix>>> = HashMap::new();
        let mut domain_for = |cols: usize| -> Result<Domain> {
            if cfg.canonicalize_interior {
                if let Some(t) = rref_cache.get(&cols) {
                    return Ok(Domain::Rref(t.clone()));
                }
                let t = Arc::new(rref_table(field, d, cols)?);
                rref_cache.insert(cols, t.clone());
                Ok(Domain::Rref(t))
            } else {
                let count = checked_pow(cfg.p as u128, d * cols).ok_or_else(|| {
                    Error::SearchSpaceTooLarge(format!("{d}x{cols} maps over GF({}) overflow", cfg.p))
                })?;
                Ok(Domain::Entries { count })
            }
        };

        // slots in edge-id order
        let mut slot_ids: Vec<&str> = interior_ids
            .iter()
            .copied()
            .filter(|&id| !(sources_canonical && source_tailed(id)))
            .collect();
        slot_ids.sort_unstable();
        let slot_index: HashMap<&str, usize> = slot_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut slots = Vec::new();
        for &id in &slot_ids {
            let spec = spec_of(id)?;
            let cols = spec.inputs.len() * d;
            slots.push(Slot {
                edge: id.to_string(),
                inputs: spec.inputs,
                cols,
                domain: domain_for(cols)?,
            });
        }
        let mut fixed_identity = Vec::new();
        let mut interior = Vec::new();
        for &id in &interior_ids {
            let choice = match slot_index.get(id) {
                Some(&s) => Choice::Slot(s),
                None => {
                    fixed_identity.push(id.to_string());
                    Choice::Identity
                }
            };
            interior.push(InteriorEdge {
                spec: spec_of(id)?,
                choice,
            });
        }

        let mut terminals = Vec::new();
        for t in net.terminals() {
            let demands = net.demands.get(t).cloned().unwrap_or_default();
            let mut selection = FMatrix::zeros(field, demands.len() * d, width);
            for (k, msg) in demands.iter().enumerate() {
                let b = blocks[msg];
                for r in 0..d {
                    selection.set(k * d + r, b * d + r, 1);
                }
            }
            let ins = net.in_edges(t)?;
            let mode = if decompose {
                let mut edges = Vec::new();
                for e in ins {
                    let spec = spec_of(&e.id)?;
                    let identity = sources_canonical && source_tailed(&e.id);
                    if identity {
                        fixed_identity.push(e.id.clone());
                    }
                    let cols = spec.inputs.len() * d;
                    edges.push(TerminalEdge {
                        spec,
                        identity,
                        domain: domain_for(cols)?,
                    });
                }
                TerminalMode::Decomposed(edges)
            } else {
                TerminalMode::Joint(ins.iter().map(|e| interior_pos[e.id.as_str()]).collect())
            };
            terminals.push(TerminalPlan { mode, selection });
        }
        fixed_identity.sort();

        let space_size = slots.iter().try_fold(1u128, |acc, s| acc.checked_mul(s.domain.radix()));
        let enumeration = Enumeration {
            sources_canonicalized: sources_canonical,
            interior_canonicalized: cfg.canonicalize_interior,
            terminals_decomposed: decompose,
            fixed_identity,
            slots: slots
                .iter()
                .map(|s| SlotDescription {
                    edge: s.edge.clone(),
                    inputs: s.inputs.clone(),
                    domain: s.domain.name().into(),
                    radix: s.domain.radix(),
                })
                .collect(),
            space_size,
            order: "edges sorted by id, inputs sorted, entries row-major; first slot most significant".into(),
        };
        Ok(Plan {
            field,
            d,
            width,
            block_mats,
            interior,
            slots,
            terminals,
            enumeration,
        })
    }

    fn slot_matrix(&self, slot: usize, digit: u128) -> FMatrix {
        let s = &self.slots[slot];
        match &s.domain {
            Domain::Rref(list) => list[digit as usize].clone(),
            Domain::Entries { .. } => entries_matrix(self.field, self.d, s.cols, self.d, digit),
        }
    }

    fn domain_matrix(&self, domain: &Domain, cols: usize, digit: u128) -> FMatrix {
        match domain {
            Domain::Rref(list) => list[digit as usize].clone(),
            Domain::Entries { .. } => entries_matrix(self.field, self.d, cols, self.d, digit),
        }
    }

    fn stack_inputs(&self, srcs: &[InputSrc], globals: &[FMatrix]) -> FMatrix {
        let mats: Vec<&FMatrix> = srcs
            .iter()
            .map(|s| match *s {
                InputSrc::Block(b) => &self.block_mats[b],
                InputSrc::Interior(i) => &globals[i],
            })
            .collect();
        stack_refs(self.field, self.width, &mats).expect("shapes fixed by plan")
    }

    /// Interior global matrices for the current slot matrices.
    fn globals(&self, current: &[FMatrix]) -> Vec<FMatrix> {
        let mut globals: Vec<FMatrix> = Vec::with_capacity(self.interior.len());
        for e in &self.interior {
            let s = self.stack_inputs(&e.spec.srcs, &globals);
            let m = match e.choice {
                Choice::Identity => s,
                Choice::Slot(k) => current[k].mul(&s).expect("shapes fixed by plan"),
            };
            globals.push(m);
        }
        globals
    }

    fn candidate_ok(&self, current: &[FMatrix]) -> bool {
        let globals = self.globals(current);
        self.terminals.iter().all(|t| self.terminal_ok(t, &globals, false).is_some())
    }

    /// Settles one terminal. Returns the in-edge maps (in in-edge order) when
    /// `build` is set and the terminal can decode; an empty vector when it
    /// can decode and `build` is off; `None` otherwise.
    fn terminal_ok(&self, t: &TerminalPlan, globals: &[FMatrix], build: bool) -> Option<Vec<FMatrix>> {
        let f = self.field;
        let d = self.d;
        let target = &t.selection;
        let edges = match &t.mode {
            TerminalMode::Joint(ins) => {
                let mats: Vec<&FMatrix> = ins.iter().map(|&i| &globals[i]).collect();
                let b = stack_refs(f, self.width, &mats).expect("shapes fixed by plan");
                return b.spans(target).expect("same width").then(Vec::new);
            }
            TerminalMode::Decomposed(edges) => edges,
        };
        let stacks: Vec<FMatrix> = edges.iter().map(|e| self.stack_inputs(&e.spec.srcs, globals)).collect();
        let mut maps: Vec<Option<FMatrix>> = vec![None; edges.len()];
        let mut base: Vec<&FMatrix> = Vec::new();
        let mut open: Vec<usize> = Vec::new();
        for (k, (e, s)) in edges.iter().zip(&stacks).enumerate() {
            if e.identity {
                base.push(s);
                if build {
                    maps[k] = Some(FMatrix::identity(f, d));
                }
                continue;
            }
            let rref = s.rref();
            if rref.rank() <= d {
                base.push(s);
                if build {
                    maps[k] = Some(spanning_map(f, d, s, e.spec.inputs.len(), &rref.basis()));
                }
            } else {
                open.push(k);
            }
        }
        let base = stack_refs(f, self.width, &base).expect("shapes fixed by plan");
        let Some(last) = open.pop() else {
            return base.spans(target).expect("same width").then(|| finish(maps, build));
        };

        // odometer over the open edges except the last
        let radices: Vec<u128> = open.iter().map(|&k| edges[k].domain.radix()).collect();
        let mut digits = vec![0u128; open.len()];
        loop {
            let chosen: Vec<FMatrix> = open
                .iter()
                .zip(&digits)
                .map(|(&k, &dg)| self.domain_matrix(&edges[k].domain, edges[k].spec.inputs.len() * d, dg))
                .collect();
            let mut rows: Vec<FMatrix> = vec![base.clone()];
            for (a, &k) in chosen.iter().zip(&open) {
                rows.push(a.mul(&stacks[k]).expect("shapes fixed by plan"));
            }
            let reach = stack_refs(f, self.width, &rows.iter().collect::<Vec<_>>()).expect("shapes fixed by plan");
            if let Some(a_last) = last_edge_map(f, d, &reach, &stacks[last], target, build) {
                if build {
                    for (a, &k) in chosen.into_iter().zip(&open) {
                        maps[k] = Some(a);
                    }
                    maps[last] = Some(a_last);
                }
                return Some(finish(maps, build));
            }
            // advance, last digit fastest
            let mut pos = digits.len();
            loop {
                if pos == 0 {
                    return None;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < radices[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    fn build_code(&self, net: &Network, current: &[FMatrix]) -> Result<LinearCode> {
        let d = self.d;
        let mut code = LinearCode::new(self.field, d);
        let put = |code: &mut LinearCode, spec: &EdgeSpec, a: &FMatrix| {
            for (b, input) in spec.inputs.iter().enumerate() {
                code.set_map(&spec.id, input.clone(), a.column_block(b * d, d));
            }
        };
        for e in &self.interior {
            let a = match e.choice {
                Choice::Identity => FMatrix::identity(self.field, d),
                Choice::Slot(k) => current[k].clone(),
            };
            put(&mut code, &e.spec, &a);
        }
        let globals = self.globals(current);
        for t in &self.terminals {
            if let TerminalMode::Decomposed(edges) = &t.mode {
                let maps = self.terminal_ok(t, &globals, true).ok_or(Error::UnsoundResult)?;
                for (e, a) in edges.iter().zip(&maps) {
                    put(&mut code, &e.spec, a);
                }
            }
        }
        let verdict = verify_solution(net, &code)?;
        if !verdict.solution {
            return Err(Error::UnsoundResult);
        }
        for tv in verdict.terminals {
            if let Some(dec) = tv.decoder {
                code.decoders.insert(tv.terminal, dec);
            }
        }
        Ok(code)
    }

    fn radices(&self) -> Vec<u128> {
        self.slots.iter().map(|s| s.domain.radix()).collect()
    }

    fn digits_of(&self, mut index: u128) -> Vec<u128> {
        let radices = self.radices();
        let mut digits = vec![0u128; radices.len()];
        for (slot, &r) in digits.iter_mut().zip(&radices).rev() {
            *slot = index % r;
            index /= r;
        }
        digits
    }

    /// First success in `[start, end)`, as (index, slot matrices).
    fn scan(&self, start: u128, end: u128, stop: &dyn Fn() -> bool) -> Option<(u128, Vec<FMatrix>)> {
        if start >= end {
            return None;
        }
        let radices = self.radices();
        let mut digits = self.digits_of(start);
        let mut current: Vec<FMatrix> = digits.iter().enumerate().map(|(k, &dg)| self.slot_matrix(k, dg)).collect();
        let mut index = start;
        loop {
            if self.candidate_ok(&current) {
                return Some((index, current));
            }
            index += 1;
            if index >= end || (index & 0x3ff == 0 && stop()) {
                return None;
            }
            let mut pos = digits.len();
            while pos > 0 {
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < radices[pos] {
                    current[pos] = self.slot_matrix(pos, digits[pos]);
                    break;
                }
                digits[pos] = 0;
                current[pos] = self.slot_matrix(pos, 0);
            }
        }
    }
}

fn finish(maps: Vec<Option<FMatrix>>, build: bool) -> Vec<FMatrix> {
    if build {
        maps.into_iter().map(|m| m.expect("every in-edge assigned")).collect()
    } else {
        Vec::new()
    }
}

/// A `d x (inputs*d)` map whose image of `stacked` is all of its row space
/// (which has dimension at most `d`).
fn spanning_map(f: PrimeField, d: usize, stacked: &FMatrix, inputs: usize, basis: &FMatrix) -> FMatrix {
    if inputs == 1 {
        return FMatrix::identity(f, d);
    }
    let mut target = FMatrix::zeros(f, d, stacked.cols());
    target.place(0, 0, basis);
    solve_decoder(stacked, &target)
        .expect("same width")
        .expect("basis lies in the row space")
}

/// Whether some map on the last open edge (input span `w`) completes the
/// demand given everything else already received (`reach`). With `build`,
/// also returns such a map.
fn last_edge_map(f: PrimeField, d: usize, reach: &FMatrix, w: &FMatrix, target: &FMatrix, build: bool) -> Option<FMatrix> {
    let width = reach.cols();
    let st = |ms: &[&FMatrix]| stack_refs(f, width, ms).expect("same width");
    let r_reach = reach.rank();
    let r_reach_w = st(&[reach, w]).rank();
    if st(&[reach, w, target]).rank() != r_reach_w {
        return None;
    }
    if st(&[reach, target]).rank() - r_reach > d {
        return None;
    }
    if !build {
        return Some(FMatrix::zeros(f, 0, 0));
    }
    // write each demanded row as reach-part + w-part; keep w-parts that add
    // something new modulo what is already reachable
    let both = st(&[reach, w]);
    let coeffs = solve_decoder(&both, target).expect("same width").expect("target within reach + w");
    let mut acc = reach.clone();
    let mut acc_rank = r_reach;
    let mut chosen: Vec<Vec<u32>> = Vec::new();
    for row in 0..coeffs.rows() {
        let c_w = FMatrix::from_raw(f, 1, w.rows(), coeffs.row(row)[reach.rows()..].to_vec());
        let vec = c_w.mul(w).expect("shapes");
        let next = st(&[&acc, &vec]);
        let r = next.rank();
        if r > acc_rank {
            chosen.push(c_w.entries().to_vec());
            acc = next;
            acc_rank = r;
        }
    }
    debug_assert!(chosen.len() <= d);
    let mut a = FMatrix::zeros(f, d, w.rows());
    for (i, row) in chosen.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            a.set(i, j, v);
        }
    }
    Some(a)
}

/// The enumeration a search with `cfg` would perform on `net`.
pub fn plan(net: &Network, cfg: &SearchConfig) -> Result<Enumeration> {
    Ok(Plan::new(net, cfg)?.enumeration)
}

/// Exhaustive search for a (d,d) solution over GF(p).
pub fn search(net: &Network, cfg: &SearchConfig) -> Result<SearchOutcome> {
    if cfg.budget == Some(0) {
        return Err(Error::BudgetZero);
    }
    let plan = Plan::new(net, cfg)?;
    let space = plan.enumeration.space_size;
    let limit = match (space, cfg.budget) {
        (Some(s), Some(b)) => s.min(b),
        (Some(s), None) => s,
        (None, Some(b)) => b,
        (None, None) => {
            return Err(Error::SearchSpaceTooLarge(
                "the search space does not fit in 128 bits; give a budget".into(),
            ))
        }
    };
    // with no budget the space is known, so the limit is the whole space
    if space.is_none() && plan.slots.iter().any(|s| s.domain.radix() == 0) {
        return Err(Error::SearchSpaceTooLarge("empty slot domain".into()));
    }
    let shards = cfg.parallel_shards.max(1) as u128;
    let chunk = limit.div_ceil(shards).max(1);
    let best = AtomicUsize::new(usize::MAX);
    let results: Vec<Option<(u128, Vec<FMatrix>)>> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let start = (k * chunk).min(limit);
            let end = ((k + 1) * chunk).min(limit);
            let me = k as usize;
            let stop = || best.load(Ordering::Relaxed) < me;
            let hit = plan.scan(start, end, &stop);
            if hit.is_some() {
                best.fetch_min(me, Ordering::Relaxed);
            }
            hit
        })
        .collect();
    // shards are contiguous and in order, so the first hit is the lowest index
    if let Some((index, current)) = results.into_iter().flatten().next() {
        let code = plan.build_code(net, &current)?;
        return Ok(SearchOutcome::Found {
            code,
            enumerated: index + 1,
        });
    }
    if Some(limit) == space {
        Ok(SearchOutcome::ExhaustedNone {
            enumerated: limit,
            enumeration: plan.enumeration,
        })
    } else {
        Ok(SearchOutcome::Inconclusive { tried: limit })
    }
}

/// Replayable record of a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub network_sha: String,
    pub p: u64,
    pub d: usize,
    pub canonicalized: bool,
    pub enumerated: u128,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u128>,
    pub enumeration: Enumeration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<serde_json::Value>,
}

impl Certificate {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        Ok(serde_path_to_error::deserialize(de)?)
    }

    /// The configuration that reproduces this certificate.
    pub fn config(&self) -> SearchConfig {
        SearchConfig {
            p: self.p,
            d: self.d,
            budget: self.budget,
            canonicalize_sources: self.enumeration.sources_canonicalized,
            canonicalize_interior: self.enumeration.interior_canonicalized,
            decompose_terminals: self.enumeration.terminals_decomposed,
            parallel_shards: 1,
        }
    }

    /// Re-runs the search and checks that the same certificate comes out.
    pub fn replay(&self, net: &Network) -> Result<bool> {
        if net.sha256() != self.network_sha {
            return Ok(false);
        }
        let again = certify(net, &self.config())?;
        Ok(&again == self)
    }

    /// The embedded code, if any.
    pub fn code(&self) -> Result<Option<LinearCode>> {
        self.code
            .as_ref()
            .map(|v| LinearCode::parse(&v.to_string()))
            .transpose()
    }
}

/// Runs [`search`] and packages the outcome as a [`Certificate`].
pub fn certify(net: &Network, cfg: &SearchConfig) -> Result<Certificate> {
    let enumeration = plan(net, cfg)?;
    let outcome = search(net, cfg)?;
    let code = match &outcome {
        SearchOutcome::Found { code, .. } => Some(code.to_value()),
        _ => None,
    };
    Ok(Certificate {
        network_sha: net.sha256(),
        p: cfg.p,
        d: cfg.d,
        canonicalized: enumeration.sources_canonicalized || enumeration.interior_canonicalized,
        enumerated: outcome.enumerated(),
        outcome: outcome.label().into(),
        budget: cfg.budget,
        enumeration,
        code,
    })
}

/// Interior-map counts per edge, keyed by edge id. Handy for predicting
/// enumeration sizes.
pub fn slot_radices(net: &Network, cfg: &SearchConfig) -> Result<BTreeMap<String, u128>> {
    Ok(plan(net, cfg)?
        .slots
        .into_iter()
        .map(|s| (s.edge, s.radix))
        .collect())
}
