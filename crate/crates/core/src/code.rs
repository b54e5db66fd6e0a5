//! Vector linear network codes: representation, global transfer matrices,
//! terminal decodability, and the rank function a code induces on messages.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{solve_decoder, stack_refs, FMatrix, PrimeField};
use crate::network::{MessageRef, Network};
use crate::polymatroid::{DpnMapping, LabeledRankOracle, RankOracle};

/// A (d,d) vector linear code. Local maps are keyed by `(edge id, input)`,
/// where the input is the tail's source message or one of the tail's
/// in-edges. Maps that are absent are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearCode {
    pub field: PrimeField,
    pub d: usize,
    pub local_maps: BTreeMap<(String, MessageRef), FMatrix>,
    pub decoders: BTreeMap<String, FMatrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeDoc {
    p: u64,
    d: usize,
    local_maps: Vec<LocalMapDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decoders: Option<Vec<DecoderDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalMapDoc {
    edge: String,
    input: MessageRef,
    matrix: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecoderDoc {
    terminal: String,
    matrix: Vec<Vec<u64>>,
}

fn rows_u64(m: &FMatrix) -> Vec<Vec<u64>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(u64::from).collect())
        .collect()
}

impl LinearCode {
    pub fn new(field: PrimeField, d: usize) -> Self {
        LinearCode {
            field,
            d,
            local_maps: BTreeMap::new(),
            decoders: BTreeMap::new(),
        }
    }

    /// A code with an explicit zero map for every (input, edge) pair.
    pub fn zero(net: &Network, field: PrimeField, d: usize) -> Result<Self> {
        let mut code = LinearCode::new(field, d);
        for e in &net.edges {
            for input in net.node_inputs(&e.tail)? {
                code.local_maps
                    .insert((e.id.clone(), input), FMatrix::zeros(field, d, d));
            }
        }
        Ok(code)
    }

    pub fn set_map(&mut self, edge: &str, input: MessageRef, matrix: FMatrix) {
        self.local_maps.insert((edge.to_string(), input), matrix);
    }

    pub fn map(&self, edge: &str, input: &MessageRef) -> Option<&FMatrix> {
        self.local_maps.get(&(edge.to_string(), input.clone()))
    }

    /// True when every entry of every local map is 0 or 1.
    pub fn is_selection_only(&self) -> bool {
        self.local_maps.values().all(|m| m.entries().iter().all(|&v| v <= 1))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: CodeDoc = serde_path_to_error::deserialize(de)?;
        let field = PrimeField::new(doc.p)?;
        if doc.d == 0 {
            return Err(Error::schema("d", "message dimension must be at least 1"));
        }
        let d = doc.d;
        let mut code = LinearCode::new(field, d);
        for (i, lm) in doc.local_maps.into_iter().enumerate() {
            let m = Self::parse_matrix(field, &lm.matrix, &format!("local_maps[{i}].matrix"))?;
            if m.rows() != d || m.cols() != d {
                return Err(Error::ShapeMismatch(format!(
                    "local_maps[{i}] (edge `{}`) is {}x{}, code declares d = {d}",
                    lm.edge,
                    m.rows(),
                    m.cols()
                )));
            }
            if code.local_maps.insert((lm.edge.clone(), lm.input.clone()), m).is_some() {
                return Err(Error::schema(
                    format!("local_maps[{i}]"),
                    format!("duplicate map for edge `{}` from {}", lm.edge, lm.input),
                ));
            }
        }
        for (i, dec) in doc.decoders.unwrap_or_default().into_iter().enumerate() {
            let m = Self::parse_matrix(field, &dec.matrix, &format!("decoders[{i}].matrix"))?;
            code.decoders.insert(dec.terminal, m);
        }
        Ok(code)
    }

    fn parse_matrix(field: PrimeField, rows: &[Vec<u64>], path: &str) -> Result<FMatrix> {
        FMatrix::from_rows(field, rows, 0).map_err(|e| Error::schema(path, e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("code serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("code serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("code serializes")
    }

    fn to_doc(&self) -> CodeDoc {
        CodeDoc {
            p: self.field.p() as u64,
            d: self.d,
            local_maps: self
                .local_maps
                .iter()
                .map(|((edge, input), m)| LocalMapDoc {
                    edge: edge.clone(),
                    input: input.clone(),
                    matrix: rows_u64(m),
                })
                .collect(),
            decoders: if self.decoders.is_empty() {
                None
            } else {
                Some(
                    self.decoders
                        .iter()
                        .map(|(t, m)| DecoderDoc {
                            terminal: t.clone(),
                            matrix: rows_u64(m),
                        })
                        .collect(),
                )
            },
        }
    }
}

impl Serialize for LinearCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

/// Global transfer matrices: each edge message as a `d x (S*d)` linear
/// function of all source messages, source blocks ordered by source node id.
#[derive(Clone, Debug)]
pub struct GlobalTransfer {
    pub field: PrimeField,
    pub d: usize,
    /// Source node ids in block order.
    pub source_order: Vec<String>,
    /// message id -> block index
    blocks: HashMap<String, usize>,
    pub edges: BTreeMap<String, FMatrix>,
}

impl GlobalTransfer {
    pub fn width(&self) -> usize {
        self.source_order.len() * self.d
    }

    pub fn block_of(&self, message: &str) -> Option<usize> {
        self.blocks.get(message).copied()
    }

    /// Identity on the message's own block.
    pub fn source_matrix(&self, message: &str) -> Option<FMatrix> {
        let b = self.block_of(message)?;
        let mut m = FMatrix::zeros(self.field, self.d, self.width());
        m.place(0, b * self.d, &FMatrix::identity(self.field, self.d));
        Some(m)
    }

    pub fn message_matrix(&self, r: &MessageRef) -> Result<FMatrix> {
        match r {
            MessageRef::Source(m) => self.source_matrix(m),
            MessageRef::Edge(e) => self.edges.get(e).cloned(),
        }
        .ok_or_else(|| Error::UnknownMessageRef(r.to_string()))
    }

    /// Rows selecting the demanded messages' blocks, in demand order.
    pub fn selection(&self, demands: &[String]) -> Result<FMatrix> {
        let mut sel = FMatrix::zeros(self.field, demands.len() * self.d, self.width());
        for (k, msg) in demands.iter().enumerate() {
            let b = self
                .block_of(msg)
                .ok_or_else(|| Error::UnknownMessageRef(msg.clone()))?;
            for r in 0..self.d {
                sel.set(k * self.d + r, b * self.d + r, 1);
            }
        }
        Ok(sel)
    }
}

pub(crate) fn source_blocks(net: &Network) -> (Vec<String>, HashMap<String, usize>) {
    let order: Vec<String> = net.sources().into_iter().map(String::from).collect();
    let blocks = order
        .iter()
        .enumerate()
        .filter_map(|(i, s)| net.source_messages.get(s).map(|m| (m.clone(), i)))
        .collect();
    (order, blocks)
}

fn check_maps(net: &Network, code: &LinearCode) -> Result<()> {
    for ((edge, input), m) in &code.local_maps {
        let e = net.edge(edge).ok_or_else(|| Error::UnknownEdge(edge.clone()))?;
        if m.field() != code.field {
            return Err(Error::FieldMismatch {
                left: code.field.p(),
                right: m.field().p(),
            });
        }
        if m.rows() != code.d || m.cols() != code.d {
            return Err(Error::ShapeMismatch(format!(
                "map on `{edge}` from {input} is {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                code.d,
                code.d
            )));
        }
        if !net.node_inputs(&e.tail)?.contains(input) {
            return Err(Error::InvalidLocalMap {
                edge: edge.clone(),
                input: input.to_string(),
                reason: format!("not an input of tail `{}`", e.tail),
            });
        }
    }
    Ok(())
}

/// Computes every edge's global transfer matrix in topological order.
pub fn propagate(net: &Network, code: &LinearCode) -> Result<GlobalTransfer> {
    net.ensure_valid()?;
    check_maps(net, code)?;
    let (source_order, blocks) = source_blocks(net);
    let field = code.field;
    let d = code.d;
    let width = source_order.len() * d;
    let mut edges: BTreeMap<String, FMatrix> = BTreeMap::new();
    for e in net.edges_in_topo_order()? {
        let inputs = net.node_inputs(&e.tail)?;
        let mut any = false;
        let mut acc = FMatrix::zeros(field, d, width);
        for input in &inputs {
            let Some(a) = code.map(&e.id, input) else { continue };
            any = true;
            match input {
                MessageRef::Source(msg) => {
                    // A * (identity on the block) is A placed in the block
                    let b = blocks[msg];
                    let mut placed = FMatrix::zeros(field, d, width);
                    placed.place(0, b * d, a);
                    acc = acc.add(&placed)?;
                }
                MessageRef::Edge(prev) => {
                    let m = &edges[prev];
                    let mut buf = acc.entries().to_vec();
                    a.mul_into(m, &mut buf);
                    acc = FMatrix::from_raw(field, d, width, buf);
                }
            }
        }
        if !any && !inputs.is_empty() {
            return Err(Error::UncoveredEdge(e.id.clone()));
        }
        edges.insert(e.id.clone(), acc);
    }
    Ok(GlobalTransfer {
        field,
        d,
        source_order,
        blocks,
        edges,
    })
}

fn rows_opt<S: serde::Serializer>(m: &Option<FMatrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(FMatrix::to_rows).serialize(s)
}

/// Decodability of one terminal.
#[derive(Clone, Debug, Serialize)]
pub struct TerminalVerdict {
    pub terminal: String,
    pub decodable: bool,
    /// `D` with `D * B_t = selection`, when one exists.
    #[serde(serialize_with = "rows_opt", skip_serializing_if = "Option::is_none")]
    pub decoder: Option<FMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    /// Present only when the code file supplied a decoder for this terminal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supplied_decoder_consistent: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub p: u32,
    pub d: usize,
    pub source_order: Vec<String>,
    pub terminals: Vec<TerminalVerdict>,
    pub solution: bool,
}

impl Verdict {
    pub fn failing(&self) -> impl Iterator<Item = &TerminalVerdict> {
        self.terminals.iter().filter(|t| !t.decodable)
    }
}

/// Stacked global matrices of a terminal's in-edges, in edge id order.
pub fn received(net: &Network, transfer: &GlobalTransfer, terminal: &str) -> Result<FMatrix> {
    let ins = net.in_edges(terminal)?;
    let mats: Vec<&FMatrix> = ins.iter().map(|e| &transfer.edges[&e.id]).collect();
    stack_refs(transfer.field, transfer.width(), &mats)
}

/// Checks that every terminal can linearly recover its demands, synthesizing
/// a decoder for each terminal that can.
pub fn verify_solution(net: &Network, code: &LinearCode) -> Result<Verdict> {
    let transfer = propagate(net, code)?;
    verify_with_transfer(net, code, &transfer)
}

pub fn verify_with_transfer(net: &Network, code: &LinearCode, transfer: &GlobalTransfer) -> Result<Verdict> {
    let d = code.d;
    let mut terminals = Vec::new();
    for t in net.terminals() {
        let demands = net.demands.get(t).cloned().unwrap_or_default();
        let basis = received(net, transfer, t)?;
        let target = transfer.selection(&demands)?;
        let decoder = solve_decoder(&basis, &target)?;
        let witness = match decoder {
            Some(_) => None,
            None => Some(missing_symbol(&basis, &target, &demands, d)?),
        };
        let supplied_decoder_consistent = code.decoders.get(t).map(|sup| {
            sup.rows() == target.rows()
                && sup.cols() == basis.rows()
                && sup.mul(&basis).map(|p| p == target).unwrap_or(false)
        });
        terminals.push(TerminalVerdict {
            terminal: t.to_string(),
            decodable: decoder.is_some(),
            decoder,
            witness,
            supplied_decoder_consistent,
        });
    }
    let solution = terminals.iter().all(|t| t.decodable);
    Ok(Verdict {
        p: code.field.p(),
        d,
        source_order: transfer.source_order.clone(),
        terminals,
        solution,
    })
}

fn missing_symbol(basis: &FMatrix, target: &FMatrix, demands: &[String], d: usize) -> Result<String> {
    let r = basis.rank();
    for row in 0..target.rows() {
        let one = target.select_rows([row]);
        let both = stack_refs(basis.field(), basis.cols(), &[basis, &one])?;
        if both.rank() > r {
            return Ok(format!(
                "symbol {} of demanded message `{}` is not in the span of the received messages",
                row % d + 1,
                demands[row / d]
            ));
        }
    }
    Ok("decoder synthesis failed".to_string())
}

/// Rank function induced by a code: each message's subspace is the row
/// space of its global matrix (sources get the identity on their block).
pub struct InducedRankOracle {
    field: PrimeField,
    width: usize,
    elements: Vec<MessageRef>,
    index: HashMap<MessageRef, usize>,
    matrices: Vec<FMatrix>,
    cache: Mutex<HashMap<Vec<usize>, usize>>,
}

impl std::fmt::Debug for InducedRankOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InducedRankOracle")
            .field("field", &self.field)
            .field("width", &self.width)
            .field("elements", &self.elements.len())
            .finish()
    }
}

impl InducedRankOracle {
    pub fn new(net: &Network, code: &LinearCode) -> Result<Self> {
        let transfer = propagate(net, code)?;
        Ok(Self::from_transfer(net, &transfer))
    }

    /// Builds the oracle over every message of `net`.
    pub fn from_transfer(net: &Network, transfer: &GlobalTransfer) -> Self {
        let elements = net.message_refs();
        let matrices = elements
            .iter()
            .map(|r| transfer.message_matrix(r).expect("message of this network"))
            .collect();
        Self::assemble(transfer.field, transfer.width(), elements, matrices)
    }

    /// Builds an oracle from explicit (message, matrix) pairs sharing one
    /// field and ambient width.
    pub fn from_matrices(items: Vec<(MessageRef, FMatrix)>) -> Result<Self> {
        let Some((_, first)) = items.first() else {
            return Err(Error::AmbientMismatch("no subspaces given".into()));
        };
        let (field, width) = (first.field(), first.cols());
        for (r, m) in &items {
            if m.field() != field || m.cols() != width {
                return Err(Error::AmbientMismatch(format!("{r} does not live in GF({})^{width}", field.p())));
            }
        }
        let (elements, matrices) = items.into_iter().unzip();
        Ok(Self::assemble(field, width, elements, matrices))
    }

    fn assemble(field: PrimeField, width: usize, elements: Vec<MessageRef>, matrices: Vec<FMatrix>) -> Self {
        let index = elements.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
        InducedRankOracle {
            field,
            width,
            elements,
            index,
            matrices,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn elements(&self) -> &[MessageRef] {
        &self.elements
    }

    pub fn matrix(&self, r: &MessageRef) -> Option<&FMatrix> {
        self.index.get(r).map(|&i| &self.matrices[i])
    }

    pub fn rank_refs(&self, refs: &[MessageRef]) -> Result<usize> {
        let idx = refs
            .iter()
            .map(|r| self.index.get(r).copied().ok_or_else(|| Error::UnknownMessageRef(r.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.rank(&idx))
    }

    /// Maps every message to its own ground-set element.
    pub fn identity_mapping(&self) -> DpnMapping {
        self.elements.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect()
    }

    fn compute(&self, key: &[usize]) -> usize {
        let mats: Vec<&FMatrix> = key.iter().map(|&i| &self.matrices[i]).collect();
        stack_refs(self.field, self.width, &mats)
            .expect("oracle matrices share field and width")
            .rank()
    }
}

impl RankOracle for InducedRankOracle {
    fn ground_size(&self) -> usize {
        self.elements.len()
    }

    fn rank(&self, subset: &[usize]) -> usize {
        let mut key = subset.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.is_empty() {
            return 0;
        }
        if let Some(&r) = self.cache.lock().unwrap().get(&key) {
            return r;
        }
        let r = self.compute(&key);
        self.cache.lock().unwrap().insert(key, r);
        r
    }
}

impl LabeledRankOracle for InducedRankOracle {
    fn index_of(&self, r: &MessageRef) -> Option<usize> {
        self.index.get(r).copied()
    }

    fn label(&self, i: usize) -> Option<&MessageRef> {
        self.elements.get(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::butterfly;

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn one(f: PrimeField) -> FMatrix {
        FMatrix::identity(f, 1)
    }

    pub(crate) fn xor_code(p: u64) -> LinearCode {
        let f = gf(p);
        let net = butterfly();
        let mut code = LinearCode::zero(&net, f, 1).unwrap();
        for (e, input) in [
            ("e1", MessageRef::Source("x1".into())),
            ("e2", MessageRef::Source("x1".into())),
            ("e3", MessageRef::Source("x2".into())),
            ("e4", MessageRef::Source("x2".into())),
            ("e5", MessageRef::Edge("e2".into())),
            ("e5", MessageRef::Edge("e3".into())),
            ("e6", MessageRef::Edge("e5".into())),
            ("e7", MessageRef::Edge("e5".into())),
        ] {
            code.set_map(e, input, one(f));
        }
        code
    }

    #[test]
    fn butterfly_xor_propagation() {
        let net = butterfly();
        let t = propagate(&net, &xor_code(2)).unwrap();
        assert_eq!(t.edges["e5"].entries(), &[1, 1]);
        assert_eq!(t.edges["e1"].entries(), &[1, 0]);
        assert_eq!(t.edges["e7"].entries(), &[1, 1]);
    }

    #[test]
    fn butterfly_xor_is_solution() {
        let net = butterfly();
        let v = verify_solution(&net, &xor_code(2)).unwrap();
        assert!(v.solution);
        // over GF(3) the same code with +1 coefficients also works
        assert!(verify_solution(&net, &xor_code(3)).unwrap().solution);
        for tv in &v.terminals {
            let t = propagate(&net, &xor_code(2)).unwrap();
            let b = received(&net, &t, &tv.terminal).unwrap();
            let sel = t.selection(&net.demands[&tv.terminal]).unwrap();
            assert_eq!(tv.decoder.as_ref().unwrap().mul(&b).unwrap(), sel);
        }
    }

    #[test]
    fn zero_code_propagates_zero() {
        let net = butterfly();
        let code = LinearCode::zero(&net, gf(2), 2).unwrap();
        let t = propagate(&net, &code).unwrap();
        assert!(t.edges.values().all(FMatrix::is_zero));
        let v = verify_with_transfer(&net, &code, &t).unwrap();
        assert!(!v.solution);
        assert_eq!(v.failing().count(), 2);
        assert!(v.terminals[0].witness.as_ref().unwrap().contains("x1"));
    }

    #[test]
    fn uncovered_and_bad_maps() {
        let net = butterfly();
        let mut code = xor_code(2);
        code.local_maps.remove(&("e6".to_string(), MessageRef::Edge("e5".into())));
        assert!(matches!(propagate(&net, &code), Err(Error::UncoveredEdge(e)) if e == "e6"));

        // one of two inputs missing is fine: it defaults to zero
        let mut code = xor_code(2);
        code.local_maps.remove(&("e5".to_string(), MessageRef::Edge("e3".into())));
        assert!(propagate(&net, &code).is_ok());

        let mut code = xor_code(2);
        code.set_map("e6", MessageRef::Edge("e1".into()), one(gf(2)));
        assert!(matches!(propagate(&net, &code), Err(Error::InvalidLocalMap { .. })));

        let mut code = xor_code(2);
        code.set_map("e6", MessageRef::Edge("e5".into()), FMatrix::identity(gf(2), 2));
        assert!(matches!(propagate(&net, &code), Err(Error::ShapeMismatch(_))));

        let mut code = xor_code(2);
        code.set_map("zz", MessageRef::Edge("e5".into()), one(gf(2)));
        assert!(matches!(propagate(&net, &code), Err(Error::UnknownEdge(_))));
    }

    #[test]
    fn code_json_round_trip() {
        let code = xor_code(3);
        let back = LinearCode::parse(&code.to_json()).unwrap();
        assert_eq!(back, code);

        let wrong_d = r#"{"p":2,"d":2,"local_maps":[{"edge":"e1","input":{"kind":"source","id":"x1"},"matrix":[[1]]}]}"#;
        assert!(matches!(LinearCode::parse(wrong_d), Err(Error::ShapeMismatch(_))));
        let bad_entry = r#"{"p":2,"d":1,"local_maps":[{"edge":"e1","input":{"kind":"source","id":"x1"},"matrix":[[2]]}]}"#;
        assert!(matches!(LinearCode::parse(bad_entry), Err(Error::Schema { path, .. }) if path == "local_maps[0].matrix"));
        let composite = r#"{"p":6,"d":1,"local_maps":[]}"#;
        assert!(matches!(LinearCode::parse(composite), Err(Error::CompositeModulus(6))));
    }

    #[test]
    fn supplied_decoders_are_checked() {
        let net = butterfly();
        let mut code = xor_code(2);
        // t1 receives [e1 = x1, e6 = x1 + x2]
        code.decoders.insert(
            "t1".into(),
            FMatrix::from_rows(gf(2), &[vec![1, 0], vec![1, 1]], 2).unwrap(),
        );
        code.decoders.insert("t2".into(), FMatrix::identity(gf(2), 2));
        let v = verify_solution(&net, &code).unwrap();
        assert_eq!(v.terminals[0].supplied_decoder_consistent, Some(true));
        assert_eq!(v.terminals[1].supplied_decoder_consistent, Some(false));
        assert!(v.solution);
    }

    #[test]
    fn oracle_basics() {
        let net = butterfly();
        let o = InducedRankOracle::new(&net, &xor_code(2)).unwrap();
        assert_eq!(o.rank(&[]), 0);
        let e = |id: &str| MessageRef::Edge(id.into());
        let x = |id: &str| MessageRef::Source(id.into());
        assert_eq!(o.rank_refs(&[x("x1"), x("x2")]).unwrap(), 2);
        assert_eq!(o.rank_refs(&[e("e5"), e("e6"), e("e7")]).unwrap(), 1);
        assert_eq!(o.rank_refs(&[e("e1"), e("e6")]).unwrap(), 2);
        // cached answer agrees with a fresh computation
        assert_eq!(o.rank_refs(&[e("e6"), e("e1")]).unwrap(), 2);
        assert!(matches!(o.rank_refs(&[e("nope")]), Err(Error::UnknownMessageRef(_))));
    }
}
