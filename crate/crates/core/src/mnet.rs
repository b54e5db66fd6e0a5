//! The generalized M-network for a set count `m >= 2` and its explicit
//! `m`-dimensional routing solution.
//!
//! Layout (1-based ids):
//! * sources `s_i_j` emitting `X_i_j`, `1 <= i, j <= m`, with edges
//!   `sv_i_j = (s_i_j, u_i)`;
//! * relays `u_1..u_m` and `v_1..v_{2m-1}`, with `e_i_i = (u_i, v_i)` and
//!   `e_i_j = (u_i, v_j)` for `m+1 <= j <= 2m-1`;
//! * terminals `t_1..t_{m^m}`, each fed by every `v` through `vt_i_k`.
//!
//! Terminal `t_k` demands `(X_1_{j1}, ..., X_m_{jm})` where `(j1, ..., jm)`
//! is the `k`-th tuple of `{1..m}^m` in lexicographic order, `j1` most
//! significant.

use serde::Serialize;

use crate::code::LinearCode;
use crate::error::{Error, Result};
use crate::field::{FMatrix, PrimeField};
use crate::network::{Edge, MessageRef, Network, Node, Role};

/// Names and indexing of the generalized M-network. All index arguments are
/// 0-based; the ids they produce are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MnetLayout {
    pub m: usize,
}

impl MnetLayout {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidM(m));
        }
        // m^m terminals must stay addressable
        if m > 8 {
            return Err(Error::InvalidM(m));
        }
        Ok(MnetLayout { m })
    }

    pub fn terminal_count(&self) -> usize {
        self.m.pow(self.m as u32)
    }

    pub fn source(&self, i: usize, j: usize) -> String {
        format!("s_{}_{}", i + 1, j + 1)
    }

    pub fn message(&self, i: usize, j: usize) -> String {
        format!("X_{}_{}", i + 1, j + 1)
    }

    pub fn u(&self, i: usize) -> String {
        format!("u_{}", i + 1)
    }

    /// `i` ranges over `0..2m-1`.
    pub fn v(&self, i: usize) -> String {
        format!("v_{}", i + 1)
    }

    pub fn terminal(&self, k: usize) -> String {
        format!("t_{}", k + 1)
    }

    pub fn source_edge(&self, i: usize, j: usize) -> String {
        format!("sv_{}_{}", i + 1, j + 1)
    }

    /// `Y_ii = e_i_i`, the edge `(u_i, v_i)`.
    pub fn diag_edge(&self, i: usize) -> String {
        format!("e_{}_{}", i + 1, i + 1)
    }

    /// `Y_ij = e_i_j` for `j = m + 1 + k` (1-based), `k` in `0..m-1`:
    /// the edge `(u_i, v_{m+1+k})`.
    pub fn cross_edge(&self, i: usize, k: usize) -> String {
        format!("e_{}_{}", i + 1, self.m + 1 + k)
    }

    pub fn vt_edge(&self, i: usize, k: usize) -> String {
        format!("vt_{}_{}", i + 1, k + 1)
    }

    pub fn x_ref(&self, i: usize, j: usize) -> MessageRef {
        MessageRef::Source(self.message(i, j))
    }

    pub fn y_diag_ref(&self, i: usize) -> MessageRef {
        MessageRef::Edge(self.diag_edge(i))
    }

    pub fn y_cross_ref(&self, i: usize, k: usize) -> MessageRef {
        MessageRef::Edge(self.cross_edge(i, k))
    }

    /// 0-based digits of terminal `k` (0-based).
    pub fn tuple(&self, k: usize) -> Vec<usize> {
        let mut digits = vec![0; self.m];
        let mut rest = k;
        for slot in digits.iter_mut().rev() {
            *slot = rest % self.m;
            rest /= self.m;
        }
        digits
    }

    /// Inverse of [`MnetLayout::tuple`].
    pub fn index_of_tuple(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &j| acc * self.m + j)
    }

    /// All demand tuples in terminal order.
    pub fn tuples(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.terminal_count()).map(|k| self.tuple(k))
    }

    /// Checks that `net` is exactly the generalized M-network for some `m`,
    /// up to the order in which nodes and edges are listed.
    pub fn recognize(net: &Network) -> Result<Self> {
        let s = net.sources().len();
        let m = (1..=8).find(|m| m * m == s).ok_or_else(|| {
            Error::LayoutMismatch(format!("{s} sources is not the square of a supported m"))
        })?;
        let layout = MnetLayout::new(m).map_err(|e| Error::LayoutMismatch(e.to_string()))?;
        let reference = build(m)?.0;
        let key = |n: &Network| {
            let mut nodes: Vec<(String, Role)> = n.nodes.iter().map(|x| (x.id.clone(), x.role)).collect();
            nodes.sort();
            let mut edges: Vec<(String, String, String)> = n
                .edges
                .iter()
                .map(|e| (e.id.clone(), e.tail.clone(), e.head.clone()))
                .collect();
            edges.sort();
            (nodes, edges, n.source_messages.clone(), n.demands.clone())
        };
        if key(net) != key(&reference) {
            return Err(Error::LayoutMismatch(format!(
                "network does not match the generalized M-network for m = {m}"
            )));
        }
        Ok(layout)
    }
}

/// Builds the generalized M-network for `m`.
pub fn build(m: usize) -> Result<(Network, MnetLayout)> {
    let l = MnetLayout::new(m)?;
    let node = |id: String, role| Node { id, role };
    let edge = |id: String, tail: String, head: String| Edge { id, tail, head };
    let mut net = Network {
        nodes: Vec::new(),
        edges: Vec::new(),
        source_messages: Default::default(),
        demands: Default::default(),
    };
    for i in 0..m {
        for j in 0..m {
            net.nodes.push(node(l.source(i, j), Role::Source));
            net.source_messages.insert(l.source(i, j), l.message(i, j));
        }
    }
    for i in 0..m {
        net.nodes.push(node(l.u(i), Role::Intermediate));
    }
    for i in 0..2 * m - 1 {
        net.nodes.push(node(l.v(i), Role::Intermediate));
    }
    for k in 0..l.terminal_count() {
        net.nodes.push(node(l.terminal(k), Role::Terminal));
        let demand = l.tuple(k).iter().enumerate().map(|(i, &j)| l.message(i, j)).collect();
        net.demands.insert(l.terminal(k), demand);
    }
    for i in 0..m {
        for j in 0..m {
            net.edges.push(edge(l.source_edge(i, j), l.source(i, j), l.u(i)));
        }
    }
    for i in 0..m {
        net.edges.push(edge(l.diag_edge(i), l.u(i), l.v(i)));
        for k in 0..m - 1 {
            net.edges.push(edge(l.cross_edge(i, k), l.u(i), l.v(m + k)));
        }
    }
    for i in 0..2 * m - 1 {
        for k in 0..l.terminal_count() {
            net.edges.push(edge(l.vt_edge(i, k), l.v(i), l.terminal(k)));
        }
    }
    Ok((net, l))
}

/// 1-based tuple `(j1, ..., jm)` demanded by terminal `index` (1-based).
pub fn terminal_tuple(m: usize, index: usize) -> Result<Vec<usize>> {
    let l = MnetLayout::new(m)?;
    let max = l.terminal_count();
    if index == 0 || index > max {
        return Err(Error::IndexOutOfRange { index, max });
    }
    Ok(l.tuple(index - 1).into_iter().map(|j| j + 1).collect())
}

/// Inverse of [`terminal_tuple`].
pub fn tuple_terminal(m: usize, tuple: &[usize]) -> Result<usize> {
    let l = MnetLayout::new(m)?;
    if tuple.len() != m {
        return Err(Error::DimensionMismatch(format!("tuple of length {} for m = {m}", tuple.len())));
    }
    if let Some(&bad) = tuple.iter().find(|&&j| j == 0 || j > m) {
        return Err(Error::IndexOutOfRange { index: bad, max: m });
    }
    let zero_based: Vec<usize> = tuple.iter().map(|j| j - 1).collect();
    Ok(l.index_of_tuple(&zero_based) + 1)
}

fn unit(field: PrimeField, d: usize, row: usize, col: usize) -> FMatrix {
    let mut a = FMatrix::zeros(field, d, d);
    a.set(row, col, 1);
    a
}

/// The `(m, m)` routing solution over GF(p). Every local map is a 0/1
/// selection matrix:
/// * `sv_i_j` forwards `X_i_j` unchanged;
/// * `e_i_i` carries the first symbol of each of `X_i_1..X_i_m`;
/// * `e_i_j` (`j > m`) carries symbol `j - m + 1` of each of `X_i_1..X_i_m`;
/// * `vt_i_k` for `i <= m` forwards `Y_ii`;
/// * `vt_{m+c}_k` puts symbol `c + 1` of `X_i_{j_i}` in coordinate `i`, where
///   `(j_1, ..., j_m)` is terminal `k`'s tuple.
///
/// Decoders (also 0/1) are included.
pub fn routing_code(m: usize, p: u64) -> Result<LinearCode> {
    let field = PrimeField::new(p)?;
    let (net, l) = build(m)?;
    let d = m;
    let mut code = LinearCode::new(field, d);
    let sv = |i: usize, j: usize| MessageRef::Edge(l.source_edge(i, j));

    for i in 0..m {
        for j in 0..m {
            code.set_map(&l.source_edge(i, j), l.x_ref(i, j), FMatrix::identity(field, d));
            code.set_map(&l.diag_edge(i), sv(i, j), unit(field, d, j, 0));
            for k in 0..m - 1 {
                code.set_map(&l.cross_edge(i, k), sv(i, j), unit(field, d, j, k + 1));
            }
        }
    }
    for t in 0..l.terminal_count() {
        let tuple = l.tuple(t);
        for i in 0..m {
            code.set_map(&l.vt_edge(i, t), l.y_diag_ref(i), FMatrix::identity(field, d));
        }
        for k in 0..m - 1 {
            for (i, &j) in tuple.iter().enumerate() {
                code.set_map(&l.vt_edge(m + k, t), l.y_cross_ref(i, k), unit(field, d, i, j));
            }
        }
    }
    let verdict = crate::code::verify_solution(&net, &code)?;
    for tv in verdict.terminals {
        if let Some(dec) = tv.decoder {
            code.decoders.insert(tv.terminal, dec);
        }
    }
    Ok(code)
}
