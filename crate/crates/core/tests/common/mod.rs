#![allow(dead_code)]

use mnet_core::{FMatrix, LinearCode, MessageRef, Network, PrimeField};
use rand::Rng;

/// Rank over GF(p) by plain Gaussian elimination on i64 rows, kept separate
/// from the library's elimination so the two can be compared.
pub fn naive_rank(p: u64, rows: &[Vec<u64>]) -> usize {
    let p = p as i64;
    let mut m: Vec<Vec<i64>> = rows.iter().map(|r| r.iter().map(|&v| v as i64 % p).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = (1..p).find(|k| (m[rank][c] * k) % p == 1).unwrap();
        for v in m[rank].iter_mut() {
            *v = (*v * inv) % p;
        }
        for r in 0..m.len() {
            if r != rank && m[r][c] != 0 {
                let f = m[r][c];
                let pivot_row = m[rank].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot_row) {
                    *x = ((*x - f * y) % p + p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn rows_of(ms: &[&FMatrix]) -> Vec<Vec<u64>> {
    ms.iter()
        .flat_map(|m| m.to_rows())
        .map(|r| r.into_iter().map(u64::from).collect())
        .collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, field: PrimeField, rows: usize, cols: usize) -> FMatrix {
    let p = u64::from(field.p());
    let entries = (0..rows * cols).map(|_| rng.gen_range(0..p)).collect();
    FMatrix::from_entries(field, rows, cols, entries).unwrap()
}

/// A code with a uniformly random map on every (edge, input) pair.
pub fn random_code<R: Rng>(rng: &mut R, net: &Network, field: PrimeField, d: usize) -> LinearCode {
    let mut code = LinearCode::new(field, d);
    for e in &net.edges {
        for input in net.node_inputs(&e.tail).unwrap() {
            code.set_map(&e.id, input, random_matrix(rng, field, d, d));
        }
    }
    code
}

pub fn edge(id: &str) -> MessageRef {
    MessageRef::Edge(id.into())
}

pub fn src(id: &str) -> MessageRef {
    MessageRef::Source(id.into())
}

pub fn gf(p: u64) -> PrimeField {
    PrimeField::new(p).unwrap()
}

pub fn mnet2_fixture() -> Network {
    Network::parse(include_str!("../fixtures/mnet2.json")).unwrap()
}
