//! Acceptance gate. Runs every criterion at its tolerance and time limit and
//! prints one pass/fail line per criterion; exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{gf, random_matrix};
use mnet_core::code::received;
use mnet_core::ledger::run_ledger;
use mnet_core::polymatroid::{check_axioms, check_dpn, from_subspaces, rho_max, RankTable};
use mnet_core::{
    build, butterfly, certify, propagate, routing_code, search, verify_solution, Certificate, FMatrix,
    InducedRankOracle, LinearCode, MessageRef, MnetLayout, Network, SearchConfig, SearchOutcome,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Duration, what: &str, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let out = f()?;
    let took = start.elapsed();
    ensure(took <= limit, || format!("{what} took {took:.2?}, limit {limit:?}"))?;
    Ok(format!("{out} [{took:.2?}]"))
}

/// Verified solutions gathered along the way: (m, p, network, code).
struct Solutions(Vec<(usize, u64, Network, LinearCode)>);

fn construction() -> Check {
    timed(Duration::from_secs(1), "construction", || {
        let (net, _) = build(2).map_err(|e| e.to_string())?;
        let fixture = common::mnet2_fixture();
        ensure(net == fixture, || "build(2) differs from the hand-written fixture".into())?;
        let count = |role| net.nodes.iter().filter(|n| n.role == role).count();
        use mnet_core::Role::*;
        ensure(count(Source) == 4 && count(Terminal) == 4, || "role counts".into())?;
        let us = net.nodes.iter().filter(|n| n.id.starts_with("u_")).count();
        let vs = net.nodes.iter().filter(|n| n.id.starts_with("v_")).count();
        ensure(us == 2 && vs == 3 && net.edges.len() == 20, || "relay or edge counts".into())?;
        let mut tuples: Vec<Vec<String>> = net.demands.values().cloned().collect();
        tuples.sort();
        let mut want = Vec::new();
        for j in 1..=2 {
            for k in 1..=2 {
                want.push(vec![format!("X_1_{j}"), format!("X_2_{k}")]);
            }
        }
        ensure(tuples == want, || format!("demands {tuples:?}"))?;
        Ok("build(2) matches fixture: 4 sources, 2 u, 3 v, 4 terminals, 20 edges".into())
    })
}

fn routing_if(sol: &mut Solutions) -> Check {
    timed(Duration::from_secs(10), "routing verification", || {
        let mut terminals = 0;
        for m in 2..=4 {
            let (net, _) = build(m).map_err(|e| e.to_string())?;
            for p in [2, 3, 5] {
                let code = routing_code(m, p).map_err(|e| e.to_string())?;
                let transfer = propagate(&net, &code).map_err(|e| e.to_string())?;
                let verdict = verify_solution(&net, &code).map_err(|e| e.to_string())?;
                ensure(verdict.solution, || format!("routing code m={m} p={p} fails"))?;
                for tv in &verdict.terminals {
                    let b = received(&net, &transfer, &tv.terminal).map_err(|e| e.to_string())?;
                    let target = transfer.selection(&net.demands[&tv.terminal]).map_err(|e| e.to_string())?;
                    let dec = tv.decoder.as_ref().ok_or("missing decoder")?;
                    ensure(dec.mul(&b).map_err(|e| e.to_string())? == target, || {
                        format!("D*B != selection at {} (m={m}, p={p})", tv.terminal)
                    })?;
                    terminals += 1;
                }
                sol.0.push((m, p, net.clone(), code));
            }
        }
        Ok(format!("9 (m,p) pairs verified, {terminals} terminal decoders checked bit-exact"))
    })
}

fn search_only_if(sol: &mut Solutions) -> Check {
    let (net, _) = build(2).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for p in [2u64, 3] {
        let line = timed(Duration::from_secs(60), &format!("GF({p}) d=1 search"), || {
            match search(&net, &SearchConfig::new(p, 1)).map_err(|e| e.to_string())? {
                SearchOutcome::ExhaustedNone { enumerated, .. } => {
                    let bound = (p as u128).pow(8);
                    ensure(enumerated <= bound, || format!("enumerated {enumerated} > {bound}"))?;
                    Ok(format!("GF({p}) d=1 exhausted_none after {enumerated} <= {bound}"))
                }
                other => Err(format!("GF({p}) d=1 gave {}", other.label())),
            }
        })?;
        notes.push(line);
        // source canonicalization alone: exactly p^8 interior assignments
        let cfg = SearchConfig {
            canonicalize_interior: false,
            ..SearchConfig::new(p, 1)
        };
        let cert = certify(&net, &cfg).map_err(|e| e.to_string())?;
        let bound = (p as u128).pow(8);
        ensure(cert.outcome == "exhausted_none" && cert.enumerated == bound, || {
            format!("source-canonical GF({p}) search: {} after {}", cert.outcome, cert.enumerated)
        })?;
        notes.push(format!("source-canonical only: {} = {p}^8", cert.enumerated));
    }
    let line = timed(Duration::from_secs(60), "GF(2) d=2 search", || {
        match search(&net, &SearchConfig::new(2, 2)).map_err(|e| e.to_string())? {
            SearchOutcome::Found { code, enumerated } => {
                let ok = verify_solution(&net, &code).map_err(|e| e.to_string())?.solution;
                ensure(ok, || "found code does not verify".into())?;
                sol.0.push((2, 2, net.clone(), code));
                Ok(format!("GF(2) d=2 found at candidate {enumerated}"))
            }
            other => Err(format!("GF(2) d=2 gave {}", other.label())),
        }
    })?;
    notes.push(line);
    Ok(notes.join("; "))
}

fn ledgers(sol: &Solutions) -> Check {
    let mut count = 0;
    for (m, p, net, code) in &sol.0 {
        timed(Duration::from_secs(5), &format!("ledger m={m} p={p}"), || {
            let d = code.d;
            let oracle = InducedRankOracle::new(net, code).map_err(|e| e.to_string())?;
            let verdict = verify_solution(net, code).map_err(|e| e.to_string())?;
            let l = MnetLayout::new(*m).map_err(|e| e.to_string())?;
            let r = run_ledger(&oracle, &l, &verdict, false).map_err(|e| e.to_string())?;
            ensure(r.summary.all_pass, || format!("ledger fails for m={m} p={p} d={d}: {:?}", r.summary))?;
            let g = (2 * m - 1) * d / m;
            ensure(r.final_check.g_values.iter().flatten().all(|&v| v == g), || {
                format!("g values {:?}, expected {g}", r.final_check.g_values)
            })?;
            ensure(d % m == 0, || format!("{m} does not divide {d}"))?;
            Ok(String::new())
        })?;
        count += 1;
    }
    Ok(format!("{count} ledgers pass in full (g = 3, 5, 7 for m = 2, 3, 4)"))
}

fn polymatroids(sol: &Solutions) -> Check {
    timed(Duration::from_secs(30), "polymatroid checks", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for trial in 0..200 {
            let p = if trial % 2 == 0 { 2 } else { 3 };
            let n = rng.gen_range(1..=8);
            let width = rng.gen_range(1..=6);
            let mats: Vec<FMatrix> = (0..n)
                .map(|_| {
                    let rows = rng.gen_range(0..=width);
                    random_matrix(&mut rng, gf(p), rows, width)
                })
                .collect();
            let table = from_subspaces(&mats).map_err(|e| e.to_string())?;
            let rep = check_axioms(&table);
            ensure(rep.pass, || format!("family {trial} fails axioms: {:?}", rep.witnesses))?;
        }
        for (m, p, net, code) in &sol.0 {
            let oracle = InducedRankOracle::new(net, code).map_err(|e| e.to_string())?;
            let rep = check_dpn(net, &oracle, &oracle.identity_mapping(), code.d, &[]).map_err(|e| e.to_string())?;
            ensure(rep.pass, || format!("check_dpn fails for m={m} p={p}: {:?}", rep.violations))?;
        }
        for n in 1..=6 {
            for k in 1..=n {
                let t = RankTable::uniform_matroid(k, n).map_err(|e| e.to_string())?;
                ensure(rho_max(&t) == 1, || format!("U({k},{n}) rho_max != 1"))?;
            }
        }
        Ok(format!(
            "200 subspace families pass axioms, {} solutions pass check_dpn, uniform matroids have rho_max 1",
            sol.0.len()
        ))
    })
}

fn found_code(out: &SearchOutcome) -> Option<&LinearCode> {
    match out {
        SearchOutcome::Found { code, .. } => Some(code),
        _ => None,
    }
}

fn solver_determinism() -> Check {
    timed(Duration::from_secs(300), "solver determinism", || {
        let (mnet, _) = build(2).map_err(|e| e.to_string())?;
        let cases = [
            (butterfly(), 1usize, "found"),
            (mnet.clone(), 1, "exhausted_none"),
            (mnet.clone(), 2, "found"),
        ];
        for (net, d, want) in &cases {
            let canon = search(net, &SearchConfig::new(2, *d)).map_err(|e| e.to_string())?;
            ensure(canon.label() == *want, || format!("canonical search gave {}", canon.label()))?;
            if *d == 1 {
                let naive = search(net, &SearchConfig::naive(2, *d)).map_err(|e| e.to_string())?;
                ensure(naive.label() == *want, || format!("naive search gave {}", naive.label()))?;
                if let Some(code) = found_code(&naive) {
                    ensure(verify_solution(net, code).map_err(|e| e.to_string())?.solution, || "naive found code fails".into())?;
                }
            }
            if let Some(code) = found_code(&canon) {
                ensure(verify_solution(net, code).map_err(|e| e.to_string())?.solution, || "found code fails".into())?;
            }
            let mut texts = Vec::new();
            for shards in [1, 2, 8] {
                let cfg = SearchConfig {
                    parallel_shards: shards,
                    ..SearchConfig::new(2, *d)
                };
                texts.push(certify(net, &cfg).map_err(|e| e.to_string())?.to_json_pretty());
            }
            ensure(texts.iter().all(|t| t == &texts[0]), || "certificates differ across shard counts".into())?;
            let cert = Certificate::parse(&texts[0]).map_err(|e| e.to_string())?;
            ensure(cert.replay(net).map_err(|e| e.to_string())?, || "certificate does not replay".into())?;
            let again = certify(net, &cert.config()).map_err(|e| e.to_string())?.to_json_pretty();
            ensure(again == texts[0], || "replayed certificate is not byte-identical".into())?;
        }
        Ok("canonical = naive on butterfly and build(2); 1/2/8 shards agree; certificates replay byte-identically".into())
    })
}

fn negative_controls() -> Check {
    timed(Duration::from_secs(120), "negative controls", || {
        let f2 = gf(2);
        let mut nets = vec![(butterfly(), 1usize)];
        for m in 2..=4 {
            nets.push((build(m).map_err(|e| e.to_string())?.0, m));
        }
        for (net, d) in &nets {
            let zero = LinearCode::zero(net, f2, *d).map_err(|e| e.to_string())?;
            let v = verify_solution(net, &zero).map_err(|e| e.to_string())?;
            ensure(!v.solution, || "zero code accepted".into())?;
        }

        let (net, _) = build(2).map_err(|e| e.to_string())?;
        let l = MnetLayout::new(2).map_err(|e| e.to_string())?;
        let base = routing_code(2, 2).map_err(|e| e.to_string())?;
        let all: Vec<FMatrix> = (0..16u64)
            .map(|k| FMatrix::from_entries(f2, 2, 2, (0..4).map(|b| (k >> (3 - b)) & 1).collect()).unwrap())
            .collect();
        let mut slots: Vec<(String, MessageRef)> = Vec::new();
        for e in &net.edges {
            for input in net.node_inputs(&e.tail).map_err(|e| e.to_string())? {
                slots.push((e.id.clone(), input));
            }
        }
        let (mut broken, mut survived) = (0, 0);
        for (edge, input) in &slots {
            let original = base.map(edge, input).cloned().unwrap_or_else(|| FMatrix::zeros(f2, 2, 2));
            for m in all.iter().filter(|m| **m != original) {
                let mut code = base.clone();
                code.decoders.clear();
                code.set_map(edge, input.clone(), m.clone());
                let verdict = verify_solution(&net, &code).map_err(|e| e.to_string())?;
                if verdict.solution {
                    let oracle = InducedRankOracle::new(&net, &code).map_err(|e| e.to_string())?;
                    let r = run_ledger(&oracle, &l, &verdict, false).map_err(|e| e.to_string())?;
                    ensure(r.summary.all_pass, || format!("corruption of {edge}/{input} verifies but ledger fails"))?;
                    survived += 1;
                } else {
                    ensure(verdict.failing().count() >= 1, || "inconsistent verdict".into())?;
                    broken += 1;
                }
            }
        }
        Ok(format!(
            "zero code rejected on {} networks; {} single-map corruptions: {broken} fail a terminal, {survived} still verify with a passing ledger",
            nets.len(),
            broken + survived
        ))
    })
}

fn main() -> ExitCode {
    let mut sol = Solutions(Vec::new());
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Check| match r {
        Ok(msg) => println!("[PASS] criterion {n} ({name}): {msg}"),
        Err(msg) => {
            failed += 1;
            println!("[FAIL] criterion {n} ({name}): {msg}");
        }
    };
    report(1, "construction fidelity", construction());
    report(2, "routing solutions verify", routing_if(&mut sol));
    report(3, "exhaustive search at desk scale", search_only_if(&mut sol));
    report(4, "ledger on every verified solution", ledgers(&sol));
    report(5, "polymatroid soundness", polymatroids(&sol));
    report(6, "solver soundness and determinism", solver_determinism());
    report(7, "negative controls", negative_controls());
    if failed == 0 {
        println!("acceptance: all 7 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 7 criteria fail");
        ExitCode::FAILURE
    }
}
