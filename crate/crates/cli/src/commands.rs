use std::fmt::Write as _;
use std::path::Path;

use mnet_core::ledger::run_ledger;
use mnet_core::polymatroid::{check_axioms, from_subspaces, membership, rho_max, GroundVector, RankTable};
use mnet_core::{
    build, certify, propagate, routing_code, verify_solution, Error, FMatrix, InducedRankOracle, LedgerReport,
    LinearCode, MessageRef, MnetLayout, Network, PrimeField, SearchConfig,
};
use serde_json::{json, Value};

use crate::manifest::{sha256_hex, InputHash};
use crate::{
    Command, PolyCommand, SearchArgs, EXIT_DATA, EXIT_EXHAUSTED, EXIT_INCONCLUSIVE, EXIT_IO, EXIT_OK, EXIT_USAGE,
    EXIT_VERIFY_FAILED,
};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
    /// Manifest outcome, when it differs from the generic error text.
    pub outcome: Option<String>,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
            outcome: None,
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
            outcome: None,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotASolution => EXIT_VERIFY_FAILED,
            Error::InvalidM(_) | Error::BudgetZero => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        let outcome = matches!(e, Error::NotASolution).then(|| "not_a_solution".to_string());
        CliError {
            code,
            message: e.to_string(),
            outcome,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// What a command produced.
pub struct Run {
    pub exit: u8,
    pub outcome: String,
    /// The primary JSON document.
    pub doc: String,
    /// Short machine summary printed when the document goes to a file.
    pub summary: Value,
    pub human: String,
}

pub struct Context {
    pub inputs: Vec<InputHash>,
}

impl Context {
    pub fn new() -> Self {
        Context { inputs: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        let bytes = std::fs::read(path).map_err(|e| CliError {
            code: EXIT_IO,
            message: format!("cannot read {}: {e}", path.display()),
            outcome: None,
        })?;
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).map_err(|_| CliError::data(format!("{} is not UTF-8", path.display())))
    }

    fn network(&mut self, path: &Path) -> CliResult<Network> {
        let text = self.read(path)?;
        Network::parse(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    fn code(&mut self, path: &Path) -> CliResult<LinearCode> {
        let text = self.read(path)?;
        LinearCode::parse(&text).map_err(|e| CliError {
            message: format!("{}: {e}", path.display()),
            ..CliError::from(e)
        })
    }

    fn table(&mut self, path: &Path) -> CliResult<RankTable> {
        let text = self.read(path)?;
        RankTable::parse(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}

fn field_flag(p: u64) -> CliResult<PrimeField> {
    PrimeField::new(p).map_err(|e| CliError::usage(e.to_string()))
}

fn default_shards() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// JSON number when it fits in 64 bits, decimal string otherwise.
fn big(v: u128) -> Value {
    u64::try_from(v).map_or_else(|_| Value::String(v.to_string()), Value::from)
}

fn pretty_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

pub fn emit(run: &Run, output: Option<&Path>, pretty: bool) -> CliResult<()> {
    if let Some(path) = output {
        std::fs::write(path, format!("{}\n", run.doc)).map_err(|e| CliError {
            code: EXIT_IO,
            message: format!("cannot write {}: {e}", path.display()),
            outcome: None,
        })?;
        if pretty {
            println!("{}", run.human);
        } else {
            let mut summary = run.summary.clone();
            summary["output"] = json!(path.display().to_string());
            println!("{summary}");
        }
    } else if pretty {
        println!("{}", run.human);
    } else {
        println!("{}", run.doc);
    }
    Ok(())
}

pub fn run(cmd: &Command, ctx: &mut Context) -> CliResult<Run> {
    match cmd {
        Command::Gen { m } => gen(*m),
        Command::RoutingCode { m, p } => routing(*m, *p),
        Command::Verify { net, code } => verify(ctx, net, code),
        Command::Search(args) => search(ctx, args),
        Command::Ledger {
            net,
            code,
            allow_nonsolution,
        } => ledger(ctx, net, code, *allow_nonsolution),
        Command::Polymatroid(p) => polymatroid(ctx, p),
        Command::Demo { m, shards } => demo(*m as usize, shards.unwrap_or_else(default_shards)),
    }
}

fn gen(m: usize) -> CliResult<Run> {
    let (net, l) = build(m)?;
    let summary = json!({
        "m": m,
        "nodes": net.nodes.len(),
        "edges": net.edges.len(),
        "terminals": l.terminal_count(),
        "network_sha": net.sha256(),
    });
    Ok(Run {
        exit: EXIT_OK,
        outcome: "ok".into(),
        doc: net.to_json_pretty(),
        human: format!(
            "generalized M-network, m = {m}: {} nodes, {} edges, {} terminals",
            net.nodes.len(),
            net.edges.len(),
            l.terminal_count()
        ),
        summary,
    })
}

fn routing(m: usize, p: u64) -> CliResult<Run> {
    field_flag(p)?;
    let code = routing_code(m, p)?;
    Ok(Run {
        exit: EXIT_OK,
        outcome: "ok".into(),
        doc: code.to_json_pretty(),
        summary: json!({"m": m, "p": p, "d": code.d, "local_maps": code.local_maps.len()}),
        human: format!(
            "routing code for m = {m} over GF({p}): d = {}, {} local maps, all entries 0/1",
            code.d,
            code.local_maps.len()
        ),
    })
}

fn verify(ctx: &mut Context, net: &Path, code: &Path) -> CliResult<Run> {
    let net = ctx.network(net)?;
    let code = ctx.code(code)?;
    let verdict = verify_solution(&net, &code)?;
    let failing: Vec<&str> = verdict.failing().map(|t| t.terminal.as_str()).collect();
    let mut human = format!(
        "{} of {} terminals decodable over GF({}) with d = {}",
        verdict.terminals.len() - failing.len(),
        verdict.terminals.len(),
        verdict.p,
        verdict.d
    );
    for t in verdict.failing() {
        let _ = write!(human, "\n  {}: {}", t.terminal, t.witness.as_deref().unwrap_or("not decodable"));
    }
    let _ = write!(human, "\n{}", if verdict.solution { "SOLUTION" } else { "NOT A SOLUTION" });
    Ok(Run {
        exit: if verdict.solution { EXIT_OK } else { EXIT_VERIFY_FAILED },
        outcome: if verdict.solution { "solution" } else { "not_a_solution" }.into(),
        summary: json!({"solution": verdict.solution, "failing_terminals": failing}),
        doc: pretty_json(&verdict),
        human,
    })
}

fn search(ctx: &mut Context, a: &SearchArgs) -> CliResult<Run> {
    field_flag(a.p)?;
    let net = ctx.network(&a.net)?;
    let cfg = SearchConfig {
        p: a.p,
        d: a.d,
        budget: if a.exhaustive { None } else { a.budget },
        canonicalize_sources: !a.naive,
        canonicalize_interior: !a.naive && !a.no_interior_canonicalization,
        decompose_terminals: !a.joint,
        parallel_shards: a.shards.unwrap_or_else(default_shards),
    };
    let cert = certify(&net, &cfg)?;
    let exit = match cert.outcome.as_str() {
        "found" => EXIT_OK,
        "exhausted_none" => EXIT_EXHAUSTED,
        _ => EXIT_INCONCLUSIVE,
    };
    let space = cert
        .enumeration
        .space_size
        .map_or_else(|| "more than 2^128".to_string(), |s| s.to_string());
    let human = format!(
        "search over GF({}) with d = {}: {} after {} of {} interior assignments",
        cert.p, cert.d, cert.outcome, cert.enumerated, space
    );
    Ok(Run {
        exit,
        outcome: cert.outcome.clone(),
        summary: json!({
            "outcome": cert.outcome,
            "enumerated": big(cert.enumerated),
            "space_size": cert.enumeration.space_size.map(big),
        }),
        doc: cert.to_json_pretty(),
        human,
    })
}

fn ledger_human(r: &LedgerReport) -> String {
    let s = &r.summary;
    let mark = |b: bool| if b { "pass" } else { "FAIL" };
    let mut out = format!("ledger for m = {}, d = {}, GF({})\n", r.m, r.d, r.p);
    let _ = writeln!(out, "  {:<22} {}", format!("set I ({} tuples)", r.set_one.len()), mark(s.set_one_all_pass));
    let _ = writeln!(out, "  {:<22} {}", format!("set II ({} rows)", r.set_two.len()), mark(s.set_two_all_pass));
    let _ = writeln!(out, "  edge ranks             {}", mark(s.edge_ranks_ok));
    let _ = writeln!(out, "  independence           {}", mark(s.independence_ok));
    if r.final_check.checked {
        let _ = writeln!(out, "  g(Y_ii, X_ij)          {:?}", r.final_check.g_values);
        let expected = r.final_check.expected_value.map_or("not an integer".to_string(), |v| v.to_string());
        let _ = writeln!(out, "  expected (2m-1)d/m     {expected}");
        let _ = writeln!(out, "  m divides d            {}", mark(s.divisibility_ok));
    } else {
        let _ = writeln!(out, "  final equality         skipped (not a solution)");
    }
    let _ = write!(out, "{}", if s.all_pass { "ALL PASS" } else { "FAILURES PRESENT" });
    out
}

fn ledger(ctx: &mut Context, net: &Path, code: &Path, allow: bool) -> CliResult<Run> {
    let net = ctx.network(net)?;
    let code = ctx.code(code)?;
    let layout = MnetLayout::recognize(&net)?;
    let verdict = verify_solution(&net, &code)?;
    let oracle = InducedRankOracle::new(&net, &code)?;
    let report = run_ledger(&oracle, &layout, &verdict, allow)?;
    let ok = report.summary.all_pass;
    Ok(Run {
        exit: if ok { EXIT_OK } else { EXIT_VERIFY_FAILED },
        outcome: if ok { "pass" } else { "fail" }.into(),
        summary: json!({"all_pass": ok, "g_values": report.final_check.g_values, "divides": report.final_check.divides}),
        doc: pretty_json(&report),
        human: ledger_human(&report),
    })
}

fn resolve(net: &Network, id: &str) -> CliResult<MessageRef> {
    if net.edge(id).is_some() {
        Ok(MessageRef::Edge(id.to_string()))
    } else if net.source_of(id).is_some() {
        Ok(MessageRef::Source(id.to_string()))
    } else {
        Err(CliError::data(format!("`{id}` is neither an edge nor a source message")))
    }
}

fn polymatroid(ctx: &mut Context, cmd: &PolyCommand) -> CliResult<Run> {
    match cmd {
        PolyCommand::CheckAxioms { table } => {
            let t = ctx.table(table)?;
            let rep = check_axioms(&t);
            let mut human = format!(
                "normalized {}, monotone {}, submodular {}",
                rep.normalized, rep.monotone, rep.submodular
            );
            for w in &rep.witnesses {
                let _ = write!(human, "\n  witness: {}", serde_json::to_string(w).expect("serializes"));
            }
            Ok(Run {
                exit: if rep.pass { EXIT_OK } else { EXIT_VERIFY_FAILED },
                outcome: if rep.pass { "pass" } else { "fail" }.into(),
                summary: json!({"pass": rep.pass, "violations": rep.violation_count}),
                doc: pretty_json(&rep),
                human,
            })
        }
        PolyCommand::RhoMax { table } => {
            let t = ctx.table(table)?;
            let r = rho_max(&t);
            Ok(Run {
                exit: EXIT_OK,
                outcome: format!("rho_max = {r}"),
                summary: json!({"rho_max": r}),
                doc: pretty_json(&json!({"n": t.n(), "rho_max": r})),
                human: format!("rho_max = {r}"),
            })
        }
        PolyCommand::Membership { table, vector } => {
            let t = ctx.table(table)?;
            let member = membership(&GroundVector(vector.clone()), &t)?;
            Ok(Run {
                exit: if member { EXIT_OK } else { EXIT_VERIFY_FAILED },
                outcome: if member { "member" } else { "not_member" }.into(),
                summary: json!({"member": member}),
                doc: pretty_json(&json!({"vector": vector, "member": member})),
                human: format!("{vector:?} {} the polymatroid", if member { "lies in" } else { "is not in" }),
            })
        }
        PolyCommand::FromSubspaces {
            subspaces,
            net,
            code,
            messages,
        } => {
            let (labels, mats): (Vec<String>, Vec<FMatrix>) = match (subspaces, net, code) {
                (Some(path), None, None) => {
                    if !messages.is_empty() {
                        return Err(CliError::usage("--messages needs --net and --code"));
                    }
                    let text = ctx.read(path)?;
                    let mats: Vec<FMatrix> = serde_json::from_str(&text)
                        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
                    ((1..=mats.len()).map(|i| format!("V{i}")).collect(), mats)
                }
                (None, Some(net), Some(code)) => {
                    let net = ctx.network(net)?;
                    let code = ctx.code(code)?;
                    let transfer = propagate(&net, &code)?;
                    let refs = if messages.is_empty() {
                        net.message_refs()
                    } else {
                        messages.iter().map(|m| resolve(&net, m)).collect::<CliResult<_>>()?
                    };
                    let mats = refs
                        .iter()
                        .map(|r| transfer.message_matrix(r))
                        .collect::<mnet_core::Result<Vec<_>>>()?;
                    (refs.iter().map(|r| r.id().to_string()).collect(), mats)
                }
                _ => return Err(CliError::usage("give a subspaces file, or both --net and --code")),
            };
            let table = from_subspaces(&mats)?;
            let axioms = check_axioms(&table).pass;
            let r = rho_max(&table);
            let mut human = format!("rank table over {} subspaces, axioms pass: {axioms}, rho_max = {r}", labels.len());
            for (i, l) in labels.iter().enumerate() {
                let _ = write!(human, "\n  {} = {l}", i + 1);
            }
            Ok(Run {
                exit: EXIT_OK,
                outcome: "ok".into(),
                summary: json!({"n": table.n(), "elements": labels, "axioms_pass": axioms, "rho_max": r}),
                doc: table.to_json_pretty(),
                human,
            })
        }
    }
}

struct DemoRow {
    step: String,
    expected: String,
    observed: String,
    ok: bool,
}

fn demo(m: usize, shards: usize) -> CliResult<Run> {
    let (net, layout) = build(m)?;
    let mut rows = Vec::new();
    let mut row = |step: String, expected: String, observed: String, ok: bool| {
        rows.push(DemoRow {
            step,
            expected,
            observed,
            ok,
        })
    };
    row(
        "build".into(),
        format!("{} terminals", layout.terminal_count()),
        format!("{} nodes, {} edges", net.nodes.len(), net.edges.len()),
        net.validate().is_empty(),
    );
    let g = 2 * m - 1;
    for p in [2u64, 3] {
        let code = routing_code(m, p)?;
        let verdict = verify_solution(&net, &code)?;
        row(
            format!("routing code d={m}, GF({p})"),
            "solution".into(),
            if verdict.solution { "solution" } else { "not a solution" }.into(),
            verdict.solution,
        );
        let oracle = InducedRankOracle::new(&net, &code)?;
        let report = run_ledger(&oracle, &layout, &verdict, false)?;
        let values: Vec<usize> = report.final_check.g_values.iter().flatten().copied().collect();
        let uniform = values.iter().all(|&v| v == g);
        row(
            format!("ledger d={m}, GF({p})"),
            format!("g = {g} everywhere"),
            if uniform { format!("g = {g} everywhere") } else { format!("g = {values:?}") },
            report.summary.all_pass && uniform,
        );
    }
    if m == 2 {
        for (p, d, want) in [(2u64, 1usize, "exhausted_none"), (3, 1, "exhausted_none"), (2, 2, "found")] {
            let cfg = SearchConfig {
                parallel_shards: shards,
                ..SearchConfig::new(p, d)
            };
            let cert = certify(&net, &cfg)?;
            let mut ok = cert.outcome == want;
            let mut observed = format!("{} ({} candidates)", cert.outcome, cert.enumerated);
            if let Some(code) = cert.code()? {
                let verdict = verify_solution(&net, &code)?;
                let oracle = InducedRankOracle::new(&net, &code)?;
                let report = run_ledger(&oracle, &layout, &verdict, false)?;
                let uniform = report.final_check.g_values.iter().flatten().all(|&v| v == 3);
                ok &= verdict.solution && report.summary.all_pass && uniform;
                observed.push_str(if uniform { ", ledger g = 3" } else { ", ledger g != 3" });
            }
            let expected = if want == "found" { "solvable" } else { "unsolvable" };
            row(format!("search d={d}, GF({p})"), expected.into(), observed, ok);
        }
    } else {
        row(
            "search".into(),
            "skipped".into(),
            format!("the interior space of build({m}) is far beyond exhaustive reach"),
            true,
        );
    }
    let all_ok = rows.iter().all(|r| r.ok);
    let doc = json!({
        "m": m,
        "rows": rows.iter().map(|r| json!({"step": r.step, "expected": r.expected, "observed": r.observed, "ok": r.ok})).collect::<Vec<_>>(),
        "all_ok": all_ok,
    });
    let w = rows.iter().map(|r| r.step.len()).max().unwrap_or(4);
    let we = rows.iter().map(|r| r.expected.len()).max().unwrap_or(8);
    let mut human = format!("{:<w$}  {:<we$}  observed\n", "step", "expected");
    for r in &rows {
        let _ = writeln!(human, "{:<w$}  {:<we$}  {}{}", r.step, r.expected, r.observed, if r.ok { "" } else { "  <-- MISMATCH" });
    }
    let _ = write!(
        human,
        "{}",
        if !all_ok {
            "MISMATCHES PRESENT".to_string()
        } else if m == 2 {
            "d = 1 unsolvable over GF(2) and GF(3), d = 2 solvable, g = 3 everywhere".to_string()
        } else {
            format!("routing solution with d = {m} verifies, g = {g} everywhere; searches skipped")
        }
    );
    Ok(Run {
        exit: if all_ok { EXIT_OK } else { EXIT_VERIFY_FAILED },
        outcome: if all_ok { "ok" } else { "mismatch" }.into(),
        summary: json!({"m": m, "all_ok": all_ok}),
        doc: pretty_json(&doc),
        human,
    })
}
