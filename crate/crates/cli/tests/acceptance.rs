//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL
//! line; the test fails if any criterion does.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use emu_core::analysis::{compute_ribs, ControlPlaneModel, Trace};
use emu_core::compile::ContainerCompiler;
use emu_core::routing::RouteClass;
use emu_core::script::statement_count;
use emu_core::{fixtures, PeerRelationship, Role};
use emu_mapd::events::{spawn_pump, DEFAULT_QUEUE};
use emu_mapd::recorder::replay_stream;
use emu_mapd::{
    EventHub, EventSource, Filter, Observation, ScriptedSource, SharedFilter, TopologyDocument,
};
use futures::StreamExt;
use ipnet::Ipv4Net;
use sha2::{Digest, Sha256};
use support::oracle::{self, Class, Topo};
use support::{bird, zonewalk};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "{what} took {took:?}, limit {limit:?}");
    Ok(took)
}

fn compiled(
    text: &str,
    seed: Option<u64>,
) -> (tempfile::TempDir, emu_core::compile::CompileOutput) {
    let mut scenario = emu_core::script::Scenario::parse(text).unwrap();
    if let Some(s) = seed {
        scenario.set_seed(s);
    }
    let rendered = scenario.into_emulator().unwrap().render().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = ContainerCompiler::new()
        .compile(&rendered, dir.path())
        .unwrap();
    (dir, out)
}

fn dns_fixture() -> Result<String, String> {
    let start = Instant::now();
    let (dir, _) = compiled(fixtures::DNS, None);
    let tree = zonewalk::load(dir.path());
    let text = tree
        .zone_text
        .get("example.com.")
        .ok_or("no example.com. zone")?;
    let records = zonewalk::parse_zone(text);
    let ns_targets: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.rtype == "NS")
        .map(|r| r.rdata.as_str())
        .collect();
    let user: Vec<String> = text
        .lines()
        .map(zonewalk::normalize)
        .filter(|l| !l.is_empty() && !l.starts_with('$') && !l.starts_with(';'))
        .filter(|l| {
            let rr = &zonewalk::parse_zone(&format!("$ORIGIN example.com.\n{l}"))[0];
            rr.rtype != "SOA" && rr.rtype != "NS" && !ns_targets.contains(rr.owner.as_str())
        })
        .collect();
    ensure!(
        user == ["@ A 2.2.2.2", "www A 5.5.5.5", "xyz A 5.5.5.6"],
        "example.com. records {user:?}"
    );
    let com = zonewalk::parse_zone(tree.zone_text.get("com.").ok_or("no com. zone")?);
    let ns: Vec<_> = com
        .iter()
        .filter(|r| r.owner == "example.com." && r.rtype == "NS")
        .collect();
    ensure!(!ns.is_empty(), "com. has no NS for example.com.");
    let glue: Vec<&str> = com
        .iter()
        .filter(|r| r.rtype == "A" && ns.iter().any(|n| n.rdata == r.owner))
        .map(|r| r.rdata.as_str())
        .collect();
    ensure!(!glue.is_empty(), "com. has no glue for example.com.");
    let (answer, steps) = tree.walk("www.example.com.")?;
    ensure!(
        answer == Ipv4Addr::new(5, 5, 5, 5),
        "www resolved to {answer}"
    );
    let zones: Vec<&str> = steps.iter().map(|s| s.zone.as_str()).collect();
    ensure!(
        zones == [".", "com.", "example.com."],
        "walk went through {zones:?}"
    );
    let server = steps[2].server.to_string();
    ensure!(
        glue.contains(&server.as_str()),
        "walk used {server}, glue is {glue:?}"
    );
    let took = within(start, Duration::from_secs(5), "dns")?;
    Ok(format!("3 records, delegation via {server}, {took:.2?}"))
}

fn morris() -> Result<String, String> {
    let statements = statement_count(fixtures::MORRIS);
    ensure!(statements <= 100, "{statements} statements");
    let start = Instant::now();
    let (_dir, out) = compiled(fixtures::MORRIS, None);
    let took = within(start, Duration::from_secs(30), "morris compile")?;
    let hosts = out.count_role("host");
    let total = out.containers.len();
    ensure!(
        hosts == 240 && total == 275,
        "{hosts} hosts, {total} containers"
    );
    let ixes = out.count_role(Role::RouteServer.as_str());
    ensure!(ixes == 5, "{ixes} route servers");
    let mut per_as: BTreeMap<&str, usize> = BTreeMap::new();
    for c in out
        .containers
        .iter()
        .filter(|c| c.role == Role::Host.as_str())
    {
        *per_as.entry(c.labels["emu.node.asn"].as_str()).or_default() += 1;
    }
    ensure!(
        per_as.len() == 12 && per_as.values().all(|&n| n == 20),
        "hosts per AS {per_as:?}"
    );
    Ok(format!(
        "{total} containers, {hosts} hosts, {statements} statements, {took:.2?}"
    ))
}

fn scaling() -> Result<String, String> {
    let start = Instant::now();
    let (dir, out) = compiled(fixtures::SCALING, None);
    let took = within(start, Duration::from_secs(120), "scaling compile")?;
    let ix_nets = out
        .manifest
        .networks
        .keys()
        .filter(|n| n.starts_with("ix"))
        .count();
    ensure!(ix_nets == 200, "{ix_nets} exchange networks");
    let routers = out
        .containers
        .iter()
        .filter(|c| c.role == Role::Router.as_str())
        .count();
    ensure!(
        routers == 1000 && out.containers.len() == 1000,
        "{routers} routers"
    );
    let asns: BTreeSet<&String> = out
        .containers
        .iter()
        .map(|c| &c.labels["emu.node.asn"])
        .collect();
    ensure!(asns.len() == 1000, "{} ASes", asns.len());
    let configs = bird::configs_in(dir.path());
    ensure!(configs.len() == 1000, "{} router configs", configs.len());
    for (name, conf) in &configs {
        let ebgp = bird::bgp_protocols(conf)
            .into_iter()
            .filter(|p| p.neighbor_as.is_some())
            .count();
        ensure!(ebgp == 4, "{name} has {ebgp} EBGP sessions");
    }
    Ok(format!(
        "200 exchanges, 1000 routers with 4 EBGP sessions each, {took:.2?}"
    ))
}

fn ibgp() -> Result<String, String> {
    let mut seen = Vec::new();
    for n in [1usize, 2, 5, 10] {
        let (dir, _) = compiled(&fixtures::ibgp_mesh(n), None);
        let configs: Vec<String> = bird::configs_in(dir.path())
            .into_iter()
            .map(|(_, c)| c)
            .collect();
        let pairs = bird::ibgp_pairs(&configs)?.len();
        ensure!(pairs == n * (n - 1) / 2, "n = {n}: {pairs} pairs");
        seen.push(format!("{n}:{pairs}"));
    }
    Ok(format!("pairs {}", seen.join(" ")))
}

fn class_of(c: RouteClass) -> Class {
    match c {
        RouteClass::Own => Class::Own,
        RouteClass::Customer => Class::Customer,
        RouteClass::Peer => Class::Peer,
        RouteClass::Provider => Class::Provider,
        RouteClass::Unfiltered => Class::Unfiltered,
    }
}

fn analyzer_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut valley_checked = 0;
    for seed in 0..100 {
        let topo = oracle::random_topo(seed);
        let expected = oracle::oracle(&topo).map_err(|e| format!("seed {seed}: {e}"))?;
        let ribs = compute_ribs(&topo.model());
        for (prefix, per_as) in &expected {
            for (asn, path) in per_as {
                let got = ribs.per_as.get(asn).and_then(|t| t.get(prefix));
                match (path, got) {
                    (None, None) => {}
                    (Some(p), Some(entry)) => {
                        ensure!(
                            entry.as_path == p[1..],
                            "seed {seed} AS{asn} {prefix}: path"
                        );
                        let want = if p.len() == 1 {
                            Class::Own
                        } else {
                            topo.class(*asn, p[1]).unwrap()
                        };
                        ensure!(
                            class_of(entry.learned_from) == want,
                            "seed {seed} AS{asn}: class"
                        );
                    }
                    _ => return Err(format!("seed {seed} AS{asn} {prefix}: {path:?} vs {got:?}")),
                }
                if let Some(p) = path.as_ref().filter(|_| topo.provider_peer_only()) {
                    ensure!(
                        oracle::valley_free(&topo, p),
                        "seed {seed}: valley in {p:?}"
                    );
                    valley_checked += 1;
                }
            }
        }
    }
    let took = within(start, Duration::from_secs(10), "oracle comparison")?;
    Ok(format!(
        "100 topologies equal, {valley_checked} valley-free paths, {took:.2?}"
    ))
}

/// The hijack scenario restated for the reference search.
fn hijack_topo(with_attack: bool) -> Topo {
    let p = PeerRelationship::Provider;
    let mut origins: Vec<(u32, Ipv4Net)> = [2, 3, 4, 150, 151, 152]
        .iter()
        .map(|&a| (a, format!("10.{a}.0.0/24").parse().unwrap()))
        .collect();
    if with_attack {
        origins.push((152, "10.150.0.0/25".parse().unwrap()));
    }
    Topo {
        ases: vec![2, 3, 4, 150, 151, 152],
        links: vec![(2, 3, p), (2, 4, p), (3, 150, p), (3, 151, p), (4, 152, p)],
        origins,
    }
}

fn hijack() -> Result<String, String> {
    let rendered = fixtures::emulator(fixtures::HIJACK)
        .unwrap()
        .render()
        .unwrap();
    let model = ControlPlaneModel::from_rendered(&rendered);
    let ases: Vec<u32> = model.ases().collect();
    ensure!(ases.len() == 6, "{} ASes", ases.len());
    let prefix: Ipv4Net = "10.150.0.0/25".parse().unwrap();
    let diff = model
        .what_if_announce(152, prefix)
        .map_err(|e| e.to_string())?;
    let reference = oracle::oracle(&hijack_topo(true))?;
    let expected = &reference[&prefix];
    ensure!(diff.sources == 5, "{} sources", diff.sources);
    ensure!(
        diff.changed.len() == diff.sources,
        "{} of {} flipped",
        diff.changed.len(),
        diff.sources
    );
    for change in &diff.changed {
        let Trace::Reached { as_path, .. } = &change.new else {
            return Err(format!(
                "AS{} unreachable after the announcement",
                change.source
            ));
        };
        ensure!(
            as_path.last() == Some(&152),
            "AS{} ends at {as_path:?}",
            change.source
        );
        let want = expected[&change.source]
            .as_ref()
            .ok_or("reference has no route")?;
        ensure!(
            as_path == want,
            "AS{}: {as_path:?}, reference {want:?}",
            change.source
        );
    }
    let mut restored = model.clone();
    restored.announce(152, prefix).map_err(|e| e.to_string())?;
    restored.withdraw(152, prefix).map_err(|e| e.to_string())?;
    let before = model.trace_all(&compute_ribs(&model), diff.probe, Some(152));
    let after = restored.trace_all(&compute_ribs(&restored), diff.probe, Some(152));
    ensure!(before == after, "paths differ after withdrawal");
    ensure!(
        serde_json::to_string(&before).unwrap() == serde_json::to_string(&after).unwrap(),
        "serialized paths differ after withdrawal"
    );
    let plain = oracle::oracle(&hijack_topo(false))?;
    for (asn, trace) in &before {
        let Trace::Reached { as_path, .. } = trace else {
            return Err(format!("AS{asn} unreachable before the announcement"));
        };
        let want = plain[&"10.150.0.0/24".parse::<Ipv4Net>().unwrap()][asn]
            .clone()
            .unwrap();
        ensure!(
            *as_path == want,
            "AS{asn} original path {as_path:?}, reference {want:?}"
        );
    }
    Ok(format!(
        "{}/{} sources flipped to AS152, all restored",
        diff.changed.len(),
        diff.sources
    ))
}

fn tree_hash(root: &Path) -> (usize, String) {
    let mut files = 0;
    let mut h = Sha256::new();
    for e in walkdir::WalkDir::new(root).sort_by_file_name() {
        let e = e.unwrap();
        let rel = e
            .path()
            .strip_prefix(root)
            .unwrap()
            .to_string_lossy()
            .into_owned();
        h.update(rel.as_bytes());
        h.update([0]);
        if e.file_type().is_file() {
            files += 1;
            let bytes = std::fs::read(e.path()).unwrap();
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    }
    (files, format!("{:x}", h.finalize()))
}

fn determinism() -> Result<String, String> {
    let mut files = 0;
    for (name, text) in fixtures::ALL {
        for seed in [None, Some(1234)] {
            let (a, _) = compiled(text, seed);
            let (b, _) = compiled(text, seed);
            let (n, ha) = tree_hash(a.path());
            let (_, hb) = tree_hash(b.path());
            ensure!(ha == hb, "{name} seed {seed:?}: {ha} vs {hb}");
            files += n;
        }
    }
    Ok(format!(
        "{} scenarios x 2 seeds identical, {files} files",
        fixtures::ALL.len()
    ))
}

/// Ends a source after a fixed number of observations.
struct Limit<S> {
    inner: S,
    left: usize,
}

impl<S: EventSource> EventSource for Limit<S> {
    fn service(&self) -> &str {
        self.inner.service()
    }

    fn next(&mut self) -> Option<(Duration, Vec<Observation>)> {
        if self.left == 0 {
            return None;
        }
        let (delay, mut batch) = self.inner.next()?;
        batch.truncate(self.left);
        self.left -= batch.len();
        Some((delay, batch))
    }
}

fn mapd_offline() -> Result<String, String> {
    let (dir, _) = compiled(fixtures::MORRIS, None);
    let doc = TopologyDocument::load_manifest_dir(dir.path()).map_err(|e| e.to_string())?;
    ensure!(doc.nodes.len() == 275, "{} nodes", doc.nodes.len());

    let hub = EventHub::new(DEFAULT_QUEUE);
    let filter = SharedFilter::default();
    filter.set(Some(Filter::parse("ip").map_err(|e| e.to_string())?));
    let id = hub.start_recording("ip").map_err(|e| e.to_string())?;
    let source = Limit {
        inner: ScriptedSource::new(&doc, 7, Duration::from_millis(5)),
        left: 20,
    };
    let mut pump = spawn_pump(Box::new(source), hub.clone(), filter);
    let deadline = Instant::now() + Duration::from_secs(10);
    while hub.recording_len() != Some(20) && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(10));
    }
    pump.stop();
    let rec = hub.stop_recording().map_err(|e| e.to_string())?;
    ensure!(rec.events.len() == 20, "recorded {}", rec.events.len());
    ensure!(
        rec.events
            .windows(2)
            .all(|w| w[0].timestamp_ms <= w[1].timestamp_ms),
        "timestamps go backwards"
    );
    let ids: BTreeSet<&str> = doc.nodes.iter().map(|n| n.id.as_str()).collect();
    ensure!(
        rec.events.iter().all(|e| ids.contains(e.node_id.as_str())),
        "event from unknown node"
    );

    let rt = tokio::runtime::Runtime::new().unwrap();
    let recording = hub.recording(&id).map_err(|e| e.to_string())?;
    let (replayed, span) = rt.block_on(async {
        let mut times = Vec::new();
        let start = tokio::time::Instant::now();
        let events: Vec<_> = replay_stream(recording, Duration::from_millis(100))
            .inspect(|_| times.push(start.elapsed()))
            .collect()
            .await;
        (events, *times.last().unwrap() - times[0])
    });
    ensure!(replayed == rec.events, "replay order differs");
    ensure!(span >= Duration::from_millis(1900), "replay span {span:?}");
    Ok(format!(
        "275 nodes, 20 events replayed in order over {span:.2?}"
    ))
}

/// Written past the test harness's output capture so the lines show up in
/// plain `cargo test` logs.
fn report(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance() {
    let checks: [(&str, Check); 8] = [
        ("dns-fixture", dns_fixture),
        ("morris-topology", morris),
        ("scaling", scaling),
        ("ibgp-full-mesh", ibgp),
        ("analyzer-oracle", analyzer_oracle),
        ("hijack-what-if", hijack),
        ("determinism", determinism),
        ("mapd-offline", mapd_offline),
    ];
    let mut failed = BTreeMap::new();
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => report(&format!("PASS {name}: {detail}")),
            Err(why) => {
                report(&format!("FAIL {name}: {why}"));
                failed.insert(name, why);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
