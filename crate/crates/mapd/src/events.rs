//! Sniff events: sources, the filtering pump and the fan-out hub.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::error::Result;
use crate::filter::{Filter, Packet, Proto};
use crate::recorder::{Recorder, Recording, RecordingSummary};
use crate::topology::TopologyDocument;

/// Default per-client queue length.
pub const DEFAULT_QUEUE: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SniffEvent {
    pub node_id: String,
    pub timestamp_ms: u64,
    pub summary: String,
}

/// Something a node saw. `packet` is set when the source has not applied
/// the filter itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub node_id: String,
    pub summary: String,
    pub packet: Option<Packet>,
}

/// Plugin seam for event producers, keyed by the service they report on.
/// `next` may block; sources run on their own thread.
pub trait EventSource: Send + 'static {
    fn service(&self) -> &str;
    /// Delay before the next batch, and the batch. `None` ends the source.
    fn next(&mut self) -> Option<(Duration, Vec<Observation>)>;
    /// Unblocks a pending `next` from another thread.
    fn stopper(&self) -> Option<Box<dyn FnOnce() + Send>> {
        None
    }
}

/// Seeded synthetic traffic between the nodes of a topology, plus pings to
/// an outside address.
pub struct ScriptedSource {
    rng: ChaCha8Rng,
    tick: Duration,
    endpoints: Vec<(String, std::net::Ipv4Addr)>,
    script: Option<std::vec::IntoIter<(Duration, Vec<Observation>)>>,
}

/// Destination of the synthetic outside pings.
pub const OUTSIDE: std::net::Ipv4Addr = std::net::Ipv4Addr::new(1, 2, 3, 4);

impl ScriptedSource {
    pub fn new(topology: &TopologyDocument, seed: u64, tick: Duration) -> Self {
        let endpoints = topology
            .nodes
            .iter()
            .filter_map(|n| Some((n.id.clone(), n.attachments.first()?.ip()?)))
            .collect();
        ScriptedSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            tick,
            endpoints,
            script: None,
        }
    }

    /// Plays back a fixed list of batches, then ends.
    pub fn from_script(batches: Vec<(Duration, Vec<Observation>)>) -> Self {
        ScriptedSource {
            rng: ChaCha8Rng::seed_from_u64(0),
            tick: Duration::ZERO,
            endpoints: Vec::new(),
            script: Some(batches.into_iter()),
        }
    }

    fn synthesize(&mut self) -> Vec<Observation> {
        let (node, src) = self.endpoints[self.rng.gen_range(0..self.endpoints.len())].clone();
        let proto = match self.rng.gen_range(0..5) {
            0 | 1 => Proto::Icmp,
            2 | 3 => Proto::Tcp,
            _ => Proto::Udp,
        };
        let (peer, dst) = if self.rng.gen_bool(0.2) || self.endpoints.len() < 2 {
            (None, OUTSIDE)
        } else {
            let (id, addr) = self.endpoints[self.rng.gen_range(0..self.endpoints.len())].clone();
            (Some(id), addr)
        };
        let dport = [22, 53, 80, 443][self.rng.gen_range(0..4)];
        let packet = Packet {
            src,
            dst,
            proto,
            sport: self.rng.gen_range(32768..61000),
            dport,
        };
        let mut out = vec![Observation {
            node_id: node.clone(),
            summary: packet.to_string(),
            packet: Some(packet),
        }];
        if let Some(peer) = peer.filter(|p| *p != node) {
            out.push(Observation {
                node_id: peer,
                summary: packet.to_string(),
                packet: Some(packet),
            });
        }
        out
    }
}

impl EventSource for ScriptedSource {
    fn service(&self) -> &str {
        "scripted"
    }

    fn next(&mut self) -> Option<(Duration, Vec<Observation>)> {
        if let Some(script) = &mut self.script {
            return script.next();
        }
        if self.endpoints.is_empty() {
            return None;
        }
        Some((self.tick, self.synthesize()))
    }
}

/// Fan-out of events to every subscriber. Each subscriber has a bounded
/// queue; when it falls behind the oldest events are dropped and counted.
pub struct EventHub {
    tx: broadcast::Sender<SniffEvent>,
    epoch: Instant,
    state: Mutex<HubState>,
    dropped: AtomicU64,
}

struct HubState {
    last_ms: u64,
    recorder: Recorder,
}

impl EventHub {
    pub fn new(queue: usize) -> Arc<Self> {
        let (tx, _) = broadcast::channel(queue.max(1));
        Arc::new(EventHub {
            tx,
            epoch: Instant::now(),
            state: Mutex::new(HubState {
                last_ms: 0,
                recorder: Recorder::default(),
            }),
            dropped: AtomicU64::new(0),
        })
    }

    pub fn subscribe(self: &Arc<Self>) -> Subscription {
        Subscription {
            rx: self.tx.subscribe(),
            hub: self.clone(),
        }
    }

    pub fn subscribers(&self) -> usize {
        self.tx.receiver_count()
    }

    /// Stamps, records (when a recording runs) and broadcasts an event.
    pub fn publish(&self, node_id: &str, summary: &str) -> SniffEvent {
        let mut state = self.state.lock().expect("hub lock");
        let now = self.epoch.elapsed().as_millis() as u64;
        state.last_ms = state.last_ms.max(now);
        let event = SniffEvent {
            node_id: node_id.to_string(),
            timestamp_ms: state.last_ms,
            summary: summary.to_string(),
        };
        state.recorder.observe(&event);
        let _ = self.tx.send(event.clone());
        event
    }

    /// Broadcasts without stamping or recording; used by replays.
    pub fn rebroadcast(&self, event: SniffEvent) {
        let _ = self.tx.send(event);
    }

    /// Events dropped across all subscribers because their queues were full.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn start_recording(&self, filter: &str) -> Result<String> {
        self.state.lock().expect("hub lock").recorder.start(filter)
    }

    pub fn stop_recording(&self) -> Result<Recording> {
        self.state.lock().expect("hub lock").recorder.stop()
    }

    /// Events captured so far by the running recording.
    pub fn recording_len(&self) -> Option<usize> {
        self.state.lock().expect("hub lock").recorder.active_len()
    }

    pub fn recording(&self, id: &str) -> Result<Recording> {
        self.state.lock().expect("hub lock").recorder.get(id)
    }

    pub fn recordings(&self) -> Vec<RecordingSummary> {
        self.state.lock().expect("hub lock").recorder.list()
    }
}

pub struct Subscription {
    rx: broadcast::Receiver<SniffEvent>,
    hub: Arc<EventHub>,
}

impl Subscription {
    /// Next event, skipping over any this subscriber missed. `None` once the
    /// hub is gone.
    pub async fn recv(&mut self) -> Option<SniffEvent> {
        loop {
            match self.rx.recv().await {
                Ok(e) => return Some(e),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    self.hub.dropped.fetch_add(n, Ordering::Relaxed);
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }
}

/// The filter applied to sources that report raw packets.
#[derive(Clone, Default)]
pub struct SharedFilter(Arc<RwLock<Option<Filter>>>);

impl SharedFilter {
    pub fn set(&self, filter: Option<Filter>) {
        *self.0.write().expect("filter lock") = filter;
    }

    pub fn get(&self) -> Option<Filter> {
        self.0.read().expect("filter lock").clone()
    }

    fn admits(&self, obs: &Observation) -> bool {
        match &obs.packet {
            None => true,
            Some(p) => self
                .0
                .read()
                .expect("filter lock")
                .as_ref()
                .is_some_and(|f| f.matches(p)),
        }
    }
}

/// Handle to a running pump; dropping it does not stop the pump.
pub struct PumpHandle {
    stop: Arc<AtomicBool>,
    stopper: Option<Box<dyn FnOnce() + Send>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl PumpHandle {
    pub fn stop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(f) = self.stopper.take() {
            f();
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Drives a source on its own thread, publishing the observations the
/// filter admits.
pub fn spawn_pump(
    mut source: Box<dyn EventSource>,
    hub: Arc<EventHub>,
    filter: SharedFilter,
) -> PumpHandle {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let stopper = source.stopper();
    let name = format!("pump-{}", source.service());
    let thread = std::thread::Builder::new()
        .name(name)
        .spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                let Some((delay, batch)) = source.next() else {
                    break;
                };
                sleep_unless_stopped(delay, &flag);
                if flag.load(Ordering::Relaxed) {
                    break;
                }
                for obs in batch.iter().filter(|o| filter.admits(o)) {
                    hub.publish(&obs.node_id, &obs.summary);
                }
            }
        })
        .expect("spawn pump thread");
    PumpHandle {
        stop,
        stopper,
        thread: Some(thread),
    }
}

fn sleep_unless_stopped(total: Duration, flag: &AtomicBool) {
    let step = Duration::from_millis(20);
    let end = Instant::now() + total;
    while !flag.load(Ordering::Relaxed) {
        let now = Instant::now();
        if now >= end {
            return;
        }
        std::thread::sleep(step.min(end - now));
    }
}
