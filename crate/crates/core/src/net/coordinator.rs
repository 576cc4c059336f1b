//! Session driver: the single source of measurement times.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::ghz::{measurement_times, NodeId, Regime, Schedule, TrialTriple};
use crate::rational::Rational;

use super::transcript::{Party, Transcript};
use super::wire::{read_message, write_message, Message, WireError};
use super::NetError;

#[derive(Debug, Clone)]
pub struct CoordinatorConfig {
    pub schedule: Schedule,
    pub trials_per_regime: u64,
    pub seed: u64,
    /// Addresses of nodes 1, 2 and 3, in that order.
    pub endpoints: [String; 3],
    /// How long to keep retrying a connection and to wait for HELLO.
    pub connect_timeout: Duration,
    /// How long to wait for the three RESULTs of one trial.
    pub result_timeout: Duration,
    /// Append each transcript line to this file as it is recorded.
    pub transcript_path: Option<PathBuf>,
}

impl CoordinatorConfig {
    pub fn new(schedule: Schedule, trials_per_regime: u64, seed: u64, endpoints: [String; 3]) -> Self {
        CoordinatorConfig {
            schedule,
            trials_per_regime,
            seed,
            endpoints,
            connect_timeout: Duration::from_secs(10),
            result_timeout: Duration::from_secs(5),
            transcript_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionStatus {
    Complete,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoidTrial {
    pub trial: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub status: SessionStatus,
    pub transcript: Transcript,
    /// Completed trials keyed by trial id.
    pub trials: Vec<(u64, TrialTriple)>,
    pub void: Vec<VoidTrial>,
    /// Trials never sent because the session aborted first.
    pub unsent: u64,
}

enum Event {
    Message(usize, Message),
    Closed(usize, Option<WireError>),
}

struct Recorder {
    start: Instant,
    transcript: Transcript,
    sink: Option<BufWriter<File>>,
}

impl Recorder {
    fn record(&mut self, from: Party, to: Party, message: Message) -> Result<(), NetError> {
        let elapsed = self.start.elapsed().as_micros() as u64;
        let entry = self.transcript.record(elapsed, from, to, message);
        if let Some(sink) = &mut self.sink {
            writeln!(sink, "{entry}")?;
            sink.flush()?;
        }
        Ok(())
    }
}

struct Link {
    node: NodeId,
    writer: BufWriter<TcpStream>,
    stream: TcpStream,
    open: bool,
}

/// Runs a full session against three listening nodes.
///
/// Trials are issued window by window in schedule order with the same times
/// `ghz::run_schedule` draws for the same seed. Network failures end the
/// session with `SessionStatus::Aborted` and whatever transcript exists;
/// only local problems (bad schedule, unwritable transcript file) are errors.
pub fn coordinator_run(config: &CoordinatorConfig) -> Result<Session, NetError> {
    let mut plan: Vec<(Regime, Rational)> = Vec::new();
    for w in config.schedule.windows() {
        let times = measurement_times(&config.schedule, w.regime, config.trials_per_regime, config.seed)?;
        plan.extend(times.into_iter().map(|t| (w.regime, t)));
    }
    let sink = match &config.transcript_path {
        Some(p) => Some(BufWriter::new(File::options().create(true).append(true).open(p)?)),
        None => None,
    };
    let mut rec = Recorder { start: Instant::now(), transcript: Transcript::new(), sink };
    let (tx, rx) = mpsc::channel();
    let mut links: Vec<Link> = Vec::new();
    let mut readers: Vec<JoinHandle<()>> = Vec::new();
    let mut void = Vec::new();
    let mut sent = 0u64;

    let status = (|| -> Result<SessionStatus, NetError> {
        for (idx, (endpoint, node)) in config.endpoints.iter().zip(NodeId::ALL).enumerate() {
            let stream = match connect(endpoint, config.connect_timeout) {
                Ok(s) => s,
                Err(e) => return Ok(SessionStatus::Aborted(format!("node {node} unreachable at {endpoint}: {e}"))),
            };
            stream.set_nodelay(true)?;
            stream.set_read_timeout(Some(config.connect_timeout))?;
            let mut reader = BufReader::new(stream.try_clone()?);
            match read_message(&mut reader) {
                Ok(Some(Message::Hello { node: claimed })) => {
                    rec.record(Party::Node(node), Party::Coordinator, Message::Hello { node: claimed })?;
                    if claimed != node {
                        return Ok(SessionStatus::Aborted(format!("{endpoint} announced node {claimed}, expected {node}")));
                    }
                }
                Ok(other) => {
                    return Ok(SessionStatus::Aborted(format!("node {node} sent {other:?} instead of HELLO")));
                }
                Err(e) => return Ok(SessionStatus::Aborted(format!("node {node} handshake failed: {e}"))),
            }
            stream.set_read_timeout(None)?;
            let tx = tx.clone();
            readers.push(thread::spawn(move || loop {
                match read_message(&mut reader) {
                    Ok(Some(m)) => {
                        if tx.send(Event::Message(idx, m)).is_err() {
                            return;
                        }
                    }
                    Ok(None) => return drop(tx.send(Event::Closed(idx, None))),
                    Err(e) => return drop(tx.send(Event::Closed(idx, Some(e)))),
                }
            }));
            links.push(Link { node, writer: BufWriter::new(stream.try_clone()?), stream, open: true });
        }

        let schedule = Message::Schedule(config.schedule.clone());
        for link in &mut links {
            if let Err(e) = write_message(&mut link.writer, &schedule) {
                return Ok(SessionStatus::Aborted(format!("node {}: {e}", link.node)));
            }
            rec.record(Party::Coordinator, Party::Node(link.node), schedule.clone())?;
        }

        for (trial, (regime, t)) in plan.iter().enumerate() {
            let trial = trial as u64;
            let measure = Message::Measure { trial, regime: *regime, t: t.clone() };
            for link in &mut links {
                if let Err(e) = write_message(&mut link.writer, &measure) {
                    link.open = false;
                    return Ok(SessionStatus::Aborted(format!("node {}: {e}", link.node)));
                }
                rec.record(Party::Coordinator, Party::Node(link.node), measure.clone())?;
            }
            sent += 1;
            match collect(trial, &rx, &mut links, &mut rec, config.result_timeout)? {
                Collected::Done => {}
                Collected::Void(reason) => void.push(VoidTrial { trial, reason }),
                Collected::Lost(reason) => {
                    void.push(VoidTrial { trial, reason: reason.clone() });
                    return Ok(SessionStatus::Aborted(reason));
                }
            }
        }
        Ok(SessionStatus::Complete)
    })()?;

    for link in links.iter_mut().filter(|l| l.open) {
        if write_message(&mut link.writer, &Message::Done).is_ok() {
            rec.record(Party::Coordinator, Party::Node(link.node), Message::Done)?;
        }
    }
    for link in &links {
        let _ = link.stream.shutdown(Shutdown::Write);
    }
    drop(tx);
    // Drain until every reader has seen its node close, keeping late answers.
    while let Ok(event) = rx.recv_timeout(config.result_timeout) {
        if let Event::Message(idx, msg) = event {
            rec.record(Party::Node(links[idx].node), Party::Coordinator, msg)?;
        }
    }
    for link in &links {
        let _ = link.stream.shutdown(Shutdown::Both);
    }
    for handle in readers {
        let _ = handle.join();
    }

    let voided: BTreeSet<u64> = void.iter().map(|v| v.trial).collect();
    let trials = rec.transcript.trials().into_iter().filter(|(id, _)| !voided.contains(id)).collect();
    Ok(Session { status, transcript: rec.transcript, trials, void, unsent: plan.len() as u64 - sent })
}

enum Collected {
    Done,
    Void(String),
    Lost(String),
}

/// Waits for the three RESULTs of `trial`, in any order. Records for other
/// trials (late answers to a voided trial) are logged and otherwise ignored.
fn collect(
    trial: u64,
    rx: &Receiver<Event>,
    links: &mut [Link],
    rec: &mut Recorder,
    timeout: Duration,
) -> Result<Collected, NetError> {
    let deadline = Instant::now() + timeout;
    let mut pending: BTreeSet<NodeId> = NodeId::ALL.into_iter().collect();
    let mut refusals: Vec<String> = Vec::new();
    while !pending.is_empty() {
        let wait = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(wait) {
            Ok(Event::Message(idx, msg)) => {
                let sender = links[idx].node;
                match &msg {
                    Message::Result { trial: id, node, .. } if *id == trial && *node == sender => {
                        pending.remove(&sender);
                    }
                    Message::Error { trial: id, reason, .. } if *id == trial => {
                        pending.remove(&sender);
                        refusals.push(format!("node {sender}: {reason}"));
                    }
                    _ => {}
                }
                rec.record(Party::Node(sender), Party::Coordinator, msg)?;
            }
            Ok(Event::Closed(idx, err)) => {
                links[idx].open = false;
                let node = links[idx].node;
                return Ok(Collected::Lost(match err {
                    None => format!("node {node} closed the connection"),
                    Some(e) => format!("node {node} connection failed: {e}"),
                }));
            }
            Err(RecvTimeoutError::Timeout) => {
                let missing: Vec<String> = pending.iter().map(|n| n.to_string()).collect();
                refusals.push(format!("timeout waiting for node {}", missing.join(", ")));
                break;
            }
            Err(RecvTimeoutError::Disconnected) => return Ok(Collected::Lost("all node readers stopped".into())),
        }
    }
    Ok(if refusals.is_empty() { Collected::Done } else { Collected::Void(refusals.join("; ")) })
}

fn connect(endpoint: &str, timeout: Duration) -> Result<TcpStream, NetError> {
    let deadline = Instant::now() + timeout;
    loop {
        let attempt = endpoint
            .to_socket_addrs()
            .map_err(NetError::from)
            .and_then(|mut addrs| addrs.next().ok_or_else(|| NetError::Protocol(format!("`{endpoint}` resolves to nothing"))))
            .and_then(|addr| TcpStream::connect_timeout(&addr, Duration::from_millis(500)).map_err(NetError::from));
        match attempt {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => return Err(e),
            Err(_) => thread::sleep(Duration::from_millis(25)),
        }
    }
}
