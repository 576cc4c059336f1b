//! Session transcripts and their independent verification.
//!
//! One line per message: `<seq> <elapsed_us> <from>><to> <body>`, where a
//! party is `C` (coordinator) or `N1`..`N3` and `<body>` is the unframed record.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::dist::Sign;
use crate::ghz::{node_output, NodeAssignment, NodeId, Regime, Schedule, TrialTriple};
use crate::rational::Rational;

use super::wire::Message;
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Coordinator,
    Node(NodeId),
}

impl Party {
    fn parse(s: &str) -> Option<Self> {
        if s == "C" {
            return Some(Party::Coordinator);
        }
        let id = s.strip_prefix('N')?.parse::<u8>().ok()?;
        NodeId::new(id).ok().map(Party::Node)
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Coordinator => f.write_str("C"),
            Party::Node(n) => write!(f, "N{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub seq: u64,
    pub elapsed_us: u64,
    pub from: Party,
    pub to: Party,
    pub message: Message,
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}>{} {}", self.seq, self.elapsed_us, self.from, self.to, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<Entry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a message and returns the stored entry.
    pub fn record(&mut self, elapsed_us: u64, from: Party, to: Party, message: Message) -> &Entry {
        let seq = self.entries.len() as u64;
        self.entries.push(Entry { seq, elapsed_us, from, to, message });
        self.entries.last().expect("just pushed")
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Vec<Entry> {
        &mut self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self, NetError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |detail: String| NetError::Transcript { line: i + 1, detail };
            let mut parts = line.splitn(4, ' ');
            let (Some(seq), Some(elapsed), Some(edge), Some(body)) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected `<seq> <elapsed_us> <from>><to> <record>`".into()));
            };
            let seq = seq.parse().map_err(|_| bad(format!("sequence number `{seq}`")))?;
            let elapsed_us = elapsed.parse().map_err(|_| bad(format!("timestamp `{elapsed}`")))?;
            let (from, to) = edge
                .split_once('>')
                .and_then(|(a, b)| Some((Party::parse(a)?, Party::parse(b)?)))
                .ok_or_else(|| bad(format!("edge `{edge}`")))?;
            let message = Message::parse(body).map_err(|e| bad(e.to_string()))?;
            entries.push(Entry { seq, elapsed_us, from, to, message });
        }
        Ok(Transcript { entries })
    }

    /// Trials whose three nodes each returned exactly one RESULT, in trial order.
    /// The measurement settings are those sent to node 1.
    pub fn trials(&self) -> Vec<(u64, TrialTriple)> {
        let mut measures: BTreeMap<u64, (Regime, Rational)> = BTreeMap::new();
        let mut results: BTreeMap<u64, BTreeMap<NodeId, Vec<Sign>>> = BTreeMap::new();
        for e in &self.entries {
            match (&e.message, e.from, e.to) {
                (Message::Measure { trial, regime, t }, Party::Coordinator, Party::Node(_)) => {
                    measures.entry(*trial).or_insert_with(|| (*regime, t.clone()));
                }
                (Message::Result { trial, node, outcome }, Party::Node(sender), Party::Coordinator) if *node == sender => {
                    results.entry(*trial).or_default().entry(sender).or_default().push(*outcome);
                }
                _ => {}
            }
        }
        measures
            .into_iter()
            .filter_map(|(trial, (regime, t))| {
                let by_node = results.get(&trial)?;
                let mut outputs = [Sign::Plus; 3];
                for (slot, node) in outputs.iter_mut().zip(NodeId::ALL) {
                    match by_node.get(&node).map(Vec::as_slice) {
                        Some([one]) => *slot = *one,
                        _ => return None,
                    }
                }
                Some((trial, TrialTriple { regime, t, outputs }))
            })
            .collect()
    }
}

/// Trial lines keyed by trial id, matching the in-process log for a complete session.
pub fn format_session_log(trials: &[(u64, TrialTriple)]) -> String {
    trials.iter().map(|(id, t)| t.to_line(*id) + "\n").collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    /// A RESULT disagrees with the re-derived output.
    Outcome { trial: u64, node: NodeId, recorded: Sign, expected: Sign },
    /// A RESULT was sent for a time the node should have refused.
    OutsideWindow { trial: u64, node: NodeId },
    /// A RESULT or ERROR record addressed to a node, or any node-to-node message.
    Forwarded { seq: u64, from: Party, to: Party },
    /// A node reported under another node's id.
    WrongSender { seq: u64, sender: Party, claimed: NodeId },
    /// A RESULT for a trial that node was never asked to measure.
    Unrequested { seq: u64, trial: u64, node: NodeId },
    Duplicate { trial: u64, node: NodeId },
    /// Nodes were sent different settings for the same trial.
    Inconsistent { trial: u64 },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Outcome { trial, node, recorded, expected } => {
                write!(f, "trial {trial} node {node}: recorded {recorded}, re-derived {expected}")
            }
            Mismatch::OutsideWindow { trial, node } => write!(f, "trial {trial} node {node}: answered outside the window"),
            Mismatch::Forwarded { seq, from, to } => write!(f, "record {seq}: forbidden {from}>{to} message"),
            Mismatch::WrongSender { seq, sender, claimed } => write!(f, "record {seq}: {sender} reported as node {claimed}"),
            Mismatch::Unrequested { seq, trial, node } => {
                write!(f, "record {seq}: node {node} answered unmeasured trial {trial}")
            }
            Mismatch::Duplicate { trial, node } => write!(f, "trial {trial} node {node}: more than one RESULT"),
            Mismatch::Inconsistent { trial } => write!(f, "trial {trial}: nodes received different settings"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProductCount {
    pub plus: u64,
    pub minus: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub trials: u64,
    pub complete: u64,
    /// Trials missing at least one RESULT, with the node ERROR reasons seen.
    pub incomplete: BTreeMap<u64, Vec<String>>,
    pub products: BTreeMap<Regime, ProductCount>,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-derives every reported outcome from `(node, regime, t)` and checks the
/// information-flow rules by inspecting the log alone.
///
/// Window membership is judged against the first SCHEDULE in the transcript;
/// without one, outcomes are compared without a window check.
pub fn verify_transcript(transcript: &Transcript, assignment: &NodeAssignment) -> VerifyReport {
    let mut report = VerifyReport::default();
    let schedule: Option<&Schedule> = transcript.entries().iter().find_map(|e| match &e.message {
        Message::Schedule(s) => Some(s),
        _ => None,
    });

    let mut measures: BTreeMap<u64, BTreeMap<NodeId, (Regime, Rational)>> = BTreeMap::new();
    let mut seen: BTreeMap<u64, BTreeMap<NodeId, Sign>> = BTreeMap::new();
    let mut duplicates: BTreeSet<(u64, NodeId)> = BTreeSet::new();

    for e in transcript.entries() {
        let carries_output = matches!(e.message, Message::Result { .. } | Message::Error { .. });
        let node_to_node = matches!((e.from, e.to), (Party::Node(_), Party::Node(_)));
        if (carries_output && matches!(e.to, Party::Node(_))) || node_to_node {
            report.mismatches.push(Mismatch::Forwarded { seq: e.seq, from: e.from, to: e.to });
            continue;
        }
        match (&e.message, e.from) {
            (Message::Measure { trial, regime, t }, Party::Coordinator) => {
                if let Party::Node(n) = e.to {
                    measures.entry(*trial).or_default().insert(n, (*regime, t.clone()));
                }
            }
            (Message::Result { trial, node, outcome }, Party::Node(sender)) => {
                if *node != sender {
                    report.mismatches.push(Mismatch::WrongSender { seq: e.seq, sender: e.from, claimed: *node });
                    continue;
                }
                let Some((regime, t)) = measures.get(trial).and_then(|m| m.get(node)) else {
                    report.mismatches.push(Mismatch::Unrequested { seq: e.seq, trial: *trial, node: *node });
                    continue;
                };
                if seen.entry(*trial).or_default().insert(*node, *outcome).is_some() {
                    duplicates.insert((*trial, *node));
                    continue;
                }
                let expected = match schedule {
                    Some(s) => node_output(assignment, s, *node, *regime, t),
                    None => assignment.evaluate(*node, *regime, t),
                };
                match expected {
                    Ok(expected) if expected != *outcome => report.mismatches.push(Mismatch::Outcome {
                        trial: *trial,
                        node: *node,
                        recorded: *outcome,
                        expected,
                    }),
                    Ok(_) => {}
                    Err(_) => report.mismatches.push(Mismatch::OutsideWindow { trial: *trial, node: *node }),
                }
            }
            (Message::Error { trial, reason, node }, Party::Node(_)) => {
                report.incomplete.entry(*trial).or_default().push(format!("node {node}: {reason}"));
            }
            _ => {}
        }
    }
    report.mismatches.extend(duplicates.into_iter().map(|(trial, node)| Mismatch::Duplicate { trial, node }));

    report.trials = measures.len() as u64;
    for (trial, by_node) in &measures {
        let mut settings = by_node.values();
        let first = settings.next();
        if settings.any(|s| Some(s) != first) {
            report.mismatches.push(Mismatch::Inconsistent { trial: *trial });
        }
        let outcomes = seen.get(trial);
        let all = NodeId::ALL.iter().all(|n| by_node.contains_key(n) && outcomes.is_some_and(|o| o.contains_key(n)));
        if !all {
            report.incomplete.entry(*trial).or_default();
            continue;
        }
        report.incomplete.remove(trial);
        report.complete += 1;
        let outcomes = outcomes.expect("checked above");
        let product = NodeId::ALL.iter().fold(Sign::Plus, |acc, n| acc * outcomes[n]);
        let regime = first.expect("three nodes measured").0;
        let count = report.products.entry(regime).or_default();
        if product.is_plus() {
            count.plus += 1;
        } else {
            count.minus += 1;
        }
    }
    report
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trials = {}", self.trials)?;
        writeln!(f, "complete = {}", self.complete)?;
        writeln!(f, "incomplete = {}", self.incomplete.len())?;
        for (regime, c) in &self.products {
            writeln!(f, "products.{regime} = +1:{} -1:{}", c.plus, c.minus)?;
        }
        writeln!(f, "mismatches = {}", self.mismatches.len())?;
        for m in &self.mismatches {
            writeln!(f, "mismatch = {m}")?;
        }
        Ok(())
    }
}
