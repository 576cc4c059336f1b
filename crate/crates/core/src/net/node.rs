//! A measurement station serving one coordinator session.

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};

use crate::ghz::{node_output, NodeAssignment, NodeId, Schedule};

use super::wire::{read_message, write_message, Message};
use super::NetError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeSummary {
    pub answered: u64,
    pub refused: u64,
}

/// Accepts one coordinator connection and serves it until DONE.
pub fn serve(listener: &TcpListener, node: NodeId, assignment: &NodeAssignment) -> Result<NodeSummary, NetError> {
    let (stream, _) = listener.accept()?;
    serve_connection(stream, node, assignment)
}

/// Announces `node`, then answers each MEASURE from the schedule and the
/// MEASURE fields alone. Nothing but the schedule persists between trials.
pub fn serve_connection(stream: TcpStream, node: NodeId, assignment: &NodeAssignment) -> Result<NodeSummary, NetError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    write_message(&mut writer, &Message::Hello { node })?;

    let mut schedule: Option<Schedule> = None;
    let mut summary = NodeSummary::default();
    loop {
        let Some(msg) = read_message(&mut reader)? else {
            return Err(NetError::Disconnected(format!("coordinator closed the session to node {node}")));
        };
        match msg {
            Message::Schedule(s) => schedule = Some(s),
            Message::Measure { trial, regime, t } => {
                let reply = match &schedule {
                    None => Err("no schedule received".to_string()),
                    Some(s) => node_output(assignment, s, node, regime, &t).map_err(|e| e.to_string()),
                };
                let reply = match reply {
                    Ok(outcome) => {
                        summary.answered += 1;
                        Message::Result { trial, node, outcome }
                    }
                    Err(reason) => {
                        summary.refused += 1;
                        Message::Error { trial, node, reason }
                    }
                };
                write_message(&mut writer, &reply)?;
            }
            Message::Done => return Ok(summary),
            other => {
                return Err(NetError::Protocol(format!("node {node} received {} from the coordinator", other.kind())));
            }
        }
    }
}
