//! Framed text records.
//!
//! A record is `<len> <body>\n`, where `<len>` is the decimal byte length of
//! `<body>`. Bodies are space-separated fields in a fixed order:
//!
//! ```text
//! HELLO <node>
//! SCHEDULE <regime> <start> <end> [<regime> <start> <end> ...]
//! MEASURE <trial> <regime> <num/den>
//! RESULT <trial> <node> <+1|-1>
//! ERROR <trial> <node> <reason...>
//! DONE
//! ```

use std::fmt;
use std::io::{self, BufRead, Read, Write};

use num_traits::Signed;
use thiserror::Error;

use crate::dist::Sign;
use crate::ghz::{NodeId, Regime, Schedule};
use crate::rational::{format_fraction, parse_rational, Rational};

/// Upper bound on a record body, to reject garbage length prefixes.
pub const MAX_BODY: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad length prefix `{0}`")]
    BadLength(String),
    #[error("record truncated")]
    Truncated,
    #[error("record not terminated by a newline")]
    MissingNewline,
    #[error("record is not UTF-8")]
    NotUtf8,
    #[error("unknown record kind `{0}`")]
    UnknownKind(String),
    #[error("malformed {kind} record: {detail}")]
    Field { kind: &'static str, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello { node: NodeId },
    Schedule(Schedule),
    Measure { trial: u64, regime: Regime, t: Rational },
    Result { trial: u64, node: NodeId, outcome: Sign },
    Error { trial: u64, node: NodeId, reason: String },
    Done,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::Schedule(_) => "SCHEDULE",
            Message::Measure { .. } => "MEASURE",
            Message::Result { .. } => "RESULT",
            Message::Error { .. } => "ERROR",
            Message::Done => "DONE",
        }
    }

    pub fn parse(body: &str) -> Result<Self, WireError> {
        let (kind, rest) = body.split_once(' ').unwrap_or((body, ""));
        let fields: Vec<&str> = rest.split_whitespace().collect();
        let bad = |kind: &'static str, detail: String| WireError::Field { kind, detail };
        let arity = |kind: &'static str, n: usize| {
            if fields.len() == n {
                Ok(())
            } else {
                Err(bad(kind, format!("expected {n} fields, got {}", fields.len())))
            }
        };
        let trial = |kind: &'static str, s: &str| s.parse::<u64>().map_err(|_| bad(kind, format!("trial id `{s}`")));
        let node = |kind: &'static str, s: &str| {
            s.parse::<u8>()
                .ok()
                .and_then(|n| NodeId::new(n).ok())
                .ok_or_else(|| bad(kind, format!("node id `{s}`")))
        };
        match kind {
            "HELLO" => {
                arity("HELLO", 1)?;
                Ok(Message::Hello { node: node("HELLO", fields[0])? })
            }
            "SCHEDULE" => Schedule::decode(rest)
                .map(Message::Schedule)
                .map_err(|e| bad("SCHEDULE", e.to_string())),
            "MEASURE" => {
                arity("MEASURE", 3)?;
                Ok(Message::Measure {
                    trial: trial("MEASURE", fields[0])?,
                    regime: Regime::parse(fields[1]).map_err(|e| bad("MEASURE", e.to_string()))?,
                    t: parse_fraction(fields[2]).ok_or_else(|| bad("MEASURE", format!("time `{}`", fields[2])))?,
                })
            }
            "RESULT" => {
                arity("RESULT", 3)?;
                let outcome = match fields[2] {
                    "+1" => Sign::Plus,
                    "-1" => Sign::Minus,
                    other => return Err(bad("RESULT", format!("outcome `{other}`"))),
                };
                Ok(Message::Result { trial: trial("RESULT", fields[0])?, node: node("RESULT", fields[1])?, outcome })
            }
            "ERROR" => {
                if fields.len() < 3 {
                    return Err(bad("ERROR", "expected trial, node and reason".into()));
                }
                Ok(Message::Error {
                    trial: trial("ERROR", fields[0])?,
                    node: node("ERROR", fields[1])?,
                    reason: fields[2..].join(" "),
                })
            }
            "DONE" => {
                arity("DONE", 0)?;
                Ok(Message::Done)
            }
            other => Err(WireError::UnknownKind(other.to_string())),
        }
    }

    /// Frames the message as `<len> <body>\n`.
    pub fn frame(&self) -> String {
        let body = self.to_string();
        format!("{} {}\n", body.len(), body)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Hello { node } => write!(f, "HELLO {node}"),
            Message::Schedule(s) => write!(f, "SCHEDULE {}", s.encode()),
            Message::Measure { trial, regime, t } => write!(f, "MEASURE {trial} {regime} {}", format_fraction(t)),
            Message::Result { trial, node, outcome } => write!(f, "RESULT {trial} {node} {outcome}"),
            Message::Error { trial, node, reason } => write!(f, "ERROR {trial} {node} {reason}"),
            Message::Done => f.write_str("DONE"),
        }
    }
}

/// Positive exact `num/den` only; decimals are not accepted on the wire.
fn parse_fraction(s: &str) -> Option<Rational> {
    let (n, d) = s.split_once('/')?;
    let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
    if !digits(n) || !digits(d) {
        return None;
    }
    parse_rational(s).ok().filter(|t| t.is_positive())
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<(), WireError> {
    w.write_all(msg.frame().as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads one record. `Ok(None)` means the peer closed the stream between records.
pub fn read_message(r: &mut impl BufRead) -> Result<Option<Message>, WireError> {
    let mut prefix = Vec::new();
    r.by_ref().take(16).read_until(b' ', &mut prefix)?;
    if prefix.is_empty() {
        return Ok(None);
    }
    if prefix.last() != Some(&b' ') {
        return Err(if prefix.len() < 16 { WireError::Truncated } else { bad_length(&prefix) });
    }
    let digits = &prefix[..prefix.len() - 1];
    if digits.is_empty() || !digits.iter().all(u8::is_ascii_digit) {
        return Err(bad_length(&prefix));
    }
    let len: usize = std::str::from_utf8(digits).ok().and_then(|s| s.parse().ok()).ok_or_else(|| bad_length(&prefix))?;
    if len > MAX_BODY {
        return Err(bad_length(&prefix));
    }
    let mut body = vec![0u8; len + 1];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Truncated,
        _ => WireError::Io(e),
    })?;
    if body.pop() != Some(b'\n') {
        return Err(WireError::MissingNewline);
    }
    let text = String::from_utf8(body).map_err(|_| WireError::NotUtf8)?;
    Message::parse(&text).map(Some)
}

fn bad_length(prefix: &[u8]) -> WireError {
    WireError::BadLength(String::from_utf8_lossy(prefix).trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn samples() -> Vec<Message> {
        let [n1, n2, n3] = NodeId::ALL;
        vec![
            Message::Hello { node: n2 },
            Message::Schedule(Schedule::standard()),
            Message::Measure { trial: 41, regime: Regime::Xyy, t: ratio(16106127363, 4294967296) },
            Message::Result { trial: 41, node: n3, outcome: Sign::Minus },
            Message::Result { trial: 0, node: n1, outcome: Sign::Plus },
            Message::Error { trial: 7, node: n1, reason: "time 2 is outside the xxx window".into() },
            Message::Done,
        ]
    }

    #[test]
    fn round_trip_through_a_stream() {
        let mut buf = Vec::new();
        for m in samples() {
            write_message(&mut buf, &m).unwrap();
        }
        let mut reader = io::Cursor::new(buf);
        for m in samples() {
            assert_eq!(read_message(&mut reader).unwrap(), Some(m));
        }
        assert!(read_message(&mut reader).unwrap().is_none());
    }

    #[test]
    fn framing_examples() {
        let m = Message::Measure { trial: 3, regime: Regime::Yxy, t: ratio(5, 2) };
        assert_eq!(m.frame(), "17 MEASURE 3 yxy 5/2\n");
        assert_eq!(Message::Done.frame(), "4 DONE\n");
        assert_eq!(
            Message::Schedule(Schedule::standard()).to_string(),
            "SCHEDULE yyx 1/1 2/1 yxy 9/4 13/4 xyy 7/2 9/2 xxx 19/4 23/4"
        );
    }

    #[test]
    fn rejects_malformed_records() {
        let read = |s: &str| read_message(&mut io::Cursor::new(s.as_bytes().to_vec()));
        assert!(matches!(read("5 DONE\n"), Err(WireError::Truncated)));
        assert!(matches!(read("3 DONEX"), Err(WireError::MissingNewline)));
        assert!(matches!(read("x DONE\n"), Err(WireError::BadLength(_))));
        assert!(matches!(read("99999999 DONE\n"), Err(WireError::BadLength(_))));
        assert!(matches!(read("4"), Err(WireError::Truncated)));
        assert!(matches!(read("4 NOPE\n"), Err(WireError::UnknownKind(_))));
        for body in ["HELLO 4", "MEASURE 3 yxy 2.5", "MEASURE 3 yxy -5/2", "RESULT 1 2 +2", "ERROR 1 2 ", "DONE 1"] {
            let framed = format!("{} {body}\n", body.len());
            assert!(matches!(read(&framed), Err(WireError::Field { .. })), "{body}");
        }
    }
}
