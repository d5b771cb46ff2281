//! Read/write event traces and their JSON-lines file format.
//!
//! ```text
//! {"frame_ms":40.0,"source_frames":120,"target_len":3}
//! {"type":"read","frames":24}
//! {"type":"write","token":5,"elapsed_frames":24,"compute_ms":1.5}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::frames_to_ms;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Event {
    Read {
        frames: usize,
    },
    Write {
        token: usize,
        elapsed_frames: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        compute_ms: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    frame_ms: f64,
    source_frames: usize,
    target_len: usize,
}

/// Ordered READ/WRITE decisions of one streamed utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadWriteTrace {
    frame_ms: f64,
    source_frames: usize,
    events: Vec<Event>,
}

impl ReadWriteTrace {
    /// Validates the accounting invariants: every WRITE's elapsed frames equal
    /// the READ total before it, and reads never exceed the source.
    pub fn new(frame_ms: f64, source_frames: usize, events: Vec<Event>) -> Result<Self> {
        if !(frame_ms > 0.0) || !frame_ms.is_finite() {
            return Err(Error::InvalidConfig("frame_ms must be positive".into()));
        }
        let mut read = 0usize;
        for (i, ev) in events.iter().enumerate() {
            match *ev {
                Event::Read { frames } => {
                    read += frames;
                    if read > source_frames {
                        return Err(Error::MalformedTrace {
                            line: i + 2,
                            message: format!("reads {read} frames of a {source_frames}-frame source"),
                        });
                    }
                }
                Event::Write {
                    elapsed_frames,
                    compute_ms,
                    ..
                } => {
                    if elapsed_frames != read {
                        return Err(Error::MalformedTrace {
                            line: i + 2,
                            message: format!("write claims {elapsed_frames} elapsed frames after reading {read}"),
                        });
                    }
                    if let Some(c) = compute_ms {
                        if !c.is_finite() || c < 0.0 {
                            return Err(Error::MalformedTrace {
                                line: i + 2,
                                message: format!("invalid compute_ms {c}"),
                            });
                        }
                    }
                }
            }
        }
        Ok(Self {
            frame_ms,
            source_frames,
            events,
        })
    }

    pub fn frame_ms(&self) -> f64 {
        self.frame_ms
    }

    pub fn source_frames(&self) -> usize {
        self.source_frames
    }

    pub fn source_ms(&self) -> f64 {
        frames_to_ms(self.source_frames, self.frame_ms)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of WRITE events.
    pub fn target_len(&self) -> usize {
        self.writes().count()
    }

    pub fn frames_read(&self) -> usize {
        self.events
            .iter()
            .map(|e| match e {
                Event::Read { frames } => *frames,
                Event::Write { .. } => 0,
            })
            .sum()
    }

    /// `(token, elapsed_frames, compute_ms)` of every WRITE in order.
    pub fn writes(&self) -> impl Iterator<Item = (usize, usize, Option<f64>)> + '_ {
        self.events.iter().filter_map(|e| match *e {
            Event::Write {
                token,
                elapsed_frames,
                compute_ms,
            } => Some((token, elapsed_frames, compute_ms)),
            Event::Read { .. } => None,
        })
    }

    pub fn tokens(&self) -> Vec<usize> {
        self.writes().map(|w| w.0).collect()
    }

    /// Compact `R4 R4 W W` rendering used in logs and tests.
    pub fn schedule(&self) -> String {
        self.events
            .iter()
            .map(|e| match e {
                Event::Read { frames } => format!("R{frames}"),
                Event::Write { .. } => "W".to_string(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            frame_ms: self.frame_ms,
            source_frames: self.source_frames,
            target_len: self.target_len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for ev in &self.events {
            serde_json::to_writer(&mut out, ev)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses the JSON-lines format; errors name the 1-based line.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| match l {
            Ok(l) => !l.trim().is_empty(),
            Err(_) => true,
        });
        let (_, first) = lines.next().ok_or(Error::MalformedTrace {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| Error::MalformedTrace {
            line: 1,
            message: e.to_string(),
        })?;
        let mut events = Vec::new();
        for (i, line) in lines {
            let ev: Event = serde_json::from_str(&line?).map_err(|e| Error::MalformedTrace {
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(ev);
        }
        let trace = Self::new(header.frame_ms, header.source_frames, events)?;
        if trace.target_len() != header.target_len {
            return Err(Error::MalformedTrace {
                line: 1,
                message: format!(
                    "header declares {} targets, trace writes {}",
                    header.target_len,
                    trace.target_len()
                ),
            });
        }
        Ok(trace)
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        Self::read_jsonl(s.as_bytes())
    }
}

/// Incremental trace construction that keeps elapsed-frame accounting consistent.
#[derive(Debug, Clone)]
pub struct TraceBuilder {
    frame_ms: f64,
    source_frames: usize,
    read: usize,
    events: Vec<Event>,
}

impl TraceBuilder {
    pub fn new(frame_ms: f64, source_frames: usize) -> Self {
        Self {
            frame_ms,
            source_frames,
            read: 0,
            events: Vec::new(),
        }
    }

    pub fn read(&mut self, frames: usize) -> &mut Self {
        if frames > 0 {
            self.read += frames;
            self.events.push(Event::Read { frames });
        }
        self
    }

    pub fn write(&mut self, token: usize, compute_ms: Option<f64>) -> &mut Self {
        self.events.push(Event::Write {
            token,
            elapsed_frames: self.read,
            compute_ms,
        });
        self
    }

    pub fn frames_read(&self) -> usize {
        self.read
    }

    pub fn finish(self) -> Result<ReadWriteTrace> {
        ReadWriteTrace::new(self.frame_ms, self.source_frames, self.events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> ReadWriteTrace {
        let mut b = TraceBuilder::new(40.0, 12);
        b.read(4)
            .read(4)
            .write(7, Some(1.25))
            .write(3, None)
            .read(4)
            .write(1, Some(0.0));
        b.finish().unwrap()
    }

    #[test]
    fn schedule_and_writes() {
        let t = fixture();
        assert_eq!(t.schedule(), "R4 R4 W W R4 W");
        let elapsed: Vec<_> = t.writes().map(|w| w.1).collect();
        assert_eq!(elapsed, vec![8, 8, 12]);
        assert_eq!(t.target_len(), 3);
    }

    #[test]
    fn jsonl_layout() {
        let text = fixture().to_jsonl();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], r#"{"frame_ms":40.0,"source_frames":12,"target_len":3}"#);
        assert_eq!(lines[1], r#"{"type":"read","frames":4}"#);
        assert_eq!(
            lines[3],
            r#"{"type":"write","token":7,"elapsed_frames":8,"compute_ms":1.25}"#
        );
        assert_eq!(lines[4], r#"{"type":"write","token":3,"elapsed_frames":8}"#);
    }

    #[test]
    fn rejects_inconsistent_writes() {
        let events = vec![
            Event::Read { frames: 2 },
            Event::Write {
                token: 0,
                elapsed_frames: 3,
                compute_ms: None,
            },
        ];
        assert!(ReadWriteTrace::new(40.0, 4, events).is_err());
        assert!(ReadWriteTrace::new(40.0, 1, vec![Event::Read { frames: 2 }]).is_err());
    }

    #[test]
    fn parse_error_names_line() {
        let text = "{\"frame_ms\":40,\"source_frames\":4,\"target_len\":0}\n{\"type\":\"read\",\"frames\":2}\n{\"type\":\"jump\"}\n";
        match ReadWriteTrace::from_jsonl(text) {
            Err(Error::MalformedTrace { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_trace() -> impl Strategy<Value = ReadWriteTrace> {
        (
            1.0f64..100.0,
            prop::collection::vec(
                (any::<bool>(), 0usize..20, 0usize..50, prop::option::of(0.0f64..1e4)),
                0..40,
            ),
        )
            .prop_map(|(ms, steps)| {
                let total: usize = steps.iter().filter(|s| s.0).map(|s| s.1).sum();
                let mut b = TraceBuilder::new(ms, total + 3);
                for (is_read, n, tok, c) in steps {
                    if is_read {
                        b.read(n);
                    } else {
                        b.write(tok, c);
                    }
                }
                b.finish().unwrap()
            })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(t in arb_trace()) {
            let back = ReadWriteTrace::from_jsonl(&t.to_jsonl()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
