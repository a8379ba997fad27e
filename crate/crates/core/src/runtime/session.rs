use std::io::{BufWriter, Write};
use std::net::TcpStream;
use std::sync::mpsc::{Receiver, SyncSender};
use std::thread::{self, JoinHandle};

use super::throttle::Throttled;
use super::wire::{read_frame, Frame, MsgType};
use crate::error::Result;

/// What a receiver worker hands to the compute worker.
#[derive(Debug)]
pub(crate) enum Event {
    Frame(Frame),
    /// The peer closed the stream; `Some` carries the failure.
    Closed(Option<String>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct WireStats {
    pub frames: usize,
    pub bytes: u64,
    /// Bytes of HELLO, ARCH, ACK and BYE frames.
    pub session_bytes: u64,
    pub payload_bytes: u64,
    pub transcript: Vec<u8>,
}

impl WireStats {
    pub fn count(&mut self, f: &Frame) {
        self.frames += 1;
        self.bytes += f.wire_len() as u64;
        match f.msg_type {
            MsgType::Tensor | MsgType::Graph | MsgType::Result => self.payload_bytes += f.payload.len() as u64,
            _ => self.session_bytes += f.wire_len() as u64,
        }
    }
}

/// Writes queued frames in order until the queue closes or BYE was written.
pub(crate) fn spawn_sender(
    stream: TcpStream,
    throttle_bps: Option<f64>,
    rx: Receiver<Frame>,
    record: bool,
) -> JoinHandle<Result<WireStats>> {
    thread::spawn(move || {
        let mut w = BufWriter::with_capacity(64 * 1024, Throttled::new(stream, throttle_bps));
        let mut stats = WireStats::default();
        for frame in rx {
            let bytes = frame.encode();
            w.write_all(&bytes)?;
            w.flush()?;
            stats.count(&frame);
            if record {
                stats.transcript.extend_from_slice(&bytes);
            }
            if frame.msg_type == MsgType::Bye {
                break;
            }
        }
        w.flush()?;
        Ok(stats)
    })
}

/// Reads frames into the compute queue until BYE, end of stream or an error.
pub(crate) fn spawn_receiver(mut stream: TcpStream, tx: SyncSender<Event>) -> JoinHandle<WireStats> {
    thread::spawn(move || {
        let mut stats = WireStats::default();
        loop {
            match read_frame(&mut stream) {
                Ok(Some(f)) => {
                    stats.count(&f);
                    let bye = f.msg_type == MsgType::Bye;
                    if tx.send(Event::Frame(f)).is_err() || bye {
                        break;
                    }
                }
                Ok(None) => {
                    let _ = tx.send(Event::Closed(None));
                    break;
                }
                Err(e) => {
                    let _ = tx.send(Event::Closed(Some(e.to_string())));
                    break;
                }
            }
        }
        stats
    })
}
