use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::exec::{Deployment, DeploymentDescriptor, Step};
use super::session::{spawn_receiver, spawn_sender, Event, WireStats};
use super::wire::{parse_header, Frame, MsgType, HEADER_LEN, MAGIC};
use crate::design_space::Side;
use crate::error::{Error, Result};

pub const EDGE_HELLO: &[u8] = b"coforge-edge";

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConfig {
    /// Pace replies to this many bits per second.
    pub throttle_bps: Option<f64>,
    pub queue_capacity: usize,
    /// Stop after this many sessions; `None` serves forever.
    pub max_sessions: Option<usize>,
    /// Test hook: sleep once before processing the first message of this batch.
    pub stall: Option<(u32, Duration)>,
    /// Keep a copy of every byte sent, for transcript checks.
    pub record_transcript: bool,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            throttle_bps: None,
            queue_capacity: 8,
            max_sessions: None,
            stall: None,
            record_transcript: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub batches_served: usize,
    pub frames_in: usize,
    pub frames_out: usize,
    pub bytes_in: u64,
    pub bytes_out: u64,
    #[serde(skip)]
    pub transcript: Vec<u8>,
    pub error: Option<String>,
}

/// Binds `addr` and serves sessions one after another.
pub fn serve_edge(addr: impl ToSocketAddrs, cfg: &EdgeConfig) -> Result<()> {
    let listener = TcpListener::bind(addr)?;
    log::info!("edge listening on {}", listener.local_addr()?);
    serve_listener(&listener, cfg)
}

pub fn serve_listener(listener: &TcpListener, cfg: &EdgeConfig) -> Result<()> {
    let mut served = 0;
    while cfg.max_sessions.is_none_or(|m| served < m) {
        let (stream, peer) = listener.accept()?;
        served += 1;
        match handle_session(stream, cfg) {
            Ok(r) if r.error.is_none() => log::info!("session with {peer} done: {} batches", r.batches_served),
            Ok(r) => log::warn!("session with {peer} ended: {}", r.error.unwrap_or_default()),
            Err(e) => log::warn!("session with {peer} rejected: {e}"),
        }
    }
    Ok(())
}

/// Reads the opening HELLO. Bad magic closes silently; any other header
/// problem is answered with a BYE carrying the reason.
fn read_hello(stream: &mut TcpStream) -> Result<Frame> {
    let mut header = [0u8; HEADER_LEN];
    stream.read_exact(&mut header)?;
    if header[..4] != MAGIC {
        return Err(Error::Protocol(format!("bad magic {:02x?}", &header[..4])));
    }
    let reject = |stream: &mut TcpStream, e: Error| {
        let _ = stream.write_all(&Frame::new(MsgType::Bye, 0, e.to_string().into_bytes()).encode());
        e
    };
    let (mut frame, len) = match parse_header(&header) {
        Ok(v) => v,
        Err(e) => return Err(reject(stream, e)),
    };
    frame.payload = vec![0; len as usize];
    stream.read_exact(&mut frame.payload)?;
    if frame.msg_type != MsgType::Hello {
        return Err(reject(stream, Error::Protocol(format!("expected HELLO, got {:?}", frame.msg_type))));
    }
    Ok(frame)
}

/// Serves one device connection to completion.
pub fn handle_session(mut stream: TcpStream, cfg: &EdgeConfig) -> Result<SessionReport> {
    stream.set_nodelay(true)?;
    let hello = read_hello(&mut stream)?;
    let mut stats_in = WireStats::default();
    stats_in.count(&hello);

    let (out_tx, out_rx) = sync_channel::<Frame>(cfg.queue_capacity.max(1));
    let (ev_tx, ev_rx) = sync_channel::<Event>(cfg.queue_capacity.max(1));
    let sender = spawn_sender(stream.try_clone()?, cfg.throttle_bps, out_rx, cfg.record_transcript);
    let receiver = spawn_receiver(stream.try_clone()?, ev_tx);

    let mut state = EdgeState { deployment: None, cursors: HashMap::new(), stall: cfg.stall, served: 0 };
    let outcome = (|| -> Result<Option<String>> {
        send(&out_tx, Frame::new(MsgType::Hello, 0, EDGE_HELLO.to_vec()))?;
        for ev in ev_rx.iter() {
            match ev {
                Event::Frame(f) => {
                    if f.msg_type == MsgType::Bye {
                        send(&out_tx, Frame::new(MsgType::Bye, 0, Vec::new()))?;
                        return Ok(None);
                    }
                    if let Err(e) = state.handle(f, &out_tx) {
                        log::warn!("edge session error: {e}");
                        let _ = out_tx.send(Frame::new(MsgType::Bye, 0, e.to_string().into_bytes()));
                        return Ok(Some(e.to_string()));
                    }
                }
                Event::Closed(err) => return Ok(Some(err.unwrap_or_else(|| "device closed the connection".into()))),
            }
        }
        Ok(Some("receiver stopped".into()))
    })();
    drop(out_tx);
    let sent = sender.join().expect("sender thread")?;
    let _ = stream.shutdown(Shutdown::Both);
    let recv = receiver.join().expect("receiver thread");
    Ok(SessionReport {
        batches_served: state.served,
        frames_in: stats_in.frames + recv.frames,
        frames_out: sent.frames,
        bytes_in: stats_in.bytes + recv.bytes,
        bytes_out: sent.bytes,
        transcript: sent.transcript,
        error: outcome?,
    })
}

fn send(tx: &SyncSender<Frame>, f: Frame) -> Result<()> {
    tx.send(f).map_err(|_| Error::Protocol("sender worker stopped".into()))
}

struct EdgeState {
    deployment: Option<Deployment>,
    cursors: HashMap<u32, usize>,
    stall: Option<(u32, Duration)>,
    served: usize,
}

impl EdgeState {
    fn handle(&mut self, f: Frame, out: &SyncSender<Frame>) -> Result<()> {
        match f.msg_type {
            MsgType::Arch => {
                if !self.cursors.is_empty() {
                    return Err(Error::Protocol("ARCH while batches are in flight".into()));
                }
                let desc = DeploymentDescriptor::from_bytes(&super::wire::unpack(f.flags, &f.payload)?)?;
                self.deployment = Some(Deployment::new(desc));
                send(out, Frame::new(MsgType::Ack, f.batch_id, Vec::new()))
            }
            MsgType::Tensor | MsgType::Graph => {
                let dep = self
                    .deployment
                    .as_ref()
                    .ok_or_else(|| Error::Protocol("tensor before ARCH".into()))?;
                if let Some((b, d)) = self.stall {
                    if b == f.batch_id {
                        self.stall = None;
                        std::thread::sleep(d);
                    }
                }
                let b = f.batch_id;
                let cursor = self.cursors.entry(b).or_insert(0);
                let (st, _) = dep.receive(Side::Edge, cursor, &f)?;
                match dep.advance(Side::Edge, cursor, b, st)? {
                    Step::Send(frame, _) => {
                        if dep.side_done(Side::Edge, *cursor) {
                            self.cursors.remove(&b);
                            self.served += 1;
                        }
                        send(out, frame)
                    }
                    Step::Finished(frame) => {
                        self.cursors.remove(&b);
                        self.served += 1;
                        send(out, frame)
                    }
                    Step::Done(_) => Err(Error::Protocol("edge cannot finish a device batch".into())),
                }
            }
            t => Err(Error::Protocol(format!("unexpected {t:?} from device"))),
        }
    }
}
