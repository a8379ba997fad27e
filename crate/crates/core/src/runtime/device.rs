use std::collections::HashMap;
use std::io::Write;
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{sync_channel, Receiver, RecvTimeoutError, SyncSender, TryRecvError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::edge::EDGE_HELLO;
use super::exec::{tensor_digest, Deployment, DeploymentDescriptor, Step};
use super::kernels::ExecState;
use super::session::{spawn_receiver, spawn_sender, Event, WireStats};
use super::wire::{read_frame, Codec, Frame, MsgType, DEFAULT_COMPRESS_THRESHOLD};
use crate::design_space::{Architecture, Side};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Batches allowed in flight at once; 1 runs them strictly one after another.
    pub pipeline_depth: usize,
    /// Pace the sender to this many bits per second.
    pub throttle_bps: Option<f64>,
    pub codec: Codec,
    pub compress_threshold: usize,
    pub weight_seed: u64,
    pub input_seed: u64,
    /// Identity Combine weights on both sides.
    pub test_mode: bool,
    pub queue_capacity: usize,
    /// Give up on a silent edge after this long.
    pub io_timeout: Duration,
    pub record_transcript: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline_depth: 2,
            throttle_bps: None,
            codec: Codec::Deflate,
            compress_threshold: DEFAULT_COMPRESS_THRESHOLD,
            weight_seed: 0,
            input_seed: 0,
            test_mode: false,
            queue_capacity: 8,
            io_timeout: Duration::from_secs(30),
            record_transcript: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub batch_id: u32,
    /// Seconds since the run started.
    pub start_s: f64,
    pub end_s: f64,
    pub latency_s: f64,
    pub device_compute_s: f64,
    /// Digest of the output tensor, see [`tensor_digest`].
    pub output_digest: String,
    pub output_shape: (usize, usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Completed batches in completion order.
    pub batches: Vec<BatchReport>,
    /// Batches admitted but not completed when the run stopped.
    pub failed_batches: Vec<u32>,
    pub pipeline_depth: usize,
    pub wall_s: f64,
    pub throughput_ips: f64,
    pub mean_latency_s: f64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Bytes of HELLO, ARCH, ACK and BYE frames in both directions.
    pub session_bytes: u64,
    /// Uncompressed size of every tensor payload in both directions.
    pub raw_payload_bytes: u64,
    /// The same payloads as carried on the wire.
    pub wire_payload_bytes: u64,
    /// `wire_payload_bytes / raw_payload_bytes`, 1 when nothing was sent.
    pub compression_ratio: f64,
    pub error: Option<String>,
    /// Every byte the device sent, when recording was requested.
    #[serde(skip)]
    pub transcript: Vec<u8>,
}

impl RunReport {
    pub fn batch(&self, batch_id: u32) -> Option<&BatchReport> {
        self.batches.iter().find(|b| b.batch_id == batch_id)
    }
}

struct InFlight {
    cursor: usize,
    start: Instant,
    compute: Duration,
}

/// Connects to an edge, deploys `arch` and pushes `num_batches` seeded batches through it.
///
/// Handshake failures are errors. A connection lost mid-run ends the run
/// with a partial report whose `error` is set.
pub fn run_device(addr: impl ToSocketAddrs, arch: &Architecture, num_batches: u32, cfg: &RunConfig) -> Result<RunReport> {
    if cfg.pipeline_depth == 0 {
        return Err(Error::Precondition("pipeline depth must be >= 1".into()));
    }
    let desc = DeploymentDescriptor {
        compress_threshold: cfg.compress_threshold,
        ..DeploymentDescriptor::new(arch, cfg.codec, cfg.weight_seed, cfg.test_mode)?
    };
    let dep = Deployment::new(desc);
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(cfg.io_timeout))?;

    let mut hs_out = WireStats::default();
    let mut hs_in = WireStats::default();
    let mut exchange = |stream: &mut TcpStream, frame: Frame, want: MsgType| -> Result<Frame> {
        let bytes = frame.encode();
        stream.write_all(&bytes)?;
        hs_out.count(&frame);
        if cfg.record_transcript {
            hs_out.transcript.extend_from_slice(&bytes);
        }
        let reply = read_frame(stream)?.ok_or_else(|| Error::Protocol("edge closed during handshake".into()))?;
        hs_in.count(&reply);
        if reply.msg_type == MsgType::Bye {
            return Err(Error::Protocol(format!("edge refused: {}", String::from_utf8_lossy(&reply.payload))));
        }
        if reply.msg_type != want {
            return Err(Error::Protocol(format!("expected {want:?}, got {:?}", reply.msg_type)));
        }
        Ok(reply)
    };
    let hello = exchange(&mut stream, Frame::new(MsgType::Hello, 0, b"coforge-device".to_vec()), MsgType::Hello)?;
    if hello.payload != EDGE_HELLO {
        return Err(Error::Protocol("peer is not a coforge edge".into()));
    }
    let (flags, payload) = dep.desc.codec.pack(dep.desc.to_bytes(), dep.desc.compress_threshold);
    exchange(&mut stream, Frame { msg_type: MsgType::Arch, batch_id: 0, flags, payload }, MsgType::Ack)?;
    stream.set_read_timeout(None)?;

    let capacity = cfg.queue_capacity.max(cfg.pipeline_depth).max(1);
    let (out_tx, out_rx) = sync_channel::<Frame>(capacity);
    let (ev_tx, ev_rx) = sync_channel::<Event>(capacity);
    let sender = spawn_sender(stream.try_clone()?, cfg.throttle_bps, out_rx, cfg.record_transcript);
    let receiver = spawn_receiver(stream.try_clone()?, ev_tx);

    let mut run = DeviceRun {
        dep: &dep,
        cfg,
        t0: Instant::now(),
        in_flight: HashMap::new(),
        done: Vec::with_capacity(num_batches as usize),
        raw_bytes: 0,
        out: &out_tx,
    };
    let error = run.drive(num_batches, &ev_rx).err().map(|e| e.to_string());
    let wall = run.t0.elapsed().as_secs_f64();
    let (done, raw_bytes) = (std::mem::take(&mut run.done), run.raw_bytes);
    let mut failed: Vec<u32> = run.in_flight.keys().copied().collect();
    failed.sort_unstable();

    if error.is_none() {
        let _ = out_tx.send(Frame::new(MsgType::Bye, 0, Vec::new()));
        wait_for_bye(&ev_rx, cfg.io_timeout);
    }
    drop(out_tx);
    let sent = sender.join().expect("sender thread");
    let _ = stream.shutdown(Shutdown::Both);
    drop(ev_rx);
    let recv = receiver.join().expect("receiver thread");
    let (sent, error) = match sent {
        Ok(s) => (s, error),
        Err(e) => (WireStats::default(), error.or(Some(e.to_string()))),
    };

    let n = done.len();
    let wire_payload = sent.payload_bytes + recv.payload_bytes;
    let mut transcript = hs_out.transcript;
    transcript.extend_from_slice(&sent.transcript);
    Ok(RunReport {
        failed_batches: failed,
        pipeline_depth: cfg.pipeline_depth,
        wall_s: wall,
        throughput_ips: if wall > 0.0 { n as f64 / wall } else { 0.0 },
        mean_latency_s: if n > 0 { done.iter().map(|b| b.latency_s).sum::<f64>() / n as f64 } else { 0.0 },
        bytes_sent: hs_out.bytes + sent.bytes,
        bytes_received: hs_in.bytes + recv.bytes,
        session_bytes: hs_out.session_bytes + hs_in.session_bytes + sent.session_bytes + recv.session_bytes,
        raw_payload_bytes: raw_bytes,
        wire_payload_bytes: wire_payload,
        compression_ratio: if raw_bytes > 0 { wire_payload as f64 / raw_bytes as f64 } else { 1.0 },
        error,
        transcript,
        batches: done,
    })
}

fn wait_for_bye(rx: &Receiver<Event>, timeout: Duration) {
    let deadline = Instant::now() + timeout;
    loop {
        match rx.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
            Ok(Event::Frame(f)) if f.msg_type == MsgType::Bye => return,
            Ok(Event::Frame(f)) => log::warn!("ignoring {:?} after the last batch", f.msg_type),
            Ok(Event::Closed(_)) | Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => return,
        }
    }
}

struct DeviceRun<'a> {
    dep: &'a Deployment,
    cfg: &'a RunConfig,
    t0: Instant,
    in_flight: HashMap<u32, InFlight>,
    done: Vec<BatchReport>,
    raw_bytes: u64,
    out: &'a SyncSender<Frame>,
}

impl DeviceRun<'_> {
    /// Compute worker: incoming frames take priority, then new batches are
    /// admitted while the pipeline has room, otherwise it waits for the edge.
    fn drive(&mut self, num_batches: u32, events: &Receiver<Event>) -> Result<()> {
        let mut next = 0u32;
        while self.done.len() < num_batches as usize {
            match events.try_recv() {
                Ok(ev) => {
                    self.on_event(ev)?;
                    continue;
                }
                Err(TryRecvError::Disconnected) => return Err(Error::Protocol("receiver worker stopped".into())),
                Err(TryRecvError::Empty) => {}
            }
            if next < num_batches && self.in_flight.len() < self.cfg.pipeline_depth {
                self.admit(next)?;
                next += 1;
                continue;
            }
            let ev = events.recv().map_err(|_| Error::Protocol("receiver worker stopped".into()))?;
            self.on_event(ev)?;
        }
        Ok(())
    }

    fn admit(&mut self, batch_id: u32) -> Result<()> {
        let start = Instant::now();
        let state = self.dep.input(self.cfg.input_seed, batch_id);
        self.in_flight.insert(batch_id, InFlight { cursor: 0, start, compute: Duration::ZERO });
        self.step(batch_id, state, start)
    }

    fn on_event(&mut self, ev: Event) -> Result<()> {
        let f = match ev {
            Event::Frame(f) => f,
            Event::Closed(e) => {
                return Err(Error::Protocol(e.unwrap_or_else(|| "edge closed the connection".into())));
            }
        };
        if f.msg_type == MsgType::Bye {
            return Err(Error::Protocol(format!("edge ended the session: {}", String::from_utf8_lossy(&f.payload))));
        }
        let t = Instant::now();
        let b = f.batch_id;
        let fl = self
            .in_flight
            .get_mut(&b)
            .ok_or_else(|| Error::Protocol(format!("{:?} for unknown batch {b}", f.msg_type)))?;
        let (state, _) = self.dep.receive(Side::Device, &mut fl.cursor, &f)?;
        self.raw_bytes += raw_len(&state);
        self.step(b, state, t)
    }

    fn step(&mut self, batch_id: u32, state: ExecState, since: Instant) -> Result<()> {
        let fl = self.in_flight.get_mut(&batch_id).expect("batch in flight");
        let step = self.dep.advance(Side::Device, &mut fl.cursor, batch_id, state)?;
        fl.compute += since.elapsed();
        match step {
            Step::Send(frame, raw) => {
                self.raw_bytes += raw as u64;
                self.out.send(frame).map_err(|_| Error::Protocol("sender worker stopped".into()))
            }
            Step::Done(state) => {
                let fl = self.in_flight.remove(&batch_id).expect("batch in flight");
                let end = Instant::now();
                self.done.push(BatchReport {
                    batch_id,
                    start_s: fl.start.duration_since(self.t0).as_secs_f64(),
                    end_s: end.duration_since(self.t0).as_secs_f64(),
                    latency_s: end.duration_since(fl.start).as_secs_f64(),
                    device_compute_s: fl.compute.as_secs_f64(),
                    output_digest: tensor_digest(&state.x),
                    output_shape: state.x.dim(),
                });
                Ok(())
            }
            Step::Finished(..) => Err(Error::Protocol("device cannot ship a result".into())),
        }
    }
}

fn raw_len(s: &ExecState) -> u64 {
    (s.x.len() * 4 + s.graph.as_ref().map_or(0, |g| g.indices.len() * 8)) as u64
}
