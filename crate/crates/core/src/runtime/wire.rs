//! Length-prefixed frames and payload codecs.
//!
//! Every frame starts with a 15-byte little-endian header:
//!
//! ```text
//! magic "CFG1" | version u8 | msg_type u8 | batch_id u32 | flags u8 | payload_len u32
//! ```

use std::io::{self, Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CFG1";
pub const PROTOCOL_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 15;
pub const FLAG_COMPRESSED: u8 = 0b1;
/// Payloads above this many bytes are compressed when a codec is enabled.
pub const DEFAULT_COMPRESS_THRESHOLD: usize = 4096;
/// Upper bound on accepted payloads, to reject corrupt length fields early.
pub const MAX_PAYLOAD: u32 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    Arch = 2,
    Tensor = 3,
    Graph = 4,
    Result = 5,
    Ack = 6,
    Bye = 7,
}

impl MsgType {
    pub const ALL: [MsgType; 7] = [
        MsgType::Hello,
        MsgType::Arch,
        MsgType::Tensor,
        MsgType::Graph,
        MsgType::Result,
        MsgType::Ack,
        MsgType::Bye,
    ];

    pub fn from_u8(v: u8) -> Result<Self> {
        MsgType::ALL
            .into_iter()
            .find(|t| *t as u8 == v)
            .ok_or_else(|| Error::Protocol(format!("unknown message type {v}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub batch_id: u32,
    pub flags: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, batch_id: u32, payload: Vec<u8>) -> Self {
        Frame { msg_type, batch_id, flags: 0, payload }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn is_compressed(&self) -> bool {
        self.flags & FLAG_COMPRESSED != 0
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&MAGIC);
        out.push(PROTOCOL_VERSION);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.batch_id.to_le_bytes());
        out.push(self.flags);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Protocol(format!("frame of {} bytes is shorter than the header", bytes.len())));
        }
        let header: [u8; HEADER_LEN] = bytes[..HEADER_LEN].try_into().expect("header length");
        let (mut frame, len) = parse_header(&header)?;
        if bytes.len() - HEADER_LEN != len as usize {
            return Err(Error::Protocol(format!(
                "payload_len {len} but {} payload bytes",
                bytes.len() - HEADER_LEN
            )));
        }
        frame.payload = bytes[HEADER_LEN..].to_vec();
        Ok(frame)
    }
}

/// Validates a header; returns the frame skeleton and the payload length.
pub fn parse_header(h: &[u8; HEADER_LEN]) -> Result<(Frame, u32)> {
    if h[..4] != MAGIC {
        return Err(Error::Protocol(format!("bad magic {:02x?}", &h[..4])));
    }
    if h[4] != PROTOCOL_VERSION {
        return Err(Error::Protocol(format!(
            "protocol version {} not supported (expected {PROTOCOL_VERSION})",
            h[4]
        )));
    }
    let msg_type = MsgType::from_u8(h[5])?;
    let batch_id = u32::from_le_bytes(h[6..10].try_into().expect("4 bytes"));
    let flags = h[10];
    if flags & !FLAG_COMPRESSED != 0 {
        return Err(Error::Protocol(format!("unknown flag bits {flags:#04x}")));
    }
    let len = u32::from_le_bytes(h[11..15].try_into().expect("4 bytes"));
    if len > MAX_PAYLOAD {
        return Err(Error::Protocol(format!("payload_len {len} exceeds limit")));
    }
    Ok((Frame { msg_type, batch_id, flags, payload: Vec::new() }, len))
}

/// Reads one frame; `Ok(None)` on a clean end of stream before any header byte.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Protocol(format!("stream ended inside a header after {got} bytes"))),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (mut frame, len) = parse_header(&header)?;
    frame.payload = vec![0; len as usize];
    r.read_exact(&mut frame.payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Protocol(format!("stream ended inside a {len}-byte payload")),
        _ => e.into(),
    })?;
    Ok(Some(frame))
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<()> {
    w.write_all(&frame.encode())?;
    Ok(())
}

/// Lossless payload codec negotiated through the deployment descriptor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Codec {
    Identity,
    #[default]
    Deflate,
}

impl Codec {
    /// Encodes `raw`, returning the flags to set and the bytes to send.
    pub fn pack(self, raw: Vec<u8>, threshold: usize) -> (u8, Vec<u8>) {
        match self {
            Codec::Deflate if raw.len() > threshold => {
                let mut enc = DeflateEncoder::new(Vec::with_capacity(raw.len() / 2), Compression::fast());
                enc.write_all(&raw).expect("in-memory write");
                (FLAG_COMPRESSED, enc.finish().expect("in-memory write"))
            }
            _ => (0, raw),
        }
    }
}

/// Restores the raw payload of a frame; the compressed flag alone decides.
pub fn unpack(flags: u8, payload: &[u8]) -> Result<Vec<u8>> {
    if flags & FLAG_COMPRESSED == 0 {
        return Ok(payload.to_vec());
    }
    let mut out = Vec::with_capacity(payload.len() * 2);
    DeflateDecoder::new(payload)
        .read_to_end(&mut out)
        .map_err(|e| Error::Protocol(format!("corrupt compressed payload: {e}")))?;
    Ok(out)
}
