//! Binary framing for the public sifting channel.
//!
//! ```text
//! frame   := length:u32le  type:u8  payload
//! length  := 1 + len(payload)            (bytes following the length field)
//!
//! 0x01 BASIS_ANNOUNCE  count:u32le  bits   (0 = Z, 1 = Y)
//! 0x02 DETECTED_MASK   count:u32le  bits   (1 = detected)
//! 0x03 SAMPLE_INDICES  count:u32le  index:u32le * count
//! 0x04 SAMPLE_BITS     count:u32le  bits
//! 0x05 QBER_REPORT     qber:f64le  sample_size:u32le  error_count:u32le
//! ```
//!
//! Bits are packed most-significant-bit first; padding bits must be zero.
//! A bit or index frame with an entirely empty payload decodes as zero items.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::protocol::Basis;

pub const MAX_FRAME_LEN: usize = 64 << 20;

const HEADER_LEN: usize = 4;

pub const TYPE_BASIS_ANNOUNCE: u8 = 0x01;
pub const TYPE_DETECTED_MASK: u8 = 0x02;
pub const TYPE_SAMPLE_INDICES: u8 = 0x03;
pub const TYPE_SAMPLE_BITS: u8 = 0x04;
pub const TYPE_QBER_REPORT: u8 = 0x05;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("malformed frame: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassicalMessage {
    BasisAnnounce(Vec<Basis>),
    DetectedMask(Vec<bool>),
    SampleIndices(Vec<u32>),
    SampleBits(Vec<bool>),
    QberReport {
        qber: f64,
        sample_size: u32,
        error_count: u32,
    },
}

impl ClassicalMessage {
    pub fn type_tag(&self) -> u8 {
        match self {
            Self::BasisAnnounce(_) => TYPE_BASIS_ANNOUNCE,
            Self::DetectedMask(_) => TYPE_DETECTED_MASK,
            Self::SampleIndices(_) => TYPE_SAMPLE_INDICES,
            Self::SampleBits(_) => TYPE_SAMPLE_BITS,
            Self::QberReport { .. } => TYPE_QBER_REPORT,
        }
    }
}

fn count_u32(n: usize) -> Result<u32, CodecError> {
    u32::try_from(n).map_err(|_| CodecError::Malformed(format!("{n} items exceed u32 count")))
}

fn push_bits(out: &mut Vec<u8>, bits: impl ExactSizeIterator<Item = bool>) -> Result<(), CodecError> {
    out.extend_from_slice(&count_u32(bits.len())?.to_le_bytes());
    let mut byte = 0u8;
    let mut filled = 0;
    for bit in bits {
        byte |= u8::from(bit) << (7 - filled);
        filled += 1;
        if filled == 8 {
            out.push(byte);
            byte = 0;
            filled = 0;
        }
    }
    if filled > 0 {
        out.push(byte);
    }
    Ok(())
}

pub fn encode(msg: &ClassicalMessage) -> Result<Vec<u8>, CodecError> {
    let mut payload = Vec::new();
    match msg {
        ClassicalMessage::BasisAnnounce(bases) => {
            push_bits(&mut payload, bases.iter().map(|&b| b == Basis::Y))?
        }
        ClassicalMessage::DetectedMask(bits) | ClassicalMessage::SampleBits(bits) => {
            push_bits(&mut payload, bits.iter().copied())?
        }
        ClassicalMessage::SampleIndices(indices) => {
            payload.extend_from_slice(&count_u32(indices.len())?.to_le_bytes());
            for i in indices {
                payload.extend_from_slice(&i.to_le_bytes());
            }
        }
        ClassicalMessage::QberReport {
            qber,
            sample_size,
            error_count,
        } => {
            payload.extend_from_slice(&qber.to_le_bytes());
            payload.extend_from_slice(&sample_size.to_le_bytes());
            payload.extend_from_slice(&error_count.to_le_bytes());
        }
    }
    let body_len = payload.len() + 1;
    if body_len > MAX_FRAME_LEN {
        return Err(CodecError::Malformed(format!(
            "frame body of {body_len} bytes exceeds {MAX_FRAME_LEN}"
        )));
    }
    let mut frame = Vec::with_capacity(HEADER_LEN + body_len);
    frame.extend_from_slice(&(body_len as u32).to_le_bytes());
    frame.push(msg.type_tag());
    frame.extend_from_slice(&payload);
    Ok(frame)
}

fn read_u32(bytes: &[u8]) -> u32 {
    u32::from_le_bytes(bytes[..4].try_into().expect("four bytes"))
}

fn split_count(payload: &[u8]) -> Result<(usize, &[u8]), CodecError> {
    if payload.len() < 4 {
        return Err(CodecError::LengthMismatch(format!(
            "payload of {} bytes cannot hold a count",
            payload.len()
        )));
    }
    Ok((read_u32(payload) as usize, &payload[4..]))
}

fn unpack_bits(payload: &[u8]) -> Result<Vec<bool>, CodecError> {
    if payload.is_empty() {
        return Ok(Vec::new());
    }
    let (count, packed) = split_count(payload)?;
    let expected = count.div_ceil(8);
    if packed.len() != expected {
        return Err(CodecError::LengthMismatch(format!(
            "{count} bits need {expected} bytes, frame carries {}",
            packed.len()
        )));
    }
    if count % 8 != 0 {
        let pad_mask = 0xffu8 >> (count % 8);
        if packed[expected - 1] & pad_mask != 0 {
            return Err(CodecError::Malformed("non-zero padding bits".into()));
        }
    }
    Ok((0..count).map(|i| packed[i / 8] & (0x80 >> (i % 8)) != 0).collect())
}

fn decode_payload(tag: u8, payload: &[u8]) -> Result<ClassicalMessage, CodecError> {
    match tag {
        TYPE_BASIS_ANNOUNCE => Ok(ClassicalMessage::BasisAnnounce(
            unpack_bits(payload)?
                .into_iter()
                .map(|y| if y { Basis::Y } else { Basis::Z })
                .collect(),
        )),
        TYPE_DETECTED_MASK => Ok(ClassicalMessage::DetectedMask(unpack_bits(payload)?)),
        TYPE_SAMPLE_BITS => Ok(ClassicalMessage::SampleBits(unpack_bits(payload)?)),
        TYPE_SAMPLE_INDICES => {
            if payload.is_empty() {
                return Ok(ClassicalMessage::SampleIndices(Vec::new()));
            }
            let (count, rest) = split_count(payload)?;
            if Some(rest.len()) != count.checked_mul(4) {
                return Err(CodecError::LengthMismatch(format!(
                    "{count} indices need {} bytes, frame carries {}",
                    count.saturating_mul(4),
                    rest.len()
                )));
            }
            Ok(ClassicalMessage::SampleIndices(
                rest.chunks_exact(4).map(read_u32).collect(),
            ))
        }
        TYPE_QBER_REPORT => {
            if payload.len() != 16 {
                return Err(CodecError::LengthMismatch(format!(
                    "QBER report payload is {} bytes, expected 16",
                    payload.len()
                )));
            }
            Ok(ClassicalMessage::QberReport {
                qber: f64::from_le_bytes(payload[..8].try_into().expect("eight bytes")),
                sample_size: read_u32(&payload[8..]),
                error_count: read_u32(&payload[12..]),
            })
        }
        other => Err(CodecError::UnknownType(other)),
    }
}

/// Decodes the frame at the start of `bytes`; returns it with the bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(ClassicalMessage, usize), CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let body_len = read_u32(bytes) as usize;
    if body_len == 0 {
        return Err(CodecError::Malformed("frame without a type byte".into()));
    }
    if body_len > MAX_FRAME_LEN {
        return Err(CodecError::Malformed(format!(
            "declared body of {body_len} bytes exceeds {MAX_FRAME_LEN}"
        )));
    }
    let total = HEADER_LEN + body_len;
    if bytes.len() < total {
        return Err(CodecError::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    let msg = decode_payload(bytes[HEADER_LEN], &bytes[HEADER_LEN + 1..total])?;
    Ok((msg, total))
}

/// Decodes exactly one frame; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<ClassicalMessage, CodecError> {
    let (msg, used) = decode_frame(bytes)?;
    if used != bytes.len() {
        return Err(CodecError::LengthMismatch(format!(
            "{} trailing bytes after frame",
            bytes.len() - used
        )));
    }
    Ok(msg)
}

fn invalid_data(e: CodecError) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

pub fn write_frame<W: Write>(writer: &mut W, msg: &ClassicalMessage) -> io::Result<()> {
    writer.write_all(&encode(msg).map_err(invalid_data)?)
}

pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<ClassicalMessage> {
    let mut header = [0u8; HEADER_LEN];
    reader.read_exact(&mut header)?;
    let body_len = u32::from_le_bytes(header) as usize;
    if body_len == 0 || body_len > MAX_FRAME_LEN {
        return Err(invalid_data(CodecError::Malformed(format!(
            "declared body length {body_len}"
        ))));
    }
    let mut frame = header.to_vec();
    frame.resize(HEADER_LEN + body_len, 0);
    reader.read_exact(&mut frame[HEADER_LEN..])?;
    decode(&frame).map_err(invalid_data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_announcement_roundtrip_and_layout() {
        let msg = ClassicalMessage::BasisAnnounce(vec![Basis::Y, Basis::Z, Basis::Y]);
        let bytes = encode(&msg).unwrap();
        assert_eq!(bytes, [6, 0, 0, 0, 0x01, 3, 0, 0, 0, 0b1010_0000]);
        assert_eq!(decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn empty_messages() {
        let msg = ClassicalMessage::BasisAnnounce(Vec::new());
        assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
        // Type byte only, no payload at all.
        assert_eq!(decode(&[1, 0, 0, 0, 0x02]).unwrap(), ClassicalMessage::DetectedMask(Vec::new()));
    }

    #[test]
    fn qber_report_layout() {
        let msg = ClassicalMessage::QberReport {
            qber: 0.0404,
            sample_size: 1000,
            error_count: 40,
        };
        let bytes = encode(&msg).unwrap();
        assert_eq!(bytes.len(), 4 + 1 + 16);
        assert_eq!(&bytes[..5], &[17, 0, 0, 0, 0x05]);
        assert_eq!(&bytes[5..13], &0.0404f64.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn truncated_frame_rejected() {
        let bytes = encode(&ClassicalMessage::SampleIndices(vec![3, 9, 27])).unwrap();
        for cut in 0..bytes.len() {
            assert!(decode(&bytes[..cut]).is_err(), "prefix of {cut} bytes accepted");
        }
    }

    #[test]
    fn unknown_type_and_inconsistent_payloads() {
        assert_eq!(decode(&[1, 0, 0, 0, 0x09]), Err(CodecError::UnknownType(9)));
        // Count says 9 bits but only one byte follows.
        assert!(matches!(
            decode(&[6, 0, 0, 0, 0x04, 9, 0, 0, 0, 0xff]),
            Err(CodecError::LengthMismatch(_))
        ));
        // Padding bit set.
        assert!(matches!(
            decode(&[6, 0, 0, 0, 0x04, 3, 0, 0, 0, 0b0001_0000]),
            Err(CodecError::Malformed(_))
        ));
        assert!(matches!(decode(&[0, 0, 0, 0]), Err(CodecError::Malformed(_))));
        let mut bytes = encode(&ClassicalMessage::SampleBits(vec![true])).unwrap();
        bytes.push(0);
        assert!(matches!(decode(&bytes), Err(CodecError::LengthMismatch(_))));
    }

    #[test]
    fn stream_io() {
        let msgs = [
            ClassicalMessage::DetectedMask(vec![true, false, true, true, false, false, false, true, true]),
            ClassicalMessage::SampleBits(vec![false; 17]),
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut reader = io::Cursor::new(buf);
        for m in &msgs {
            assert_eq!(&read_frame(&mut reader).unwrap(), m);
        }
        assert_eq!(
            read_frame(&mut reader).unwrap_err().kind(),
            io::ErrorKind::UnexpectedEof
        );
    }
}
