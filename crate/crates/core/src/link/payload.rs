use super::{Link, LinkError};
use crate::seed;

/// Domain separator for payload frame seeds.
const PAYLOAD_STREAM: u64 = 0x5041_594c_4f41_44;

/// Most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Inverse of [`bytes_to_bits`]; a trailing partial byte is dropped.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks_exact(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayloadOutcome {
    /// Reassembled payload, cut to the length carried in the received
    /// header (or to the sent length when the header arrived corrupted).
    pub bytes: Vec<u8>,
    /// Received body aligned byte-for-byte with the sent payload.
    pub body: Vec<u8>,
    /// Bit errors over header and body.
    pub bit_errors: usize,
    pub bits: usize,
    pub ber: f64,
    /// Body bytes differing from the sent payload.
    pub byte_errors: usize,
    pub frames: usize,
}

/// Sends `payload` behind a 4-byte little-endian length header. The bit
/// stream is cut into information blocks (the last one zero-padded) and
/// carried over as many frames as needed; frame `f` uses seed
/// `derive(seed, stream, f)`.
pub fn payload_roundtrip(
    link: &Link,
    payload: &[u8],
    snr_db: f64,
    seed: u64,
) -> Result<PayloadOutcome, LinkError> {
    if payload.is_empty() {
        return Err(LinkError::Usage("payload is empty".into()));
    }
    let len = u32::try_from(payload.len())
        .map_err(|_| LinkError::Usage("payload longer than 4 GiB".into()))?;
    let mut framed = len.to_le_bytes().to_vec();
    framed.extend_from_slice(payload);
    let bits = bytes_to_bits(&framed);

    let per_frame = link.layout().info_bits();
    let frames = bits.len().div_ceil(per_frame);
    let mut rx_bits = Vec::with_capacity(frames * per_frame);
    for f in 0..frames {
        let mut info = bits[(f * per_frame).min(bits.len())..((f + 1) * per_frame).min(bits.len())].to_vec();
        info.resize(per_frame, 0);
        let out = link.transmit_info(&info, snr_db, seed::derive(seed, PAYLOAD_STREAM, f as u64))?;
        rx_bits.extend(out.rx_info);
    }
    rx_bits.truncate(bits.len());

    let bit_errors = rx_bits.iter().zip(&bits).filter(|(a, b)| a != b).count();
    let rx = bits_to_bytes(&rx_bits);
    let body = rx[4..].to_vec();
    let byte_errors = body.iter().zip(payload).filter(|(a, b)| a != b).count();
    let claimed = u32::from_le_bytes(rx[..4].try_into().unwrap()) as usize;
    let keep = if claimed <= body.len() { claimed } else { body.len() };
    Ok(PayloadOutcome {
        bytes: body[..keep].to_vec(),
        body,
        bit_errors,
        bits: bits.len(),
        ber: bit_errors as f64 / bits.len() as f64,
        byte_errors,
        frames,
    })
}
