//! Bit-exact MAC PDU construction and parsing.
//!
//! The generic header is 48 bits in this order: HT(1) EC(1) Type(6) RSV(1)
//! CI(1) EKS(2) RSV(1) LEN(11) CID(16) HCS(8), MSB first within each byte.
//! HCS is the CRC-8 (x^8+x^2+x+1, initial 0) of the first five header bytes.
//! When CI is set the PDU carries a trailing CRC-32 over the payload,
//! appended big-endian.

use crate::error::{Error, Result};

pub const HEADER_BYTES: usize = 6;
pub const HEADER_BITS: usize = 48;
/// LEN is an 11-bit byte count.
pub const MAX_PDU_BYTES: usize = 2047;

/// Header flags supplied by the caller; LEN and HCS are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacFlags {
    pub ht: bool,
    pub ec: bool,
    /// 6-bit payload type.
    pub ptype: u8,
    /// CRC indicator: appends CRC-32 over the payload.
    pub ci: bool,
    /// 2-bit encryption key sequence.
    pub eks: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacHeader {
    pub ht: bool,
    pub ec: bool,
    pub ptype: u8,
    pub rsv1: bool,
    pub ci: bool,
    pub eks: u8,
    pub rsv2: bool,
    /// Total PDU length in bytes, header and CRC included.
    pub len: u16,
    pub cid: u16,
    pub hcs: u8,
}

impl MacHeader {
    /// First five header bytes (everything HCS covers).
    fn pack_prefix(&self) -> [u8; 5] {
        [
            (self.ht as u8) << 7 | (self.ec as u8) << 6 | (self.ptype & 0x3f),
            (self.rsv1 as u8) << 7
                | (self.ci as u8) << 6
                | (self.eks & 0x3) << 4
                | (self.rsv2 as u8) << 3
                | ((self.len >> 8) & 0x7) as u8,
            (self.len & 0xff) as u8,
            (self.cid >> 8) as u8,
            (self.cid & 0xff) as u8,
        ]
    }

    pub fn pack(&self) -> [u8; 6] {
        let p = self.pack_prefix();
        [p[0], p[1], p[2], p[3], p[4], self.hcs]
    }

    fn unpack(bytes: &[u8; 6]) -> Self {
        Self {
            ht: bytes[0] >> 7 & 1 == 1,
            ec: bytes[0] >> 6 & 1 == 1,
            ptype: bytes[0] & 0x3f,
            rsv1: bytes[1] >> 7 & 1 == 1,
            ci: bytes[1] >> 6 & 1 == 1,
            eks: bytes[1] >> 4 & 0x3,
            rsv2: bytes[1] >> 3 & 1 == 1,
            len: ((bytes[1] & 0x7) as u16) << 8 | bytes[2] as u16,
            cid: (bytes[3] as u16) << 8 | bytes[4] as u16,
            hcs: bytes[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacPdu {
    pub header: MacHeader,
    pub payload: Vec<u8>,
    /// Present iff `header.ci`.
    pub payload_crc: Option<u32>,
}

impl MacPdu {
    /// Serialized size in bytes.
    pub fn len_bytes(&self) -> usize {
        self.header.len as usize
    }
}

/// CRC-8 over `data` with generator x^8+x^2+x+1, initial value 0.
pub fn crc8(data: &[u8]) -> u8 {
    let mut crc: u8 = 0;
    for &byte in data {
        crc ^= byte;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ 0x07
            } else {
                crc << 1
            };
        }
    }
    crc
}

/// Standard reflected CRC-32 (generator 0x04C11DB7, init and final XOR
/// all-ones), computed with the reversed polynomial.
pub fn crc32(data: &[u8]) -> u32 {
    let mut crc: u32 = 0xffff_ffff;
    for &byte in data {
        crc ^= byte as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0xedb8_8320
            } else {
                crc >> 1
            };
        }
    }
    !crc
}

/// Build a PDU with computed LEN, HCS and (when `ci`) payload CRC.
pub fn build_pdu(payload: &[u8], cid: u16, flags: MacFlags) -> Result<MacPdu> {
    if flags.ptype > 0x3f {
        return Err(Error::Geometry(format!(
            "ptype {} exceeds 6 bits",
            flags.ptype
        )));
    }
    if flags.eks > 0x3 {
        return Err(Error::Geometry(format!("eks {} exceeds 2 bits", flags.eks)));
    }
    let len = HEADER_BYTES + payload.len() + if flags.ci { 4 } else { 0 };
    if len > MAX_PDU_BYTES {
        return Err(Error::LengthOverflow { len });
    }
    let mut header = MacHeader {
        ht: flags.ht,
        ec: flags.ec,
        ptype: flags.ptype,
        rsv1: false,
        ci: flags.ci,
        eks: flags.eks,
        rsv2: false,
        len: len as u16,
        cid,
        hcs: 0,
    };
    header.hcs = crc8(&header.pack_prefix());
    let payload_crc = flags.ci.then(|| crc32(payload));
    Ok(MacPdu {
        header,
        payload: payload.to_vec(),
        payload_crc,
    })
}

/// Serialize a PDU to bytes.
pub fn pdu_to_bytes(pdu: &MacPdu) -> Vec<u8> {
    let mut out = Vec::with_capacity(pdu.len_bytes());
    out.extend_from_slice(&pdu.header.pack());
    out.extend_from_slice(&pdu.payload);
    if let Some(crc) = pdu.payload_crc {
        out.extend_from_slice(&crc.to_be_bytes());
    }
    out
}

/// Serialize a PDU to an MSB-first bit sequence of length `8 * header.len`.
pub fn serialize_pdu(pdu: &MacPdu) -> Vec<u8> {
    bytes_to_bits(&pdu_to_bytes(pdu))
}

/// Parse one PDU from the front of an MSB-first bit sequence.
///
/// The HCS is verified before the LEN field is trusted; when CI is set the
/// trailing CRC-32 must verify as well. Bits beyond the PDU are ignored so
/// callers can walk a concatenated stream by advancing `8 * header.len`.
pub fn parse_pdu(bits: &[u8]) -> Result<MacPdu> {
    if bits.len() < HEADER_BITS {
        return Err(Error::TruncatedInput {
            needed: HEADER_BITS,
            got: bits.len(),
        });
    }
    let mut hdr_bytes = [0u8; 6];
    hdr_bytes.copy_from_slice(&bits_to_bytes(&bits[..HEADER_BITS]));
    let header = MacHeader::unpack(&hdr_bytes);

    let expected = crc8(&hdr_bytes[..5]);
    if expected != header.hcs {
        return Err(Error::HcsMismatch {
            expected,
            actual: header.hcs,
        });
    }
    if header.rsv1 || header.rsv2 {
        return Err(Error::Geometry("reserved header bit set".into()));
    }
    let len = header.len as usize;
    let min_len = HEADER_BYTES + if header.ci { 4 } else { 0 };
    if len < min_len {
        return Err(Error::Geometry(format!(
            "length field {len} below minimum {min_len}"
        )));
    }
    if bits.len() < 8 * len {
        return Err(Error::TruncatedInput {
            needed: 8 * len,
            got: bits.len(),
        });
    }

    let body = bits_to_bytes(&bits[HEADER_BITS..8 * len]);
    let (payload, payload_crc) = if header.ci {
        let split = body.len() - 4;
        let stored = u32::from_be_bytes(body[split..].try_into().unwrap());
        let computed = crc32(&body[..split]);
        if stored != computed {
            return Err(Error::CrcMismatch {
                expected: computed,
                actual: stored,
            });
        }
        (body[..split].to_vec(), Some(stored))
    } else {
        (body, None)
    };
    Ok(MacPdu {
        header,
        payload,
        payload_crc,
    })
}

/// Expand bytes into 0/1 bits, MSB first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &byte in bytes {
        for shift in (0..8).rev() {
            bits.push((byte >> shift) & 1);
        }
    }
    bits
}

/// Pack 0/1 bits into bytes, MSB first. Bit count must be a multiple of 8.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    assert!(bits.len() % 8 == 0, "bit count {} not byte aligned", bits.len());
    bits.chunks(8)
        .map(|chunk| chunk.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent CRC-8 oracle: bitwise long division of the message (with
    /// eight appended zero bits) by x^8+x^2+x+1.
    fn crc8_long_division(data: &[u8]) -> u8 {
        let mut bits = bytes_to_bits(data);
        bits.extend_from_slice(&[0u8; 8]);
        let poly = [1u8, 0, 0, 0, 0, 0, 1, 1, 1]; // x^8+x^2+x+1
        for i in 0..data.len() * 8 {
            if bits[i] == 1 {
                for (j, p) in poly.iter().enumerate() {
                    bits[i + j] ^= p;
                }
            }
        }
        bits[data.len() * 8..]
            .iter()
            .fold(0u8, |acc, &b| (acc << 1) | b)
    }

    /// Independent CRC-32 oracle: MSB-first long division with generator
    /// 0x04C11DB7, reflected input and output, all-ones init and final XOR.
    fn crc32_oracle(data: &[u8]) -> u32 {
        let mut reg: u32 = 0xffff_ffff;
        for &byte in data {
            reg ^= (byte.reverse_bits() as u32) << 24;
            for _ in 0..8 {
                reg = if reg & 0x8000_0000 != 0 {
                    (reg << 1) ^ 0x04c1_1db7
                } else {
                    reg << 1
                };
            }
        }
        reg.reverse_bits() ^ 0xffff_ffff
    }

    #[test]
    fn crc8_matches_long_division_oracle() {
        let cases: [&[u8]; 4] = [b"", b"123456789", &[0, 0, 6, 0, 0], &[0xff; 5]];
        for data in cases {
            assert_eq!(crc8(data), crc8_long_division(data));
        }
        // Published check value for this polynomial and init.
        assert_eq!(crc8(b"123456789"), 0xf4);
    }

    #[test]
    fn crc32_matches_bitwise_oracle() {
        let cases: [&[u8]; 4] = [b"", b"123456789", b"hello wimax", &[0u8; 16]];
        for data in cases {
            assert_eq!(crc32(data), crc32_oracle(data));
        }
        assert_eq!(crc32(b"123456789"), 0xcbf4_3926);
    }

    #[test]
    fn minimal_pdu_layout() {
        let pdu = build_pdu(&[], 0, MacFlags::default()).unwrap();
        assert_eq!(pdu.header.len, 6);
        let bytes = pdu_to_bytes(&pdu);
        assert_eq!(bytes.len(), 6);
        // HCS over the five zero-flag header bytes, frozen from the oracle.
        assert_eq!(pdu.header.hcs, crc8_long_division(&[0, 0, 6, 0, 0]));
        assert_eq!(bytes, [0x00, 0x00, 0x06, 0x00, 0x00, 0x7d]);
    }

    #[test]
    fn header_fields_serialize_in_order() {
        // Distinct value per field, then read each back from its bit span.
        let flags = MacFlags {
            ht: true,
            ec: false,
            ptype: 0b101010,
            ci: true,
            eks: 0b10,
        };
        let pdu = build_pdu(&[0xaa], 0b1100_0011_0101_1001, flags).unwrap();
        let bits = serialize_pdu(&pdu);
        let field = |range: std::ops::Range<usize>| -> u32 {
            bits[range].iter().fold(0, |acc, &b| (acc << 1) | b as u32)
        };
        assert_eq!(field(0..1), 1); // HT: bit 0 of the stream
        assert_eq!(field(1..2), 0); // EC
        assert_eq!(field(2..8), 0b101010); // Type
        assert_eq!(field(8..9), 0); // RSV
        assert_eq!(field(9..10), 1); // CI
        assert_eq!(field(10..12), 0b10); // EKS
        assert_eq!(field(12..13), 0); // RSV
        assert_eq!(field(13..24), 11); // LEN = 6 + 1 + 4
        assert_eq!(field(24..40), 0b1100_0011_0101_1001); // CID
        assert_eq!(field(40..48) as u8, pdu.header.hcs); // HCS
    }

    #[test]
    fn oversize_payload_rejected() {
        let payload = vec![0u8; 2048];
        assert!(matches!(
            build_pdu(&payload, 0, MacFlags::default()),
            Err(Error::LengthOverflow { len: 2054 })
        ));
        // Largest payload that still fits.
        let payload = vec![0u8; MAX_PDU_BYTES - HEADER_BYTES];
        assert!(build_pdu(&payload, 0, MacFlags::default()).is_ok());
    }

    #[test]
    fn serialized_length_is_8_len_and_byte_aligned() {
        let pdu = build_pdu(b"abcde", 7, MacFlags { ci: true, ..Default::default() }).unwrap();
        let bits = serialize_pdu(&pdu);
        assert_eq!(bits.len(), 8 * pdu.header.len as usize);
        assert_eq!(bits.len() % 8, 0);
    }

    #[test]
    fn every_single_header_bit_flip_is_detected() {
        let pdu = build_pdu(b"payload", 0x1234, MacFlags { ci: true, ..Default::default() })
            .unwrap();
        let bits = serialize_pdu(&pdu);
        assert!(parse_pdu(&bits).is_ok());
        for pos in 0..HEADER_BITS {
            let mut corrupted = bits.clone();
            corrupted[pos] ^= 1;
            match parse_pdu(&corrupted) {
                Err(Error::HcsMismatch { .. }) => {}
                other => panic!("flip at bit {pos} gave {other:?}"),
            }
        }
    }

    #[test]
    fn payload_bit_flip_fails_crc32() {
        let pdu = build_pdu(b"payload", 1, MacFlags { ci: true, ..Default::default() }).unwrap();
        let mut bits = serialize_pdu(&pdu);
        bits[HEADER_BITS + 3] ^= 1;
        assert!(matches!(parse_pdu(&bits), Err(Error::CrcMismatch { .. })));
    }

    #[test]
    fn crc32_protected_round_trip() {
        let pdu = build_pdu(b"some payload bytes", 42, MacFlags { ci: true, ..Default::default() })
            .unwrap();
        assert_eq!(pdu.payload_crc, Some(crc32_oracle(b"some payload bytes")));
        let parsed = parse_pdu(&serialize_pdu(&pdu)).unwrap();
        assert_eq!(parsed, pdu);
        assert_eq!(parsed.payload, b"some payload bytes");
    }

    #[test]
    fn short_input_is_truncated_error() {
        let bits = vec![0u8; 40];
        assert!(matches!(
            parse_pdu(&bits),
            Err(Error::TruncatedInput { needed: 48, got: 40 })
        ));
    }

    #[test]
    fn truncated_body_reports_needed_bits() {
        let pdu = build_pdu(b"0123456789", 5, MacFlags::default()).unwrap();
        let bits = serialize_pdu(&pdu);
        match parse_pdu(&bits[..bits.len() - 8]) {
            Err(Error::TruncatedInput { needed, got }) => {
                assert_eq!(needed, bits.len());
                assert_eq!(got, bits.len() - 8);
            }
            other => panic!("got {other:?}"),
        }
    }

    #[test]
    fn reserved_bits_zero_in_every_serialized_pdu() {
        for cid in [0u16, 0xffff, 0x8001] {
            let pdu = build_pdu(&[1, 2, 3], cid, MacFlags { ht: true, ..Default::default() })
                .unwrap();
            let bits = serialize_pdu(&pdu);
            assert_eq!(bits[8], 0);
            assert_eq!(bits[12], 0);
        }
    }

    proptest! {
        #[test]
        fn round_trip_random_pdus(
            payload in proptest::collection::vec(any::<u8>(), 0..200),
            cid in any::<u16>(),
            ht in any::<bool>(),
            ec in any::<bool>(),
            ptype in 0u8..64,
            ci in any::<bool>(),
            eks in 0u8..4,
        ) {
            let flags = MacFlags { ht, ec, ptype, ci, eks };
            let pdu = build_pdu(&payload, cid, flags).unwrap();
            let bits = serialize_pdu(&pdu);
            prop_assert_eq!(bits.len(), 8 * pdu.header.len as usize);
            let parsed = parse_pdu(&bits).unwrap();
            prop_assert_eq!(parsed, pdu);
        }
    }
}
