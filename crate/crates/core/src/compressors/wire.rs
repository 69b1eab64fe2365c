//! Byte layout for recording and replaying payloads.
//!
//! ```text
//! scheme id : u8
//! client    : LEB128 varint
//! bit_cost  : LEB128 varint
//! body      : sign schemes  -> bit_cost bits, MSB first, 1 = +1, zero-padded
//!             index schemes -> LEB128 varint section index
//! ```
//! Only the bit-level schemes (NoisySign, HadamardMultiDim, OneBit,
//! SparseReg) have a wire form; the baselines are costed analytically.

use super::{Payload, PayloadBody, Scheme};
use crate::error::{DmeError, Result};

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn get_varint(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let b = *bytes.get(*pos).ok_or_else(|| DmeError::Decode("truncated varint".into()))?;
        *pos += 1;
        v |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(DmeError::Decode("varint longer than 64 bits".into()))
}

fn is_sign_scheme(s: Scheme) -> bool {
    matches!(s, Scheme::NoisySign | Scheme::HadamardMultiDim | Scheme::OneBit)
}

pub fn to_bytes(p: &Payload) -> Result<Vec<u8>> {
    let mut out = vec![p.scheme as u8];
    put_varint(&mut out, p.client as u64);
    put_varint(&mut out, p.bit_cost);
    match (&p.body, p.scheme) {
        (PayloadBody::Signs(bits), s) if is_sign_scheme(s) => {
            if bits.len() as u64 != p.bit_cost {
                return Err(DmeError::param("sign payload length differs from its bit cost"));
            }
            for chunk in bits.chunks(8) {
                let mut byte = 0u8;
                for (k, &b) in chunk.iter().enumerate() {
                    if b > 0 {
                        byte |= 0x80 >> k;
                    }
                }
                out.push(byte);
            }
        }
        (PayloadBody::Index(i), Scheme::SparseReg) => put_varint(&mut out, u64::from(*i)),
        _ => return Err(DmeError::param(format!("{} payloads have no wire form", p.scheme))),
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Payload> {
    let scheme = Scheme::from_byte(*bytes.first().ok_or_else(|| DmeError::Decode("empty payload".into()))?)?;
    let mut pos = 1;
    let client = get_varint(bytes, &mut pos)? as usize;
    let bit_cost = get_varint(bytes, &mut pos)?;
    let body = if is_sign_scheme(scheme) {
        let n = bit_cost as usize;
        let packed = bytes
            .get(pos..pos + n.div_ceil(8))
            .ok_or_else(|| DmeError::Decode("truncated sign bits".into()))?;
        pos += packed.len();
        PayloadBody::Signs((0..n).map(|k| if packed[k / 8] & (0x80 >> (k % 8)) != 0 { 1 } else { -1 }).collect())
    } else if scheme == Scheme::SparseReg {
        let i = get_varint(bytes, &mut pos)?;
        PayloadBody::Index(u32::try_from(i).map_err(|_| DmeError::Decode(format!("index {i} too large")))?)
    } else {
        return Err(DmeError::Decode(format!("{scheme} payloads have no wire form")));
    };
    if pos != bytes.len() {
        return Err(DmeError::Decode(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(Payload { scheme, client, bit_cost, body, clipped: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_layout() {
        let p = Payload {
            scheme: Scheme::HadamardMultiDim,
            client: 300,
            bit_cost: 10,
            body: PayloadBody::Signs(vec![1, -1, 1, 1, -1, -1, -1, -1, 1, 1]),
            clipped: false,
        };
        assert_eq!(to_bytes(&p).unwrap(), vec![2, 0xac, 0x02, 10, 0b1011_0000, 0b1100_0000]);
        let idx = Payload { scheme: Scheme::SparseReg, client: 1, bit_cost: 4, body: PayloadBody::Index(13), clipped: false };
        assert_eq!(to_bytes(&idx).unwrap(), vec![3, 1, 4, 13]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_bytes(&[]).is_err());
        assert!(from_bytes(&[42]).is_err());
        assert!(from_bytes(&[1, 0, 9, 0xff]).is_err());
        assert!(from_bytes(&[3, 0, 2, 1, 0]).is_err());
        let dense = Payload { scheme: Scheme::Identity, client: 0, bit_cost: 32, body: PayloadBody::Dense(vec![1.0]), clipped: false };
        assert!(to_bytes(&dense).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(client in 0usize..1_000_000, bits in prop::collection::vec(prop::bool::ANY, 1..300), idx in 0u32..u32::MAX) {
            let signs: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
            for scheme in [Scheme::NoisySign, Scheme::HadamardMultiDim, Scheme::OneBit] {
                let p = Payload { scheme, client, bit_cost: signs.len() as u64, body: PayloadBody::Signs(signs.clone()), clipped: false };
                prop_assert_eq!(from_bytes(&to_bytes(&p).unwrap()).unwrap(), p);
            }
            let p = Payload { scheme: Scheme::SparseReg, client, bit_cost: 32, body: PayloadBody::Index(idx), clipped: false };
            prop_assert_eq!(from_bytes(&to_bytes(&p).unwrap()).unwrap(), p);
        }
    }
}
