//! PMAP: a minimal float-plane container.
//!
//! Layout (all little-endian): `b"PMAP"`, version byte `0x01`, `u32` height,
//! `u32` width, then `height * width` IEEE-754 `f32` samples in row-major
//! order. Nothing follows the payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Plane;

pub const MAGIC: &[u8; 4] = b"PMAP";
pub const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 4 + 4;

pub fn encode(plane: &Plane) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + plane.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(plane.height() as u32).to_le_bytes());
    out.extend_from_slice(&(plane.width() as u32).to_le_bytes());
    for v in plane.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Plane> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Pmap(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Pmap("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Pmap(format!("unsupported version {:#04x}", bytes[4])));
    }
    let height = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Pmap("dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Pmap(format!(
            "{height}x{width} needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Plane::new(height, width, data)
}

pub fn write(plane: &Plane, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(&encode(plane))
}

pub fn read(mut r: impl Read) -> Result<Plane> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)
        .map_err(|e| Error::Pmap(format!("read failed: {e}")))?;
    decode(&buf)
}

pub fn save(plane: &Plane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(plane)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Plane> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Pmap(msg) => Error::Pmap(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_bit_exact() {
        let plane = Plane::new(2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.25, -0.0]).unwrap();
        let bytes = encode(&plane);
        assert_eq!(&bytes[..5], b"PMAP\x01");
        assert_eq!(&bytes[5..9], &[2, 0, 0, 0]);
        assert_eq!(&bytes[9..13], &[3, 0, 0, 0]);
        assert_eq!(&bytes[13..17], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 13 + 6 * 4);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let good = encode(&Plane::zeros(2, 2));
        assert!(decode(&good[..good.len() - 1]).is_err(), "truncated payload");
        assert!(decode(&good[..8]).is_err(), "truncated header");
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(decode(&bad).is_err());
        let mut long = good;
        long.push(0);
        assert!(decode(&long).is_err(), "trailing bytes");
    }

    proptest! {
        #[test]
        fn round_trip(h in 0usize..6, w in 0usize..6, seed in any::<u32>()) {
            let data: Vec<f32> = (0..h * w)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 97)))
                .collect();
            let plane = Plane::new(h, w, data).unwrap();
            let back = decode(&encode(&plane)).unwrap();
            prop_assert_eq!(
                back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                plane.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!((back.height(), back.width()), (h, w));
        }
    }
}
