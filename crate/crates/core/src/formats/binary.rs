//! Little-endian binary formats.
//!
//! Pool snapshot: `POOL_MAGIC`, then `count: u64, r: u32, h: u32, w: u32,
//! c: u32`, then per entry `id: u64, start: u64, end: u64`, `r` row-major
//! 4×4 `f32` poses and `h·w·c` `f32` latent values.
//!
//! Embedder weights: `EMBEDDER_MAGIC`, then `r, hidden, features: u32` and
//! all parameters as `f64` in [`CameraEmbedder::parameters`] order.

use crate::camera::CameraEmbedder;
use crate::error::{Error, Result};
use crate::memory::{MemoryEntry, MemoryPool};
use crate::se3::{project_to_rotation, Pose};
use crate::world::ToyLatent;
use nalgebra::Matrix4;

pub const POOL_MAGIC: &[u8; 8] = b"TWPOOL01";
pub const EMBEDDER_MAGIC: &[u8; 4] = b"CEMB";

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::parse_offset(self.at as u64, format!("truncated: needed {n} more bytes")));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn offset(&self) -> u64 {
        self.at as u64
    }
}

pub fn write_pool(pool: &MemoryPool) -> Vec<u8> {
    let entries = pool.entries();
    let (r, h, w, c) = entries
        .first()
        .map_or((0, 0, 0, 0), |e| (e.pose_set.len(), e.latent.h, e.latent.w, e.latent.c));
    let mut out = Vec::with_capacity(32 + entries.len() * (24 + r * 64 + h * w * c * 4));
    out.extend_from_slice(POOL_MAGIC);
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for d in [r, h, w, c] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for e in entries {
        for v in [e.id, e.frame_range.start, e.frame_range.end] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for p in &e.pose_set {
            let m = p.to_matrix();
            for i in 0..4 {
                for j in 0..4 {
                    out.extend_from_slice(&(m[(i, j)] as f32).to_le_bytes());
                }
            }
        }
        for v in &e.latent.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Rebuilds a pool. Poses come back at single precision with their rotations
/// re-orthonormalized.
pub fn read_pool(bytes: &[u8], exclusion_horizon: usize) -> Result<MemoryPool> {
    let mut rd = Reader { bytes, at: 0 };
    if rd.take(8)? != POOL_MAGIC {
        return Err(Error::parse_offset(0, "not a pool snapshot"));
    }
    let count = rd.u64()?;
    let r = rd.u32()? as usize;
    let (h, w, c) = (rd.u32()? as usize, rd.u32()? as usize, rd.u32()? as usize);
    let mut pool = MemoryPool::new(exclusion_horizon);
    for _ in 0..count {
        let at = rd.offset();
        let (id, start, end) = (rd.u64()?, rd.u64()?, rd.u64()?);
        let mut pose_set = Vec::with_capacity(r);
        for _ in 0..r {
            let mut m = Matrix4::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] = rd.f32()? as f64;
                }
            }
            let mut p = Pose::from_matrix(&m);
            p.rotation = project_to_rotation(&p.rotation);
            if !p.is_finite() {
                return Err(Error::parse_offset(at, "non-finite pose"));
            }
            pose_set.push(p);
        }
        let mut latent = ToyLatent::zeros(h, w, c);
        for v in latent.data.iter_mut() {
            *v = rd.f32()?;
        }
        pool.insert(MemoryEntry {
            id,
            pose_set,
            latent,
            frame_range: start..end,
        })
        .map_err(|e| Error::parse_offset(at, e.to_string()))?;
    }
    if rd.at != bytes.len() {
        return Err(Error::parse_offset(rd.offset(), "trailing bytes"));
    }
    Ok(pool)
}

pub fn write_embedder(e: &CameraEmbedder) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * e.parameter_count());
    out.extend_from_slice(EMBEDDER_MAGIC);
    for d in [e.r, e.hidden(), e.features()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in e.parameters() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn read_embedder(bytes: &[u8]) -> Result<CameraEmbedder> {
    let mut rd = Reader { bytes, at: 0 };
    if rd.take(4)? != EMBEDDER_MAGIC {
        return Err(Error::parse_offset(0, "not an embedder weight file"));
    }
    let (r, hidden, features) = (rd.u32()? as usize, rd.u32()? as usize, rd.u32()? as usize);
    let mut e = CameraEmbedder::zeros(r, hidden, features);
    let mut params = Vec::with_capacity(e.parameter_count());
    for _ in 0..e.parameter_count() {
        params.push(rd.f64()?);
    }
    if rd.at != bytes.len() {
        return Err(Error::parse_offset(rd.offset(), "trailing bytes"));
    }
    e.set_parameters(&params)?;
    e.validate().map_err(|err| Error::parse_offset(16, err.to_string()))?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Location;
    use crate::se3::{exp_twist, Twist};

    fn pool() -> MemoryPool {
        let mut p = MemoryPool::new(2);
        for id in 0..5u64 {
            let pose = exp_twist(&Twist::from_array([id as f64, 0.5, 0.0, 0.0, 0.3 * id as f64, 0.1])).unwrap();
            let mut latent = ToyLatent::zeros(2, 3, 6);
            for (k, v) in latent.data.iter_mut().enumerate() {
                *v = (k as f32 + id as f32) * 0.01;
            }
            p.insert(MemoryEntry {
                id,
                pose_set: vec![pose, pose],
                latent,
                frame_range: 2 * id..2 * id + 2,
            })
            .unwrap();
        }
        p
    }

    #[test]
    fn pool_round_trip() {
        let p = pool();
        let back = read_pool(&write_pool(&p), 2).unwrap();
        assert_eq!(back.len(), p.len());
        for (a, b) in p.entries().iter().zip(back.entries()) {
            assert_eq!((a.id, &a.frame_range, &a.latent), (b.id, &b.frame_range, &b.latent));
            for (x, y) in a.pose_set.iter().zip(&b.pose_set) {
                assert!(crate::se3::pose_distance(x, y) < 1e-5);
                assert!(y.orthogonality_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn truncated_pool_names_offset() {
        let bytes = write_pool(&pool());
        match read_pool(&bytes[..bytes.len() - 3], 2) {
            Err(Error::Parse {
                location: Location::Offset(o),
                ..
            }) => assert!(o > 0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_pool(b"garbage!", 0).is_err());
    }

    #[test]
    fn embedder_round_trip_is_exact() {
        let e = CameraEmbedder::seeded(4, 8, 5, 17);
        assert_eq!(read_embedder(&write_embedder(&e)).unwrap(), e);
        let mut bytes = write_embedder(&e);
        bytes.push(0);
        assert!(read_embedder(&bytes).is_err());
    }
}
