//! Splat checkpoints: one JSON header line followed by little-endian `f32`
//! records of [`FIELDS_PER_SPLAT`] values each, in the order
//! mean x,y,z · rotation w,x,y,z · scales 1,2,3 · opacity · color r,g,b.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Quat, Vec3};
use crate::scalar::Real;
use crate::splat::{Splat, SplatSet};

pub const CHECKPOINT_FORMAT: &str = "splatnav-splats";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const FIELDS_PER_SPLAT: usize = 14;
pub const FIELD_NAMES: [&str; FIELDS_PER_SPLAT] = [
    "mean_x", "mean_y", "mean_z", "rot_w", "rot_x", "rot_y", "rot_z", "scale_0", "scale_1", "scale_2", "opacity",
    "color_r", "color_g", "color_b",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub count: usize,
    pub fields: Vec<String>,
}

pub fn splat_to_record<T: Real>(s: &Splat<T>) -> [f32; FIELDS_PER_SPLAT] {
    let f = |v: T| v.as_f64() as f32;
    [
        f(s.mean.x),
        f(s.mean.y),
        f(s.mean.z),
        f(s.rotation.w),
        f(s.rotation.x),
        f(s.rotation.y),
        f(s.rotation.z),
        f(s.scales.x),
        f(s.scales.y),
        f(s.scales.z),
        f(s.opacity),
        f(s.color.x),
        f(s.color.y),
        f(s.color.z),
    ]
}

pub fn splat_from_record<T: Real>(r: &[f32; FIELDS_PER_SPLAT]) -> Splat<T> {
    let g = |i: usize| T::lit(r[i] as f64);
    Splat::new(
        Vec3::new(g(0), g(1), g(2)),
        Quat::new(g(3), g(4), g(5), g(6)),
        Vec3::new(g(7), g(8), g(9)),
        g(10),
        Vec3::new(g(11), g(12), g(13)),
    )
}

pub fn write_checkpoint<T: Real, W: Write>(mut w: W, splats: &SplatSet<T>) -> Result<()> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        count: splats.len(),
        fields: FIELD_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for s in splats.iter() {
        for v in splat_to_record(s) {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint. Quaternions are renormalized after the `f32` round
/// trip so the result validates.
pub fn read_checkpoint<T: Real, R: Read>(r: R) -> Result<SplatSet<T>> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!("not a splat checkpoint: {:?}", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
    }
    if header.fields.len() != FIELDS_PER_SPLAT {
        return Err(Error::Format(format!("expected {FIELDS_PER_SPLAT} fields, got {}", header.fields.len())));
    }
    let mut splats = Vec::with_capacity(header.count);
    let mut rec = [0f32; FIELDS_PER_SPLAT];
    for i in 0..header.count {
        r.read_f32_into::<LittleEndian>(&mut rec)
            .map_err(|e| Error::Format(format!("checkpoint truncated at splat {i}: {e}")))?;
        let mut s: Splat<T> = splat_from_record(&rec);
        s.rotation = s.rotation.normalized();
        splats.push(s);
    }
    Ok(SplatSet::new(splats))
}

pub fn save_checkpoint<T: Real>(path: &Path, splats: &SplatSet<T>) -> Result<()> {
    write_checkpoint(BufWriter::new(fs::File::create(path)?), splats)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<SplatSet<T>> {
    read_checkpoint(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_f32_values() {
        let s = Splat::new(
            Vec3::new(1.5f32, -2.0, 3.25),
            Quat::new(0.5, 0.5, 0.5, 0.5),
            Vec3::new(0.1, 0.2, 0.3),
            0.75,
            Vec3::new(0.2, 0.4, 0.6),
        );
        let set = SplatSet::new(vec![s; 3]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &set).unwrap();
        let back: SplatSet<f32> = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, set);
        let header_len = buf.iter().position(|&b| b == b'\n').unwrap() + 1;
        assert_eq!(buf.len() - header_len, 3 * FIELDS_PER_SPLAT * 4);
        // Opacity is field 10.
        let off = header_len + 10 * 4;
        assert_eq!(f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()), 0.75);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let set = SplatSet::new(vec![Splat::isotropic(Vec3::zero(), 0.1f64, 0.5, Vec3::zero())]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &set).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(read_checkpoint::<f64, _>(&buf[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b"{\"format\":\"x\",\"version\":1,\"count\":0,\"fields\":[]}\n"[..]).is_err());
    }
}
