//! File formats: raw IQ captures, truth and detection tables, track logs.
//!
//! IQ data uses a small binary container (magic `LIPS`, version 1): a
//! fixed little-endian header followed by slot-major, antenna-major
//! samples stored as `f32` real/imaginary pairs. Tables are CSV with a
//! header row; tracks are JSON Lines, one record per track per slot.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{CartesianState, Observation};
use crate::simulate::{ArraySlot, RadioConfig, TrajectoryTruth};
use crate::{Error, Result};

const IQ_MAGIC: &[u8; 4] = b"LIPS";
const IQ_VERSION: u16 = 1;

/// Header of an IQ capture file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IqHeader {
    pub sample_rate: f64,
    pub carrier_freq: f64,
    pub n_antennas: usize,
    pub slot_samples: usize,
    pub n_slots: usize,
}

/// Writes a run of slots for one array.
pub fn write_iq(path: &Path, slots: &[ArraySlot], cfg: &RadioConfig) -> Result<()> {
    let first = slots
        .first()
        .ok_or_else(|| Error::format("iq file", "no slots to write"))?;
    for (i, s) in slots.iter().enumerate() {
        if s.n_antennas != first.n_antennas || s.n_samples != first.n_samples {
            return Err(Error::format(
                "iq file",
                format!("slot {i} has inconsistent dimensions"),
            ));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(IQ_MAGIC)?;
    w.write_all(&IQ_VERSION.to_le_bytes())?;
    w.write_all(&cfg.sample_rate.to_le_bytes())?;
    w.write_all(&cfg.carrier_freq.to_le_bytes())?;
    w.write_all(&(first.n_antennas as u16).to_le_bytes())?;
    w.write_all(&(first.n_samples as u32).to_le_bytes())?;
    w.write_all(&(slots.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(first.n_samples * 8);
    for slot in slots {
        for a in 0..slot.n_antennas {
            buf.clear();
            for s in slot.row(a) {
                buf.extend_from_slice(&(s.re as f32).to_le_bytes());
                buf.extend_from_slice(&(s.im as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a run of slots written by [`write_iq`].
pub fn read_iq(path: &Path) -> Result<(IqHeader, Vec<ArraySlot>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != IQ_MAGIC {
        return Err(Error::format("iq file", "bad magic; not an IQ capture"));
    }
    let mut u16b = [0u8; 2];
    r.read_exact(&mut u16b)?;
    let version = u16::from_le_bytes(u16b);
    if version != IQ_VERSION {
        return Err(Error::format(
            "iq file",
            format!("unsupported version {version}"),
        ));
    }
    let mut f64b = [0u8; 8];
    r.read_exact(&mut f64b)?;
    let sample_rate = f64::from_le_bytes(f64b);
    r.read_exact(&mut f64b)?;
    let carrier_freq = f64::from_le_bytes(f64b);
    r.read_exact(&mut u16b)?;
    let n_antennas = u16::from_le_bytes(u16b) as usize;
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let slot_samples = u32::from_le_bytes(u32b) as usize;
    r.read_exact(&mut u32b)?;
    let n_slots = u32::from_le_bytes(u32b) as usize;
    if n_antennas == 0 || slot_samples == 0 {
        return Err(Error::format("iq file", "empty dimensions in header"));
    }

    let header = IqHeader {
        sample_rate,
        carrier_freq,
        n_antennas,
        slot_samples,
        n_slots,
    };
    let mut slots = Vec::with_capacity(n_slots);
    let mut buf = vec![0u8; slot_samples * 8];
    for m in 0..n_slots {
        let mut slot = ArraySlot::zeros(m, n_antennas, slot_samples);
        for a in 0..n_antennas {
            r.read_exact(&mut buf).map_err(|_| {
                Error::format("iq file", format!("truncated at slot {m} antenna {a}"))
            })?;
            let row = slot.row_mut(a);
            for (i, chunk) in buf.chunks_exact(8).enumerate() {
                let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
                let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
                row[i] = Complex64::new(re as f64, im as f64);
            }
        }
        slots.push(slot);
    }
    Ok((header, slots))
}

/// One row of the truth table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub slot: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    #[serde(rename = "R")]
    pub bistatic_range: f64,
    #[serde(rename = "Rdot_mps")]
    pub range_rate: f64,
    #[serde(rename = "theta_rad")]
    pub aoa_rad: f64,
}

pub fn write_truth_csv(path: &Path, truth: &TrajectoryTruth) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::format("truth csv", e.to_string()))?;
    for (m, (s, z)) in truth.states.iter().zip(&truth.observations).enumerate() {
        w.serialize(TruthRecord {
            slot: m,
            x: s.pos.x,
            y: s.pos.y,
            vx: s.vel.x,
            vy: s.vel.y,
            bistatic_range: z.bistatic_range,
            range_rate: z.range_rate,
            aoa_rad: z.aoa,
        })
        .map_err(|e| Error::format("truth csv", e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<TrajectoryTruth> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::format("truth csv", e.to_string()))?;
    let mut states = Vec::new();
    let mut observations = Vec::new();
    for rec in r.deserialize() {
        let rec: TruthRecord = rec.map_err(|e| Error::format("truth csv", e.to_string()))?;
        states.push(CartesianState {
            pos: Vector2::new(rec.x, rec.y),
            vel: Vector2::new(rec.vx, rec.vy),
        });
        observations.push(Observation {
            bistatic_range: rec.bistatic_range,
            range_rate: rec.range_rate,
            aoa: rec.aoa_rad,
        });
    }
    if states.is_empty() {
        return Err(Error::format("truth csv", "no rows"));
    }
    Ok(TrajectoryTruth {
        states,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_iq_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("capture.iq");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut slots = Vec::new();
        for m in 0..3 {
            let mut s = ArraySlot::zeros(m, 2, 64);
            for v in &mut s.samples {
                // Values representable exactly in f32 survive the roundtrip
                // bit for bit.
                *v = Complex64::new(
                    rng.gen_range(-128i32..128) as f64 / 16.0,
                    rng.gen_range(-128i32..128) as f64 / 16.0,
                );
            }
            slots.push(s);
        }
        let cfg = RadioConfig {
            carrier_freq: 2.123e9,
            sample_rate: 2e6,
            bandwidth: 1e6,
            cit: 3.2e-5,
            slot_samples: 64,
            ref_array_size: 2,
            sur_array_size: 2,
            element_spacing_wavelengths: 0.5,
        };
        write_iq(&path, &slots, &cfg).unwrap();
        let (header, back) = read_iq(&path).unwrap();
        assert_eq!(header.n_antennas, 2);
        assert_eq!(header.slot_samples, 64);
        assert_eq!(header.n_slots, 3);
        assert_eq!(header.sample_rate, 2e6);
        assert_eq!(back, slots);
    }

    #[test]
    fn test_iq_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.iq");
        std::fs::write(&path, b"not an iq file at all").unwrap();
        assert!(matches!(read_iq(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn test_iq_detects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.iq");
        let cfg = RadioConfig {
            carrier_freq: 1e9,
            sample_rate: 1e6,
            bandwidth: 1e6,
            cit: 3.2e-5,
            slot_samples: 32,
            ref_array_size: 1,
            sur_array_size: 2,
            element_spacing_wavelengths: 0.5,
        };
        let slots = vec![ArraySlot::zeros(0, 2, 32)];
        write_iq(&path, &slots, &cfg).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 10]).unwrap();
        assert!(matches!(read_iq(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn test_truth_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        let truth = TrajectoryTruth {
            states: vec![
                CartesianState {
                    pos: Vector2::new(40.0, 195.0),
                    vel: Vector2::new(0.0, -10.0),
                },
                CartesianState {
                    pos: Vector2::new(40.0, 194.0),
                    vel: Vector2::new(0.0, -10.0),
                },
            ],
            observations: vec![
                Observation {
                    bistatic_range: 489.2,
                    range_rate: -16.5,
                    aoa: 1.369,
                },
                Observation {
                    bistatic_range: 487.5,
                    range_rate: -16.4,
                    aoa: 1.368,
                },
            ],
        };
        write_truth_csv(&path, &truth).unwrap();
        let back = read_truth_csv(&path).unwrap();
        assert_eq!(back, truth);
    }
}
