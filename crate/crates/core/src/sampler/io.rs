//! Run manifests, estimate CSVs and binary sample dumps.
//!
//! Dump layout: the 8-byte magic `GLSMPL01`, then `count` and `dim` as
//! little-endian u64, `β` and `radius_sq` as little-endian f64, then
//! `count × dim` little-endian f64 coordinates, row-major.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ti::FreeEnergyEstimate;
use super::SampleSet;
use crate::error::{GlassError, Result};
use crate::geometry::Configuration;
use crate::rng::GENERATOR_ID;

const MAGIC: &[u8; 8] = b"GLSMPL01";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub generator: String,
    pub seeds: Vec<u64>,
    pub grids: Vec<Vec<f64>>,
    pub options: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, options: serde_json::Value) -> Self {
        RunManifest {
            tool: "glasslab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            generator: GENERATOR_ID.into(),
            seeds: Vec::new(),
            grids: Vec::new(),
            options,
        }
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub value: f64,
    pub std_error: f64,
    pub method: String,
    pub flags: String,
}

impl EstimateRow {
    pub fn new(quantity: impl Into<String>, e: &FreeEnergyEstimate) -> Self {
        EstimateRow {
            quantity: quantity.into(),
            value: e.value,
            std_error: e.std_error,
            method: e.method.as_str().into(),
            flags: e.flags.describe(),
        }
    }
}

pub fn write_estimates_csv<W: Write>(rows: &[EstimateRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dump<W: Write>(s: &SampleSet, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(s.points.len() as u64).to_le_bytes())?;
    w.write_all(&(s.dim() as u64).to_le_bytes())?;
    w.write_all(&s.meta.beta.to_le_bytes())?;
    w.write_all(&s.meta.radius_sq.to_le_bytes())?;
    for p in &s.points {
        for x in p.coords() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a dump back as `(β, radius_sq, points)`.
pub fn read_dump<R: Read>(mut r: R) -> Result<(f64, f64, Vec<Configuration>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GlassError::invalid("dump", "bad magic"));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let count = u64::from_le_bytes(next(&mut r)?) as usize;
    let dim = u64::from_le_bytes(next(&mut r)?) as usize;
    let beta = f64::from_le_bytes(next(&mut r)?);
    let radius_sq = f64::from_le_bytes(next(&mut r)?);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = Vec::with_capacity(dim);
        for _ in 0..dim {
            x.push(f64::from_le_bytes(next(&mut r)?));
        }
        points.push(Configuration::new(x)?);
    }
    Ok((beta, radius_sq, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Disorder;
    use crate::mixture::Mixture;
    use crate::sampler::{free_energy_ti, mcmc_chain, SamplerOptions};

    #[test]
    fn dump_round_trip() {
        let d = Disorder::sample(&Mixture::pure(2), 8, 0).unwrap();
        let o = SamplerOptions { burn_in: 10, samples: 10, batches: 2, ..Default::default() };
        let s = mcmc_chain(&d, 0.7, 0.5, None, &o).unwrap();
        let mut buf = Vec::new();
        write_dump(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 + 40 * 8 * 8);
        let (b, q, pts) = read_dump(buf.as_slice()).unwrap();
        assert_eq!((b, q), (0.7, 0.5));
        assert_eq!(pts, s.points);
        assert!(read_dump(&buf[..20]).is_err());
    }

    #[test]
    fn csv_rows() {
        let d = Disorder::sample(&Mixture::pure(2), 8, 0).unwrap();
        let e = free_energy_ti(&d, 0.0, 4, &SamplerOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_estimates_csv(&[EstimateRow::new("F", &e)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "quantity,value,std_error,method,flags\nF,0.0,0.0,ti,\n");
    }
}
