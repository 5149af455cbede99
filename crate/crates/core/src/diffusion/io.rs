//! Observation files and skeleton dumps.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::skeleton::IntervalSkeleton;
use crate::bridge::Bands;
use crate::error::{Error, Result};

/// Discrete observations `(t_i, y_i)` with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::config("obs", "times and values differ in length"));
        }
        if self.times.len() < 2 {
            return Err(Error::config("obs", "need at least two observations"));
        }
        if self
            .times
            .iter()
            .chain(&self.values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::config("obs", "non-finite entry"));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("obs", "times must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    time: f64,
    value: f64,
}

/// Reads a CSV with header `time,value`.
pub fn read_observations<R: Read>(input: R) -> Result<Observations> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut obs = Observations {
        times: Vec::new(),
        values: Vec::new(),
    };
    for row in rdr.deserialize() {
        let row: Row = row?;
        obs.times.push(row.time);
        obs.values.push(row.value);
    }
    obs.validate()?;
    Ok(obs)
}

/// Writes a CSV with header `time,value`.
pub fn write_observations<W: Write>(obs: &Observations, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (&time, &value) in obs.times.iter().zip(&obs.values) {
        w.serialize(Row { time, value })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SkeletonRecord {
    index: usize,
    y: (f64, f64),
    x: (f64, f64),
    t: (f64, f64),
    layer_index: u32,
    inf_band: (f64, f64),
    sup_band: (f64, f64),
    /// Bands of each segment between consecutive revealed points.
    segments: Vec<Bands>,
    /// Revealed `(time, X, Ẋ)` triples, endpoints included.
    points: Vec<(f64, f64, f64)>,
}

/// Dumps every skeleton as a JSON array, one object per interval.
pub fn write_skeletons_json<W: Write>(skeletons: &[IntervalSkeleton], out: W) -> Result<()> {
    let records: Vec<SkeletonRecord> = skeletons
        .iter()
        .map(|s| {
            let spec = s.path.spec();
            SkeletonRecord {
                index: s.index,
                y: s.y,
                x: (spec.x_start, spec.x_end),
                t: (spec.t_offset, spec.t_end()),
                layer_index: s.path.layer().index,
                inf_band: s.path.layer().inf_band,
                sup_band: s.path.layer().sup_band,
                segments: s.path.segments().to_vec(),
                points: s
                    .path
                    .points()
                    .zip(s.detrended_points())
                    .map(|((t, x), (_, d))| (t, x, d))
                    .collect(),
            }
        })
        .collect();
    serde_json::to_writer_pretty(out, &records)?;
    Ok(())
}
