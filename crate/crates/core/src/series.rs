//! Multichannel time series and CSV ingestion.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `D x T` sample matrix: one row per channel, one column per time sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    #[serde(with = "crate::serde_mat")]
    data: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel_names: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 1 {
            return Err(Error::InvalidInput("time series needs at least one channel".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::InvalidInput("time series needs at least two samples".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite value at channel {r}, sample {c}"
            )));
        }
        Ok(TimeSeries { data, channel_names: None })
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_channels() {
            return Err(Error::DimensionMismatch { expected: self.n_channels(), got: names.len() });
        }
        self.channel_names = Some(names);
        Ok(self)
    }

    /// Builds a series from samples given one row per time point.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let dim = samples.first().map_or(0, Vec::len);
        if let Some(bad) = samples.iter().position(|s| s.len() != dim) {
            return Err(Error::InvalidInput(format!(
                "sample {bad} has {} values, expected {dim}",
                samples[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(dim, samples.len(), |i, t| samples[t][i]))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn channel_names(&self) -> Option<&[String]> {
        self.channel_names.as_deref()
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn sample(&self, t: usize) -> DVector<f64> {
        self.data.column(t).into_owned()
    }

    /// Single-channel series holding channel `i`.
    pub fn channel(&self, i: usize) -> Result<TimeSeries> {
        if i >= self.n_channels() {
            return Err(Error::DimensionMismatch { expected: self.n_channels(), got: i + 1 });
        }
        TimeSeries::new(self.data.rows(i, 1).into_owned())
    }

    /// Samples `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<TimeSeries> {
        if end > self.n_samples() || start >= end {
            return Err(Error::InvalidInput(format!(
                "invalid sample range {start}..{end} for {} samples",
                self.n_samples()
            )));
        }
        let mut out = TimeSeries::new(self.data.columns(start, end - start).into_owned())?;
        out.channel_names = self.channel_names.clone();
        Ok(out)
    }

    /// `matrix * (x(t) - shift)` for every sample.
    pub fn affine(&self, matrix: &DMatrix<f64>, shift: &DVector<f64>) -> Result<TimeSeries> {
        if matrix.ncols() != self.n_channels() {
            return Err(Error::DimensionMismatch { expected: self.n_channels(), got: matrix.ncols() });
        }
        if shift.len() != self.n_channels() {
            return Err(Error::DimensionMismatch { expected: self.n_channels(), got: shift.len() });
        }
        let mut centered = self.data.clone();
        for mut col in centered.column_iter_mut() {
            col -= shift;
        }
        TimeSeries::new(matrix * centered)
    }

    /// Reorders samples so that output sample `t` is input sample `perm[t]`.
    pub fn permute_time(&self, perm: &[usize]) -> Result<TimeSeries> {
        if perm.len() != self.n_samples() {
            return Err(Error::DimensionMismatch { expected: self.n_samples(), got: perm.len() });
        }
        let data = DMatrix::from_fn(self.n_channels(), perm.len(), |i, t| self.data[(i, perm[t])]);
        Ok(TimeSeries { data, channel_names: self.channel_names.clone() })
    }

    /// Reads CSV with one row per sample and one column per channel. A first
    /// row that does not parse as numbers is taken as a header.
    pub fn read_csv<R: Read>(reader: R) -> Result<TimeSeries> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut header = None;
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(vals) => rows.push(vals),
                Err(_) if line == 0 => header = Some(rec.iter().map(str::to_owned).collect()),
                Err(e) => {
                    return Err(Error::InvalidInput(format!("line {}: {e}", line + 1)));
                }
            }
        }
        let series = TimeSeries::from_samples(&rows)?;
        match header {
            Some(names) => series.with_channel_names(names),
            None => Ok(series),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let names: Vec<String> = match &self.channel_names {
            Some(n) => n.clone(),
            None => (0..self.n_channels()).map(|i| format!("ch{i}")).collect(),
        };
        w.write_record(&names)?;
        for col in self.data.column_iter() {
            w.write_record(col.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
