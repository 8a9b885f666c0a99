use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One labelled input; `y` is always `-1.0` or `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: DVector<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: DVector<f64>, y: f64) -> Result<Self> {
        if y != 1.0 && y != -1.0 {
            return Err(Error::Domain(format!("label must be -1 or 1, got {y}")));
        }
        crate::error::ensure_finite(x.as_slice(), "sample input")?;
        Ok(Sample { x, y })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    /// All samples must share one input dimension.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let d = first.x.len();
            if let Some(bad) = samples.iter().find(|s| s.x.len() != d) {
                return Err(Error::Shape(format!(
                    "sample of dimension {} in a dataset of dimension {d}",
                    bad.x.len()
                )));
            }
        }
        Ok(Dataset { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.x.len())
    }

    /// Reads a CSV with header `x1,...,xn,y`. Lines starting with `#` are skipped.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("dataset header: {e}")))?
            .clone();
        let n = headers.len();
        if n < 2 || headers.get(n - 1) != Some("y") {
            return Err(Error::Parse("dataset header must be x1,...,xn,y".to_string()));
        }
        let mut samples = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("dataset row {}: {e}", line + 1)))?;
            let values: Vec<f64> = record
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("dataset row {}: {v:?}: {e}", line + 1)))
                })
                .collect::<Result<_>>()?;
            if values.len() != n {
                return Err(Error::Shape(format!(
                    "dataset row {} has {} fields, header has {n}",
                    line + 1,
                    values.len()
                )));
            }
            samples.push(Sample::new(
                DVector::from_column_slice(&values[..n - 1]),
                values[n - 1],
            )?);
        }
        Dataset::new(samples)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv(&self) -> String {
        let d = self.input_dim().unwrap_or(0);
        let mut out: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        out.push("y".into());
        let mut text = out.join(",");
        text.push('\n');
        for s in &self.samples {
            let row: Vec<String> =
                s.x.iter()
                    .chain(std::iter::once(&s.y))
                    .map(|v| crate::report::fmt_g17(*v))
                    .collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        text
    }
}
