use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["experiment", "method", "sweep", "trial", "metric", "value", "seed"];

/// Trial index, or the average over all trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Trial {
    Index(usize),
    Mean,
}

impl fmt::Display for Trial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trial::Index(i) => write!(f, "{i}"),
            Trial::Mean => f.write_str("mean"),
        }
    }
}

impl FromStr for Trial {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "mean" {
            return Ok(Trial::Mean);
        }
        s.parse().map(Trial::Index).map_err(|e| format!("bad trial `{s}`: {e}"))
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Rounds to the 9 significant digits written to CSV, so that records survive
/// a write/read cycle unchanged.
pub fn quantize(x: f64) -> f64 {
    if x.is_finite() {
        format_float(x).parse().unwrap_or(x)
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub method: String,
    pub sweep: f64,
    pub trial: Trial,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

impl ResultRecord {
    pub fn new(experiment: &str, method: &str, sweep: f64, trial: Trial, metric: &str, value: f64, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            method: method.into(),
            sweep: quantize(sweep),
            trial,
            metric: metric.into(),
            value: quantize(value),
            seed,
        }
    }

    fn fields(&self) -> [String; 7] {
        [
            self.experiment.clone(),
            self.method.clone(),
            format_float(self.sweep),
            self.trial.to_string(),
            self.metric.clone(),
            format_float(self.value),
            self.seed.to_string(),
        ]
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the records with a header row, LF line endings.
pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(&err)?;
    w.write_record(CSV_HEADER).map_err(&err)?;
    for r in records {
        w.write_record(r.fields()).map_err(&err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let err = csv_err(path);
    let mut rd = csv::Reader::from_path(path).map_err(&err)?;
    let header = rd.headers().map_err(&err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let bad = |what: String| Error::Config(format!("{}: {what}", path.display()));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(&err)?;
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|e| bad(format!("bad number `{}`: {e}", &row[i])))
        };
        out.push(ResultRecord {
            experiment: row[0].to_string(),
            method: row[1].to_string(),
            sweep: num(2)?,
            trial: row[3].parse().map_err(bad)?,
            metric: row[4].to_string(),
            value: num(5)?,
            seed: row[6]
                .parse()
                .map_err(|e| bad(format!("bad seed `{}`: {e}", &row[6])))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<ResultRecord> {
        (0..n)
            .map(|i| {
                ResultRecord::new(
                    "se_vs_power",
                    "proposed",
                    5.0 * i as f64,
                    if i == 2 { Trial::Mean } else { Trial::Index(i) },
                    "spectral_efficiency",
                    std::f64::consts::PI * (i as f64 + 1.0) * 1e-7,
                    42 + i as u64,
                )
            })
            .collect()
    }

    #[test]
    fn header_only_and_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_csv(&[], &p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "experiment,method,sweep,trial,metric,value,seed\n"
        );
        emit_csv(&sample(3), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let recs = sample(5);
        emit_csv(&recs, &p).unwrap();
        assert_eq!(read_csv(&p).unwrap(), recs);
    }

    #[test]
    fn nine_significant_digits() {
        let r = ResultRecord::new("x", "m", 0.0, Trial::Index(0), "v", 1.0 / 3.0, 0);
        assert_eq!(r.fields()[5], "3.33333333e-1");
        assert_eq!(r.value, 0.333333333);
    }

    #[test]
    fn unwritable_path_reports_path() {
        let err = emit_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
