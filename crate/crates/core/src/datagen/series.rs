use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cluster::{blocks_of, Block};
use crate::error::{Error, Result};
use crate::physics::LogPoint;

pub const SERIES_HEADER: [&str; 6] = ["depth", "phi", "sw", "fclay", "sigma_o", "label"];

/// Ordered log samples with optional ground-truth cluster labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries {
    pub depth: Vec<i64>,
    pub points: Vec<LogPoint>,
    pub labels: Option<Vec<usize>>,
}

impl LabeledSeries {
    /// Series indexed `0..len`.
    pub fn new(points: Vec<LogPoint>, labels: Option<Vec<usize>>) -> Result<Self> {
        let depth = (0..points.len() as i64).collect();
        LabeledSeries::with_depth(depth, points, labels)
    }

    pub fn with_depth(
        depth: Vec<i64>,
        points: Vec<LogPoint>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if depth.len() != points.len() {
            return Err(Error::Domain(format!(
                "{} depths for {} points",
                depth.len(),
                points.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::Domain(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.len()
                )));
            }
        }
        if depth.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("depth must be strictly increasing".into()));
        }
        for p in &points {
            p.validate()?;
        }
        Ok(LabeledSeries {
            depth,
            points,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn blocks(&self) -> Option<Vec<Block>> {
        self.labels.as_deref().map(blocks_of)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_csv_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes the CSV form: shortest round-trip float formatting, LF endings.
    pub fn write_csv_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let header: &[&str] = if self.labels.is_some() {
            &SERIES_HEADER
        } else {
            &SERIES_HEADER[..5]
        };
        writeln!(out, "{}", header.join(","))?;
        for (i, p) in self.points.iter().enumerate() {
            write!(
                out,
                "{},{},{},{},{}",
                self.depth[i], p.phi, p.sw, p.f_clay, p.sigma_o
            )?;
            if let Some(labels) = &self.labels {
                write!(out, ",{}", labels[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        LabeledSeries::read_csv_from(file).map_err(|msg| Error::format(path, msg))
    }

    pub fn read_csv_from<R: std::io::Read>(input: R) -> std::result::Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| e.to_string())?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let required: Vec<usize> = SERIES_HEADER[..5]
            .iter()
            .map(|h| col(h).ok_or_else(|| format!("missing column {h:?}")))
            .collect::<std::result::Result<_, _>>()?;
        let label_col = col("label");

        let mut depth = Vec::new();
        let mut points = Vec::new();
        let mut labels = label_col.map(|_| Vec::new());
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            let field = |c: usize| -> std::result::Result<&str, String> {
                record.get(c).ok_or_else(|| format!("row {}: missing field", row + 1))
            };
            let num = |c: usize| -> std::result::Result<f64, String> {
                let s = field(c)?;
                s.parse::<f64>()
                    .map_err(|_| format!("row {}: {s:?} is not a number", row + 1))
            };
            let d = field(required[0])?;
            depth.push(
                d.parse::<i64>()
                    .map_err(|_| format!("row {}: depth {d:?} is not an integer", row + 1))?,
            );
            points.push(LogPoint {
                phi: num(required[1])?,
                sw: num(required[2])?,
                f_clay: num(required[3])?,
                sigma_o: num(required[4])?,
            });
            if let (Some(c), Some(l)) = (label_col, labels.as_mut()) {
                let s = field(c)?;
                l.push(
                    s.parse::<usize>()
                        .map_err(|_| format!("row {}: label {s:?} is not an integer", row + 1))?,
                );
            }
        }
        LabeledSeries::with_depth(depth, points, labels).map_err(|e| e.to_string())
    }
}
