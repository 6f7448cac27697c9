use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Field6, Point, Result};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    /// Nodes of a grid with `resolution` intervals per axis, x fastest.
    pub fn points(&self, resolution: usize) -> Result<Vec<Point>> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("grid resolution must be at least 1".into()));
        }
        if (0..3).any(|a| !(self.max[a] >= self.min[a])) {
            return Err(Error::InvalidArgument("grid region has max < min".into()));
        }
        let coord = |a: usize, i: usize| self.min[a] + (self.max[a] - self.min[a]) * (i as f64 / resolution as f64);
        let mut out = Vec::with_capacity((resolution + 1).pow(3));
        for k in 0..=resolution {
            for j in 0..=resolution {
                for i in 0..=resolution {
                    out.push(Point::new(coord(0, i), coord(1, j), coord(2, k)));
                }
            }
        }
        Ok(out)
    }
}

/// Sampled field; `None` marks points inside a guard ball.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub resolution: usize,
    pub points: Vec<Point>,
    pub values: Vec<Option<Field6>>,
}

impl FieldGrid {
    pub fn value(&self, i: usize, j: usize, k: usize) -> Option<&Field6> {
        let n = self.resolution + 1;
        self.values[i + n * (j + n * k)].as_ref()
    }

    /// CSV with columns x,y,z,mask,Re E1,Im E1,…,Re H3,Im H3; masked rows carry zeros.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string(), "y".into(), "z".into(), "mask".into()];
        for f in ["E", "H"] {
            for c in 1..=3 {
                header.push(format!("Re {f}{c}"));
                header.push(format!("Im {f}{c}"));
            }
        }
        out.write_record(&header).map_err(csv_error)?;
        for (x, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = x.iter().map(|c| format!("{c:.17e}")).collect();
            row.push(if v.is_some() { "0" } else { "1" }.into());
            let u = v.unwrap_or_else(Field6::zeros);
            for z in u.iter() {
                row.push(format!("{:.17e}", z.re));
                row.push(format!("{:.17e}", z.im));
            }
            out.write_record(&row).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}
