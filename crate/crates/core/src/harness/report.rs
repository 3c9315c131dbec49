//! CSV writers. Every payload except `timing.csv` is a pure function of the
//! configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::HarnessError;

/// Samples of one edge at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProfile {
    pub edge: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

/// Comma-separated table built row by row.
#[derive(Clone, Debug)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, HarnessError> {
        let path = dir.join(name);
        fs::write(&path, &self.text).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// `edge,x,u,t` rows of every profile, in the given order.
pub fn profile_csv(profiles: &[EdgeProfile]) -> Csv {
    let mut csv = Csv::new(&["edge", "x", "u", "t"]);
    for p in profiles {
        for (&x, &u) in p.x.iter().zip(&p.u) {
            let mut row = String::new();
            let _ = write!(row, "{},{},{},{}", p.edge, num(x), num(u), num(p.t));
            csv.text.push_str(&row);
            csv.text.push('\n');
        }
    }
    csv
}

pub fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}
