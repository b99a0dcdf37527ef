//! Capacity maps: the per-cell maximum of a resource.
//!
//! File format: a header line `M=<int>` followed by `M*M` whitespace-separated
//! non-negative integers in row-major order (`y` outer).

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum TerrainError {
    #[error("terrain file: {0}")]
    Io(#[from] std::io::Error),
    #[error("terrain parse error: {0}")]
    Parse(String),
    #[error("{resource} terrain is {got}x{got}, lattice M is {expected}")]
    Size {
        resource: &'static str,
        expected: u32,
        got: u32,
    },
    #[error("{resource} terrain cell {index} holds {value}, above the global maximum {max}")]
    Capacity {
        resource: &'static str,
        index: usize,
        value: u32,
        max: u32,
    },
    #[error("dual-resource run needs a spice capacity map")]
    MissingSpice,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CapacityMap {
    pub m: u32,
    pub cells: Vec<u32>,
}

impl CapacityMap {
    pub fn parse(text: &str) -> Result<CapacityMap, TerrainError> {
        let mut tokens = text.split_whitespace();
        let header = tokens.next().ok_or_else(|| TerrainError::Parse("empty file".into()))?;
        let m: u32 = header
            .strip_prefix("M=")
            .and_then(|v| v.parse().ok())
            .filter(|&m| m > 0)
            .ok_or_else(|| TerrainError::Parse(format!("expected header M=<int>, got {header:?}")))?;
        let cells = tokens
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| TerrainError::Parse(format!("bad capacity {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let want = m as usize * m as usize;
        if cells.len() != want {
            return Err(TerrainError::Parse(format!(
                "expected {want} capacities for M={m}, found {}",
                cells.len()
            )));
        }
        Ok(CapacityMap { m, cells })
    }

    pub fn load(path: &Path) -> Result<CapacityMap, TerrainError> {
        CapacityMap::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("M={}\n", self.m);
        for row in self.cells.chunks(self.m as usize) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn uniform(m: u32, value: u32) -> CapacityMap {
        CapacityMap {
            m,
            cells: vec![value; m as usize * m as usize],
        }
    }

    /// Two circular hills of height `max` with terraced slopes, scaled to `m`.
    /// Sugar hills sit on the anti-diagonal; `mirrored` puts them on the diagonal.
    pub fn two_peak(m: u32, max: u32, mirrored: bool) -> CapacityMap {
        let mf = m as f64;
        let (lo, hi) = (0.3 * mf, 0.7 * mf);
        let peaks = if mirrored {
            [(lo, lo), (hi, hi)]
        } else {
            [(hi, lo), (lo, hi)]
        };
        let radius = 0.38 * mf;
        let mut cells = Vec::with_capacity(m as usize * m as usize);
        for y in 0..m {
            for x in 0..m {
                let level = peaks
                    .iter()
                    .map(|&(px, py)| {
                        let d = ((x as f64 + 0.5 - px).powi(2) + (y as f64 + 0.5 - py).powi(2)).sqrt();
                        let frac = (1.0 - d / radius).max(0.0);
                        (frac * max as f64).ceil() as u32
                    })
                    .max()
                    .unwrap_or(0);
                cells.push(level.min(max));
            }
        }
        CapacityMap { m, cells }
    }

    pub(crate) fn check(&self, m: u32, max: u32, resource: &'static str) -> Result<(), TerrainError> {
        if self.m != m {
            return Err(TerrainError::Size {
                resource,
                expected: m,
                got: self.m,
            });
        }
        if let Some((index, &value)) = self.cells.iter().enumerate().find(|(_, &v)| v > max) {
            return Err(TerrainError::Capacity {
                resource,
                index,
                value,
                max,
            });
        }
        Ok(())
    }
}
