//! ASCII point-cloud snapshots.
//!
//! ```text
//! <particle count> <time in s>
//! x y z segment
//! ...
//! ```
//! Positions are written in millimeters and read back in meters.

use std::io::{BufRead, Write};

use crate::catheter::Particle;
use crate::error::{Error, Result};
use crate::linalg::Vector3;
use crate::num::Real;

pub fn write_snapshot<T: Real, W: Write>(out: &mut W, particles: &[Particle<T>], time_s: f64) -> Result<()> {
    writeln!(out, "{} {:e}", particles.len(), time_s)?;
    for p in particles {
        let [x, y, z] = p.x.to_f64().map(|c| c * 1e3);
        writeln!(out, "{x:e} {y:e} {z:e} {}", p.segment)?;
    }
    Ok(())
}

/// Points read back from a snapshot, with their segment tags and time.
pub struct Snapshot {
    pub time_s: f64,
    pub points: Vec<(Vector3<f64>, usize)>,
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<Snapshot> {
    let bad = |line: usize, msg: &str| Error::Parse {
        path: format!("snapshot line {line}"),
        message: msg.to_string(),
    };
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))??;
    let mut head = header.split_whitespace();
    let count: usize = head
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(1, "bad particle count"))?;
    let time_s: f64 = head
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(1, "bad time"))?;
    let mut points = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(i + 2, "expected `x y z segment`"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2, "bad coordinate"));
        let seg = f[3].parse::<usize>().map_err(|_| bad(i + 2, "bad segment"))?;
        points.push((Vector3::new(num(f[0])?, num(f[1])?, num(f[2])?) * 1e-3, seg));
    }
    if points.len() != count {
        return Err(bad(1, "particle count does not match body"));
    }
    Ok(Snapshot { time_s, points })
}
