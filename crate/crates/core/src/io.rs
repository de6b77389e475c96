//! Text formats for patterns, null distributions and covariance matrices.
//!
//! Pattern files are CSV with a `x,y,theta` header, preceded by comment
//! lines carrying the window:
//!
//! ```text
//! # window_origin 0.0000000000000000e0 0.0000000000000000e0
//! # window_sides 1.0000000000000000e3 1.0000000000000000e3
//! x,y,theta
//! 1.2500000000000000e1,3.0000000000000000e0,7.8539816339744828e-1
//! ```
//!
//! Reals are written with 17 significant digits, so reading a file back
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimate::{CovarianceEstimate, EstimatorKind};
use crate::geometry::Window;
use crate::model::{DirectionMark, MarkBins, MarkedPointPattern, NullMarkDistribution};

/// Formats a real with 17 significant digits.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("'{}': {e}", s.trim()),
    })
}

fn parse_pair(rest: &str, line: usize) -> Result<[f64; 2]> {
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(Error::Parse {
            line,
            msg: format!("expected two numbers, got '{rest}'"),
        });
    }
    Ok([parse_f64(parts[0], line)?, parse_f64(parts[1], line)?])
}

pub fn pattern_to_string(pattern: &MarkedPointPattern) -> String {
    let w = pattern.window();
    let mut out = String::new();
    let [ox, oy] = w.origin();
    let [l1, l2] = w.sides();
    let _ = writeln!(out, "# window_origin {} {}", fmt_exact(ox), fmt_exact(oy));
    let _ = writeln!(out, "# window_sides {} {}", fmt_exact(l1), fmt_exact(l2));
    out.push_str("x,y,theta\n");
    for (p, m) in pattern.iter() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_exact(p[0]),
            fmt_exact(p[1]),
            fmt_exact(m.theta())
        );
    }
    out
}

pub fn parse_pattern(text: &str) -> Result<MarkedPointPattern> {
    let mut origin = None;
    let mut sides = None;
    let mut header_seen = false;
    let mut points = Vec::new();
    let mut marks = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("window_origin") {
                origin = Some(parse_pair(rest, line_no)?);
            } else if let Some(rest) = comment.strip_prefix("window_sides") {
                sides = Some(parse_pair(rest, line_no)?);
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["x", "y", "theta"] {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected header 'x,y,theta', got '{line}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 3 columns, got {}", cols.len()),
            });
        }
        points.push([parse_f64(cols[0], line_no)?, parse_f64(cols[1], line_no)?]);
        let theta = parse_f64(cols[2], line_no)?;
        marks.push(DirectionMark::new(theta).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?);
    }
    let (Some(origin), Some(sides)) = (origin, sides) else {
        return Err(Error::Parse {
            line: 0,
            msg: "missing '# window_origin' or '# window_sides' metadata".into(),
        });
    };
    if !header_seen {
        return Err(Error::Parse {
            line: 0,
            msg: "missing 'x,y,theta' header".into(),
        });
    }
    MarkedPointPattern::new(points, marks, Window::new(origin, sides)?)
}

pub fn write_pattern(path: impl AsRef<Path>, pattern: &MarkedPointPattern) -> Result<()> {
    fs::write(path, pattern_to_string(pattern))?;
    Ok(())
}

pub fn read_pattern(path: impl AsRef<Path>) -> Result<MarkedPointPattern> {
    parse_pattern(&fs::read_to_string(path)?)
}

/// One probability per line (commas also accepted); `#` lines and a `p`
/// header are skipped.
pub fn parse_null_distribution(text: &str) -> Result<NullMarkDistribution> {
    let mut probs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == "p" {
            continue;
        }
        for field in line.split(',').filter(|f| !f.trim().is_empty()) {
            probs.push(parse_f64(field, idx + 1)?);
        }
    }
    NullMarkDistribution::new(probs)
}

/// `uniform` or a path to a probability file.
pub fn load_null_distribution(source: &str, bins: &MarkBins) -> Result<NullMarkDistribution> {
    let null0 = if source == "uniform" {
        NullMarkDistribution::uniform(bins)
    } else {
        parse_null_distribution(&fs::read_to_string(source)?)?
    };
    if null0.len() != bins.ell() {
        return Err(Error::InvalidArgument(format!(
            "null distribution has {} bins, expected {}",
            null0.len(),
            bins.ell()
        )));
    }
    Ok(null0)
}

/// Matrix rows as CSV after `# key value` metadata lines.
pub fn covariance_to_string(est: &CovarianceEstimate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# estimator {}", est.kind);
    let _ = writeln!(out, "# ell {}", est.ell());
    if let Some(k) = &est.kernel {
        let shape = match k.shape {
            crate::estimate::KernelShape::Uniform => "uniform",
            crate::estimate::KernelShape::Triangular => "triangular",
        };
        let _ = writeln!(out, "# kernel {shape}");
        let _ = writeln!(out, "# kernel_support {}", fmt_exact(k.support));
    }
    if let Some(bw) = &est.bandwidth {
        let _ = writeln!(out, "# bandwidth {}", fmt_exact(bw.b));
        let _ = writeln!(out, "# smoothing_length {}", fmt_exact(bw.smoothing_length));
        let _ = writeln!(out, "# bandwidth_upper_bound {}", fmt_exact(bw.upper_bound));
        let _ = writeln!(out, "# bandwidth_admissible {}", bw.is_admissible());
    }
    if let Some(n) = est.replications {
        let _ = writeln!(out, "# replications {n}");
    }
    for row in est.matrix.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_exact(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Reads a matrix CSV; the estimator kind defaults to Monte Carlo when the
/// metadata does not name one.
pub fn parse_covariance(text: &str) -> Result<CovarianceEstimate> {
    let mut kind = EstimatorKind::MonteCarlo;
    let mut replications = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("estimator"), Some(v)) => kind = v.parse()?,
                (Some("replications"), Some(v)) => {
                    replications = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                        line: idx + 1,
                        msg: e.to_string(),
                    })?)
                }
                _ => {}
            }
            continue;
        }
        rows.push(
            line.split(',')
                .map(|f| parse_f64(f, idx + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected a square matrix, got {n} rows"),
        });
    }
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(CovarianceEstimate {
        matrix,
        kind,
        kernel: None,
        bandwidth: None,
        replications,
    })
}

pub fn write_covariance(path: impl AsRef<Path>, est: &CovarianceEstimate) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(covariance_to_string(est).as_bytes())?;
    Ok(())
}

pub fn read_covariance(path: impl AsRef<Path>) -> Result<CovarianceEstimate> {
    parse_covariance(&fs::read_to_string(path)?)
}
