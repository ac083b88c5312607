//! Convergence diagnostics and the metrics CSV format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;
/// Floor applied to zero errors before taking logs.
pub const LOG_FLOOR: f64 = 1e-15;

pub const CSV_HEADER: &str = "step,tvd,nrmse,unique_queries,unique_query_pct,c_t_max,absorptions";

fn check_distribution(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL || p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::NotNormalized(sum));
    }
    Ok(())
}

/// Total variation distance `½ Σ |p(i) − q(i)|`.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let d = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// Normalized root mean square error across independent runs, averaged over
/// nodes: `mean_i sqrt(mean_r (x̂_r(i) − x(i))²) / x(i)`.
pub fn nrmse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: estimates.len(),
        });
    }
    if let Some(e) = estimates.iter().find(|e| e.len() != truth.len()) {
        return Err(Error::LengthMismatch(e.len(), truth.len()));
    }
    if let Some(i) = truth.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::InvalidTarget(format!("truth has non-positive entry at {i}")));
    }
    let runs = estimates.len() as f64;
    let total: f64 = truth
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mse = estimates.iter().map(|e| (e[i] - x).powi(2)).sum::<f64>() / runs;
            mse.sqrt() / x
        })
        .sum();
    Ok(total / truth.len() as f64)
}

/// Least-squares fit of `ln y = intercept + slope · ln x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Number of zero values raised to [`LOG_FLOOR`].
    pub clamped: usize,
}

pub const MIN_SLOPE_POINTS: usize = 10;

/// Log-log slope over the last `tail_fraction` of `(x, y)` points.
pub fn loglog_slope_points(points: &[(f64, f64)], tail_fraction: f64) -> Result<SlopeFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Config(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let keep = ((points.len() as f64) * tail_fraction).ceil() as usize;
    let tail = &points[points.len() - keep.min(points.len())..];
    if tail.len() < MIN_SLOPE_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_SLOPE_POINTS,
            got: tail.len(),
        });
    }
    let mut clamped = 0;
    let logs: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(x, y)| {
            let y = if y > 0.0 {
                y
            } else {
                clamped += 1;
                LOG_FLOOR
            };
            (x.ln(), y.ln())
        })
        .collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: 1,
        });
    }
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        points: logs.len(),
        clamped,
    })
}

/// Log-log slope of TVD against step over the tail of a metrics log.
pub fn loglog_slope(log: &MetricsLog, tail_fraction: f64) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.step as f64, r.tvd)).collect();
    loglog_slope_points(&pts, tail_fraction)
}

/// Short stable digest of a configuration's canonical text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    format!("{digest:x}")[..16].to_string()
}

/// One checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub tvd: f64,
    pub nrmse: Option<f64>,
    /// Unique-query cost; fractional for DURW jump costs.
    pub unique_queries: f64,
    pub unique_query_pct: f64,
    pub c_t_max: Option<f64>,
    /// Redistributions (NMMC) or rejections (MH) so far.
    pub absorptions: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
}

impl MetricsLog {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            rows: Vec::new(),
        }
    }

    /// Appends a row; steps must be strictly increasing and TVD in `[0, 1]`.
    pub fn push(&mut self, row: MetricsRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::Config(format!("step {} after step {}", row.step, last.step)));
            }
        }
        if !(0.0..=1.0).contains(&row.tvd) {
            return Err(Error::Config(format!("tvd {} outside [0, 1]", row.tvd)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// First row whose unique-query cost reaches `budget`.
    pub fn at_budget(&self, budget: f64) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.unique_queries >= budget)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# config_hash={}", self.config_hash).map_err(io_error)?;
        writeln!(out, "# seed={}", self.seed).map_err(io_error)?;
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
        }
        for row in &self.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush().map_err(io_error)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (meta, mut reader) = split_metadata(input)?;
        let mut log = MetricsLog::default();
        for (line, key, value) in meta {
            match key.as_str() {
                "config_hash" => log.config_hash = value,
                "seed" => {
                    log.seed = value.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("bad seed {value:?}"),
                    })?
                }
                _ => {}
            }
        }
        expect_header(&mut reader, CSV_HEADER)?;
        for row in reader.deserialize::<MetricsRow>() {
            let row = row.map_err(csv_error)?;
            let line = log.rows.len() + 1;
            log.push(row).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(log)
    }
}

fn io_error(source: std::io::Error) -> Error {
    Error::Io {
        path: Default::default(),
        source,
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(source),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

type MetaLine = (usize, String, String);

/// Collects `# key=value` lines and returns a reader that skips comments.
fn split_metadata<R: Read>(mut input: R) -> Result<(Vec<MetaLine>, csv::Reader<std::io::Cursor<String>>)> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(io_error)?;
    let meta = text
        .lines()
        .enumerate()
        .filter_map(|(k, l)| {
            let (key, value) = l.trim().strip_prefix('#')?.split_once('=')?;
            Some((k + 1, key.trim().to_string(), value.trim().to_string()))
        })
        .collect();
    let reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(std::io::Cursor::new(text));
    Ok((meta, reader))
}

fn expect_header<R: Read>(reader: &mut csv::Reader<R>, expected: &str) -> Result<()> {
    let headers = reader.headers().map_err(csv_error)?;
    if headers.iter().ne(expected.split(',')) {
        return Err(Error::Parse {
            line: headers.position().map_or(0, |p| p.line() as usize),
            message: format!("expected header {expected:?}"),
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DistributionRow {
    node: u64,
    probability: f64,
}

/// Writes `node,probability` rows, optionally preceded by the eigenvalue.
pub fn write_distribution_csv<W: Write>(mut out: W, ids: &[u64], values: &[f64], eigenvalue: Option<f64>) -> Result<()> {
    if ids.len() != values.len() {
        return Err(Error::LengthMismatch(ids.len(), values.len()));
    }
    if let Some(l) = eigenvalue {
        writeln!(out, "# eigenvalue={l}").map_err(io_error)?;
    }
    let mut w = csv::Writer::from_writer(out);
    if ids.is_empty() {
        w.write_record(["node", "probability"]).map_err(csv_error)?;
    }
    for (&node, &probability) in ids.iter().zip(values) {
        w.serialize(DistributionRow { node, probability }).map_err(csv_error)?;
    }
    w.flush().map_err(io_error)
}

/// Parsed `node,probability` file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DistributionFile {
    pub ids: Vec<u64>,
    pub values: Vec<f64>,
    pub eigenvalue: Option<f64>,
}

pub fn read_distribution_csv<R: Read>(input: R) -> Result<DistributionFile> {
    let (meta, mut reader) = split_metadata(input)?;
    let mut file = DistributionFile::default();
    for (line, key, value) in meta {
        if key == "eigenvalue" {
            file.eigenvalue = Some(value.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad eigenvalue {value:?}"),
            })?);
        }
    }
    expect_header(&mut reader, "node,probability")?;
    for row in reader.deserialize::<DistributionRow>() {
        let row = row.map_err(csv_error)?;
        file.ids.push(row.node);
        file.values.push(row.probability);
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tvd_examples() {
        assert_eq!(tvd(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tvd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tvd(&[0.5, 0.5], &[0.75, 0.25]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tvd_input_errors() {
        assert!(matches!(tvd(&[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(tvd(&[0.6, 0.6], &[0.5, 0.5]), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn nrmse_examples() {
        let truth = [0.5, 0.5];
        assert_eq!(nrmse(&[truth.to_vec(), truth.to_vec()], &truth).unwrap(), 0.0);
        let off = vec![0.6, 0.4];
        assert!((nrmse(&[off.clone(), off.clone()], &truth).unwrap() - 0.2).abs() < 1e-12);
        assert!(matches!(nrmse(&[off], &truth), Err(Error::InsufficientPoints { .. })));
        assert!(nrmse(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn slope_of_power_law_and_constant() {
        let pts: Vec<(f64, f64)> = (1..=40).map(|k| (k as f64 * 100.0, (k as f64 * 100.0).powf(-0.5))).collect();
        let fit = loglog_slope_points(&pts, 0.5).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.01);
        assert_eq!(fit.points, 20);
        let flat: Vec<(f64, f64)> = (1..=20).map(|k| (k as f64, 0.3)).collect();
        assert!(loglog_slope_points(&flat, 1.0).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn slope_needs_enough_points_and_clamps_zeros() {
        let pts: Vec<(f64, f64)> = (1..=12).map(|k| (k as f64, 0.0)).collect();
        assert!(loglog_slope_points(&pts, 0.5).is_err());
        let fit = loglog_slope_points(&pts, 1.0).unwrap();
        assert_eq!(fit.clamped, 12);
    }

    #[test]
    fn metrics_log_rejects_non_increasing_steps() {
        let row = |step| MetricsRow {
            step,
            tvd: 0.5,
            nrmse: None,
            unique_queries: 1.0,
            unique_query_pct: 10.0,
            c_t_max: None,
            absorptions: 0,
        };
        let mut log = MetricsLog::new("x", 1);
        log.push(row(5)).unwrap();
        assert!(log.push(row(5)).is_err());
        assert!(log.push(MetricsRow { tvd: 1.5, ..row(6) }).is_err());
    }

    #[test]
    fn metrics_csv_round_trip() {
        let mut log = MetricsLog::new(config_hash("a = 1"), 42);
        log.push(MetricsRow {
            step: 10,
            tvd: 0.1 + 0.2,
            nrmse: Some(1.0 / 3.0),
            unique_queries: 7.5,
            unique_query_pct: 12.25,
            c_t_max: None,
            absorptions: 3,
        })
        .unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(MetricsLog::read_csv(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn distribution_csv_round_trip() {
        let mut buf = Vec::new();
        write_distribution_csv(&mut buf, &[3, 9], &[0.25, 0.75], Some(0.5)).unwrap();
        let f = read_distribution_csv(buf.as_slice()).unwrap();
        assert_eq!(f.ids, vec![3, 9]);
        assert_eq!(f.values, vec![0.25, 0.75]);
        assert_eq!(f.eigenvalue, Some(0.5));
    }

    #[test]
    fn config_hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea");
    }
}
