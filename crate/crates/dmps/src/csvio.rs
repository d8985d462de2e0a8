//! CSV schemas. Every file starts with a header row naming exactly the
//! columns of its record type; numbers are written in shortest round-trip
//! form and lines end with LF.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dmps_core::trainer::TrajectoryStep;
use dmps_core::EpisodeMetrics;

use crate::error::{DmpsError, DmpsResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub r#return: f64,
    pub shield_invocations: usize,
    pub safety_violations: usize,
    pub steps: usize,
    pub goal_reached: u8,
}

impl From<&EpisodeMetrics> for MetricsRow {
    fn from(m: &EpisodeMetrics) -> Self {
        Self {
            episode: m.episode_index,
            r#return: m.undiscounted_return,
            shield_invocations: m.shield_invocations,
            safety_violations: m.safety_violations,
            steps: m.steps,
            goal_reached: m.goal_reached as u8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub timestep: usize,
    pub episode: usize,
    pub r#return: f64,
    pub shield_invocations: usize,
    pub safety_violations: usize,
    pub steps: usize,
    pub goal_reached: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub episode: usize,
    pub t: usize,
    /// Space-separated state components.
    pub state: String,
    /// Space-separated action components.
    pub action: String,
    pub source: String,
}

fn spaced(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

impl From<&TrajectoryStep> for TrajectoryRow {
    fn from(s: &TrajectoryStep) -> Self {
        Self {
            episode: s.episode,
            t: s.t,
            state: spaced(s.state.as_slice()),
            action: spaced(s.action.as_slice()),
            source: s.source.as_str().into(),
        }
    }
}

/// One row of the evaluation summary: statistics over seeds of the per-seed
/// episode means.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub env: String,
    pub dynamics: String,
    pub shield: String,
    pub seeds: usize,
    pub return_mean: f64,
    pub return_sd: f64,
    pub invocations_mean: f64,
    pub invocations_sd: f64,
    pub violations_mean: f64,
    pub violations_sd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub env: String,
    pub dynamics: String,
    pub mps_invocations_mean: f64,
    pub dmps_invocations_mean: f64,
    /// DMPS over MPS mean invocations.
    pub invocation_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub episode: usize,
    pub mean_return: f64,
    pub sd_return: f64,
    pub mean_invocations: f64,
    pub sd_invocations: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub horizon: usize,
    pub rr_mean: f64,
    pub rr_stderr: f64,
    pub fitted_c: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingCsvRow {
    pub horizon: usize,
    pub mean_expansions: f64,
    pub sd_expansions: f64,
    pub states: usize,
    pub censored: usize,
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Serialises `rows` to bytes, header first. An empty slice still yields
/// the header.
pub fn to_bytes<T: Serialize + Default>(rows: &[T]) -> DmpsResult<Vec<u8>> {
    let mut w = writer(Vec::new());
    if rows.is_empty() {
        // Serialising a default record emits the header; drop the data line.
        w.serialize(T::default())?;
        let bytes = w.into_inner().map_err(|e| DmpsError::io("<memory>", e.into_error()))?;
        let header_end = bytes.iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| i + 1);
        return Ok(bytes[..header_end].to_vec());
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| DmpsError::io("<memory>", e.into_error()))
}

pub fn write_rows<T: Serialize + Default>(path: &Path, rows: &[T]) -> DmpsResult<()> {
    let bytes = to_bytes(rows)?;
    let mut f = File::create(path).map_err(|e| DmpsError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| DmpsError::io(path, e))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> DmpsResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| DmpsError::Report(format!("{}: {e}", path.display())))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| DmpsError::Report(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_match_the_documented_columns() {
        let header = |b: Vec<u8>| String::from_utf8(b).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            header(to_bytes::<MetricsRow>(&[]).unwrap()),
            "episode,return,shield_invocations,safety_violations,steps,goal_reached"
        );
        assert_eq!(
            header(to_bytes::<SeriesRow>(&[]).unwrap()),
            "episode,mean_return,sd_return,mean_invocations,sd_invocations"
        );
        assert_eq!(header(to_bytes::<RegretRow>(&[]).unwrap()), "horizon,rr_mean,rr_stderr,fitted_c");
        assert_eq!(
            header(to_bytes::<SummaryRow>(&[]).unwrap()),
            "env,dynamics,shield,seeds,return_mean,return_sd,invocations_mean,invocations_sd,violations_mean,violations_sd"
        );
        assert_eq!(to_bytes::<RegretRow>(&[]).unwrap(), b"horizon,rr_mean,rr_stderr,fitted_c\n");
    }

    #[test]
    fn rows_round_trip_with_lf_endings() {
        let rows = vec![
            SeriesRow {
                episode: 0,
                mean_return: -1.5,
                sd_return: 0.1 + 0.2,
                mean_invocations: 3.0,
                sd_invocations: 0.0,
            },
            SeriesRow {
                episode: 1,
                mean_return: 1e-300,
                sd_return: 0.0,
                mean_invocations: 0.5,
                sd_invocations: 1.0 / 3.0,
            },
        ];
        let bytes = to_bytes(&rows).unwrap();
        assert!(!bytes.contains(&b'\r'));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_rows(&path, &rows).unwrap();
        assert_eq!(read_rows::<SeriesRow>(&path).unwrap(), rows);
    }
}
