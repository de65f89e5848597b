use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::experiment::{RunRecord, Summary};

pub const CSV_HEADER: [&str; 6] = ["trial", "episode", "state", "agent", "v_defender", "wall_time_s"];

/// Writes `records` to `path`. Floats use the shortest representation that
/// parses back to the same value.
pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<PathBuf> {
    if records.is_empty() {
        bail!("no records to write");
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.episode.to_string(),
            r.state.clone(),
            r.agent.clone(),
            r.v_defender.to_string(),
            r.wall_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    if rdr.headers()?.iter().ne(CSV_HEADER) {
        bail!("{}: unexpected header", path.display());
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |k: usize| row.get(k).with_context(|| format!("row {}: missing column {}", line + 2, CSV_HEADER[k]));
        out.push(RunRecord {
            trial: field(0)?.parse()?,
            episode: field(1)?.parse()?,
            state: field(2)?.to_string(),
            agent: field(3)?.to_string(),
            v_defender: field(4)?.parse()?,
            wall_time_s: field(5)?.parse()?,
        });
    }
    Ok(out)
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            RunRecord {
                trial: 0,
                episode: 3,
                state: "(py, MySQL)".into(),
                agent: "bssq".into(),
                v_defender: -8.123456789012345,
                wall_time_s: 0.0,
            },
            RunRecord {
                trial: 1,
                episode: 0,
                state: "a,\"b\"".into(),
                agent: "urs".into(),
                v_defender: 1e-300,
                wall_time_s: 1.25,
            },
        ];
        let path = dir.path().join("r.csv");
        emit_csv(&records, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), records);
    }

    #[test]
    fn empty_records_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[], &dir.path().join("r.csv")).is_err());
    }
}
