//! OPPORTUNITY activity recognition: `dataset/S{1..4}-{ADL1..ADL5,Drill}.dat`,
//! 250 space-separated columns per row. The body-worn IMUs on the back,
//! right/left upper arm and right/left lower arm start their accelerometer
//! triples at columns 37, 50, 63, 76 and 89; locomotion labels sit in column 243.

use std::path::{Path, PathBuf};

use super::{file_stem, ingest_err, parse_f64, read_text, sorted_entries, DatasetAdapter};
use crate::data::Recording;
use crate::error::Result;

const COLUMNS: usize = 250;
const LOCOMOTION_COLUMN: usize = 243;
const POSITIONS: [(&str, usize); 5] = [("BACK", 37), ("RUA", 50), ("RLA", 63), ("LUA", 76), ("LLA", 89)];
const CODES: [(u32, &str); 4] = [(1, "stand"), (2, "walk"), (4, "sit"), (5, "lie")];
const NAMES: [&str; 4] = ["stand", "walk", "sit", "lie"];

pub struct Opportunity;

impl DatasetAdapter for Opportunity {
    fn known_classes(&self) -> &'static [&'static str] {
        &NAMES
    }

    fn default_activities(&self) -> Vec<&'static str> {
        NAMES.to_vec()
    }

    fn default_subjects(&self) -> Vec<String> {
        (1..=4).map(|s| s.to_string()).collect()
    }

    fn list_units(&self, root: &Path) -> Result<Vec<PathBuf>> {
        let base = if root.join("dataset").is_dir() { root.join("dataset") } else { root.to_path_buf() };
        Ok(sorted_entries(&base)?
            .into_iter()
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("dat") && subject_of(p).is_some())
            .collect())
    }

    fn read_unit(&self, unit: &Path) -> Result<Vec<Recording>> {
        let subject = subject_of(unit).ok_or_else(|| ingest_err(unit, "expected S<n>-<session>.dat"))?;
        let mut recs: Vec<Recording> = POSITIONS
            .iter()
            .map(|(pos, _)| Recording::new(unit, subject.clone(), *pos, "imu"))
            .collect();
        let text = read_text(unit)?;
        for (ln, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != COLUMNS {
                return Err(ingest_err(
                    unit,
                    format!("line {}: expected {COLUMNS} columns, found {}", ln + 1, fields.len()),
                ));
            }
            let code = parse_f64(fields[LOCOMOTION_COLUMN], unit, ln + 1)?;
            let label = CODES
                .iter()
                .position(|(c, _)| f64::from(*c) == code)
                .map(|i| i as u16);
            for (rec, (_, col)) in recs.iter_mut().zip(POSITIONS) {
                let mut row = [0.0; 3];
                for (k, v) in row.iter_mut().enumerate() {
                    *v = parse_f64(fields[col + k], unit, ln + 1)?;
                }
                rec.push(row, label);
            }
        }
        Ok(recs)
    }
}

/// `S3-ADL2` → "3".
fn subject_of(path: &Path) -> Option<String> {
    let stem = file_stem(path);
    let (s, _) = stem.split_once('-')?;
    let n: u32 = s.strip_prefix('S')?.parse().ok()?;
    Some(n.to_string())
}
