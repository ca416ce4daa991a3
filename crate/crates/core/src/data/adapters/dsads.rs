//! Daily and Sports Activities: `a01..a19/p1..p8/s01..s60.txt`, each file
//! 125 rows of 45 comma-separated values (5 units × 9 sensors; accelerometer
//! first within each unit).

use std::path::{Path, PathBuf};

use super::{ingest_err, parse_f64, read_text, sorted_entries, DatasetAdapter};
use crate::data::Recording;
use crate::error::Result;

const POSITIONS: [&str; 5] = ["Torso", "RA", "LA", "RL", "LL"];
const COLUMNS: usize = 45;
const UNIT_WIDTH: usize = 9;

const CLASSES: [&str; 19] = [
    "sitting",
    "standing",
    "lying_back",
    "lying_right",
    "ascending_stairs",
    "descending_stairs",
    "standing_elevator",
    "moving_elevator",
    "walking_parking_lot",
    "treadmill_walking_flat",
    "treadmill_walking_inclined",
    "treadmill_running",
    "stepper",
    "cross_trainer",
    "cycling_horizontal",
    "cycling_vertical",
    "rowing",
    "jumping",
    "basketball",
];

pub struct Dsads;

impl DatasetAdapter for Dsads {
    fn known_classes(&self) -> &'static [&'static str] {
        &CLASSES
    }

    fn default_activities(&self) -> Vec<&'static str> {
        vec![
            "standing",
            "lying_back",
            "ascending_stairs",
            "walking_parking_lot",
            "treadmill_running",
            "stepper",
            "cross_trainer",
            "rowing",
            "jumping",
            "basketball",
        ]
    }

    fn default_subjects(&self) -> Vec<String> {
        (1..=8).map(|s| s.to_string()).collect()
    }

    /// One unit per `aNN/pM` directory; its segments form one stream.
    fn list_units(&self, root: &Path) -> Result<Vec<PathBuf>> {
        let base = if root.join("data").is_dir() { root.join("data") } else { root.to_path_buf() };
        let mut units = Vec::new();
        for a in sorted_entries(&base)? {
            if !is_code(&a, 'a') {
                continue;
            }
            for p in sorted_entries(&a)? {
                if is_code(&p, 'p') {
                    units.push(p);
                }
            }
        }
        Ok(units)
    }

    fn read_unit(&self, unit: &Path) -> Result<Vec<Recording>> {
        let activity = code_number(unit.parent().unwrap_or(unit), 'a')
            .filter(|&a| (1..=CLASSES.len()).contains(&a))
            .ok_or_else(|| ingest_err(unit, "expected an aNN activity directory"))?;
        let subject = code_number(unit, 'p').ok_or_else(|| ingest_err(unit, "expected a pN subject directory"))?;
        let mut recs: Vec<Recording> = POSITIONS
            .iter()
            .map(|pos| Recording::new(unit, subject.to_string(), *pos, "xsens"))
            .collect();
        for seg in sorted_entries(unit)? {
            if seg.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let text = read_text(&seg)?;
            for (ln, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != COLUMNS {
                    return Err(ingest_err(
                        &seg,
                        format!("line {}: expected {COLUMNS} columns, found {}", ln + 1, fields.len()),
                    ));
                }
                for (u, rec) in recs.iter_mut().enumerate() {
                    let mut row = [0.0; 3];
                    for (k, v) in row.iter_mut().enumerate() {
                        *v = parse_f64(fields[u * UNIT_WIDTH + k], &seg, ln + 1)?;
                    }
                    rec.push(row, Some((activity - 1) as u16));
                }
            }
        }
        Ok(recs)
    }
}

fn code_number(path: &Path, prefix: char) -> Option<usize> {
    path.file_name()?.to_str()?.strip_prefix(prefix)?.parse().ok()
}

fn is_code(path: &Path, prefix: char) -> bool {
    path.is_dir() && code_number(path, prefix).is_some()
}
