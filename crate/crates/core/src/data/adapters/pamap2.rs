//! PAMAP2 Protocol files `subject1NN.dat`: 54 space-separated columns per row,
//! activity id in column 1, ±16 g accelerometers of the hand, chest and ankle
//! IMUs at columns 4, 21 and 38.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{file_stem, ingest_err, parse_f64, read_text, sorted_entries, DatasetAdapter};
use crate::data::Recording;
use crate::error::Result;

const COLUMNS: usize = 54;
const POSITIONS: [(&str, usize); 3] = [("Wrist", 4), ("Chest", 21), ("Ankle", 38)];

const CLASSES: [(u32, &str); 18] = [
    (1, "lying"),
    (2, "sitting"),
    (3, "standing"),
    (4, "walking"),
    (5, "running"),
    (6, "cycling"),
    (7, "nordic_walking"),
    (9, "watching_tv"),
    (10, "computer_work"),
    (11, "car_driving"),
    (12, "ascending_stairs"),
    (13, "descending_stairs"),
    (16, "vacuum_cleaning"),
    (17, "ironing"),
    (18, "folding_laundry"),
    (19, "house_cleaning"),
    (20, "playing_soccer"),
    (24, "rope_jumping"),
];

const NAMES: [&str; 18] = {
    let mut out = [""; 18];
    let mut i = 0;
    while i < 18 {
        out[i] = CLASSES[i].1;
        i += 1;
    }
    out
};

pub struct Pamap2;

impl DatasetAdapter for Pamap2 {
    fn known_classes(&self) -> &'static [&'static str] {
        &NAMES
    }

    fn default_activities(&self) -> Vec<&'static str> {
        vec!["lying", "sitting", "standing", "walking", "vacuum_cleaning", "ironing"]
    }

    /// Subject 3 lacks several activities.
    fn default_subjects(&self) -> Vec<String> {
        (1..=9).filter(|&s| s != 3).map(|s| s.to_string()).collect()
    }

    fn list_units(&self, root: &Path) -> Result<Vec<PathBuf>> {
        let base = if root.join("Protocol").is_dir() { root.join("Protocol") } else { root.to_path_buf() };
        Ok(sorted_entries(&base)?
            .into_iter()
            .filter(|p| subject_of(p).is_some() && p.extension().and_then(|e| e.to_str()) == Some("dat"))
            .collect())
    }

    fn read_unit(&self, unit: &Path) -> Result<Vec<Recording>> {
        let subject = subject_of(unit).ok_or_else(|| ingest_err(unit, "expected subject1NN.dat"))?;
        let ids: HashMap<u32, u16> = CLASSES
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (*id, i as u16))
            .collect();
        let mut recs: Vec<Recording> = POSITIONS
            .iter()
            .map(|(pos, _)| Recording::new(unit, subject.clone(), *pos, "colibri"))
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
            let activity: u32 = fields[1]
                .parse()
                .map_err(|_| ingest_err(unit, format!("line {}: bad activity id `{}`", ln + 1, fields[1])))?;
            let label = ids.get(&activity).copied();
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

/// `subject105` → "5".
fn subject_of(path: &Path) -> Option<String> {
    let n: u32 = file_stem(path).strip_prefix("subject")?.parse().ok()?;
    (n > 100).then(|| (n - 100).to_string())
}
