//! WISDM smartphone and smartwatch activity dataset:
//! `raw/{phone,watch}/accel/data_16NN_accel_{phone,watch}.txt`, one reading per
//! line as `subject,activity_code,timestamp,x,y,z;`.

use std::path::{Path, PathBuf};

use super::{file_stem, ingest_err, parse_f64, read_text, sorted_entries, DatasetAdapter};
use crate::data::Recording;
use crate::error::Result;

const SUBJECT_BASE: u32 = 1600;
const DEVICES: [&str; 2] = ["phone", "watch"];

const CODES: [(char, &str); 18] = [
    ('A', "walking"),
    ('B', "jogging"),
    ('C', "stairs"),
    ('D', "sitting"),
    ('E', "standing"),
    ('F', "typing"),
    ('G', "brushing_teeth"),
    ('H', "eating_soup"),
    ('I', "eating_chips"),
    ('J', "eating_pasta"),
    ('K', "drinking"),
    ('L', "eating_sandwich"),
    ('M', "kicking"),
    ('O', "catching"),
    ('P', "dribbling"),
    ('Q', "writing"),
    ('R', "clapping"),
    ('S', "folding_clothes"),
];

const NAMES: [&str; 18] = {
    let mut out = [""; 18];
    let mut i = 0;
    while i < 18 {
        out[i] = CODES[i].1;
        i += 1;
    }
    out
};

pub struct Wisdm;

impl DatasetAdapter for Wisdm {
    fn known_classes(&self) -> &'static [&'static str] {
        &NAMES
    }

    fn default_activities(&self) -> Vec<&'static str> {
        vec!["walking", "jogging", "stairs", "sitting", "standing", "kicking", "catching", "dribbling"]
    }

    /// Subjects with balanced recordings; subject `n` is file id `1600 + n`.
    fn default_subjects(&self) -> Vec<String> {
        [1, 5, 7, 8, 12, 13, 15, 37, 38, 39].iter().map(|s| s.to_string()).collect()
    }

    fn list_units(&self, root: &Path) -> Result<Vec<PathBuf>> {
        let base = if root.join("raw").is_dir() { root.join("raw") } else { root.to_path_buf() };
        let mut units = Vec::new();
        for dev in DEVICES {
            let dir = base.join(dev).join("accel");
            if dir.is_dir() {
                units.extend(sorted_entries(&dir)?.into_iter().filter(|p| parse_name(p).is_some()));
            }
        }
        Ok(units)
    }

    fn read_unit(&self, unit: &Path) -> Result<Vec<Recording>> {
        let (subject, device) =
            parse_name(unit).ok_or_else(|| ingest_err(unit, "expected data_16NN_accel_<device>.txt"))?;
        let position = if device == "phone" { "pocket" } else { "wrist" };
        let mut rec = Recording::new(unit, (subject - SUBJECT_BASE).to_string(), position, device);
        let text = read_text(unit)?;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim().trim_end_matches(';');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(ingest_err(
                    unit,
                    format!("line {}: expected 6 fields, found {}", ln + 1, fields.len()),
                ));
            }
            let code = fields[1].trim();
            let label = CODES
                .iter()
                .position(|(c, _)| code.len() == 1 && code.starts_with(*c))
                .map(|i| i as u16);
            let mut row = [0.0; 3];
            for (k, v) in row.iter_mut().enumerate() {
                *v = parse_f64(fields[3 + k], unit, ln + 1)?;
            }
            rec.push(row, label);
        }
        Ok(vec![rec])
    }
}

fn parse_name(path: &Path) -> Option<(u32, &'static str)> {
    let stem = file_stem(path);
    let rest = stem.strip_prefix("data_")?;
    let (id, tail) = rest.split_once("_accel_")?;
    let device = DEVICES.into_iter().find(|d| *d == tail)?;
    let id: u32 = id.parse().ok()?;
    (id >= SUBJECT_BASE).then_some((id, device))
}
