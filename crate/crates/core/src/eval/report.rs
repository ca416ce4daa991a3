use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Method, MetricsReport};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::config(format!("unknown report format `{other}` (table, csv or json)"))),
        }
    }
}

/// One task row; scores are percentages, `None` for a failed or missing cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub scores: Vec<Option<f64>>,
    /// Cells whose task errored.
    pub failed: Vec<bool>,
    /// Full pipeline minus the contrastive ablation, in points.
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub dataset: String,
    pub methods: Vec<Method>,
    pub rows: Vec<ReportRow>,
    pub average: ReportRow,
    pub has_delta: bool,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl ReportTable {
    /// Groups reports by task (rows, in first-seen order) and method
    /// (columns, in a fixed order).
    pub fn build(reports: &[MetricsReport]) -> Result<Self> {
        let first = reports.first().ok_or_else(|| Error::Aggregation("no reports to aggregate".into()))?;
        let mut ok = reports.iter().filter(|r| r.error.is_none());
        if let Some(a) = ok.next() {
            if let Some(r) = ok.find(|r| r.class_set != a.class_set) {
                return Err(Error::Aggregation(format!(
                    "task `{}` uses a different class set than `{}`",
                    r.task, a.task
                )));
            }
        }
        let mut methods: Vec<Method> = reports.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        let mut tasks: Vec<&str> = Vec::new();
        let mut cells: BTreeMap<(&str, Method), &MetricsReport> = BTreeMap::new();
        for r in reports {
            if !tasks.contains(&r.task.as_str()) {
                tasks.push(&r.task);
            }
            if cells.insert((&r.task, r.method), r).is_some() {
                return Err(Error::Aggregation(format!(
                    "two `{}` reports for task `{}`",
                    r.method.display_name(),
                    r.task
                )));
            }
        }
        let col = |m: Method| methods.iter().position(|&x| x == m);
        let has_delta = col(Method::Vacda).is_some() && col(Method::VacdaNoContrastive).is_some();
        let delta_of = |scores: &[Option<f64>]| -> Option<f64> {
            if !has_delta {
                return None;
            }
            Some(scores[col(Method::Vacda)?]? - scores[col(Method::VacdaNoContrastive)?]?)
        };
        let rows: Vec<ReportRow> = tasks
            .iter()
            .map(|&task| {
                let scores: Vec<Option<f64>> = methods
                    .iter()
                    .map(|&m| {
                        cells
                            .get(&(task, m))
                            .filter(|r| r.error.is_none())
                            .map(|r| 100.0 * r.mean)
                    })
                    .collect();
                let failed = methods
                    .iter()
                    .map(|&m| cells.get(&(task, m)).is_some_and(|r| r.error.is_some()))
                    .collect();
                let delta = delta_of(&scores);
                ReportRow { task: task.to_string(), scores, failed, delta }
            })
            .collect();
        let avg_scores: Vec<Option<f64>> = (0..methods.len())
            .map(|c| mean_of(rows.iter().map(|r| r.scores[c])))
            .collect();
        let average = ReportRow {
            task: "Average".into(),
            delta: delta_of(&avg_scores),
            failed: vec![false; methods.len()],
            scores: avg_scores,
        };
        Ok(Self { dataset: first.dataset.clone(), methods, rows, average, has_delta })
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec![format!("{} task", self.dataset)];
        h.extend(self.methods.iter().map(|m| m.display_name().to_string()));
        if self.has_delta {
            h.push("delta".into());
        }
        h
    }

    fn cells(&self, row: &ReportRow) -> Vec<String> {
        let mut c = vec![row.task.clone()];
        c.extend(row.scores.iter().zip(&row.failed).map(|(s, &failed)| match s {
            Some(x) => format!("{x:.2}"),
            None if failed => "failed".into(),
            None => "-".into(),
        }));
        if self.has_delta {
            c.push(row.delta.map_or_else(|| "-".into(), |d| format!("{d:+.2}")));
        }
        c
    }

    fn all_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().chain(std::iter::once(&self.average))
    }

    pub fn to_table(&self) -> String {
        let mut lines = vec![self.header()];
        lines.extend(self.all_rows().map(|r| self.cells(r)));
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            let mut line = String::new();
            for (c, cell) in l.iter().enumerate() {
                if c == 0 {
                    let _ = write!(line, "{cell:<w$}", w = widths[c]);
                } else {
                    let _ = write!(line, "  {cell:>w$}", w = widths[c]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 0 || i == lines.len() - 2 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory csv");
        for r in self.all_rows() {
            w.write_record(self.cells(r)).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    table: &'a ReportTable,
    reports: &'a [MetricsReport],
}

/// Renders reports laid out like the published result tables: one row per
/// "sources → target" task, one column per method, an average row, and a
/// delta column when a contrastive ablation pair is present.
pub fn render_report(reports: &[MetricsReport], format: ReportFormat) -> Result<String> {
    let table = ReportTable::build(reports)?;
    Ok(match format {
        ReportFormat::Table => table.to_table(),
        ReportFormat::Csv => table.to_csv(),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&JsonReport { table: &table, reports })
                .map_err(|e| Error::Aggregation(e.to_string()))?;
            s.push('\n');
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(task: &str, method: Method, scores: &[f64]) -> MetricsReport {
        let (mean, std) = crate::eval::mean_std(scores);
        MetricsReport {
            task: task.into(),
            dataset: "SYNTH".into(),
            scenario_kind: "CrossDevice".into(),
            method,
            class_set: vec!["a".into(), "b".into()],
            seeds: (0..scores.len() as u64).collect(),
            per_seed: scores.to_vec(),
            transductive: scores.to_vec(),
            mean,
            std,
            config_hash: "h".into(),
            wall_clock_secs: 1.0,
            error: None,
        }
    }

    #[test]
    fn single_report_has_equal_average() {
        let t = ReportTable::build(&[report("A, B → C", Method::Vacda, &[0.5, 0.7, 0.6])]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].scores, t.average.scores);
        let text = t.to_table();
        assert!(text.contains("A, B → C"));
        assert!(text.contains("60.00"));
        assert!(text.contains("Average"));
    }

    #[test]
    fn csv_parses_back_to_the_same_numbers() {
        let reports = vec![
            report("t1", Method::Vacda, &[0.8123, 0.7]),
            report("t2", Method::Vacda, &[0.5]),
            report("t1", Method::SourceOnly, &[0.4]),
        ];
        let t = ReportTable::build(&reports).unwrap();
        let csv_text = render_report(&reports, ReportFormat::Csv).unwrap();
        let mut r = csv::Reader::from_reader(csv_text.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        for (rec, row) in rows.iter().zip(t.all_rows()) {
            for (c, s) in row.scores.iter().enumerate() {
                let parsed: Option<f64> = rec[c + 1].parse().ok();
                assert_eq!(parsed, s.map(|v| (v * 100.0).round() / 100.0));
            }
        }
        assert_eq!(&rows[1][2], "-");
    }

    #[test]
    fn ablation_pair_adds_a_delta_column() {
        let reports = vec![
            report("t1", Method::Vacda, &[0.8, 0.7]),
            report("t1", Method::VacdaNoContrastive, &[0.6, 0.65]),
        ];
        let t = ReportTable::build(&reports).unwrap();
        assert!(t.has_delta);
        assert!((t.rows[0].delta.unwrap() - 12.5).abs() < 1e-9);
        assert!(t.to_table().contains("+12.50"));
    }

    #[test]
    fn mixed_class_sets_and_duplicates_fail() {
        let mut other = report("t2", Method::Vacda, &[0.5]);
        other.class_set.push("c".into());
        let mixed = [report("t1", Method::Vacda, &[0.5]), other];
        assert!(matches!(ReportTable::build(&mixed), Err(Error::Aggregation(_))));
        let dup = [report("t1", Method::Vacda, &[0.5]), report("t1", Method::Vacda, &[0.6])];
        assert!(matches!(ReportTable::build(&dup), Err(Error::Aggregation(_))));
        assert!(ReportTable::build(&[]).is_err());
    }

    #[test]
    fn failed_cells_are_marked() {
        let mut bad = report("t2", Method::Vacda, &[]);
        bad.per_seed.clear();
        bad.mean = 0.0;
        bad.error = Some("boom".into());
        let reports = [report("t1", Method::Vacda, &[0.5]), bad];
        let t = ReportTable::build(&reports).unwrap();
        assert_eq!(t.average.scores[0], Some(50.0));
        assert!(t.to_table().contains("failed"));
    }

    #[test]
    fn json_contains_table_and_reports() {
        let reports = vec![report("t1", Method::Vacda, &[0.8])];
        let json = render_report(&reports, ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["reports"][0]["per_seed"][0], 0.8);
        assert_eq!(v["table"]["rows"][0]["task"], "t1");
    }
}
