//! Delimited-text readers and writers for entity files and feature matrices.
//!
//! Entity layout (one UTF-8 CSV per entity, header row, ISO-8601 dates):
//!
//! | file                   | columns |
//! |------------------------|---------|
//! | `students.csv`         | student_id, department, zone, quintile, school_id |
//! | `tests.csv`            | student_id, date, score, level |
//! | `activities.csv`       | student_id, activity_id, class_id, date, times_completed, questions, correct, pts_min, pts_max |
//! | `messages.csv`         | student_id, date, sent, received, threads |
//! | `class_lessons.csv`    | class_id, lesson_id, date |
//! | `activity_lessons.csv` | activity_id, lesson_id |
//!
//! Empty message counts read as 0 and an empty message date as March 1st.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{EntitySet, FeatureMatrix, MessageDay};
use crate::error::{Error, Result};
use crate::matrix::{ColumnSpec, Matrix};

pub const STUDENTS_FILE: &str = "students.csv";
pub const TESTS_FILE: &str = "tests.csv";
pub const ACTIVITIES_FILE: &str = "activities.csv";
pub const MESSAGES_FILE: &str = "messages.csv";
pub const CLASS_LESSONS_FILE: &str = "class_lessons.csv";
pub const ACTIVITY_LESSONS_FILE: &str = "activity_lessons.csv";

pub const ENTITY_FILES: [&str; 6] = [
    STUDENTS_FILE,
    TESTS_FILE,
    ACTIVITIES_FILE,
    MESSAGES_FILE,
    CLASS_LESSONS_FILE,
    ACTIVITY_LESSONS_FILE,
];

pub const ID_COLUMN: &str = "student_id";
pub const GROUP_COLUMN: &str = "school_id";
pub const RESPONSE_COLUMN: &str = "reachA2_1";
const MISSING: &str = "NA";

fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

#[derive(Deserialize)]
struct RawMessage {
    student_id: String,
    date: Option<NaiveDate>,
    sent: Option<u32>,
    received: Option<u32>,
    threads: Option<u32>,
}

/// Writes the six entity files into `dir`, creating it if needed.
pub fn write_entities(dir: &Path, entities: &EntitySet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(&dir.join(STUDENTS_FILE), &entities.students)?;
    write_records(&dir.join(TESTS_FILE), &entities.tests)?;
    write_records(&dir.join(ACTIVITIES_FILE), &entities.attempts)?;
    write_records(&dir.join(MESSAGES_FILE), &entities.messages)?;
    write_records(&dir.join(CLASS_LESSONS_FILE), &entities.class_lessons)?;
    write_records(&dir.join(ACTIVITY_LESSONS_FILE), &entities.activity_lessons)?;
    Ok(())
}

/// Reads the six entity files from `dir` and validates them.
pub fn read_entities(dir: &Path) -> Result<EntitySet> {
    let raw_messages: Vec<RawMessage> = read_records(&dir.join(MESSAGES_FILE))?;
    let attempts: Vec<super::ActivityAttempt> = read_records(&dir.join(ACTIVITIES_FILE))?;
    let year = attempts
        .iter()
        .map(|a| chrono::Datelike::year(&a.date))
        .min()
        .unwrap_or(2021);
    let march_first = NaiveDate::from_ymd_opt(year, 3, 1).expect("valid date");
    let messages = raw_messages
        .into_iter()
        .map(|m| MessageDay {
            student_id: m.student_id,
            date: m.date.unwrap_or(march_first),
            sent: m.sent.unwrap_or(0),
            received: m.received.unwrap_or(0),
            threads: m.threads.unwrap_or(0),
        })
        .collect();
    let set = EntitySet {
        students: read_records(&dir.join(STUDENTS_FILE))?,
        tests: read_records(&dir.join(TESTS_FILE))?,
        attempts,
        messages,
        class_lessons: read_records(&dir.join(CLASS_LESSONS_FILE))?,
        activity_lessons: read_records(&dir.join(ACTIVITY_LESSONS_FILE))?,
    };
    set.validate()?;
    Ok(set)
}

/// JSON sidecar describing a feature CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub cutoff_month: u32,
    pub n_rows: usize,
    pub id_column: String,
    pub group_column: String,
    pub response_column: String,
    pub missing_marker: String,
    pub columns: Vec<ColumnSpec>,
}

pub fn feature_paths(dir: &Path, m: u32) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("features_m{m:02}.csv")),
        dir.join(format!("features_m{m:02}.json")),
    )
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        MISSING.to_string()
    } else {
        format!("{v}")
    }
}

/// Writes `features_mMM.csv` plus its JSON sidecar into `dir`.
pub fn write_features(dir: &Path, fm: &FeatureMatrix) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (csv_path, json_path) = feature_paths(dir, fm.cutoff_month);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    let mut header = vec![ID_COLUMN.to_string(), GROUP_COLUMN.to_string()];
    header.extend(fm.matrix.columns().iter().map(|c| c.name.clone()));
    header.push(RESPONSE_COLUMN.to_string());
    w.write_record(&header).map_err(|e| Error::csv(&csv_path, e))?;
    for i in 0..fm.n_rows() {
        let mut rec = vec![fm.student_ids[i].clone(), fm.school_ids[i].clone()];
        rec.extend((0..fm.matrix.n_cols()).map(|j| fmt_value(fm.matrix.get(i, j))));
        rec.push(fm.response[i].to_string());
        w.write_record(&rec).map_err(|e| Error::csv(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let sidecar = FeatureSidecar {
        cutoff_month: fm.cutoff_month,
        n_rows: fm.n_rows(),
        id_column: ID_COLUMN.into(),
        group_column: GROUP_COLUMN.into(),
        response_column: RESPONSE_COLUMN.into(),
        missing_marker: MISSING.into(),
        columns: fm.matrix.columns().to_vec(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path, json_path))
}

/// Reads a feature CSV and checks it column by column against its sidecar.
pub fn read_features(csv_path: &Path, json_path: &Path) -> Result<FeatureMatrix> {
    let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let sidecar: FeatureSidecar = serde_json::from_str(&text)?;

    let mut r = csv::Reader::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
    let header = r.headers().map_err(|e| Error::csv(csv_path, e))?.clone();
    let mut expected = vec![sidecar.id_column.as_str(), sidecar.group_column.as_str()];
    expected.extend(sidecar.columns.iter().map(|c| c.name.as_str()));
    expected.push(sidecar.response_column.as_str());
    for (k, want) in expected.iter().enumerate() {
        match header.get(k) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(Error::SchemaMismatch(format!(
                    "{}: column {} is `{got}`, sidecar expects `{want}`",
                    csv_path.display(),
                    k + 1
                )))
            }
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "{}: missing column `{want}`",
                    csv_path.display()
                )))
            }
        }
    }
    if header.len() != expected.len() {
        return Err(Error::SchemaMismatch(format!(
            "{}: unexpected extra column `{}`",
            csv_path.display(),
            &header[expected.len()]
        )));
    }

    let p = sidecar.columns.len();
    let mut ids = Vec::new();
    let mut groups = Vec::new();
    let mut response = Vec::new();
    let mut cols = vec![Vec::new(); p];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(csv_path, e))?;
        ids.push(rec[0].to_string());
        groups.push(rec[1].to_string());
        for (j, col) in cols.iter_mut().enumerate() {
            let field = &rec[j + 2];
            let v = if field == sidecar.missing_marker {
                f64::NAN
            } else {
                field.parse::<f64>().map_err(|_| {
                    Error::SchemaMismatch(format!(
                        "{}: row {}, column `{}`: cannot parse {field:?}",
                        csv_path.display(),
                        line + 2,
                        sidecar.columns[j].name
                    ))
                })?
            };
            col.push(v);
        }
        let y = &rec[p + 2];
        response.push(match y {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "{}: row {}: response `{other}` is not 0/1",
                    csv_path.display(),
                    line + 2
                )))
            }
        });
    }
    if ids.len() != sidecar.n_rows {
        return Err(Error::SchemaMismatch(format!(
            "{}: {} rows, sidecar says {}",
            csv_path.display(),
            ids.len(),
            sidecar.n_rows
        )));
    }
    let quintile_col = sidecar.columns.iter().position(|c| c.name == "sociocultural_context");
    let quintiles = match quintile_col {
        Some(j) => cols[j].iter().map(|v| if v.is_nan() { 0 } else { *v as u8 }).collect(),
        None => vec![0; ids.len()],
    };
    let matrix = Matrix::from_columns(sidecar.columns, cols)?;
    Ok(FeatureMatrix {
        cutoff_month: sidecar.cutoff_month,
        student_ids: ids,
        school_ids: groups,
        quintiles,
        response,
        matrix,
    })
}
