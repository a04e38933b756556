//! Monthly cumulative feature matrix.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    dedup_tests, make_response, resolve_enrollment, ActivityAttempt, ClassAssignment, EntitySet, MessageDay, Student,
    DEPARTMENTS,
};
use crate::error::{Error, Result};
use crate::matrix::{ColumnSpec, Matrix};

pub const FIRST_MONTH: u32 = 3;
pub const LAST_MONTH: u32 = 11;

/// Per-month variables, in column order within each month block.
pub const MONTHLY_BLOCK: [&str; 17] = [
    "cum_act",
    "cum_qs",
    "cum_correct",
    "att_prom",
    "activ_prom",
    "qs_prom",
    "pts_min",
    "pts_max",
    "acc",
    "cum_days",
    "cum_attempts",
    "cum_assign_act",
    "perc_act_done",
    "cum_mess_send",
    "cum_mess_rec",
    "cum_mess_thr",
    "class_lb",
];

pub const STATIC_COLUMNS: [&str; 3] = ["department", "zone", "sociocultural_context"];

/// Predictors for the retained students at one cutoff month, plus the
/// grouping key and the binary response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub cutoff_month: u32,
    pub student_ids: Vec<String>,
    pub school_ids: Vec<String>,
    pub quintiles: Vec<u8>,
    pub response: Vec<u8>,
    pub matrix: Matrix,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.student_ids.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            cutoff_month: self.cutoff_month,
            student_ids: rows.iter().map(|&i| self.student_ids[i].clone()).collect(),
            school_ids: rows.iter().map(|&i| self.school_ids[i].clone()).collect(),
            quintiles: rows.iter().map(|&i| self.quintiles[i]).collect(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
            matrix: self.matrix.select_rows(rows),
        }
    }

    pub fn response_f64(&self) -> Vec<f64> {
        self.response.iter().map(|&y| f64::from(y)).collect()
    }

    /// Indices of the numeric monthly-block columns (usage predictors);
    /// static context and class columns are excluded.
    pub fn usage_columns(&self) -> Vec<usize> {
        self.matrix
            .columns()
            .iter()
            .enumerate()
            .filter(|(_, c)| is_monthly(&c.name) && !c.kind.is_categorical())
            .map(|(j, _)| j)
            .collect()
    }
}

pub(crate) fn is_monthly(name: &str) -> bool {
    MONTHLY_BLOCK.iter().any(|base| {
        name.strip_prefix(base)
            .and_then(|rest| rest.strip_prefix('_'))
            .is_some_and(|mm| mm.parse::<u32>().is_ok())
    })
}

fn month_end(year: i32, month: u32) -> NaiveDate {
    let (y, m) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(y, m, 1).expect("valid month") - chrono::Days::new(1)
}

#[derive(Default, Clone)]
struct MonthAgg {
    records: u32,
    attempts: u64,
    questions: u64,
    correct: u64,
    pts_min: f64,
    pts_max: f64,
    days: BTreeSet<NaiveDate>,
    sent: u64,
    received: u64,
    threads: u64,
}

/// Column layout for cutoff month `m`.
fn columns_for(m: u32, class_levels: &[String]) -> Vec<ColumnSpec> {
    let mut cols = vec![
        ColumnSpec::categorical("department", DEPARTMENTS.iter().map(|s| s.to_string()).collect()),
        ColumnSpec::categorical("zone", vec!["Rural".into(), "Urban".into()]),
        ColumnSpec::numeric("sociocultural_context"),
    ];
    for mm in FIRST_MONTH..=m {
        for base in MONTHLY_BLOCK {
            let name = format!("{base}_{mm}");
            if base == "class_lb" {
                cols.push(ColumnSpec::categorical(name, class_levels.to_vec()));
            } else {
                cols.push(ColumnSpec::numeric(name));
            }
        }
    }
    cols
}

/// Builds one row per retained student with monthly blocks for months
/// `3..=m`.
///
/// A student is retained when they appear in the student table, have at
/// least one test result and at least one recorded activity. Rows are sorted
/// by student id. The retained set does not depend on `m`.
pub fn build_features(entities: &EntitySet, m: u32) -> Result<FeatureMatrix> {
    if !(FIRST_MONTH..=LAST_MONTH).contains(&m) {
        return Err(Error::invalid(format!(
            "cutoff month {m} outside {FIRST_MONTH}..={LAST_MONTH}"
        )));
    }

    let tests: BTreeMap<String, u8> = dedup_tests(&entities.tests)
        .into_iter()
        .map(|t| {
            let y = make_response(&t);
            (t.student_id, y)
        })
        .collect();

    let mut attempts: BTreeMap<&str, Vec<&ActivityAttempt>> = BTreeMap::new();
    for a in &entities.attempts {
        attempts.entry(a.student_id.as_str()).or_default().push(a);
    }
    let mut messages: BTreeMap<&str, Vec<&MessageDay>> = BTreeMap::new();
    for msg in &entities.messages {
        messages.entry(msg.student_id.as_str()).or_default().push(msg);
    }
    let mut enrollments: BTreeMap<String, Vec<ClassAssignment>> = BTreeMap::new();
    for e in resolve_enrollment(&entities.attempts) {
        enrollments.entry(e.student_id.clone()).or_default().push(e);
    }

    // first assignment date of each activity to each class
    let mut lesson_activities: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for al in &entities.activity_lessons {
        lesson_activities
            .entry(al.lesson_id.as_str())
            .or_default()
            .push(al.activity_id.as_str());
    }
    let mut first_assigned: BTreeMap<&str, BTreeMap<&str, NaiveDate>> = BTreeMap::new();
    for cl in &entities.class_lessons {
        for &act in lesson_activities.get(cl.lesson_id.as_str()).into_iter().flatten() {
            first_assigned
                .entry(cl.class_id.as_str())
                .or_default()
                .entry(act)
                .and_modify(|d| *d = (*d).min(cl.date))
                .or_insert(cl.date);
        }
    }

    let mut retained: Vec<&Student> = entities
        .students
        .iter()
        .filter(|s| tests.contains_key(&s.id) && attempts.contains_key(s.id.as_str()))
        .collect();
    retained.sort_by(|a, b| a.id.cmp(&b.id));
    retained.dedup_by(|a, b| a.id == b.id);

    let year = entities.attempts.iter().map(|a| a.date.year()).min().unwrap_or(2021);

    let class_levels: Vec<String> = retained
        .iter()
        .flat_map(|s| enrollments.get(&s.id).into_iter().flatten().map(|e| e.class_id.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_code: BTreeMap<&str, f64> = class_levels
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as f64))
        .collect();

    let columns = columns_for(m, &class_levels);
    let rows: Vec<Vec<f64>> = retained
        .par_iter()
        .map(|s| {
            let no_enrollment = Vec::new();
            let student_enroll = enrollments.get(&s.id).unwrap_or(&no_enrollment);
            student_row(
                s,
                m,
                year,
                &attempts[s.id.as_str()],
                messages.get(s.id.as_str()).map_or(&[][..], Vec::as_slice),
                student_enroll,
                &first_assigned,
                &class_code,
            )
        })
        .collect();

    let mut cols = vec![Vec::with_capacity(rows.len()); columns.len()];
    for row in &rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(*v);
        }
    }
    let matrix = Matrix::from_columns(columns, cols)?;

    Ok(FeatureMatrix {
        cutoff_month: m,
        student_ids: retained.iter().map(|s| s.id.clone()).collect(),
        school_ids: retained.iter().map(|s| s.school_id.clone()).collect(),
        quintiles: retained.iter().map(|s| s.quintile).collect(),
        response: retained.iter().map(|s| tests[&s.id]).collect(),
        matrix,
    })
}

#[allow(clippy::too_many_arguments)]
fn student_row(
    student: &Student,
    m: u32,
    year: i32,
    attempts: &[&ActivityAttempt],
    messages: &[&MessageDay],
    enrollments: &[ClassAssignment],
    first_assigned: &BTreeMap<&str, BTreeMap<&str, NaiveDate>>,
    class_code: &BTreeMap<&str, f64>,
) -> Vec<f64> {
    // index 0 collects everything dated before March
    let mut months = vec![MonthAgg::default(); (LAST_MONTH + 1) as usize];
    let slot = |d: NaiveDate| -> Option<usize> {
        if d.year() < year {
            Some(0)
        } else if d.year() == year && d.month() <= LAST_MONTH {
            Some(if d.month() < FIRST_MONTH { 0 } else { d.month() as usize })
        } else {
            None
        }
    };
    for a in attempts {
        if let Some(k) = slot(a.date) {
            let agg = &mut months[k];
            agg.records += 1;
            agg.attempts += u64::from(a.times_completed);
            agg.questions += u64::from(a.questions);
            agg.correct += u64::from(a.correct);
            agg.pts_min += a.pts_min;
            agg.pts_max += a.pts_max;
            agg.days.insert(a.date);
        }
    }
    for msg in messages {
        if let Some(k) = slot(msg.date) {
            let agg = &mut months[k];
            agg.sent += u64::from(msg.sent);
            agg.received += u64::from(msg.received);
            agg.threads += u64::from(msg.threads);
        }
    }

    let department = DEPARTMENTS
        .iter()
        .position(|d| *d == student.department)
        .map_or(f64::NAN, |i| i as f64);
    let zone = match student.zone {
        super::Zone::Rural => 0.0,
        super::Zone::Urban => 1.0,
    };
    let mut row = vec![department, zone, f64::from(student.quintile)];

    let mut cum_act = u64::from(months[0].records);
    let mut cum_qs = months[0].questions;
    let mut cum_correct = months[0].correct;
    let mut cum_attempts = months[0].attempts;
    let mut cum_sent = months[0].sent;
    let mut cum_rec = months[0].received;
    let mut cum_thr = months[0].threads;
    let mut cum_days = months[0].days.len() as u64;

    for mm in FIRST_MONTH..=m {
        let agg = &months[mm as usize];
        let end = month_end(year, mm);
        cum_act += u64::from(agg.records);
        cum_qs += agg.questions;
        cum_correct += agg.correct;
        cum_attempts += agg.attempts;
        cum_sent += agg.sent;
        cum_rec += agg.received;
        cum_thr += agg.threads;
        cum_days += agg.days.len() as u64;

        let n = f64::from(agg.records);
        let (att_prom, qs_prom, pts_min, pts_max) = if agg.records == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                agg.attempts as f64 / n,
                agg.questions as f64 / n,
                agg.pts_min / n,
                agg.pts_max / n,
            )
        };
        let activ_prom = if agg.days.is_empty() {
            0.0
        } else {
            n / agg.days.len() as f64
        };
        let acc = if agg.questions == 0 {
            f64::NAN
        } else {
            agg.correct as f64 / agg.questions as f64
        };

        let mut assigned: HashSet<&str> = HashSet::new();
        for e in enrollments.iter().filter(|e| e.enroll_date <= end) {
            if let Some(acts) = first_assigned.get(e.class_id.as_str()) {
                assigned.extend(acts.iter().filter(|(_, d)| **d <= end).map(|(a, _)| *a));
            }
        }
        let cum_assign = assigned.len() as u64;
        let perc_done = if cum_assign == 0 {
            0.0
        } else {
            cum_act as f64 / cum_assign as f64
        };

        let class = enrollments
            .iter()
            .find(|e| e.contains(end))
            .map_or(f64::NAN, |e| class_code[e.class_id.as_str()]);

        row.extend_from_slice(&[
            cum_act as f64,
            cum_qs as f64,
            cum_correct as f64,
            att_prom,
            activ_prom,
            qs_prom,
            pts_min,
            pts_max,
            acc,
            cum_days as f64,
            cum_attempts as f64,
            cum_assign as f64,
            perc_done,
            cum_sent as f64,
            cum_rec as f64,
            cum_thr as f64,
            class,
        ]);
    }
    row
}
