use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};

use super::{ActivityAttempt, ClassAssignment, TestResult};

/// Keeps one test per student: the earliest date, and on a same-day tie the
/// lowest score. Output is sorted by student id.
pub fn dedup_tests(results: &[TestResult]) -> Vec<TestResult> {
    let mut best: BTreeMap<&str, &TestResult> = BTreeMap::new();
    for t in results {
        best.entry(t.student_id.as_str())
            .and_modify(|cur| {
                if (t.date, t.score) < (cur.date, cur.score) {
                    *cur = t;
                }
            })
            .or_insert(t);
    }
    best.into_values().cloned().collect()
}

/// Derives class enrollment intervals from the activity log.
///
/// A student enrolls in a class on the date of their first activity there and
/// leaves the previous class the day before. Classes are ordered by first
/// activity date (ties by class id); a class whose successor starts on the
/// same day gets an empty interval and is dropped. Output is sorted by
/// student id, then enrollment date.
pub fn resolve_enrollment(attempts: &[ActivityAttempt]) -> Vec<ClassAssignment> {
    let mut first_seen: BTreeMap<&str, BTreeMap<&str, NaiveDate>> = BTreeMap::new();
    for a in attempts {
        first_seen
            .entry(a.student_id.as_str())
            .or_default()
            .entry(a.class_id.as_str())
            .and_modify(|d| *d = (*d).min(a.date))
            .or_insert(a.date);
    }

    let mut out = Vec::new();
    for (student, classes) in first_seen {
        let mut ordered: Vec<(NaiveDate, &str)> = classes.into_iter().map(|(c, d)| (d, c)).collect();
        ordered.sort();
        for (k, &(start, class)) in ordered.iter().enumerate() {
            let end = ordered.get(k + 1).map(|&(next, _)| next - Days::new(1));
            if end.is_some_and(|e| e < start) {
                continue;
            }
            out.push(ClassAssignment {
                student_id: student.to_string(),
                class_id: class.to_string(),
                enroll_date: start,
                unenroll_date: end,
            });
        }
    }
    out
}
