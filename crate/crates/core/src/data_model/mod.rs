//! LMS entity schema, cleaning rules and feature construction.
//!
//! Raw inputs are six delimiter-separated files (see [`io`]): students,
//! test results, activity attempts, message days, lessons assigned to
//! classes and the activity-to-lesson map. Class enrollments are not an
//! input; they are resolved from the activity log.

mod clean;
mod features;
pub mod io;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{dedup_tests, resolve_enrollment};
pub use features::{build_features, FeatureMatrix, FIRST_MONTH, LAST_MONTH, MONTHLY_BLOCK, STATIC_COLUMNS};

/// The nineteen departments of Uruguay.
pub const DEPARTMENTS: [&str; 19] = [
    "Artigas",
    "Canelones",
    "Cerro Largo",
    "Colonia",
    "Durazno",
    "Flores",
    "Florida",
    "Lavalleja",
    "Maldonado",
    "Montevideo",
    "Paysandu",
    "Rio Negro",
    "Rivera",
    "Rocha",
    "Salto",
    "San Jose",
    "Soriano",
    "Tacuarembo",
    "Treinta y Tres",
];

/// Lowest and highest adaptive-test scores on record.
pub const MIN_SCORE: f64 = 225.21;
pub const MAX_SCORE: f64 = 900.0;

/// Lower bounds of A1.1, A1.2, A2.1, A2.2 and B1.
pub const LEVEL_CUTS: [f64; 5] = [372.9, 444.4, 495.5, 527.9, 599.4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    PreA1,
    A1_1,
    A1_2,
    A2_1,
    A2_2,
    B1,
}

impl Level {
    pub const ALL: [Level; 6] = [
        Level::PreA1,
        Level::A1_1,
        Level::A1_2,
        Level::A2_1,
        Level::A2_2,
        Level::B1,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Level::PreA1 => "PreA1",
            Level::A1_1 => "A1_1",
            Level::A1_2 => "A1_2",
            Level::A2_1 => "A2_1",
            Level::A2_2 => "A2_2",
            Level::B1 => "B1",
        }
    }

    pub fn parse(s: &str) -> Option<Level> {
        Level::ALL.into_iter().find(|l| l.label() == s)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Maps a test score to its proficiency level. Intervals are closed below
/// and open above, so 495.5 is already A2.1.
pub fn map_score_to_level(score: f64) -> Result<Level> {
    if !score.is_finite() {
        return Err(Error::invalid(format!("non-finite test score {score}")));
    }
    let idx = LEVEL_CUTS.iter().take_while(|&&cut| score >= cut).count();
    Ok(Level::ALL[idx])
}

/// 1 when the student reaches A2.1 or higher.
pub fn make_response(test: &TestResult) -> u8 {
    u8::from(test.level >= Level::A2_1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    Rural,
    Urban,
}

impl Zone {
    pub fn label(self) -> &'static str {
        match self {
            Zone::Rural => "Rural",
            Zone::Urban => "Urban",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Student {
    #[serde(rename = "student_id")]
    pub id: String,
    pub department: String,
    pub zone: Zone,
    /// Sociocultural context of the school, 1 (lowest) to 5.
    pub quintile: u8,
    pub school_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub student_id: String,
    pub date: NaiveDate,
    pub score: f64,
    pub level: Level,
}

impl TestResult {
    pub fn new(student_id: impl Into<String>, date: NaiveDate, score: f64) -> Result<Self> {
        Ok(Self {
            student_id: student_id.into(),
            date,
            score,
            level: map_score_to_level(score)?,
        })
    }
}

/// One student's record for one activity on one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityAttempt {
    pub student_id: String,
    pub activity_id: String,
    /// Class the student was working in when the record was logged.
    pub class_id: String,
    pub date: NaiveDate,
    pub times_completed: u32,
    pub questions: u32,
    pub correct: u32,
    pub pts_min: f64,
    pub pts_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageDay {
    pub student_id: String,
    pub date: NaiveDate,
    pub sent: u32,
    pub received: u32,
    pub threads: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAssignment {
    pub student_id: String,
    pub class_id: String,
    pub enroll_date: NaiveDate,
    /// `None` while still enrolled.
    pub unenroll_date: Option<NaiveDate>,
}

impl ClassAssignment {
    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.enroll_date && self.unenroll_date.is_none_or(|end| date <= end)
    }
}

/// A lesson assigned by a teacher to a class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLesson {
    pub class_id: String,
    pub lesson_id: String,
    pub date: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityLesson {
    pub activity_id: String,
    pub lesson_id: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntitySet {
    pub students: Vec<Student>,
    pub tests: Vec<TestResult>,
    pub attempts: Vec<ActivityAttempt>,
    pub messages: Vec<MessageDay>,
    pub class_lessons: Vec<ClassLesson>,
    pub activity_lessons: Vec<ActivityLesson>,
}

impl EntitySet {
    /// Checks every per-record invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        for s in &self.students {
            if !(1..=5).contains(&s.quintile) {
                return Err(Error::invalid(format!(
                    "student {}: quintile {} outside 1..5",
                    s.id, s.quintile
                )));
            }
            if !DEPARTMENTS.contains(&s.department.as_str()) {
                return Err(Error::invalid(format!(
                    "student {}: unknown department {:?}",
                    s.id, s.department
                )));
            }
        }
        for t in &self.tests {
            if !(MIN_SCORE..=MAX_SCORE).contains(&t.score) {
                return Err(Error::invalid(format!(
                    "student {}: score {} outside observed range",
                    t.student_id, t.score
                )));
            }
            if map_score_to_level(t.score)? != t.level {
                return Err(Error::invalid(format!(
                    "student {}: level {} inconsistent with score {}",
                    t.student_id, t.level, t.score
                )));
            }
        }
        for a in &self.attempts {
            if a.correct > a.questions {
                return Err(Error::invalid(format!(
                    "student {} activity {}: {} correct of {} questions",
                    a.student_id, a.activity_id, a.correct, a.questions
                )));
            }
            if a.pts_min > a.pts_max || (a.times_completed == 1 && a.pts_min != a.pts_max) {
                return Err(Error::invalid(format!(
                    "student {} activity {}: inconsistent points [{}, {}] over {} attempts",
                    a.student_id, a.activity_id, a.pts_min, a.pts_max, a.times_completed
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_examples() {
        assert_eq!(map_score_to_level(500.0).unwrap(), Level::A2_1);
        assert_eq!(map_score_to_level(225.21).unwrap(), Level::PreA1);
        assert_eq!(map_score_to_level(900.0).unwrap(), Level::B1);
        assert!(map_score_to_level(f64::NAN).is_err());
        assert!(map_score_to_level(f64::INFINITY).is_err());
    }

    #[test]
    fn level_boundaries_are_lower_inclusive() {
        assert_eq!(map_score_to_level(372.9).unwrap(), Level::A1_1);
        assert_eq!(map_score_to_level(372.89999).unwrap(), Level::PreA1);
        assert_eq!(map_score_to_level(599.4).unwrap(), Level::B1);
        assert_eq!(map_score_to_level(599.39999).unwrap(), Level::A2_2);
    }

    #[test]
    fn response_examples() {
        let d = NaiveDate::from_ymd_opt(2021, 11, 10).unwrap();
        let r = |s: f64| make_response(&TestResult::new("s", d, s).unwrap());
        assert_eq!(r(527.0), 1);
        assert_eq!(r(495.4), 0);
        assert_eq!(r(599.5), 1);
        assert_eq!(r(495.5), 1);
    }

    #[test]
    fn validate_rejects_bad_records() {
        let d = NaiveDate::from_ymd_opt(2021, 4, 1).unwrap();
        let mut set = EntitySet::default();
        set.attempts.push(ActivityAttempt {
            student_id: "s1".into(),
            activity_id: "a1".into(),
            class_id: "c1".into(),
            date: d,
            times_completed: 1,
            questions: 3,
            correct: 4,
            pts_min: 1.0,
            pts_max: 1.0,
        });
        assert!(set.validate().is_err());
        set.attempts[0].correct = 2;
        assert!(set.validate().is_ok());
        set.attempts[0].pts_max = 2.0;
        assert!(set.validate().is_err());
    }

    #[test]
    fn departments_are_distinct() {
        let mut d = DEPARTMENTS.to_vec();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 19);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn level_monotone_and_consistent(a in 0.0f64..1000.0, b in 0.0f64..1000.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let (llo, lhi) = (map_score_to_level(lo).unwrap(), map_score_to_level(hi).unwrap());
                prop_assert!(llo <= lhi);
                prop_assert_eq!(llo >= Level::A2_1, lo >= 495.5);
            }
        }
    }
}
