//! Synthetic LMS entity generator with known ground truth.
//!
//! Schools carry a quintile, a department, a zone and a random intercept
//! `u_g ~ N(0, sigma_u^2)`. Each student has a latent monthly activity
//! intensity whose log-mean rises with quintile and which drifts linearly
//! across the year around that mean, so early months reveal it only
//! partially; monthly record counts are Gamma-Poisson (negative-binomial)
//! around it. The test score is
//!
//! ```text
//! clamp(base + quintile_effect[q] + usage_effect * z_i + u_g + eps, 225.21, 900)
//! ```
//!
//! with `z_i` the standardized year-average log-intensity and `eps ~ N(0, noise_sd^2)`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    io, ActivityAttempt, ActivityLesson, ClassLesson, EntitySet, MessageDay, Student, TestResult, Zone, DEPARTMENTS,
    FIRST_MONTH, LAST_MONTH, MAX_SCORE, MIN_SCORE,
};
use crate::error::{Error, Result};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

const YEAR: i32 = 2021;
const N_ACTIVITIES: usize = 300;
const N_LESSONS: usize = 60;
const CLASS_SIZE: usize = 25;
const LOG_INTENSITY_SD: f64 = 0.6;
/// Sd of the per-student monthly slope of log intensity.
const TREND_SD: f64 = 0.1;
const NB_SHAPE: f64 = 1.0;
/// Relative activity level for March..November; April and August peak.
const SEASON: [f64; 9] = [0.7, 1.3, 1.0, 0.9, 0.6, 1.3, 1.0, 0.9, 0.8];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_students: usize,
    pub n_schools: usize,
    /// Share of schools in each quintile.
    pub quintile_mix: [f64; 5],
    /// Last month with generated activity (3..=11).
    pub months: u32,
    /// Standard deviation of the school random intercept, in score points.
    pub sigma_u: f64,
    /// Score points per standard deviation of log usage intensity.
    pub usage_effect: f64,
    pub quintile_effects: [f64; 5],
    pub noise_sd: f64,
    /// Score intercept; the default puts about 40% of students below A2.1.
    pub base_score: f64,
    /// Share of students with no recorded activity at all.
    pub inactive_share: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_students: 5000,
            n_schools: 100,
            quintile_mix: [0.2; 5],
            months: LAST_MONTH,
            sigma_u: 15.0,
            usage_effect: 30.0,
            quintile_effects: [-20.0, -10.0, 0.0, 10.0, 20.0],
            noise_sd: 60.0,
            base_score: 515.0,
            inactive_share: 0.03,
            seed: 20210301,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.quintile_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.quintile_mix.iter().any(|p| *p < 0.0) {
            return Err(Error::invalid(format!(
                "quintile_mix must be proportions summing to 1, got {total}"
            )));
        }
        if self.n_schools < 2 {
            return Err(Error::invalid(format!(
                "n_schools must be at least 2, got {}",
                self.n_schools
            )));
        }
        if self.n_students < self.n_schools {
            return Err(Error::invalid(format!(
                "n_students ({}) must be at least n_schools ({})",
                self.n_students, self.n_schools
            )));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::invalid(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        if !(self.sigma_u >= 0.0) {
            return Err(Error::invalid(format!(
                "sigma_u must be non-negative, got {}",
                self.sigma_u
            )));
        }
        if !(FIRST_MONTH..=LAST_MONTH).contains(&self.months) {
            return Err(Error::invalid(format!(
                "months must lie in 3..=11, got {}",
                self.months
            )));
        }
        if !(0.0..1.0).contains(&self.inactive_share) {
            return Err(Error::invalid("inactive_share must lie in [0, 1)"));
        }
        Ok(())
    }

    fn log_intensity_mean(q: u8) -> f64 {
        8.0f64.ln() + 0.2 * (f64::from(q) - 3.0)
    }

    /// Population mean and sd of log intensity under the quintile mix.
    fn log_intensity_moments(&self) -> (f64, f64) {
        let mean: f64 = (1..=5u8)
            .map(|q| self.quintile_mix[q as usize - 1] * Self::log_intensity_mean(q))
            .sum();
        let between: f64 = (1..=5u8)
            .map(|q| self.quintile_mix[q as usize - 1] * (Self::log_intensity_mean(q) - mean).powi(2))
            .sum();
        (mean, (LOG_INTENSITY_SD * LOG_INTENSITY_SD + between).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchoolTruth {
    pub quintile: u8,
    pub department: String,
    pub zone: Zone,
    pub effect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentTruth {
    pub school_id: String,
    /// Expected activity records per month before seasonal scaling.
    pub intensity: f64,
    /// Standardized log intensity entering the score.
    pub z_intensity: f64,
    pub active: bool,
    /// Score of the test that survives deduplication.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub schools: BTreeMap<String, SchoolTruth>,
    pub students: BTreeMap<String, StudentTruth>,
}

impl GroundTruth {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn school_id(g: usize) -> String {
    format!("SCH{g:04}")
}

fn student_id(i: usize) -> String {
    format!("ST{i:06}")
}

fn class_id(g: usize, k: usize) -> String {
    format!("CL{g:04}_{k}")
}

fn activity_id(k: usize) -> String {
    format!("ACT{k:03}")
}

fn lesson_id(k: usize) -> String {
    format!("LES{k:02}")
}

fn days_in_month(month: u32) -> u32 {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(YEAR + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(YEAR, month + 1, 1)
    }
    .expect("valid date");
    (next - Days::new(1)).day()
}

fn date(month: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(YEAR, month, day).expect("valid date")
}

struct StudentOutput {
    student: Student,
    truth: StudentTruth,
    tests: Vec<TestResult>,
    attempts: Vec<ActivityAttempt>,
    messages: Vec<MessageDay>,
}

/// Generates a full entity set and its ground truth.
pub fn generate(config: &SynthConfig) -> Result<(EntitySet, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // schools: quintiles allocated by the mix, then shuffled
    let mut quintiles = Vec::with_capacity(config.n_schools);
    let mut acc = 0.0;
    for (k, p) in config.quintile_mix.iter().enumerate() {
        acc += p;
        let upto = ((acc * config.n_schools as f64).round() as usize).min(config.n_schools);
        while quintiles.len() < upto {
            quintiles.push(k as u8 + 1);
        }
    }
    while quintiles.len() < config.n_schools {
        quintiles.push(5);
    }
    for i in (1..quintiles.len()).rev() {
        let j = rng.random_range(0..=i);
        quintiles.swap(i, j);
    }

    let u_dist = Normal::new(0.0, config.sigma_u).map_err(|e| Error::invalid(e.to_string()))?;
    let mut schools = Vec::with_capacity(config.n_schools);
    for &q in &quintiles {
        let department = DEPARTMENTS[rng.random_range(0..DEPARTMENTS.len())].to_string();
        let zone = if rng.random::<f64>() < 0.2 {
            Zone::Rural
        } else {
            Zone::Urban
        };
        let effect = if config.sigma_u == 0.0 {
            0.0
        } else {
            u_dist.sample(&mut rng)
        };
        schools.push(SchoolTruth {
            quintile: q,
            department,
            zone,
            effect,
        });
    }

    let school_size: Vec<usize> = (0..config.n_schools)
        .map(|g| config.n_students / config.n_schools + usize::from(g < config.n_students % config.n_schools))
        .collect();
    let n_classes: Vec<usize> = school_size
        .iter()
        .map(|&n| ((n as f64 / CLASS_SIZE as f64).round() as usize).max(1))
        .collect();

    // lessons assigned to each class: two per month
    let mut class_lessons = Vec::new();
    for (g, &nc) in n_classes.iter().enumerate() {
        for k in 0..nc {
            for month in FIRST_MONTH..=config.months {
                for _ in 0..2 {
                    let day = rng.random_range(1..=days_in_month(month));
                    class_lessons.push(ClassLesson {
                        class_id: class_id(g, k),
                        lesson_id: lesson_id(rng.random_range(0..N_LESSONS)),
                        date: date(month, day),
                    });
                }
            }
        }
    }
    let activity_lessons: Vec<ActivityLesson> = (0..N_ACTIVITIES)
        .flat_map(|k| {
            let primary = k * N_LESSONS / N_ACTIVITIES;
            let mut v = vec![ActivityLesson {
                activity_id: activity_id(k),
                lesson_id: lesson_id(primary),
            }];
            if k % 10 == 0 {
                v.push(ActivityLesson {
                    activity_id: activity_id(k),
                    lesson_id: lesson_id((primary + 1) % N_LESSONS),
                });
            }
            v
        })
        .collect();

    let (li_mean, li_sd) = config.log_intensity_moments();
    let outputs: Vec<StudentOutput> = (0..config.n_students)
        .into_par_iter()
        .map(|i| {
            let mut srng = ChaCha8Rng::seed_from_u64(config.seed);
            srng.set_stream(i as u64 + 1);
            generate_student(config, i, &schools, &n_classes, li_mean, li_sd, &mut srng)
        })
        .collect();

    let mut entities = EntitySet {
        class_lessons,
        activity_lessons,
        ..Default::default()
    };
    let mut students_truth = BTreeMap::new();
    for out in outputs {
        students_truth.insert(out.student.id.clone(), out.truth);
        entities.students.push(out.student);
        entities.tests.extend(out.tests);
        entities.attempts.extend(out.attempts);
        entities.messages.extend(out.messages);
    }
    let truth = GroundTruth {
        config: config.clone(),
        schools: schools
            .into_iter()
            .enumerate()
            .map(|(g, s)| (school_id(g), s))
            .collect(),
        students: students_truth,
    };
    Ok((entities, truth))
}

#[allow(clippy::too_many_arguments)]
fn generate_student(
    config: &SynthConfig,
    i: usize,
    schools: &[SchoolTruth],
    n_classes: &[usize],
    li_mean: f64,
    li_sd: f64,
    rng: &mut ChaCha8Rng,
) -> StudentOutput {
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let g = i % config.n_schools;
    let school = &schools[g];
    let q = school.quintile;
    let sid = student_id(i);

    let log_intensity = SynthConfig::log_intensity_mean(q) + LOG_INTENSITY_SD * std_normal.sample(rng);
    let intensity = log_intensity.exp();
    let z_intensity = (log_intensity - li_mean) / li_sd;
    let trend = TREND_SD * std_normal.sample(rng);
    let active = rng.random::<f64>() >= config.inactive_share;

    let nc = n_classes[g];
    let home_class = (i / config.n_schools) % nc;
    // occasional mid-year class change
    let switch = (nc >= 2 && rng.random::<f64>() < 0.05).then(|| {
        let month = rng.random_range(5..=9u32);
        (date(month, rng.random_range(1..=28)), (home_class + 1) % nc)
    });

    let skill_logit = 0.5 + 0.1 * (f64::from(q) - 3.0) + 0.5 * std_normal.sample(rng);
    let p_correct = 1.0 / (1.0 + (-skill_logit).exp());
    let nb_mix = Gamma::new(NB_SHAPE, 1.0 / NB_SHAPE).expect("gamma");

    let mut attempts = Vec::new();
    let mut messages = Vec::new();
    if active {
        for month in FIRST_MONTH..=config.months {
            let k = month - FIRST_MONTH;
            let drift = (trend * (f64::from(k) - f64::from(LAST_MONTH - FIRST_MONTH) / 2.0)).exp();
            let rate = intensity * drift * SEASON[k as usize] * nb_mix.sample(rng);
            let count = if rate > 0.0 {
                Poisson::new(rate).expect("poisson").sample(rng) as u32
            } else {
                0
            };
            let dim = days_in_month(month);
            for _ in 0..count {
                let day = date(month, rng.random_range(1..=dim));
                let class = match switch {
                    Some((when, to)) if day >= when => to,
                    _ => home_class,
                };
                let questions = 3 + Poisson::new(4.0).expect("poisson").sample(rng) as u32;
                let correct = Binomial::new(u64::from(questions), p_correct)
                    .expect("binomial")
                    .sample(rng) as u32;
                let times = 1 + Poisson::new(0.4).expect("poisson").sample(rng) as u32;
                let base_pts = 100.0 * f64::from(correct) / f64::from(questions);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for _ in 0..times {
                    let pts = (base_pts + 10.0 * std_normal.sample(rng)).clamp(0.0, 100.0).round();
                    lo = lo.min(pts);
                    hi = hi.max(pts);
                }
                attempts.push(ActivityAttempt {
                    student_id: sid.clone(),
                    activity_id: activity_id(rng.random_range(0..N_ACTIVITIES)),
                    class_id: class_id(g, class),
                    date: day,
                    times_completed: times,
                    questions,
                    correct,
                    pts_min: lo,
                    pts_max: hi,
                });
            }
            let msg_days = Poisson::new(0.25 * f64::from(count) + 1e-9)
                .expect("poisson")
                .sample(rng) as u32;
            for _ in 0..msg_days.min(dim) {
                messages.push(MessageDay {
                    student_id: sid.clone(),
                    date: date(month, rng.random_range(1..=dim)),
                    sent: Poisson::new(1.5).expect("poisson").sample(rng) as u32,
                    received: Poisson::new(1.5).expect("poisson").sample(rng) as u32,
                    threads: 1 + Poisson::new(0.3).expect("poisson").sample(rng) as u32,
                });
            }
        }
        attempts.sort_by(|a, b| (a.date, &a.activity_id).cmp(&(b.date, &b.activity_id)));
        messages.sort_by_key(|m| m.date);
    }

    let raw = config.base_score
        + config.quintile_effects[q as usize - 1]
        + config.usage_effect * z_intensity
        + school.effect
        + config.noise_sd * std_normal.sample(rng);
    let score = raw.clamp(MIN_SCORE, MAX_SCORE);
    let test_date = date(11, 15 + rng.random_range(0..10));
    let mut tests = vec![TestResult::new(&sid, test_date, score).expect("finite score")];
    let extra: f64 = rng.random();
    if extra < 0.05 {
        // later retake, discarded by deduplication
        let retake = (score + 40.0 * std_normal.sample(rng)).clamp(MIN_SCORE, MAX_SCORE);
        let later = test_date + Days::new(rng.random_range(3..10));
        tests.push(TestResult::new(&sid, later, retake).expect("finite score"));
    } else if extra < 0.10 {
        // same-day second attempt scoring at least as high
        let again = (score + (30.0 * std_normal.sample(rng)).abs()).clamp(MIN_SCORE, MAX_SCORE);
        tests.push(TestResult::new(&sid, test_date, again).expect("finite score"));
    }

    StudentOutput {
        student: Student {
            id: sid,
            department: school.department.clone(),
            zone: school.zone,
            quintile: q,
            school_id: school_id(g),
        },
        truth: StudentTruth {
            school_id: school_id(g),
            intensity,
            z_intensity,
            active,
            score,
        },
        tests,
        attempts,
        messages,
    }
}

/// Generates and writes the six entity files plus `ground_truth.json`.
pub fn write_dataset(dir: &Path, config: &SynthConfig) -> Result<(EntitySet, GroundTruth)> {
    let (entities, truth) = generate(config)?;
    io::write_entities(dir, &entities)?;
    truth.write(&dir.join(GROUND_TRUTH_FILE))?;
    Ok((entities, truth))
}
