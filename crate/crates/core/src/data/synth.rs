//! Seeded synthetic assignment data with a student × course hierarchy.
//!
//! Marginals default to the descriptive statistics of a real course
//! dataset (see [`ColumnTargets`]). Delay comes from a linear latent model over
//! standardized predictors plus student and course intercepts, a
//! course-specific slope on the interval predictor and Gaussian noise. The
//! intercept is calibrated so that the requested fraction of rows is timely;
//! positive and negative latent parts are then scaled separately so the
//! delay column also matches its target mean and SD without changing any
//! row's class.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AssignmentRecord, Column, DataError, Dataset};
use crate::rng::{rng_from_seed, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnTarget {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl ColumnTarget {
    const fn new(mean: f64, sd: f64, min: f64, max: f64) -> Self {
        ColumnTarget { mean, sd, min, max }
    }
}

/// Target marginal per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnTargets {
    pub gase: ColumnTarget,
    pub sdls: ColumnTarget,
    pub apss: ColumnTarget,
    pub aps: ColumnTarget,
    pub clicks_assignment: ColumnTarget,
    pub interval_days: ColumnTarget,
    pub clicks_activities: ColumnTarget,
    pub delay_days: ColumnTarget,
}

impl Default for ColumnTargets {
    fn default() -> Self {
        ColumnTargets {
            gase: ColumnTarget::new(19.71, 3.10, 8.0, 25.0),
            sdls: ColumnTarget::new(38.74, 5.29, 18.0, 50.0),
            apss: ColumnTarget::new(11.04, 4.16, 5.0, 21.0),
            aps: ColumnTarget::new(72.51, 11.87, 43.0, 104.0),
            clicks_assignment: ColumnTarget::new(6.58, 4.91, 1.0, 34.0),
            interval_days: ColumnTarget::new(-7.13, 32.40, -150.30, 98.72),
            clicks_activities: ColumnTarget::new(173.83, 168.44, 0.0, 1237.0),
            delay_days: ColumnTarget::new(-1.66, 18.26, -113.51, 132.43),
        }
    }
}

impl ColumnTargets {
    pub fn get(&self, column: Column) -> ColumnTarget {
        match column {
            Column::ClicksAssignment => self.clicks_assignment,
            Column::IntervalDays => self.interval_days,
            Column::ClicksActivities => self.clicks_activities,
            Column::Gase => self.gase,
            Column::Sdls => self.sdls,
            Column::Apss => self.apss,
            Column::Aps => self.aps,
            Column::Delay => self.delay_days,
        }
    }
}

/// Latent-delay coefficient per standardized predictor. Positive values
/// push towards late submission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalStrengths {
    pub clicks_assignment: f64,
    pub interval_days: f64,
    pub clicks_activities: f64,
    pub gase: f64,
    pub sdls: f64,
    pub apss: f64,
    pub aps: f64,
}

impl Default for SignalStrengths {
    fn default() -> Self {
        SignalStrengths {
            clicks_assignment: -0.45,
            interval_days: 1.0,
            clicks_activities: -0.3,
            gase: -0.3,
            sdls: -0.15,
            apss: 0.3,
            aps: 0.2,
        }
    }
}

impl SignalStrengths {
    pub fn zero() -> Self {
        SignalStrengths {
            clicks_assignment: 0.0,
            interval_days: 0.0,
            clicks_activities: 0.0,
            gase: 0.0,
            sdls: 0.0,
            apss: 0.0,
            aps: 0.0,
        }
    }

    pub fn get(&self, column: Column) -> f64 {
        match column {
            Column::ClicksAssignment => self.clicks_assignment,
            Column::IntervalDays => self.interval_days,
            Column::ClicksActivities => self.clicks_activities,
            Column::Gase => self.gase,
            Column::Sdls => self.sdls,
            Column::Apss => self.apss,
            Column::Aps => self.aps,
            Column::Delay => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_students: usize,
    pub n_courses: usize,
    pub n_assignments: usize,
    pub target_timely_fraction: f64,
    pub column_targets: ColumnTargets,
    pub signal_strengths: SignalStrengths,
    pub student_effect_sd: f64,
    pub course_effect_sd: f64,
    /// SD of the course-specific deviation of the interval slope.
    pub course_slope_sd: f64,
    pub noise_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_students: 134,
            n_courses: 126,
            n_assignments: 1107,
            target_timely_fraction: 0.67,
            column_targets: ColumnTargets::default(),
            signal_strengths: SignalStrengths::default(),
            student_effect_sd: 0.3,
            course_effect_sd: 0.3,
            course_slope_sd: 0.25,
            noise_sd: 0.7,
        }
    }
}

impl SynthConfig {
    pub fn with_assignments(mut self, n: usize) -> Self {
        self.n_assignments = n;
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidConfig(m));
        if self.n_students == 0 || self.n_courses == 0 {
            return bad("need at least one student and one course".into());
        }
        if self.n_assignments < 2 {
            return bad("need at least two assignments".into());
        }
        let f = self.target_timely_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("target_timely_fraction must lie in (0, 1), got {f}"));
        }
        for c in Column::ALL {
            let t = self.column_targets.get(c);
            if !(t.min < t.max) {
                return bad(format!("{}: min {} must be below max {}", c.csv_name(), t.min, t.max));
            }
            if !(t.sd > 0.0) || !(t.mean >= t.min && t.mean <= t.max) {
                return bad(format!("{}: invalid mean/sd", c.csv_name()));
            }
        }
        if c_neg(self.noise_sd) || c_neg(self.student_effect_sd) || c_neg(self.course_effect_sd) || c_neg(self.course_slope_sd) {
            return bad("standard deviations must be non-negative".into());
        }
        if Column::FEATURES.iter().any(|&c| !self.signal_strengths.get(c).is_finite()) {
            return bad("signal strengths must be finite".into());
        }
        Ok(())
    }
}

fn c_neg(v: f64) -> bool {
    !(v >= 0.0)
}

/// Rescales per-unit draws so their row-weighted mean and SD hit the target,
/// then clamps (and optionally rounds), re-centering a few times so the
/// clamped column keeps the target mean.
fn calibrate(draws: &[f64], weights: &[f64], target: ColumnTarget, decimals: Option<i32>) -> Vec<f64> {
    let wsum: f64 = weights.iter().sum();
    let wmean = |v: &[f64]| v.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let m = wmean(draws);
    let var = draws.iter().zip(weights).map(|(x, w)| w * (x - m).powi(2)).sum::<f64>() / wsum;
    let sd = var.sqrt();
    let z: Vec<f64> = draws
        .iter()
        .map(|x| if sd > 0.0 { (x - m) / sd } else { 0.0 })
        .collect();
    let round = |v: f64| match decimals {
        Some(d) => {
            let p = 10f64.powi(d);
            (v * p).round() / p
        }
        None => v,
    };
    let mut shift = 0.0;
    let mut out = vec![0.0; z.len()];
    for _ in 0..25 {
        for (o, zi) in out.iter_mut().zip(&z) {
            *o = round((target.mean + target.sd * zi + shift).clamp(target.min, target.max));
        }
        let err = target.mean - wmean(&out);
        if err.abs() < 1e-9 * target.sd {
            break;
        }
        shift += err;
    }
    out
}

struct Layout {
    student: Vec<usize>,
    course: Vec<usize>,
}

fn layout(config: &SynthConfig, rng: &mut Rng) -> Layout {
    let (ns, nc) = (config.n_students, config.n_courses);
    let mut students: Vec<usize> = (0..ns).collect();
    let mut courses: Vec<usize> = (0..nc).collect();
    students.shuffle(rng);
    courses.shuffle(rng);
    let mut enrollments: Vec<(usize, usize)> = (0..ns.max(nc))
        .map(|i| (students[i % ns], courses[i % nc]))
        .collect();
    for _ in 0..ns / 3 {
        let pair = (rng.random_range(0..ns), rng.random_range(0..nc));
        if !enrollments.contains(&pair) {
            enrollments.push(pair);
        }
    }
    enrollments.shuffle(rng);
    let n = config.n_assignments;
    let mut student = Vec::with_capacity(n);
    let mut course = Vec::with_capacity(n);
    for i in 0..n {
        let (s, c) = if i < enrollments.len() {
            enrollments[i]
        } else {
            enrollments[rng.random_range(0..enrollments.len())]
        };
        student.push(s);
        course.push(c);
    }
    Layout { student, course }
}

fn counts(index: &[usize], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for &i in index {
        c[i] += 1.0;
    }
    c
}

/// Generates a dataset; a pure function of `(config, seed)`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Dataset, DataError> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let n = config.n_assignments;
    let lay = layout(config, &mut rng);
    let student_w = counts(&lay.student, config.n_students);
    let course_w = counts(&lay.course, config.n_courses);
    let row_w = vec![1.0; n];
    let targets = &config.column_targets;

    let std_normal = |k: usize, rng: &mut Rng| -> Vec<f64> {
        (0..k).map(|_| StandardNormal.sample(rng)).collect()
    };

    // questionnaire scores: one draw per student, integer sums
    let mut subjective = Vec::new();
    for c in [Column::Gase, Column::Sdls, Column::Apss, Column::Aps] {
        let draws = std_normal(config.n_students, &mut rng);
        subjective.push(calibrate(&draws, &student_w, targets.get(c), Some(0)));
    }

    // activity clicks: right-skewed, one draw per course
    let act = targets.clicks_activities;
    let shape = (act.mean / act.sd).powi(2).max(0.05);
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    let draws: Vec<f64> = (0..config.n_courses).map(|_| gamma.sample(&mut rng)).collect();
    let clicks_activities = calibrate(&draws, &course_w, act, Some(0));

    // assignment clicks: 1 + gamma-Poisson mixture
    let ca = targets.clicks_assignment;
    let excess = (ca.mean - ca.min).max(0.1);
    let r = (excess * excess / (ca.sd * ca.sd - excess).max(0.1)).max(0.1);
    let mix = Gamma::new(r, excess / r).expect("positive shape");
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let lambda: f64 = mix.sample(&mut rng);
            Poisson::new(lambda.max(1e-9)).map_or(0.0, |p| p.sample(&mut rng))
        })
        .collect();
    let clicks_assignment = calibrate(&draws, &row_w, ca, Some(0));

    let draws = std_normal(n, &mut rng);
    let interval = calibrate(&draws, &row_w, targets.interval_days, Some(2));

    let effect = |sd: f64, k: usize, rng: &mut Rng| -> Vec<f64> {
        let dist = Normal::new(0.0, sd).expect("finite sd");
        (0..k).map(|_| dist.sample(rng)).collect()
    };
    let student_effect = effect(config.student_effect_sd, config.n_students, &mut rng);
    let course_effect = effect(config.course_effect_sd, config.n_courses, &mut rng);
    let course_slope = effect(config.course_slope_sd, config.n_courses, &mut rng);
    let noise = effect(config.noise_sd, n, &mut rng);

    let signal = &config.signal_strengths;
    let standardized = |c: Column, v: f64| {
        let t = targets.get(c);
        (v - t.mean) / t.sd
    };
    let latent: Vec<f64> = (0..n)
        .map(|i| {
            let (s, c) = (lay.student[i], lay.course[i]);
            let z_interval = standardized(Column::IntervalDays, interval[i]);
            signal.clicks_assignment * standardized(Column::ClicksAssignment, clicks_assignment[i])
                + signal.interval_days * z_interval
                + signal.clicks_activities * standardized(Column::ClicksActivities, clicks_activities[c])
                + signal.gase * standardized(Column::Gase, subjective[0][s])
                + signal.sdls * standardized(Column::Sdls, subjective[1][s])
                + signal.apss * standardized(Column::Apss, subjective[2][s])
                + signal.aps * standardized(Column::Aps, subjective[3][s])
                + student_effect[s]
                + course_effect[c]
                + course_slope[c] * z_interval
                + noise[i]
        })
        .collect();

    let delay = calibrate_delay(&latent, config.target_timely_fraction, targets.delay_days)?;

    let records = (0..n)
        .map(|i| {
            let (s, c) = (lay.student[i], lay.course[i]);
            AssignmentRecord {
                student_id: format!("S{:03}", s + 1),
                course_id: format!("C{:03}", c + 1),
                assignment_id: format!("C{:03}-B{}", c + 1, rng.random_range(1..=8)),
                gase: subjective[0][s],
                sdls: subjective[1][s],
                apss: subjective[2][s],
                aps: subjective[3][s],
                clicks_assignment: clicks_assignment[i],
                interval_days: interval[i],
                clicks_activities: clicks_activities[c],
                delay: delay[i],
            }
        })
        .collect();
    Dataset::new(records)
}

/// Shifts the latent so that `round(timely · n)` rows are non-positive, then
/// maps negative and positive parts with separate gains so the delay column
/// has the target mean and SD. Signs (classes) are never changed.
fn calibrate_delay(latent: &[f64], timely: f64, target: ColumnTarget) -> Result<Vec<f64>, DataError> {
    let n = latent.len();
    let m = ((timely * n as f64).round() as usize).clamp(1, n - 1);
    let mut sorted = latent.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = 0.5 * (sorted[m - 1] + sorted[m]);
    let shifted: Vec<f64> = latent.iter().map(|v| v - threshold).collect();
    let achieved = shifted.iter().filter(|&&v| v <= 0.0).count() as f64 / n as f64;
    if (achieved - timely).abs() > 0.03 {
        return Err(DataError::Calibration(format!(
            "latent delay has too many ties: timely fraction {achieved:.3} vs target {timely:.3}"
        )));
    }

    let nf = n as f64;
    let (mut p1, mut p2, mut n1, mut n2) = (0.0, 0.0, 0.0, 0.0);
    for &v in &shifted {
        if v > 0.0 {
            p1 += v / nf;
            p2 += v * v / nf;
        } else {
            n1 += -v / nf;
            n2 += v * v / nf;
        }
    }
    // delay = a·L⁺ − b·L⁻ with mean a p1 − b n1 = μ and E[d²] = a² p2 + b² n2 = σ² + μ²
    let (mu, m2) = (target.mean, target.sd * target.sd + target.mean * target.mean);
    if p1 <= 0.0 || n1 <= 0.0 {
        return Err(DataError::Calibration("one delay class is empty".into()));
    }
    let r = p2 / (p1 * p1);
    let qa = n1 * n1 * r + n2;
    let qb = 2.0 * mu * n1 * r;
    let qc = mu * mu * r - m2;
    let disc = qb * qb - 4.0 * qa * qc;
    let b = if disc >= 0.0 { (-qb + disc.sqrt()) / (2.0 * qa) } else { f64::NAN };
    let a = (mu + b * n1) / p1;
    if !(a > 0.0 && b > 0.0) {
        return Err(DataError::Calibration(format!(
            "no positive gains reproduce delay mean {mu} and sd {}",
            target.sd
        )));
    }
    Ok(shifted
        .iter()
        .map(|&v| {
            if v > 0.0 {
                // keep late rows strictly positive after rounding to 0.01 days
                ((a * v).min(target.max) * 100.0).round().max(1.0) / 100.0
            } else {
                ((b * v).max(target.min) * 100.0).round() / 100.0
            }
        })
        .collect())
}
