//! Linear mixed model with student random intercepts and course random
//! intercepts, optionally with independent course random slopes on chosen
//! columns. Variance components are estimated by EM-REML, iterated until
//! the REML deviance changes by less than the relative tolerance; fixed and
//! random effects are the solution of the mixed-model equations at the
//! final components.
//!
//! The course effects are absorbed one block at a time (the course part of
//! the equations is block diagonal), leaving a dense system over the fixed
//! effects and the student intercepts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::ModelError;
use crate::data::GroupStructure;
use crate::matrix::Matrix;

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlmParams {
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for MlmParams {
    fn default() -> Self {
        MlmParams {
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl MlmParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(params, &["max_iters", "tolerance"])?;
        let p = MlmParams {
            max_iters: if params.contains_key("max_iters") {
                r.usize("max_iters")?
            } else {
                DEFAULT_MAX_ITERS
            },
            tolerance: r.f64_or("tolerance", DEFAULT_TOLERANCE)?,
        };
        ensure(p.tolerance > 0.0, || "tolerance must be positive".into())?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub residual: f64,
    pub student: f64,
    pub course_intercept: f64,
    /// One entry per slope column.
    pub course_slopes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlmModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub slope_columns: Vec<usize>,
    /// Indexed by student id; zero for students absent from training.
    pub student_effects: Vec<f64>,
    /// Indexed by course id: intercept followed by one slope per column.
    pub course_effects: Vec<Vec<f64>>,
    pub variances: VarianceComponents,
    /// REML deviance at the final components, up to an additive constant.
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ridge: bool,
}

impl MlmModel {
    /// Fixed part plus the effects of `(student, course)` when known.
    pub fn predict_row(&self, x: &[f64], group: Option<(usize, usize)>) -> f64 {
        let mut v = self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        if let Some((s, c)) = group {
            v += self.student_effects.get(s).copied().unwrap_or(0.0);
            if let Some(e) = self.course_effects.get(c) {
                v += e[0] + self.slope_columns.iter().zip(&e[1..]).map(|(&j, u)| u * x[j]).sum::<f64>();
            }
        }
        v
    }
}

/// Dense ids `0..k` for the ids present in `ids`, in order of first use.
fn remap(ids: &[usize], n_ids: usize) -> (Vec<usize>, Vec<usize>) {
    let mut local = vec![usize::MAX; n_ids.max(ids.iter().max().map_or(0, |m| m + 1))];
    let mut present = Vec::new();
    let mapped = ids
        .iter()
        .map(|&g| {
            if local[g] == usize::MAX {
                local[g] = present.len();
                present.push(g);
            }
            local[g]
        })
        .collect();
    (mapped, present)
}

/// Per-course pieces of the mixed-model equations that do not depend on the
/// variance components.
struct CourseBlock {
    /// Columns of the reduced system (fixed effects, then the students of
    /// this course) touched by the block.
    columns: Vec<usize>,
    zz: DMatrix<f64>,
    /// `Z_c' W` restricted to `columns`.
    zw: DMatrix<f64>,
    zy: DVector<f64>,
}

struct System {
    p: usize,
    q_students: usize,
    ww: DMatrix<f64>,
    wy: DVector<f64>,
    yy: f64,
    courses: Vec<CourseBlock>,
}

fn course_design(x: &[f64], slopes: &[usize]) -> Vec<f64> {
    std::iter::once(1.0).chain(slopes.iter().map(|&j| x[j])).collect()
}

fn build_system(x: &Matrix, y: &[f64], students: &[usize], q_s: usize, courses: &[usize], q_c: usize, slopes: &[usize]) -> System {
    let (n, d) = (x.n_rows(), x.n_cols());
    let p = d + 1;
    let m = p + q_s;
    let b = 1 + slopes.len();
    let mut ww = DMatrix::zeros(m, m);
    let mut wy = DVector::zeros(m);
    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); q_c];
    for i in 0..n {
        let f: Vec<f64> = std::iter::once(1.0).chain(x.row(i).iter().copied()).collect();
        let s = p + students[i];
        for a in 0..p {
            for c in 0..p {
                ww[(a, c)] += f[a] * f[c];
            }
            ww[(a, s)] += f[a];
            ww[(s, a)] += f[a];
            wy[a] += f[a] * y[i];
        }
        ww[(s, s)] += 1.0;
        wy[s] += y[i];
        rows_of[courses[i]].push(i);
    }
    let courses = rows_of
        .iter()
        .map(|rows| {
            let mut columns: Vec<usize> = (0..p).collect();
            for &i in rows {
                let s = p + students[i];
                if !columns.contains(&s) {
                    columns.push(s);
                }
            }
            let mut zz = DMatrix::zeros(b, b);
            let mut zw = DMatrix::zeros(b, columns.len());
            let mut zy = DVector::zeros(b);
            for &i in rows {
                let z = course_design(x.row(i), slopes);
                let s_col = columns.iter().position(|&c| c == p + students[i]).unwrap();
                for k in 0..b {
                    for l in 0..b {
                        zz[(k, l)] += z[k] * z[l];
                    }
                    zw[(k, 0)] += z[k];
                    for a in 0..d {
                        zw[(k, a + 1)] += z[k] * x.get(i, a);
                    }
                    zw[(k, s_col)] += z[k];
                    zy[k] += z[k] * y[i];
                }
            }
            CourseBlock { columns, zz, zw, zy }
        })
        .collect();
    System {
        p,
        q_students: q_s,
        ww,
        wy,
        yy: y.iter().map(|v| v * v).sum(),
        courses,
    }
}

/// Solution of the mixed-model equations for fixed variance ratios.
struct Solution {
    reduced: DVector<f64>,
    course: Vec<DVector<f64>>,
    trace_student: f64,
    /// Per course-effect coordinate, summed over courses.
    trace_course: Vec<f64>,
    /// `log det` of the (unscaled) mixed-model coefficient matrix; NaN when
    /// a block needed a pseudo-inverse.
    log_det: f64,
    /// Solution dotted with the right-hand side.
    quad: f64,
    ridge: bool,
}

/// Inverse and log-determinant of a symmetric positive definite matrix.
fn invert_spd(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    a.clone().cholesky().map(|c| {
        let log_det = 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        (c.inverse(), log_det)
    })
}

fn solve_system(sys: &System, lambda_student: f64, lambda_course: &[f64]) -> Solution {
    let (p, m) = (sys.p, sys.p + sys.q_students);
    let mut s = sys.ww.clone();
    for k in p..m {
        s[(k, k)] += lambda_student;
    }
    let mut rhs = sys.wy.clone();
    let mut inverses = Vec::with_capacity(sys.courses.len());
    let mut log_det = 0.0;
    for blk in &sys.courses {
        let mut a = blk.zz.clone();
        for (k, l) in lambda_course.iter().enumerate() {
            a[(k, k)] += l;
        }
        let a_inv = match invert_spd(&a) {
            Some((inv, ld)) => {
                log_det += ld;
                inv
            }
            None => {
                log_det = f64::NAN;
                a.clone().pseudo_inverse(1e-12).unwrap()
            }
        };
        let b = &a_inv * &blk.zw;
        let schur = blk.zw.transpose() * &b;
        let r = blk.zw.transpose() * (&a_inv * &blk.zy);
        for (u, &cu) in blk.columns.iter().enumerate() {
            rhs[cu] -= r[u];
            for (v, &cv) in blk.columns.iter().enumerate() {
                s[(cu, cv)] -= schur[(u, v)];
            }
        }
        inverses.push((a_inv, b));
    }
    let mut ridge = false;
    let mut s_inv = invert_spd(&s);
    let mut delta = 1e-10 * (1.0 + s.diagonal().mean().abs());
    while s_inv.is_none() {
        ridge = true;
        let mut t = s.clone();
        for k in 0..m {
            t[(k, k)] += delta;
        }
        s_inv = invert_spd(&t);
        delta *= 10.0;
    }
    let (s_inv, s_log_det) = s_inv.unwrap();
    log_det += s_log_det;
    let reduced = &s_inv * &rhs;
    let trace_student = (p..m).map(|k| s_inv[(k, k)]).sum();
    let mut trace_course = vec![0.0; lambda_course.len()];
    let mut course = Vec::with_capacity(sys.courses.len());
    for (blk, (a_inv, b)) in sys.courses.iter().zip(&inverses) {
        let local = DVector::from_iterator(blk.columns.len(), blk.columns.iter().map(|&c| reduced[c]));
        course.push(a_inv * (&blk.zy - &blk.zw * local));
        let s_loc = DMatrix::from_fn(blk.columns.len(), blk.columns.len(), |u, v| s_inv[(blk.columns[u], blk.columns[v])]);
        let bsb = b * s_loc * b.transpose();
        for (k, t) in trace_course.iter_mut().enumerate() {
            *t += a_inv[(k, k)] + bsb[(k, k)];
        }
    }
    let quad = reduced.dot(&sys.wy) + course.iter().zip(&sys.courses).map(|(u, blk)| u.dot(&blk.zy)).sum::<f64>();
    Solution {
        reduced,
        course,
        trace_student,
        trace_course,
        log_det,
        quad,
        ridge,
    }
}

/// REML deviance (-2 log restricted likelihood, up to a constant) at the
/// given components, from the pieces of a solve at the same components.
fn reml_deviance(sys: &System, sol: &Solution, n: usize, sigma_e: f64, sigma_s: f64, sigma_c: &[f64], q_c: usize) -> f64 {
    let unknowns = (sys.p + sys.q_students + q_c * sigma_c.len()) as f64;
    (n as f64 - unknowns) * sigma_e.ln()
        + sys.q_students as f64 * sigma_s.ln()
        + q_c as f64 * sigma_c.iter().map(|v| v.ln()).sum::<f64>()
        + sol.log_det
        + (sys.yy - sol.quad) / sigma_e
}

fn residuals(x: &Matrix, y: &[f64], students: &[usize], courses: &[usize], slopes: &[usize], sol: &Solution, p: usize) -> Vec<f64> {
    (0..x.n_rows())
        .map(|i| {
            let row = x.row(i);
            let fixed = sol.reduced[0] + (0..row.len()).map(|a| sol.reduced[a + 1] * row[a]).sum::<f64>();
            let z = course_design(row, slopes);
            let u = &sol.course[courses[i]];
            let course: f64 = z.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            y[i] - fixed - sol.reduced[p + students[i]] - course
        })
        .collect()
}

pub fn fit(params: &MlmParams, x: &Matrix, y: &[f64], groups: &GroupStructure, slopes: &[usize]) -> Result<MlmModel, ModelError> {
    let n = x.n_rows();
    if groups.len() != n {
        return Err(ModelError::GroupMismatch {
            expected: n,
            got: groups.len(),
        });
    }
    let (students, student_ids) = remap(&groups.student, groups.n_students);
    let (courses, course_ids) = remap(&groups.course, groups.n_courses);
    let (q_s, q_c) = (student_ids.len(), course_ids.len());
    let b = 1 + slopes.len();
    let sys = build_system(x, y, &students, q_s, &courses, q_c, slopes);
    let p = sys.p;

    let mean = y.iter().sum::<f64>() / n as f64;
    let var_y = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).max(VARIANCE_FLOOR);
    let mut sigma_e = var_y / 2.0;
    let mut sigma_s = var_y / (2.0 * (1 + b) as f64);
    let mut sigma_c = vec![var_y / (2.0 * (1 + b) as f64); b];

    let mut iterations = 0;
    let mut converged = false;
    let mut ridge = false;
    let mut sol;
    let mut deviance = f64::NAN;
    loop {
        let lambda_c: Vec<f64> = sigma_c.iter().map(|v| sigma_e / v).collect();
        sol = solve_system(&sys, sigma_e / sigma_s, &lambda_c);
        ridge |= sol.ridge;
        let previous = deviance;
        deviance = reml_deviance(&sys, &sol, n, sigma_e, sigma_s, &sigma_c, q_c);
        if iterations > 0 && (previous - deviance).abs() < params.tolerance * deviance.abs().max(1.0) {
            converged = true;
            break;
        }
        if iterations == params.max_iters {
            break;
        }
        iterations += 1;
        let e = residuals(x, y, &students, &courses, slopes, &sol, p);
        let ss_s: f64 = (p..p + q_s).map(|k| sol.reduced[k].powi(2)).sum();
        let new_s = ((ss_s + sigma_e * sol.trace_student) / q_s as f64).max(VARIANCE_FLOOR);
        let new_c: Vec<f64> = (0..b)
            .map(|k| {
                let ss: f64 = sol.course.iter().map(|u| u[k] * u[k]).sum();
                ((ss + sigma_e * sol.trace_course[k]) / q_c as f64).max(VARIANCE_FLOOR)
            })
            .collect();
        let unknowns = (p + q_s + q_c * b) as f64;
        let penalized = sigma_e / sigma_s * sol.trace_student
            + (0..b).map(|k| sigma_e / sigma_c[k] * sol.trace_course[k]).sum::<f64>();
        let ee: f64 = e.iter().map(|v| v * v).sum();
        let new_e = ((ee + sigma_e * (unknowns - penalized)) / n as f64).max(VARIANCE_FLOOR);

        sigma_e = new_e;
        sigma_s = new_s;
        sigma_c = new_c;
    }

    let mut student_effects = vec![0.0; groups.n_students.max(student_ids.iter().max().map_or(0, |m| m + 1))];
    for (local, &id) in student_ids.iter().enumerate() {
        student_effects[id] = sol.reduced[p + local];
    }
    let mut course_effects = vec![vec![0.0; b]; groups.n_courses.max(course_ids.iter().max().map_or(0, |m| m + 1))];
    for (local, &id) in course_ids.iter().enumerate() {
        course_effects[id] = sol.course[local].iter().copied().collect();
    }
    Ok(MlmModel {
        intercept: sol.reduced[0],
        coefficients: (1..p).map(|k| sol.reduced[k]).collect(),
        slope_columns: slopes.to_vec(),
        student_effects,
        course_effects,
        variances: VarianceComponents {
            residual: sigma_e,
            student: sigma_s,
            course_intercept: sigma_c[0],
            course_slopes: sigma_c[1..].to_vec(),
        },
        deviance,
        iterations,
        converged,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Ordinary least squares with an intercept via the normal equations.
    fn ols(x: &Matrix, y: &[f64]) -> Vec<f64> {
        let (n, d) = (x.n_rows(), x.n_cols());
        let w = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
        let yv = DVector::from_column_slice(y);
        let beta = (w.transpose() * &w).cholesky().unwrap().solve(&(w.transpose() * yv));
        beta.iter().copied().collect()
    }

    fn groups(students: Vec<usize>, courses: Vec<usize>) -> GroupStructure {
        GroupStructure {
            n_students: students.iter().max().unwrap() + 1,
            n_courses: courses.iter().max().unwrap() + 1,
            student: students,
            course: courses,
        }
    }

    #[test]
    fn single_group_matches_pooled_regression() {
        let mut rng = crate::rng::rng_from_seed(1);
        let rows: Vec<[f64; 2]> = (0..60).map(|_| [rng.random(), rng.random()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.5 + r[0] - 2.0 * r[1] + 0.1 * rng.random::<f64>()).collect();
        let x = Matrix::from_rows(&rows);
        let m = fit(&MlmParams::default(), &x, &y, &GroupStructure::single(60), &[]).unwrap();
        let beta = ols(&x, &y);
        for (i, r) in x.rows_iter().enumerate() {
            let pooled = beta[0] + beta[1] * r[0] + beta[2] * r[1];
            assert!((m.predict_row(r, Some((0, 0))) - pooled).abs() < 1e-6, "row {i}");
        }
    }

    /// Removes row and column means of a `k x k` grid stored row-major.
    fn double_center(v: &mut [f64], k: usize) {
        for r in 0..k {
            let m = v[r * k..(r + 1) * k].iter().sum::<f64>() / k as f64;
            v[r * k..(r + 1) * k].iter_mut().for_each(|x| *x -= m);
        }
        for c in 0..k {
            let m = (0..k).map(|r| v[r * k + c]).sum::<f64>() / k as f64;
            (0..k).for_each(|r| v[r * k + c] -= m);
        }
    }

    #[test]
    fn no_group_variance_gives_ols() {
        // fully crossed students x courses; features and noise carry no
        // student or course signal at all
        let k = 20;
        let mut rng = crate::rng::rng_from_seed(2);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut cols: Vec<Vec<f64>> = (0..3).map(|_| (0..k * k).map(|_| noise.sample(&mut rng)).collect()).collect();
        cols.iter_mut().for_each(|c| double_center(c, k));
        let rows: Vec<[f64; 2]> = (0..k * k).map(|i| [cols[0][i], cols[1][i]]).collect();
        let y: Vec<f64> = (0..k * k).map(|i| 1.0 + 2.0 * rows[i][0] - rows[i][1] + cols[2][i]).collect();
        let g = groups((0..k * k).map(|i| i / k).collect(), (0..k * k).map(|i| i % k).collect());
        let x = Matrix::from_rows(&rows);
        let m = fit(&MlmParams::default(), &x, &y, &g, &[]).unwrap();
        let beta = ols(&x, &y);
        assert!((m.intercept - beta[0]).abs() < 1e-3, "{} vs {}", m.intercept, beta[0]);
        for k in 0..2 {
            assert!((m.coefficients[k] - beta[k + 1]).abs() < 1e-3);
        }
    }

    #[test]
    fn unseen_groups_get_zero_effect() {
        let x = Matrix::column_vector(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 1.5, 1.0, 3.2, 3.9, 5.1];
        let g = groups(vec![0, 0, 1, 1, 2, 2], vec![0, 1, 0, 1, 0, 1]);
        let m = fit(&MlmParams::default(), &x, &y, &g, &[0]).unwrap();
        let fixed = m.predict_row(&[2.0], None);
        assert_eq!(m.predict_row(&[2.0], Some((99, 99))), fixed);
    }

    #[test]
    fn em_never_increases_the_deviance() {
        let mut rng = crate::rng::rng_from_seed(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let (ns, nc) = (15, 12);
        let us: Vec<f64> = (0..ns).map(|_| 0.6 * noise.sample(&mut rng)).collect();
        let uc: Vec<f64> = (0..nc).map(|_| 0.4 * noise.sample(&mut rng)).collect();
        let (mut rows, mut y, mut st, mut co) = (vec![], vec![], vec![], vec![]);
        for i in 0..300 {
            let (s, c) = (i % ns, (i / ns + i) % nc);
            let x0: f64 = noise.sample(&mut rng);
            y.push(0.3 * x0 + us[s] + uc[c] + 0.3 * x0 * uc[c] + 0.5 * noise.sample(&mut rng));
            rows.push(vec![x0]);
            st.push(s);
            co.push(c);
        }
        let x = Matrix::from_rows(&rows);
        let g = groups(st, co);
        let mut last = f64::INFINITY;
        for iters in 0..25 {
            let m = fit(&MlmParams { max_iters: iters, tolerance: 1e-300 }, &x, &y, &g, &[0]).unwrap();
            assert!(m.deviance <= last + 1e-9, "iteration {iters}: {} > {last}", m.deviance);
            last = m.deviance;
        }
    }

    #[test]
    fn collinear_design_uses_ridge() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let g = groups((0..30).map(|i| i % 3).collect(), (0..30).map(|i| i % 2).collect());
        let m = fit(&MlmParams::default(), &Matrix::from_rows(&rows), &y, &g, &[]).unwrap();
        assert!(m.ridge);
        assert!(m.intercept.is_finite());
    }
}
