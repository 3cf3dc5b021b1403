//! Point-to-point motion profiles with bounded derivatives.
//!
//! Profiles follow the classical symmetric construction: a bang-dwell
//! switching pattern on the highest bounded derivative (snap for 4th
//! order, jerk for 3rd order) integrated exactly down to position. Stage
//! durations are solved in continuous time, rounded up to whole samples,
//! and the bang magnitude is then rescaled so the end position is met
//! exactly. Rounding every duration up guarantees the rescaled magnitude
//! and all intermediate peaks stay at or below their bounds.

use crate::error::{CoreError, CoreResult};
use crate::signal::{check_sample_time, Signal};

/// Derivative bounds for a move. `snap` is `None` for 3rd-order profiles,
/// whose highest shaped derivative is jerk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionLimits {
    /// m/s
    pub velocity: f64,
    /// m/s^2
    pub acceleration: f64,
    /// m/s^3
    pub jerk: f64,
    /// m/s^4
    pub snap: Option<f64>,
}

/// Continuous-time stage solution behind a generated profile, kept for
/// inspection: which limits were binding before grid rounding, and the
/// bang magnitude actually used after rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileDesign {
    /// Continuous-time stage durations in seconds: bang pulse first, then
    /// the dwell stages, ending with the cruise.
    pub stage_durations: Vec<f64>,
    /// On-grid stage durations in samples, same order.
    pub stage_samples: Vec<usize>,
    /// Bang magnitude after the end-position rescale.
    pub magnitude: f64,
    /// Limits exactly active in the continuous-time solution.
    pub active_limits: Vec<&'static str>,
}

/// Sampled position, velocity, acceleration, jerk, and (for 4th-order
/// moves) snap, together with the limits they respect elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionProfile {
    position: Signal,
    velocity: Signal,
    acceleration: Signal,
    jerk: Signal,
    snap: Option<Signal>,
    limits: MotionLimits,
    design: ProfileDesign,
}

impl MotionProfile {
    pub fn position(&self) -> &Signal {
        &self.position
    }

    pub fn velocity(&self) -> &Signal {
        &self.velocity
    }

    pub fn acceleration(&self) -> &Signal {
        &self.acceleration
    }

    pub fn jerk(&self) -> &Signal {
        &self.jerk
    }

    /// Snap samples; absent for 3rd-order profiles.
    pub fn snap(&self) -> Option<&Signal> {
        self.snap.as_ref()
    }

    pub fn limits(&self) -> &MotionLimits {
        &self.limits
    }

    pub fn design(&self) -> &ProfileDesign {
        &self.design
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_time(&self) -> f64 {
        self.position.sample_time()
    }

    /// Duration of the move in seconds (last sample instant).
    pub fn duration(&self) -> f64 {
        (self.position.len() - 1) as f64 * self.sample_time()
    }
}

fn validate_move(displacement: f64, ts: f64, bounds: &[(f64, &str)]) -> CoreResult<()> {
    check_sample_time(ts)?;
    if !(displacement.is_finite() && displacement != 0.0) {
        return Err(CoreError::InvalidParameter(
            "displacement must be nonzero and finite".into(),
        ));
    }
    for &(b, name) in bounds {
        if !(b.is_finite() && b > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "{name} bound must be positive and finite, got {b}"
            )));
        }
    }
    Ok(())
}

/// Smallest x >= 0 with f(x) = target for a continuous increasing f with
/// f(0) <= target; bracket expansion plus bisection.
fn solve_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    if f(0.0) >= target {
        return 0.0;
    }
    let mut hi = 1.0;
    while f(hi) < target {
        hi *= 2.0;
        if hi > 1e15 {
            return hi;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn ceil_samples(duration: f64, ts: f64) -> usize {
    (duration / ts - 1e-9).ceil().max(0.0) as usize
}

/// Integrates a piecewise-constant top derivative exactly down to
/// position. `order` is the number of integrations (4 for a snap input,
/// 3 for a jerk input). Returns one state sequence per integral, lowest
/// integral (e.g. jerk) first and position last, each of length
/// `u.len() + 1` so that the final sample instant is included.
fn integrate_bang(u: &[f64], ts: f64, order: usize) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut fact = vec![1.0; order + 1];
    for k in 1..=order {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut states = vec![vec![0.0; n + 1]; order];
    // x[i] is the (i + 1)-th integral of the input; x[order - 1] is
    // position. Over one sample with constant input the update is an
    // exact Taylor step.
    let mut x = vec![0.0; order];
    for (k, &uk) in u.iter().enumerate() {
        for (i, s) in states.iter_mut().enumerate() {
            s[k] = x[i];
        }
        let mut next = vec![0.0; order];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for m in 0..=i {
                acc += x[i - m] * ts.powi(m as i32) / fact[m];
            }
            acc += uk * ts.powi((i + 1) as i32) / fact[i + 1];
            *slot = acc;
        }
        x = next;
    }
    for (i, s) in states.iter_mut().enumerate() {
        s[n] = x[i];
    }
    states
}

struct StageSolution {
    durations: Vec<f64>,
    samples: Vec<usize>,
    magnitude: f64,
    active: Vec<&'static str>,
}

/// Solves the 4-stage (snap pulse, jerk dwell, acceleration dwell,
/// cruise) durations of a 4th-order move, rounds them up to the grid, and
/// rescales the snap level so the rounded profile still ends exactly at
/// the requested displacement.
fn solve_fourth_order(d: f64, lim: &MotionLimits, s_max: f64, ts: f64) -> StageSolution {
    let (v, a, j) = (lim.velocity, lim.acceleration, lim.jerk);
    let t_s = (j / s_max)
        .min((a / s_max).sqrt())
        .min((v / (2.0 * s_max)).cbrt())
        .min((d / (8.0 * s_max)).powf(0.25));

    let t_j = {
        let cap_a = a / (s_max * t_s) - t_s;
        let cap_v = solve_increasing(|x| s_max * t_s * (t_s + x) * (2.0 * t_s + x), v);
        let cap_d = solve_increasing(
            |x| s_max * t_s * (t_s + x) * (2.0 * t_s + x) * (4.0 * t_s + 2.0 * x),
            d,
        );
        cap_a.min(cap_v).min(cap_d).max(0.0)
    };
    let a_pk = s_max * t_s * (t_s + t_j);
    let t_a = {
        let cap_v = v / a_pk - (2.0 * t_s + t_j);
        let cap_d = solve_increasing(
            |x| a_pk * (2.0 * t_s + t_j + x) * (4.0 * t_s + 2.0 * t_j + x),
            d,
        );
        cap_v.min(cap_d).max(0.0)
    };
    let v_pk = a_pk * (2.0 * t_s + t_j + t_a);
    let t_acc = 4.0 * t_s + 2.0 * t_j + t_a;
    let t_v = (d / v_pk - t_acc).max(0.0);

    let n_s = ceil_samples(t_s, ts).max(1);
    let n_j = ceil_samples(t_j, ts);
    let n_a = ceil_samples(t_a, ts);
    let n_v = ceil_samples(t_v, ts);
    let (gs, gj, ga, gv) = (
        n_s as f64 * ts,
        n_j as f64 * ts,
        n_a as f64 * ts,
        n_v as f64 * ts,
    );
    // d = s * t_s (t_s + t_j) (2 t_s + t_j + t_a) (4 t_s + 2 t_j + t_a + t_v)
    let denom = gs * (gs + gj) * (2.0 * gs + gj + ga) * (4.0 * gs + 2.0 * gj + ga + gv);
    let magnitude = (d / denom).min(s_max);

    // The continuous solution always rides the snap bound; the others
    // are active when their peak formulas hit the bound exactly.
    let mut active = vec!["snap"];
    if (s_max * t_s - j).abs() <= 1e-9 * j {
        active.push("jerk");
    }
    if (a_pk - a).abs() <= 1e-9 * a {
        active.push("acceleration");
    }
    if (v_pk - v).abs() <= 1e-9 * v {
        active.push("velocity");
    }

    StageSolution {
        durations: vec![t_s, t_j, t_a, t_v],
        samples: vec![n_s, n_j, n_a, n_v],
        magnitude,
        active,
    }
}

/// Solves the 3-stage (jerk pulse, acceleration dwell, cruise) durations
/// of a 3rd-order move.
fn solve_third_order(d: f64, lim: &MotionLimits, ts: f64) -> StageSolution {
    let (v, a, j) = (lim.velocity, lim.acceleration, lim.jerk);
    let t_j = (a / j).min((v / j).sqrt()).min((d / (2.0 * j)).cbrt());
    let a_pk = j * t_j;
    let t_a = {
        let cap_v = v / a_pk - t_j;
        let cap_d = solve_increasing(|x| a_pk * (t_j + x) * (2.0 * t_j + x), d);
        cap_v.min(cap_d).max(0.0)
    };
    let v_pk = a_pk * (t_j + t_a);
    let t_v = (d / v_pk - (2.0 * t_j + t_a)).max(0.0);

    let n_j = ceil_samples(t_j, ts).max(1);
    let n_a = ceil_samples(t_a, ts);
    let n_v = ceil_samples(t_v, ts);
    let (gj, ga, gv) = (n_j as f64 * ts, n_a as f64 * ts, n_v as f64 * ts);
    // d = j * t_j (t_j + t_a) (2 t_j + t_a + t_v)
    let denom = gj * (gj + ga) * (2.0 * gj + ga + gv);
    let magnitude = (d / denom).min(j);

    let mut active = vec!["jerk"];
    if (a_pk - a).abs() <= 1e-9 * a {
        active.push("acceleration");
    }
    if (v_pk - v).abs() <= 1e-9 * v {
        active.push("velocity");
    }

    StageSolution {
        durations: vec![t_j, t_a, t_v],
        samples: vec![n_j, n_a, n_v],
        magnitude,
        active,
    }
}

fn bang_sequence(samples: &[usize], pattern: &[(usize, f64)], magnitude: f64) -> Vec<f64> {
    let mut u = Vec::new();
    for &(stage, sign) in pattern {
        u.extend(std::iter::repeat_n(sign * magnitude, samples[stage]));
    }
    u
}

/// 4th-order point-to-point profile: bang-dwell snap, all four derivative
/// bounds respected elementwise, end position met exactly up to floating
/// point rounding.
pub fn fourth_order_profile(
    displacement: f64,
    limits: &MotionLimits,
    sample_time: f64,
) -> CoreResult<MotionProfile> {
    let snap_bound = limits.snap.ok_or_else(|| {
        CoreError::InvalidParameter("4th-order profile requires a snap bound".into())
    })?;
    validate_move(
        displacement,
        sample_time,
        &[
            (limits.velocity, "velocity"),
            (limits.acceleration, "acceleration"),
            (limits.jerk, "jerk"),
            (snap_bound, "snap"),
        ],
    )?;
    let d = displacement.abs();
    let sol = solve_fourth_order(d, limits, snap_bound, sample_time);
    // Stage order: snap pulse (0), jerk dwell (1), acceleration dwell
    // (2), cruise (3); the second half mirrors the first with opposite
    // snap signs.
    let pattern = [
        (0, 1.0),
        (1, 0.0),
        (0, -1.0),
        (2, 0.0),
        (0, -1.0),
        (1, 0.0),
        (0, 1.0),
        (3, 0.0),
        (0, -1.0),
        (1, 0.0),
        (0, 1.0),
        (2, 0.0),
        (0, 1.0),
        (1, 0.0),
        (0, -1.0),
    ];
    let u = bang_sequence(&sol.samples, &pattern, sol.magnitude * displacement.signum());
    let states = integrate_bang(&u, sample_time, 4);
    let mut snap_samples = u.clone();
    snap_samples.push(0.0);
    Ok(MotionProfile {
        jerk: Signal::new(states[0].clone(), sample_time)?,
        acceleration: Signal::new(states[1].clone(), sample_time)?,
        velocity: Signal::new(states[2].clone(), sample_time)?,
        position: Signal::new(states[3].clone(), sample_time)?,
        snap: Some(Signal::new(snap_samples, sample_time)?),
        limits: *limits,
        design: ProfileDesign {
            stage_durations: sol.durations,
            stage_samples: sol.samples,
            magnitude: sol.magnitude,
            active_limits: sol.active,
        },
    })
}

/// 3rd-order point-to-point profile: bang-dwell jerk. Snap is unbounded
/// by construction and the snap field is absent.
pub fn third_order_profile(
    displacement: f64,
    limits: &MotionLimits,
    sample_time: f64,
) -> CoreResult<MotionProfile> {
    if limits.snap.is_some() {
        return Err(CoreError::InvalidParameter(
            "3rd-order profile takes no snap bound".into(),
        ));
    }
    validate_move(
        displacement,
        sample_time,
        &[
            (limits.velocity, "velocity"),
            (limits.acceleration, "acceleration"),
            (limits.jerk, "jerk"),
        ],
    )?;
    let d = displacement.abs();
    let sol = solve_third_order(d, limits, sample_time);
    let pattern = [
        (0, 1.0),
        (1, 0.0),
        (0, -1.0),
        (2, 0.0),
        (0, -1.0),
        (1, 0.0),
        (0, 1.0),
    ];
    let u = bang_sequence(&sol.samples, &pattern, sol.magnitude * displacement.signum());
    let states = integrate_bang(&u, sample_time, 3);
    let mut jerk_samples = u.clone();
    jerk_samples.push(0.0);
    Ok(MotionProfile {
        jerk: Signal::new(jerk_samples, sample_time)?,
        acceleration: Signal::new(states[0].clone(), sample_time)?,
        velocity: Signal::new(states[1].clone(), sample_time)?,
        position: Signal::new(states[2].clone(), sample_time)?,
        snap: None,
        limits: *limits,
        design: ProfileDesign {
            stage_durations: sol.durations,
            stage_samples: sol.samples,
            magnitude: sol.magnitude,
            active_limits: sol.active,
        },
    })
}
