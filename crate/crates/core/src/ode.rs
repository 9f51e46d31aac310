//! Fixed-step classical fourth-order Runge–Kutta integration.

use crate::error::{invalid, Error, Result};

/// `y' = f(t, y)` written into the output slice.
pub trait Rhs {
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> Rhs for F {
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self(t, y, dydt)
    }
}

#[derive(Debug, Clone)]
pub struct OdeProblem<F> {
    pub rhs: F,
    pub y0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Length of the shortened last step when `t_end / dt` is not an integer.
    pub partial_final_step: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Step plan for covering `[0, t_end]` with steps of `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub full_steps: usize,
    pub partial: Option<f64>,
}

impl StepPlan {
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(invalid(format!("final time must be non-negative, got {t_end}")));
        }
        let ratio = t_end / dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 4.0 * f64::EPSILON * ratio.max(1.0) {
            return Ok(Self {
                full_steps: nearest as usize,
                partial: None,
            });
        }
        let full = ratio.floor();
        Ok(Self {
            full_steps: full as usize,
            partial: Some(t_end - full * dt),
        })
    }
}

/// Scratch buffers for one RK4 step of a fixed dimension.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn step<F: Rhs + ?Sized>(&mut self, rhs: &F, t: f64, y: &mut [f64], dt: f64) {
        let half = 0.5 * dt;
        rhs.eval(t, y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k1[i];
        }
        rhs.eval(t + half, &self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k2[i];
        }
        rhs.eval(t + half, &self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        rhs.eval(t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Integrates with classical RK4, recording `t = 0`, every `record_every`
/// steps and `t = t_end`.
pub fn integrate<F: Rhs>(problem: &OdeProblem<F>) -> Result<Trajectory> {
    if problem.record_every == 0 {
        return Err(invalid("record_every must be at least 1"));
    }
    let plan = StepPlan::new(problem.t_end, problem.dt)?;
    let mut y = problem.y0.clone();
    let mut scratch = vec![0.0; y.len()];
    problem.rhs.eval(0.0, &y, &mut scratch);
    if y.iter().chain(&scratch).any(|v| !v.is_finite()) {
        return Err(Error::Divergence { time: 0.0 });
    }
    let mut rk = Rk4::new(y.len());
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    for i in 0..plan.full_steps {
        let t = i as f64 * problem.dt;
        rk.step(&problem.rhs, t, &mut y, problem.dt);
        let t_next = (i + 1) as f64 * problem.dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t_next });
        }
        let last = i + 1 == plan.full_steps && plan.partial.is_none();
        if (i + 1) % problem.record_every == 0 || last {
            times.push(if last { problem.t_end } else { t_next });
            states.push(y.clone());
        }
    }
    if let Some(h) = plan.partial {
        let t = plan.full_steps as f64 * problem.dt;
        rk.step(&problem.rhs, t, &mut y, h);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: problem.t_end });
        }
        times.push(problem.t_end);
        states.push(y);
    }
    Ok(Trajectory {
        times,
        states,
        partial_final_step: plan.partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn final_state<F: Rhs>(rhs: F, y0: Vec<f64>, t_end: f64, dt: f64) -> Vec<f64> {
        integrate(&OdeProblem {
            rhs,
            y0,
            t_end,
            dt,
            record_every: 1,
        })
        .unwrap()
        .last()
        .to_vec()
    }

    #[test]
    fn constant_rhs_is_exact() {
        let y = final_state(|_t: f64, _y: &[f64], d: &mut [f64]| d.fill(0.5), vec![1.0, -2.0], 3.0, 0.1);
        assert!((y[0] - 2.5).abs() < 1e-13);
        assert!((y[1] - -0.5).abs() < 1e-13);
    }

    #[test]
    fn cubic_in_time_is_exact() {
        // y' = 3t² integrates exactly under RK4 (Simpson's rule).
        let y = final_state(|t: f64, _y: &[f64], d: &mut [f64]| d[0] = 3.0 * t * t, vec![0.0], 2.0, 0.25);
        assert!((y[0] - 8.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_error_shrinks_sixteenfold() {
        let err = |dt| {
            (final_state(|_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0], vec![1.0], 1.0, dt)[0] - std::f64::consts::E).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn oscillator_returns_after_one_period() {
        let rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = -y[1];
            d[1] = y[0];
        };
        let t = 2.0 * std::f64::consts::PI;
        let traj = integrate(&OdeProblem {
            rhs,
            y0: vec![1.0, 0.0],
            t_end: t,
            dt: 1e-3,
            record_every: 1000,
        })
        .unwrap();
        let y = traj.last();
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10, "{y:?}");
        assert!(traj.partial_final_step.is_some());
        assert_eq!(*traj.times.last().unwrap(), t);
    }

    #[test]
    fn observed_order_is_four() {
        // Richardson triplet on a nonlinear scalar problem y' = -y² + sin t.
        let f = |t: f64, y: &[f64], d: &mut [f64]| d[0] = -y[0] * y[0] + t.sin();
        let y = |dt| final_state(f, vec![0.5], 2.0, dt)[0];
        let (a, b, c) = (y(0.04), y(0.02), y(0.01));
        let order = ((a - b) / (b - c)).log2();
        assert!((3.8..=4.2).contains(&order), "order {order}");
    }

    #[test]
    fn recording_includes_endpoints() {
        let traj = integrate(&OdeProblem {
            rhs: |_t: f64, _y: &[f64], d: &mut [f64]| d[0] = 1.0,
            y0: vec![0.0],
            t_end: 1.0,
            dt: 0.1,
            record_every: 3,
        })
        .unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        assert!(traj.partial_final_step.is_none());
    }

    #[test]
    fn partial_final_step_lands_on_t_end() {
        let y = final_state(|_t: f64, _y: &[f64], d: &mut [f64]| d[0] = 2.0, vec![0.0], 1.05, 0.1);
        assert!((y[0] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn divergence_reports_failing_time() {
        let err = integrate(&OdeProblem {
            rhs: |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0],
            y0: vec![1.0],
            t_end: 2.0,
            dt: 0.01,
            record_every: 1,
        });
        match err {
            Err(Error::Divergence { time }) => assert!(time > 0.9 && time <= 2.0, "{time}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let f = |_t: f64, _y: &[f64], d: &mut [f64]| d[0] = 0.0;
        for (t, dt, every) in [(1.0, 0.0, 1), (-1.0, 0.1, 1), (1.0, 0.1, 0)] {
            assert!(integrate(&OdeProblem {
                rhs: f,
                y0: vec![0.0],
                t_end: t,
                dt,
                record_every: every
            })
            .is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linear_systems_superpose(
            a in prop::collection::vec(-1.0f64..1.0, 9),
            y1 in prop::collection::vec(-1.0f64..1.0, 3),
            y2 in prop::collection::vec(-1.0f64..1.0, 3),
        ) {
            let rhs = move |_t: f64, y: &[f64], d: &mut [f64]| {
                for i in 0..3 {
                    d[i] = (0..3).map(|j| a[3 * i + j] * y[j]).sum();
                }
            };
            let sum: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| p + q).collect();
            let r1 = final_state(&rhs, y1, 1.0, 0.01);
            let r2 = final_state(&rhs, y2, 1.0, 0.01);
            let r12 = final_state(&rhs, sum, 1.0, 0.01);
            for i in 0..3 {
                prop_assert!((r12[i] - r1[i] - r2[i]).abs() < 1e-12);
            }
        }
    }
}
