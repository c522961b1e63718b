//! Deterministic SEIRD dynamics with Erlang-2 latent and infectious stages.
//!
//! The exposed and infectious periods are each split into two sequential
//! sub-compartments, giving gamma(2)-distributed dwell times. Deaths are not
//! a flow of the ODE: the `d` compartment is only filled in for reporting by
//! the observation layer, which links deaths to daily new infections through
//! a delay distribution.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::series::DateSeries;

/// Sub-steps of the fixed-step integrator per simulated day.
pub const SUBSTEPS_PER_DAY: usize = 4;

/// Negative drift below this magnitude is floating-point noise.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: f64,
    pub e1: f64,
    pub e2: f64,
    pub i1: f64,
    pub i2: f64,
    pub r: f64,
    pub d: f64,
}

impl CompartmentState {
    pub fn total(&self) -> f64 {
        self.s + self.e1 + self.e2 + self.i1 + self.i2 + self.r + self.d
    }

    pub fn infectious(&self) -> f64 {
        self.i1 + self.i2
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.s, self.e1, self.e2, self.i1, self.i2, self.r, self.d]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            s: a[0],
            e1: a[1],
            e2: a[2],
            i1: a[3],
            i2: a[4],
            r: a[5],
            d: a[6],
        }
    }

    /// `self + h * rate`, component-wise.
    fn offset(&self, rate: &Self, h: f64) -> Self {
        let a = self.as_array();
        let b = rate.as_array();
        Self::from_array(std::array::from_fn(|i| a[i] + h * b[i]))
    }

    fn min_component(&self) -> f64 {
        self.as_array().into_iter().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionParams {
    /// Closed population size.
    pub population: f64,
    /// Persons placed in the first exposed stage at `t0`.
    pub initial_seed: f64,
    /// Weekly contact rates (1/day); knot `k` covers days `7k..7k+7`.
    pub beta_knots: Vec<f64>,
    /// Mean latent period in days.
    pub latent_period: f64,
    /// Mean infectious period in days.
    pub infectious_period: f64,
}

impl TransmissionParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.population.is_finite() && self.population > 0.0,
            InvalidArgument,
            "population must be positive, got {}",
            self.population
        );
        ensure!(
            self.initial_seed >= 0.0 && self.initial_seed < self.population,
            InvalidArgument,
            "initial seed {} outside [0, N)",
            self.initial_seed
        );
        ensure!(
            !self.beta_knots.is_empty(),
            InvalidArgument,
            "at least one beta knot is required"
        );
        ensure!(
            self.beta_knots.iter().all(|b| b.is_finite() && *b >= 0.0),
            InvalidArgument,
            "beta knots must be finite and non-negative"
        );
        ensure!(
            self.latent_period.is_finite() && self.latent_period > 0.0,
            InvalidArgument,
            "latent period must be positive"
        );
        ensure!(
            self.infectious_period.is_finite() && self.infectious_period > 0.0,
            InvalidArgument,
            "infectious period must be positive"
        );
        Ok(())
    }

    pub fn initial_state(&self) -> CompartmentState {
        CompartmentState {
            s: self.population - self.initial_seed,
            e1: self.initial_seed,
            ..Default::default()
        }
    }

    /// `beta * dI * S / N` at the given state and day.
    pub fn reproduction_number(&self, state: &CompartmentState, day: usize) -> f64 {
        beta_at(self, day) * self.infectious_period * state.s / self.population
    }
}

/// Piecewise-constant weekly contact rate, holding the last knot beyond the
/// knot range.
pub fn beta_at(params: &TransmissionParams, day: usize) -> f64 {
    let knot = (day / 7).min(params.beta_knots.len() - 1);
    params.beta_knots[knot]
}

/// Right-hand side of the compartment ODE.
pub fn derivatives(
    state: &CompartmentState,
    beta: f64,
    params: &TransmissionParams,
) -> CompartmentState {
    let force = beta * state.infectious() / params.population;
    let infection = force * state.s;
    let latent_rate = 2.0 / params.latent_period;
    let infectious_rate = 2.0 / params.infectious_period;

    let e1_out = latent_rate * state.e1;
    let e2_out = latent_rate * state.e2;
    let i1_out = infectious_rate * state.i1;
    let i2_out = infectious_rate * state.i2;

    CompartmentState {
        s: -infection,
        e1: infection - e1_out,
        e2: e1_out - e2_out,
        i1: e2_out - i1_out,
        i2: i1_out - i2_out,
        r: i2_out,
        d: 0.0,
    }
}

/// One classical fourth-order Runge-Kutta step of length `dt` days, with the
/// contact rate of `day` held fixed over the step.
pub fn step_rk4(
    state: &CompartmentState,
    params: &TransmissionParams,
    day: usize,
    dt: f64,
) -> Result<CompartmentState> {
    ensure!(dt > 0.0 && dt.is_finite(), InvalidArgument, "step size must be positive, got {dt}");
    Ok(rk4_unchecked(state, params, beta_at(params, day), dt))
}

fn rk4_unchecked(
    state: &CompartmentState,
    params: &TransmissionParams,
    beta: f64,
    dt: f64,
) -> CompartmentState {
    let k1 = derivatives(state, beta, params);
    let k2 = derivatives(&state.offset(&k1, 0.5 * dt), beta, params);
    let k3 = derivatives(&state.offset(&k2, 0.5 * dt), beta, params);
    let k4 = derivatives(&state.offset(&k3, dt), beta, params);

    let y = state.as_array();
    let (a, b, c, d) = (k1.as_array(), k2.as_array(), k3.as_array(), k4.as_array());
    let next = std::array::from_fn(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]));
    clamp_negative(CompartmentState::from_array(next))
}

/// Zeroes negative compartments and removes the mass added by doing so from
/// `S` (or from `R` if `S` cannot absorb it).
fn clamp_negative(state: CompartmentState) -> CompartmentState {
    if state.min_component() >= 0.0 {
        return state;
    }
    let mut a = state.as_array();
    let mut added = 0.0;
    for v in a.iter_mut().skip(1) {
        if *v < 0.0 {
            added -= *v;
            *v = 0.0;
        }
    }
    a[0] -= added;
    if a[0] < 0.0 {
        a[5] += a[0];
        a[0] = 0.0;
        a[5] = a[5].max(0.0);
    }
    CompartmentState::from_array(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// State at each day boundary `t = 0..=horizon`.
    pub states: Vec<CompartmentState>,
    /// `i_new(t) = S(t-1) - S(t)`, with `i_new(0) = 0`.
    pub i_new: DateSeries,
}

impl Trajectory {
    pub fn start(&self) -> NaiveDate {
        self.i_new.start
    }
}

/// Integrates from the seeded initial state for `horizon` days.
pub fn simulate(params: &TransmissionParams, t0: NaiveDate, horizon: usize) -> Result<Trajectory> {
    simulate_with_substeps(params, t0, horizon, SUBSTEPS_PER_DAY)
}

pub fn simulate_with_substeps(
    params: &TransmissionParams,
    t0: NaiveDate,
    horizon: usize,
    substeps: usize,
) -> Result<Trajectory> {
    ensure!(horizon >= 1, InvalidArgument, "horizon must be at least one day");
    ensure!(substeps >= 1, InvalidArgument, "need at least one sub-step per day");
    params.validate()?;

    let dt = 1.0 / substeps as f64;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut i_new = Vec::with_capacity(horizon + 1);
    let mut state = params.initial_state();
    states.push(state);
    i_new.push(0.0);

    for day in 0..horizon {
        let beta = beta_at(params, day);
        for _ in 0..substeps {
            state = rk4_unchecked(&state, params, beta, dt);
        }
        if !state.total().is_finite() {
            return Err(Error::Numerical(format!("non-finite state on day {}", day + 1)));
        }
        let prev_s = states.last().map(|s: &CompartmentState| s.s).unwrap_or(state.s);
        i_new.push((prev_s - state.s).max(0.0));
        states.push(state);
    }

    Ok(Trajectory {
        states,
        i_new: DateSeries::new(t0, i_new),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn epoch() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 2, 17).unwrap()
    }

    fn params(knots: Vec<f64>) -> TransmissionParams {
        TransmissionParams {
            population: 1e6,
            initial_seed: 10.0,
            beta_knots: knots,
            latent_period: 4.0,
            infectious_period: 5.0,
        }
    }

    #[test]
    fn beta_is_weekly_piecewise_constant() {
        assert_eq!(beta_at(&params(vec![0.3]), 100), 0.3);
        let p = params(vec![0.3, 0.1]);
        assert_eq!(beta_at(&p, 6), 0.3);
        assert_eq!(beta_at(&p, 7), 0.1);
        assert_eq!(beta_at(&params(vec![0.4, 0.2, 0.1]), 20), 0.1);
    }

    #[test]
    fn no_infectious_means_no_infection_flow() {
        let state = CompartmentState {
            s: 900.0,
            e1: 50.0,
            e2: 50.0,
            ..Default::default()
        };
        let rates = derivatives(&state, 0.5, &params(vec![0.5]));
        assert_eq!(rates.s, 0.0);
        assert_eq!(rates.e1, -(2.0 / 4.0) * 50.0);
    }

    #[test]
    fn force_of_infection_matches_hand_evaluation() {
        let p = params(vec![0.3]);
        let state = CompartmentState {
            s: 1e6 - 3.0,
            i1: 2.0,
            i2: 1.0,
            ..Default::default()
        };
        let rates = derivatives(&state, 0.3, &p);
        let lambda = 0.3 * 3.0 / 1e6;
        assert!((rates.s + lambda * (1e6 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn disease_free_state_is_fixed() {
        let p = params(vec![0.5]);
        let state = CompartmentState {
            s: 1e6,
            ..Default::default()
        };
        assert_eq!(step_rk4(&state, &p, 0, 0.25).unwrap(), state);
    }

    #[test]
    fn rejects_non_positive_step() {
        let p = params(vec![0.5]);
        let state = p.initial_state();
        assert!(step_rk4(&state, &p, 0, 0.0).is_err());
        assert!(step_rk4(&state, &p, 0, -0.1).is_err());
    }

    #[test]
    fn pure_decay_matches_closed_form() {
        // With I = 0 and only E1 occupied, E1' = -(2/dL) E1.
        let p = params(vec![0.5]);
        let mut state = CompartmentState {
            s: 1e6 - 1000.0,
            e1: 1000.0,
            ..Default::default()
        };
        // Zero force of infection throughout: beta = 0.
        let p0 = TransmissionParams {
            beta_knots: vec![0.0],
            ..p
        };
        for step in 0..16 {
            state = step_rk4(&state, &p0, step / 4, 0.25).unwrap();
        }
        let exact = 1000.0 * (-2.0f64).exp();
        // RK4 at h*rate = 0.125 over 16 steps: 4.5e-6 relative to the
        // exact value, 6.1e-7 relative to the initial amplitude.
        assert!(((state.e1 - exact) / exact).abs() < 5e-6);
        assert!(((state.e1 - exact) / 1000.0).abs() < 1e-6);
    }

    #[test]
    fn zero_beta_keeps_susceptibles_constant() {
        let traj = simulate(&params(vec![0.0]), epoch(), 30).unwrap();
        assert!(traj.i_new.values.iter().all(|&v| v == 0.0));
        assert!(traj.states.iter().all(|s| s.s == 1e6 - 10.0));
    }

    #[test]
    fn zero_seed_is_constant() {
        let p = TransmissionParams {
            initial_seed: 0.0,
            ..params(vec![0.6])
        };
        let traj = simulate(&p, epoch(), 50).unwrap();
        assert!(traj.states.iter().all(|s| s.s == 1e6 && s.total() == 1e6));
    }

    #[test]
    fn single_wave_for_constant_beta() {
        let traj = simulate(&params(vec![0.5]), epoch(), 365).unwrap();
        let v = &traj.i_new.values[1..];
        let peak = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(peak > 10 && peak < v.len() - 10);
        assert!(v[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(v[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn rejects_empty_horizon() {
        assert!(simulate(&params(vec![0.3]), epoch(), 0).is_err());
    }

    proptest! {
        #[test]
        fn conservation_and_monotone_susceptibles(
            knots in prop::collection::vec(0.0f64..1.5, 1..8),
            seed in 0.0f64..1000.0,
            dl in 1.0f64..10.0,
            di in 1.0f64..12.0,
        ) {
            let p = TransmissionParams {
                population: 1e5,
                initial_seed: seed,
                beta_knots: knots,
                latent_period: dl,
                infectious_period: di,
            };
            let traj = simulate(&p, epoch(), 120).unwrap();
            for w in traj.states.windows(2) {
                prop_assert!(w[1].s <= w[0].s);
            }
            for s in &traj.states {
                prop_assert!((s.total() - 1e5).abs() <= 1e-6 * 1e5);
                prop_assert!(s.min_component() >= 0.0);
            }
            let total_new: f64 = traj.i_new.values.iter().sum();
            let last = traj.states.last().unwrap();
            prop_assert!((total_new + last.s + seed - 1e5).abs() <= 1e-6 * 1e5);
        }
    }
}
