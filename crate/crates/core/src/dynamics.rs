//! Time integration of the full susceptible/infected system
//!
//! `S_t = d_S ΔS − βSI + γI`, `I_t = d_I ΔI + βSI − γI`
//!
//! with a conservative IMEX step: one exchange flux per step, implicit
//! diffusion. The trapezoid weights annihilate the Neumann Laplacian, so
//! discrete mass is conserved up to the tridiagonal solve.

use serde::{Deserialize, Serialize};

use crate::curves::{Equilibrium, EquilibriumSet};
use crate::domain::{Field, Grid};
use crate::error::{AtlasError, Result};
use crate::spectral::CoefficientSet;
use crate::tridiag::TridiagonalLu;

pub const MAX_HALVINGS: usize = 40;
/// `‖I‖∞` below this multiple of `N/L` counts as extinct.
pub const EXTINCTION_FACTOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimState {
    pub t: f64,
    pub s: Field,
    pub i: Field,
    pub mass: f64,
    pub dt: f64,
}

impl SimState {
    pub fn new(grid: &Grid, s: Field, i: Field, dt: f64) -> Result<Self> {
        if s.len() != grid.len() || i.len() != grid.len() {
            return Err(AtlasError::config("state length does not match the grid"));
        }
        if s.iter()
            .chain(i.iter())
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(AtlasError::config("S and I must be finite and nonnegative"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(AtlasError::config(format!("dt must be positive, got {dt}")));
        }
        let mass = grid.integrate(&s) + grid.integrate(&i);
        Ok(SimState {
            t: 0.0,
            s,
            i,
            mass,
            dt,
        })
    }

    /// Disease-free state carrying total mass `n`.
    pub fn disease_free(grid: &Grid, n: f64, dt: f64) -> Result<Self> {
        Self::new(
            grid,
            grid.constant(n / grid.length()),
            grid.constant(0.0),
            dt,
        )
    }

    pub fn from_equilibrium(grid: &Grid, eq: &Equilibrium, dt: f64) -> Result<Self> {
        Self::new(grid, eq.s.clone(), eq.i.clone(), dt)
    }

    /// `max(‖S − other.S‖∞, ‖I − other.I‖∞)`.
    pub fn distance(&self, s: &[f64], i: &[f64]) -> f64 {
        self.s.dist_inf(s).max(self.i.dist_inf(i))
    }
}

fn implicit_diffusion(coeffs: &CoefficientSet, d: f64, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let lap = coeffs.grid.laplacian();
    let m = lap.shifted(-dt * d, &vec![1.0; rhs.len()]);
    Ok(TridiagonalLu::new(&m)?.solve(rhs))
}

/// One attempt at step size `dt`; `None` if a node went negative.
fn try_step(state: &SimState, coeffs: &CoefficientSet, dt: f64) -> Result<Option<SimState>> {
    let flux: Vec<f64> = (0..state.s.len())
        .map(|k| (coeffs.beta[k] * state.s[k] - coeffs.gamma[k]) * state.i[k])
        .collect();
    let rs: Vec<f64> = state.s.iter().zip(&flux).map(|(s, f)| s - dt * f).collect();
    let ri: Vec<f64> = state.i.iter().zip(&flux).map(|(i, f)| i + dt * f).collect();
    let s = implicit_diffusion(coeffs, coeffs.d_s, dt, &rs)?;
    let i = implicit_diffusion(coeffs, coeffs.d_i, dt, &ri)?;
    if s.iter().chain(&i).any(|v| !(*v >= 0.0)) {
        return Ok(None);
    }
    let g = &coeffs.grid;
    let mass = g.integrate(&s) + g.integrate(&i);
    Ok(Some(SimState {
        t: state.t + dt,
        s: Field(s),
        i: Field(i),
        mass,
        dt,
    }))
}

/// Attempts `state.dt`, halving on negativity. The returned state carries
/// the accepted step size.
pub fn step(state: &SimState, coeffs: &CoefficientSet) -> Result<SimState> {
    if !(coeffs.d_s > 0.0) {
        return Err(AtlasError::config("simulation needs d_S > 0"));
    }
    let mut dt = state.dt;
    for _ in 0..=MAX_HALVINGS {
        if let Some(next) = try_step(state, coeffs, dt)? {
            return Ok(next);
        }
        dt *= 0.5;
    }
    Err(AtlasError::solver(format!(
        "time step underflow at t = {} (dt = {dt:e}, max |I| = {:e}, max S = {:e})",
        state.t,
        state.i.max_abs(),
        state.s.max_abs()
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunOptions {
    pub t_max: f64,
    pub stagnation_tol: f64,
    pub dt_max: f64,
    /// Multiplier applied to `dt` after an accepted step.
    pub growth: f64,
    pub max_steps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            t_max: 1e5,
            stagnation_tol: 1e-8,
            dt_max: 1.0,
            growth: 1.2,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "DFE")]
    Dfe,
    #[serde(rename = "EE")]
    Ee,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RootMatch {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SteadyReport {
    pub converged: bool,
    pub final_state: SimState,
    pub matched_root: Option<RootMatch>,
    pub outcome: Outcome,
    pub steps: usize,
    pub max_mass_drift: f64,
    /// Last step at which `‖I‖∞` grew; `None` if it never did.
    pub last_i_increase: Option<usize>,
}

pub fn nearest_root(state: &SimState, set: &EquilibriumSet) -> Option<RootMatch> {
    set.roots
        .iter()
        .enumerate()
        .map(|(index, r)| RootMatch {
            index,
            distance: state.distance(&r.s, &r.i),
        })
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
}

/// Steps until stagnation, extinction, or `t_max`. Snapshots every
/// `stride` accepted steps go to `trace`, together with the first and last
/// state.
pub fn run_recorded(
    state0: &SimState,
    coeffs: &CoefficientSet,
    opts: &RunOptions,
    set: Option<&EquilibriumSet>,
    stride: Option<usize>,
    trace: &mut Vec<SimState>,
) -> Result<SteadyReport> {
    if !(opts.t_max > 0.0 && opts.stagnation_tol > 0.0 && opts.dt_max > 0.0 && opts.growth >= 1.0) {
        return Err(AtlasError::config("invalid run options"));
    }
    let g = &coeffs.grid;
    let extinct = EXTINCTION_FACTOR * state0.mass / g.length();
    let mut state = state0.clone();
    state.dt = state.dt.min(opts.dt_max);
    if stride.is_some() {
        trace.push(state.clone());
    }
    let mut drift: f64 = 0.0;
    let mut last_i_increase = None;
    let mut steps = 0;
    let (converged, outcome) = loop {
        if state.i.max_abs() < extinct {
            break (true, Outcome::Dfe);
        }
        if state.t > opts.t_max || steps >= opts.max_steps {
            break (false, Outcome::Undecided);
        }
        let next = step(&state, coeffs)?;
        steps += 1;
        drift = drift.max((next.mass - state0.mass).abs() / state0.mass);
        let dt = next.dt;
        let change = next.distance(&state.s, &state.i) / dt;
        let i_norm = next.i.max_abs();
        // A decaying infection can satisfy the absolute test long before
        // extinction; require the relative infected change to be small too.
        let i_rel = next.i.dist_inf(&state.i) / (dt * i_norm.max(f64::MIN_POSITIVE));
        if i_norm > state.i.max_abs() {
            last_i_increase = Some(steps);
        }
        state = next;
        state.dt = (dt * opts.growth).min(opts.dt_max);
        if let Some(k) = stride {
            if k > 0 && steps % k == 0 {
                trace.push(state.clone());
            }
        }
        if change < opts.stagnation_tol && i_rel < opts.stagnation_tol {
            let outcome = if i_norm < extinct {
                Outcome::Dfe
            } else {
                Outcome::Ee
            };
            break (true, outcome);
        }
    };
    if stride.is_some() && trace.last().map(|s| s.t) != Some(state.t) {
        trace.push(state.clone());
    }
    let matched_root = set.and_then(|s| nearest_root(&state, s));
    Ok(SteadyReport {
        converged,
        final_state: state,
        matched_root,
        outcome,
        steps,
        max_mass_drift: drift,
        last_i_increase,
    })
}

pub fn run_to_steady(
    state0: &SimState,
    coeffs: &CoefficientSet,
    opts: &RunOptions,
    set: Option<&EquilibriumSet>,
) -> Result<SteadyReport> {
    run_recorded(state0, coeffs, opts, set, None, &mut Vec::new())
}

/// Independent trajectories on separate threads, results in input order.
pub fn run_ensemble(
    starts: &[SimState],
    coeffs: &CoefficientSet,
    opts: &RunOptions,
    set: Option<&EquilibriumSet>,
) -> Vec<Result<SteadyReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .iter()
            .map(|s| scope.spawn(move || run_to_steady(s, coeffs, opts, set)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(AtlasError::solver("trajectory thread panicked")))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constants() -> CoefficientSet {
        CoefficientSet::constant(Grid::new(1.0, 101).unwrap(), 2.0, 1.0, 1.0)
            .unwrap()
            .with_d_s(1.0)
            .unwrap()
    }

    #[test]
    fn disease_free_state_is_fixed() {
        let c = constants();
        let s0 = SimState::disease_free(&c.grid, 1.0, 0.1).unwrap();
        let s1 = step(&s0, &c).unwrap();
        let d = s1.distance(&s0.s, &s0.i);
        assert!(d < 1e-13, "{d}");
    }

    #[test]
    fn mass_conserved_and_unique_ee_reached() {
        let c = constants();
        let g = &c.grid;
        let s = g.sample(|x| 0.5 + 0.05 * (std::f64::consts::PI * x).cos());
        let i = g.sample(|x| 0.5 - 0.05 * (std::f64::consts::PI * x).cos());
        let s0 = SimState::new(g, s, i, 0.01).unwrap();
        assert!((s0.mass - 1.0).abs() < 1e-14);
        let r = run_to_steady(&s0, &c, &RunOptions::default(), None).unwrap();
        assert!(r.converged);
        assert_eq!(r.outcome, Outcome::Ee);
        assert!(r.max_mass_drift <= 1e-12, "{}", r.max_mass_drift);
        assert!(r.final_state.s.iter().all(|v| (v - 0.5).abs() < 1e-5));
        assert!(r.final_state.i.iter().all(|v| (v - 0.5).abs() < 1e-5));
    }

    #[test]
    fn below_one_goes_extinct() {
        let c = constants();
        let g = &c.grid;
        // N = 0.4 so r0 = 0.8.
        let s0 = SimState::new(g, g.constant(0.39), g.constant(0.01), 0.01).unwrap();
        let r = run_to_steady(&s0, &c, &RunOptions::default(), None).unwrap();
        assert_eq!(r.outcome, Outcome::Dfe);
        assert!(r.last_i_increase.is_none());
    }

    #[test]
    fn invalid_states_rejected() {
        let c = constants();
        let g = &c.grid;
        assert!(SimState::new(g, g.constant(-1.0), g.constant(0.0), 0.1)
            .unwrap_err()
            .is_config());
        assert!(SimState::new(g, g.constant(1.0), g.constant(0.0), 0.0)
            .unwrap_err()
            .is_config());
        let s0 = SimState::disease_free(g, 1.0, 0.1).unwrap();
        let no_ds = CoefficientSet::constant(g.clone(), 2.0, 1.0, 1.0).unwrap();
        assert!(step(&s0, &no_ds).unwrap_err().is_config());
    }
}
