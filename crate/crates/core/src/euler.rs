//! Isothermal Euler equations `n_t + (nu)_x = 0`, `(nu)_t + (nu^2 + n)_x = 0`
//! with the Lax-Friedrichs scheme on a periodic node grid.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ic::InitialCondition;
use crate::math;

/// Low-fidelity run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerParams {
    pub x_left: f64,
    pub x_right: f64,
    /// Distinct periodic nodes `x_j = x_left + j h`, `j = 0..n_nodes`.
    pub n_nodes: usize,
    /// `tau = tau_ratio * h`.
    pub tau_ratio: f64,
    pub t_final: f64,
    /// The step is rejected when `tau > cfl_limit * h / max(|u| + 1)`.
    pub cfl_limit: f64,
}

impl Default for EulerParams {
    fn default() -> Self {
        EulerParams {
            x_left: 0.0,
            x_right: 1.0,
            n_nodes: 1000,
            tau_ratio: 0.1,
            t_final: 0.2,
            cfl_limit: 1.0,
        }
    }
}

impl EulerParams {
    pub fn h(&self) -> f64 {
        (self.x_right - self.x_left) / self.n_nodes as f64
    }

    pub fn tau(&self) -> f64 {
        self.tau_ratio * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_nodes).map(|j| self.x_left + j as f64 * h).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if self.n_nodes < 3 {
            return bad("lf_nodes", "need at least 3 nodes");
        }
        if !(self.x_right > self.x_left) {
            return bad("x_right", "domain must satisfy x_left < x_right");
        }
        if !(self.tau_ratio > 0.0 && self.tau_ratio.is_finite()) {
            return bad("lf_tau_ratio", "must be finite and > 0");
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad("t_final", "must be finite and >= 0");
        }
        if !(self.cfl_limit > 0.0) {
            return bad("lf_cfl_limit", "must be > 0");
        }
        Ok(())
    }
}

/// Conserved variables on the node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerState {
    pub density: Vec<f64>,
    pub momentum: Vec<f64>,
    pub h: f64,
}

impl EulerState {
    pub fn from_ic(ic: &InitialCondition, params: &EulerParams) -> Result<Self> {
        let xs = params.nodes();
        let density: Vec<f64> = xs.iter().map(|&x| ic.density(x)).collect();
        if let Some((j, &v)) = density.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDensity { x: xs[j], value: v });
        }
        let momentum = xs.iter().map(|&x| ic.momentum(x)).collect();
        Ok(EulerState {
            density,
            momentum,
            h: params.h(),
        })
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(&self.momentum)
            .map(|(n, m)| m / n)
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.h * self.density.iter().sum::<f64>()
    }

    pub fn total_momentum(&self) -> f64 {
        self.h * self.momentum.iter().sum::<f64>()
    }

    /// Largest characteristic speed `|u| + 1`.
    pub fn max_speed(&self) -> f64 {
        self.density
            .iter()
            .zip(&self.momentum)
            .map(|(n, m)| math::abs(m / n) + 1.0)
            .fold(0.0, f64::max)
    }
}

/// One Lax-Friedrichs step
/// `U_j <- (U_{j+1} + U_{j-1}) / 2 - tau / (2h) (F(U_{j+1}) - F(U_{j-1}))`.
/// `step` only labels errors.
pub fn lf_step(state: &EulerState, tau: f64, step: usize) -> Result<EulerState> {
    let n = state.density.len();
    let r = tau / (2.0 * state.h);
    let flux_m: Vec<f64> = state
        .density
        .iter()
        .zip(&state.momentum)
        .map(|(&d, &m)| m * m / d + d)
        .collect();
    let mut density = Vec::with_capacity(n);
    let mut momentum = Vec::with_capacity(n);
    for j in 0..n {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let (np, nm) = (state.density[jp], state.density[jm]);
        let (mp, mm) = (state.momentum[jp], state.momentum[jm]);
        let d = 0.5 * (np + nm) - r * (mp - mm);
        if !(d > 0.0) {
            return Err(Error::Positivity {
                step,
                cell: j,
                value: d,
            });
        }
        density.push(d);
        momentum.push(0.5 * (mp + mm) - r * (flux_m[jp] - flux_m[jm]));
    }
    Ok(EulerState {
        density,
        momentum,
        h: state.h,
    })
}

/// Density and velocity on the node grid at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerSnapshot {
    pub t: f64,
    pub n: Vec<f64>,
    pub u: Vec<f64>,
}

fn snapshot(t: f64, s: &EulerState) -> EulerSnapshot {
    EulerSnapshot {
        t,
        n: s.density.clone(),
        u: s.velocity(),
    }
}

/// Steps from `t = 0` to `t_final` (last step shortened) and records the
/// state at each requested time, snapped to the first step at or past it.
pub fn run_euler(
    params: &EulerParams,
    ic: &InitialCondition,
    output_times: &[f64],
) -> Result<Vec<EulerSnapshot>> {
    params.validate()?;
    let mut state = EulerState::from_ic(ic, params)?;
    let tau = params.tau();
    let mut t = 0.0;
    let mut out = Vec::new();
    let mut pending: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&s| s <= params.t_final)
        .collect();
    pending.sort_by(|a, b| b.total_cmp(a));
    let mut step = 0;
    loop {
        while pending.last().is_some_and(|&s| s <= t + 1e-12 * tau) {
            pending.pop();
            out.push(snapshot(t, &state));
        }
        let remaining = params.t_final - t;
        if remaining <= 1e-12 * tau {
            break;
        }
        let dt = if remaining < tau { remaining } else { tau };
        let limit = params.cfl_limit * state.h / state.max_speed();
        if dt > limit {
            return Err(Error::Cfl {
                step,
                tau: dt,
                limit,
            });
        }
        state = lf_step(&state, dt, step)?;
        step += 1;
        t = if dt == remaining {
            params.t_final
        } else {
            t + dt
        };
    }
    for _ in pending.drain(..) {
        out.push(snapshot(t, &state));
    }
    Ok(out)
}

/// Final-time `(n, u)` on the node grid.
pub fn run_euler_final(params: &EulerParams, ic: &InitialCondition) -> Result<EulerSnapshot> {
    let mut v = run_euler(params, ic, &[params.t_final])?;
    v.pop().ok_or(Error::InvalidParameter {
        name: "t_final",
        reason: "no output produced",
    })
}

/// Linear interpolation of periodic node data (nodes `x_left + j h`) at `xs`.
pub fn interpolate_periodic(values: &[f64], x_left: f64, h: f64, xs: &[f64]) -> Vec<f64> {
    let n = values.len();
    xs.iter()
        .map(|&x| {
            let mut s = (x - x_left) / h;
            s -= n as f64 * math::floor(s / n as f64);
            let j = math::floor(s);
            let theta = s - j;
            let j0 = (j as usize) % n;
            let j1 = (j0 + 1) % n;
            (1.0 - theta) * values[j0] + theta * values[j1]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ic;
    use alloc::vec;
    use core::f64::consts::PI;

    fn state(n: Vec<f64>, m: Vec<f64>, h: f64) -> EulerState {
        EulerState {
            density: n,
            momentum: m,
            h,
        }
    }

    #[test]
    fn constant_state_is_preserved() {
        let s = state(vec![1.0; 8], vec![0.0; 8], 0.125);
        let t = lf_step(&s, 0.0125, 0).unwrap();
        assert_eq!(t, s);
        let s = state(vec![2.0; 8], vec![0.6; 8], 0.125);
        assert_eq!(lf_step(&s, 0.0125, 0).unwrap(), s);
    }

    #[test]
    fn hand_stencil() {
        let n = vec![1.0, 1.2, 0.9, 1.1, 1.0, 0.8, 1.3, 1.05];
        let m = vec![0.1, -0.2, 0.0, 0.3, 0.05, -0.1, 0.2, 0.0];
        let (h, tau) = (0.125, 0.0125);
        let s = state(n.clone(), m.clone(), h);
        let out = lf_step(&s, tau, 0).unwrap();
        let f = |j: usize| m[j] * m[j] / n[j] + n[j];
        let r = tau / (2.0 * h);
        // j = 0 pulls from 7 and 1; j = 3 from 2 and 4.
        let n0 = 0.5 * (n[1] + n[7]) - r * (m[1] - m[7]);
        let m0 = 0.5 * (m[1] + m[7]) - r * (f(1) - f(7));
        let n3 = 0.5 * (n[4] + n[2]) - r * (m[4] - m[2]);
        let m3 = 0.5 * (m[4] + m[2]) - r * (f(4) - f(2));
        assert_eq!(out.density[0], n0);
        assert_eq!(out.momentum[0], m0);
        assert_eq!(out.density[3], n3);
        assert_eq!(out.momentum[3], m3);
    }

    #[test]
    fn parity_is_preserved() {
        // Nodes symmetric about the center: x_j <-> x_{N-j}. Even n, odd m.
        let nn = 16;
        let h = 1.0 / nn as f64;
        let xs: Vec<f64> = (0..nn).map(|j| j as f64 * h).collect();
        let n: Vec<f64> = xs.iter().map(|x| 1.0 + 0.3 * (2.0 * PI * x).cos()).collect();
        let m: Vec<f64> = xs.iter().map(|x| 0.2 * (2.0 * PI * x).sin()).collect();
        let mut s = state(n, m, h);
        for k in 0..5 {
            s = lf_step(&s, 0.1 * h, k).unwrap();
        }
        for j in 1..nn {
            assert!((s.density[j] - s.density[nn - j]).abs() < 1e-14);
            assert!((s.momentum[j] + s.momentum[nn - j]).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_and_momentum_telescope() {
        let p = EulerParams {
            n_nodes: 16,
            t_final: 1.0,
            ..EulerParams::default()
        };
        let ic = ic::uq_test1(&[0.3, -0.2, 0.9, 0.1, -0.7]);
        let s0 = EulerState::from_ic(&ic, &p).unwrap();
        let mut s = s0.clone();
        let tau = p.tau();
        for k in 0..500 {
            s = lf_step(&s, tau, k).unwrap();
        }
        assert!((s.mass() - s0.mass()).abs() <= 1e-12 * s0.mass());
        let scale = s0.h * s0.momentum.iter().map(|m| m.abs()).sum::<f64>();
        assert!((s.total_momentum() - s0.total_momentum()).abs() <= 1e-12 * scale);
    }

    #[test]
    fn t_final_zero_returns_initial_data() {
        let p = EulerParams {
            n_nodes: 10,
            t_final: 0.0,
            ..EulerParams::default()
        };
        let ic = ic::ap_test();
        let out = run_euler_final(&p, &ic).unwrap();
        for (j, x) in p.nodes().into_iter().enumerate() {
            assert_eq!(out.n[j], ic.density(x));
            assert_eq!(out.u[j], ic.momentum(x) / ic.density(x));
        }
    }

    #[test]
    fn final_step_is_truncated() {
        let p = EulerParams {
            n_nodes: 10,
            t_final: 0.0333,
            ..EulerParams::default()
        };
        let out = run_euler(&p, &ic::ap_test(), &[0.0, 0.0333]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].t, 0.0);
        assert_eq!(out[1].t, 0.0333);
    }

    #[test]
    fn convergence_is_first_order() {
        // Errors against a much finer run should halve with h.
        let ic = ic::ap_test();
        let run = |nodes: usize| {
            let p = EulerParams {
                n_nodes: nodes,
                t_final: 0.05,
                ..EulerParams::default()
            };
            run_euler_final(&p, &ic).unwrap()
        };
        let fine_nodes = 4096;
        let fine = run(fine_nodes);
        let err = |nodes: usize| {
            let s = run(nodes);
            let stride = fine_nodes / nodes;
            (0..nodes)
                .map(|j| (s.n[j] - fine.n[j * stride]).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 1.6 && ratio < 2.4, "ratio {ratio}");
    }

    #[test]
    fn positivity_and_cfl_failures() {
        let s = state(vec![1.0, 1e-3, 1.0, 1.0], vec![5.0, 0.0, -5.0, 0.0], 0.25);
        assert!(matches!(lf_step(&s, 0.2, 4), Err(Error::Positivity { step: 4, .. })));

        let p = EulerParams {
            n_nodes: 10,
            tau_ratio: 2.0,
            ..EulerParams::default()
        };
        assert!(matches!(
            run_euler(&p, &ic::ap_test(), &[]),
            Err(Error::Cfl { step: 0, .. })
        ));
    }

    #[test]
    fn interpolation_is_exact_for_linear_periodic_pieces() {
        let v = vec![0.0, 1.0, 2.0, 3.0];
        let xs = [0.0, 0.5, 1.25, 3.5, 4.0, -0.5];
        let out = interpolate_periodic(&v, 0.0, 1.0, &xs);
        assert_eq!(out, vec![0.0, 0.5, 1.25, 1.5, 0.0, 1.5]);
    }
}
