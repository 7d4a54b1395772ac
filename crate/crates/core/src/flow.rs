//! The normalizing double-bracket flow.
//!
//! `X' = [B, X]` with `B = [X*, X]`, integrated jointly with the similarity
//! transport `A' = B A` and its inverse `C' = -C B`, so that
//! `X(t) = A(t) T A(t)^-1` throughout. Along the exact flow
//! `d/dt |X|_2^2 = -2 |B|_2^2`; this identity is the per-step acceptance
//! monitor for the RK4 integrator.

use serde::Serialize;

use crate::brown::{fk_determinant, probe_points};
use crate::error::{Error, Result};
use crate::linalg::{c64, check_matrix, identity, inverse, norm2, op_norm, schatten_pow, CMatrix};

/// `[[X*, X], X] = X* X^2 - 2 X X* X + X^2 X*`.
pub fn flow_rhs(x: &CMatrix) -> CMatrix {
    let b = self_commutator(x);
    &b * x - x * &b
}

/// `[X*, X] = X* X - X X*`.
pub fn self_commutator(x: &CMatrix) -> CMatrix {
    let xs = x.adjoint();
    &xs * x - x * &xs
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSample {
    pub t: f64,
    pub norm2: f64,
    pub commutator_norm: f64,
    /// `Delta(X - lambda_j)` at the probe points.
    pub det_probes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub t_end: f64,
    /// Stop once `|[X*, X]|_2` drops below this; default `1e-8 |T|_2^2`.
    pub tol: Option<f64>,
    /// Record a diagnostic sample every this many accepted steps.
    pub record_every: usize,
    /// Relative slack of the energy monitor.
    pub energy_slack: f64,
    /// Refresh `C = A^-1` every this many steps.
    pub refresh_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            tol: None,
            record_every: 10,
            energy_slack: 0.05,
            refresh_every: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub x: CMatrix,
    pub a: CMatrix,
    pub c: CMatrix,
    pub probes: Vec<c64>,
    pub diagnostics: Vec<FlowSample>,
    pub steps: usize,
    pub rejected: usize,
    /// Largest relative energy-monitor mismatch over accepted steps.
    pub max_energy_mismatch: f64,
    /// Per accepted step: `(t, dt, d|X|^2, predicted)`.
    pub energy_log: Vec<(f64, f64, f64, f64)>,
    pub converged: bool,
}

impl FlowState {
    /// `|C A - 1|_2`.
    pub fn transport_residual(&self) -> f64 {
        norm2(&(&self.c * &self.a - identity(self.x.nrows())))
    }

    /// `|X - A T C|_2`.
    pub fn similarity_residual(&self, t0: &CMatrix) -> f64 {
        norm2(&(&self.x - &self.a * t0 * &self.c))
    }

    pub fn commutator_norm(&self) -> f64 {
        norm2(&self_commutator(&self.x))
    }

    /// Diagnostic series as CSV.
    pub fn diagnostics_csv(&self) -> String {
        let k = self.probes.len();
        let mut out = String::from("t,norm2,commutator_norm");
        for j in 1..=k {
            out.push_str(&format!(",det_probe_{j}"));
        }
        out.push('\n');
        for s in &self.diagnostics {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}",
                s.t, s.norm2, s.commutator_norm
            ));
            for d in &s.det_probes {
                out.push_str(&format!(",{d:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn sample(x: &CMatrix, t: f64, probes: &[c64]) -> FlowSample {
    let n = x.nrows();
    FlowSample {
        t,
        norm2: norm2(x),
        commutator_norm: norm2(&self_commutator(x)),
        det_probes: probes
            .iter()
            .map(|&l| fk_determinant(&(x - identity(n) * l)))
            .collect(),
    }
}

struct Rk4Step {
    dx: CMatrix,
    a: CMatrix,
    c: CMatrix,
}

fn rk4(x: &CMatrix, a: &CMatrix, c: &CMatrix, dt: f64) -> Rk4Step {
    let f = |x: &CMatrix, a: &CMatrix, c: &CMatrix| {
        let b = self_commutator(x);
        (&b * x - x * &b, &b * a, -(c * &b))
    };
    let (kx1, ka1, kc1) = f(x, a, c);
    let (kx2, ka2, kc2) = f(
        &(x + kx1.scale(dt / 2.0)),
        &(a + ka1.scale(dt / 2.0)),
        &(c + kc1.scale(dt / 2.0)),
    );
    let (kx3, ka3, kc3) = f(
        &(x + kx2.scale(dt / 2.0)),
        &(a + ka2.scale(dt / 2.0)),
        &(c + kc2.scale(dt / 2.0)),
    );
    let (kx4, ka4, kc4) = f(
        &(x + kx3.scale(dt)),
        &(a + ka3.scale(dt)),
        &(c + kc3.scale(dt)),
    );
    let w = dt / 6.0;
    Rk4Step {
        dx: (kx1 + kx2.scale(2.0) + kx3.scale(2.0) + kx4).scale(w),
        a: a + (ka1 + ka2.scale(2.0) + ka3.scale(2.0) + ka4).scale(w),
        c: c + (kc1 + kc2.scale(2.0) + kc3.scale(2.0) + kc4).scale(w),
    }
}

/// `d|X|_2^2 = 2 Re tau(X* dX) + |dX|_2^2`, free of cancellation.
fn energy_change(x: &CMatrix, dx: &CMatrix) -> f64 {
    let n = x.nrows() as f64;
    let cross: f64 = x
        .iter()
        .zip(dx.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum();
    2.0 * cross / n + norm2(dx).powi(2)
}

/// Integrates the flow from `X(0) = T` up to `t_end` or until
/// `|[X*, X]|_2 < tol`.
pub fn run_flow(t: &CMatrix, t_end: f64, tol: f64) -> Result<FlowState> {
    run_flow_with(
        t,
        &FlowOptions {
            t_end,
            tol: Some(tol),
            ..FlowOptions::default()
        },
    )
}

pub fn run_flow_with(t0: &CMatrix, opts: &FlowOptions) -> Result<FlowState> {
    check_matrix(t0)?;
    if !(opts.t_end >= 0.0) || !opts.t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_end = {} must be >= 0",
            opts.t_end
        )));
    }
    let n = t0.nrows();
    let probes = probe_points(t0);
    let mut state = FlowState {
        t: 0.0,
        x: t0.clone(),
        a: identity(n),
        c: identity(n),
        diagnostics: vec![sample(t0, 0.0, &probes)],
        probes,
        steps: 0,
        rejected: 0,
        max_energy_mismatch: 0.0,
        energy_log: Vec::new(),
        converged: false,
    };
    let op = op_norm(t0);
    if op == 0.0 {
        state.converged = true;
        return Ok(state);
    }
    let tol = opts.tol.unwrap_or(1e-8 * norm2(t0).powi(2));
    let base = 1.0 / (100.0 * op * op);
    let min_dt = base / f64::from(1u32 << 20);
    let mut dt = base;
    let mut b2 = norm2(&self_commutator(&state.x)).powi(2);
    let record_every = opts.record_every.max(1);

    while state.t < opts.t_end {
        if b2.sqrt() < tol {
            state.converged = true;
            break;
        }
        let h = dt.min(opts.t_end - state.t);
        let step = rk4(&state.x, &state.a, &state.c, h);
        let x_new = &state.x + &step.dx;
        let b2_new = norm2(&self_commutator(&x_new)).powi(2);
        let de = energy_change(&state.x, &step.dx);
        let predicted = -h * (b2 + b2_new);
        let x2 = norm2(&state.x).powi(2);
        let floor = 64.0 * f64::EPSILON * x2 * (1.0 + h * op * op);
        let mismatch = if predicted.abs() > 0.0 {
            (de - predicted).abs() / predicted.abs()
        } else {
            0.0
        };
        let energy_ok = (de - predicted).abs() <= opts.energy_slack * predicted.abs() + floor;
        let monotone_ok = b2_new <= b2 * (1.0 + 1e-8) + floor * floor;
        if !(energy_ok && monotone_ok)
            || !x_new.iter().all(|z| z.re.is_finite() && z.im.is_finite())
        {
            state.rejected += 1;
            dt /= 2.0;
            if dt < min_dt {
                return Err(Error::StepUnderflow {
                    t: state.t,
                    reason: format!(
                        "energy mismatch {mismatch:.3e}, commutator {:.3e} -> {:.3e}",
                        b2.sqrt(),
                        b2_new.sqrt()
                    ),
                });
            }
            continue;
        }
        if predicted.abs() > floor {
            state.max_energy_mismatch = state.max_energy_mismatch.max(mismatch);
        }
        state.energy_log.push((state.t, h, de, predicted));
        state.x = x_new;
        state.a = step.a;
        state.c = step.c;
        state.t += h;
        state.steps += 1;
        b2 = b2_new;
        if state.steps.is_multiple_of(opts.refresh_every.max(1)) {
            state.c = inverse(&state.a)?;
        }
        if state.steps.is_multiple_of(record_every) {
            state
                .diagnostics
                .push(sample(&state.x, state.t, &state.probes));
        }
        if dt < base {
            dt = (dt * 2.0).min(base);
        }
    }
    if b2.sqrt() < tol {
        state.converged = true;
    }
    state.c = inverse(&state.a)?;
    if state.diagnostics.last().map(|s| s.t) != Some(state.t) {
        state
            .diagnostics
            .push(sample(&state.x, state.t, &state.probes));
    }
    Ok(state)
}

/// `|X(t_end)|_p^p`, which decreases towards `int |lambda|^p d mu_T`.
pub fn similarity_infimum_pnorm(t: &CMatrix, p: f64, t_end: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be positive")));
    }
    let state = run_flow_with(
        t,
        &FlowOptions {
            t_end,
            tol: Some(0.0),
            record_every: usize::MAX,
            ..FlowOptions::default()
        },
    )?;
    schatten_pow(&state.x, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, jordan_block, ZERO};
    use crate::testutil::{random_matrix, random_unitary};

    #[test]
    fn rhs_vanishes_on_normal() {
        let u = random_unitary(3, 2);
        let x =
            &u * diag(&[c64::new(1.0, 2.0), c64::new(-0.5, 0.0), c64::new(0.0, 1.0)]) * u.adjoint();
        assert!(norm2(&flow_rhs(&x)) < 1e-14);
    }

    #[test]
    fn rhs_on_jordan_block() {
        // X*X = diag(0,1), XX* = diag(1,0): B = diag(-1,1), [B,J] = -2J
        let j = jordan_block(2, ZERO);
        assert!(norm2(&(flow_rhs(&j) + j.scale(2.0))) < 1e-15);
    }

    #[test]
    fn rhs_expanded_form_and_bound() {
        let x = random_matrix(5, 8);
        let xs = x.adjoint();
        let expanded = &xs * &x * &x - (&x * &xs * &x).scale(2.0) + &x * &x * &xs;
        assert!(norm2(&(flow_rhs(&x) - expanded)) < 1e-13);
        assert!(op_norm(&flow_rhs(&x)) <= 4.0 * op_norm(&x).powi(3));
    }

    #[test]
    fn normal_input_is_fixed() {
        let t = diag(&[c64::new(1.0, 0.0), c64::new(0.0, 2.0)]);
        let s = run_flow(&t, 10.0, 1e-12).unwrap();
        assert!(s.converged && s.t == 0.0);
        assert!(norm2(&(s.x - &t)) == 0.0);
        let z = run_flow(&CMatrix::zeros(3, 3), 1.0, 1e-12).unwrap();
        assert!(z.converged);
    }

    #[test]
    fn jordan_block_decays_like_closed_form() {
        // X = x J with d|x|^2/dt = -4|x|^4, so |x|^2 = 1/(1 + 4t) and |X|_2^2 = |x|^2/2
        let j = jordan_block(2, ZERO);
        let s = run_flow(&j, 25.0, 0.0).unwrap();
        let expect = (0.5f64 / (1.0 + 4.0 * 25.0)).sqrt();
        assert!((norm2(&s.x) - expect).abs() < 1e-6, "{}", norm2(&s.x));
        assert!(s.max_energy_mismatch < 0.05);
    }
}
