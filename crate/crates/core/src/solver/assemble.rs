//! Residuals and analytic Jacobian of the augmented current-injection system.
//!
//! Row layout mirrors [`StateLayout`]: rows `2k, 2k+1` are real and imaginary
//! current balance at bus k (injections minus network outflow), row `q(j)`
//! is the voltage-magnitude constraint of the j-th PV bus, the two slack
//! current rows pin the slack voltage, and the last row closes the system on
//! Δf.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freq::{scaled_load_with_derivatives, LoadEval};
use crate::solver::model::{BusRole, SolverModel, SolverState, StateLayout};

const MIN_V_SQ: f64 = 1e-8;

/// How the Δf unknown is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyClosure {
    /// Slack output tied to its frequency-dependent target (primary and
    /// secondary control active).
    Coupled,
    /// Δf held at zero, droop disabled, the slack absorbs the mismatch.
    Pinned,
}

/// Jacobian in triplet form. Entry order is fixed for a given model, so the
/// pattern can be analysed once.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub n: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    fn with_capacity(n: usize, cap: usize) -> Self {
        Triplets {
            n,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    fn push(&mut self, r: usize, c: usize, v: f64) {
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.rows.iter().copied().zip(self.cols.iter().copied()).collect()
    }

    /// Dense copy with duplicates summed, for tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.len() {
            m[self.rows[i]][self.cols[i]] += self.vals[i];
        }
        m
    }
}

/// Generator power at one bus with its Δf derivative.
#[derive(Debug, Clone, Copy, Default)]
struct GenPower {
    p: f64,
    dp_df: f64,
}

fn bus_generation(
    model: &SolverModel,
    bus: usize,
    df: f64,
    secondary: &[f64],
    closure: FrequencyClosure,
) -> GenPower {
    let mut out = GenPower::default();
    for &g in &model.gens_at[bus] {
        let unit = &model.gens[g];
        out.p += unit.p_set + secondary[g];
        if closure == FrequencyClosure::Coupled {
            out.p += unit.droop.eval(df);
            out.dp_df += unit.droop.derivative(df);
        }
    }
    out
}

fn bus_load(model: &SolverModel, bus: usize, v_mag: f64, df: f64) -> LoadEval {
    let mut acc = LoadEval::default();
    for l in &model.loads_at[bus] {
        acc += scaled_load_with_derivatives(l, v_mag, df);
    }
    acc
}

/// Current injected by a complex power `S = P + jQ` that depends on |V| and
/// Δf, with its partials.
struct Injection {
    i: Complex64,
    // d(re, im) / d(vr, vi, df)
    dr: [f64; 3],
    di: [f64; 3],
}

#[allow(clippy::too_many_arguments)]
fn injection(v: Complex64, p: f64, q: f64, p_m: f64, q_m: f64, p_f: f64, q_f: f64) -> Injection {
    let (vr, vi) = (v.re, v.im);
    let u = vr * vr + vi * vi;
    let m = u.sqrt();
    let nr = p * vr + q * vi;
    let ni = p * vi - q * vr;
    // d|V|/dvr = vr/m, d|V|/dvi = vi/m
    let (mr, mi) = (vr / m, vi / m);
    let u2 = u * u;
    let dr_dvr = (p_m * mr * vr + p + q_m * mr * vi) / u - 2.0 * vr * nr / u2;
    let dr_dvi = (p_m * mi * vr + q_m * mi * vi + q) / u - 2.0 * vi * nr / u2;
    let di_dvr = (p_m * mr * vi - q_m * mr * vr - q) / u - 2.0 * vr * ni / u2;
    let di_dvi = (p_m * mi * vi + p - q_m * mi * vr) / u - 2.0 * vi * ni / u2;
    Injection {
        i: Complex64::new(nr / u, ni / u),
        dr: [dr_dvr, dr_dvi, (p_f * vr + q_f * vi) / u],
        di: [di_dvr, di_dvi, (p_f * vi - q_f * vr) / u],
    }
}

fn has_injection(model: &SolverModel, bus: usize) -> bool {
    let gens = model.roles[bus] != BusRole::Slack && !model.gens_at[bus].is_empty();
    gens || !model.loads_at[bus].is_empty()
}

/// Evaluates residuals and, when `jac` is given, fills the Jacobian.
pub(crate) fn evaluate(
    model: &SolverModel,
    state: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
    mut jac: Option<&mut Triplets>,
) -> Result<Vec<f64>> {
    let l: &StateLayout = &model.layout;
    let x = &state.x;
    let n = l.n_bus();
    let df = x[l.df()];
    let mut f = vec![0.0; l.len()];

    for k in 0..n {
        let (rr, ri) = (l.vr(k), l.vi(k));
        let v = state.voltage(k);

        // network outflow -(Y V)_k
        let mut out = Complex64::new(0.0, 0.0);
        for &(j, y) in &model.ybus[k] {
            out += y * state.voltage(j);
            if let Some(t) = jac.as_deref_mut() {
                t.push(rr, l.vr(j), -y.re);
                t.push(rr, l.vi(j), y.im);
                t.push(ri, l.vr(j), -y.im);
                t.push(ri, l.vi(j), -y.re);
            }
        }
        f[rr] -= out.re;
        f[ri] -= out.im;

        let role = model.roles[k];
        if has_injection(model, k) {
            let u = v.norm_sqr();
            if !(u >= MIN_V_SQ) {
                return Err(Error::NearSingularVoltage { bus_id: l.bus_ids[k], v_sq: u });
            }
            let gen = if role == BusRole::Slack {
                GenPower::default()
            } else {
                bus_generation(model, k, df, secondary, closure)
            };
            let load = bus_load(model, k, u.sqrt(), df);
            let q_gen = match role {
                BusRole::PV(j) => x[l.q(j)],
                _ => 0.0,
            };
            let inj = injection(
                v,
                gen.p - load.p,
                q_gen - load.q,
                -load.dp_dv,
                -load.dq_dv,
                gen.dp_df - load.dp_df,
                -load.dq_df,
            );
            f[rr] += inj.i.re;
            f[ri] += inj.i.im;
            if let Some(t) = jac.as_deref_mut() {
                t.push(rr, l.vr(k), inj.dr[0]);
                t.push(rr, l.vi(k), inj.dr[1]);
                t.push(ri, l.vr(k), inj.di[0]);
                t.push(ri, l.vi(k), inj.di[1]);
                t.push(rr, l.df(), inj.dr[2]);
                t.push(ri, l.df(), inj.di[2]);
                if let BusRole::PV(j) = role {
                    t.push(rr, l.q(j), v.im / u);
                    t.push(ri, l.q(j), -v.re / u);
                }
            }
        }

        match role {
            BusRole::Slack => {
                f[rr] += x[l.slack_ir()];
                f[ri] += x[l.slack_ii()];
                if let Some(t) = jac.as_deref_mut() {
                    t.push(rr, l.slack_ir(), 1.0);
                    t.push(ri, l.slack_ii(), 1.0);
                }
            }
            BusRole::PV(j) => {
                let row = l.q(j);
                f[row] = v.norm_sqr() - model.v_set[k] * model.v_set[k];
                if let Some(t) = jac.as_deref_mut() {
                    t.push(row, l.vr(k), 2.0 * v.re);
                    t.push(row, l.vi(k), 2.0 * v.im);
                }
            }
            BusRole::PQ => {}
        }
    }

    // slack voltage pinned at its setpoint
    let s = l.slack;
    let vs = state.voltage(s);
    f[l.slack_ir()] = vs.re - model.slack_voltage.re;
    f[l.slack_ii()] = vs.im - model.slack_voltage.im;
    if let Some(t) = jac.as_deref_mut() {
        t.push(l.slack_ir(), l.vr(s), 1.0);
        t.push(l.slack_ii(), l.vi(s), 1.0);
    }

    let row = l.df();
    match closure {
        FrequencyClosure::Coupled => {
            let target = bus_generation(model, s, df, secondary, closure);
            let is = state.slack_current();
            f[row] = target.p - (vs.re * is.re + vs.im * is.im);
            if let Some(t) = jac.as_deref_mut() {
                t.push(row, l.df(), target.dp_df);
                t.push(row, l.vr(s), -is.re);
                t.push(row, l.vi(s), -is.im);
                t.push(row, l.slack_ir(), -vs.re);
                t.push(row, l.slack_ii(), -vs.im);
            }
        }
        FrequencyClosure::Pinned => {
            f[row] = df;
            if let Some(t) = jac.as_deref_mut() {
                t.push(row, l.df(), 1.0);
            }
        }
    }

    Ok(f)
}

fn jacobian_capacity(model: &SolverModel) -> usize {
    let nnz_y: usize = model.ybus.iter().map(Vec::len).sum();
    4 * nnz_y + 10 * model.n_bus() + 16
}

/// Residual vector of the augmented system at `state`.
pub fn assemble_residuals(
    model: &SolverModel,
    state: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
) -> Result<Vec<f64>> {
    evaluate(model, state, secondary, closure, None)
}

/// Analytic Jacobian of [`assemble_residuals`].
pub fn assemble_jacobian(
    model: &SolverModel,
    state: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
) -> Result<Triplets> {
    let mut t = Triplets::with_capacity(model.layout.len(), jacobian_capacity(model));
    evaluate(model, state, secondary, closure, Some(&mut t))?;
    Ok(t)
}

/// Residuals and Jacobian in one pass.
pub fn assemble(
    model: &SolverModel,
    state: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
) -> Result<(Vec<f64>, Triplets)> {
    let mut t = Triplets::with_capacity(model.layout.len(), jacobian_capacity(model));
    let f = evaluate(model, state, secondary, closure, Some(&mut t))?;
    Ok((f, t))
}
