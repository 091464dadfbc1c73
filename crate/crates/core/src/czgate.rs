//! Photon-photon controlled-Z gate.
//!
//! The control photon arrives through the antenna `d` and is stored in `b`;
//! the target photon then arrives through the same antenna while a constant
//! exchange drive `Ω_a (a†d + h.c.)` routes it through `a`. With `b`
//! occupied the `a†b†c` coupling shifts the two-excitation level and the
//! target no longer enters `a`, so it reflects without the phase it picks up
//! when `b` is empty. Finally the control is retrieved.
//!
//! All photons share the antenna waveguide. Branches are simulated with the
//! pulsed amplitude hierarchy; the two-photon branch is built as a cascade
//! over the time of the first detection.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_pulsed, evolve_pulsed_levels, Coefficient, DrivenTerm, PulsedResult, PulsedSystem};
use crate::envelope::{Envelope, EnvelopeKind};
use crate::error::{Error, Result};
use crate::fock::{build_basis, AtomKind, AtomSpec, FockBasis, ModeLabel, ModeSpec};
use crate::ode::{uniform_grid, Tolerance};
use crate::storage::{optimal_retrieval_drive, optimal_storage_drive, AntennaParams};

const C0: Complex64 = Complex64::new(0.0, 0.0);

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn plus() -> Complex64 {
    Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
}

/// Qubit `α|0⟩ + β|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Qubit {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl Qubit {
    pub fn plus() -> Self {
        Qubit {
            alpha: plus(),
            beta: plus(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let n = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::param(name, format!("|alpha|^2 + |beta|^2 = {n}, not 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub g: f64,
    pub kappa_a0: f64,
    pub kappa_b0: f64,
    pub kappa_c: f64,
    pub antenna: AntennaParams,
    /// Duration of the control and target pulses.
    pub pulse_duration: f64,
    /// Gap between storage and target arrival, and between target and
    /// retrieval; `None` means `0.2 · pulse_duration`.
    pub hold: Option<f64>,
    /// Scatter-window exchange drive; `None` means `√(κ_d g)`.
    pub omega_a: Option<f64>,
    /// Grid points per pulse duration.
    pub samples_per_pulse: usize,
    pub n_max: usize,
    pub control: Qubit,
    pub target: Qubit,
    pub tolerance: Tolerance,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            g: 100.0,
            kappa_a0: 1.0,
            kappa_b0: 1.0,
            kappa_c: 1.0,
            antenna: AntennaParams::default(),
            pulse_duration: 0.1,
            hold: None,
            omega_a: None,
            samples_per_pulse: 400,
            n_max: 2,
            control: Qubit::plus(),
            target: Qubit::plus(),
            tolerance: Tolerance::default(),
        }
    }
}

/// Time windows of the sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub store: (f64, f64),
    pub target: (f64, f64),
    pub scatter_drive: (f64, f64),
    pub retrieve: (f64, f64),
}

impl Schedule {
    pub fn end(&self) -> f64 {
        self.retrieve.1
    }

    fn validate(&self) -> Result<()> {
        let ordered = [
            self.store.0,
            self.store.1,
            self.scatter_drive.0,
            self.target.0,
            self.target.1,
            self.scatter_drive.1,
            self.retrieve.0,
            self.retrieve.1,
        ];
        if ordered.windows(2).any(|w| !(w[1] >= w[0])) || !(self.store.1 > self.store.0) {
            return Err(Error::Schedule(format!("windows overlap or are out of order: {self:?}")));
        }
        Ok(())
    }
}

impl GateConfig {
    pub fn kappa_d(&self) -> f64 {
        self.antenna.kappa_d()
    }

    pub fn hold_time(&self) -> f64 {
        self.hold.unwrap_or(0.2 * self.pulse_duration)
    }

    pub fn scatter_drive(&self) -> f64 {
        self.omega_a.unwrap_or_else(|| (self.kappa_d() * self.g).sqrt())
    }

    pub fn schedule(&self) -> Schedule {
        let t = self.pulse_duration;
        let h = self.hold_time();
        Schedule {
            store: (0.0, t),
            target: (t + h, 2.0 * t + h),
            scatter_drive: (t, 2.0 * t + 2.0 * h),
            retrieve: (2.0 * t + 2.0 * h, 3.0 * t + 2.0 * h),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g", self.g),
            ("kappa_a0", self.kappa_a0),
            ("kappa_b0", self.kappa_b0),
            ("kappa_c", self.kappa_c),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        self.antenna.validate()?;
        if !(self.pulse_duration > 0.0 && self.pulse_duration.is_finite()) {
            return Err(Error::param("pulse_duration", "must be positive"));
        }
        if let Some(h) = self.hold {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(Error::Schedule(format!("hold must be >= 0, got {h}")));
            }
        }
        if let Some(w) = self.omega_a {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::param("omega_a", "must be finite and >= 0"));
            }
        }
        if self.samples_per_pulse < 20 {
            return Err(Error::param("samples_per_pulse", "need at least 20"));
        }
        if self.n_max < 2 {
            return Err(Error::param("n_max", "the gate needs two excitations (n_max >= 2)"));
        }
        self.control.validate("control")?;
        self.target.validate("target")?;
        self.schedule().validate()
    }

    /// Atom `a, b, c` plus the antenna `d`.
    pub fn atom(&self) -> AtomSpec {
        AtomSpec {
            kind: AtomKind::NonDegenerate,
            g: self.g,
            modes: vec![
                ModeSpec::new(ModeLabel::A, 0.0, self.kappa_a0, 0.0),
                ModeSpec::new(ModeLabel::B, 0.0, self.kappa_b0, 0.0),
                ModeSpec::new(ModeLabel::C, 0.0, self.kappa_c, 0.0),
                ModeSpec::new(ModeLabel::D, 0.0, self.antenna.kappa_d0, self.antenna.kappa_d1),
            ],
        }
    }
}

/// Per-input fidelities for the inputs `|00⟩, |01⟩, |10⟩, |11⟩, |++⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityTable {
    pub inputs: Vec<String>,
    pub f_raw: Vec<f64>,
    pub f_ps: Vec<f64>,
    pub p_detect: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GateReport {
    pub g: f64,
    pub times: Vec<f64>,
    pub control_in: Envelope,
    pub target_in: Envelope,
    /// Target output with the control absent.
    pub b_out0: Envelope,
    /// Target output with the control present, projected on the control's
    /// own output.
    pub b_out1: Envelope,
    /// Control output (leak plus retrieval) with the target absent.
    pub a_out: Envelope,
    pub phi_cond: f64,
    pub eta_s: f64,
    pub eta_r: f64,
    /// Probability that the control alone is stored, held and retrieved.
    pub round_trip: f64,
    pub f_raw: f64,
    pub f_ps: f64,
    pub p_ps: f64,
    /// Fidelities for the configured control and target qubits.
    pub f_raw_config: f64,
    pub f_ps_config: f64,
    pub table: FidelityTable,
    pub branches: Branches,
    /// Largest probability-balance defect over all pulsed runs.
    pub balance_defect: f64,
}

/// Overlaps between simulated branches `A_k` and ideal branches `I_k`, in
/// the order `00, 01, 10, 11`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branches {
    /// `⟨I_k|A_l⟩`.
    pub ideal_out: [[Complex64; 4]; 4],
    /// `⟨A_k|A_l⟩`.
    pub out_out: [[Complex64; 4]; 4],
    /// `⟨I_k|I_l⟩`.
    pub ideal_ideal: [[Complex64; 4]; 4],
}

impl Branches {
    /// Output and ideal states coincide.
    pub fn ideal() -> Self {
        let mut m = [[C0; 4]; 4];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = one();
        }
        Branches {
            ideal_out: m,
            out_out: m,
            ideal_ideal: m,
        }
    }

    fn form(m: &[[Complex64; 4]; 4], x: &[Complex64; 4]) -> Complex64 {
        let mut acc = C0;
        for k in 0..4 {
            for l in 0..4 {
                acc += x[k].conj() * m[k][l] * x[l];
            }
        }
        acc
    }

    /// `(F_raw, F_ps, P)` for logical input amplitudes `x`.
    pub fn fidelity(&self, x: &[Complex64; 4]) -> Result<(f64, f64, f64)> {
        let ii = Self::form(&self.ideal_ideal, x).re;
        let io = Self::form(&self.ideal_out, x);
        let oo = Self::form(&self.out_out, x).re;
        let norms: Vec<f64> = (0..4).map(|k| self.out_out[k][k].re.sqrt()).collect();
        let mut ps_io = [[C0; 4]; 4];
        let mut ps_oo = [[C0; 4]; 4];
        for k in 0..4 {
            for l in 0..4 {
                if x[l] == C0 {
                    continue;
                }
                if norms[l] == 0.0 {
                    return Err(Error::ZeroNorm(format!("output branch {}", BRANCH_NAMES[l])));
                }
                ps_io[k][l] = self.ideal_out[k][l] / norms[l];
                if x[k] != C0 {
                    ps_oo[k][l] = self.out_out[k][l] / (norms[k] * norms[l]);
                }
            }
        }
        let f_raw = io.norm_sqr() / ii;
        let f_ps = Self::form(&ps_io, x).norm_sqr() / (ii * Self::form(&ps_oo, x).re);
        Ok((f_raw, f_ps, oo))
    }

    /// Fidelities over `|00⟩, |01⟩, |10⟩, |11⟩, |++⟩`.
    pub fn table(&self) -> Result<FidelityTable> {
        let h = Complex64::new(0.5, 0.0);
        let inputs: [(&str, [Complex64; 4]); 5] = [
            ("00", [one(), C0, C0, C0]),
            ("01", [C0, one(), C0, C0]),
            ("10", [C0, C0, one(), C0]),
            ("11", [C0, C0, C0, one()]),
            ("++", [h, h, h, h]),
        ];
        let mut t = FidelityTable {
            inputs: vec![],
            f_raw: vec![],
            f_ps: vec![],
            p_detect: vec![],
        };
        for (name, x) in inputs {
            let (r, p, d) = self.fidelity(&x)?;
            t.inputs.push(name.into());
            t.f_raw.push(r);
            t.f_ps.push(p);
            t.p_detect.push(d);
        }
        Ok(t)
    }
}

const BRANCH_NAMES: [&str; 4] = ["00", "01", "10", "11"];

/// Logical amplitudes `(00, 01, 10, 11)` of a control ⊗ target product.
pub fn product_amplitudes(control: &Qubit, target: &Qubit) -> [Complex64; 4] {
    [
        control.alpha * target.alpha,
        control.alpha * target.beta,
        control.beta * target.alpha,
        control.beta * target.beta,
    ]
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `(F_raw, F_ps, P_ps)` averaged over the five standard inputs.
pub fn fidelity(report: &GateReport) -> (f64, f64, f64) {
    (mean(&report.table.f_raw), mean(&report.table.f_ps), mean(&report.table.p_detect))
}

struct Setup {
    basis: FockBasis,
    atom: AtomSpec,
    terms: Vec<DrivenTerm>,
    times: Vec<f64>,
    dt: f64,
    control: Envelope,
    target: Envelope,
    /// Control envelope moved to the retrieval window.
    control_ref: Envelope,
    schedule: Schedule,
}

impl Setup {
    fn new(cfg: &GateConfig) -> Result<Self> {
        cfg.validate()?;
        let atom = cfg.atom();
        let basis = build_basis(&atom, cfg.n_max)?;
        let s = cfg.schedule();
        let n = cfg.samples_per_pulse;
        let t = cfg.pulse_duration;
        let dt = t / n as f64;
        let steps = (s.end() / dt).round() as usize;
        let times = uniform_grid(0.0, steps as f64 * dt, steps + 1);
        let control = Envelope::truncated_gaussian(s.store.0, t, n + 1)?;
        let target = Envelope::truncated_gaussian(s.target.0, t, n + 1)?;
        let control_ref = control.shifted(s.retrieve.0 - s.store.0);
        let kd = cfg.kappa_d();
        let cap = cfg.antenna.omega_cap();
        let store = optimal_storage_drive(&control, kd, cap)?;
        let retrieve = optimal_retrieval_drive(&control_ref, kd, cap)?;
        let terms = vec![
            DrivenTerm::exchange(&basis, ModeLabel::B, ModeLabel::D, Coefficient::Sampled(store))?,
            DrivenTerm::exchange(&basis, ModeLabel::B, ModeLabel::D, Coefficient::Sampled(retrieve))?,
            DrivenTerm::exchange(
                &basis,
                ModeLabel::A,
                ModeLabel::D,
                Coefficient::Window {
                    value: Complex64::new(cfg.scatter_drive(), 0.0),
                    start: s.scatter_drive.0,
                    end: s.scatter_drive.1,
                },
            )?,
        ];
        Ok(Setup {
            basis,
            atom,
            terms,
            times,
            dt,
            control,
            target,
            control_ref,
            schedule: s,
        })
    }

    fn system(&self, envelope: &Envelope) -> Result<PulsedSystem> {
        let mut sys = PulsedSystem::for_atom(&self.atom, &self.basis, ModeLabel::D, Some(envelope.clone()), 1)?;
        sys.terms = self.terms.clone();
        Ok(sys)
    }

    fn index(&self, t: f64) -> usize {
        ((t - self.times[0]) / self.dt).round() as usize
    }

    /// Photon envelope resampled on the global grid.
    fn on_grid(&self, e: &Envelope) -> Vec<Complex64> {
        self.times.iter().map(|&t| e.eval(t)).collect()
    }

    fn envelope(&self, v: Vec<Complex64>) -> Result<Envelope> {
        Envelope::new(self.times[0], self.dt, v, EnvelopeKind::Photon)
    }

    fn weights(&self) -> Vec<f64> {
        let n = self.times.len();
        (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * self.dt } else { self.dt }).collect()
    }
}

fn dot(w: &[f64], a: &[Complex64], b: &[Complex64]) -> Complex64 {
    w.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| x.conj() * y * *w).sum()
}

/// Emission amplitudes `⟨vac|J_0⟩` of a one-photon run started from the given
/// pulse levels.
fn second_emission(
    sys: &PulsedSystem,
    init: [DVector<Complex64>; 2],
    times: &[f64],
    vac: &DVector<Complex64>,
    tol: Tolerance,
) -> Result<(Vec<Complex64>, f64)> {
    if init[0].norm() == 0.0 && init[1].norm() == 0.0 {
        return Ok((vec![C0; times.len()], 0.0));
    }
    let r = evolve_pulsed_levels(sys, &init, times, tol)?;
    Ok((r.output_amplitude(0, vac), r.balance_defect().abs()))
}

/// Simulate the gate for `cfg`.
pub fn run_cz(cfg: &GateConfig) -> Result<GateReport> {
    let s = Setup::new(cfg)?;
    let tol = cfg.tolerance;
    let vac = s.basis.vacuum();
    let b1 = s.basis.basis_vector(s.basis.index_with(&[(ModeLabel::B, 1)])?);
    let nt = s.times.len();
    let w = s.weights();

    let ctrl_sys = s.system(&s.control)?;
    let tgt_sys = s.system(&s.target)?;
    let ctrl: PulsedResult = evolve_pulsed(&ctrl_sys, &vac, &s.times, tol)?;
    let tgt: PulsedResult = evolve_pulsed(&tgt_sys, &vac, &s.times, tol)?;
    let mut balance = ctrl.balance_defect().abs().max(tgt.balance_defect().abs());

    let a10 = ctrl.output_amplitude(0, &vac);
    let a01 = tgt.output_amplitude(0, &vac);

    // two-photon branch: control alone until the target starts, then the
    // target hierarchy from the control's state, then a second run from
    // every first-emission time
    let k_t = s.index(s.schedule.target.0);
    let init = [DVector::from_element(s.basis.len(), C0), ctrl.levels[k_t][0].clone()];
    let stage = evolve_pulsed_levels(&tgt_sys, &init, &s.times[k_t..], tol)?;
    balance = balance.max(stage.balance_defect().abs());
    let rows: Vec<(Vec<Complex64>, f64)> = (k_t..nt)
        .into_par_iter()
        .map(|k| {
            let e = &stage.emissions[k - k_t];
            second_emission(&tgt_sys, [e[0].clone(), e[1].clone()], &s.times[k..], &vac, tol)
        })
        .collect::<Result<_>>()?;

    let b_in = s.on_grid(&s.target);
    let a_ref = s.on_grid(&s.control_ref);
    // ordered two-time integrals ∫_{τ1<τ2}, half weight on the diagonal
    let mut o11 = C0;
    let mut n11 = 0.0;
    let mut proj = vec![C0; nt];
    let leak: Vec<Complex64> = (0..k_t).map(|k| vac.dotc(&ctrl.emissions[k][0])).collect();
    for k in 0..nt {
        let tail: Vec<Complex64>;
        let row: &[Complex64] = if k < k_t {
            tail = a01[k..].iter().map(|v| v * leak[k]).collect();
            &tail
        } else {
            balance = balance.max(rows[k - k_t].1);
            &rows[k - k_t].0
        };
        let mut oi = C0;
        let mut nn = 0.0;
        let mut pr = C0;
        for (off, phi) in row.iter().enumerate() {
            let j = k + off;
            let wj = if off == 0 { 0.5 * w[j] } else { w[j] };
            oi += a_ref[j].conj() * phi * wj;
            nn += phi.norm_sqr() * wj;
            pr += a10[j].conj() * phi * wj;
        }
        o11 += b_in[k].conj() * oi * w[k];
        n11 += nn * w[k];
        proj[k] = pr;
    }
    let a10_norm = dot(&w, &a10, &a10).re;
    let b_out1: Vec<Complex64> = proj.iter().map(|v| v / a10_norm).collect();

    let o01 = dot(&w, &b_in, &a01);
    let o10 = dot(&w, &a_ref, &a10);
    let phi_t = o01.arg();
    let phi_c = o10.arg();
    let et = Complex64::from_polar(1.0, phi_t);
    let ec = Complex64::from_polar(1.0, phi_c);
    let e11 = -et * ec;

    let mut ideal_out = [[C0; 4]; 4];
    let mut out_out = [[C0; 4]; 4];
    let mut ideal_ideal = [[C0; 4]; 4];
    ideal_out[0][0] = one();
    out_out[0][0] = one();
    ideal_ideal[0][0] = one();
    let ones = [(1usize, &a01, &b_in, et), (2usize, &a10, &a_ref, ec)];
    for &(k, ak, ik, ek) in &ones {
        for &(l, al, il, el) in &ones {
            ideal_out[k][l] = ek.conj() * dot(&w, ik, al);
            out_out[k][l] = dot(&w, ak, al);
            ideal_ideal[k][l] = ek.conj() * el * dot(&w, ik, il);
        }
    }
    ideal_out[3][3] = e11.conj() * o11;
    out_out[3][3] = Complex64::new(n11, 0.0);
    ideal_ideal[3][3] = Complex64::new(ordered_norm(&w, &b_in, &a_ref), 0.0);
    let branches = Branches {
        ideal_out,
        out_out,
        ideal_ideal,
    };
    let table = branches.table()?;
    let (f_raw_config, f_ps_config, _) = branches.fidelity(&product_amplitudes(&cfg.control, &cfg.target))?;

    let b_in_overlap1 = dot(&w, &b_in, &b_out1);
    let phi_cond = wrap((b_in_overlap1 / o01).arg());

    let k_store = s.index(s.schedule.store.1);
    let k_ret = s.index(s.schedule.retrieve.0);
    let stored = b1.dotc(&ctrl.levels[k_store][0]).norm_sqr();
    let held = b1.dotc(&ctrl.levels[k_ret][0]).norm_sqr();
    let retrieved: f64 = (k_ret..nt)
        .map(|k| a10[k].norm_sqr() * if k == k_ret { 0.5 * w[k] } else { w[k] })
        .sum();

    let mut report = GateReport {
        g: cfg.g,
        times: s.times.clone(),
        control_in: s.envelope(s.on_grid(&s.control))?,
        target_in: s.envelope(b_in.clone())?,
        b_out0: s.envelope(a01)?,
        b_out1: s.envelope(b_out1)?,
        a_out: s.envelope(a10)?,
        phi_cond,
        eta_s: stored,
        eta_r: if held > 0.0 { retrieved / held } else { 0.0 },
        round_trip: retrieved,
        f_raw: 0.0,
        f_ps: 0.0,
        p_ps: 0.0,
        f_raw_config,
        f_ps_config,
        table,
        branches,
        balance_defect: balance,
    };
    let (r, p, d) = fidelity(&report);
    report.f_raw = r;
    report.f_ps = p;
    report.p_ps = d;
    Ok(report)
}

/// `∫_{τ1<τ2} |b(τ1) a(τ2)|²`.
fn ordered_norm(w: &[f64], b: &[Complex64], a: &[Complex64]) -> f64 {
    let n = b.len();
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + a[j].norm_sqr() * w[j];
    }
    (0..n)
        .map(|k| b[k].norm_sqr() * w[k] * (suffix[k] - 0.5 * a[k].norm_sqr() * w[k]))
        .sum()
}

/// Map an angle to `(−π, π]`.
fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// One row of a `g` sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub g: f64,
    pub f_raw: f64,
    pub f_ps: f64,
    pub p_ps: f64,
    pub phi_cond: f64,
    pub error: Option<String>,
}

/// Independent [`run_cz`] for every `g`; failures are recorded per row.
pub fn sweep_g(cfg: &GateConfig, g_values: &[f64]) -> Result<Vec<SweepRow>> {
    if let Some(g) = g_values.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::param("g_values", format!("must be positive, got {g}")));
    }
    Ok(g_values
        .par_iter()
        .map(|&g| {
            let c = GateConfig { g, ..cfg.clone() };
            match run_cz(&c) {
                Ok(r) => SweepRow {
                    g,
                    f_raw: r.f_raw,
                    f_ps: r.f_ps,
                    p_ps: r.p_ps,
                    phi_cond: r.phi_cond,
                    error: None,
                },
                Err(e) => SweepRow {
                    g,
                    f_raw: f64::NAN,
                    f_ps: f64::NAN,
                    p_ps: f64::NAN,
                    phi_cond: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
