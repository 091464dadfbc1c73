//! Antenna-mediated single-photon storage and retrieval.
//!
//! A strongly over-coupled antenna mode `d` (rates `κ_d0`, `κ_d1`) is
//! coupled to a long-lived storage mode `b` (rate `κ_b`) by a controllable
//! exchange drive `Ω(t)`: `H = Ω* d†b + Ω b†d`. In the one-excitation sector
//!
//! ```text
//! dc₁₀/dt = −κ_d c₁₀ − iΩ* c₀₁ + √(2κ_d1) φ_in
//! dc₀₁/dt = −κ_b c₀₁ − iΩ c₁₀
//! φ_out   = φ_in − √(2κ_d1) c₁₀
//! ```
//!
//! with `c₁₀` the antenna amplitude and `c₀₁` the stored amplitude.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{trapezoid, Envelope, EnvelopeKind};
use crate::error::{Error, Result};
use crate::ode::{Dopri5, Tolerance};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Two linearly coupled resonators and the electro-optic modulation that
/// drives transitions between their supermodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupermodeSpec {
    pub omega_m1: f64,
    pub omega_m2: f64,
    pub j: f64,
    #[serde(default)]
    pub g_eo: f64,
    #[serde(default)]
    pub omega_eo: f64,
    /// Residual detuning of the modulation from the supermode splitting.
    #[serde(default)]
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Supermodes {
    pub spec: SupermodeSpec,
    pub delta_omega: f64,
    pub omega_b: f64,
    pub omega_d: f64,
    /// `tanθ = J/δω`, taken in `[0, π]` so that `b` is always the upper
    /// supermode.
    pub theta: f64,
    /// `(G/2) sinθ`.
    pub coupling: f64,
}

impl Supermodes {
    /// Weights of the bare modes in `b` and `d`:
    /// `b = cos(θ/2) m₁ + sin(θ/2) m₂`, `d = −sin(θ/2) m₁ + cos(θ/2) m₂`.
    pub fn mixing(&self) -> [[f64; 2]; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        [[c, s], [-s, c]]
    }
}

pub fn supermode_transform(spec: &SupermodeSpec) -> Result<Supermodes> {
    if !(spec.j >= 0.0 && spec.j.is_finite()) {
        return Err(Error::param("j", "linear coupling must be finite and >= 0"));
    }
    for (name, v) in [
        ("omega_m1", spec.omega_m1),
        ("omega_m2", spec.omega_m2),
        ("g_eo", spec.g_eo),
        ("omega_eo", spec.omega_eo),
        ("delta", spec.delta),
    ] {
        if !v.is_finite() {
            return Err(Error::param(name, "must be finite"));
        }
    }
    let omega0 = 0.5 * (spec.omega_m1 + spec.omega_m2);
    let delta_omega = 0.5 * (spec.omega_m1 - spec.omega_m2);
    let r = delta_omega.hypot(spec.j);
    let theta = spec.j.atan2(delta_omega);
    Ok(Supermodes {
        spec: *spec,
        delta_omega,
        omega_b: omega0 + r,
        omega_d: omega0 - r,
        theta,
        coupling: 0.5 * spec.g_eo * theta.sin(),
    })
}

/// Antenna and storage-mode rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaParams {
    pub kappa_d0: f64,
    pub kappa_d1: f64,
    /// Decay rate of the storage mode.
    pub kappa_b: f64,
    /// Drive cap; `None` means `5 κ_d`.
    #[serde(default)]
    pub omega_max: Option<f64>,
}

impl Default for AntennaParams {
    fn default() -> Self {
        AntennaParams {
            kappa_d0: 2.0,
            kappa_d1: 2000.0,
            kappa_b: 1.0,
            omega_max: None,
        }
    }
}

impl AntennaParams {
    pub fn kappa_d(&self) -> f64 {
        self.kappa_d0 + self.kappa_d1
    }

    pub fn omega_cap(&self) -> f64 {
        self.omega_max.unwrap_or(5.0 * self.kappa_d())
    }

    /// `κ_d1 / κ_d`, the best achievable storage or retrieval efficiency.
    pub fn efficiency_bound(&self) -> f64 {
        self.kappa_d1 / self.kappa_d()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa_d0", self.kappa_d0), ("kappa_d1", self.kappa_d1), ("kappa_b", self.kappa_b)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.kappa_d() > 0.0) {
            return Err(Error::param("kappa_d1", "antenna needs a nonzero decay rate"));
        }
        if let Some(m) = self.omega_max {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::param("omega_max", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Effective intrinsic and external rates an atom mode acquires through the
/// antenna.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveCoupling {
    pub times: Vec<f64>,
    pub kappa0: Vec<f64>,
    pub kappa1: Vec<f64>,
    pub warnings: Vec<String>,
}

/// `κ̃₀ = κ_A0 + |Ω|² κ_d0/κ_d²`, `κ̃₁ = |Ω|² κ_d1/κ_d²` at every drive sample.
pub fn effective_rates(omega: &Envelope, kappa_a0: f64, kappa_d0: f64, kappa_d1: f64) -> Result<EffectiveCoupling> {
    let p = AntennaParams {
        kappa_d0,
        kappa_d1,
        kappa_b: kappa_a0,
        omega_max: None,
    };
    p.validate()?;
    let kd = p.kappa_d();
    let mut warnings = Vec::new();
    let peak = omega.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak > 0.2 * kd {
        warnings.push(format!(
            "|Ω| reaches {peak:.4} > 0.2 κ_d = {:.4}; adiabatic elimination of the antenna is doubtful",
            0.2 * kd
        ));
    }
    let w2: Vec<f64> = omega.samples.iter().map(|v| v.norm_sqr() / (kd * kd)).collect();
    Ok(EffectiveCoupling {
        times: omega.times(),
        kappa0: w2.iter().map(|w| kappa_a0 + w * kappa_d0).collect(),
        kappa1: w2.iter().map(|w| w * kappa_d1).collect(),
        warnings,
    })
}

/// `Ω(t) = −i √(κ_d/2) A(t) / √(∫_t^∞ |A|²)`, capped at `omega_max`.
///
/// Once the cap is reached the drive is held at the cap with its last phase
/// until the end of the grid.
pub fn optimal_retrieval_drive(target: &Envelope, kappa_d: f64, omega_max: f64) -> Result<Envelope> {
    if !(kappa_d > 0.0) {
        return Err(Error::param("kappa_d", "must be positive"));
    }
    if !(omega_max > 0.0) {
        return Err(Error::param("omega_max", "must be positive"));
    }
    if target.kind != EnvelopeKind::Photon {
        return Err(Error::param("target", "optimal drive needs a photon envelope"));
    }
    let n = target.len();
    let energy = target.energy();
    if !(energy > 0.0) {
        return Err(Error::ZeroNorm("retrieval target".into()));
    }
    let mut remaining = vec![0.0; n];
    for i in (0..n - 1).rev() {
        remaining[i] = remaining[i + 1] + 0.5 * target.dt * (target.samples[i].norm_sqr() + target.samples[i + 1].norm_sqr());
    }
    let pref = (kappa_d / 2.0).sqrt();
    let mut samples = Vec::with_capacity(n);
    let mut held: Option<Complex64> = None;
    let mut phase = -I;
    for i in 0..n {
        if let Some(h) = held {
            samples.push(h);
            continue;
        }
        let a = target.samples[i];
        if a.norm() > 0.0 {
            phase = -I * a / a.norm();
        }
        let w = if remaining[i] > 0.0 {
            -I * a * (pref / remaining[i].sqrt())
        } else {
            C0
        };
        if w.norm() >= omega_max || (remaining[i] <= 0.0 && i > 0) {
            let h = phase * omega_max;
            held = Some(h);
            samples.push(h);
        } else {
            samples.push(w);
        }
    }
    Envelope::new(target.t0, target.dt, samples, EnvelopeKind::Drive)
}

/// Drive that absorbs `input`: the time reverse of the retrieval drive for
/// the time-reversed (conjugated) input, `Ω_s(t) = Ω_r*(t0 + t_end − t)`.
pub fn optimal_storage_drive(input: &Envelope, kappa_d: f64, omega_max: f64) -> Result<Envelope> {
    let reversed = input.time_reversed(true);
    Ok(optimal_retrieval_drive(&reversed, kappa_d, omega_max)?.time_reversed(true))
}

/// `[κ_d1/κ_d] (1 − e^{−2h/κ_d})` with `h = ∫|Ω|²`, the adiabatic retrieval
/// efficiency of a drive with energy `h`.
pub fn retrieval_efficiency_closed_form(drive_energy: f64, p: &AntennaParams) -> f64 {
    p.efficiency_bound() * (1.0 - (-2.0 * drive_energy / p.kappa_d()).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StorageReport {
    pub eta_s: Option<f64>,
    pub eta_r: Option<f64>,
    /// Antenna amplitude at the end of the window.
    pub c10: Complex64,
    /// Storage-mode amplitude at the end of the window.
    pub c01: Complex64,
    /// Output field: leaked light during storage, the photon during retrieval.
    pub output: Envelope,
    /// Probability lost to `κ_d0` and `κ_b` over the window.
    pub loss: f64,
    pub warnings: Vec<String>,
}

impl StorageReport {
    /// Initial probability minus (stored + emitted + lost).
    pub fn balance_defect(&self, initial: f64) -> f64 {
        let emitted = self.eta_r.unwrap_or_else(|| self.output.energy());
        initial - (self.c01.norm_sqr() + self.c10.norm_sqr() + emitted + self.loss)
    }
}

struct Antenna<'a> {
    p: &'a AntennaParams,
    drive: &'a Envelope,
    input: Option<&'a Envelope>,
}

impl Antenna<'_> {
    /// State `[c₁₀, c₀₁, ∫|φ_out|², loss]`.
    fn run(&self, c10: Complex64, c01: Complex64, times: &[f64], tol: Tolerance) -> Result<Vec<Vec<Complex64>>> {
        let kd = self.p.kappa_d();
        let kb = self.p.kappa_b;
        let s = (2.0 * self.p.kappa_d1).sqrt();
        let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            let w = self.drive.eval(t);
            let phi = self.input.map_or(C0, |e| e.eval(t));
            dy[0] = -kd * y[0] - I * w.conj() * y[1] + s * phi;
            dy[1] = -kb * y[1] - I * w * y[0];
            let out = phi - s * y[0];
            dy[2] = Complex64::new(out.norm_sqr(), 0.0);
            dy[3] = Complex64::new(2.0 * self.p.kappa_d0 * y[0].norm_sqr() + 2.0 * kb * y[1].norm_sqr(), 0.0);
        };
        let mut bps = vec![self.drive.t0, self.drive.t_end()];
        if let Some(e) = self.input {
            bps.extend([e.t0, e.t_end()]);
        }
        Dopri5::new(tol)
            .with_h_max(self.drive.dt.max(1e-300) * 4.0)
            .integrate(rhs, &[c10, c01, C0, C0], times, &bps)
    }
}

/// Absorb `input` with drive `omega` on the input's grid; `η_s = |c₀₁(T)|²`.
pub fn simulate_storage(input: &Envelope, omega: &Envelope, p: &AntennaParams, tol: Tolerance) -> Result<StorageReport> {
    p.validate()?;
    input.check_same_grid(omega)?;
    let times = input.times();
    let ys = Antenna {
        p,
        drive: omega,
        input: Some(input),
    }
    .run(C0, C0, &times, tol)?;
    let s = (2.0 * p.kappa_d1).sqrt();
    let out: Vec<Complex64> = ys.iter().zip(&input.samples).map(|(y, phi)| phi - s * y[0]).collect();
    let last = ys.last().expect("non-empty grid");
    let mut warnings = Vec::new();
    if input.kind == EnvelopeKind::Photon && (input.energy() - 1.0).abs() > 1e-6 {
        warnings.push(format!("input energy is {:.9}, not 1", input.energy()));
    }
    Ok(StorageReport {
        eta_s: Some(last[1].norm_sqr()),
        eta_r: None,
        c10: last[0],
        c01: last[1],
        output: Envelope::new(input.t0, input.dt, out, EnvelopeKind::Photon)?,
        loss: last[3].re,
        warnings,
    })
}

/// Release a photon stored in `b` (`c₀₁ = 1`) with drive `omega` over the
/// drive's grid; `η_r = ∫|φ_out|²`.
pub fn simulate_retrieval(omega: &Envelope, p: &AntennaParams, tol: Tolerance) -> Result<StorageReport> {
    retrieve_from(Complex64::new(1.0, 0.0), omega, p, tol)
}

/// [`simulate_retrieval`] from an arbitrary stored amplitude.
pub fn retrieve_from(c01: Complex64, omega: &Envelope, p: &AntennaParams, tol: Tolerance) -> Result<StorageReport> {
    p.validate()?;
    let times = omega.times();
    let ys = Antenna {
        p,
        drive: omega,
        input: None,
    }
    .run(C0, c01, &times, tol)?;
    let s = (2.0 * p.kappa_d1).sqrt();
    let out: Vec<Complex64> = ys.iter().map(|y| -s * y[0]).collect();
    let last = ys.last().expect("non-empty grid");
    let mut warnings = Vec::new();
    let residual = last[1].norm_sqr();
    if residual > 0.01 * c01.norm_sqr() {
        warnings.push(format!("drive too short: {residual:.4} of the stored probability remains"));
    }
    Ok(StorageReport {
        eta_s: None,
        eta_r: Some(last[2].re),
        c10: last[0],
        c01: last[1],
        output: Envelope::new(omega.t0, omega.dt, out, EnvelopeKind::Photon)?,
        loss: last[3].re,
        warnings,
    })
}

/// `∫|Ω|²` of a drive envelope.
pub fn drive_energy(omega: &Envelope) -> f64 {
    trapezoid(omega.samples.iter().map(|v| v.norm_sqr()), omega.dt)
}
