//! Time evolution: Lindblad master equation for continuously driven systems,
//! and non-Hermitian amplitude equations for pulsed single- and few-photon
//! inputs with input-output coupling.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{fmt17, Envelope};
use crate::error::{Error, Result};
use crate::fock::{AtomSpec, FockBasis, ModeLabel, OperatorRep};
use crate::ode::{Dopri5, Tolerance};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coherent drive `ε (L† e^{−iΔt} + L e^{iΔt})` on one mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub mode: ModeLabel,
    pub amplitude: f64,
    #[serde(default)]
    pub detuning: f64,
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param("drive.amplitude", "must be finite and >= 0"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::param("drive.detuning", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<Complex64>,
    pub t: f64,
}

impl StateVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub rho: DMatrix<Complex64>,
    pub t: f64,
}

impl DensityMatrix {
    pub fn pure(psi: &DVector<Complex64>, t: f64) -> Self {
        DensityMatrix {
            rho: psi * psi.adjoint(),
            t,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.rho.nrows()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub enum Snapshots {
    Pure(Vec<StateVector>),
    Mixed(Vec<DensityMatrix>),
}

/// Time series of states with per-basis-state populations.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub populations: Vec<Vec<f64>>,
    pub snapshots: Snapshots,
}

impl Trajectory {
    fn from_pure(basis: &FockBasis, states: Vec<StateVector>) -> Self {
        Trajectory {
            times: states.iter().map(|s| s.t).collect(),
            labels: labels(basis),
            populations: states.iter().map(|s| s.amplitudes.iter().map(|a| a.norm_sqr()).collect()).collect(),
            snapshots: Snapshots::Pure(states),
        }
    }

    fn from_mixed(basis: &FockBasis, states: Vec<DensityMatrix>) -> Self {
        Trajectory {
            times: states.iter().map(|s| s.t).collect(),
            labels: labels(basis),
            populations: states.iter().map(|s| s.populations()).collect(),
            snapshots: Snapshots::Mixed(states),
        }
    }

    /// Population series of the basis state labelled `label` (e.g. `"10"`).
    pub fn population(&self, label: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.populations.iter().map(|p| p[i]).collect())
    }

    /// CSV with columns `t`, `p_<state>` and, for pure trajectories,
    /// `re_<state>`, `im_<state>`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().map(|l| format!("p_{l}")));
        if let Snapshots::Pure(_) = self.snapshots {
            for l in &self.labels {
                header.push(format!("re_{l}"));
                header.push(format!("im_{l}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt17(*t)];
            row.extend(self.populations[k].iter().map(|p| fmt17(*p)));
            if let Snapshots::Pure(states) = &self.snapshots {
                for a in states[k].amplitudes.iter() {
                    row.push(fmt17(a.re));
                    row.push(fmt17(a.im));
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn labels(basis: &FockBasis) -> Vec<String> {
    (0..basis.len()).map(|i| basis.state_label(i)).collect()
}

/// Hamiltonian of `atom` plus a coherent drive, in the frame rotating with
/// the drive so that it is time independent: every mode's detuning is
/// shifted by its block weight times `Δ / weight(driven mode)`.
pub fn driven_hamiltonian(atom: &AtomSpec, basis: &FockBasis, drive: &DriveSpec) -> Result<OperatorRep> {
    drive.validate()?;
    let mut shifted = atom.clone();
    let rate = drive.detuning / drive.mode.weight() as f64;
    for m in &mut shifted.modes {
        m.detuning -= m.label.weight() as f64 * rate;
    }
    let mut h = crate::fock::build_hamiltonian(&shifted, basis)?;
    let l = basis.normal_ordered(&[], &[drive.mode])?;
    h.matrix += (&l + l.adjoint()) * Complex64::new(drive.amplitude, 0.0);
    Ok(h)
}

/// Collapse rates `(mode, κ_total)` for every mode of an atom.
pub fn atom_rates(atom: &AtomSpec) -> Vec<(ModeLabel, f64)> {
    atom.modes.iter().map(|m| (m.label, m.kappa())).collect()
}

struct Lindblad {
    heff: DMatrix<Complex64>,
    jumps: Vec<(DMatrix<Complex64>, DMatrix<Complex64>)>,
    d: usize,
}

impl Lindblad {
    fn new(h: &OperatorRep, basis: &FockBasis, rates: &[(ModeLabel, f64)]) -> Result<Self> {
        if h.hermiticity_defect() > 1e-12 {
            return Err(Error::param("hamiltonian", "must be Hermitian"));
        }
        let d = basis.len();
        if h.dim() != d {
            return Err(Error::param("hamiltonian", "dimension does not match basis"));
        }
        let mut heff = h.matrix.clone();
        let mut jumps = Vec::new();
        for &(label, k) in rates {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::param(&format!("rates.{label}"), "must be finite and >= 0"));
            }
            if k == 0.0 {
                continue;
            }
            let l = basis.normal_ordered(&[], &[label])? * Complex64::new((2.0 * k).sqrt(), 0.0);
            heff -= basis.number_operator(label)? * (I * k);
            let ld = l.adjoint();
            jumps.push((l, ld));
        }
        Ok(Lindblad { heff, jumps, d })
    }

    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let a = &self.heff * rho;
        let mut out = (&a - a.adjoint()) * (-I);
        for (l, ld) in &self.jumps {
            out += l * rho * ld;
        }
        out
    }

    fn superoperator(&self) -> DMatrix<Complex64> {
        let d = self.d;
        let id = DMatrix::<Complex64>::identity(d, d);
        let mut s = (id.kronecker(&self.heff) - self.heff.map(|v| v.conj()).kronecker(&id)) * (-I);
        for (l, _) in &self.jumps {
            s += l.map(|v| v.conj()).kronecker(l);
        }
        s
    }
}

/// Integrate `dρ/dt = −i[H,ρ] + Σ_j 2κ_j (jρj† − ½{j†j,ρ})` and record ρ at
/// each time in `times` (the first entry is the time of `rho0`).
pub fn evolve_lindblad(
    h: &OperatorRep,
    basis: &FockBasis,
    rates: &[(ModeLabel, f64)],
    rho0: &DensityMatrix,
    times: &[f64],
    tol: Tolerance,
) -> Result<Trajectory> {
    let lb = Lindblad::new(h, basis, rates)?;
    let d = lb.d;
    if rho0.rho.nrows() != d || rho0.rho.ncols() != d {
        return Err(Error::param("rho0", "dimension does not match basis"));
    }
    if times.is_empty() || (times[0] - rho0.t).abs() > 1e-12 * times[0].abs().max(1.0) {
        return Err(Error::param("t_grid", "must start at the time of the initial state"));
    }
    let y0: Vec<Complex64> = rho0.rho.iter().copied().collect();
    let ys = Dopri5::new(tol).integrate(
        |_, y, dy| {
            let rho = DMatrix::from_column_slice(d, d, y);
            dy.copy_from_slice(lb.apply(&rho).as_slice());
        },
        &y0,
        times,
        &[],
    )?;
    let states = ys
        .into_iter()
        .zip(times)
        .map(|(y, &t)| DensityMatrix {
            rho: DMatrix::from_column_slice(d, d, &y),
            t,
        })
        .collect();
    Ok(Trajectory::from_mixed(basis, states))
}

/// Fixed point of the Lindblad generator, found by solving the linear
/// system with one equation replaced by the trace condition.
pub fn steady_state(h: &OperatorRep, basis: &FockBasis, rates: &[(ModeLabel, f64)]) -> Result<DensityMatrix> {
    let lb = Lindblad::new(h, basis, rates)?;
    let d = lb.d;
    let mut s = lb.superoperator();
    for j in 0..d * d {
        s[(0, j)] = C0;
    }
    for i in 0..d {
        s[(0, i + i * d)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::from_element(d * d, C0);
    rhs[0] = Complex64::new(1.0, 0.0);
    let x = s.lu().solve(&rhs).ok_or_else(|| Error::NonConvergence {
        what: "steady_state".into(),
        reason: "Liouvillian is singular (no unique steady state)".into(),
    })?;
    let rho = DMatrix::from_column_slice(d, d, x.as_slice());
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let residual = lb.apply(&rho).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(residual < 1e-9) {
        return Err(Error::NonConvergence {
            what: "steady_state".into(),
            reason: format!("residual |dρ/dt| = {residual:e}"),
        });
    }
    Ok(DensityMatrix { rho, t: f64::INFINITY })
}

/// Time dependence of a Hamiltonian term.
#[derive(Clone, Debug)]
pub enum Coefficient {
    Constant(Complex64),
    Sampled(Envelope),
    /// `value` on `[start, end)`, zero elsewhere.
    Window {
        value: Complex64,
        start: f64,
        end: f64,
    },
}

impl Coefficient {
    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Sampled(e) => e.eval(t),
            Coefficient::Window { value, start, end } => {
                if t >= *start && t < *end {
                    *value
                } else {
                    C0
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Coefficient::Constant(_) => vec![],
            Coefficient::Sampled(e) => vec![e.t0, e.t_end()],
            Coefficient::Window { start, end, .. } => vec![*start, *end],
        }
    }
}

/// Hermitian term `Ω(t) X + Ω*(t) X†`.
#[derive(Clone, Debug)]
pub struct DrivenTerm {
    pub raising: DMatrix<Complex64>,
    pub coefficient: Coefficient,
}

impl DrivenTerm {
    /// Coupling `Ω(t) to† from + h.c.` between two modes.
    pub fn exchange(basis: &FockBasis, to: ModeLabel, from: ModeLabel, coefficient: Coefficient) -> Result<Self> {
        Ok(DrivenTerm {
            raising: basis.normal_ordered(&[to], &[from])?,
            coefficient,
        })
    }

    /// Coherent drive `ε(t) L† + ε*(t) L`.
    pub fn coherent(basis: &FockBasis, mode: ModeLabel, coefficient: Coefficient) -> Result<Self> {
        Ok(DrivenTerm {
            raising: basis.normal_ordered(&[mode], &[])?,
            coefficient,
        })
    }
}

/// A waveguide channel feeding `photons` identical photons with envelope
/// `envelope` into mode `mode` at coupling `kappa1`. The same channel
/// carries the output field.
#[derive(Clone, Debug)]
pub struct InputChannel {
    pub mode: ModeLabel,
    pub kappa1: f64,
    pub envelope: Option<Envelope>,
    pub photons: usize,
}

/// Pulsed open system: `H_eff` (static, non-Hermitian) plus driven terms,
/// with one recorded input/output channel.
#[derive(Clone, Debug)]
pub struct PulsedSystem {
    pub basis: FockBasis,
    pub dim: usize,
    pub h_eff: DMatrix<Complex64>,
    pub terms: Vec<DrivenTerm>,
    pub channel: InputChannel,
    /// Extra output channels `(mode, κ₁)` whose emitted probability is
    /// integrated separately. Their decay must already be part of `h_eff`;
    /// it is also counted in [`PulsedResult::loss`].
    pub monitors: Vec<(ModeLabel, f64)>,
    lower: DMatrix<Complex64>,
    loss: DMatrix<Complex64>,
}

/// Result of [`evolve_pulsed`].
///
/// `levels[k][m]` is the atom state at `times[k]` conditioned on `m` photons
/// still in the input pulse; `emissions[k][m]` is the (atom-state valued)
/// amplitude for emitting a photon into the output channel at `times[k]`
/// leaving `m` photons in the pulse.
#[derive(Clone, Debug)]
pub struct PulsedResult {
    pub times: Vec<f64>,
    pub levels: Vec<Vec<DVector<Complex64>>>,
    pub emissions: Vec<Vec<DVector<Complex64>>>,
    /// `∫|f|²` of the input over the whole envelope.
    pub input_energy: f64,
    /// `Σ_m R^m ‖ψ_m‖²` at the final time, `R` the remaining pulse energy.
    pub remaining_probability: f64,
    /// Integrated probability emitted into the recorded channel.
    pub output_flux: f64,
    /// Integrated probability lost to intrinsic decay and unrecorded channels.
    pub loss: f64,
    /// `Σ_m R(0)^m ‖ψ_m(0)‖²`.
    pub initial_probability: f64,
    /// Integrated emission into each monitored channel.
    pub monitor_flux: Vec<f64>,
}

impl PulsedResult {
    /// `initial − (remaining + flux + loss)`; zero up to integration error.
    pub fn balance_defect(&self) -> f64 {
        self.initial_probability - (self.remaining_probability + self.output_flux + self.loss)
    }

    /// Output envelope projected onto atom state `target` after emission,
    /// from level `m`.
    pub fn output_amplitude(&self, m: usize, target: &DVector<Complex64>) -> Vec<Complex64> {
        self.emissions.iter().map(|e| target.dotc(&e[m])).collect()
    }

    /// Populations of the no-jump state, summed over pulse levels with
    /// weight 1 for level 0.
    pub fn trajectory(&self, basis: &FockBasis, level: usize) -> Trajectory {
        let states = self
            .times
            .iter()
            .zip(&self.levels)
            .map(|(&t, l)| StateVector {
                amplitudes: l[level].clone(),
                t,
            })
            .collect();
        Trajectory::from_pure(basis, states)
    }
}

impl PulsedSystem {
    /// `h_eff` must already contain `−iκ j†j` for every mode, including the
    /// channel's external rate.
    pub fn new(basis: &FockBasis, h_eff: DMatrix<Complex64>, terms: Vec<DrivenTerm>, channel: InputChannel) -> Result<Self> {
        let dim = basis.len();
        if h_eff.nrows() != dim || h_eff.ncols() != dim {
            return Err(Error::param("h_eff", "dimension does not match basis"));
        }
        if !(channel.kappa1 >= 0.0 && channel.kappa1.is_finite()) {
            return Err(Error::param("kappa1", "must be finite and >= 0"));
        }
        if channel.photons > 0 && channel.envelope.is_none() {
            return Err(Error::param("input", "photons requested without an envelope"));
        }
        for t in &terms {
            if t.raising.nrows() != dim {
                return Err(Error::param("terms", "dimension does not match basis"));
            }
        }
        let lower = basis.normal_ordered(&[], &[channel.mode])?;
        let gamma = (&h_eff - h_eff.adjoint()) * (I * 0.5);
        let loss = gamma - lower.adjoint() * &lower * Complex64::new(channel.kappa1, 0.0);
        let defect = (&loss - loss.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if defect > 1e-9 * loss.norm().max(1.0) {
            return Err(Error::param("h_eff", "anti-Hermitian part is not Hermitian"));
        }
        Ok(PulsedSystem {
            basis: basis.clone(),
            dim,
            h_eff,
            terms,
            channel,
            monitors: vec![],
            lower,
            loss,
        })
    }

    /// Atom built from `atom` (with all its decay) in the given basis, input
    /// through `mode` at that mode's external rate.
    pub fn for_atom(atom: &AtomSpec, basis: &FockBasis, mode: ModeLabel, envelope: Option<Envelope>, photons: usize) -> Result<Self> {
        let h = crate::fock::build_hamiltonian(atom, basis)?;
        let heff = crate::fock::effective_hamiltonian(&h, basis, &atom.modes)?;
        let kappa1 = atom.mode(mode).ok_or_else(|| Error::UnknownMode(mode.to_string()))?.kappa1;
        PulsedSystem::new(
            basis,
            heff.matrix,
            vec![],
            InputChannel {
                mode,
                kappa1,
                envelope,
                photons,
            },
        )
    }

    /// Record the emission of `mode` through an external rate `kappa1`.
    pub fn with_monitor(mut self, mode: ModeLabel, kappa1: f64) -> Result<Self> {
        if self.monitors.len() == 4 {
            return Err(Error::param("monitors", "at most four monitored channels"));
        }
        self.basis_lower(mode)?;
        self.monitors.push((mode, kappa1));
        Ok(self)
    }

    fn basis_lower(&self, mode: ModeLabel) -> Result<DMatrix<Complex64>> {
        self.basis.normal_ordered(&[], &[mode])
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.terms.iter().flat_map(|t| t.coefficient.breakpoints()).collect();
        if let Some(e) = &self.channel.envelope {
            b.push(e.t0);
            b.push(e.t_end());
        }
        b
    }

    fn f(&self, t: f64) -> Complex64 {
        match &self.channel.envelope {
            Some(e) => e.eval(t),
            None => C0,
        }
    }

    /// Total `∫|f|²` of the spline input, integrated to the solver tolerance.
    fn input_energy(&self, tol: Tolerance) -> Result<f64> {
        let Some(e) = &self.channel.envelope else {
            return Ok(0.0);
        };
        let ys = Dopri5::new(tol).integrate(
            |t, _, dy| dy[0] = Complex64::new(e.eval(t).norm_sqr(), 0.0),
            &[C0],
            &[e.t0, e.t_end()],
            &[],
        )?;
        Ok(ys[1][0].re)
    }
}

/// Evolve the amplitude hierarchy of a pulsed system.
///
/// With `n` photons in the pulse and atom state `ψ_n(t0) = psi0`:
/// `dψ_m/dt = −i H(t) ψ_m + √(2κ₁) √(m+1) f(t) L† ψ_{m+1}`, and the
/// emission amplitude is `J_m = √(m+1) f ψ_{m+1} − √(2κ₁) L ψ_m`.
/// For one photon and an atom starting in vacuum, `⟨0|J_0⟩` is the usual
/// output field `φ_in − √(2κ₁) c`.
pub fn evolve_pulsed(sys: &PulsedSystem, psi0: &DVector<Complex64>, times: &[f64], tol: Tolerance) -> Result<PulsedResult> {
    let n = sys.channel.photons;
    let mut init = vec![DVector::from_element(sys.dim, C0); n + 1];
    init[n] = psi0.clone();
    evolve_pulsed_levels(sys, &init, times, tol)
}

/// [`evolve_pulsed`] with an explicit initial state for every pulse level
/// (`init[m]` = atom state with `m` photons left in the pulse).
pub fn evolve_pulsed_levels(sys: &PulsedSystem, init: &[DVector<Complex64>], times: &[f64], tol: Tolerance) -> Result<PulsedResult> {
    let d = sys.dim;
    let n = sys.channel.photons;
    let nl = n + 1;
    if init.len() != nl || init.iter().any(|v| v.len() != d) {
        return Err(Error::param("psi0", "need one state per pulse level, matching the basis"));
    }
    let r_total = sys.input_energy(tol)?;
    let sq = (2.0 * sys.channel.kappa1).sqrt();
    let lower = sparse(&sys.lower);
    let raise = sparse(&sys.lower.adjoint());
    let h0 = sparse(&sys.h_eff);
    let loss = sparse(&sys.loss);
    let terms: Vec<(Sparse, Sparse, &Coefficient)> = sys
        .terms
        .iter()
        .map(|t| (sparse(&t.raising), sparse(&t.raising.adjoint()), &t.coefficient))
        .collect();

    // layout: [ψ_0 .. ψ_n | flux, loss, ∫|f|²]
    let acc = nl * d;
    let nmon = sys.monitors.len();
    let monitors: Vec<(Sparse, f64)> = sys
        .monitors
        .iter()
        .map(|&(label, k)| Ok((sparse(&sys.basis_lower(label)?), (2.0 * k).sqrt())))
        .collect::<Result<_>>()?;
    let mut y0 = vec![C0; acc + 3 + nmon];
    for m in 0..nl {
        y0[m * d..(m + 1) * d].copy_from_slice(init[m].as_slice());
    }
    let t_start = times.first().copied().unwrap_or(0.0);
    let r_start = match &sys.channel.envelope {
        Some(e) if t_start > e.t0 => {
            let head = Dopri5::new(tol).integrate(
                |t, _, dy| dy[0] = Complex64::new(e.eval(t).norm_sqr(), 0.0),
                &[C0],
                &[e.t0, t_start.min(e.t_end())],
                &[],
            )?;
            r_total - head[1][0].re
        }
        _ => r_total,
    };
    let mut scratch = vec![C0; d];
    let mut jbuf = vec![C0; d];
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let f = sys.f(t);
        let coeffs: Vec<Complex64> = terms.iter().map(|(_, _, c)| c.eval(t)).collect();
        let r = (r_start - y[acc + 2].re).max(0.0);
        let mut flux = 0.0;
        let mut lossr = 0.0;
        let mut mon = [0.0f64; 4];
        let mut rm = 1.0;
        for m in 0..nl {
            let psi = &y[m * d..(m + 1) * d];
            let out = &mut dy[m * d..(m + 1) * d];
            for v in out.iter_mut() {
                *v = C0;
            }
            for &(i, j, v) in &h0 {
                out[i] += v * psi[j];
            }
            for (k, (up, down, _)) in terms.iter().enumerate() {
                let c = coeffs[k];
                if c == C0 {
                    continue;
                }
                for &(i, j, v) in up {
                    out[i] += c * v * psi[j];
                }
                let cc = c.conj();
                for &(i, j, v) in down {
                    out[i] += cc * v * psi[j];
                }
            }
            for v in out.iter_mut() {
                *v *= -I;
            }
            // J_m and the source from level m+1
            for v in jbuf.iter_mut() {
                *v = C0;
            }
            if m + 1 < nl {
                let next = &y[(m + 1) * d..(m + 2) * d];
                let s = f * ((m + 1) as f64).sqrt();
                if s != C0 {
                    for v in scratch.iter_mut() {
                        *v = C0;
                    }
                    for &(i, j, v) in &raise {
                        scratch[i] += v * next[j];
                    }
                    for i in 0..d {
                        out[i] += scratch[i] * (s * sq);
                        jbuf[i] += next[i] * s;
                    }
                }
            }
            for &(i, j, v) in &lower {
                jbuf[i] -= v * psi[j] * sq;
            }
            flux += rm * jbuf.iter().map(|v| v.norm_sqr()).sum::<f64>();
            let mut l = C0;
            for &(i, j, v) in &loss {
                l += psi[i].conj() * v * psi[j];
            }
            lossr += rm * 2.0 * l.re;
            for (q, (op, s)) in monitors.iter().enumerate() {
                for v in scratch.iter_mut() {
                    *v = C0;
                }
                for &(i, j, v) in op {
                    scratch[i] += v * psi[j];
                }
                mon[q] += rm * s * s * scratch.iter().map(|v| v.norm_sqr()).sum::<f64>();
            }
            rm *= r;
        }
        dy[acc] = Complex64::new(flux, 0.0);
        dy[acc + 1] = Complex64::new(lossr, 0.0);
        dy[acc + 2] = Complex64::new(f.norm_sqr(), 0.0);
        for q in 0..nmon {
            dy[acc + 3 + q] = Complex64::new(mon[q], 0.0);
        }
    };
    let mut rhs = rhs;
    let mut levels = Vec::with_capacity(times.len());
    let mut emissions = Vec::with_capacity(times.len());
    let mut last = Vec::new();
    Dopri5::new(tol).integrate_with(&mut rhs, &y0, times, &sys.breakpoints(), |k, t, y| {
        let f = sys.f(t);
        let lv: Vec<DVector<Complex64>> = (0..nl).map(|m| DVector::from_column_slice(&y[m * d..(m + 1) * d])).collect();
        let em: Vec<DVector<Complex64>> = (0..nl)
            .map(|m| {
                let mut j = &sys.lower * &lv[m] * Complex64::new(-sq, 0.0);
                if m + 1 < nl {
                    j += &lv[m + 1] * (f * ((m + 1) as f64).sqrt());
                }
                j
            })
            .collect();
        levels.push(lv);
        emissions.push(em);
        if k + 1 == times.len() {
            last = y.to_vec();
        }
    })?;
    let r_end = (r_start - last[acc + 2].re).max(0.0);
    let mut initial = 0.0;
    let mut rm = 1.0;
    for v in init {
        initial += rm * v.norm_squared();
        rm *= r_start;
    }
    let mut remaining = 0.0;
    let mut rm = 1.0;
    for m in 0..nl {
        remaining += rm * last[m * d..(m + 1) * d].iter().map(|v| v.norm_sqr()).sum::<f64>();
        rm *= r_end;
    }
    Ok(PulsedResult {
        times: times.to_vec(),
        levels,
        emissions,
        input_energy: r_total,
        remaining_probability: remaining,
        output_flux: last[acc].re,
        loss: last[acc + 1].re,
        initial_probability: initial,
        monitor_flux: (0..nmon).map(|q| last[acc + 3 + q].re).collect(),
    })
}

type Sparse = Vec<(usize, usize, Complex64)>;

fn sparse(m: &DMatrix<Complex64>) -> Sparse {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != C0 {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Steady-state population of basis state `state` for every drive detuning.
pub fn steady_state_scan(
    atom: &AtomSpec,
    basis: &FockBasis,
    mode: ModeLabel,
    amplitude: f64,
    detunings: &[f64],
    state: usize,
) -> Result<Vec<f64>> {
    if state >= basis.len() {
        return Err(Error::param("state", "index outside the basis"));
    }
    let rates = atom_rates(atom);
    detunings
        .par_iter()
        .map(|&detuning| {
            let drive = DriveSpec { mode, amplitude, detuning };
            let h = driven_hamiltonian(atom, basis, &drive)?;
            Ok(steady_state(&h, basis, &rates)?.rho[(state, state)].re)
        })
        .collect()
}

/// Interior local maxima `(x, y)` of a sampled curve, refined by a parabola
/// through the three samples around each.
pub fn find_peaks(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 1..y.len().saturating_sub(1) {
        let (a, b, c) = (y[k - 1], y[k], y[k + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let s = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let h = x[k + 1] - x[k];
            out.push((x[k] + s * h, b - 0.25 * (a - c) * s));
        }
    }
    out
}

/// No-jump evolution from vacuum under a constant coherent drive
/// `ε (L + L†)` on `mode`.
pub fn driven_no_jump(
    atom: &AtomSpec,
    basis: &FockBasis,
    mode: ModeLabel,
    amplitude: f64,
    times: &[f64],
    tol: Tolerance,
) -> Result<Trajectory> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::param("amplitude", "must be finite and >= 0"));
    }
    let mut sys = PulsedSystem::for_atom(atom, basis, mode, None, 0)?;
    sys.terms.push(DrivenTerm::coherent(
        basis,
        mode,
        Coefficient::Constant(Complex64::new(amplitude, 0.0)),
    )?);
    Ok(evolve_pulsed(&sys, &basis.vacuum(), times, tol)?.trajectory(basis, 0))
}

/// Mean spacing of successive interior maxima of a sampled signal, each
/// refined by a parabola through its three samples.
pub fn oscillation_period(times: &[f64], values: &[f64]) -> Option<f64> {
    let peaks = find_peaks(times, values);
    if peaks.len() < 2 {
        return None;
    }
    Some((peaks[peaks.len() - 1].0 - peaks[0].0) / (peaks.len() - 1) as f64)
}
