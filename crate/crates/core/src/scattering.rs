//! Two-photon scattering off a waveguide-coupled degenerate χ(2) cavity.
//!
//! Closed-form single-photon transmission `t_k`, the two-photon bound-state
//! and second-harmonic coefficients `B`, `C`, their action on a sampled joint
//! spectral amplitude, and an independent time-domain reconstruction built
//! on [`crate::dynamics::evolve_pulsed`].
//!
//! Conventions: frequencies are rotating-frame detunings, a photon of
//! frequency `k` evolves as `e^{−ikt}`, spectral and temporal amplitudes are
//! related by `α(k) = (2π)^{−1/2} ∫ f(t) e^{ikt} dt`, and a two-photon
//! amplitude is normalised by `∫∫|α|² = 1`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_pulsed, evolve_pulsed_levels, PulsedSystem};
use crate::envelope::{fmt17, Envelope, EnvelopeKind};
use crate::error::{Error, Result};
use crate::fock::{build_basis, AtomKind, AtomSpec, FockBasis, ModeLabel, ModeSpec};
use crate::ode::{uniform_grid, Tolerance};

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterParams {
    pub omega_a: f64,
    pub omega_c: f64,
    pub g: f64,
    pub kappa_a0: f64,
    pub kappa_a1: f64,
    pub kappa_c0: f64,
    pub kappa_c1: f64,
}

impl ScatterParams {
    /// `g = 3`, `κ_a0 = 1`, `κ_a1 = 3`, `κ_c0 = κ_c1 = 1`, resonant.
    pub fn fig2() -> Self {
        ScatterParams {
            omega_a: 0.0,
            omega_c: 0.0,
            g: 3.0,
            kappa_a0: 1.0,
            kappa_a1: 3.0,
            kappa_c0: 1.0,
            kappa_c1: 1.0,
        }
    }

    pub fn kappa_a(&self) -> f64 {
        self.kappa_a0 + self.kappa_a1
    }

    pub fn kappa_c(&self) -> f64 {
        self.kappa_c0 + self.kappa_c1
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_a0", self.kappa_a0),
            ("kappa_a1", self.kappa_a1),
            ("kappa_c0", self.kappa_c0),
            ("kappa_c1", self.kappa_c1),
            ("g", self.g),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("omega_a", self.omega_a), ("omega_c", self.omega_c)] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// The same cavity as a degenerate [`AtomSpec`].
    pub fn atom(&self) -> AtomSpec {
        AtomSpec {
            kind: AtomKind::Degenerate,
            g: self.g,
            modes: vec![
                ModeSpec::new(ModeLabel::A, self.omega_a, self.kappa_a0, self.kappa_a1),
                ModeSpec::new(ModeLabel::C, self.omega_c, self.kappa_c0, self.kappa_c1),
            ],
        }
    }
}

/// Closed-form coefficients at one frequency pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterCoeffs {
    pub t1: Complex64,
    pub t2: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub alpha_a_plus: Complex64,
    pub alpha_a_minus: Complex64,
    pub alpha_c_plus: Complex64,
    pub alpha_c_minus: Complex64,
}

/// `t_k = (k − ω_a + iκ_a0 − iκ_a1) / (k − ω_a + iκ_a0 + iκ_a1)`.
pub fn single_photon_t(k: f64, p: &ScatterParams) -> Complex64 {
    let x = k - p.omega_a;
    Complex64::new(x, p.kappa_a0 - p.kappa_a1) / Complex64::new(x, p.kappa_a0 + p.kappa_a1)
}

pub fn two_photon_coeffs(k1: f64, k2: f64, p: &ScatterParams) -> Result<ScatterCoeffs> {
    let t1 = single_photon_t(k1, p);
    let t2 = single_photon_t(k2, p);
    let e = k1 + k2;
    let alpha_a_plus = Complex64::new(2.0 * p.omega_a - e, 2.0 * (p.kappa_a1 - p.kappa_a0));
    let alpha_a_minus = Complex64::new(2.0 * p.omega_a - e, -2.0 * (p.kappa_a1 + p.kappa_a0));
    let alpha_c_plus = Complex64::new(p.omega_c - e, p.kappa_c1 - p.kappa_c0);
    let alpha_c_minus = Complex64::new(p.omega_c - e, -(p.kappa_c1 + p.kappa_c0));
    let g2 = p.g * p.g;
    let den = alpha_a_minus * alpha_c_minus - 2.0 * g2;
    if den.norm() < 1e-12 {
        return Err(Error::NearSingular { k1, k2, value: den.norm() });
    }
    let one = Complex64::new(1.0, 0.0);
    let b = (one - t1) * (one - t2) * (2f64.sqrt() * g2) / (den * PI);
    let c = (Complex64::new(2.0, 0.0) - t1 - t2) * (-2.0 * p.g * (2.0 * p.kappa_c1).sqrt()) / (den * PI.sqrt());
    Ok(ScatterCoeffs {
        t1,
        t2,
        b,
        c,
        alpha_a_plus,
        alpha_a_minus,
        alpha_c_plus,
        alpha_c_minus,
    })
}

/// Two-photon amplitude on a uniform square frequency grid;
/// `amp[(i, j)] = α(p_i, p_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpectrum {
    pub p: Vec<f64>,
    pub amp: DMatrix<Complex64>,
}

impl JointSpectrum {
    pub fn new(p: Vec<f64>, amp: DMatrix<Complex64>) -> Result<Self> {
        let n = p.len();
        if n < 2 || amp.nrows() != n || amp.ncols() != n {
            return Err(Error::param("grid", "amplitude must be square and match the axis"));
        }
        let h = (p[n - 1] - p[0]) / (n - 1) as f64;
        if !(h > 0.0 && h.is_finite())
            || p.iter()
                .enumerate()
                .any(|(i, x)| (x - (p[0] + h * i as f64)).abs() > 1e-9 * h.max(1.0))
        {
            return Err(Error::param("grid", "frequency axis must be uniform and increasing"));
        }
        Ok(JointSpectrum { p, amp })
    }

    /// Separable Gaussian `exp(−((p₁−μ)² + (p₂−μ)²)/2σ²)` on `μ ± half_width`,
    /// normalised to unit norm.
    pub fn gaussian(center: f64, sigma: f64, half_width: f64, n: usize) -> Result<Self> {
        if !(sigma > 0.0) || !(half_width > 0.0) || n < 2 {
            return Err(Error::param("sigma", "sigma and grid width must be positive"));
        }
        let p = uniform_grid(center - half_width, center + half_width, n);
        let u: Vec<f64> = p.iter().map(|x| (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        let amp = DMatrix::from_fn(n, n, |i, j| Complex64::new(u[i] * u[j], 0.0));
        JointSpectrum::new(p, amp)?.normalized()
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn h(&self) -> f64 {
        (self.p[self.n() - 1] - self.p[0]) / (self.n() - 1) as f64
    }

    /// Riemann `∫∫|α|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.amp.norm_squared() * self.h() * self.h()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) {
            return Err(Error::ZeroNorm("joint spectrum".into()));
        }
        Ok(JointSpectrum {
            p: self.p.clone(),
            amp: &self.amp / Complex64::new(n2.sqrt(), 0.0),
        })
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.amp - self.amp.transpose()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// L² distance `(∫∫|α − β|²)^{1/2}` on a shared grid.
    pub fn distance(&self, other: &JointSpectrum) -> Result<f64> {
        if self.n() != other.n() || (self.p[0] - other.p[0]).abs() > 1e-12 || (self.h() - other.h()).abs() > 1e-12 {
            return Err(Error::param("grid", "spectra live on different grids"));
        }
        Ok((&self.amp - &other.amp).norm() * self.h())
    }

    /// Schmidt coefficients `λ_i` (summing to one) from the SVD of the
    /// discretised amplitude.
    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        let eig = (&self.amp * self.amp.adjoint()).symmetric_eigen();
        let w: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            return vec![];
        }
        w.iter().map(|v| v / total).collect()
    }

    /// `K = 1 / Σ λ_i²`; one for a separable amplitude.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.schmidt_coefficients().iter().map(|l| l * l).sum::<f64>()
    }

    /// Largest `|α|` on the grid boundary relative to the peak.
    pub fn edge_ratio(&self) -> f64 {
        let n = self.n();
        let peak = self.amp.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mut edge = 0.0f64;
        for i in 0..n {
            for &(a, b) in &[(0, i), (n - 1, i), (i, 0), (i, n - 1)] {
                edge = edge.max(self.amp[(a, b)].norm());
            }
        }
        edge / peak
    }

    /// Rows `p1,p2,re,im,abs2` with `p1` varying slowest.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "p1,p2,re,im,abs2")?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                let a = self.amp[(i, j)];
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt17(self.p[i]),
                    fmt17(self.p[j]),
                    fmt17(a.re),
                    fmt17(a.im),
                    fmt17(a.norm_sqr())
                )?;
            }
        }
        Ok(())
    }

    /// Grid metadata written next to the CSV.
    pub fn sidecar(&self) -> SpectrumSidecar {
        SpectrumSidecar {
            n: self.n(),
            p_min: self.p[0],
            p_max: self.p[self.n() - 1],
            h: self.h(),
            norm: self.norm_sqr(),
            schmidt_number: self.schmidt_number(),
        }
    }

    /// Parse the format produced by [`JointSpectrum::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let cols = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let expect = ["p1", "p2", "re", "im", "abs2"];
        if cols.len() != 5 || cols.iter().zip(expect).any(|(a, b)| a != b) {
            return Err(Error::Parse("joint spectrum columns must be p1,p2,re,im,abs2".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 5 || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse("joint spectrum rows need five finite numbers".into()));
            }
            rows.push(vals);
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n < 2 || n * n != rows.len() {
            return Err(Error::Parse(format!("{} rows do not form a square grid", rows.len())));
        }
        let p: Vec<f64> = (0..n).map(|j| rows[j][1]).collect();
        let mut amp = DMatrix::from_element(n, n, C0);
        let h = (p[n - 1] - p[0]) / (n - 1) as f64;
        let tol = 1e-9 * h.abs().max(1e-300);
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k / n, k % n);
            if (r[0] - p[i]).abs() > tol || (r[1] - p[j]).abs() > tol {
                return Err(Error::Parse(format!("row {} is off the grid", k + 2)));
            }
            amp[(i, j)] = Complex64::new(r[2], r[3]);
        }
        JointSpectrum::new(p, amp).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    pub n: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub h: f64,
    pub norm: f64,
    pub schmidt_number: f64,
}

/// Index range `i` with `j = s − i` on the grid.
fn anti_diagonal(n: usize, s: usize) -> std::ops::RangeInclusive<usize> {
    let lo = s.saturating_sub(n - 1);
    let hi = s.min(n - 1);
    lo..=hi
}

/// Trapezoid along the anti-diagonal `i + j = s`, measured in `dk`.
fn anti_diagonal_integral(input: &JointSpectrum, s: usize, f: impl Fn(f64, f64) -> Result<Complex64>) -> Result<Complex64> {
    let n = input.n();
    let h = input.h();
    let range = anti_diagonal(n, s);
    let (lo, hi) = (*range.start(), *range.end());
    let mut acc = C0;
    for i in range {
        let j = s - i;
        let w = if lo != hi && (i == lo || i == hi) { 0.5 } else { 1.0 };
        let a = input.amp[(i, j)];
        if a != C0 {
            acc += a * f(input.p[i], input.p[j])? * w;
        }
    }
    Ok(acc * h)
}

fn check_grid(input: &JointSpectrum) -> Result<()> {
    if input.n() < 8 {
        return Err(Error::GridTooCoarse(format!(
            "{} points per axis; anti-diagonals need at least 8 samples",
            input.n()
        )));
    }
    Ok(())
}

/// Output two-photon amplitude
/// `α_out(p₁,p₂) = t_{p₁} t_{p₂} α_in(p₁,p₂)
///   + (2 − t_{p₁} − t_{p₂}) / (2√2 κ_a1) · ∫ dk B(k, E−k) α_in(k, E−k)`,
/// `E = p₁ + p₂`, integrated along the grid anti-diagonals.
pub fn scatter_joint_spectrum(input: &JointSpectrum, p: &ScatterParams) -> Result<JointSpectrum> {
    p.validate()?;
    check_grid(input)?;
    let n = input.n();
    let t: Vec<Complex64> = input.p.iter().map(|&k| single_photon_t(k, p)).collect();
    let bound = bound_integrals(input, p)?;
    let two = Complex64::new(2.0, 0.0);
    let mut amp = DMatrix::from_fn(n, n, |i, j| t[i] * t[j] * input.amp[(i, j)]);
    if p.kappa_a1 > 0.0 {
        let pref = 1.0 / (2.0 * 2f64.sqrt() * p.kappa_a1);
        for i in 0..n {
            for j in 0..n {
                amp[(i, j)] += (two - t[i] - t[j]) * bound[i + j] * pref;
            }
        }
    }
    JointSpectrum::new(input.p.clone(), amp)
}

/// `I_s = ∫ dk B(k, E_s − k) α_in(k, E_s − k)` for every anti-diagonal `s`.
fn bound_integrals(input: &JointSpectrum, p: &ScatterParams) -> Result<Vec<Complex64>> {
    let n = input.n();
    (0..2 * n - 1)
        .into_par_iter()
        .map(|s| anti_diagonal_integral(input, s, |k1, k2| Ok(two_photon_coeffs(k1, k2, p)?.b)))
        .collect()
}

/// Probability carried by the bound-state term outside the finite grid.
///
/// Along every anti-diagonal the bound term is `I_s (2 − t − t')/(2√2κ_a1)`,
/// whose squared modulus integrates over the full line to `8πκ_a1²/κ_a`;
/// the part not sampled by the grid is returned.
pub fn bound_tail_probability(input: &JointSpectrum, p: &ScatterParams) -> Result<f64> {
    p.validate()?;
    check_grid(input)?;
    if p.kappa_a1 == 0.0 {
        return Ok(0.0);
    }
    let n = input.n();
    let h = input.h();
    let bound = bound_integrals(input, p)?;
    let full = 8.0 * PI * p.kappa_a1 * p.kappa_a1 / p.kappa_a();
    let two = Complex64::new(2.0, 0.0);
    let mut tail = 0.0;
    for s in 0..2 * n - 1 {
        let on_grid: f64 = anti_diagonal(n, s)
            .map(|i| {
                let j = s - i;
                (two - single_photon_t(input.p[i], p) - single_photon_t(input.p[j], p)).norm_sqr()
            })
            .sum::<f64>()
            * h;
        tail += h * bound[s].norm_sqr() / (8.0 * p.kappa_a1 * p.kappa_a1) * (full - on_grid);
    }
    Ok(tail)
}

/// Second-harmonic output.
#[derive(Clone, Debug, PartialEq)]
pub struct ShgReport {
    /// Second-harmonic frequencies `E_s = p_i + p_j` on the anti-diagonals.
    pub energies: Vec<f64>,
    pub beta: Vec<Complex64>,
    /// `η = ∫|β|² / (2 ∫∫|α_in|²)`.
    pub eta: f64,
    /// Probability that the pair left as one second-harmonic photon (`2η`).
    pub sh_probability: f64,
}

/// `β(E) = ½ ∫ dk C(k, E−k) α_in(k, E−k)` and the conversion efficiency.
pub fn shg_efficiency(input: &JointSpectrum, p: &ScatterParams) -> Result<ShgReport> {
    p.validate()?;
    check_grid(input)?;
    let n = input.n();
    let h = input.h();
    let beta: Vec<Complex64> = (0..2 * n - 1)
        .into_par_iter()
        .map(|s| Ok(anti_diagonal_integral(input, s, |k1, k2| Ok(two_photon_coeffs(k1, k2, p)?.c))? * 0.5))
        .collect::<Result<_>>()?;
    let energies = (0..2 * n - 1).map(|s| 2.0 * input.p[0] + s as f64 * h).collect();
    let eta = beta.iter().map(|b| b.norm_sqr()).sum::<f64>() * h / (2.0 * input.norm_sqr());
    Ok(ShgReport {
        energies,
        beta,
        eta,
        sh_probability: 2.0 * eta,
    })
}

/// Uniform time grid for the time-domain reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.t_start, self.t_end, self.points)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) || self.points < 16 {
            return Err(Error::param("oracle.points", "need t_end > t_start and at least 16 points"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub spectrum: JointSpectrum,
    /// Probability of one second-harmonic photon in the waveguide.
    pub sh_probability: f64,
    /// `η` in the bookkeeping of [`ShgReport`] (`sh_probability / 2`).
    pub eta: f64,
    /// Two-photon output probability integrated in the time domain.
    pub two_photon_probability: f64,
}

/// Temporal envelope `f(t) = (2π)^{−1/2} Σ_p h x(p) e^{−ipt}` of a spectral
/// amplitude sampled on `p`.
fn to_time(p: &[f64], x: &[Complex64], times: &[f64]) -> Vec<Complex64> {
    let h = (p[p.len() - 1] - p[0]) / (p.len() - 1) as f64;
    let w = h / (2.0 * PI).sqrt();
    times
        .iter()
        .map(|&t| {
            let mut acc = C0;
            for (k, a) in p.iter().zip(x) {
                if *a != C0 {
                    acc += a * Complex64::from_polar(1.0, -k * t);
                }
            }
            acc * w
        })
        .collect()
}

/// Trapezoid Fourier matrix `E[i, j] = w_j e^{i p_i t_j} / √(2π)`.
fn fourier_matrix(p: &[f64], times: &[f64]) -> DMatrix<Complex64> {
    let dt = times[1] - times[0];
    let nt = times.len();
    let s = 1.0 / (2.0 * PI).sqrt();
    DMatrix::from_fn(p.len(), nt, |i, j| {
        let w = if j == 0 || j + 1 == nt { 0.5 * dt } else { dt };
        Complex64::from_polar(w * s, p[i] * times[j])
    })
}

fn oracle_basis(p: &ScatterParams) -> Result<(AtomSpec, FockBasis)> {
    let atom = p.atom();
    let basis = build_basis(&atom, 2)?;
    Ok((atom, basis))
}

fn clipping_check(f: &[Complex64], what: &str) -> Result<()> {
    let peak = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let edge = f[0].norm().max(f[f.len() - 1].norm());
    if peak > 0.0 && edge > 1e-4 * peak {
        return Err(Error::WindowClipping(format!(
            "{what} amplitude at the time-window edge is {:.2e} of peak",
            edge / peak
        )));
    }
    Ok(())
}

/// Output spectral amplitude for a single photon with spectral amplitude `x`
/// (sampled on `p`) computed by direct time evolution.
pub fn single_photon_oracle(p_axis: &[f64], x: &[Complex64], p: &ScatterParams, grid: &TimeGrid, tol: Tolerance) -> Result<Vec<Complex64>> {
    p.validate()?;
    grid.validate()?;
    let times = grid.times();
    let (atom, basis) = oracle_basis(p)?;
    let f = to_time(p_axis, x, &times);
    clipping_check(&f, "input")?;
    let env = Envelope::new(times[0], times[1] - times[0], f, EnvelopeKind::Photon)?;
    let sys = PulsedSystem::for_atom(&atom, &basis, ModeLabel::A, Some(env), 1)?;
    let res = evolve_pulsed(&sys, &basis.vacuum(), &times, tol)?;
    let out = res.output_amplitude(0, &basis.vacuum());
    clipping_check(&out, "output")?;
    let e = fourier_matrix(p_axis, &times);
    Ok((e * DVector::from_vec(out)).iter().copied().collect())
}

/// Time-domain reconstruction of the two-photon output for a symmetric
/// input amplitude.
///
/// The input is written as `Σ_j c_j x_j ⊗ x_j` (SVD plus polarisation); for
/// each term the two-photon Fock-state hierarchy is evolved, the first
/// emission at `t₁` is followed by a second evolution conditioned on it, and
/// the resulting two-time output amplitude is Fourier transformed.
pub fn time_domain_oracle(input: &JointSpectrum, p: &ScatterParams, grid: &TimeGrid, tol: Tolerance) -> Result<OracleReport> {
    p.validate()?;
    grid.validate()?;
    check_grid(input)?;
    if input.symmetry_defect() > 1e-10 * input.amp.iter().map(|v| v.norm()).fold(0.0, f64::max) {
        return Err(Error::param("input", "two-photon amplitude must be exchange symmetric"));
    }
    let times = grid.times();
    let nt = times.len();
    let (atom, basis) = oracle_basis(p)?;
    let vac = basis.vacuum();
    let lower_a = basis.normal_ordered(&[], &[ModeLabel::A])?;
    let lower_c = basis.normal_ordered(&[], &[ModeLabel::C])?;
    let sh_out = lower_c.adjoint() * &vac * Complex64::new((2.0 * p.kappa_c1).sqrt(), 0.0);
    let dt = times[1] - times[0];

    let mut phi = DMatrix::from_element(nt, nt, C0);
    let mut sh = vec![C0; nt];
    for (coef, x) in symmetric_terms(&input.amp) {
        let xs: Vec<Complex64> = x.iter().copied().collect();
        let f = to_time(&input.p, &xs, &times);
        clipping_check(&f, "input")?;
        let env = Envelope::new(times[0], dt, f, EnvelopeKind::Photon)?.normalized()?;
        // c x⊗x is the normalised pair state in x̂ times c‖x‖² (grid units)
        let weight = coef * (x.norm_squared() * input.h());

        let sys2 = PulsedSystem::for_atom(&atom, &basis, ModeLabel::A, Some(env.clone()), 2)?;
        let first = evolve_pulsed(&sys2, &vac, &times, tol)?;
        if first.remaining_probability > 1e-4 {
            return Err(Error::WindowClipping(format!(
                "{:.2e} probability still inside the cavity or pulse at the end of the window",
                first.remaining_probability
            )));
        }
        for (k, l) in first.levels.iter().enumerate() {
            sh[k] += sh_out.dotc(&l[0]) * weight;
        }

        let sys1 = PulsedSystem::for_atom(&atom, &basis, ModeLabel::A, Some(env.clone()), 1)?;
        let rows: Vec<Vec<Complex64>> = (0..nt)
            .into_par_iter()
            .map(|k| {
                let init = [first.emissions[k][0].clone(), first.emissions[k][1].clone()];
                if init[0].norm() == 0.0 && init[1].norm() == 0.0 {
                    return Ok(vec![C0; nt - k]);
                }
                if k + 1 == nt {
                    let j = env.eval(times[k]) * vac.dotc(&init[1]) - (2.0 * p.kappa_a1).sqrt() * vac.dotc(&(&lower_a * &init[0]));
                    return Ok(vec![j]);
                }
                let second = evolve_pulsed_levels(&sys1, &init, &times[k..], tol)?;
                Ok(second.output_amplitude(0, &vac))
            })
            .collect::<Result<_>>()?;
        let s = weight / 2f64.sqrt();
        for (k, row) in rows.iter().enumerate() {
            for (off, a) in row.iter().enumerate() {
                let j = k + off;
                phi[(k, j)] += a * s;
                if j != k {
                    phi[(j, k)] += a * s;
                }
            }
        }
    }
    let sh_probability = crate::envelope::trapezoid(sh.iter().map(|v| v.norm_sqr()), dt);
    let two_photon_probability = phi.norm_squared() * dt * dt;
    let e = fourier_matrix(&input.p, &times);
    let amp = &e * &phi * e.transpose();
    Ok(OracleReport {
        spectrum: JointSpectrum::new(input.p.clone(), amp)?,
        sh_probability,
        eta: sh_probability / 2.0,
        two_photon_probability,
    })
}

/// Singular triplets `(σ, u, w)` with `A = Σ σ u wᵀ`, from the Hermitian
/// eigenproblem of `A A†`.
fn singular_triplets(a: &DMatrix<Complex64>) -> Vec<(f64, DVector<Complex64>, DVector<Complex64>)> {
    let eig = (a * a.adjoint()).symmetric_eigen();
    let smax = eig.eigenvalues.iter().copied().fold(0.0, f64::max).sqrt();
    let mut out = Vec::new();
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        let s = e.max(0.0).sqrt();
        if s <= 1e-6 * smax {
            continue;
        }
        let u: DVector<Complex64> = eig.eigenvectors.column(i).into_owned();
        let w = (a.adjoint() * &u).conjugate() / Complex64::new(s, 0.0);
        out.push((s, u, w));
    }
    out
}

/// Decompose a symmetric matrix as `Σ_j c_j x_j x_jᵀ`.
fn symmetric_terms(a: &DMatrix<Complex64>) -> Vec<(Complex64, DVector<Complex64>)> {
    let mut terms = Vec::new();
    for (s, u, w) in singular_triplets(a) {
        // u wᵀ + w uᵀ = ½[(u+w)(u+w)ᵀ − (u−w)(u−w)ᵀ]
        let plus = &u + &w;
        let minus = &u - &w;
        let c = Complex64::new(s / 4.0, 0.0);
        if plus.norm() > 1e-7 {
            terms.push((c, plus));
        }
        if minus.norm() > 1e-7 {
            terms.push((-c, minus));
        }
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_resonance_is_pi_phase() {
        let mut p = ScatterParams::fig2();
        p.kappa_a0 = 0.0;
        assert_eq!(single_photon_t(p.omega_a, &p), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn critical_coupling_extinguishes() {
        let mut p = ScatterParams::fig2();
        p.kappa_a0 = p.kappa_a1;
        assert_eq!(single_photon_t(p.omega_a, &p).norm(), 0.0);
        assert!((single_photon_t(1e9, &p) - 1.0).norm() < 1e-8);
    }

    #[test]
    fn fig2_bound_coefficient_on_resonance() {
        let c = two_photon_coeffs(0.0, 0.0, &ScatterParams::fig2()).unwrap();
        let expect = -81.0 * 2f64.sqrt() / (136.0 * PI);
        assert!((c.b - expect).norm() < 1e-14, "{}", c.b);
    }

    #[test]
    fn uncoupled_nonlinearity_gives_no_bound_state() {
        let mut p = ScatterParams::fig2();
        p.g = 0.0;
        let c = two_photon_coeffs(0.3, -0.1, &p).unwrap();
        assert_eq!(c.b, C0);
        assert_eq!(c.c.norm(), 0.0);
    }

    #[test]
    fn symmetric_decomposition_reconstructs() {
        let a = DMatrix::from_fn(5, 5, |i, j| Complex64::new((i * j) as f64 + 1.0, (i + j) as f64 * 0.3));
        let g = JointSpectrum::gaussian(0.2, 0.5, 4.0, 81).unwrap().amp;
        let g0 = JointSpectrum::gaussian(0.0, 0.5, 4.0, 81).unwrap().amp;
        for a in [a, g, g0] {
            let n = a.nrows();
            let mut r = DMatrix::from_element(n, n, C0);
            for (c, x) in symmetric_terms(&a) {
                r += &x * x.transpose() * c;
            }
            assert!((&r - &a).norm() < 1e-8 * a.norm(), "{}", (r - a).norm());
        }
    }

    #[test]
    fn csv_round_trip() {
        let js = JointSpectrum::gaussian(0.0, 0.5, 2.0, 9).unwrap();
        let mut buf = Vec::new();
        js.write_csv(&mut buf).unwrap();
        let back = JointSpectrum::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.amp, js.amp);
        assert!(JointSpectrum::read_csv("p1,p2,re,im,abs2\n0,0,1,0,1\n".as_bytes()).is_err());
        assert!(JointSpectrum::read_csv("p1,p2,re,im\n".as_bytes()).is_err());
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let js = JointSpectrum::gaussian(0.0, 0.5, 2.0, 7).unwrap();
        assert!(matches!(
            scatter_joint_spectrum(&js, &ScatterParams::fig2()),
            Err(Error::GridTooCoarse(_))
        ));
    }

    #[test]
    fn near_singular_denominator_is_flagged() {
        let p = ScatterParams {
            omega_a: 0.0,
            omega_c: 0.0,
            g: 1.0,
            kappa_a0: 0.0,
            kappa_a1: 0.0,
            kappa_c0: 0.0,
            kappa_c1: 0.0,
        };
        // α_a⁻ α_c⁻ = E² = 2g² at E = √2 g
        let k = 2f64.sqrt() / 2.0;
        assert!(matches!(two_photon_coeffs(k, k, &p), Err(Error::NearSingular { .. })));
    }
}
