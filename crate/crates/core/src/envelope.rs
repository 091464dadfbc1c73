//! Sampled complex time-domain envelopes (photon wavepackets and drives).

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Photon,
    Drive,
}

/// Uniformly sampled complex function of time. Between samples it is a
/// natural cubic spline; outside the sampled window it is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Complex64>,
    pub kind: EnvelopeKind,
    second: Vec<Complex64>,
}

impl Envelope {
    pub fn new(t0: f64, dt: f64, samples: Vec<Complex64>, kind: EnvelopeKind) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(Error::param("envelope.dt", "grid step must be finite and positive"));
        }
        if samples.len() < 2 {
            return Err(Error::param("envelope", "needs at least two samples"));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::param("envelope", "samples must be finite"));
        }
        let second = spline_second_derivatives(&samples, dt);
        Ok(Envelope {
            t0,
            dt,
            samples,
            kind,
            second,
        })
    }

    pub fn from_fn(t0: f64, t1: f64, n: usize, kind: EnvelopeKind, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        if n < 2 || !(t1 > t0) {
            return Err(Error::param("envelope", "needs t1 > t0 and at least two samples"));
        }
        let dt = (t1 - t0) / (n - 1) as f64;
        let samples = (0..n).map(|i| f(t0 + dt * i as f64)).collect();
        Envelope::new(t0, dt, samples, kind)
    }

    /// Truncated Gaussian `exp(−25 (t/T − 1/2)²) − exp(−6.25)` on `[0, T]`,
    /// shifted to start at `start`, normalised to unit energy.
    pub fn truncated_gaussian(start: f64, duration: f64, n: usize) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::param("duration", "must be positive"));
        }
        let floor = (-6.25f64).exp();
        Envelope::from_fn(start, start + duration, n, EnvelopeKind::Photon, |t| {
            let x = (t - start) / duration - 0.5;
            Complex64::new(((-25.0 * x * x).exp() - floor).max(0.0), 0.0)
        })?
        .normalized()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.samples.len() - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Spline value at `t`; zero outside the sampled window.
    pub fn eval(&self, t: f64) -> Complex64 {
        let u = (t - self.t0) / self.dt;
        let n = self.samples.len();
        if !(u >= 0.0) || u > (n - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = (u.floor() as usize).min(n - 2);
        let b = u - i as f64;
        let a = 1.0 - b;
        let h2 = self.dt * self.dt / 6.0;
        self.samples[i] * a + self.samples[i + 1] * b + (self.second[i] * (a * a * a - a) + self.second[i + 1] * (b * b * b - b)) * h2
    }

    /// Trapezoidal `∫|f|² dt` over the samples.
    pub fn energy(&self) -> f64 {
        trapezoid(self.samples.iter().map(|s| s.norm_sqr()), self.dt)
    }

    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if !(e > 0.0) {
            return Err(Error::ZeroNorm("envelope".into()));
        }
        let s = 1.0 / e.sqrt();
        Envelope::new(self.t0, self.dt, self.samples.iter().map(|v| v * s).collect(), self.kind)
    }

    pub fn map(&self, kind: EnvelopeKind, f: impl Fn(f64, Complex64) -> Complex64) -> Result<Self> {
        let samples = self.samples.iter().enumerate().map(|(i, &v)| f(self.time(i), v)).collect();
        Envelope::new(self.t0, self.dt, samples, kind)
    }

    /// `g(t) = f(t0 + t_end − t)` on the same window, optionally conjugated.
    pub fn time_reversed(&self, conjugate: bool) -> Self {
        let samples = self.samples.iter().rev().map(|v| if conjugate { v.conj() } else { *v }).collect();
        Envelope::new(self.t0, self.dt, samples, self.kind).expect("same grid")
    }

    pub fn shifted(&self, offset: f64) -> Self {
        let mut e = self.clone();
        e.t0 += offset;
        e
    }

    /// Trapezoidal `∫ conj(self) · other dt` on a common grid.
    pub fn overlap(&self, other: &Envelope) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(trapezoid_c(
            self.samples.iter().zip(&other.samples).map(|(a, b)| a.conj() * b),
            self.dt,
        ))
    }

    pub fn check_same_grid(&self, other: &Envelope) -> Result<()> {
        let tol = 1e-9 * self.dt;
        if self.len() != other.len() || (self.t0 - other.t0).abs() > tol || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::param("envelope", "grids do not match"));
        }
        Ok(())
    }

    /// Largest edge sample relative to the peak.
    pub fn edge_ratio(&self) -> f64 {
        let peak = self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        self.samples[0].norm().max(self.samples[self.len() - 1].norm()) / peak
    }

    /// Write `t,re,im` rows after a `#`-prefixed JSON header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header = EnvelopeHeader {
            t0: self.t0,
            dt: self.dt,
            n: self.len(),
            kind: self.kind,
            energy: self.energy(),
        };
        writeln!(w, "# {}", serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?)?;
        writeln!(w, "t,re,im")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(w, "{},{},{}", fmt17(self.time(i)), fmt17(s.re), fmt17(s.im))?;
        }
        Ok(())
    }

    /// Parse the format produced by [`Envelope::write_csv`]. The header is
    /// optional; without it the kind defaults to photon and the step is taken
    /// from the time column.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut header: Option<EnvelopeHeader> = None;
        let mut body = String::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if lineno == 0 {
                    header = Some(serde_json::from_str(rest.trim()).map_err(|e| Error::Parse(format!("envelope header: {e}")))?);
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let cols = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if cols.len() != 3 || &cols[0] != "t" || &cols[1] != "re" || &cols[2] != "im" {
            return Err(Error::Parse("envelope columns must be t,re,im".into()));
        }
        let mut t = Vec::new();
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 3 || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse("envelope rows need three finite numbers".into()));
            }
            t.push(vals[0]);
            samples.push(Complex64::new(vals[1], vals[2]));
        }
        if t.len() < 2 {
            return Err(Error::Parse("envelope needs at least two rows".into()));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parse("envelope times must increase".into()));
        }
        for (i, ti) in t.iter().enumerate() {
            if (ti - (t[0] + dt * i as f64)).abs() > 1e-6 * dt {
                return Err(Error::Parse(format!("envelope grid is not uniform at row {}", i + 1)));
            }
        }
        let kind = match &header {
            Some(h) => {
                if h.n != t.len() {
                    return Err(Error::Parse(format!("header says {} samples, found {}", h.n, t.len())));
                }
                if (h.dt - dt).abs() > 1e-6 * dt {
                    return Err(Error::Parse("header step disagrees with time column".into()));
                }
                h.kind
            }
            None => EnvelopeKind::Photon,
        };
        Envelope::new(t[0], dt, samples, kind).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeHeader {
    t0: f64,
    dt: f64,
    n: usize,
    kind: EnvelopeKind,
    energy: f64,
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trapezoid(values: impl Iterator<Item = f64>, h: f64) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    match first {
        None => 0.0,
        Some(f) => h * (sum - 0.5 * (f + last)),
    }
}

pub fn trapezoid_c(values: impl Iterator<Item = Complex64>, h: f64) -> Complex64 {
    let v: Vec<Complex64> = values.collect();
    if v.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let s: Complex64 = v.iter().sum();
    (s - (v[0] + v[v.len() - 1]) * 0.5) * h
}

fn spline_second_derivatives(y: &[Complex64], h: f64) -> Vec<Complex64> {
    // natural spline: M_0 = M_{n-1} = 0, tridiagonal (1, 4, 1) system inside
    let n = y.len();
    let mut m = vec![Complex64::new(0.0, 0.0); n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut c = vec![0.0; k];
    let mut d = vec![Complex64::new(0.0, 0.0); k];
    for i in 0..k {
        let rhs = (y[i + 2] - y[i + 1] * 2.0 + y[i]) * (6.0 / (h * h));
        if i == 0 {
            c[i] = 1.0 / 4.0;
            d[i] = rhs / 4.0;
        } else {
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
    }
    m[k] = d[k - 1];
    for i in (0..k - 1).rev() {
        m[i + 1] = d[i] - m[i + 2] * c[i];
    }
    m
}
