//! Truncated multimode Fock bases and the χ(2) Hamiltonians built on them.
//!
//! Basis states are grouped into excitation blocks `N = N_a + N_b + 2 N_c + N_d`,
//! which the three-wave-mixing interaction conserves. Interaction terms are
//! assembled from exact matrix elements between basis states, so the
//! Hamiltonian is the projection of the untruncated operator onto the basis.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Cavity mode names. `a`, `b` are fundamentals, `c` the second harmonic,
/// `d` the antenna.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    A,
    B,
    C,
    D,
}

impl ModeLabel {
    /// Contribution of one quantum of this mode to the block index.
    pub fn weight(self) -> usize {
        match self {
            ModeLabel::C => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::A => "a",
            ModeLabel::B => "b",
            ModeLabel::C => "c",
            ModeLabel::D => "d",
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(ModeLabel::A),
            "b" => Ok(ModeLabel::B),
            "c" => Ok(ModeLabel::C),
            "d" => Ok(ModeLabel::D),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// One cavity mode in the rotating frame. Rates are amplitude decay rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub label: ModeLabel,
    #[serde(default)]
    pub detuning: f64,
    #[serde(default)]
    pub kappa0: f64,
    #[serde(default)]
    pub kappa1: f64,
}

impl ModeSpec {
    pub fn new(label: ModeLabel, detuning: f64, kappa0: f64, kappa1: f64) -> Self {
        ModeSpec {
            label,
            detuning,
            kappa0,
            kappa1,
        }
    }

    /// Total amplitude decay rate.
    pub fn kappa(&self) -> f64 {
        self.kappa0 + self.kappa1
    }

    pub fn validate(&self) -> Result<()> {
        let name = |field: &str| format!("modes.{}.{}", self.label, field);
        if !self.detuning.is_finite() {
            return Err(Error::param(&name("detuning"), "must be finite"));
        }
        for (field, v) in [("kappa0", self.kappa0), ("kappa1", self.kappa1)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(&name(field), format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomKind {
    /// `g (a†² c + a² c†)`
    Degenerate,
    /// `g (a† b† c + a b c†)`
    NonDegenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub kind: AtomKind,
    pub g: f64,
    pub modes: Vec<ModeSpec>,
}

impl AtomSpec {
    pub fn new(kind: AtomKind, g: f64, modes: Vec<ModeSpec>) -> Result<Self> {
        let atom = AtomSpec { kind, g, modes };
        atom.validate()?;
        Ok(atom)
    }

    /// Degenerate atom with resonant modes `a`, `c` and intrinsic decay only.
    pub fn degenerate(g: f64, kappa_a: f64, kappa_c: f64) -> Self {
        AtomSpec {
            kind: AtomKind::Degenerate,
            g,
            modes: vec![
                ModeSpec::new(ModeLabel::A, 0.0, kappa_a, 0.0),
                ModeSpec::new(ModeLabel::C, 0.0, kappa_c, 0.0),
            ],
        }
    }

    /// Non-degenerate atom with resonant modes `a`, `b`, `c` and intrinsic decay only.
    pub fn non_degenerate(g: f64, kappa: f64) -> Self {
        AtomSpec {
            kind: AtomKind::NonDegenerate,
            g,
            modes: vec![
                ModeSpec::new(ModeLabel::A, 0.0, kappa, 0.0),
                ModeSpec::new(ModeLabel::B, 0.0, kappa, 0.0),
                ModeSpec::new(ModeLabel::C, 0.0, kappa, 0.0),
            ],
        }
    }

    pub fn mode(&self, label: ModeLabel) -> Option<&ModeSpec> {
        self.modes.iter().find(|m| m.label == label)
    }

    pub fn labels(&self) -> Vec<ModeLabel> {
        let mut labels: Vec<_> = self.modes.iter().map(|m| m.label).collect();
        labels.sort();
        labels
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::param("g", format!("must be finite and >= 0, got {}", self.g)));
        }
        for m in &self.modes {
            m.validate()?;
        }
        let mut labels: Vec<_> = self.modes.iter().map(|m| m.label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("modes", "mode labels must be unique"));
        }
        let has = |l| labels.contains(&l);
        match self.kind {
            AtomKind::Degenerate => {
                if has(ModeLabel::B) {
                    return Err(Error::param("modes", "degenerate atom has no mode b"));
                }
                if !has(ModeLabel::A) || !has(ModeLabel::C) {
                    return Err(Error::param("modes", "degenerate atom needs modes a and c"));
                }
            }
            AtomKind::NonDegenerate => {
                if !has(ModeLabel::A) || !has(ModeLabel::B) || !has(ModeLabel::C) {
                    return Err(Error::param("modes", "non-degenerate atom needs modes a, b and c"));
                }
            }
        }
        Ok(())
    }
}

/// Truncated Fock basis: all occupation tuples with block index `N <= n_max`.
///
/// States are enumerated with the first mode varying fastest, so a degenerate
/// atom with `n_max = 2` gives `|00>, |10>, |20>, |01>`.
#[derive(Clone, Debug)]
pub struct FockBasis {
    labels: Vec<ModeLabel>,
    n_max: usize,
    states: Vec<Vec<usize>>,
    blocks: Vec<usize>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl FockBasis {
    /// Basis over the given modes (sorted into `a, b, c, d` order).
    pub fn new(labels: &[ModeLabel], n_max: usize) -> Result<Self> {
        let mut labels = labels.to_vec();
        labels.sort();
        if labels.is_empty() {
            return Err(Error::param("modes", "at least one mode is required"));
        }
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("modes", "mode labels must be unique"));
        }
        let caps: Vec<usize> = labels.iter().map(|l| n_max / l.weight()).collect();
        let mut states = Vec::new();
        let mut occ = vec![0usize; labels.len()];
        'outer: loop {
            let n: usize = occ.iter().zip(&labels).map(|(o, l)| o * l.weight()).sum();
            if n <= n_max {
                states.push(occ.clone());
            }
            for j in 0..occ.len() {
                if occ[j] < caps[j] {
                    occ[j] += 1;
                    continue 'outer;
                }
                occ[j] = 0;
            }
            break;
        }
        let blocks = states
            .iter()
            .map(|s| s.iter().zip(&labels).map(|(o, l)| o * l.weight()).sum())
            .collect();
        let lookup = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(FockBasis {
            labels,
            n_max,
            states,
            blocks,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    /// Occupation tuple of state `i`, ordered like [`FockBasis::labels`].
    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i]
    }

    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        self.lookup.get(occupations).copied()
    }

    pub fn block(&self, i: usize) -> usize {
        self.blocks[i]
    }

    pub fn block_indices(&self, n: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.blocks[i] == n).collect()
    }

    pub fn position(&self, label: ModeLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    /// Index of the state with the given occupations of named modes, all
    /// others empty.
    pub fn index_with(&self, occupied: &[(ModeLabel, usize)]) -> Result<usize> {
        let mut occ = vec![0; self.labels.len()];
        for &(l, n) in occupied {
            occ[self.position(l)?] = n;
        }
        self.index_of(&occ)
            .ok_or_else(|| Error::param("state", format!("{occupied:?} is outside the basis")))
    }

    /// Ket label such as `20` or `110`.
    pub fn state_label(&self, i: usize) -> String {
        self.states[i]
            .iter()
            .map(|o| o.to_string())
            .collect::<Vec<_>>()
            .join(if self.states[i].iter().any(|&o| o > 9) { "," } else { "" })
    }

    pub fn vacuum(&self) -> DVector<Complex64> {
        self.basis_vector(0)
    }

    pub fn basis_vector(&self, i: usize) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.len());
        v[i] = Complex64::new(1.0, 0.0);
        v
    }

    /// Diagonal projector onto excitation block `n`.
    pub fn block_projector(&self, n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            if i == j && self.blocks[i] == n {
                Complex64::new(1.0, 0.0)
            } else {
                C0
            }
        })
    }

    /// Matrix of the normal-ordered product `Π create† · Π annihilate`,
    /// evaluated exactly and restricted to the basis.
    pub fn normal_ordered(&self, create: &[ModeLabel], annihilate: &[ModeLabel]) -> Result<DMatrix<Complex64>> {
        let cpos = create.iter().map(|&l| self.position(l)).collect::<Result<Vec<_>>>()?;
        let apos = annihilate.iter().map(|&l| self.position(l)).collect::<Result<Vec<_>>>()?;
        let d = self.len();
        let mut m = DMatrix::from_element(d, d, C0);
        for (j, s) in self.states.iter().enumerate() {
            let mut occ = s.clone();
            let mut amp = 1.0f64;
            let mut alive = true;
            for &p in &apos {
                if occ[p] == 0 {
                    alive = false;
                    break;
                }
                amp *= (occ[p] as f64).sqrt();
                occ[p] -= 1;
            }
            if !alive {
                continue;
            }
            for &p in &cpos {
                occ[p] += 1;
                amp *= (occ[p] as f64).sqrt();
            }
            if let Some(i) = self.index_of(&occ) {
                m[(i, j)] += Complex64::new(amp, 0.0);
            }
        }
        Ok(m)
    }

    pub fn number_operator(&self, label: ModeLabel) -> Result<DMatrix<Complex64>> {
        let p = self.position(label)?;
        Ok(DMatrix::from_fn(self.len(), self.len(), |i, j| {
            if i == j {
                Complex64::new(self.states[i][p] as f64, 0.0)
            } else {
                C0
            }
        }))
    }
}

/// Dense operator over a [`FockBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorRep {
    pub matrix: DMatrix<Complex64>,
    pub hermitian: bool,
}

impl OperatorRep {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest element of `|A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn adjoint(&self) -> OperatorRep {
        OperatorRep {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }
}

pub fn build_basis(atom: &AtomSpec, n_max: usize) -> Result<FockBasis> {
    atom.validate()?;
    FockBasis::new(&atom.labels(), n_max)
}

/// Annihilation operator of `label`; the creation operator is its adjoint.
pub fn mode_operator(basis: &FockBasis, label: ModeLabel) -> Result<OperatorRep> {
    Ok(OperatorRep {
        matrix: basis.normal_ordered(&[], &[label])?,
        hermitian: false,
    })
}

/// Raising half of the interaction: `a†² c` or `a† b† c`.
pub fn interaction_raising(kind: AtomKind, basis: &FockBasis) -> Result<DMatrix<Complex64>> {
    match kind {
        AtomKind::Degenerate => basis.normal_ordered(&[ModeLabel::A, ModeLabel::A], &[ModeLabel::C]),
        AtomKind::NonDegenerate => basis.normal_ordered(&[ModeLabel::A, ModeLabel::B], &[ModeLabel::C]),
    }
}

/// Rotating-frame Hamiltonian `Σ δ_j j†j + g (X + X†)`.
pub fn build_hamiltonian(atom: &AtomSpec, basis: &FockBasis) -> Result<OperatorRep> {
    atom.validate()?;
    for m in &atom.modes {
        basis.position(m.label)?;
    }
    let mut h = DMatrix::from_element(basis.len(), basis.len(), C0);
    for m in &atom.modes {
        if m.detuning != 0.0 {
            h += basis.number_operator(m.label)? * Complex64::new(m.detuning, 0.0);
        }
    }
    if atom.g != 0.0 {
        let x = interaction_raising(atom.kind, basis)?;
        h += (&x + x.adjoint()) * Complex64::new(atom.g, 0.0);
    }
    Ok(OperatorRep {
        matrix: h,
        hermitian: true,
    })
}

/// `H − i Σ_j κ_j j†j` with κ_j the total amplitude decay of each mode.
pub fn effective_hamiltonian(h: &OperatorRep, basis: &FockBasis, modes: &[ModeSpec]) -> Result<OperatorRep> {
    let mut m = h.matrix.clone();
    for mode in modes {
        mode.validate()?;
        let k = mode.kappa();
        if k != 0.0 {
            m -= basis.number_operator(mode.label)? * (I * k);
        }
    }
    Ok(OperatorRep {
        matrix: m,
        hermitian: false,
    })
}

/// Eigenpairs of the excitation block `n`, sorted ascending by real part.
/// Eigenvectors are embedded in the full basis and unit-normalised.
pub fn eigenlevels(h: &OperatorRep, basis: &FockBasis, n: usize) -> Result<Vec<(Complex64, DVector<Complex64>)>> {
    let idx = basis.block_indices(n);
    if idx.is_empty() {
        return Err(Error::EmptyBlock(n));
    }
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| h.matrix[(idx[i], idx[j])]);
    let mut pairs: Vec<(Complex64, DVector<Complex64>)> = if h.hermitian {
        let eig = sub.symmetric_eigen();
        (0..k)
            .map(|i| (Complex64::new(eig.eigenvalues[i], 0.0), eig.eigenvectors.column(i).into_owned()))
            .collect()
    } else {
        let values = sub.clone().schur().eigenvalues().ok_or_else(|| Error::NonConvergence {
            what: "eigenlevels".into(),
            reason: "Schur form is not triangular".into(),
        })?;
        values.iter().map(|&lam| (lam, null_vector(&sub, lam))).collect()
    };
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    Ok(pairs
        .into_iter()
        .map(|(lam, v)| {
            let mut full = DVector::from_element(basis.len(), C0);
            for (i, &b) in idx.iter().enumerate() {
                full[b] = v[i];
            }
            (lam, full)
        })
        .collect())
}

fn null_vector(m: &DMatrix<Complex64>, lam: Complex64) -> DVector<Complex64> {
    let k = m.nrows();
    let shifted = m - DMatrix::<Complex64>::identity(k, k) * lam;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty block");
    let v: DVector<Complex64> = v_t.row(imin).adjoint();
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn degenerate_enumeration_order() {
        let basis = build_basis(&AtomSpec::degenerate(1.0, 1.0, 1.0), 2).unwrap();
        let states: Vec<_> = (0..basis.len()).map(|i| basis.state_label(i)).collect();
        assert_eq!(states, ["00", "10", "20", "01"]);
        let blocks: Vec<_> = (0..basis.len()).map(|i| basis.block(i)).collect();
        assert_eq!(blocks, [0, 1, 2, 2]);
    }

    #[test]
    fn non_degenerate_pair_shares_block() {
        let basis = build_basis(&AtomSpec::non_degenerate(1.0, 1.0), 2).unwrap();
        let i110 = basis.index_of(&[1, 1, 0]).unwrap();
        let i001 = basis.index_of(&[0, 0, 1]).unwrap();
        assert_eq!(basis.block(i110), 2);
        assert_eq!(basis.block(i001), 2);
    }

    #[test]
    fn zero_truncation_is_vacuum() {
        let basis = build_basis(&AtomSpec::degenerate(1.0, 1.0, 1.0), 0).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis.state(0), &[0, 0]);
    }

    #[test]
    fn ladder_elements() {
        let basis = build_basis(&AtomSpec::degenerate(1.0, 1.0, 1.0), 2).unwrap();
        let a = mode_operator(&basis, ModeLabel::A).unwrap().matrix;
        let v1 = basis.basis_vector(basis.index_of(&[1, 0]).unwrap());
        let v2 = basis.basis_vector(basis.index_of(&[2, 0]).unwrap());
        assert_eq!(&a * &v1, basis.vacuum());
        assert!((&a * &v2 - &v1 * c(2f64.sqrt())).norm() < 1e-15);
        assert_eq!((&a * basis.vacuum()).norm(), 0.0);
        assert!(mode_operator(&basis, ModeLabel::B).is_err());
    }

    #[test]
    fn degenerate_coupling_element() {
        let g = 0.7;
        let basis = build_basis(&AtomSpec::degenerate(g, 0.0, 0.0), 2).unwrap();
        let h = build_hamiltonian(&AtomSpec::degenerate(g, 0.0, 0.0), &basis).unwrap();
        let i20 = basis.index_of(&[2, 0]).unwrap();
        let i01 = basis.index_of(&[0, 1]).unwrap();
        assert!((h.matrix[(i01, i20)] - c(2f64.sqrt() * g)).norm() < 1e-15);
        assert!(h.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn non_degenerate_block_is_offdiagonal_g() {
        let g = 1.3;
        let atom = AtomSpec::non_degenerate(g, 0.0);
        let basis = build_basis(&atom, 2).unwrap();
        let h = build_hamiltonian(&atom, &basis).unwrap();
        let i = basis.index_of(&[1, 1, 0]).unwrap();
        let j = basis.index_of(&[0, 0, 1]).unwrap();
        assert_eq!(h.matrix[(i, i)], C0);
        assert_eq!(h.matrix[(j, j)], C0);
        assert_eq!(h.matrix[(i, j)], c(g));
        assert_eq!(h.matrix[(j, i)], c(g));
    }

    #[test]
    fn zero_coupling_gives_zero_operator() {
        let atom = AtomSpec::non_degenerate(0.0, 1.0);
        let basis = build_basis(&atom, 3).unwrap();
        let h = build_hamiltonian(&atom, &basis).unwrap();
        assert_eq!(h.matrix.norm(), 0.0);
        for n in 0..=3 {
            for (lam, _) in eigenlevels(&h, &basis, n).unwrap() {
                assert_eq!(lam.norm(), 0.0);
            }
        }
    }

    #[test]
    fn effective_hamiltonian_diagonal() {
        let atom = AtomSpec::degenerate(0.0, 1.0, 0.5);
        let basis = build_basis(&atom, 2).unwrap();
        let h = build_hamiltonian(&atom, &basis).unwrap();
        let heff = effective_hamiltonian(&h, &basis, &atom.modes).unwrap();
        let i10 = basis.index_of(&[1, 0]).unwrap();
        let i20 = basis.index_of(&[2, 0]).unwrap();
        assert_eq!(heff.matrix[(i10, i10)], Complex64::new(0.0, -1.0));
        assert_eq!(heff.matrix[(i20, i20)], Complex64::new(0.0, -2.0));
        assert!(!heff.hermitian);

        let lossless = AtomSpec::degenerate(2.0, 0.0, 0.0);
        let h = build_hamiltonian(&lossless, &basis).unwrap();
        let heff = effective_hamiltonian(&h, &basis, &lossless.modes).unwrap();
        assert_eq!(heff.matrix, h.matrix);
    }

    #[test]
    fn negative_rates_rejected() {
        let atom = AtomSpec::degenerate(1.0, 1.0, 1.0);
        let basis = build_basis(&atom, 2).unwrap();
        let h = build_hamiltonian(&atom, &basis).unwrap();
        let bad = [ModeSpec::new(ModeLabel::A, 0.0, -1.0, 0.0)];
        assert!(effective_hamiltonian(&h, &basis, &bad).is_err());
    }

    #[test]
    fn degenerate_levels_shift_by_sqrt2_g() {
        let g = 4.0;
        let atom = AtomSpec::degenerate(g, 1.0, 1.0);
        let basis = build_basis(&atom, 2).unwrap();
        let h = build_hamiltonian(&atom, &basis).unwrap();
        let levels = eigenlevels(&h, &basis, 2).unwrap();
        assert!((levels[0].0.re + 2f64.sqrt() * g).abs() < 1e-12);
        assert!((levels[1].0.re - 2f64.sqrt() * g).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_levels() {
        let atom = AtomSpec::degenerate(3.0, 1.0, 1.0);
        let basis = build_basis(&atom, 2).unwrap();
        let h = build_hamiltonian(&atom, &basis).unwrap();
        let heff = effective_hamiltonian(&h, &basis, &atom.modes).unwrap();
        let levels = eigenlevels(&heff, &basis, 2).unwrap();
        for (lam, v) in &levels {
            let r = &heff.matrix * v - v * *lam;
            assert!(r.norm() < 1e-10);
        }
        assert!(levels[0].0.re <= levels[1].0.re);
    }

    #[test]
    fn invalid_atoms_rejected() {
        let mut atom = AtomSpec::degenerate(1.0, 1.0, 1.0);
        atom.modes.push(ModeSpec::new(ModeLabel::B, 0.0, 1.0, 0.0));
        assert!(atom.validate().is_err());
        let mut atom = AtomSpec::non_degenerate(1.0, 1.0);
        atom.modes[1].label = ModeLabel::A;
        assert!(atom.validate().is_err());
        let atom = AtomSpec::degenerate(-1.0, 1.0, 1.0);
        assert!(atom.validate().is_err());
    }
}
