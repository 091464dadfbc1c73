#![allow(dead_code, clippy::needless_range_loop)]

use chi2atom::dynamics::*;
use chi2atom::envelope::{Envelope, EnvelopeKind};
use chi2atom::fock::*;
use chi2atom::ode::{uniform_grid, Tolerance};
use chi2atom::scattering::{scatter_joint_spectrum, single_photon_t, JointSpectrum, ScatterParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = Result<(), TestCaseError>;

pub fn labels() -> impl Strategy<Value = Vec<ModeLabel>> {
    proptest::sample::subsequence(vec![ModeLabel::A, ModeLabel::B, ModeLabel::C, ModeLabel::D], 1..=4)
}

pub fn atom() -> impl Strategy<Value = AtomSpec> {
    (
        any::<bool>(),
        0.0..20.0f64,
        prop::array::uniform4((-3.0..3.0f64, 0.0..2.0f64, 0.0..2.0f64)),
    )
        .prop_map(|(deg, g, m)| {
            let names = if deg {
                vec![ModeLabel::A, ModeLabel::C]
            } else {
                vec![ModeLabel::A, ModeLabel::B, ModeLabel::C]
            };
            let modes = names.iter().zip(m).map(|(&l, (d, k0, k1))| ModeSpec::new(l, d, k0, k1)).collect();
            AtomSpec {
                kind: if deg { AtomKind::Degenerate } else { AtomKind::NonDegenerate },
                g,
                modes,
            }
        })
}

pub fn unit_pair() -> impl Strategy<Value = (f64, f64)> {
    (-1.0..1.0f64, -1.0..1.0f64)
}

fn comm(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a * b - b * a
}

pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn basis_is_a_bijection(labels: &[ModeLabel], n_max: usize) -> Check {
    let b = FockBasis::new(labels, n_max).unwrap();
    let weights: Vec<usize> = b.labels().iter().map(|l| l.weight()).collect();
    let mut count = 0;
    let mut occ = vec![0usize; labels.len()];
    // odometer over all occupation tuples with block <= n_max
    'outer: loop {
        let block: usize = occ.iter().zip(&weights).map(|(n, w)| n * w).sum();
        if block <= n_max {
            count += 1;
            let i = b.index_of(&occ).expect("enumerated state must be indexed");
            prop_assert_eq!(b.state(i), occ.as_slice());
            prop_assert_eq!(b.block(i), block);
        } else {
            prop_assert!(b.index_of(&occ).is_none());
        }
        for k in 0..occ.len() {
            occ[k] += 1;
            if occ[k] <= n_max + 1 {
                continue 'outer;
            }
            occ[k] = 0;
        }
        break;
    }
    prop_assert_eq!(count, b.len());
    for i in 0..b.len() {
        prop_assert_eq!(b.index_of(b.state(i)), Some(i));
    }
    Ok(())
}

pub fn hamiltonian_conserves_blocks(atom: &AtomSpec, n_max: usize) -> Check {
    let basis = build_basis(atom, n_max).unwrap();
    let h = build_hamiltonian(atom, &basis).unwrap();
    prop_assert!(h.hermiticity_defect() < 1e-12);
    let mut n = DMatrix::from_element(basis.len(), basis.len(), Complex64::new(0.0, 0.0));
    for l in basis.labels() {
        n += basis.number_operator(*l).unwrap() * Complex64::new(l.weight() as f64, 0.0);
    }
    prop_assert!(max_abs(&comm(&h.matrix, &n)) < 1e-12 * (1.0 + atom.g));
    for k in 0..=n_max {
        let p = basis.block_projector(k);
        prop_assert!(max_abs(&comm(&h.matrix, &p)) < 1e-12 * (1.0 + atom.g));
    }
    Ok(())
}

pub fn ladder_commutator(labels: &[ModeLabel], n_max: usize) -> Check {
    let b = FockBasis::new(labels, n_max).unwrap();
    for &l in b.labels() {
        let a = b.normal_ordered(&[], &[l]).unwrap();
        let c = comm(&a, &a.adjoint());
        for i in 0..b.len() {
            if b.block(i) + l.weight() <= n_max {
                let v = &c * b.basis_vector(i);
                prop_assert!((v - b.basis_vector(i)).norm() < 1e-12);
            }
        }
    }
    Ok(())
}

pub fn lindblad_preserves_trace(atom: &AtomSpec, eps: f64, det: f64) -> Check {
    let basis = build_basis(atom, 2).unwrap();
    let h = driven_hamiltonian(
        atom,
        &basis,
        &DriveSpec {
            mode: ModeLabel::A,
            amplitude: eps,
            detuning: det,
        },
    )
    .unwrap();
    let rho0 = DensityMatrix::pure(&basis.vacuum(), 0.0);
    let t = uniform_grid(0.0, 20.0, 41);
    let tr = evolve_lindblad(&h, &basis, &atom_rates(atom), &rho0, &t, Tolerance::default()).unwrap();
    if let Snapshots::Mixed(states) = &tr.snapshots {
        for s in states {
            prop_assert!((s.trace() - 1.0).norm() < 1e-8);
            prop_assert!(s.hermiticity_defect() < 1e-10);
        }
    } else {
        prop_assert!(false, "expected density matrices");
    }
    Ok(())
}

pub fn pulsed_flux_is_conserved(atom: &AtomSpec, width: f64, photons: usize) -> Check {
    let basis = build_basis(atom, 2 * photons).unwrap();
    let env = Envelope::from_fn(-8.0 * width, 8.0 * width, 401, EnvelopeKind::Photon, |t| {
        Complex64::new((-t * t / (2.0 * width * width)).exp(), 0.0)
    })
    .unwrap()
    .normalized()
    .unwrap();
    let sys = PulsedSystem::for_atom(atom, &basis, ModeLabel::A, Some(env), photons).unwrap();
    let t = uniform_grid(-8.0 * width, 8.0 * width + 10.0, 200);
    let r = evolve_pulsed(&sys, &basis.vacuum(), &t, Tolerance::default()).unwrap();
    prop_assert!(r.balance_defect().abs() < 1e-5, "{}", r.balance_defect());
    Ok(())
}

pub fn pulsed_output_is_linear(atom: &AtomSpec, c1: (f64, f64), c2: (f64, f64), shift: f64) -> Check {
    let basis = build_basis(atom, 2).unwrap();
    let grid = |f: &dyn Fn(f64) -> Complex64| Envelope::from_fn(-10.0, 10.0, 401, EnvelopeKind::Photon, f).unwrap();
    let f1 = |t: f64| Complex64::new((-t * t / 2.0).exp(), 0.0);
    let f2 = move |t: f64| Complex64::new(0.0, (-(t - shift) * (t - shift)).exp() * t);
    let (a, b) = (Complex64::new(c1.0, c1.1), Complex64::new(c2.0, c2.1));
    let t = uniform_grid(-10.0, 14.0, 121);
    let out = |e: Envelope, psi: &DVector<Complex64>| {
        let sys = PulsedSystem::for_atom(atom, &basis, ModeLabel::A, Some(e), 1).unwrap();
        let r = evolve_pulsed(&sys, psi, &t, Tolerance { rtol: 1e-12, atol: 1e-15 }).unwrap();
        r.output_amplitude(0, &basis.vacuum())
    };
    let vac = basis.vacuum();
    let o1 = out(grid(&f1), &vac);
    let o2 = out(grid(&f2), &vac);
    let o12 = out(grid(&|t| a * f1(t) + b * f2(t)), &vac);
    let scale = o1.iter().chain(&o2).map(|v| v.norm()).fold(1e-300, f64::max);
    for k in 0..t.len() {
        prop_assert!((o12[k] - (a * o1[k] + b * o2[k])).norm() < 1e-8 * scale);
    }
    // and in the initial atom state, at fixed envelope
    let e1 = basis.basis_vector(basis.index_with(&[(ModeLabel::A, 1)]).unwrap());
    let mix = &vac * a + &e1 * b;
    let p = out(grid(&f1), &vac);
    let q = out(grid(&f1), &e1);
    let m = out(grid(&f1), &mix);
    for k in 0..t.len() {
        prop_assert!((m[k] - (a * p[k] + b * q[k])).norm() < 1e-8 * scale.max(1.0));
    }
    Ok(())
}

pub fn lossless_transmission_is_unimodular(k: f64, w: f64, k1: f64) -> Check {
    let p = ScatterParams {
        omega_a: w,
        kappa_a0: 0.0,
        kappa_a1: k1,
        ..ScatterParams::fig2()
    };
    prop_assert!((single_photon_t(k, &p).norm() - 1.0).abs() < 1e-14);
    Ok(())
}

pub fn scattering_is_linear(c: (f64, f64), mu: f64) -> Check {
    let a = JointSpectrum::gaussian(0.0, 0.5, 3.0, 16).unwrap();
    let u: Vec<f64> = a.p.iter().map(|x| (-(x - mu).powi(2) / 0.18).exp() * x).collect();
    let b = JointSpectrum::new(
        a.p.clone(),
        DMatrix::from_fn(16, 16, |i, j| Complex64::new(u[i] * u[j], u[i] - u[j])),
    )
    .unwrap();
    let z = Complex64::new(c.0, c.1);
    let sum = JointSpectrum::new(a.p.clone(), &a.amp + &b.amp * z).unwrap();
    let p = ScatterParams::fig2();
    let (oa, ob, os) = (
        scatter_joint_spectrum(&a, &p).unwrap(),
        scatter_joint_spectrum(&b, &p).unwrap(),
        scatter_joint_spectrum(&sum, &p).unwrap(),
    );
    let d = &os.amp - (&oa.amp + &ob.amp * z);
    prop_assert!(max_abs(&d) < 1e-12 * (1.0 + max_abs(&os.amp)));
    Ok(())
}

pub fn envelope_csv_round_trip(v: &[(f64, f64)], t0: f64, dt: f64) -> Check {
    let e = Envelope::new(t0, dt, v.iter().map(|&(r, i)| Complex64::new(r, i)).collect(), EnvelopeKind::Drive).unwrap();
    let mut buf = Vec::new();
    e.write_csv(&mut buf).unwrap();
    let back = Envelope::read_csv(buf.as_slice()).unwrap();
    prop_assert_eq!(back.samples, e.samples);
    prop_assert!((back.t0 - e.t0).abs() <= 1e-12 * e.t0.abs().max(1.0));
    Ok(())
}
