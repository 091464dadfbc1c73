mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use chi2atom::czgate::{log_spaced, run_cz, sweep_g, GateConfig};
use chi2atom::dynamics::*;
use chi2atom::envelope::{Envelope, EnvelopeKind};
use chi2atom::fock::*;
use chi2atom::ode::{uniform_grid, Tolerance};
use chi2atom::scattering::*;
use chi2atom::storage::*;
use num_complex::Complex64;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn two_excitation_gap(atom: &AtomSpec) -> f64 {
    let basis = build_basis(atom, 2).unwrap();
    let h = build_hamiltonian(atom, &basis).unwrap();
    let levels = eigenlevels(&h, &basis, 2).unwrap();
    levels[levels.len() - 1].0.re - levels[0].0.re
}

fn level_splitting() -> Verdict {
    let mut worst: f64 = 0.0;
    for g in [0.1, 1.0, 10.0] {
        let deg = two_excitation_gap(&AtomSpec::degenerate(g, 0.0, 0.0));
        let nondeg = two_excitation_gap(&AtomSpec::non_degenerate(g, 0.0));
        worst = worst.max((deg / (2.0 * 2f64.sqrt() * g) - 1.0).abs());
        worst = worst.max((nondeg / (2.0 * g) - 1.0).abs());
    }
    Verdict::new(worst < 1e-10, format!("max relative error {worst:.2e}"))
}

fn blockade_spectrum() -> Verdict {
    let scan = |g: f64| {
        let atom = AtomSpec::degenerate(g, 1.0, 1.0);
        let basis = build_basis(&atom, 4).unwrap();
        let det = uniform_grid(-10.0, 10.0, 801);
        let i20 = basis.index_with(&[(ModeLabel::A, 2)]).unwrap();
        let pop = steady_state_scan(&atom, &basis, ModeLabel::A, 0.2, &det, i20).unwrap();
        (find_peaks(&det, &pop), pop[400])
    };
    let (p4, c4) = scan(4.0);
    let (p8, c8) = scan(8.0);
    if p4.len() != 2 || p8.len() != 2 {
        return Verdict::new(false, format!("peak counts {} and {}", p4.len(), p8.len()));
    }
    let ratio = (p8[1].0 - p8[0].0) / (p4[1].0 - p4[0].0);
    let suppression = [p4[0].1, p4[1].1].iter().fold(f64::INFINITY, |m, &v| m.min(v)) / c4;
    let suppression = suppression.min([p8[0].1, p8[1].1].iter().fold(f64::INFINITY, |m, &v| m.min(v)) / c8);
    Verdict::new(
        (ratio - 2.0).abs() <= 0.1 && suppression >= 5.0,
        format!("separation ratio {ratio:.4}, suppression {suppression:.1}x"),
    )
}

fn rabi_period() -> Verdict {
    let atom = AtomSpec::degenerate(80.0, 1.0, 1.0);
    let basis = build_basis(&atom, 3).unwrap();
    let t = uniform_grid(0.0, 2.0, 4001);
    let i10 = basis.index_with(&[(ModeLabel::A, 1)]).unwrap();
    let period = |eps: f64| {
        let tr = driven_no_jump(&atom, &basis, ModeLabel::A, eps, &t, Tolerance::default()).unwrap();
        let p: Vec<f64> = tr.populations.iter().map(|p| p[i10]).collect();
        oscillation_period(&t, &p)
    };
    match (period(10.0), period(20.0)) {
        (Some(a), Some(b)) => {
            let r = b / a;
            Verdict::new((r - 0.5).abs() <= 0.02, format!("periods {a:.5} and {b:.5}, ratio {r:.4}"))
        }
        _ => Verdict::new(false, "no oscillation found"),
    }
}

fn scattering_oracle() -> Verdict {
    let p = ScatterParams::fig2();
    let input = JointSpectrum::gaussian(0.0, 0.5, 4.0, 201).unwrap();
    let analytic = scatter_joint_spectrum(&input, &p).unwrap();
    let grid = TimeGrid {
        t_start: -14.0,
        t_end: 16.0,
        points: 1201,
    };
    let tol = Tolerance { rtol: 1e-10, atol: 1e-13 };
    let oracle = time_domain_oracle(&input, &p, &grid, tol).unwrap();
    let d = analytic.distance(&oracle.spectrum).unwrap();

    let axis = input.p.clone();
    let x: Vec<Complex64> = axis.iter().map(|&k| Complex64::new((-k * k / 0.5).exp(), 0.0)).collect();
    let y = single_photon_oracle(&axis, &x, &p, &grid, tol).unwrap();
    let single = axis
        .iter()
        .zip(&x)
        .zip(&y)
        .map(|((&k, &xi), &yi)| (yi - single_photon_t(k, &p) * xi).norm())
        .fold(0.0, f64::max);

    let lossless = ScatterParams { kappa_a0: 0.0, ..p };
    let t0 = single_photon_t(lossless.omega_a, &lossless);
    let exact = t0 == Complex64::new(-1.0, 0.0);
    Verdict::new(
        d < 1e-3 && single < 1e-6 && exact,
        format!("L2 distance {d:.3e}, single-photon error {single:.3e}, lossless t = {t0}"),
    )
}

fn entanglement() -> Verdict {
    let input = JointSpectrum::gaussian(0.0, 0.5, 4.0, 201).unwrap();
    let out = scatter_joint_spectrum(&input, &ScatterParams::fig2()).unwrap();
    let (k_in, k_out) = (input.schmidt_number(), out.schmidt_number());
    Verdict::new(
        (k_in - 1.0).abs() <= 1e-6 && k_out > 1.1,
        format!("Schmidt number in {k_in:.9}, out {k_out:.4}"),
    )
}

fn storage() -> Verdict {
    let lossless = AntennaParams {
        kappa_d0: 1.0,
        kappa_d1: 1000.0,
        kappa_b: 0.0,
        omega_max: None,
    };
    let input = Envelope::truncated_gaussian(0.0, 1.0, 4001).unwrap();
    let w = optimal_storage_drive(&input, lossless.kappa_d(), lossless.omega_cap()).unwrap();
    let eta_s = simulate_storage(&input, &w, &lossless, Tolerance::default())
        .unwrap()
        .eta_s
        .unwrap();

    let lossy = AntennaParams {
        kappa_d0: 3.0,
        kappa_d1: 50.0,
        kappa_b: 0.0,
        omega_max: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut excess: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let c: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0))).collect();
        let w = Envelope::from_fn(0.0, 1.0, 401, EnvelopeKind::Drive, |t| {
            c.iter()
                .enumerate()
                .map(|(k, (a, b))| Complex64::new(*a, *b) * ((k + 1) as f64 * 3.0 * t).sin())
                .sum()
        })
        .unwrap();
        let eta = simulate_retrieval(&w, &lossy, Tolerance::default()).unwrap().eta_r.unwrap();
        excess = excess.max(eta - lossy.efficiency_bound());
    }

    let n = 4001;
    let f = |g: &dyn Fn(f64) -> f64| {
        Envelope::from_fn(0.0, 1.0, n, EnvelopeKind::Photon, |t| Complex64::new(g(t), 0.0))
            .unwrap()
            .normalized()
            .unwrap()
    };
    let pi = std::f64::consts::PI;
    let shapes = [
        Envelope::truncated_gaussian(0.0, 1.0, n).unwrap(),
        f(&|t| (pi * t).sin().powi(2)),
        f(&|t| t * t * (1.0 - t).powi(3)),
        f(&|t| (pi * t).sin() * (1.0 + 0.5 * (6.0 * t).cos())),
        f(&|t| (pi * t).sin().powi(4) * (2.0 - t)),
    ];
    let etas: Vec<f64> = shapes
        .iter()
        .map(|s| {
            let w = optimal_retrieval_drive(s, lossless.kappa_d(), 1e3 * lossless.kappa_d()).unwrap();
            simulate_retrieval(&w, &lossless, Tolerance::default()).unwrap().eta_r.unwrap()
        })
        .collect();
    let spread = etas.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - etas.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    Verdict::new(
        (eta_s - 0.999).abs() <= 0.001 && excess <= 1e-6 && spread <= 1e-4,
        format!("eta_s {eta_s:.6}, worst excess over bound {excess:.3e}, shape spread {spread:.3e}"),
    )
}

fn cz_gate() -> Verdict {
    let cfg = GateConfig::default();
    let r = match run_cz(&cfg) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, format!("run_cz failed: {e}")),
    };
    let dphi = (r.phi_cond.rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI).abs();
    let g = log_spaced(1.0, 200.0, 10);
    let rows = match sweep_g(&cfg, &g) {
        Ok(rows) => rows,
        Err(e) => return Verdict::new(false, format!("sweep failed: {e}")),
    };
    let f: Vec<f64> = rows.iter().map(|r| r.f_ps).collect();
    let monotone = f.windows(2).all(|w| w[1] >= w[0]);
    let crossing = rows.iter().find(|r| r.f_ps >= 0.99).map(|r| r.g);
    let listing: Vec<String> = rows.iter().map(|r| format!("{:.3}:{:.3}", r.g, r.f_ps)).collect();
    Verdict::new(
        r.f_ps >= 0.98 && dphi <= 0.05 && monotone && crossing.is_some(),
        format!(
            "F_ps(100) {:.4}, |phi - pi| {dphi:.2e}, monotone {monotone}, 0.99 crossing {crossing:?}, sweep [{}]",
            r.f_ps,
            listing.join(" ")
        ),
    )
}

fn properties() -> Verdict {
    let run = |name: &str, f: &dyn Fn(&mut TestRunner) -> Result<(), String>| {
        let mut runner = TestRunner::new(Config {
            cases: 32,
            failure_persistence: None,
            ..Config::default()
        });
        f(&mut runner).map_err(|e| format!("{name}: {e}"))
    };
    let suites: [(&str, &Suite); 6] = [
        ("flux", &|r| {
            r.run(&(common::atom(), 0.3..2.0f64, 1usize..3), |(a, w, n)| {
                common::pulsed_flux_is_conserved(&a, w, n)
            })
            .map_err(|e| e.to_string())
        }),
        ("trace", &|r| {
            r.run(&(common::atom(), 0.0..2.0f64, -3.0..3.0f64), |(a, e, d)| {
                common::lindblad_preserves_trace(&a, e, d)
            })
            .map_err(|e| e.to_string())
        }),
        ("pulsed linearity", &|r| {
            r.run(
                &(common::atom(), common::unit_pair(), common::unit_pair(), -2.0..2.0f64),
                |(a, c1, c2, s)| common::pulsed_output_is_linear(&a, c1, c2, s),
            )
            .map_err(|e| e.to_string())
        }),
        ("scattering linearity", &|r| {
            r.run(&((-2.0..2.0f64, -2.0..2.0f64), -1.0..1.0f64), |(c, mu)| {
                common::scattering_is_linear(c, mu)
            })
            .map_err(|e| e.to_string())
        }),
        ("bijection", &|r| {
            r.run(&(common::labels(), 0usize..6), |(l, n)| common::basis_is_a_bijection(&l, n))
                .map_err(|e| e.to_string())
        }),
        ("block commutation", &|r| {
            r.run(&(common::atom(), 1usize..5), |(a, n)| common::hamiltonian_conserves_blocks(&a, n))
                .map_err(|e| e.to_string())
        }),
    ];
    let failures: Vec<String> = suites.iter().filter_map(|(name, f)| run(name, *f).err()).collect();
    if failures.is_empty() {
        Verdict::new(true, format!("{} suites x 32 cases", suites.len()))
    } else {
        Verdict::new(false, failures.join("; "))
    }
}

type Suite = dyn Fn(&mut TestRunner) -> Result<(), String>;
type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("two-excitation level splitting", Duration::from_secs(1), level_splitting),
        ("blockade spectrum peaks", Duration::from_secs(60), blockade_spectrum),
        ("driven oscillation period", Duration::from_secs(60), rabi_period),
        ("scattering vs time-domain oracle", Duration::from_secs(120), scattering_oracle),
        ("scattering-induced entanglement", Duration::from_secs(60), entanglement),
        ("storage and retrieval", Duration::from_secs(60), storage),
        ("controlled-phase gate", Duration::from_secs(300), cz_gate),
        ("property suites", Duration::from_secs(600), properties),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.2}s of {}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("CHI2ATOM_ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
