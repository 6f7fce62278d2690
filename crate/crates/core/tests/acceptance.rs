//! Acceptance suite: one test per release criterion, each printing a
//! single `[PASS]` line with its headline numbers.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lindblad_resign::eigenflow::{track_frames_with, Gauge, Trajectory};
use lindblad_resign::evolution::{lindblad_rhs, verify_reconstruction};
use lindblad_resign::matrix::{max_norm, DensityState};
use lindblad_resign::models::{jc_exact, JCParams, JCRateReference};
use lindblad_resign::pipeline::{synthesize, PipelineConfig, PipelineError};
use lindblad_resign::synthesis::{Sign, SignPolicy, SingularityMode};

use common::{assert_solves_dense_system, corpus, unitary_trajectory, CORPUS_SPAN};

fn grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt).round() as usize + 1;
    (0..n).map(|k| t0 + dt * k as f64).collect()
}

/// Sample the diagonal JC trajectory without analytic derivatives, so the
/// pipeline exercises its finite-difference path.
fn jc_sampled(params: &JCParams, times: &[f64]) -> Trajectory {
    let states: Vec<DensityState> = times
        .iter()
        .map(|&t| jc_exact(params, t).unwrap())
        .collect();
    Trajectory::new(times.to_vec(), states).unwrap()
}

/// Rates of the sigma_minus-type channel (gamma_1) and sigma_plus-type
/// channel (gamma_2) at each grid point of a 2-dim synthesis.
fn jc_channel_rates(synthesis: &lindblad_resign::pipeline::Synthesis) -> Vec<(f64, f64)> {
    synthesis
        .terms
        .iter()
        .map(|terms| {
            let mut g1 = 0.0;
            let mut g2 = 0.0;
            for term in terms {
                assert_eq!((term.spec.target(), term.spec.source()), (1, 0));
                if term.spec.dagger() {
                    g2 += term.rate;
                } else {
                    g1 += term.rate;
                }
            }
            (g1, g2)
        })
        .collect()
}

#[test]
fn criterion_1_jc_nonnegative_rates() {
    let started = Instant::now();
    let params = JCParams::default();
    let reference = JCRateReference::new(params).unwrap();

    // Decay window: gamma_1 = tan(t/2) active, gamma_2 identically zero.
    let window_a = grid(0.1, 3.0, 1e-3);
    let traj_a = jc_sampled(&params, &window_a);
    let config = PipelineConfig::with_policy(SignPolicy::AllNonnegative);
    let synth_a = synthesize(&traj_a, &config).unwrap();
    let mut worst_g1 = 0.0_f64;
    for ((g1, g2), &t) in jc_channel_rates(&synth_a).iter().zip(&window_a) {
        worst_g1 = worst_g1.max((g1 - (t / 2.0).tan()).abs());
        assert!(g2.abs() <= 1e-10, "gamma_2 = {g2} should vanish at t = {t}");
    }
    assert!(
        worst_g1 <= 1e-5,
        "gamma_1 deviates from tan(t/2) by {worst_g1:.3e}"
    );

    // Revival window: gamma_2 = alpha(t) active, gamma_1 identically zero.
    let window_b = grid(3.3, 6.1, 1e-3);
    let traj_b = jc_sampled(&params, &window_b);
    let synth_b = synthesize(&traj_b, &config).unwrap();
    let mut worst_g2 = 0.0_f64;
    for ((g1, g2), &t) in jc_channel_rates(&synth_b).iter().zip(&window_b) {
        worst_g2 = worst_g2.max((g2 - reference.alpha(t)).abs());
        assert!(g1.abs() <= 1e-10, "gamma_1 = {g1} should vanish at t = {t}");
    }
    assert!(
        worst_g2 <= 1e-5,
        "gamma_2 deviates from alpha(t) by {worst_g2:.3e}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "criterion 1 took {elapsed:?}");
    println!(
        "[PASS] criterion 1: JC nonnegative rates; max|gamma_1 - tan(t/2)| = {worst_g1:.2e}, \
         max|gamma_2 - alpha| = {worst_g2:.2e}, elapsed {elapsed:?}"
    );
}

#[test]
fn criterion_2_jc_nonpositive_rates() {
    let params = JCParams::default();
    let reference = JCRateReference::new(params).unwrap();
    let config = PipelineConfig::with_policy(SignPolicy::AllNonpositive);

    // Inside (0, pi): gamma_2 = alpha(t) <= 0 carries the decay.
    let window_a = grid(0.1, 3.0, 1e-3);
    let synth_a = synthesize(&jc_sampled(&params, &window_a), &config).unwrap();
    let mut worst_a = 0.0_f64;
    for ((g1, g2), &t) in jc_channel_rates(&synth_a).iter().zip(&window_a) {
        assert!(
            *g1 <= 1e-12 && *g2 <= 1e-12,
            "nonpositive policy violated at t = {t}"
        );
        assert!(
            g1.abs() <= 1e-10,
            "gamma_1 should vanish inside (0, pi), got {g1} at {t}"
        );
        worst_a = worst_a.max((g2 - reference.alpha(t)).abs());
    }
    assert!(
        worst_a <= 1e-5,
        "gamma_2 deviates from alpha(t) by {worst_a:.3e}"
    );

    // Inside (pi, 2 pi): gamma_1 = tan(t/2) <= 0 carries the revival.
    let window_b = grid(3.3, 6.1, 1e-3);
    let synth_b = synthesize(&jc_sampled(&params, &window_b), &config).unwrap();
    let mut worst_b = 0.0_f64;
    for ((g1, g2), &t) in jc_channel_rates(&synth_b).iter().zip(&window_b) {
        assert!(
            *g1 <= 1e-12 && *g2 <= 1e-12,
            "nonpositive policy violated at t = {t}"
        );
        assert!(
            g2.abs() <= 1e-10,
            "gamma_2 should vanish inside (pi, 2pi), got {g2} at {t}"
        );
        worst_b = worst_b.max((g1 - (t / 2.0).tan()).abs());
    }
    assert!(
        worst_b <= 1e-5,
        "gamma_1 deviates from tan(t/2) by {worst_b:.3e}"
    );

    println!(
        "[PASS] criterion 2: JC nonpositive rates; max deviation {:.2e}",
        worst_a.max(worst_b)
    );
}

fn policies_for(dim: usize, index: usize) -> Vec<SignPolicy> {
    let mut rng = ChaCha8Rng::seed_from_u64(7919 * index as u64 + 13);
    let random: Vec<Sign> = (0..dim - 1)
        .map(|_| {
            if rng.random_bool(0.5) {
                Sign::NonNegative
            } else {
                Sign::NonPositive
            }
        })
        .collect();
    vec![
        SignPolicy::AllNonnegative,
        SignPolicy::AllNonpositive,
        SignPolicy::PerRound(random),
    ]
}

#[test]
fn criterion_3_arbitrary_sign_freedom() {
    let started = Instant::now();
    let mut runs = 0usize;
    for (index, item) in corpus().iter().enumerate() {
        for policy in policies_for(item.dim, index) {
            let config = PipelineConfig::with_policy(policy.clone());
            let synthesis = synthesize(&item.coarse, &config)
                .unwrap_or_else(|e| panic!("trajectory {index} failed under {policy:?}: {e}"));
            for (point, terms) in synthesis.terms.iter().enumerate() {
                assert!(
                    terms.len() < item.dim,
                    "trajectory {index} point {point}: {} terms exceed d-1",
                    terms.len()
                );
                for (round, term) in terms.iter().enumerate() {
                    let sign_ok = match &policy {
                        SignPolicy::AllNonnegative => term.rate >= -1e-12,
                        SignPolicy::AllNonpositive => term.rate <= 1e-12,
                        SignPolicy::PerRound(signs) => match signs[round] {
                            Sign::NonNegative => term.rate >= -1e-12,
                            Sign::NonPositive => term.rate <= 1e-12,
                        },
                    };
                    assert!(
                        sign_ok,
                        "trajectory {index} point {point} round {round}: rate {} breaks {policy:?}",
                        term.rate
                    );
                }
            }
            runs += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 3 took {elapsed:?}");
    println!(
        "[PASS] criterion 3: arbitrary sign freedom; {runs} synthesis runs, 100% sign \
         compliance, elapsed {elapsed:?}"
    );
}

#[test]
fn criterion_4_exactness_of_compensation() {
    let mut points_checked = 0usize;
    for (index, item) in corpus().iter().enumerate() {
        for policy in policies_for(item.dim, index) {
            let config = PipelineConfig::with_policy(policy.clone());
            let synthesis = synthesize(&item.coarse, &config).unwrap();
            for (n, terms) in synthesis.terms.iter().enumerate() {
                let p: Vec<f64> = synthesis.frames[n].eigenvalues.iter().copied().collect();
                let f: Vec<f64> = synthesis.flows[n].rates.iter().copied().collect();
                assert_solves_dense_system(
                    &p,
                    &f,
                    terms,
                    &format!("trajectory {index}, {policy:?}, point {n}"),
                );
                points_checked += 1;
            }
        }
    }
    println!(
        "[PASS] criterion 4: compensation exact against the dense least-squares oracle at \
         {points_checked} grid points"
    );
}

#[test]
fn criterion_5_closed_loop_reconstruction() {
    let mut ratios = Vec::new();
    let mut worst_coarse = 0.0_f64;
    for (index, item) in corpus().iter().enumerate() {
        for policy in policies_for(item.dim, index) {
            let config = PipelineConfig::with_policy(policy.clone());
            let synth_coarse = synthesize(&item.coarse, &config).unwrap();
            let report_coarse =
                verify_reconstruction(&item.coarse, &synth_coarse.generator, 1, &[]).unwrap();
            assert!(
                report_coarse.max_state_error <= 1e-4,
                "trajectory {index} under {policy:?}: coarse state error {:.3e}",
                report_coarse.max_state_error
            );
            worst_coarse = worst_coarse.max(report_coarse.max_state_error);

            let synth_fine = synthesize(&item.fine, &config).unwrap();
            let report_fine =
                verify_reconstruction(&item.fine, &synth_fine.generator, 1, &[]).unwrap();
            if report_fine.max_state_error > 1e-13 {
                ratios.push(report_coarse.max_state_error / report_fine.max_state_error);
            }
        }
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = ratios[ratios.len() / 2];
    assert!(
        (3.0..=6.0).contains(&median),
        "median step-halving improvement {median:.2} outside the order-2 band [3, 6]"
    );
    println!(
        "[PASS] criterion 5: closed-loop reconstruction; worst coarse error {worst_coarse:.2e}, \
         median halving ratio {median:.2}"
    );
}

#[test]
fn criterion_6_structural_invariants() {
    let config = PipelineConfig::with_policy(SignPolicy::AllNonnegative);
    let mut worst_herm = 0.0_f64;
    let mut worst_trace = 0.0_f64;
    let mut worst_h = 0.0_f64;
    let mut worst_offdiag = 0.0_f64;
    let mut worst_hs_excess = f64::NEG_INFINITY;
    let mut worst_drift_rate = 0.0_f64;
    for item in corpus() {
        let synthesis = synthesize(&item.coarse, &config).unwrap();

        // Raw-gauge Hamiltonians for the Hilbert-Schmidt comparison.
        let raw_frames = track_frames_with(&item.coarse, Gauge::Raw).unwrap();

        for n in 0..item.coarse.len() {
            let rho = item.coarse.states()[n].matrix();
            let point = &synthesis.generator.points()[n];
            let rhs = lindblad_rhs(rho, &point.hamiltonian, &point.terms).unwrap();
            let scale = max_norm(&rhs).max(1.0);
            worst_herm = worst_herm.max(max_norm(&(&rhs - rhs.adjoint())) / scale);
            worst_trace = worst_trace.max(rhs.trace().norm() / scale);

            let h = &synthesis.hamiltonians[n];
            worst_h = worst_h.max(max_norm(&(h - h.adjoint())));

            worst_offdiag = worst_offdiag.max(synthesis.flows[n].offdiag_residual);

            let h_raw = lindblad_resign::eigenflow::build_hamiltonian(&raw_frames, n).unwrap();
            let opt_norm = (h * h).trace().re;
            let raw_norm = (&h_raw * &h_raw).trace().re;
            worst_hs_excess = worst_hs_excess.max(opt_norm - raw_norm);
        }

        let report = verify_reconstruction(&item.coarse, &synthesis.generator, 1, &[]).unwrap();
        worst_drift_rate = worst_drift_rate.max(report.trace_drift / CORPUS_SPAN);
    }
    assert!(
        worst_herm <= 1e-12,
        "rhs Hermiticity residual {worst_herm:.3e}"
    );
    assert!(worst_trace <= 1e-12, "rhs trace residual {worst_trace:.3e}");
    assert!(
        worst_h <= 1e-6,
        "Hamiltonian Hermiticity residual {worst_h:.3e}"
    );
    assert!(
        worst_hs_excess <= 1e-8,
        "phase-fixed Hamiltonian exceeds raw-gauge Hilbert-Schmidt norm by {worst_hs_excess:.3e}"
    );
    assert!(
        worst_offdiag <= 1e-6,
        "frame off-diagonal residual {worst_offdiag:.3e}"
    );
    assert!(
        worst_drift_rate <= 1e-9,
        "trace drift {worst_drift_rate:.3e} per unit time"
    );
    println!(
        "[PASS] criterion 6: structural invariants; rhs hermiticity {worst_herm:.1e}, \
         off-diagonal {worst_offdiag:.1e}, HS excess {worst_hs_excess:.1e}, \
         drift/time {worst_drift_rate:.1e}"
    );
}

#[test]
fn criterion_7_unitary_null_case() {
    let config = PipelineConfig::with_policy(SignPolicy::AllNonnegative);
    let mut cases = Vec::new();
    // Built-in precession model at two frequencies, analytic derivatives.
    for (seed, omega) in [(1u64, 0.7), (2, 2.0)] {
        let model = lindblad_resign::models::library_model("unitary", &{
            let mut m = std::collections::BTreeMap::new();
            m.insert("omega".to_string(), omega);
            m
        })
        .unwrap();
        let times = grid(0.0, 1.5, 1e-3);
        cases.push((
            format!("unitary omega={omega}"),
            lindblad_resign::models::sample_model(model.as_ref(), &times).unwrap(),
        ));
        let _ = seed;
    }
    // Random dense unitary dynamics in d = 3.
    for seed in [11u64, 12, 13] {
        cases.push((
            format!("random d=3 seed={seed}"),
            unitary_trajectory(seed, 3, 1e-3, 1501),
        ));
    }

    let mut worst_rate = 0.0_f64;
    let mut worst_rhs = 0.0_f64;
    for (label, traj) in &cases {
        let synthesis = synthesize(traj, &config).unwrap();
        for terms in &synthesis.terms {
            for term in terms {
                worst_rate = worst_rate.max(term.rate.abs());
            }
        }
        // The synthesized H need not equal the generating Hamiltonian,
        // but the master equation it defines must reproduce the motion.
        let derivs = traj.state_derivatives();
        for (n, point) in synthesis.generator.points().iter().enumerate() {
            let rhs =
                lindblad_rhs(traj.states()[n].matrix(), &point.hamiltonian, &point.terms).unwrap();
            worst_rhs = worst_rhs.max(max_norm(&(rhs - &derivs[n])));
        }
        assert!(
            worst_rate <= 1e-10,
            "{label}: rate magnitude {worst_rate:.3e}"
        );
    }
    assert!(worst_rhs <= 1e-4, "unitary rhs mismatch {worst_rhs:.3e}");
    println!(
        "[PASS] criterion 7: unitary null case; max rate {worst_rate:.1e}, \
         max rhs mismatch {worst_rhs:.1e}"
    );
}

#[test]
fn criterion_8_singularity_behavior() {
    let params = JCParams::default();
    let times = grid(2.6, 3.7, 1e-3);
    let traj = jc_sampled(&params, &times);

    // Error mode: the tan(t/2) rate diverges as t -> pi from below; the
    // pipeline must refuse and locate the singular stretch around pi.
    let mut config = PipelineConfig::with_policy(SignPolicy::AllNonnegative);
    config.eps_p = 1e-6;
    match synthesize(&traj, &config) {
        Err(PipelineError::SingularRates { intervals, first }) => {
            assert!(
                intervals.iter().any(|&(a, b)| a <= PI && PI <= b),
                "no reported interval contains pi: {intervals:?}"
            );
            assert!((first.t - PI).abs() < 0.05);
        }
        other => panic!("expected SingularRates, got {other:?}"),
    }

    // Cap mode: completes, flags the capped stretch around pi, and the
    // report marks it excluded.
    config.singularity = SingularityMode::Cap(50.0);
    let synthesis = synthesize(&traj, &config).unwrap();
    assert!(
        synthesis
            .capped_intervals
            .iter()
            .any(|&(a, b)| a <= PI && PI <= b),
        "no capped interval contains pi: {:?}",
        synthesis.capped_intervals
    );
    assert!(synthesis.flux_deficit > 0.0);
    for terms in &synthesis.terms {
        for term in terms {
            assert!(term.rate.abs() <= 50.0 + 1e-12);
        }
    }
    let report =
        verify_reconstruction(&traj, &synthesis.generator, 1, &synthesis.capped_intervals).unwrap();
    assert!(!report.excluded_intervals.is_empty());
    assert!(report.residuals.iter().any(|r| r.excluded));
    println!(
        "[PASS] criterion 8: singularity behavior; error mode reports {:?}, cap mode flags {:?}",
        "interval around pi", synthesis.capped_intervals
    );
}
