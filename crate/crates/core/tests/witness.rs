use approx::assert_abs_diff_eq;
use hdent::etwitness::*;
use hdent::qstate::{NoisyState, Pairing, SchmidtState};
use hdent::tagstream::*;
use hdent::C64;
use proptest::prelude::*;

/// Closed form for the isotropic state: each term is `p/d - (1-p)/d^2`.
fn isotropic_oracle(d: usize, f: usize, p: f64) -> f64 {
    let d_f = d as f64;
    (d - f) as f64 * (p / d_f - (1.0 - p) / (d_f * d_f)) / (d_f - 1.0).sqrt()
}

fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn expected_pair(d: usize, p: f64, phase: f64, n_pairs: f64) -> (CountMatrixSet, CountMatrixSet) {
    let clock = ClockConfig::new(1, 8 * d as u32, 8).unwrap();
    let binning = BinningConfig::new(&clock, d).unwrap();
    let mut model = SourceModel::ideal(d, Basis::HV).unwrap();
    model.p_mix = p;
    model.franson_phase = phase;
    let hv = expected_count_matrices(&model, &binning, n_pairs).unwrap().rounded();
    model.basis = Basis::DA;
    let da = expected_count_matrices(&model, &binning, n_pairs).unwrap().rounded();
    (hv, da)
}

proptest! {
    #[test]
    fn exact_witness_matches_closed_form(d in 3usize..40, f in 1usize..4, p in 0.0f64..=1.0) {
        prop_assume!(f < d);
        let w = witness_exact(&NoisyState::isotropic(d, p).unwrap(), f).unwrap();
        prop_assert!((w - isotropic_oracle(d, f, p)).abs() < 1e-12);
    }

    #[test]
    fn materialized_matches_analytic(d in 2usize..7, p in 0.0f64..=1.0, phases in prop::collection::vec(0.0f64..6.3, 6)) {
        let c: Vec<C64> = (0..d).map(|j| C64::from_polar(1.0 + j as f64 * 0.1, phases[j])).collect();
        let s = NoisyState::new(SchmidtState::normalized(c, Pairing::Correlated).unwrap(), p).unwrap();
        let rho = s.materialize().unwrap();
        for f in 1..d {
            prop_assert!((witness_exact(&s, f).unwrap() - witness_materialized(&rho, f).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn product_states_are_never_witnessed(d in 3usize..20, j in 0usize..20, f in 1usize..3, p in 0.0f64..=1.0) {
        prop_assume!(f < d);
        let s = NoisyState::new(SchmidtState::product(d, j % d, Pairing::Correlated).unwrap(), p).unwrap();
        prop_assert!(witness_exact(&s, f).unwrap() <= 1e-15);
    }
}

#[test]
fn isotropic_root_is_one_over_d_plus_one() {
    for d in [4usize, 10, 20] {
        let root = bisect(0.0, 1.0, |p| witness_exact(&NoisyState::isotropic(d, p).unwrap(), 1).unwrap());
        assert_abs_diff_eq!(root, 1.0 / (d as f64 + 1.0), epsilon = 1e-9);
    }
}

#[test]
fn phi_plus_value_at_unit_shift() {
    for d in [4usize, 10, 20, 80] {
        let w = witness_exact(&NoisyState::isotropic(d, 1.0).unwrap(), 1).unwrap();
        let expect = (d - 1) as f64 / (d as f64 * ((d - 1) as f64).sqrt());
        assert_abs_diff_eq!(w, expect, epsilon = 1e-12);
    }
}

#[test]
fn counts_track_exact_witness_along_p() {
    let d = 12;
    let f = 1;
    for p in [0.2, 0.5, 0.9] {
        let (hv, da) = expected_pair(d, p, 0.0, 1e9);
        let r = witness_from_counts(&hv, &da, d, f, 1.0).unwrap();
        let kept = r.n1 / 1e9;
        let exact = witness_exact_over(&NoisyState::isotropic(d, p).unwrap(), f, d - 2 * f).unwrap();
        assert_abs_diff_eq!(r.narrow.value * kept, exact, epsilon = 1e-6);
        assert_eq!(r.certified, p > 1.0 / (d as f64 + 1.0));
    }
}

#[test]
fn franson_phase_pi_destroys_certification() {
    let (hv, da) = expected_pair(10, 1.0, std::f64::consts::PI, 1e8);
    let r = witness_from_counts(&hv, &da, 10, 1, 1.0).unwrap();
    assert!(!r.certified);
    assert!(r.coherence_sum < 0.0);
}

#[test]
fn hwp_efficiency_rescales_coherences() {
    let (hv, da) = expected_pair(10, 0.8, 0.0, 1e8);
    let a = witness_from_counts(&hv, &da, 10, 1, 1.0).unwrap();
    let b = witness_from_counts(&hv, &da, 10, 1, 0.9).unwrap();
    assert_abs_diff_eq!(b.coherence_sum, a.coherence_sum / 0.81, epsilon = 1e-12);
    assert_abs_diff_eq!(b.penalty_sum, a.penalty_sum, epsilon = 1e-15);
    assert!(witness_from_counts(&hv, &da, 10, 1, 0.0).is_err());
    assert!(witness_from_counts(&hv, &da, 10, 1, 1.5).is_err());
}

#[test]
fn swapped_or_mismatched_inputs_rejected() {
    let (hv, da) = expected_pair(10, 1.0, 0.0, 1e6);
    assert!(witness_from_counts(&da, &hv, 10, 1, 1.0).is_err());
    assert!(witness_from_counts(&hv, &da, 20, 2, 1.0).is_err());
    let empty = CountMatrixSet::empty(10, 1, Basis::DA);
    assert!(witness_from_counts(&hv, &empty, 10, 1, 1.0).is_err());
}

#[test]
fn report_serializes_with_named_fields() {
    let (hv, da) = expected_pair(10, 1.0, 0.0, 1e6);
    let json = witness_from_counts(&hv, &da, 10, 1, 1.0).unwrap().to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["d", "f", "coherence_sum", "penalty_sum", "witness_lower_bound", "certified", "N1", "N2"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}
