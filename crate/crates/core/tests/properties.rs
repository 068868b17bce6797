use num_complex::Complex64;
use proptest::prelude::*;

use ratreg::orf::gram_f64;
use ratreg::potential::Green;
use ratreg::regularity::sparse_stats;
use ratreg::ExtendedReal::{self, Finite, Infinity};
use ratreg::{FiniteGapSet, Measure, MoebiusMap, PoleSequence};

fn map() -> impl Strategy<Value = MoebiusMap> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_filter("degenerate", |(a, b, c, d)| (a * d - b * c).abs() > 0.1)
        .prop_map(|(a, b, c, d)| MoebiusMap::new(a, b, c, d).unwrap())
}

fn atoms(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, 0.05..1.0f64), 3..max).prop_map(|mut v| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
        v
    })
}

fn atomic(v: &[(f64, f64)]) -> Measure {
    let list: Vec<(ExtendedReal, f64)> = v.iter().map(|&(x, w)| (Finite(x), w)).collect();
    Measure::atomic(&list).unwrap()
}

fn sorted_atoms(mu: &Measure) -> Vec<(ExtendedReal, f64)> {
    let mut v: Vec<_> = mu.atoms().iter().map(|a| (a.position, a.weight)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn close(a: ExtendedReal, b: ExtendedReal, tol: f64) -> bool {
    match (a, b) {
        (Infinity, Infinity) => true,
        (Finite(x), Finite(y)) => (x - y).abs() <= tol * x.abs().max(1.0),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moebius_inverse_and_identity(f in map()) {
        prop_assert!(f.compose(&f.invert()).distance(&MoebiusMap::identity()) < 1e-9);
        prop_assert!(f.invert().compose(&f).distance(&MoebiusMap::identity()) < 1e-9);
        prop_assert!(f.compose(&MoebiusMap::identity()).distance(&f) < 1e-12);
    }

    #[test]
    fn moebius_composition(f in map(), g in map(), h in map(), x in -5.0..5.0f64) {
        let left = f.compose(&g).compose(&h);
        let right = f.compose(&g.compose(&h));
        prop_assert!(left.distance(&right) < 1e-8 * (1.0 + left.coefficients().iter().fold(0.0f64, |m, c| m.max(c.abs()))));
        let direct = f.compose(&g).apply(Finite(x));
        let nested = f.apply(g.apply(Finite(x)));
        if let (Finite(a), Finite(b)) = (direct, nested) {
            // skip points sent close to ∞, where the two routes lose digits differently
            prop_assume!(a.abs() < 1e6);
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn pushforward_round_trip(v in atoms(12), f in map()) {
        let mu = atomic(&v);
        let back = mu.pushforward(&f).pushforward(&f.invert());
        prop_assert_eq!(back.atoms().len(), mu.atoms().len());
        prop_assert!((back.total_mass() - mu.total_mass()).abs() < 1e-12);
        for (a, b) in sorted_atoms(&mu).iter().zip(sorted_atoms(&back)) {
            prop_assert!(close(a.0, b.0, 1e-9), "{} vs {}", a.0, b.0);
            prop_assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_is_symmetric_psd(v in atoms(20), c in 1.3..4.0f64, with_inf in any::<bool>()) {
        let poles = if with_inf { vec![Finite(c), Infinity] } else { vec![Finite(c), Finite(-c)] };
        let poles = PoleSequence::new(poles).unwrap();
        let mu = atomic(&v);
        let n = 6.min(v.len() - 1);
        let g = gram_f64(&mu, &poles, n).unwrap();
        let m = nalgebra::DMatrix::from_fn(n + 1, n + 1, |i, j| g[i][j]);
        prop_assert_eq!(&m, &m.transpose());
        let ev = m.symmetric_eigenvalues();
        let top = ev.max();
        prop_assert!(ev.min() >= -1e-12 * top, "min eigenvalue {}", ev.min());
    }

    #[test]
    fn inner_product_conjugate_symmetry(v in atoms(16), zr in -3.0..3.0f64, zi in 0.1..2.0f64, wr in -2.0..2.0f64, wi in -2.0..2.0f64) {
        let mu = atomic(&v);
        let z = Complex64::new(zr, zi);
        let w = Complex64::new(wr, wi);
        let f = |x: ExtendedReal| x.as_finite().map(|x| 1.0 / (Complex64::new(x, 0.0) - z));
        let g = |x: ExtendedReal| x.as_finite().map(|x| w * x + Complex64::new(0.5, -1.0));
        let fg = mu.inner_product(f, g).unwrap();
        let gf = mu.inner_product(g, f).unwrap();
        prop_assert!((fg - gf.conj()).norm() <= 1e-12 * (1.0 + fg.norm()));
        prop_assert!(mu.inner_product(f, f).unwrap().re >= 0.0);
    }

    #[test]
    fn markov_inequality_holds(f in prop::collection::vec(-3.0..3.0f64, 1..400), delta in 0.01..2.0f64) {
        let s = sparse_stats(&f, delta, f.len()).unwrap();
        prop_assert!(s.markov_ok);
        prop_assert!(s.density <= 1.0 && s.average >= 0.0);
    }

    #[test]
    fn extended_real_text_round_trip(x in prop::num::f64::NORMAL, inf in any::<bool>()) {
        let v = if inf { Infinity } else { Finite(x) };
        let back: ExtendedReal = v.to_string().parse().unwrap();
        prop_assert_eq!(back, v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// λ_k picks up the local dilation factor of an affine change of variables.
    #[test]
    fn lambda_covariance(s in 0.5..3.0f64, t in -2.0..2.0f64) {
        let e = FiniteGapSet::new(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let c = PoleSequence::new(vec![Finite(0.0), Infinity]).unwrap();
        let f = MoebiusMap::translation(t).compose(&MoebiusMap::scaling(s).unwrap());
        let before = Green::new(&e).unwrap().log_lambdas(&c).unwrap();
        let after = Green::new(&e.map(&f).unwrap()).unwrap().log_lambdas(&c.map(&f)).unwrap();
        for (k, (b, a)) in before.iter().zip(&after).enumerate() {
            let factor = f.derivative_at(c.get(k + 1)).factor;
            prop_assert!((a - b - factor.ln()).abs() < 1e-8, "slot {}: {} vs {}", k + 1, a, b + factor.ln());
        }
    }
}
