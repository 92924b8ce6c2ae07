use blockcert::blockmodel::{operator_norm, BlockNorm, Exponent, RepresentationStructure};
use blockcert::conditions::{rescale_certificate, rescale_invariant, Certificate};
use blockcert::harness::ratings_from_errors;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn norm_strategy() -> impl Strategy<Value = BlockNorm> {
    prop_oneof![Just(BlockNorm::L1), Just(BlockNorm::L2), Just(BlockNorm::Linf)]
}

fn exponent_strategy() -> impl Strategy<Value = Exponent> {
    prop_oneof![Just(Exponent::ONE), Just(Exponent::TWO), (1.0f64..6.0).prop_map(Exponent::Finite), Just(Exponent::Inf)]
}

/// `(block count, block dim, norm, two vectors)`
fn block_pair() -> impl Strategy<Value = (usize, usize, BlockNorm, Vec<f64>, Vec<f64>)> {
    (1usize..7, 1usize..4, norm_strategy()).prop_flat_map(|(k, d, r)| {
        let v = prop::collection::vec(-10.0f64..10.0, k * d);
        (Just(k), Just(d), Just(r), v.clone(), v)
    })
}

fn tol(v: f64) -> f64 {
    1e-10 * (1.0 + v.abs())
}

proptest! {
    #[test]
    fn top_s_norm_bounded_by_full_norm((k, d, r, w, _) in block_pair(), p in exponent_strategy(), s in 1usize..7) {
        let rs = RepresentationStructure::uniform(k * d, d, r).unwrap();
        let s = s.min(k);
        let full = rs.lp(&w, p);
        prop_assert!(rs.lsp(&w, s, p).unwrap() <= full + tol(full));
        prop_assert!((rs.lsp(&w, k, p).unwrap() - full).abs() <= tol(full));
    }

    #[test]
    fn top_s_norm_monotone_in_s((k, d, r, w, _) in block_pair(), p in exponent_strategy()) {
        let rs = RepresentationStructure::uniform(k * d, d, r).unwrap();
        for s in 1..k {
            let (lo, hi) = (rs.lsp(&w, s, p).unwrap(), rs.lsp(&w, s + 1, p).unwrap());
            prop_assert!(lo <= hi + tol(hi));
        }
    }

    #[test]
    fn top_s_norm_exponent_comparison((k, d, r, w, _) in block_pair(), s in 1usize..7, p in 1.0f64..4.0, dq in 0.0f64..4.0) {
        let rs = RepresentationStructure::uniform(k * d, d, r).unwrap();
        let s = s.min(k);
        let (p, q) = (Exponent::Finite(p), Exponent::Finite(p + dq));
        let lp = rs.lsp(&w, s, p).unwrap();
        let lq = rs.lsp(&w, s, q).unwrap();
        prop_assert!(lq <= lp + tol(lp));
        let holder = (s as f64).powf(p.recip() - q.recip()) * lq;
        prop_assert!(lp <= holder + tol(holder));
    }

    #[test]
    fn top_s_norm_triangle_inequality((k, d, r, u, v) in block_pair(), p in exponent_strategy(), s in 1usize..7) {
        let rs = RepresentationStructure::uniform(k * d, d, r).unwrap();
        let s = s.min(k);
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = rs.lsp(&sum, s, p).unwrap();
        let rhs = rs.lsp(&u, s, p).unwrap() + rs.lsp(&v, s, p).unwrap();
        prop_assert!(lhs <= rhs + tol(rhs));
    }

    #[test]
    fn operator_norm_bounds_every_image(
        rows in 1usize..6, cols in 1usize..6,
        pair in prop_oneof![
            Just((BlockNorm::L1, BlockNorm::L1)), Just((BlockNorm::L1, BlockNorm::L2)),
            Just((BlockNorm::L1, BlockNorm::Linf)), Just((BlockNorm::L2, BlockNorm::L2)),
            Just((BlockNorm::L2, BlockNorm::Linf)), Just((BlockNorm::Linf, BlockNorm::Linf)),
        ],
        seed in prop::collection::vec(-3.0f64..3.0, 72),
    ) {
        let m = DMatrix::from_fn(rows, cols, |i, j| seed[i * cols + j]);
        let u = DVector::from_fn(cols, |j, _| seed[36 + j]);
        let (r, theta) = pair;
        let bound = operator_norm(&m, r, theta).unwrap() * r.apply(u.as_slice());
        let image = theta.apply((&m * &u).as_slice());
        prop_assert!(image <= bound + tol(bound));
    }

    #[test]
    fn certificate_condition_holds_on_random_signals(
        d in 1usize..3, k in 2usize..5, r in norm_strategy(), q in exponent_strategy(), s in 1usize..5,
        seed in prop::collection::vec(-1.0f64..1.0, 3 * 64 + 8),
    ) {
        let n = k * d;
        let m = n.saturating_sub(1).max(1);
        let s = s.min(k);
        let rs = RepresentationStructure::uniform(n, d, r).unwrap();
        let a = DMatrix::from_fn(m, n, |i, j| seed[i * n + j]);
        let h = DMatrix::from_fn(m, n, |i, j| seed[64 + i * n + j]) * 0.5 + &a;
        let cert = Certificate::from_contrast(&a, h, &rs, s, q, "property").unwrap();
        let x = DVector::from_fn(n, |i, _| seed[128 + i] * if i < d { 10.0 } else { 1.0 });
        let lhs = rs.lsp(x.as_slice(), s, q).unwrap();
        let fit = rs.lp((cert.h.transpose() * &a * &x).as_slice(), Exponent::Inf);
        let sf = s as f64;
        let rhs = sf.powf(q.recip()) * fit + cert.kappa * sf.powf(q.recip() - 1.0) * rs.lp(x.as_slice(), Exponent::ONE);
        prop_assert!(lhs <= rhs + tol(rhs));
    }

    #[test]
    fn rescaling_preserves_invariant(
        d in 1usize..3, k in 2usize..5, q in exponent_strategy(), s in 1usize..5, ds in 0usize..4,
        seed in prop::collection::vec(-1.0f64..1.0, 128),
    ) {
        let n = k * d;
        let m = n.max(2) - 1;
        let s = s.min(k);
        let s_new = s.saturating_sub(ds).max(1);
        let rs = RepresentationStructure::uniform(n, d, BlockNorm::L2).unwrap();
        let a = DMatrix::from_fn(m, n, |i, j| seed[i * n + j]);
        let h = a.clone() * 0.8;
        let cert = Certificate::from_contrast(&a, h, &rs, s, q, "property").unwrap();
        let out = rescale_certificate(&cert, s_new, Exponent::Inf).unwrap();
        let lhs = rescale_invariant(out.kappa, s_new, Exponent::Inf);
        let rhs = rescale_invariant(cert.kappa, s, q);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn ratings_are_scale_invariant(
        errors in prop::collection::vec(prop::option::of(1e-6f64..10.0), 1..8),
        c in 1e-3f64..1e3,
    ) {
        let scaled: Vec<Option<f64>> = errors.iter().map(|e| e.map(|v| v * c)).collect();
        let a = ratings_from_errors(&errors);
        let b = ratings_from_errors(&scaled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(x));
        }
        if errors.iter().any(Option::is_some) {
            prop_assert!(a.contains(&1.0));
        }
    }
}
