use proptest::prelude::*;

use hecke_core::arith_core::{
    canon_i64, det, gamma_sigma, height, moebius, reduce_to_f, CongruenceLevel, HPoint, IMat, PElement,
};
use hecke_core::cosets::enumerate_det;

fn sl2_word(p: u64, word: &[u8]) -> PElement {
    word.iter().fold(PElement::identity(p), |g, w| match w {
        0 => g.mul(&PElement::t(p)),
        1 => g.mul(&PElement::t(p).inv()),
        _ => g.mul(&PElement::s(p)),
    })
}

fn g_word(p: u64, word: &[u8]) -> PElement {
    let d = PElement::diag(p, 1, p as i64).unwrap();
    word.iter().fold(PElement::identity(p), |g, w| match w {
        0 => g.mul(&PElement::t(p)),
        1 => g.mul(&PElement::s(p)),
        2 => g.mul(&d),
        _ => g.mul(&d.inv()),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_axioms(a in prop::collection::vec(0u8..4, 0..8),
                    b in prop::collection::vec(0u8..4, 0..8),
                    c in prop::collection::vec(0u8..4, 0..8)) {
        let (x, y, z) = (g_word(2, &a), g_word(2, &b), g_word(2, &c));
        prop_assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
        prop_assert_eq!(x.mul(&x.inv()), PElement::identity(2));
        prop_assert_eq!(x.inv().mul(&x), PElement::identity(2));
        prop_assert_eq!(x.mul(&PElement::identity(2)), x.clone());
    }

    #[test]
    fn reduction_lands_in_f(x in -20.0f64..20.0, y in 0.01f64..5.0) {
        let z = HPoint::new(x, y).unwrap();
        let (z0, g) = reduce_to_f(z, 2, 10_000).unwrap();
        let w = z0.z();
        prop_assert!(w.re.abs() <= 0.5 + 1e-12);
        prop_assert!(w.norm() >= 1.0 - 1e-12);
        prop_assert!(g.in_gamma());
        let (gz, _) = moebius(&g, z).unwrap();
        prop_assert!((gz.z() - w).norm() < 1e-8 * (1.0 + w.norm()));
    }

    #[test]
    fn reduction_is_gamma_invariant(x in -0.5f64..0.5, y in 1.0f64..3.0,
                                    word in prop::collection::vec(0u8..3, 0..10)) {
        prop_assume!(x * x + y * y > 1.0 + 1e-6 && x.abs() < 0.5 - 1e-6);
        let z = HPoint::new(x, y).unwrap();
        let g = sl2_word(2, &word);
        let (gz, _) = moebius(&g, z).unwrap();
        prop_assume!(gz.z().im > 1e-6);
        let (z0, _) = reduce_to_f(gz, 2, 10_000).unwrap();
        prop_assert!((z0.z() - z.z()).norm() < 1e-7);
    }

    #[test]
    fn gamma_sigma_matches_brute_force(word in prop::collection::vec(0u8..4, 1..5), k in 0u32..2) {
        let p = 2;
        let sigma = g_word(p, &word);
        let s = match sigma.to_imat() { Some(s) => s, None => return Ok(()) };
        prop_assume!(height(&s) < 64);
        let level = CongruenceLevel::gamma0(p, k);
        let gs = gamma_sigma(&level, &sigma);
        let sa = [s[3], -s[1], -s[2], s[0]];
        for g in enumerate_det(1, 6, u64::MAX).unwrap() {
            let m = |x: &IMat, y: &IMat| -> [i128; 4] {
                let (x, y) = (x.map(|v| v as i128), y.map(|v| v as i128));
                [x[0]*y[0]+x[1]*y[2], x[0]*y[1]+x[1]*y[3], x[2]*y[0]+x[3]*y[2], x[2]*y[1]+x[3]*y[3]]
            };
            let t = m(&sa, &g);
            let t: IMat = t.map(|v| v as i64);
            let u = m(&t, &s);
            let dd = det(&s);
            let conj_in = u.iter().all(|v| v % dd == 0) && {
                let h: IMat = u.map(|v| (v / dd) as i64);
                level.contains(&canon_i64(&h))
            };
            let want = level.contains(&g) && conj_in;
            prop_assert_eq!(gs.contains(&g), want, "g={:?}", g);
        }
    }
}

#[test]
fn enumeration_agrees_with_brute_force() {
    for (dv, h) in [(1i128, 4u64), (2, 4), (-2, 3), (4, 3), (9, 3)] {
        let got = enumerate_det(dv, h, u64::MAX).unwrap();
        let hh = h as i64;
        let mut want = Vec::new();
        for a in -hh..=hh {
            for b in -hh..=hh {
                for c in -hh..=hh {
                    for d in -hh..=hh {
                        let m: IMat = [a, b, c, d];
                        if det(&m) != dv || canon_i64(&m) != m {
                            continue;
                        }
                        let g = [a, b, c, d].iter().fold(0i64, |g, v| num_integer::gcd(g, *v));
                        if g == 1 {
                            want.push(m);
                        }
                    }
                }
            }
        }
        want.sort_by_key(hecke_core::arith_core::order_key);
        assert_eq!(got, want, "det {dv} h {h}");
    }
}
