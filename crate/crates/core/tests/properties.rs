use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use valkit::error::Error;
use valkit::hahn_series::{HahnSeries, Precision, Universe};
use valkit::ordered_groups::{int, GammaElement, GammaSubgroup};
use valkit::presentations::ValuedSubfieldPresentation;
use valkit::residue_algebra::ResElement;
use valkit::rv_sort::{power_coset_of, rv_try_add, PowerModel, RvElement, RvSum, SignRule};
use valkit::sampling::{random_basis, random_coeff, random_series};
use valkit::separated::check_separated;

fn universe() -> Universe {
    Universe::new(&["t1", "t2"], &["x1", "x2"])
}

fn gamma(main: &[i64], inf: &[i64]) -> GammaElement {
    GammaElement::from_ints(main, inf)
}

fn small_gamma() -> impl Strategy<Value = GammaElement> {
    (prop::collection::vec(-3i64..=3, 2), prop::collection::vec(-3i64..=3, 1)).prop_map(|(m, i)| gamma(&m, &i))
}

fn rv_element(seed: u64) -> impl Fn(GammaElement) -> RvElement {
    move |g| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RvElement::new(g, random_coeff(&mut rng, 2))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn order_is_translation_invariant(a in small_gamma(), b in small_gamma(), c in small_gamma()) {
        prop_assert_eq!(a.cmp(&b), (&a + &c).cmp(&(&b + &c)));
        prop_assert_eq!(a.cmp(&b), (-&b).cmp(&(-&a)));
    }

    #[test]
    fn subgroup_contains_generators_and_sums(a in small_gamma(), b in small_gamma(), k in -3i64..=3) {
        let g = GammaSubgroup::new((2, 1), vec![a.clone(), b.clone()]).unwrap();
        prop_assert!(g.contains(&a).unwrap());
        prop_assert!(g.contains(&(&a.scale_int(k) + &b)).unwrap());
        prop_assert!(g.reduced().same_group(&g).unwrap());
        let doubled = GammaSubgroup::new((2, 1), vec![a.scale_int(2), b.clone()]).unwrap();
        prop_assert!(doubled.is_subgroup_of(&g).unwrap());
        prop_assert_eq!(g.contains(&a.scale(&(int(1) / int(2)))).unwrap(), g.express(&a.scale(&(int(1) / int(2)))).unwrap().is_some());
    }

    #[test]
    fn rv_is_multiplicative(seed in any::<u64>()) {
        let u = universe();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_series(&mut rng, &u);
        let b = random_series(&mut rng, &u);
        prop_assert_eq!(a.mul(&b).unwrap().rv().unwrap(), a.rv().unwrap().mul(&b.rv().unwrap()));
    }

    #[test]
    fn rv_addition_agrees_with_series(seed in any::<u64>(), same_valuation in any::<bool>()) {
        let u = universe();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_series(&mut rng, &u);
        let mut b = random_series(&mut rng, &u);
        if same_valuation {
            // Shift b to the valuation of a.
            let shift = &a.valuation().unwrap() - &b.valuation().unwrap();
            b = b.mul_monomial(&ResElement::one(), &shift);
        }
        let (ra, rb) = (a.rv().unwrap(), b.rv().unwrap());
        let sum = &a + &b;
        match rv_try_add(&ra, &rb) {
            RvSum::Value(r) => prop_assert_eq!(sum.rv().unwrap(), r),
            RvSum::Collision => match sum.valuation() {
                Ok(v) => prop_assert!(v > *ra.gamma()),
                Err(e) => prop_assert!(matches!(e, Error::InfiniteValuation)),
            },
        }
    }

    #[test]
    fn rv_of_inverse_is_inverse(seed in any::<u64>()) {
        let u = universe();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_series(&mut rng, &u);
        let target = Precision::Cutoff(&a.valuation().unwrap().scale_int(-1) + &gamma(&[3, 0], &[]));
        match a.inv(&target) {
            Ok(inv) => {
                prop_assert_eq!(inv.rv().unwrap(), a.rv().unwrap().inverse());
                let one = a.mul(&inv).unwrap();
                prop_assert!(one.rv().unwrap() == RvElement::one(u.rank()));
            }
            // Support that the cutoff on the first axis cannot bound.
            Err(e) => prop_assert!(matches!(e, Error::PrecisionExhausted(_))),
        }
    }

    #[test]
    fn power_predicates_are_multiplicative(seed in any::<u64>(), g in small_gamma(), h in small_gamma()) {
        let x = rv_element(seed)(g);
        let y = rv_element(seed.wrapping_add(1))(h);
        let models = [PowerModel::Acf, PowerModel::Rcf(SignRule::Leading)];
        for model in &models {
            for n in model.supported_n() {
                let (cx, cy) = (power_coset_of(&x, n, model).unwrap(), power_coset_of(&y, n, model).unwrap());
                prop_assert!(model.in_pn(&x.pow(n as i64), n).unwrap());
                if cx.in_pn && cy.in_pn {
                    prop_assert!(model.in_pn(&x.mul(&y), n).unwrap());
                }
                // The coset of a product depends only on the factors' cosets.
                let xy = power_coset_of(&x.mul(&y), n, model).unwrap();
                let x2 = x.mul(&x.pow(n as i64));
                prop_assert_eq!(power_coset_of(&x2.mul(&y), n, model).unwrap(), xy);
            }
        }
    }

    #[test]
    fn separated_verdict_ignores_order_and_scaling(seed in any::<u64>(), k in 1i64..=5) {
        let u = Universe::new(&["t"], &["x1"]);
        let c = ValuedSubfieldPresentation::new("C", None, vec![u.parse_series("t").unwrap()], 3, u.precision()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_basis(&mut rng, &u, 4);
        let verdict = check_separated(&basis, &c).unwrap().verdict;
        let mut permuted: Vec<HahnSeries> = basis.iter().rev().cloned().collect();
        permuted[0] = permuted[0].scale(&ResElement::from_int(k));
        let other = check_separated(&permuted, &c).unwrap().verdict;
        prop_assert_eq!(verdict.label(), other.label());
    }
}
