use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use qgsim_core::attractor::{cocycle_check, diameter, hausdorff, SampleBasis};
use qgsim_core::io::{decode_noise_path, decode_snapshot, encode_noise_path, encode_snapshot, Provenance};
use qgsim_core::integrator::xi_step;
use qgsim_core::validation::random_field;
use qgsim_core::{
    parse_config, Domain, Forcing, Grid, InitialSampler, Integrator, NoiseModel, NoisePath, OperatorContext,
    SamplerRegistry, SimConfig, StratificationProfile, Terms,
};

fn ctx(nz: usize) -> OperatorContext {
    let grid = Grid::new(16, 16, nz).unwrap();
    let d = Domain::new(grid, StratificationProfile::from_fn(1.0, nz, |z| 1.0 + 0.3 * z.cos()).unwrap()).unwrap();
    OperatorContext::new(Arc::new(d), 0.5, 1.0).unwrap()
}

fn small_integrator(seed: u64) -> Integrator {
    let grid = Grid::new(8, 8, 5).unwrap();
    let d = Domain::new(grid, StratificationProfile::constant(1.0, 1.0, 5).unwrap()).unwrap();
    let c = OperatorContext::new(Arc::new(d), 0.5, 1.0).unwrap();
    let model = NoiseModel::new(c.domain().grid(), 4, 1.0, 3.0, 0.5, 0.1).unwrap();
    let path = NoisePath::covering(seed, 4, 0.1, -1.0, 8.0).unwrap();
    let f = Forcing::new(&c, model, Some(&path), None, 0.05).unwrap();
    Integrator::new(c, f, Terms::all()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip_is_exact(seed in any::<u64>(), smooth in 0.0f64..2.0) {
        let c = ctx(9);
        let d = c.domain();
        let u = random_field(d, &mut ChaCha20Rng::seed_from_u64(seed), smooth);
        let back = d.forward_transform(&d.inverse_transform(&u).unwrap()).unwrap();
        prop_assert!(d.norm_h(&back.sub(&u).unwrap()) <= 1e-13 * d.norm_h(&u));
    }

    #[test]
    fn jacobian_is_hermitian_and_antisymmetric(seed in any::<u64>()) {
        let c = ctx(9);
        let d = c.domain();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = random_field(d, &mut rng, 1.0);
        let v = random_field(d, &mut rng, 1.0);
        let j = c.jacobian(&a, &v).unwrap();
        prop_assert!(j.hermitian_defect(|h| d.grid().conj_index(h)) <= 1e-14 * d.norm_h(&j));
        prop_assert!(d.inner(&j, &v).abs() <= 1e-12 * d.norm_h(&j) * d.norm_h(&v));
        let ja = c.jacobian(&v, &a).unwrap();
        prop_assert!(d.norm_h(&j.add(&ja).unwrap()) <= 1e-12 * d.norm_h(&j));
    }

    #[test]
    fn g_inverts_a(seed in any::<u64>()) {
        let c = ctx(9);
        let d = c.domain();
        let f = random_field(d, &mut ChaCha20Rng::seed_from_u64(seed), 0.5);
        let mut g = c.apply_g(&f).unwrap();
        g.scale(-1.0);
        prop_assert!(d.norm_h(&c.apply_a(&g).unwrap().sub(&f).unwrap()) <= 1e-11 * d.norm_h(&f));
        prop_assert!(d.inner(&c.apply_a(&f).unwrap(), &f) >= c.lambda1() * d.inner(&f, &f) * (1.0 - 1e-12));
    }

    #[test]
    fn config_round_trips(
        nu in 0.01f64..5.0,
        beta in 0.0f64..3.0,
        seed in any::<u64>(),
        k in 1usize..6,
        ensemble in 8usize..40,
    ) {
        let cfg = SimConfig {
            nu,
            beta,
            seed,
            dt: 0.05 / k as f64,
            ensemble,
            ..SimConfig::default()
        };
        let again = parse_config(&cfg.normalize()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn noise_extension_keeps_prefix(seed in any::<u64>(), start in -50i64..50, n in 1usize..40, extra in 0usize..40) {
        let a = NoisePath::generate(seed, 3, 0.05, start, n).unwrap().extended(extra).unwrap();
        let b = NoisePath::generate(seed, 3, 0.05, start, n + extra).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn binary_formats_round_trip(seed in any::<u64>(), t in -1e3f64..1e3) {
        let prov = Provenance::new(format!("{seed:016x}"));
        let path = NoisePath::generate(seed, 2, 0.1, -7, 11).unwrap();
        let (p2, prov2) = decode_noise_path(&encode_noise_path(&path, &prov)).unwrap();
        prop_assert_eq!(p2, path);
        prop_assert_eq!(&prov2, &prov);

        let c = ctx(5);
        let u = random_field(c.domain(), &mut ChaCha20Rng::seed_from_u64(seed), 1.0);
        let snap = decode_snapshot(&encode_snapshot(&u, t, &prov)).unwrap();
        prop_assert_eq!(snap.field, u);
        prop_assert_eq!(snap.t.to_bits(), t.to_bits());
    }

    #[test]
    fn xi_step_composes(xi0 in 0.0f64..100.0, s0 in 0.0f64..10.0, s1 in 0.0f64..10.0, dt in 1e-3f64..1.0) {
        let c = ctx(5);
        let whole = xi_step(xi0, s0, s1, dt, &c);
        let mid = 0.5 * (s0 + s1);
        let halves = xi_step(xi_step(xi0, s0, mid, 0.5 * dt, &c), mid, s1, 0.5 * dt, &c);
        prop_assert!((whole - halves).abs() <= 1e-12 * whole.max(1.0));
        prop_assert!(whole >= 0.0);
        prop_assert!(xi_step(xi0 + 1.0, s0, s1, dt, &c) > whole);
    }

    #[test]
    fn cocycle_is_bitwise(seed in 0u64..1000, s in 0i64..40, t in 0i64..40) {
        let it = small_integrator(seed);
        let d = it.ctx().domain();
        let x = random_field(d, &mut ChaCha20Rng::seed_from_u64(seed), 1.5);
        let r = cocycle_check(&it, 0, s, t, &x).unwrap();
        prop_assert!(r.bitwise_equal);
        prop_assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn samplers_respect_radius(seed in any::<u64>(), r2 in 0.01f64..1e3, member in 0usize..64) {
        let reg = SamplerRegistry::default();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for name in reg.names() {
            let s: &dyn InitialSampler = reg.get(name).unwrap();
            let c = s.coefficients(12, r2, member, &mut rng);
            let n2: f64 = c.iter().map(|v| v * v).sum();
            prop_assert!(n2 <= r2 * (1.0 + 1e-12));
            if name != "ball" {
                prop_assert!((n2 - r2).abs() <= 1e-12 * r2);
            }
        }
    }

    #[test]
    fn hausdorff_is_a_metric_on_sets(seed in any::<u64>()) {
        let c = ctx(5);
        let d = c.domain();
        let basis = SampleBasis::new(d, 6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut set = |n: usize| -> Vec<_> {
            (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..6).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
                    basis.field(d, &v)
                })
                .collect()
        };
        let (a, b, e) = (set(4), set(5), set(3));
        prop_assert_eq!(hausdorff(d, &a, &a), 0.0);
        prop_assert!((hausdorff(d, &a, &b) - hausdorff(d, &b, &a)).abs() <= 1e-14);
        prop_assert!(hausdorff(d, &a, &e) <= hausdorff(d, &a, &b) + hausdorff(d, &b, &e) + 1e-12);
        prop_assert!(diameter(d, &a) <= 2.0 * a.iter().map(|u| d.norm_h(u)).fold(0.0, f64::max) + 1e-12);
    }
}
