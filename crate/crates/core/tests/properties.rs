use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavefield_core::dictionary::{build_rigid_sphere, DirectionGrid, SphereSpec};
use wavefield_core::pwd::{decompose_cell, AtomMatrix, DecompositionConfig};
use wavefield_core::{
    decompose_traced, istft, steering_vector, stft, synthesize_field, ArrayGeometry,
    DeviceDictionary, Direction, FrequencyGrid, MapAtom, StftConfig, TimeFrequencyMap,
};

fn sphere_dict() -> DeviceDictionary {
    let freqs = FrequencyGrid::new(16_000, 256).unwrap();
    build_rigid_sphere(
        &SphereSpec::fibonacci(12, 0.05).unwrap(),
        &DirectionGrid::equiangular(30.0).unwrap(),
        &freqs,
        &[20, 40, 64],
    )
    .unwrap()
}

fn random_cell(rng: &mut ChaCha8Rng, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn cfg(k: usize) -> DecompositionConfig {
    DecompositionConfig {
        max_atoms: k,
        residual_stop_db: -200.0,
        ..DecompositionConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steering_vectors_have_unit_magnitude(az in 0.0..360.0f64, el in 0.0..180.0f64, f in 0.0..8000.0f64) {
        let geom = ArrayGeometry::from_positions(vec![[0.03, 0.0, 0.0], [0.0, -0.02, 0.01]]).unwrap();
        let dir = Direction::from_degrees(az, el).unwrap();
        for p in steering_vector(&geom, f, &FrequencyGrid::new(16_000, 1024).unwrap(), &dir).unwrap() {
            prop_assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_is_scale_equivariant(seed in any::<u64>(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-2);
        let d = sphere_dict();
        let atoms = AtomMatrix::from_dictionary(&d, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_cell(&mut rng, d.num_mics());
        let cy: Vec<Complex64> = y.iter().map(|v| c * v).collect();
        let a = decompose_cell(&y, &atoms, &cfg(6)).unwrap();
        let b = decompose_cell(&cy, &atoms, &cfg(6)).unwrap();
        prop_assert_eq!(&a.indices, &b.indices);
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            prop_assert!((c * wa - wb).norm() <= 1e-9 * (c * wa).norm().max(1e-12));
        }
    }

    #[test]
    fn residual_path_is_non_increasing(seed in any::<u64>(), slot in 0usize..3) {
        let d = sphere_dict();
        let atoms = AtomMatrix::from_dictionary(&d, slot);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_cell(&mut rng, d.num_mics());
        let r = decompose_cell(&y, &atoms, &cfg(12)).unwrap();
        for w in r.residual_path.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn selected_atoms_are_distinct_and_residual_orthogonal(seed in any::<u64>()) {
        let d = sphere_dict();
        let atoms = AtomMatrix::from_dictionary(&d, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_cell(&mut rng, d.num_mics());
        let r = decompose_cell(&y, &atoms, &cfg(8)).unwrap();
        let mut sorted = r.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), r.indices.len());

        let mut res = y.clone();
        for (&l, w) in r.indices.iter().zip(&r.weights) {
            for (ri, a) in res.iter_mut().zip(d.atom_f64(2, l)) {
                *ri -= w * a;
            }
        }
        let rn: f64 = res.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for &l in &r.indices {
            let col = d.atom_f64(2, l);
            let cn: f64 = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let ip: Complex64 = col.iter().zip(&res).map(|(a, b)| a.conj() * b).sum();
            prop_assert!(ip.norm() <= 1e-9 * cn * rn.max(1e-300) + 1e-12);
        }
    }

    #[test]
    fn synthesis_is_linear(seed in any::<u64>(), g in -2.0..2.0f64) {
        let d = sphere_dict();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stft_cfg = StftConfig::new(256, 128, 16_000).unwrap();
        let blank = || {
            TimeFrequencyMap::empty(
                d.grid().content_hash(),
                d.num_directions(),
                *d.freqs(),
                stft_cfg,
                2,
                384,
                DecompositionConfig::default(),
                vec![20, 40, 64],
            )
            .unwrap()
        };
        let (mut a, mut b, mut sum) = (blank(), blank(), blank());
        for t in 0..2 {
            for &f in &[20, 40, 64] {
                let la = rng.gen_range(0..d.num_directions() as u32);
                let lb = (la + 1 + rng.gen_range(0..d.num_directions() as u32 - 1)) % d.num_directions() as u32;
                let wa = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let wb = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a.set_cell(t, f, vec![MapAtom { direction: la, weight: wa }]).unwrap();
                b.set_cell(t, f, vec![MapAtom { direction: lb, weight: wb }]).unwrap();
                sum.set_cell(t, f, vec![
                    MapAtom { direction: la, weight: wa },
                    MapAtom { direction: lb, weight: g * wb },
                ]).unwrap();
            }
        }
        let (sa, sb, ss) = (
            synthesize_field(&a, &d).unwrap(),
            synthesize_field(&b, &d).unwrap(),
            synthesize_field(&sum, &d).unwrap(),
        );
        for ((x, y), z) in sa.data().iter().zip(sb.data()).zip(ss.data()) {
            prop_assert!((x + g * y - z).norm() <= 1e-12);
        }
    }

    #[test]
    fn stft_round_trip_is_exact_inside(seed in any::<u64>(), len in 1024usize..4096) {
        let cfg = StftConfig::new(256, 128, 16_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..2).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y = istft(&stft(&x, &cfg).unwrap(), &cfg).unwrap();
        let covered = (len - 256) / 128 * 128 + 256;
        let (mut e, mut s) = (0.0, 0.0);
        for (xc, yc) in x.iter().zip(&y) {
            for i in 256..covered - 256 {
                e += (xc[i] - yc[i]).powi(2);
                s += xc[i].powi(2);
            }
        }
        prop_assert!(10.0 * (e / s).log10() <= -100.0);
    }
}

#[test]
fn goa_trace_matches_independent_runs() {
    let d = sphere_dict();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..d.num_mics())
        .map(|_| (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let stft_cfg = StftConfig::new(256, 128, 16_000).unwrap();
    let spec = stft(&x, &stft_cfg).unwrap();
    let full = DecompositionConfig {
        max_atoms: 8,
        residual_stop_db: -200.0,
        bin_range: (0.0, 8000.0),
        ..DecompositionConfig::default()
    };
    let (_, trace) = decompose_traced(&spec, &d, &full).unwrap();
    let mut last = f64::INFINITY;
    for k in 1..=8 {
        let (map, _) = decompose_traced(
            &spec,
            &d,
            &DecompositionConfig {
                max_atoms: k,
                ..full
            },
        )
        .unwrap();
        let direct = wavefield_core::goa(&map, &d, &spec).unwrap().aggregate_db;
        let traced = trace.goa_at(k).unwrap().aggregate_db;
        assert!(
            (direct - traced).abs() < 1e-6,
            "k={k}: {direct} vs {traced}"
        );
        assert!(direct <= last + 1e-9);
        last = direct;
    }
}
