use proptest::prelude::*;

use nsdde::model::example1;
use nsdde::model::example2;
use nsdde::paths::{BrownianGrid, MeshSpec};
use nsdde::scheme::{interpolant_path, simulate_em, simulate_mtem, simulate_with_level};
use nsdde::truncation::TruncationPolicy;

fn example1_anchor() -> (f64, Result<f64, nsdde::Error>, Vec<f64>) {
    let problem = example1::<f64>().with_constant_initial(&[1.0]).unwrap();
    let policy = TruncationPolicy::<f64>::example1(0.5).unwrap();
    let fine = MeshSpec::new(1.0, 128, 2.0).unwrap();
    let grid = BrownianGrid::generate(5, 0, fine, 1).unwrap();
    let coarse = simulate_mtem(&problem, &policy, &grid.coarsen(4).unwrap()).unwrap();
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let reference = simulate_em(&problem, grid.increments()).map(|em| max_abs(em.states()));
    (max_abs(coarse.states()), reference, coarse.states().to_vec())
}

#[test]
fn example1_m32_path_is_finite() {
    let (_, _, states) = example1_anchor();
    assert_eq!(states.len(), 32 + 64 + 1);
    assert!(states.iter().all(|x| x.is_finite()));
}

/// Max state of MTEM at m = 32 against EM on a 4x finer mesh driven by the
/// same Brownian path.
#[test]
fn example1_m32_max_state_matches_fine_em() {
    let (coarse, reference, _) = example1_anchor();
    let reference = reference.expect("fine EM stays finite");
    assert!((coarse - reference).abs() <= 0.1, "max |X_k|: MTEM {coarse}, EM {reference}");
}

#[test]
fn interpolant_hits_coarse_nodes_exactly() {
    let problem = example2::<f64>();
    let policy = TruncationPolicy::<f64>::example2(0.9).unwrap();
    let fine = MeshSpec::new(1.0, 256, 2.0).unwrap();
    let grid = BrownianGrid::generate(17, 3, fine, 1).unwrap();
    let sol = simulate_mtem(&problem, &policy, &grid.coarsen(8).unwrap()).unwrap();
    let xs = interpolant_path(&sol, &problem, &grid).unwrap();
    for k in 0..=sol.mesh().total_steps() {
        assert_eq!(xs[k * 8], sol.state(k as i64)[0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nested_coarsening_commutes(seed in any::<u64>(), path in 0u64..1000, a in 0u32..4, b in 0u32..4) {
        let (fa, fb) = (1usize << a, 1usize << b);
        let mesh = MeshSpec::new(1.0, 64, 3.0).unwrap();
        let grid = BrownianGrid::generate(seed, path, mesh, 2).unwrap();
        let nested = grid.coarsen(fa).unwrap().coarsen(fb).unwrap();
        let direct = grid.coarsen(fa * fb).unwrap();
        prop_assert_eq!(nested.ticks(), direct.ticks());
    }

    #[test]
    fn brownian_differences_match_increment_sums(seed in any::<u64>(), i in 0usize..200, j in 0usize..200) {
        let mesh = MeshSpec::new(1.0, 50, 4.0).unwrap();
        let grid = BrownianGrid::generate(seed, 0, mesh, 1).unwrap();
        let (lo, hi) = (i.min(j), i.max(j));
        let sum: i64 = grid.increments().ticks()[lo..hi].iter().sum();
        let diff = grid.brownian_difference(lo, hi).unwrap()[0];
        prop_assert_eq!(diff, sum as f64 / nsdde::paths::TICKS_PER_UNIT);
    }

    #[test]
    fn large_level_reduces_to_em(seed in any::<u64>(), x0 in -1.0f64..1.0) {
        let problem = example2::<f64>().with_constant_initial(&[x0]).unwrap();
        let mesh = MeshSpec::new(1.0, 32, 1.0).unwrap();
        let grid = BrownianGrid::generate(seed, 0, mesh, 1).unwrap();
        let em = simulate_em(&problem, grid.increments());
        let big = simulate_with_level(&problem, 1e6, grid.increments()).unwrap();
        if let Ok(em) = em {
            if big.truncation_activations() == 0 {
                prop_assert_eq!(em.states(), big.states());
            }
        }
    }
}
