use std::collections::HashMap;

use proptest::prelude::*;

use poisson_entropy::entropy::{
    cylinder_entropy_curve, decomposition_residual, poisson_entropy_function, suspension_partition_entropy,
    BlockCounts, CurveOptions, LocalPartition,
};
use poisson_entropy::induced::{krengel_entropy_markov, quasi_finiteness, QuasiFiniteOptions};
use poisson_entropy::suspension::{evolve, sample_initial_configuration};
use poisson_entropy::systems::{
    build_general_chain, build_random_walk, build_renewal_chain, build_tower, cylinder_measure, StageSpec,
    TowerSchedule,
};
use poisson_entropy::{ExactTower, MarkovChain, ReturnLaw};

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn finite_law() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..6).prop_map(|w| normalize(&w))
}

fn kernel(k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.001f64..1.0, k), k)
        .prop_map(|rows| rows.iter().map(|r| normalize(r)).collect())
}

fn general(rows: &[Vec<f64>]) -> MarkovChain {
    let k = rows.len();
    let rows = rows
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, &p)| (j as i64, p)).collect())
        .collect();
    build_general_chain((0..k as i64).collect(), rows, None, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_sum_to_one(f in finite_law(), p in 0.05f64..0.95) {
        let r = build_renewal_chain(ReturnLaw::finite(f).unwrap(), None).unwrap();
        prop_assert!(r.max_row_defect() < 1e-12);
        prop_assert!(r.stationarity_defect() < 1e-10);
        let w = build_random_walk(&[(1, p), (-1, 1.0 - p)], (-10, 10));
        if let Ok(w) = w {
            prop_assert!(w.max_row_defect() < 1e-12);
        }
    }

    #[test]
    fn tail_sums(f in finite_law(), n in 0u64..8) {
        let law = ReturnLaw::finite(f.clone()).unwrap();
        let direct: f64 = f.iter().skip(n as usize).sum();
        prop_assert!((law.survival(n) - direct).abs() < 1e-14);
        let tel = ReturnLaw::telescoping();
        let m = n + 3;
        let sum: f64 = (n + 1..=m).map(|k| tel.prob(k)).sum::<f64>() + tel.survival(m);
        prop_assert!((tel.survival(n) - sum).abs() < 1e-14);
    }

    #[test]
    fn tower_widths_are_exact(cuts in prop::collection::vec(2u64..5, 1..12), spacers in 0u64..3) {
        let stages = cuts.iter().map(|&k| StageSpec { cuts: k, columns: 1, spacers }).collect();
        let schedule = TowerSchedule { epsilon0: (1, 1), initial_heights: vec![1], stages };
        let t: ExactTower = build_tower(&schedule).unwrap();
        prop_assert!(t.widths_consistent());
    }

    #[test]
    fn cylinders_multiply(rows in kernel(3), word in prop::collection::vec(0i64..3, 2..7), cut in 0usize..6) {
        let sys = general(&rows);
        let k = cut % (word.len() - 1) + 1;
        let whole = cylinder_measure(&sys, &word).unwrap().mass;
        let left = cylinder_measure(&sys, &word[..=k]).unwrap().mass;
        let right = cylinder_measure(&sys, &word[k..]).unwrap().mass;
        let q = sys.stationary_at(word[k]).unwrap();
        prop_assert!((whole - left * right / q).abs() <= 1e-14 * whole.max(1e-300) + 1e-300);
    }

    #[test]
    fn return_partition_interval_contains_entropy(f in finite_law(), h in 1u64..8) {
        let sys = build_renewal_chain(ReturnLaw::finite(f.clone()).unwrap(), None).unwrap();
        let exact: f64 = f.iter().map(|&p| -p * p.ln()).sum();
        // Return times are at most len(f), which bounds the unseen cells.
        let mut opts = QuasiFiniteOptions::new(h);
        opts.unseen_cells = Some(f.len() as u64);
        let r = quasi_finiteness(&sys, &[1], opts).unwrap();
        prop_assert!(r.entropy.lower <= exact + 1e-12 && exact <= r.entropy.upper + 1e-12);
    }

    #[test]
    fn entropy_is_relabel_invariant(rows in kernel(4), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let a = krengel_entropy_markov(&general(&rows)).unwrap().value;
        let mut shuffled = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                shuffled[perm[i]][perm[j]] = rows[i][j];
            }
        }
        let b = krengel_entropy_markov(&general(&shuffled)).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn partition_entropy_permutation_and_refinement(
        cells in prop::collection::vec(0.0f64..5.0, 1..8),
        perm_seed in any::<u64>(),
        split in 0.0f64..1.0,
        which in 0usize..8,
    ) {
        let base = suspension_partition_entropy(&cells).unwrap();
        let mut p = cells.clone();
        let n = p.len();
        p.rotate_left((perm_seed % n as u64) as usize);
        p.reverse();
        prop_assert!((suspension_partition_entropy(&p).unwrap() - base).abs() < 1e-12);
        let i = which % n;
        let mut refined = cells.clone();
        let m = refined[i];
        refined[i] = m * split;
        refined.push(m * (1.0 - split));
        prop_assert!(suspension_partition_entropy(&refined).unwrap() >= base - 1e-12);
    }

    #[test]
    fn decomposition_on_random_kernels(k in 2usize..5, seed in any::<u64>(), n in 1usize..6) {
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((s >> 11) as f64 / (1u64 << 53) as f64) + 1e-3 };
        let rows: Vec<Vec<f64>> = (0..k).map(|_| normalize(&(0..k).map(|_| next()).collect::<Vec<_>>())).collect();
        let alpha: Vec<u64> = (0..k).map(|i| (i % 2) as u64).collect();
        prop_assert!(decomposition_residual(&general(&rows), &alpha, n).unwrap() < 1e-12);
    }

    #[test]
    fn curve_matches_brute_force(f in finite_law(), n in 1usize..6) {
        let (curve, brute) = curve_and_brute_force(&f, n);
        prop_assert!((curve - brute).abs() < 1e-12, "{} vs {}", curve, brute);
    }

    #[test]
    fn block_counts_merge_commutes(a in prop::collection::vec(0u8..3, 10..60), b in prop::collection::vec(0u8..3, 10..60)) {
        let mut x = BlockCounts::from_sequence(&a, 2);
        x.merge(&BlockCounts::from_sequence(&b, 2));
        let mut y = BlockCounts::from_sequence(&b, 2);
        y.merge(&BlockCounts::from_sequence(&a, 2));
        prop_assert_eq!(x, y);
    }

    #[test]
    fn evolve_commutes_with_union(s1 in any::<u64>(), s2 in any::<u64>()) {
        let sys = build_renewal_chain(ReturnLaw::telescoping(), Some(64)).unwrap();
        let a = sample_initial_configuration(&sys, 4, 25, s1).unwrap();
        let b = sample_initial_configuration(&sys, 4, 25, s2).unwrap();
        let u = evolve(&sys, &a.union(&b).unwrap(), 25).unwrap();
        let sum = evolve(&sys, &a, 25).unwrap().add(&evolve(&sys, &b, 25).unwrap()).unwrap();
        prop_assert_eq!(u, sum);
    }
}

/// Depth-`n` curve value with no pruning, and the same quantity from every
/// state path aggregated by its label word.
fn curve_and_brute_force(f: &[f64], n: usize) -> (f64, f64) {
    let sys = build_renewal_chain(ReturnLaw::finite(f.to_vec()).unwrap(), None).unwrap();
    let states: Vec<i64> = sys.states().to_vec();
    let core: Vec<i64> = states.iter().copied().filter(|s| s % 2 == 1).collect();
    let alpha = LocalPartition::singletons(&core).unwrap();
    let mut opts = CurveOptions::new(n);
    opts.prune_tol = 0.0;
    let c = cylinder_entropy_curve(&sys, &alpha, opts).unwrap();
    let k = states.len();
    let mut words: HashMap<Vec<usize>, f64> = HashMap::new();
    for code in 0..k.pow(n as u32) {
        let mut x = code;
        let path: Vec<i64> = (0..n)
            .map(|_| {
                let s = states[x % k];
                x /= k;
                s
            })
            .collect();
        let m = cylinder_measure(&sys, &path).unwrap().mass;
        if m > 0.0 {
            let w: Vec<usize> = path.iter().map(|&s| alpha.label_of(s)).collect();
            *words.entry(w).or_insert(0.0) += m;
        }
    }
    let mut masses: Vec<f64> = words.into_values().collect();
    masses.sort_by(f64::total_cmp);
    let brute = suspension_partition_entropy(&masses).unwrap() / n as f64;
    (c.points[n - 1].value, brute)
}

#[test]
fn curve_matches_brute_force_at_depth_twelve() {
    for f in [vec![0.3, 0.7], vec![0.2, 0.3, 0.5]] {
        let (curve, brute) = curve_and_brute_force(&f, 12);
        assert!((curve - brute).abs() < 1e-12, "{f:?}: {curve} vs {brute}");
    }
}

#[test]
fn poisson_entropy_shape_on_grid() {
    let grid: Vec<f64> = (1..=400).map(|i| i as f64 * 0.05).collect();
    let v: Vec<f64> = grid.iter().map(|&l| poisson_entropy_function(l).unwrap()).collect();
    for w in v.windows(2) {
        assert!(w[1] > w[0]);
    }
    for w in v.windows(3) {
        assert!(w[2] - 2.0 * w[1] + w[0] < 0.0);
    }
    for (&l, &f) in grid.iter().zip(&v) {
        // Gaussian envelope from above.
        let gauss = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * (l + 1.0 / 12.0)).ln();
        assert!(f <= gauss + 1e-9, "{l}");
        // Coarsening to {N = 0} vs {N > 0} can only lose entropy.
        let p0 = (-l).exp();
        let two = -(p0 * p0.ln() + (1.0 - p0) * (1.0 - p0).ln());
        assert!(f >= two - 1e-12, "{l}");
    }
}
