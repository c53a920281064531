use depgrid_core::normal::normal_cdf;
use depgrid_core::{
    partition_index, ConditionSet, Dimension, DomainSpace, Marginal, MassModel, Partition,
    PartitionGrid, Scenario,
};
use proptest::prelude::*;

fn space3() -> DomainSpace {
    DomainSpace::new(vec![
        Dimension::new("v", 0.0, 10.0),
        Dimension::new("t", 0.0, 10.0),
        Dimension::new("y", 0.0, 50.0),
    ])
    .unwrap()
}

fn marginal_for(dim: &Dimension) -> impl Strategy<Value = Marginal> {
    let (lo, hi) = (dim.min, dim.max);
    let span = hi - lo;
    prop_oneof![
        (0.0..0.9f64, 0.05..1.0f64).prop_map(move |(s, w)| {
            let a = lo + s * span;
            let b = (a + w * span).min(hi);
            let b = if b > a { b } else { hi };
            Marginal::Uniform { a, b }
        }),
        (-0.5..1.5f64, 0.01..1.0f64).prop_map(move |(m, s)| Marginal::ClippedGaussian {
            mu: lo + m * span,
            sigma: s * span,
        }),
    ]
}

fn condition() -> impl Strategy<Value = ConditionSet> {
    let space = space3();
    let dims = space.dims().to_vec();
    (
        marginal_for(&dims[0]),
        marginal_for(&dims[1]),
        marginal_for(&dims[2]),
    )
        .prop_map(move |(a, b, c)| {
            ConditionSet::new("random", space.clone(), vec![a, b, c]).unwrap()
        })
}

fn grid() -> impl Strategy<Value = PartitionGrid> {
    prop::collection::vec(1usize..12, 3).prop_map(PartitionGrid::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masses_are_normalized_and_nonnegative(cond in condition(), grid in grid()) {
        let p = Partition::new(space3(), grid).unwrap();
        let masses = cond.region_masses(&p);
        prop_assert!(masses.iter().all(|&m| m >= 0.0));
        let total: f64 = masses.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn sampled_scenarios_locate_in_their_region(cond in condition(), grid in grid(), seed in any::<u64>()) {
        let p = Partition::new(space3(), grid).unwrap();
        for x in cond.sample(200, seed) {
            let r = p.locate(&x).unwrap();
            prop_assert!(r.contains(&x));
            // The region is unique: neighbours in flat order do not claim x.
            let flat = p.flat_index(&r.index);
            let hits = (0..p.region_count()).filter(|&f| p.region_at(f).contains(&x)).count();
            prop_assert_eq!(hits, 1);
            prop_assert_eq!(p.locate_flat(&x).unwrap(), flat);
        }
    }

    #[test]
    fn sampling_is_a_pure_function(cond in condition(), n in 0usize..300, seed in any::<u64>()) {
        prop_assert_eq!(cond.sample(n, seed), cond.sample(n, seed));
    }

    #[test]
    fn uniform_support_regions_have_equal_mass(bins in 1usize..20, lo_bin in 0usize..20, width in 1usize..20) {
        let lo_bin = lo_bin % bins;
        let hi_bin = (lo_bin + width).min(bins);
        let space = DomainSpace::new(vec![Dimension::new("x", 0.0, 10.0)]).unwrap();
        let edge = |i: usize| 10.0 * (i as f64 / bins as f64);
        let cond = ConditionSet::new(
            "u",
            space.clone(),
            vec![Marginal::Uniform { a: edge(lo_bin), b: edge(hi_bin) }],
        ).unwrap();
        let p = Partition::new(space, PartitionGrid::new(vec![bins])).unwrap();
        let expected = 1.0 / (hi_bin - lo_bin) as f64;
        for (i, m) in cond.region_masses(&p).into_iter().enumerate() {
            if (lo_bin..hi_bin).contains(&i) {
                prop_assert!((m - expected).abs() < 1e-12);
            } else {
                prop_assert_eq!(m, 0.0);
            }
        }
    }
}

#[test]
fn free_function_partition_index() {
    let grid = PartitionGrid::new(vec![10, 10, 10]);
    let r = partition_index(&grid, &space3(), &Scenario(vec![3.2, 9.9, 38.5])).unwrap();
    assert_eq!(r.index, vec![3, 9, 7]);
}

/// Per-bin frequencies of 1e5 uniform draws stay within four binomial
/// standard errors of the analytic masses.
#[test]
fn uniform_sample_frequencies_match_masses() {
    let space = space3();
    let cond = ConditionSet::new(
        "u",
        space.clone(),
        vec![
            Marginal::Uniform { a: 0.0, b: 10.0 },
            Marginal::Uniform { a: 2.0, b: 7.0 },
            Marginal::Uniform { a: 0.0, b: 50.0 },
        ],
    )
    .unwrap();
    let p = Partition::new(space, PartitionGrid::new(vec![4, 5, 2])).unwrap();
    let n = 100_000;
    let mut counts = vec![0usize; p.region_count()];
    for x in cond.sample(n, 17) {
        counts[p.locate_flat(&x).unwrap()] += 1;
    }
    for (flat, m) in cond.region_masses(&p).into_iter().enumerate() {
        let freq = counts[flat] as f64 / n as f64;
        let se = (m * (1.0 - m) / n as f64).sqrt();
        assert!(
            (freq - m).abs() <= 4.0 * se + 1e-12,
            "region {flat}: freq {freq} mass {m}"
        );
    }
}

#[test]
fn clipped_gaussian_atom_frequency() {
    let space = DomainSpace::new(vec![Dimension::new("v", 0.0, 10.0)]).unwrap();
    let cond = ConditionSet::new(
        "g",
        space.clone(),
        vec![Marginal::ClippedGaussian {
            mu: 3.0,
            sigma: 2.0,
        }],
    )
    .unwrap();
    let n = 100_000;
    let at_zero = cond
        .sample(n, 3)
        .iter()
        .filter(|x| x.values()[0] == 0.0)
        .count();
    let p_atom = normal_cdf(-1.5);
    assert!((p_atom - 0.0668072).abs() < 1e-6);
    let se = (p_atom * (1.0 - p_atom) / n as f64).sqrt();
    let freq = at_zero as f64 / n as f64;
    assert!((freq - p_atom).abs() <= 4.0 * se, "freq {freq} vs {p_atom}");

    // The analytic first-bin mass includes the atom.
    let p = Partition::new(space, PartitionGrid::new(vec![10])).unwrap();
    let m0 = cond.region_mass(&p.region_at(0));
    assert!((m0 - normal_cdf(-1.0)).abs() < 1e-15);
}
