use lrp_core::analysis::{delta_lower_bound, f_scaling, smallest_theta_constant};
use lrp_core::clusters::{build_partition, largest_cluster_size, restricted_cluster_size, typical_value_from_histogram, SizeHistogram};
use lrp_core::kernel::{KernelSpec, LatticeBox};
use lrp_core::rng::SeedSpec;
use lrp_core::sampler::sample_grouped;
use num_rational::BigRational;
use proptest::prelude::*;

/// Vertex sets of the components, by breadth-first search over an adjacency list.
fn bfs_components(len: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); len];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut comp = vec![usize::MAX; len];
    for s in 0..len {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = s;
        let mut queue = vec![s];
        while let Some(v) = queue.pop() {
            for &w in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = s;
                    queue.push(w);
                }
            }
        }
    }
    comp
}

fn model() -> impl Strategy<Value = (usize, u32, f64, f64, u64)> {
    (1usize..=2, 1u32..6, 0.1f64..2.5, 0.0f64..3.0, any::<u64>()).prop_map(|(d, n, alpha, beta, seed)| (d, if d == 2 { n.min(3) } else { n * 3 }, alpha, beta, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_agrees_with_breadth_first_search((d, n, alpha, beta, seed) in model()) {
        let spec = KernelSpec::new(d, alpha, beta).unwrap();
        let config = sample_grouped(&spec, LatticeBox::new(d, n).unwrap(), SeedSpec::new(seed, 0)).unwrap();
        let len = config.lattice.len();
        let edges: Vec<(usize, usize)> = config.edges.iter().map(|e| (e.a as usize, e.b as usize)).collect();
        let comp = bfs_components(len, &edges);
        let partition = build_partition(&config).unwrap();
        for a in 0..len {
            for b in 0..len {
                prop_assert_eq!(partition.connected(a, b), comp[a] == comp[b]);
            }
        }
        let sizes = partition.component_sizes();
        prop_assert_eq!(sizes.iter().map(|&s| s as usize).sum::<usize>(), len);
        let origin = config.lattice.origin_index();
        let origin_size = comp.iter().filter(|&&c| c == comp[origin]).count();
        prop_assert_eq!(partition.origin_cluster_size() as usize, origin_size);
        prop_assert!(largest_cluster_size(&partition) as usize >= origin_size);
    }

    #[test]
    fn restricted_clusters_grow_with_the_box((d, n, alpha, beta, seed) in model()) {
        let spec = KernelSpec::new(d, alpha, beta).unwrap();
        let config = sample_grouped(&spec, LatticeBox::new(d, n).unwrap(), SeedSpec::new(seed, 1)).unwrap();
        let sizes: Vec<u32> = (0..=n).map(|k| restricted_cluster_size(&config, k).unwrap()).collect();
        prop_assert_eq!(sizes[0], 1);
        prop_assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
        for (k, &s) in sizes.iter().enumerate() {
            prop_assert!(s as usize <= LatticeBox::new(d, k as u32).unwrap().len());
        }
        prop_assert_eq!(sizes[n as usize], build_partition(&config).unwrap().origin_cluster_size());
        prop_assert!(restricted_cluster_size(&config, n + 1).is_err());
    }

    #[test]
    fn edges_stay_inside_the_box_and_are_unique((d, n, alpha, beta, seed) in model()) {
        let spec = KernelSpec::new(d, alpha, beta).unwrap();
        let lattice = LatticeBox::new(d, n).unwrap();
        let config = sample_grouped(&spec, lattice, SeedSpec::new(seed, 2)).unwrap();
        prop_assert!(config.edges.iter().all(|e| e.a < e.b && (e.b as usize) < lattice.len()));
        prop_assert!(config.edges.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(&config, &sample_grouped(&spec, lattice, SeedSpec::new(seed, 2)).unwrap());
    }

    #[test]
    fn connection_probability_is_monotone(alpha in 0.05f64..4.0, b1 in 0.0f64..5.0, b2 in 0.0f64..5.0, r in 1i64..1000) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let s = KernelSpec::new(1, alpha, lo).unwrap();
        let t = KernelSpec::new(1, alpha, hi).unwrap();
        let p = |spec: &KernelSpec, r: i64| spec.connection_probability(&[0], &[r]);
        prop_assert!((0.0..1.0).contains(&p(&s, r)));
        prop_assert!(p(&s, r) <= p(&t, r));
        prop_assert!(p(&t, r + 1) <= p(&t, r));
        prop_assert_eq!(p(&t, r), p(&t, -r));
    }

    #[test]
    fn survival_and_typical_value(sizes in prop::collection::vec(1u32..200, 1..400)) {
        let mut h = SizeHistogram::default();
        sizes.iter().for_each(|&s| h.record(s));
        prop_assert_eq!(h.survival(1), 1.0);
        prop_assert!((1..=h.max_value() + 1).all(|m| h.survival(m + 1) <= h.survival(m)));
        prop_assert_eq!(h.survival(h.max_value() + 1), 0.0);
        let q = typical_value_from_histogram(&h);
        prop_assert!(q.m_low <= q.m_hat && q.m_hat <= q.m_high);
        prop_assert!(h.survival(q.m_hat) <= (-1.0f64).exp());
        prop_assert!(q.m_hat == 0 || h.survival(q.m_hat - 1) > (-1.0f64).exp());
    }

    #[test]
    fn theta_constant_covers_every_partial_sum(sizes in prop::collection::vec(1u32..100, 1..200), theta in 0.0f64..=1.0) {
        let mut h = SizeHistogram::default();
        sizes.iter().for_each(|&s| h.record(s));
        let c = smallest_theta_constant(&h, theta).unwrap();
        prop_assert!(c >= 1.0);
        let mut partial = 0.0;
        let mut tight = c == 1.0;
        for k in 1..=h.max_value() {
            partial += h.survival(k);
            let bound = c * (k as f64).powf(1.0 - theta);
            prop_assert!(partial <= bound * (1.0 + 1e-12));
            tight |= partial >= bound * (1.0 - 1e-12);
        }
        prop_assert!(tight);
    }

    #[test]
    fn delta_bound_grows_with_alpha(d in 1u32..=4, a in 1i64..200, b in 1i64..200) {
        let (lo, hi) = (BigRational::new(a.min(b).into(), 100.into()), BigRational::new(a.max(b).into(), 100.into()));
        let lo_bound = delta_lower_bound(d, &lo);
        let hi_bound = delta_lower_bound(d, &hi);
        if let (Ok(l), Ok(h)) = (lo_bound, hi_bound) {
            prop_assert!(l <= h);
            prop_assert!(l > BigRational::from_integer(1.into()));
        }
    }

    #[test]
    fn f_scaling_decreases_in_n(n in 3u64..100_000, alpha in 0.01f64..3.0) {
        let (a, b) = (f_scaling(n, alpha).unwrap(), f_scaling(n + 1, alpha).unwrap());
        prop_assert!(b < a && b > 0.0 && a <= 1.0);
    }
}
