use proptest::prelude::*;

use otflow::divergences::mmd_energy;
use otflow::sinkhorn::sinkhorn_self;
use otflow::{Icnn, IcnnSpec, MapModel, PointCloud};

fn cloud(dim: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), 2..12)
        .prop_map(|rows| PointCloud::from_rows(&rows).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_is_convex_along_segments(
        theta in prop::collection::vec(-2.0f64..2.0, 71),
        x in prop::collection::vec(-4.0f64..4.0, 3),
        y in prop::collection::vec(-4.0f64..4.0, 3),
        t in 0.0f64..1.0,
    ) {
        let net = Icnn::new(IcnnSpec::new(3, vec![5, 5])).unwrap();
        prop_assert_eq!(net.param_count(), 71);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let gap = net.potential(&theta, &mid).unwrap()
            - t * net.potential(&theta, &x).unwrap()
            - (1.0 - t) * net.potential(&theta, &y).unwrap();
        prop_assert!(gap <= 1e-10, "gap {}", gap);
    }

    #[test]
    fn energy_distance_is_symmetric_and_nonnegative(x in cloud(2), y in cloud(2)) {
        let xy = mmd_energy(&x, &y).unwrap();
        let yx = mmd_energy(&y, &x).unwrap();
        prop_assert!(xy >= -1e-12);
        prop_assert!((xy - yx).abs() <= 1e-12 * (1.0 + xy.abs()));
        prop_assert_eq!(mmd_energy(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn sinkhorn_potentials_are_permutation_equivariant(x in cloud(2), shift in 1usize..11) {
        let n = x.len();
        let rows = x.to_rows();
        let perm: Vec<Vec<f64>> = (0..n).map(|i| rows[(i + shift) % n].clone()).collect();
        let y = PointCloud::from_rows(&perm).unwrap();
        let a = sinkhorn_self(&x, 0.5, 1e-11, 10_000).unwrap();
        let b = sinkhorn_self(&y, 0.5, 1e-11, 10_000).unwrap();
        for i in 0..n {
            prop_assert!((a.f[(i + shift) % n] - b.f[i]).abs() <= 1e-8);
        }
    }
}
