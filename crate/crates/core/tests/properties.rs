use bayesmatch::dist::{tv_distance, Label, MatchDistribution};
use bayesmatch::exact::{marginals_bruteforce_exact, marginals_permanent_exact, ExactPosteriorProblem};
use bayesmatch::io::fmt_f64;
use bayesmatch::model::PotentialV;
use bayesmatch::partial::{count_partial_bijections, marginals_bruteforce_partial, marginals_dp_partial, PartialPosteriorProblem};
use proptest::prelude::*;

fn points(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|n| (prop::collection::vec(0.0..1.0f64, n), prop::collection::vec(0.0..1.0f64, n)))
}

fn dist(n: usize) -> impl Strategy<Value = MatchDistribution> {
    prop::collection::vec(0.0..1.0f64, n).prop_map(|w| {
        let w: Vec<(Label, f64)> = w.into_iter().enumerate().map(|(j, v)| (Label::Y(j as i64), v + 1e-3)).collect();
        MatchDistribution::from_weights(w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_marginals_are_doubly_stochastic((x, y) in points(6), sigma in 0.3..2.0f64) {
        let n = x.len();
        let p = ExactPosteriorProblem::from_points(x, y, n as f64, PotentialV::gaussian(sigma).unwrap()).unwrap();
        let t = marginals_permanent_exact(&p).unwrap();
        prop_assert!(t.max_row_defect() < 1e-12);
        prop_assert!(t.max_column_defect() < 1e-9);
    }

    #[test]
    fn relabeling_x_permutes_rows((x, y) in points(6), rot in 0usize..6) {
        let n = x.len();
        let r = rot % n;
        let g = PotentialV::gaussian(1.0).unwrap();
        let base = marginals_bruteforce_exact(&ExactPosteriorProblem::from_points(x.clone(), y.clone(), n as f64, g.clone()).unwrap()).unwrap();
        let mut xr = x.clone();
        xr.rotate_left(r);
        let moved = marginals_bruteforce_exact(&ExactPosteriorProblem::from_points(xr, y, n as f64, g).unwrap()).unwrap();
        for i in 0..n {
            prop_assert!(tv_distance(&moved.row(i), &base.row((i + r) % n)) < 1e-12);
        }
    }

    #[test]
    fn partial_dp_matches_enumeration(
        x in prop::collection::vec(0.0..1.0f64, 0..4),
        y in prop::collection::vec(0.0..1.0f64, 0..4),
        u in -1.0..1.0f64,
    ) {
        let (nx, ny) = (x.len(), y.len());
        let p = PartialPosteriorProblem::from_parts(x, y, 4.0, PotentialV::gaussian(1.0).unwrap(), vec![u; nx], vec![-u; ny]).unwrap();
        let a = marginals_bruteforce_partial(&p).unwrap();
        let b = marginals_dp_partial(&p).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn tv_is_a_bounded_symmetric_metric(p in dist(5), q in dist(5), r in dist(5)) {
        let (pq, qp) = (tv_distance(&p, &q), tv_distance(&q, &p));
        prop_assert!((pq - qp).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!(tv_distance(&p, &p) < 1e-15);
        prop_assert!(pq <= tv_distance(&p, &r) + tv_distance(&r, &q) + 1e-12);
    }

    #[test]
    fn partial_count_recursion(a in 1u64..12, b in 1u64..12) {
        let c = |a, b| count_partial_bijections(a, b).unwrap();
        prop_assert_eq!(c(a, b), c(a - 1, b) + b as u128 * c(a - 1, b - 1));
        prop_assert_eq!(c(a, b), c(b, a));
    }

    #[test]
    fn float_text_round_trips(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }
}
