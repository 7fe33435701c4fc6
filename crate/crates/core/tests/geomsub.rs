mod common;

use common::{all_rows, brute_force_epigraph, brute_force_projection};
use levelcraft::geomsub::{
    kkt_residual, solve_epigraph_lp, solve_nearest_point, LpProblem, LpStatus, QpProblem, QpStatus,
};
use levelcraft::linalg::{dist, dot};
use levelcraft::{AffineMinorant, BoxDomain, Cut};
use proptest::prelude::*;

fn cut_strategy(d: usize) -> impl Strategy<Value = Cut> {
    (prop::collection::vec(-1.0f64..1.0, d), -1.0f64..2.0).prop_map(|(a, b)| Cut::new(a, b))
}

fn qp_strategy() -> impl Strategy<Value = QpProblem> {
    (2usize..=3).prop_flat_map(|d| {
        (
            prop::collection::vec(-4.0f64..4.0, d),
            prop::collection::vec(cut_strategy(d), 0..4),
        )
            .prop_map(move |(center, cuts)| QpProblem {
                center,
                cuts,
                domain: BoxDomain::cube(d, -2.0, 2.0).unwrap(),
            })
    })
}

#[test]
fn projection_examples() {
    // onto x1 + x2 <= 1 from (2, 2)
    let q = QpProblem {
        center: vec![2.0, 2.0],
        cuts: vec![Cut::new(vec![1.0, 1.0], 1.0)],
        domain: BoxDomain::unbounded(2),
    };
    let s = solve_nearest_point(&q).unwrap();
    assert_eq!(s.status, QpStatus::Optimal);
    assert!(dist(&s.point, &[0.5, 0.5]) < 1e-12);
    assert!((s.multipliers[0] - 1.5).abs() < 1e-12);

    // feasible center is returned unchanged
    let q = QpProblem {
        center: vec![0.0, 0.0],
        ..q
    };
    let s = solve_nearest_point(&q).unwrap();
    assert_eq!(s.point, vec![0.0, 0.0]);
    assert_eq!(s.multipliers, vec![0.0]);

    // box only
    let q = QpProblem {
        center: vec![5.0, -0.5],
        cuts: vec![],
        domain: BoxDomain::cube(2, -1.0, 1.0).unwrap(),
    };
    assert!(dist(&solve_nearest_point(&q).unwrap().point, &[1.0, -0.5]) < 1e-15);
}

#[test]
fn contradictory_cuts_give_certificate() {
    let q = QpProblem {
        center: vec![0.0],
        cuts: vec![Cut::new(vec![1.0], -1.0), Cut::new(vec![-1.0], -1.0)],
        domain: BoxDomain::unbounded(1),
    };
    let s = solve_nearest_point(&q).unwrap();
    assert_eq!(s.status, QpStatus::Infeasible);
    let cert = s.certificate.unwrap();
    let (a, b) = cert.combination(&q);
    assert!(a[0].abs() < 1e-12 && b < 0.0);
}

#[test]
fn lp_examples() {
    // min max{x, -x} on [-1, 2] is 0
    let lp = LpProblem {
        pieces: vec![
            AffineMinorant {
                slope: vec![1.0],
                intercept: 0.0,
            },
            AffineMinorant {
                slope: vec![-1.0],
                intercept: 0.0,
            },
        ],
        cuts: vec![],
        domain: BoxDomain::cube(1, -1.0, 2.0).unwrap(),
    };
    let s = solve_epigraph_lp(&lp).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!(s.value.abs() < 1e-12 && s.point[0].abs() < 1e-12);

    // with x >= 1 the optimum moves to the cut
    let lp = LpProblem {
        cuts: vec![Cut::new(vec![-1.0], -1.0)],
        ..lp
    };
    let s = solve_epigraph_lp(&lp).unwrap();
    assert!((s.value - 1.0).abs() < 1e-12);

    let lp = LpProblem {
        cuts: vec![Cut::new(vec![-1.0], -5.0)],
        ..lp
    };
    let s = solve_epigraph_lp(&lp).unwrap();
    assert_eq!(s.status, LpStatus::Infeasible);
    assert_eq!(s.value, f64::INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_kkt_optimal_or_certified(q in qp_strategy()) {
        let s = solve_nearest_point(&q).unwrap();
        let reference = brute_force_projection(&q.center, &all_rows(&q.cuts, &q.domain));
        match s.status {
            QpStatus::Optimal => {
                prop_assert!(kkt_residual(&q, &s) <= 1e-7);
                prop_assert!(s.multipliers.iter().all(|m| *m >= 0.0));
                for (c, m) in q.cuts.iter().zip(&s.multipliers) {
                    prop_assert!(c.violation(&s.point) <= 1e-8);
                    prop_assert!((m * c.violation(&s.point)).abs() <= 1e-8);
                }
                prop_assert!(q.domain.contains(&s.point, 1e-12));
                let r = reference.expect("reference found no feasible point");
                prop_assert!(dist(&r, &s.point) <= 1e-7);
            }
            QpStatus::Infeasible => {
                prop_assert!(reference.is_none());
                let cert = s.certificate.clone().unwrap();
                let all_nonneg = cert.cut_weights.iter()
                    .chain(&cert.lower_weights)
                    .chain(&cert.upper_weights)
                    .all(|w| *w >= 0.0);
                prop_assert!(all_nonneg);
                let (a, b) = cert.combination(&q);
                let scale: f64 = 1.0 + cert.cut_weights.iter().chain(&cert.lower_weights).chain(&cert.upper_weights).sum::<f64>();
                prop_assert!(a.iter().all(|v| v.abs() <= 1e-8 * scale));
                prop_assert!(b < 0.0);
            }
        }
    }

    #[test]
    fn projection_is_nonexpansive(q in qp_strategy(), shift in prop::collection::vec(-3.0f64..3.0, 3)) {
        let s1 = solve_nearest_point(&q).unwrap();
        prop_assume!(s1.status == QpStatus::Optimal);
        let other: Vec<f64> = q.center.iter().zip(&shift).map(|(c, s)| c + s).collect();
        let q2 = QpProblem { center: other.clone(), ..q.clone() };
        let s2 = solve_nearest_point(&q2).unwrap();
        prop_assert_eq!(s2.status, QpStatus::Optimal);
        prop_assert!(dist(&s1.point, &s2.point) <= dist(&q.center, &other) + 1e-9);
    }

    #[test]
    fn epigraph_lp_matches_vertex_enumeration(
        d in 1usize..=2,
        raw in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 2), -1.0f64..1.0), 1..4),
        cuts in prop::collection::vec(cut_strategy(2), 0..3),
    ) {
        let pieces: Vec<AffineMinorant> = raw.into_iter()
            .map(|(s, b)| AffineMinorant { slope: s[..d].to_vec(), intercept: b })
            .collect();
        let cuts: Vec<Cut> = cuts.into_iter().map(|c| Cut::new(c.slope[..d].to_vec(), c.rhs)).collect();
        let lp = LpProblem { pieces: pieces.clone(), cuts: cuts.clone(), domain: BoxDomain::cube(d, -3.0, 3.0).unwrap() };
        let s = solve_epigraph_lp(&lp).unwrap();
        match brute_force_epigraph(&pieces, &cuts, &lp.domain) {
            Some(v) => {
                prop_assert_eq!(s.status, LpStatus::Optimal);
                prop_assert!((s.value - v).abs() <= 1e-8 * (1.0 + v.abs()));
                let at = pieces.iter().map(|p| dot(&p.slope, &s.point) + p.intercept).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!((at - s.value).abs() <= 1e-8 * (1.0 + v.abs()));
            }
            None => prop_assert_eq!(s.status, LpStatus::Infeasible),
        }
    }
}
