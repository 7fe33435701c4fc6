use levelcraft::apmm::{
    apmm_solve, epoch_count, initial_gap, rapmm_solve, AccelSchedule, ApmmConfig, ApmmState, LocalizerPolicy,
    TheoryParams,
};
use levelcraft::linalg::{dist, norm};
use levelcraft::problems::{desk_qcqp, desk_scaled, sharp_l1, smooth_quadratic};
use levelcraft::report::Telemetry;
use levelcraft::Error;

const POLICIES: [LocalizerPolicy; 4] = [
    LocalizerPolicy::DomainOnly,
    LocalizerPolicy::FullHistory,
    LocalizerPolicy::LimitedMemory(5),
    LocalizerPolicy::Averaging,
];

#[test]
fn gamma_follows_its_recursion() {
    let s = AccelSchedule::Nesterov;
    let mut gamma = 1.0;
    assert_eq!(s.gamma(1), 1.0);
    for k in 2..=10_000 {
        gamma /= 1.0 - s.alpha(k);
        assert!((gamma - s.gamma(k)).abs() <= 1e-11 * s.gamma(k), "k = {k}");
    }
    assert_eq!(s.alpha(1), 1.0);
    assert_eq!(AccelSchedule::Constant.alpha(7), 1.0);
}

#[test]
fn desk_nesterov_steps_obey_accelerated_bound() {
    let p = desk_qcqp();
    let x0 = [3.0, -2.0];
    // f is 2-smooth and g is affine, so M = 2 with rho = 1
    let theory = TheoryParams::new(1.0, 2.0, dist(&x0, &[0.5, 0.5])).unwrap();
    let mut st = ApmmState::new(&p, &x0, 0.5).unwrap();
    let mut tel = Telemetry::default();
    for k in 1..=200 {
        st.step(&p, 0.5, AccelSchedule::Nesterov, LocalizerPolicy::default(), &mut tel)
            .unwrap();
        assert!(st.vbar <= theory.accelerated_bound(k), "k = {k}: {}", st.vbar);
    }
    assert!(st.vbar <= 2e-4, "vbar {}", st.vbar);
    assert_eq!(tel.qp_solves, 200);
}

#[test]
fn desk_polyak_steps_converge_fast() {
    let p = desk_qcqp();
    let mut st = ApmmState::new(&p, &[3.0, -2.0], 0.5).unwrap();
    let mut tel = Telemetry::default();
    for _ in 0..20 {
        st.step(&p, 0.5, AccelSchedule::Constant, LocalizerPolicy::default(), &mut tel)
            .unwrap();
    }
    assert!(st.vbar <= 1e-6, "vbar {}", st.vbar);
}

#[test]
fn solve_on_desk_returns_near_optimal_point() {
    let p = desk_qcqp();
    let cfg = ApmmConfig::default();
    let sol = apmm_solve(&p, &[3.0, -2.0], 0.5, &cfg).unwrap();
    assert!(sol.report.converged());
    let ev = p.evaluate(&sol.x).unwrap();
    assert!((ev.objective() - 0.5).abs() <= 1e-6);
    assert!(ev.violation() <= 1e-6);
    assert_eq!(sol.report.algorithm, "apmm");
}

#[test]
fn start_within_tolerance_takes_no_steps() {
    let p = desk_qcqp();
    let sol = apmm_solve(&p, &[0.5, 0.5], 0.5, &ApmmConfig::default()).unwrap();
    assert!(sol.report.converged());
    assert_eq!(sol.report.iterations, 0);
    assert_eq!(sol.x, vec![0.5, 0.5]);
}

#[test]
fn iterates_are_monotone_and_fejer() {
    let cases = [
        (desk_qcqp(), vec![3.0, -2.0]),
        (desk_scaled(4.0), vec![-7.0, 9.0]),
        (smooth_quadratic(&[1.0, 4.0, 10.0]), vec![1.0, 1.0, 1.0]),
        (sharp_l1(&[1.0, 2.0, 3.0]), vec![1.0, -1.0, 2.0]),
    ];
    for (p, x0) in &cases {
        let fstar = p.known_fstar.unwrap();
        let xstar = p.known_solution.clone().unwrap();
        for schedule in [AccelSchedule::Nesterov, AccelSchedule::Constant] {
            for policy in POLICIES {
                let mut st = ApmmState::new(p, x0, fstar).unwrap();
                let mut tel = Telemetry::default();
                let mut prev_v = st.vbar;
                let mut prev_d = dist(&st.x, &xstar);
                let d0 = prev_d;
                for _ in 0..150 {
                    st.step(p, fstar, schedule, policy, &mut tel).unwrap();
                    let d = dist(&st.x, &xstar);
                    assert!(st.vbar <= prev_v, "{} {policy:?}", p.name);
                    assert!(d <= prev_d + 1e-9, "{} {policy:?}: {d} > {prev_d}", p.name);
                    assert!(d <= d0 + 1e-9);
                    prev_v = st.vbar;
                    prev_d = d;
                }
            }
        }
    }
}

#[test]
fn polyak_rate_on_nonsmooth_fixture() {
    let w = [1.0, 2.0, 3.0, 0.5];
    let p = sharp_l1(&w);
    let x0 = [2.0, -1.0, 0.5, 3.0];
    // w|y| - w|x| - s(y - x) <= 2 w |y - x| coordinatewise
    let m_hat = 2.0 * norm(&w);
    let theory = TheoryParams::new(0.0, m_hat, norm(&x0)).unwrap();
    for policy in POLICIES {
        let mut st = ApmmState::new(&p, &x0, 0.0).unwrap();
        let mut tel = Telemetry::default();
        for k in 1..=400 {
            st.step(&p, 0.0, AccelSchedule::Constant, policy, &mut tel).unwrap();
            assert!(
                st.vbar <= theory.constant_bound(k),
                "{policy:?} k = {k}: {} > {}",
                st.vbar,
                theory.constant_bound(k)
            );
        }
    }
}

#[test]
fn exact_target_never_empties_the_localizer() {
    for p in [desk_qcqp(), desk_scaled(4.0), sharp_l1(&[1.0, 3.0])] {
        let fstar = p.known_fstar.unwrap();
        for schedule in [AccelSchedule::Nesterov, AccelSchedule::Constant] {
            for policy in POLICIES {
                let cfg = ApmmConfig {
                    schedule,
                    policy,
                    eps: 1e-8,
                    max_iters: 300,
                };
                let x0 = vec![2.5; p.dim()];
                assert!(apmm_solve(&p, &x0, fstar, &cfg).is_ok(), "{} {policy:?}", p.name);
            }
        }
    }
}

#[test]
fn target_below_optimum_is_detected() {
    let p = desk_qcqp();
    let cfg = ApmmConfig {
        policy: LocalizerPolicy::FullHistory,
        max_iters: 2000,
        ..ApmmConfig::default()
    };
    match apmm_solve(&p, &[3.0, -2.0], 0.3, &cfg) {
        Err(Error::InvalidTargetValue { fstar, .. }) => assert_eq!(fstar, 0.3),
        other => panic!("expected InvalidTargetValue, got {other:?}"),
    }
}

#[test]
fn restart_schedule() {
    assert_eq!(initial_gap(2.0, 3.0, 0.0), 3.0);
    assert_eq!(initial_gap(5.0, 0.0, 1.0), 4.0);
    assert_eq!(epoch_count(1.0, 0.5, 1e-3), 10);
    assert_eq!(epoch_count(1e-4, 0.5, 1e-3), 0);

    let p = sharp_l1(&[1.0, 2.0, 3.0]);
    let cfg = ApmmConfig {
        eps: 1e-6,
        ..ApmmConfig::default()
    };
    let sol = rapmm_solve(&p, &[1.0, -1.0, 1.0], 0.0, 0.5, &cfg).unwrap();
    assert!(sol.report.converged());
    assert!(p.evaluate(&sol.x).unwrap().objective() <= 1e-6);
    assert!(rapmm_solve(&p, &[1.0, -1.0, 1.0], 0.0, 1.0, &cfg).is_err());
}
