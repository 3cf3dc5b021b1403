//! Randomized property checks for the signal/system layer.

use ilcbench_core::filter::NoncausalFilter;
use ilcbench_core::frf::log_grid;
use ilcbench_core::lifted::LiftedOperator;
use ilcbench_core::signal::Signal;
use ilcbench_core::trajectory::{fourth_order_profile, MotionLimits};
use ilcbench_core::transfer::TransferFunction;
use proptest::prelude::*;

const TS: f64 = 1e-3;

/// Random stable rational system: poles drawn strictly inside the unit
/// circle (conjugate pair plus a real pole), numerator free.
fn stable_system() -> impl Strategy<Value = TransferFunction> {
    (
        0.05f64..0.95,
        0.0f64..std::f64::consts::PI,
        -0.9f64..0.9,
        proptest::collection::vec(-2.0f64..2.0, 1..5),
    )
        .prop_map(|(radius, angle, real_pole, num)| {
            let (s, c) = angle.sin_cos();
            let _ = s;
            // (1 - 2 r cos(a) w + r^2 w^2)(1 - p w)
            let pair = [1.0, -2.0 * radius * c, radius * radius];
            let den = vec![
                pair[0],
                pair[1] - real_pole * pair[0],
                pair[2] - real_pole * pair[1],
                -real_pole * pair[2],
            ];
            TransferFunction::new(num, den, TS).expect("valid system")
        })
}

fn signal(n: usize) -> impl Strategy<Value = Signal> {
    proptest::collection::vec(-1.0f64..1.0, n..=n)
        .prop_map(|v| Signal::new(v, TS).expect("valid signal"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// simulate(a u1 + b u2) = a simulate(u1) + b simulate(u2).
    #[test]
    fn simulation_is_linear(
        sys in stable_system(),
        u1 in signal(96),
        u2 in signal(96),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let combo = u1.scaled(a).try_add(&u2.scaled(b)).unwrap();
        let left = sys.simulate(&combo).unwrap();
        let right = sys
            .simulate(&u1).unwrap().scaled(a)
            .try_add(&sys.simulate(&u2).unwrap().scaled(b))
            .unwrap();
        let scale = right.norm2().max(1.0);
        prop_assert!(left.try_sub(&right).unwrap().norm2() <= 1e-10 * scale);
    }

    /// Time simulation equals the lifted matrix-vector product.
    #[test]
    fn simulation_matches_lifted_operator(
        sys in stable_system(),
        u in signal(128),
    ) {
        let lifted = LiftedOperator::from_transfer_function(&sys, u.len()).unwrap();
        let by_matrix = lifted.apply(u.samples());
        let by_sim = sys.simulate(&u).unwrap();
        let scale = by_sim.norm2().max(1.0);
        let diff: f64 = by_matrix
            .iter()
            .zip(by_sim.samples())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff <= 1e-10 * scale);
    }

    /// The response of a product of systems is the elementwise product of
    /// the responses.
    #[test]
    fn frequency_response_multiplies(
        a in stable_system(),
        b in stable_system(),
    ) {
        let grid = log_grid(2.0 * std::f64::consts::PI, std::f64::consts::PI / TS, 40);
        let fa = a.freq_response(&grid).unwrap();
        let fb = b.freq_response(&grid).unwrap();
        let fab = a.series(&b).unwrap().freq_response(&grid).unwrap();
        let pointwise = fa.scalar_product(&fb).unwrap();
        for i in 0..grid.len() {
            let x = fab.scalar_value(i).unwrap();
            let y = pointwise.scalar_value(i).unwrap();
            let scale = y.norm().max(1.0);
            prop_assert!((x - y).norm() <= 1e-9 * scale);
        }
    }

    /// Two-sided filtering equals the banded lifted operator.
    #[test]
    fn filtering_matches_lifted_operator(
        taps in proptest::collection::vec(-1.0f64..1.0, 3..24),
        preview in 0usize..3,
        x in signal(128),
    ) {
        prop_assume!(taps.iter().any(|t| t.abs() > 1e-3));
        let preview = preview.min(taps.len() - 1);
        let filter = NoncausalFilter::new(taps, preview, TS).unwrap();
        let lifted = LiftedOperator::from_filter(&filter, x.len()).unwrap();
        let by_matrix = lifted.apply(x.samples());
        let by_filter = filter.apply(&x).unwrap();
        let scale = by_filter.norm2().max(1.0);
        let diff: f64 = by_matrix
            .iter()
            .zip(by_filter.samples())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff <= 1e-10 * scale);
    }

    /// Doubling the move never shortens the profile.
    #[test]
    fn longer_moves_take_at_least_as_long(
        d in 0.001f64..0.5,
        v in 0.05f64..1.0,
        a in 0.5f64..10.0,
        j in 5.0f64..200.0,
        s in 100.0f64..5000.0,
    ) {
        let limits = MotionLimits {
            velocity: v,
            acceleration: a,
            jerk: j,
            snap: Some(s),
        };
        let short = fourth_order_profile(d, &limits, TS).unwrap();
        let long = fourth_order_profile(2.0 * d, &limits, TS).unwrap();
        prop_assert!(long.len() >= short.len());
        // And both land exactly where asked.
        prop_assert!(
            (short.position().samples()[short.len() - 1] - d).abs() <= 1e-9 * d
        );
    }
}
