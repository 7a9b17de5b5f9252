mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use hawkes_decomp::covariance::{covariance_grid, covariance_grid_sequential};
use hawkes_decomp::fit::{fit_expansion, fit_single, FitResult};
use hawkes_decomp::io::{format_events, parse_events};
use hawkes_decomp::kernels::{
    reduce_intraclass_product, BaseKernel, CompositeKernel, CompositionOp, IntraclassProduct, KernelFamily,
    StationarityVerdict,
};
use hawkes_decomp::likelihood::{compensator_increments, kernel_cumulative, ks_unit_exponential};
use hawkes_decomp::report::build_bundle;
use hawkes_decomp::search::{decompose, select_level, DecomposeConfig, FitStage, Level};
use hawkes_decomp::simulate::simulate;
use hawkes_decomp::spectral::{hilbert_transform, KernelEstimate};
use hawkes_decomp::{EventSequence, HawkesModel};

fn exp() -> impl Strategy<Value = BaseKernel> {
    (0.05f64..5.0, 0.1f64..10.0).prop_map(|(alpha, beta)| BaseKernel::Exp { alpha, beta })
}

fn pwl() -> impl Strategy<Value = BaseKernel> {
    (0.01f64..2.0, 0.05f64..2.0, 1.2f64..4.0).prop_map(|(k, c, p)| BaseKernel::Pwl { k, c, p })
}

fn sqr() -> impl Strategy<Value = BaseKernel> {
    (0.05f64..2.0, 0.1f64..10.0).prop_map(|(b, l)| BaseKernel::Sqr { b, l })
}

fn sns() -> impl Strategy<Value = BaseKernel> {
    (0.05f64..2.0, 0.3f64..10.0).prop_map(|(a, omega)| BaseKernel::Sns { a, omega })
}

fn base() -> impl Strategy<Value = BaseKernel> {
    prop_oneof![exp(), pwl(), sqr(), sns()]
}

fn composite() -> impl Strategy<Value = CompositeKernel> {
    prop_oneof![
        base().prop_map(CompositeKernel::Single),
        (base(), base()).prop_map(|(a, b)| CompositeKernel::Sum(a, b)),
        (base(), base()).prop_map(|(a, b)| CompositeKernel::Product(a, b)),
    ]
}

fn sorted_times(max: usize, horizon: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..horizon, 0..max).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    })
}

fn verdict(norm: f64) -> StationarityVerdict {
    StationarityVerdict {
        norm_value: norm,
        is_bound: false,
        stationary: (0.0..1.0).contains(&norm),
    }
}

proptest! {
    #[test]
    fn composition_is_pointwise(a in base(), b in base(), t in 0.0f64..20.0) {
        let (fa, fb) = (a.evaluate(t), b.evaluate(t));
        prop_assert_eq!(CompositeKernel::Sum(a, b).evaluate(t), fa + fb);
        prop_assert_eq!(CompositeKernel::Product(a, b).evaluate(t), fa * fb);
        prop_assert!((a.evaluate(t) - common::base(&a, t)).abs() <= 1e-12 * common::base(&a, t).abs().max(1e-300));
    }

    #[test]
    fn sum_norm_is_additive(a in base(), b in base()) {
        let s = CompositeKernel::Sum(a, b).stationarity().unwrap().norm_value;
        let na = CompositeKernel::Single(a).stationarity().unwrap().norm_value;
        let nb = CompositeKernel::Single(b).stationarity().unwrap().norm_value;
        prop_assert!((s - (na + nb)).abs() <= 1e-14 * s);
    }

    #[test]
    fn exact_intraclass_reductions(
        factors in prop_oneof![
            prop::collection::vec(exp(), 1..5),
            prop::collection::vec(sqr(), 1..5),
        ],
        t in 0.0f64..12.0,
    ) {
        let IntraclassProduct::Exact { kernel } = reduce_intraclass_product(&factors).unwrap() else {
            return Err(TestCaseError::fail("EXP and SQR reduce exactly"));
        };
        let explicit: f64 = factors.iter().map(|k| common::base(k, t)).product();
        prop_assert!((kernel.evaluate(t) - explicit).abs() <= 1e-12 * explicit.max(1e-300));
    }

    #[test]
    fn envelope_dominates_later_values(k in composite(), t in 0.0f64..10.0, ds in prop::collection::vec(0.0f64..10.0, 32)) {
        let env = k.envelope(t);
        for d in ds {
            prop_assert!(k.evaluate(t + d) <= env * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn cumulative_is_monotone(k in composite(), mut s in prop::collection::vec(0.0f64..30.0, 2..20)) {
        s.sort_by(f64::total_cmp);
        let v: Vec<f64> = s.iter().map(|&x| kernel_cumulative(&k, x)).collect();
        for w in v.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * w[1].abs());
        }
    }

    #[test]
    fn cumulative_of_sum_adds(a in base(), b in base(), s in 0.0f64..30.0) {
        let sum = kernel_cumulative(&CompositeKernel::Sum(a, b), s);
        let parts = kernel_cumulative(&a.into(), s) + kernel_cumulative(&b.into(), s);
        prop_assert!((sum - parts).abs() <= 1e-13 * sum.max(1e-300));
        let oracle = common::integral(&CompositeKernel::Sum(a, b), s, 1e-11);
        prop_assert!((sum - oracle).abs() <= 1e-8 * oracle.max(1e-300));
    }

    #[test]
    fn compensator_increments_are_positive(k in composite(), times in sorted_times(60, 50.0), mu in 0.1f64..2.0) {
        let inc = compensator_increments(mu, &k, &times);
        prop_assert_eq!(inc.len(), times.len());
        prop_assert!(inc.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn hilbert_is_linear_and_preserves_ac_energy(
        x in prop::collection::vec(-1.0f64..1.0, 64),
        y in prop::collection::vec(-1.0f64..1.0, 64),
        a in -3.0f64..3.0,
    ) {
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let (hx, hy, hc) = (hilbert_transform(&x), hilbert_transform(&y), hilbert_transform(&combo));
        for i in 0..64 {
            prop_assert!((hc[i] - (a * hx[i] + hy[i])).abs() <= 1e-12);
        }
        let n = x.len() as f64;
        let dc = x.iter().sum::<f64>() / n;
        let nyq = x.iter().enumerate().map(|(j, v)| if j % 2 == 0 { *v } else { -*v }).sum::<f64>() / n;
        let energy = x.iter().map(|v| v * v).sum::<f64>() - n * (dc * dc + nyq * nyq);
        let h_energy = hx.iter().map(|v| v * v).sum::<f64>();
        prop_assert!((energy - h_energy).abs() <= 1e-9 * energy.max(1.0));
    }

    #[test]
    fn events_round_trip_exactly(times in sorted_times(200, 1000.0), extra in 0.0f64..10.0) {
        let horizon = times.last().copied().unwrap_or(0.0) + extra + 1e-3;
        let ev = EventSequence::new(times, horizon).unwrap();
        let text = format_events(&ev);
        let back = parse_events("mem.csv".as_ref(), &text).unwrap();
        prop_assert_eq!(back.times(), ev.times());
        prop_assert_eq!(format_events(&back), text);
    }

    #[test]
    fn level_rule_matches_definition(
        r1 in 0.0f64..5.0, r2 in 0.0f64..5.0,
        n1 in 0.0f64..2.0, n2 in 0.0f64..2.0,
        eta in 1.0f64..3.0,
    ) {
        let kernel: CompositeKernel = BaseKernel::Exp { alpha: 0.5, beta: 1.0 }.into();
        let k1 = FitResult { kernel, residue: r1, verdict: verdict(n1) };
        let k2 = FitResult { kernel, residue: r2, verdict: verdict(n2) };
        let got = select_level(&k1, &k2, eta);
        let expected = match (n1 < 1.0, n2 < 1.0) {
            (true, true) => Some(if r1 >= eta * r2 { Level::K2 } else { Level::K1 }),
            (true, false) => Some(Level::K1),
            (false, true) => Some(Level::K2),
            (false, false) => None,
        };
        prop_assert_eq!(got, expected);
        prop_assert_eq!(select_level(&k1, &k2, f64::INFINITY).is_some_and(|l| l == Level::K2), n1 >= 1.0 && n2 < 1.0);
        if n1 < 1.0 && n2 < 1.0 && r2 <= r1 {
            prop_assert_eq!(select_level(&k1, &k2, 1.0), Some(Level::K2));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fits_are_deterministic_and_residue_is_exact(
        alpha in 0.2f64..0.8, beta in 0.5f64..3.0, b in 0.0f64..0.1, family in 0usize..4,
    ) {
        let est = KernelEstimate::from_fn(
            |t| alpha * (-beta * t).exp() + if t <= 1.5 { b } else { 0.0 },
            0.04,
            100,
        ).unwrap();
        let fam = [KernelFamily::Exp, KernelFamily::Pwl, KernelFamily::Sqr, KernelFamily::Sns][family];
        let f1 = fit_single(&est, fam).unwrap();
        let f2 = fit_single(&est, fam).unwrap();
        prop_assert_eq!(&f1, &f2);
        let oracle: f64 = est.times().iter().zip(&est.values)
            .map(|(&t, &v)| (v - common::phi(&f1.kernel, t)).abs() * est.delta)
            .sum();
        prop_assert!((f1.residue - oracle).abs() <= 1e-12 * oracle.max(1.0));

        let add = fit_expansion(&est, &f1, CompositionOp::Sum, KernelFamily::Sqr).unwrap();
        prop_assert!(add.residue <= f1.residue + 1e-12);
    }

    #[test]
    fn covariance_grid_is_order_independent_and_scales(seed in 0u64..1000, s in 0.1f64..20.0) {
        let model = HawkesModel::new(1.0, BaseKernel::Exp { alpha: 0.6, beta: 2.0 }.into()).unwrap();
        let ev = simulate(&model, 500.0, seed).unwrap();
        let par = covariance_grid(&ev, 0.05, 3.0).unwrap();
        let seq = covariance_grid_sequential(&ev, 0.05, 3.0).unwrap();
        prop_assert_eq!(&par, &seq);

        let scaled = ev.rescaled(s).unwrap();
        let g = covariance_grid(&scaled, 0.05 * s, 3.0 * s).unwrap();
        prop_assert!((g.lambda_hat * s - par.lambda_hat).abs() <= 1e-12 * par.lambda_hat);
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert_eq!(argmax(&g.values), argmax(&par.values));
    }
}

#[test]
fn long_run_rate_matches_mean_rate() {
    for kernel in [
        CompositeKernel::Single(BaseKernel::Sns { a: 0.4, omega: 2.0 }),
        CompositeKernel::Sum(
            BaseKernel::Exp { alpha: 0.3, beta: 2.0 },
            BaseKernel::Sqr { b: 0.1, l: 2.0 },
        ),
    ] {
        let model = HawkesModel::new(1.0, kernel).unwrap();
        let rate = model.mean_rate().unwrap();
        let norm = kernel.stationarity().unwrap().norm_value;
        let horizon = 20_000.0;
        let sd = (model.mu / (1.0 - norm).powi(3) / horizon).sqrt();
        let rates: Vec<f64> = (0..5)
            .map(|s| simulate(&model, horizon, s).unwrap().len() as f64 / horizon)
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!(
            (mean - rate).abs() < 3.0 * sd / (rates.len() as f64).sqrt(),
            "{kernel}: {mean} vs {rate}"
        );
    }
}

#[test]
fn time_rescaled_increments_are_unit_exponential() {
    let kernel = CompositeKernel::Sum(
        BaseKernel::Exp { alpha: 0.5, beta: 1.5 },
        BaseKernel::Sns {
            a: 0.15,
            omega: PI / 2.0,
        },
    );
    let model = HawkesModel::new(0.8, kernel).unwrap();
    for seed in 0..3 {
        let ev = simulate(&model, 3000.0, seed).unwrap();
        let inc = compensator_increments(model.mu, &model.kernel, ev.times());
        let (_, p) = ks_unit_exponential(&inc);
        assert!(p > 0.01, "seed {seed}: p = {p}");
    }
}

#[test]
fn decomposition_audit_and_qq_diagonal() {
    let model = HawkesModel::new(1.0, BaseKernel::Exp { alpha: 0.5, beta: 1.0 }.into()).unwrap();
    let ev = simulate(&model, 4000.0, 21).unwrap();
    let cfg = DecomposeConfig {
        gd_restarts: 1,
        ..Default::default()
    };
    let mut result = decompose(&ev, &cfg).unwrap();
    assert_eq!(result.audit.len(), 12);
    assert_eq!(result.audit.iter().filter(|a| a.stage == FitStage::Single).count(), 4);
    assert_eq!(
        result.audit.iter().filter(|a| a.stage == FitStage::Expansion).count(),
        8
    );
    assert_eq!(decompose(&ev, &cfg).unwrap(), result);

    result.model = model;
    let bundle = build_bundle(&result, &ev, 100).unwrap();
    let lo = bundle.qq.first().unwrap().exponential;
    let hi = bundle.qq.last().unwrap().exponential;
    let worst = bundle
        .qq
        .iter()
        .map(|q| (q.model - q.exponential).abs())
        .fold(0.0, f64::max);
    assert!(worst / (hi - lo) < 0.15, "max deviation {worst} over range {}", hi - lo);
    assert!(bundle
        .qq
        .windows(2)
        .all(|w| w[0].model <= w[1].model && w[0].exponential < w[1].exponential));
}
