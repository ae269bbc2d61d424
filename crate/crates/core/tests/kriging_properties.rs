use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stkrige::krige::{krige_ked, krige_ok, krige_sk, Kriger};
use stkrige::{
    Family, KrigingMethod, NeighborhoodConfig, Observation, ReferenceSeries, SpaceTimePoint, TargetMode, VariogramModel,
};

fn family(i: usize) -> Family {
    [Family::Spherical, Family::Exponential, Family::LinearBounded][i % 3]
}

fn data_strategy(max: usize) -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    proptest::collection::vec((0.0..800.0f64, 0.0..800.0f64, 0.0..500.0f64, -20.0..80.0f64), 1..=max)
}

fn to_obs(raw: &[(f64, f64, f64, f64)]) -> Vec<Observation> {
    raw.iter()
        .map(|&(x, y, t, v)| Observation::new("s", SpaceTimePoint::new(x, y, t), v))
        .collect()
}

fn reference() -> ReferenceSeries {
    ReferenceSeries::new(vec![(-10.0, 30.0), (150.0, 45.0), (320.0, 38.0), (510.0, 52.0)]).unwrap()
}

/// Covariance between two data, straight from the model definition.
fn cov(m: &VariogramModel, a: &SpaceTimePoint, b: &SpaceTimePoint, same: bool) -> f64 {
    if same {
        return m.sill + m.nugget;
    }
    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (m.k * (a.t - b.t)).powi(2)).sqrt();
    let r = d / m.range;
    let g = match m.family {
        Family::Spherical => {
            if r < 1.0 {
                1.5 * r - 0.5 * r.powi(3)
            } else {
                1.0
            }
        }
        Family::Exponential => 1.0 - (-r).exp(),
        Family::LinearBounded => r.min(1.0),
    };
    m.sill * (1.0 - g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// OK in its dual covariance form: the weights equal those of the
    /// generalized least squares estimator of the mean plus simple kriging
    /// of the remainder.
    #[test]
    fn ok_matches_gls_decomposition(
        raw in data_strategy(50), f in 0usize..3, sill in 1.0..20.0f64,
        nug in 0.05..0.5f64, range in 100.0..1500.0f64, k in 0.1..5.0f64,
        target in (0.0..800.0f64, 0.0..800.0f64, 0.0..500.0f64),
    ) {
        let model = VariogramModel::new(family(f), sill, nug * sill, range, k).unwrap();
        let obs = to_obs(&raw);
        let t = SpaceTimePoint::new(target.0, target.1, target.2);
        let got = krige_ok(&t, &obs, &model, TargetMode::Filter).unwrap();

        let n = obs.len();
        let c = DMatrix::from_fn(n, n, |i, j| cov(&model, &obs[i].point, &obs[j].point, i == j));
        let c0 = DVector::from_fn(n, |i, _| cov(&model, &obs[i].point, &t, false));
        let z = DVector::from_fn(n, |i, _| obs[i].value);
        let ones = DVector::from_element(n, 1.0);
        let ci = c.clone().try_inverse().unwrap();
        let denom = ones.dot(&(&ci * &ones));
        let mean = ones.dot(&(&ci * &z)) / denom;
        let lambda_sk = &ci * &c0;
        let value = mean + lambda_sk.dot(&(&z - &ones * mean));
        let excess = 1.0 - ones.dot(&lambda_sk);
        let variance = (model.sill + model.nugget) - c0.dot(&lambda_sk) + excess * excess / denom;

        prop_assert!((got.prediction.value - value).abs() < 1e-8, "{} vs {}", got.prediction.value, value);
        prop_assert!((got.prediction.variance.unwrap() - variance.max(0.0)).abs() < 1e-8);
        prop_assert!((got.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shift_invariance(
        raw in data_strategy(30), shift in -50.0..50.0f64, f in 0usize..3,
        target in (0.0..800.0f64, 0.0..800.0f64, 0.0..500.0f64),
    ) {
        let model = VariogramModel::new(family(f), 5.0, 0.5, 400.0, 1.0).unwrap();
        let obs = to_obs(&raw);
        let shifted: Vec<_> = obs.iter().map(|o| o.with_value(o.value + shift)).collect();
        let t = SpaceTimePoint::new(target.0, target.1, target.2);
        let r = reference();
        let pairs = [
            (krige_ok(&t, &obs, &model, TargetMode::Filter), krige_ok(&t, &shifted, &model, TargetMode::Filter)),
            (krige_ked(&t, &obs, &model, &r, TargetMode::Filter), krige_ked(&t, &shifted, &model, &r, TargetMode::Filter)),
        ];
        for (a, b) in pairs {
            let (a, b) = (a.unwrap().prediction, b.unwrap().prediction);
            prop_assert!((b.value - a.value - shift).abs() < 1e-8);
            prop_assert!((b.variance.unwrap() - a.variance.unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_field_reproduced(
        raw in data_strategy(30), c in -10.0..100.0f64, f in 0usize..3,
        target in (0.0..800.0f64, 0.0..800.0f64, 0.0..500.0f64),
    ) {
        let model = VariogramModel::new(family(f), 5.0, 0.5, 400.0, 1.0).unwrap();
        let obs: Vec<_> = to_obs(&raw).iter().map(|o| o.with_value(c)).collect();
        let t = SpaceTimePoint::new(target.0, target.1, target.2);
        let ok = krige_ok(&t, &obs, &model, TargetMode::Filter).unwrap().prediction.value;
        let ked = krige_ked(&t, &obs, &model, &reference(), TargetMode::Filter).unwrap().prediction.value;
        prop_assert!((ok - c).abs() < 1e-8 * (1.0 + c.abs()));
        prop_assert!((ked - c).abs() < 1e-8 * (1.0 + c.abs()));
        // SK against F ≡ c has zero residuals everywhere
        let mean = ReferenceSeries::constant(c, -10.0, 510.0).unwrap();
        let sk = krige_sk(&t, &obs, &model, &mean, TargetMode::Filter).unwrap().prediction.value;
        prop_assert!((sk - c).abs() < 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn variance_is_nonnegative(raw in data_strategy(40), f in 0usize..3, exact in any::<bool>()) {
        let model = VariogramModel::new(family(f), 3.0, 0.3, 300.0, 2.0).unwrap();
        let obs = to_obs(&raw);
        let mode = if exact { TargetMode::Exact } else { TargetMode::Filter };
        for o in obs.iter().take(5) {
            let p = krige_ok(&o.point, &obs, &model, mode).unwrap().prediction;
            prop_assert!(p.variance.unwrap() >= 0.0);
        }
    }
}

#[test]
fn exact_mode_interpolates_with_nugget() {
    let model = VariogramModel::new(Family::Spherical, 4.0, 1.0, 500.0, 1.0).unwrap();
    let obs = to_obs(&[(0.0, 0.0, 0.0, 3.0), (100.0, 50.0, 20.0, 9.0), (300.0, 10.0, 60.0, 5.0)]);
    let target = obs[1].point;
    let exact = krige_ok(&target, &obs, &model, TargetMode::Exact).unwrap().prediction;
    assert!((exact.value - 9.0).abs() < 1e-9);
    let filtered = krige_ok(&target, &obs, &model, TargetMode::Filter).unwrap().prediction;
    assert!((filtered.value - 9.0).abs() > 1e-3);
}

#[test]
fn batch_contracts() {
    let model = VariogramModel::new(Family::Exponential, 4.0, 0.4, 300.0, 1.0).unwrap();
    let obs = to_obs(&[(0.0, 0.0, 0.0, 3.0), (100.0, 50.0, 20.0, 9.0), (300.0, 10.0, 60.0, 5.0)]);
    let r = reference();
    let kriger = Kriger::new(KrigingMethod::Sk, &obs, model, Some(&r), NeighborhoodConfig::default()).unwrap();
    assert!(kriger.predict_batch(&[]).is_empty());
    let t = SpaceTimePoint::new(50.0, 20.0, 10.0);
    let out = kriger.predict_batch(&[t, SpaceTimePoint::new(0.0, 0.0, 9999.0), t]);
    assert_eq!(out[0].as_ref().unwrap(), out[2].as_ref().unwrap());
    assert!(out[1].is_err(), "target outside the reference range must fail alone");
    assert_eq!(out[0].as_ref().unwrap(), &kriger.predict(&t).unwrap());
}
