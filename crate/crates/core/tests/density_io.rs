use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use simcal_core::density::{
    load_checkpoint, save_checkpoint, train, ConditionalDensityModel, Dataset, MdnnConfig, MdrffConfig,
    ModelConfig, TrainConfig,
};
use simcal_core::{GaussianMixtureDensity, ParamSpace, Prior, RandomStream};

fn dataset(n: usize) -> (Dataset, ParamSpace) {
    let space = ParamSpace::from_bounds([("a", 0.0, 2.0), ("b", -1.0, 1.0)]).unwrap();
    let thetas = Prior::uniform(space.clone()).sample(&RandomStream::new(5, "theta"), n).unwrap();
    let mut rng = RandomStream::new(5, "noise").rng();
    let summaries = Array2::from_shape_fn((n, 4), |(i, j)| {
        thetas[[i, j % 2]] * (1.0 + j as f64) + 0.05 * rng.gen_range(-1.0..1.0)
    });
    (Dataset::new("toy", summaries, thetas).unwrap(), space)
}

fn quick() -> TrainConfig {
    TrainConfig {
        max_epochs: 10,
        batch_size: 64,
        ..TrainConfig::default()
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (data, space) = dataset(400);
    for cfg in [
        ModelConfig::Mdnn(MdnnConfig {
            hidden_sizes: vec![16, 8],
            ..MdnnConfig::default()
        }),
        ModelConfig::Mdrff(MdrffConfig {
            n_features: 32,
            ..MdrffConfig::default()
        }),
    ] {
        let mut model =
            ConditionalDensityModel::init(cfg, &data.summaries, &space, "toy", &RandomStream::new(1, "m")).unwrap();
        train(&mut model, &data, &quick(), &RandomStream::new(1, "t")).unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, model);
        for i in 0..5 {
            let x = data.summaries.row(i);
            assert_eq!(loaded.forward_values(x).unwrap(), model.forward_values(x).unwrap());
        }
    }
}

#[test]
fn checkpoint_rejects_foreign_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, r#"{"format":"other","version":1,"model":null}"#).unwrap();
    assert!(load_checkpoint(&path).is_err());
    std::fs::write(&path, "not json").unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn rff_map_is_frozen_during_training() {
    let (data, space) = dataset(400);
    let cfg = ModelConfig::Mdrff(MdrffConfig {
        n_features: 64,
        ..MdrffConfig::default()
    });
    let mut model =
        ConditionalDensityModel::init(cfg, &data.summaries, &space, "toy", &RandomStream::new(2, "m")).unwrap();
    let before = model.rff().unwrap().clone();
    let params = model.parameters().to_vec();
    train(&mut model, &data, &quick(), &RandomStream::new(2, "t")).unwrap();
    assert_eq!(model.rff().unwrap(), &before);
    assert_ne!(model.parameters(), &params[..]);
}

#[test]
fn marginal_matches_quadrature_of_joint() {
    let (k, d) = (3, 4);
    let mut rng = RandomStream::new(11, "mix").rng();
    let weights = Array1::from(vec![0.5, 0.3, 0.2]);
    let means = Array2::from_shape_fn((k, d), |_| rng.gen_range(-1.0..1.0));
    let mut chol = Array3::zeros((k, d, d));
    for c in 0..k {
        for i in 0..d {
            for j in 0..i {
                chol[[c, i, j]] = rng.gen_range(-0.3..0.3);
            }
            chol[[c, i, i]] = rng.gen_range(0.4..0.9);
        }
    }
    let joint = GaussianMixtureDensity::new(weights, means, chol).unwrap();
    let marginal = joint.marginal((0, 2)).unwrap();

    // trapezoid over dims 1 and 3 on a 200x200 grid spanning every component's ±8σ
    let n = 200;
    let span = |dim: usize| {
        (0..k).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            let s = joint.covariance_of(c)[[dim, dim]].sqrt();
            let m = joint.means()[[c, dim]];
            (lo.min(m - 8.0 * s), hi.max(m + 8.0 * s))
        })
    };
    let (r1, r3) = (span(1), span(3));
    let h1 = (r1.1 - r1.0) / (n - 1) as f64;
    let h3 = (r3.1 - r3.0) / (n - 1) as f64;
    for &(a, b) in &[(0.1, -0.2), (-0.5, 0.7), (0.9, 0.3)] {
        let mut total = 0.0;
        for i in 0..n {
            let y1 = r1.0 + i as f64 * h1;
            let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            for j in 0..n {
                let y3 = r3.0 + j as f64 * h3;
                let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                total += wi * wj * joint.logpdf(&[a, y1, b, y3]).unwrap().exp();
            }
        }
        let integral = total * h1 * h3;
        let exact = marginal.logpdf(&[a, b]).unwrap().exp();
        assert!((integral - exact).abs() < 1e-3, "{integral} vs {exact}");
    }
}
