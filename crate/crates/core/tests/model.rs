use ndarray::{s, Array2, Array3, Axis};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectemp::autodiff::Param;
use spectemp::graph::{graph_conv, normalized_laplacian, Adjacency, FilterBank, PolyBasis};
use spectemp::model::{
    embed, filter_matrix, forward, loss, pearson_adjacency, read_checkpoint, tggc_block, write_checkpoint,
    AdjacencyMode, ModelConfig, ModelState, Variant,
};
use spectemp::temporal::{decompose, spectral_attention, AttentionWeights, SpectralFilter, TemporalFdmParams};
use spectemp::train::gradients;
use spectemp::Error;

fn random_x(n: usize, t: usize, d: usize, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array3::from_shape_fn((n, t, d), |_| rng.gen_range(-1.0..1.0))
}

fn random_graph(n: usize, seed: u64) -> Adjacency {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.6) {
                let v = rng.gen_range(0.1..1.0);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
    }
    Adjacency::new(w).unwrap()
}

fn perturb(state: &mut ModelState, sigma: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, p) in state.params.iter_mut() {
        if name == "head.weight" {
            continue;
        }
        let complex = p.complex;
        p.value.mapv_inplace(|z| {
            z + C64::new(rng.gen_range(-sigma..sigma), if complex { rng.gen_range(-sigma..sigma) } else { 0.0 })
        });
    }
}

fn rel(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let num = (a - b).mapv(|v| v * v).sum().sqrt();
    let den = b.mapv(|v| v * v).sum().sqrt().max(1e-300);
    num / den
}

fn theta_of(state: &ModelState, block: usize) -> Array2<f64> {
    state.params[&format!("block{block}.theta")].value.mapv(|z| z.re).into_dimensionality().unwrap()
}

fn filter_of(state: &ModelState, key: &str) -> SpectralFilter {
    let w = state.params[key].value.clone().into_dimensionality().unwrap();
    SpectralFilter::new(state.modes().unwrap(), w).unwrap()
}

fn plain_graph_conv(state: &ModelState, adj: &Adjacency, x: &Array3<f64>, block: usize) -> Array3<f64> {
    let theta = theta_of(state, block);
    let d = x.dim().2;
    let theta = if theta.ncols() == d { theta } else { Array2::from_shape_fn((theta.nrows(), d), |(k, _)| theta[[k, 0]]) };
    let bank = FilterBank::new(state.config.basis, theta).unwrap();
    let l = normalized_laplacian(adj);
    let mut out = Array3::zeros(x.dim());
    for t in 0..x.dim().1 {
        let y = graph_conv(&bank, &l, &x.slice(s![.., t, ..]).to_owned()).unwrap();
        out.slice_mut(s![.., t, ..]).assign(&y);
    }
    out
}

#[test]
fn identity_initialized_block_is_near_identity() {
    let (n, t, d) = (5, 16, 2);
    let adj = random_graph(n, 1);
    let config = ModelConfig { lookback: t, dims: d, modes: t, decomp_window: 4, blocks: 2, ..Default::default() };
    let state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let x = random_x(n, t, d, 3);
    for b in 0..2 {
        let z = tggc_block(&state, b, &x).unwrap();
        assert_eq!(z.dim(), (n, t, d));
        assert!(rel(&z, &x) < 0.05, "block {b}: {}", rel(&z, &x));
    }
}

#[test]
fn linear_block_matches_plain_pipeline() {
    let (n, t, d) = (6, 12, 2);
    let adj = random_graph(n, 4);
    for basis in [PolyBasis::Gegenbauer { alpha: 1.5 }, PolyBasis::Bernstein, PolyBasis::Monomial] {
        let config = ModelConfig {
            lookback: t,
            dims: d,
            modes: 5,
            decomp_window: 3,
            degree: 3,
            basis,
            ..Default::default()
        };
        let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        perturb(&mut state, 0.3, 6);
        let x = random_x(n, t, d, 7);
        let g = plain_graph_conv(&state, &adj, &x, 0);
        let mut params = TemporalFdmParams::identity(state.modes().unwrap(), n, d, 3);
        params.coarse = filter_of(&state, "block0.coarse");
        params.fine = filter_of(&state, "block0.fine");
        let c = spectemp::temporal::coarse_fdm(&g, &params).unwrap();
        let expected = spectemp::temporal::fine_fdm(&c, &params).unwrap();
        let got = tggc_block(&state, 0, &x).unwrap();
        assert!(rel(&got, &expected) < 1e-10, "{basis:?}: {}", rel(&got, &expected));
    }
}

#[test]
fn attention_block_matches_plain_pipeline() {
    let (n, t, d) = (4, 10, 2);
    let adj = random_graph(n, 8);
    let config = ModelConfig {
        lookback: t,
        dims: d,
        modes: 4,
        decomp_window: 3,
        variant: Variant::Nonlinear,
        ..Default::default()
    };
    let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    perturb(&mut state, 0.2, 10);
    let x = random_x(n, t, d, 11);
    let g = plain_graph_conv(&state, &adj, &x, 0).mapv(|v| v.max(0.0));
    let mut params = TemporalFdmParams::identity(state.modes().unwrap(), n, d, 3);
    params.coarse = filter_of(&state, "block0.coarse");
    let real = |k: &str| -> Array2<f64> { state.params[k].value.mapv(|z| z.re).into_dimensionality().unwrap() };
    params.attention = Some(AttentionWeights {
        query: real("block0.attn_query"),
        key: real("block0.attn_key"),
        value: real("block0.attn_value"),
    });
    let c = spectemp::temporal::coarse_fdm(&g, &params).unwrap();
    let (trend, seasonal) = decompose(&c, 3).unwrap();
    let expected = spectral_attention(&trend, &seasonal, &params).unwrap();
    let got = tggc_block(&state, 0, &x).unwrap();
    assert!(rel(&got, &expected) < 1e-10, "{}", rel(&got, &expected));
}

#[test]
fn linear_model_superposition() {
    let (n, t, d) = (5, 12, 1);
    let adj = random_graph(n, 12);
    for residual in [true, false] {
        let config = ModelConfig { lookback: t, dims: d, modes: 4, residual, ..Default::default() };
        let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        perturb(&mut state, 0.2, 14);
        let (x1, x2) = (random_x(n, t, d, 15), random_x(n, t, d, 16));
        let (a, b) = (1.7, -0.4);
        let lhs = forward(&state, &(&x1 * a + &x2 * b)).unwrap();
        let rhs = forward(&state, &x1).unwrap() * a + forward(&state, &x2).unwrap() * b;
        assert!((&lhs - &rhs).iter().all(|v| v.abs() < 1e-7));
    }
}

#[test]
fn permuting_variables_permutes_forecast() {
    let (n, t, d) = (5, 12, 2);
    let adj = random_graph(n, 17);
    let perm = [3usize, 0, 4, 1, 2];
    let config = ModelConfig { lookback: t, dims: d, modes: 5, adjacency: AdjacencyMode::Provided, ..Default::default() };
    let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(18)).unwrap();
    perturb(&mut state, 0.2, 19);

    let padj = Adjacency::new(Array2::from_shape_fn((n, n), |(i, j)| adj.weights()[[perm[i], perm[j]]])).unwrap();
    let mut pstate = state.clone();
    pstate.buffers.insert("graph.matrix".into(), filter_matrix(&padj, config.filter_argument).into_dyn());
    for (name, p) in pstate.params.iter_mut() {
        if name.ends_with("coarse") || name.ends_with("fine") {
            let orig = &state.params[name].value;
            *p = Param::complex(orig.select(Axis(0), &perm));
        }
    }
    let x = random_x(n, t, d, 20);
    let px = x.select(Axis(0), &perm);
    let y = forward(&state, &x).unwrap();
    let py = forward(&pstate, &px).unwrap();
    assert!((&py - &y.select(Axis(0), &perm)).iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn forward_shapes_determinism_and_head() {
    let (n, t, d) = (4, 8, 3);
    let adj = random_graph(n, 21);
    let config = ModelConfig { lookback: t, dims: d, modes: 3, horizon: 5, decomp_window: 2, ..Default::default() };
    let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(22)).unwrap();
    perturb(&mut state, 0.2, 23);
    let x = random_x(n, t, d, 24);
    let y1 = forward(&state, &x).unwrap();
    assert_eq!(y1.dim(), (n, 5, d));
    assert_eq!(y1, forward(&state, &x).unwrap());

    // The head is a linear read-out of the flattened embedding.
    let z = embed(&state, &x).unwrap();
    assert_eq!(z.dim(), (n, t, d));
    let w: Array2<f64> = state.params["head.weight"].value.mapv(|c| c.re).into_dimensionality().unwrap();
    let manual = z.into_shape_with_order((n, t * d)).unwrap().dot(&w).into_shape_with_order((n, 5, d)).unwrap();
    assert!((&manual - &y1).iter().all(|v| v.abs() < 1e-12));

    state.params.get_mut("head.weight").unwrap().value.fill(C64::default());
    assert!(forward(&state, &x).unwrap().iter().all(|v| *v == 0.0));
    assert!(matches!(forward(&state, &random_x(n, t + 1, d, 0)), Err(Error::Shape(_))));
}

#[test]
fn loss_matches_hand_evaluation() {
    let y = Array3::zeros((2, 3, 1));
    assert_eq!(loss(&y, &y).unwrap(), 0.0);
    let p = Array3::ones((2, 3, 1));
    assert!((loss(&p, &y).unwrap() - 2.0).abs() < 1e-15);
    assert!(loss(&p, &Array3::zeros((2, 2, 1))).is_err());
}

#[test]
fn config_without_blocks_is_rejected() {
    let adj = random_graph(3, 0);
    let config = ModelConfig { blocks: 0, ..Default::default() };
    assert!(matches!(ModelState::init(&config, 3, Some(&adj), &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::Config(_))));
    assert!(ModelState::init(&ModelConfig::default(), 3, None, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn checkpoint_roundtrip_is_exact() {
    let (n, t) = (4, 12);
    let x = random_x(n, t, 1, 25);
    for config in [
        ModelConfig { lookback: t, modes: 4, ..Default::default() },
        ModelConfig {
            lookback: t,
            modes: 5,
            variant: Variant::Nonlinear,
            adjacency: AdjacencyMode::Learned,
            projector: spectemp::model::Projector::Random,
            mode_selection: spectemp::model::ModeSelection::Random,
            ..Default::default()
        },
    ] {
        let adj = pearson_adjacency(&x).unwrap();
        let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(26)).unwrap();
        perturb(&mut state, 0.1, 27);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &state).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, state);
        assert_eq!(forward(&back, &x).unwrap(), forward(&state, &x).unwrap());
        buf[0] = b'X';
        assert!(read_checkpoint(buf.as_slice()).is_err());
        assert!(read_checkpoint(&buf[..20]).is_err());
    }
}

#[test]
fn exact_forecast_has_zero_gradients() {
    let (n, t) = (3, 8);
    let adj = random_graph(n, 28);
    let config = ModelConfig { lookback: t, modes: 3, degree: 2, ..Default::default() };
    let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(29)).unwrap();
    perturb(&mut state, 0.2, 30);
    let x = random_x(n, t, 1, 31);
    let y = forward(&state, &x).unwrap();
    let (l, grads) = gradients(&state, &x, &y).unwrap();
    assert_eq!(l, 0.0);
    assert!(grads.values().all(|g| g.iter().all(|z| z.norm() == 0.0)));
}

#[test]
fn head_gradient_matches_least_squares_form() {
    let (n, t, h) = (4, 8, 3);
    let adj = random_graph(n, 32);
    let config = ModelConfig { lookback: t, modes: 3, horizon: h, ..Default::default() };
    let mut state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(33)).unwrap();
    perturb(&mut state, 0.2, 34);
    let x = random_x(n, t, 1, 35);
    let y = random_x(n, h, 1, 36);
    let z = embed(&state, &x).unwrap().into_shape_with_order((n, t)).unwrap();
    let w: Array2<f64> = state.params["head.weight"].value.mapv(|c| c.re).into_dimensionality().unwrap();
    let resid = z.dot(&w) - y.into_shape_with_order((n, h)).unwrap();
    let expected = z.t().dot(&resid) * (2.0 / h as f64);
    let (_, grads) = gradients(&state, &x, &random_x(n, h, 1, 36)).unwrap();
    let got = grads["head.weight"].mapv(|c| c.re).into_dimensionality::<ndarray::Ix2>().unwrap();
    assert!((&got - &expected).iter().all(|v| v.abs() < 1e-12));
}
