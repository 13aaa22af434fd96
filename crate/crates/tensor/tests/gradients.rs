use ktts_tensor::{concat_cols, concat_rows, Conv1dSpec, GradCheck, Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn positive(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(0.2..1.5))
}

/// Projects an output onto fixed random weights so every element matters.
fn project<'g>(y: Var<'g>, seed: u64) -> Var<'g> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random(&y.shape(), &mut rng);
    (y * y.graph().constant(w)).sum()
}

fn assert_passes(name: &str, inputs: &[Tensor], f: impl for<'g> Fn(&'g Graph, &[Var<'g>]) -> Var<'g>) {
    let report = GradCheck::default().run(inputs, f);
    assert!(
        report.passed(),
        "{name}: {} of {} mismatched, worst {:?}",
        report.failures.len(),
        report.checked,
        report.failures.first()
    );
}

#[test]
fn elementwise_unary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random(&[3, 4], &mut rng);
    let p = positive(&[3, 4], &mut rng);
    assert_passes("exp", &[x.clone()], |_, v| project(v[0].exp(), 1));
    assert_passes("tanh", &[x.clone()], |_, v| project(v[0].tanh(), 2));
    assert_passes("sigmoid", &[x.clone()], |_, v| project(v[0].sigmoid(), 3));
    assert_passes("leaky", &[x.clone()], |_, v| project(v[0].leaky_relu(0.2), 4));
    assert_passes("square", &[x.clone()], |_, v| project(v[0].square(), 5));
    assert_passes("abs", &[x.clone()], |_, v| project(v[0].abs(), 6));
    assert_passes("clamp", &[x.clone()], |_, v| project(v[0].scale(3.0).clamp(-1.0, 1.0), 7));
    assert_passes("log", &[p.clone()], |_, v| project(v[0].log(), 8));
    assert_passes("sqrt", &[p.clone()], |_, v| project(v[0].sqrt(), 9));
    assert_passes("affine", &[x], |_, v| project(v[0].scale(-2.5).add_scalar(0.3).neg(), 10));
}

#[test]
fn elementwise_binary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random(&[2, 5], &mut rng);
    let b = positive(&[2, 5], &mut rng);
    let inputs = [a, b];
    assert_passes("add", &inputs, |_, v| project(v[0] + v[1], 1));
    assert_passes("sub", &inputs, |_, v| project(v[0] - v[1], 2));
    assert_passes("mul", &inputs, |_, v| project(v[0] * v[1], 3));
    assert_passes("div", &inputs, |_, v| project(v[0].div(v[1]), 4));
    assert_passes("mse", &inputs, |_, v| v[0].mse(v[1]));
}

#[test]
fn broadcast_and_reduction_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&[3, 6], &mut rng);
    let col = random(&[3], &mut rng);
    let alpha = Tensor::new(vec![1], vec![0.25]);
    assert_passes("add_col", &[x.clone(), col.clone()], |_, v| project(v[0].add_col(v[1]), 1));
    assert_passes("mul_col", &[x.clone(), col], |_, v| project(v[0].mul_col(v[1]), 2));
    assert_passes("prelu", &[x.clone(), alpha], |_, v| project(v[0].prelu(v[1]), 3));
    assert_passes("sum_rows", &[x.clone()], |_, v| project(v[0].sum_rows(), 4));
    assert_passes("mean", &[x], |_, v| v[0].square().mean());
}

#[test]
fn matrix_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random(&[3, 4], &mut rng);
    let b = random(&[4, 2], &mut rng);
    assert_passes("matmul", &[a.clone(), b], |_, v| project(v[0].matmul(v[1]), 1));
    assert_passes("transpose", &[a.clone()], |_, v| project(v[0].transpose(), 2));
    assert_passes("reshape", &[a.clone()], |_, v| project(v[0].reshape(&[2, 6]), 3));
    assert_passes("softmax", &[a.clone()], |_, v| project(v[0].softmax_rows(), 4));
    assert_passes("normalize", &[a.clone()], |_, v| project(v[0].normalize_cols(1e-5), 5));
    assert_passes("gather", &[a.clone()], |_, v| project(v[0].gather_cols(&[3, 0, 0, 2, 3]), 6));
    assert_passes("slice_rows", &[a.clone()], |_, v| project(v[0].slice_rows(1, 3), 7));
    assert_passes("slice_cols", &[a.clone()], |_, v| project(v[0].slice_cols(1, 3), 8));
    assert_passes("concat", &[a.clone(), a], |_, v| {
        let r = concat_rows(&[v[0], v[1].scale(2.0)]);
        let c = concat_cols(&[v[0].square(), v[1]]);
        project(r, 9) + project(c, 10)
    });
}

#[test]
fn convolution_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&[4, 23], &mut rng);
    let w = random(&[6, 4, 3], &mut rng);
    let wg = random(&[6, 2, 3], &mut rng);
    let w_strided = random(&[2, 4, 5], &mut rng);
    assert_passes("conv_same_dilated", &[x.clone(), w], |_, v| {
        project(v[0].conv1d(v[1], Conv1dSpec::same(3, 4)), 1)
    });
    assert_passes("conv_grouped", &[x.clone(), wg], |_, v| {
        project(v[0].conv1d(v[1], Conv1dSpec::same(3, 1).with_groups(2)), 2)
    });
    assert_passes("conv_strided", &[x.clone(), w_strided], |_, v| {
        project(v[0].conv1d(v[1], Conv1dSpec::valid(3)), 3)
    });
    let wt = random(&[4, 3, 8], &mut rng);
    assert_passes("conv_transpose", &[x, wt], |_, v| project(v[0].conv_transpose1d(v[1], 4), 4));
}

#[test]
fn stft_magnitude_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&[1, 200], &mut rng);
    let window: Vec<f64> = (0..48)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / 48.0).cos())
        .collect();
    assert_passes("stft", &[x], move |_, v| project(v[0].stft_magnitude(&window, 64, 16), 1));
}

#[test]
fn detach_blocks_gradient() {
    let g = Graph::new();
    let x = g.param(Tensor::new(vec![2], vec![1.0, 2.0]));
    let y = x.detach().square().sum() + x.sum();
    let grads = g.backward(y);
    assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0]);
}

#[test]
fn constants_get_no_gradient() {
    let g = Graph::new();
    let c = g.constant(Tensor::new(vec![2], vec![1.0, 2.0]));
    let x = g.param(Tensor::new(vec![2], vec![3.0, 4.0]));
    let y = (c * x).sum();
    assert!(!c.requires_grad());
    let grads = g.backward(y);
    assert!(grads.get(c).is_none());
    assert_eq!(grads.get(x).unwrap().data(), &[1.0, 2.0]);
}

#[test]
fn shared_use_accumulates() {
    let g = Graph::new();
    let x = g.param(Tensor::scalar(3.0));
    let y = x * x + x;
    let grads = g.backward(y);
    assert_eq!(grads.get(x).unwrap().item(), 7.0);
}
