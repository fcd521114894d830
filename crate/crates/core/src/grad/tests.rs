use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

type OpFn = Box<dyn Fn(&mut Graph, &[Var]) -> crate::error::Result<Var>>;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], away_from_zero: bool) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let mut v: f64 = rng.gen_range(-1.5..1.5);
            if away_from_zero && v.abs() < 0.05 {
                v += 0.1f64.copysign(v);
            }
            v
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn positive_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(0.3..2.0)).collect()).unwrap()
}

/// Loss used to turn tensor-valued ops into scalars: a fixed random
/// weighting of the outputs, so every output entry influences the gradient.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> crate::error::Result<Var> {
    let shape = g.value(y).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.constant(random_tensor(&mut rng, &shape, false));
    let p = g.mul(y, w)?;
    g.sum_all(p)
}

#[test]
fn matmul_identity_is_noop() {
    let mut g = Graph::new();
    let i2 = g.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let a = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.25, 7.0, -1.0]).unwrap();
    let av = g.constant(a.clone());
    let out = g.matmul(i2, av).unwrap();
    assert_eq!(g.value(out), &a);
}

#[test]
fn relu_sign_cases() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![-1.0, 0.0, 2.5]));
    let y = g.relu(x).unwrap();
    assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.5]);
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
    let y = g.softmax_over_axis(x, 0).unwrap();
    for &v in g.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn square_gradient() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![3.0]));
    let y = g.square(x).unwrap();
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[6.0]);
}

#[test]
fn reused_tensor_accumulates_both_paths() {
    // y = x*x + 3x  => dy/dx = 2x + 3
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.5]));
    let xx = g.mul(x, x).unwrap();
    let x3 = g.scale(x, 3.0).unwrap();
    let y = g.add(xx, x3).unwrap();
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[6.0]);
}

#[test]
fn second_backward_doubles_gradients() {
    let mut g = Graph::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = g.param(random_tensor(&mut rng, &[3, 4], false));
    let x = g.constant(random_tensor(&mut rng, &[4, 2], false));
    let h = g.matmul(w, x).unwrap();
    let h = g.softplus(h).unwrap();
    let loss = g.mean_all(h).unwrap();
    g.backward(loss).unwrap();
    let once = g.grad(w).unwrap();
    g.backward(loss).unwrap();
    let twice = g.grad(w).unwrap();
    for (a, b) in once.data().iter().zip(twice.data()) {
        assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
    }
    g.zero_grad();
    assert!(g.grad(w).is_none());
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let y = g.square(x).unwrap();
    assert!(matches!(g.backward(y), Err(Error::Shape { op: "backward", .. })));
}

#[test]
fn shape_mismatch_names_op_and_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    let err = g.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("matmul"), "{msg}");
    assert!(msg.contains("[2, 3]"), "{msg}");
    let c = g.constant(Tensor::zeros(&[3, 2]));
    assert!(matches!(g.add(a, c), Err(Error::Shape { op: "add", .. })));
}

#[test]
fn constants_are_not_recorded_for_backward() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::vector(vec![1.0, 2.0]));
    let b = g.exp(a).unwrap();
    assert!(!g.requires_grad(b));
    let s = g.sum_all(b).unwrap();
    g.backward(s).unwrap();
    assert!(g.grad(a).is_none());
}

#[test]
fn softplus_is_stable_for_large_inputs() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![800.0, -800.0, 0.0]));
    let y = g.softplus(x).unwrap();
    let v = g.value(y).data().to_vec();
    assert_eq!(v[0], 800.0);
    assert!(v[1] >= 0.0 && v[1] < 1e-300);
    assert!((v[2] - 2f64.ln()).abs() < 1e-15);
    let s = g.sum_all(y).unwrap();
    g.backward(s).unwrap();
    let d = g.grad(x).unwrap();
    assert_eq!(d.data()[0], 1.0);
    assert!((d.data()[2] - 0.5).abs() < 1e-15);
}

#[test]
fn grad_check_of_sum_is_exact() {
    let x = Tensor::vector(vec![0.3, -1.2, 4.0, 2.0]);
    let err = grad_check(|g, v| g.sum_all(v[0]), &[x], GradCheck::default()).unwrap();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn grad_check_flags_non_finite() {
    let x = Tensor::vector(vec![-1.0]);
    let res = grad_check(|g, v| g.log(v[0]), &[x], GradCheck::default());
    assert!(matches!(res, Err(Error::NonFinite(_))));
}

#[test]
fn mean_relu_matmul_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let w = random_tensor(&mut rng, &[5, 4], true);
        let x = random_tensor(&mut rng, &[4, 1], true);
        let err = grad_check(
            |g, v| {
                let h = g.matmul(v[0], v[1])?;
                let h = g.relu(h)?;
                g.mean_all(h)
            },
            &[w, x],
            GradCheck::default(),
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}

/// Every op kind against central differences on random inputs.
#[test]
fn every_op_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..10u64 {
        let a = random_tensor(&mut rng, &[3, 4], true);
        let b = random_tensor(&mut rng, &[3, 4], true);
        let p = positive_tensor(&mut rng, &[3, 4]);
        let m = random_tensor(&mut rng, &[4, 2], true);
        let row = random_tensor(&mut rng, &[1, 4], true);
        let cases: Vec<(&str, Vec<Tensor>, OpFn)> = vec![
            ("add", vec![a.clone(), b.clone()], Box::new(|g, v| g.add(v[0], v[1]))),
            ("sub", vec![a.clone(), b.clone()], Box::new(|g, v| g.sub(v[0], v[1]))),
            ("mul", vec![a.clone(), b.clone()], Box::new(|g, v| g.mul(v[0], v[1]))),
            ("div", vec![a.clone(), p.clone()], Box::new(|g, v| g.div(v[0], v[1]))),
            ("matmul", vec![a.clone(), m.clone()], Box::new(|g, v| g.matmul(v[0], v[1]))),
            ("relu", vec![a.clone()], Box::new(|g, v| g.relu(v[0]))),
            ("softplus", vec![a.clone()], Box::new(|g, v| g.softplus(v[0]))),
            ("exp", vec![a.clone()], Box::new(|g, v| g.exp(v[0]))),
            ("log", vec![p.clone()], Box::new(|g, v| g.log(v[0]))),
            ("square", vec![a.clone()], Box::new(|g, v| g.square(v[0]))),
            ("scale", vec![a.clone()], Box::new(|g, v| g.scale(v[0], -2.5))),
            ("add_scalar", vec![a.clone()], Box::new(|g, v| g.add_scalar(v[0], 0.7))),
            ("mean0", vec![a.clone()], Box::new(|g, v| g.mean_over_axis(v[0], 0))),
            ("mean1", vec![a.clone()], Box::new(|g, v| g.mean_over_axis(v[0], 1))),
            ("sum0", vec![a.clone()], Box::new(|g, v| g.sum_over_axis(v[0], 0))),
            ("sum1", vec![a.clone()], Box::new(|g, v| g.sum_over_axis(v[0], 1))),
            ("softmax0", vec![a.clone()], Box::new(|g, v| g.softmax_over_axis(v[0], 0))),
            ("softmax1", vec![a.clone()], Box::new(|g, v| g.softmax_over_axis(v[0], 1))),
            ("concat0", vec![a.clone(), row.clone()], Box::new(|g, v| g.concat(&[v[0], v[1]], 0))),
            ("concat1", vec![a.clone(), b.clone()], Box::new(|g, v| g.concat(&[v[0], v[1]], 1))),
            ("broadcast_add_row", vec![a.clone(), row.clone()], Box::new(|g, v| g.broadcast_add_row(v[0], v[1]))),
            ("transpose", vec![a.clone()], Box::new(|g, v| g.transpose(v[0]))),
            ("slice_cols", vec![a.clone()], Box::new(|g, v| g.slice_cols(v[0], 1, 2))),
            ("repeat_rows", vec![row.clone()], Box::new(|g, v| g.repeat_rows(v[0], 3))),
        ];
        for (name, inputs, op) in cases {
            let err = grad_check(
                |g, v| {
                    let y = op(g, v)?;
                    weighted_sum(g, y, 1000 + trial)
                },
                &inputs,
                GradCheck::default(),
            )
            .unwrap();
            assert!(err < 1e-4, "{name}: relative error {err}");
        }
    }
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_tensor(&mut rng, &[4, 4], false);
    let run = || {
        let mut g = Graph::new();
        let x = g.constant(a.clone());
        let y = g.matmul(x, x).unwrap();
        let y = g.softmax_over_axis(y, 1).unwrap();
        g.value(y).clone()
    };
    assert_eq!(run(), run());
}

#[test]
fn tensor_constructor_validates_length() {
    assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
    assert!(Tensor::new(vec![0, 2], vec![]).is_err());
    let t = Tensor::new(vec![], vec![4.0]).unwrap();
    assert_eq!(t.item(), Some(4.0));
}
