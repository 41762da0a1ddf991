//! Central finite-difference gradient oracle.

use eusa::diffnum::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Builder = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> eusa::Result<Var>>;

pub const FD_STEP: f64 = 1e-4;

/// Max over coordinates of `|a - n|`, normalised by the largest gradient magnitude.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn evaluate(inputs: &[Tensor<f64>], build: &Builder, weights: &Option<Vec<f64>>) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = build(&mut tape, &vars).expect("forward");
    match weights {
        Some(w) => tape.value(out).data().iter().zip(w).map(|(x, w)| x * w).sum(),
        None => tape.value(out).item(),
    }
}

/// Checks every coordinate (or `max_coords` random ones) of every input.
pub fn check(inputs: &[Tensor<f64>], build: &Builder, max_coords: Option<usize>, rng: &mut ChaCha8Rng) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars).expect("forward");
    let n_out = tape.value(out).numel();
    let weights =
        if n_out > 1 { Some((0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()) } else { None };
    let root = match &weights {
        Some(w) => tape.weighted_sum(out, w.clone()).expect("reduce"),
        None => out,
    };
    tape.backward(root).expect("backward");

    let mut worst = 0.0f64;
    for (i, var) in vars.iter().enumerate() {
        let analytic_full = tape.grad(*var).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        let n = inputs[i].numel();
        let coords: Vec<usize> = match max_coords {
            Some(m) if m < n => (0..m).map(|_| rng.gen_range(0..n)).collect(),
            _ => (0..n).collect(),
        };
        let mut analytic = Vec::with_capacity(coords.len());
        let mut numeric = Vec::with_capacity(coords.len());
        for &c in &coords {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[c] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[c] -= FD_STEP;
            let d = (evaluate(&plus, build, &weights) - evaluate(&minus, build, &weights)) / (2.0 * FD_STEP);
            analytic.push(analytic_full[c]);
            numeric.push(d);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// Uniform in `[lo, hi)` but at least `gap` away from every point in `kinks`.
pub fn away_from(rng: &mut ChaCha8Rng, lo: f64, hi: f64, kinks: &[f64], gap: f64) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if kinks.iter().all(|k| (v - k).abs() > gap) {
            return v;
        }
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn kinked_tensor(rng: &mut ChaCha8Rng, shape: &[usize], kinks: &[f64]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| away_from(rng, -2.0, 2.0, kinks, 0.02))
}

type CaseFn = fn(&mut ChaCha8Rng) -> (Vec<Tensor<f64>>, Builder);

pub fn op_cases() -> Vec<(&'static str, CaseFn)> {
    vec![
        ("conv2d", |rng| {
            let ci = rng.gen_range(1..4);
            let co = rng.gen_range(1..4);
            let k = rng.gen_range(1..4);
            let stride = rng.gen_range(1..3);
            let pad = rng.gen_range(0..2);
            let h = rng.gen_range(k..k + 4);
            let w = rng.gen_range(k..k + 4);
            let inputs = vec![random_tensor(rng, &[ci, h, w]), random_tensor(rng, &[co, ci, k, k])];
            (inputs, Box::new(move |t, v| t.conv2d(v[0], v[1], stride, pad)))
        }),
        ("xcorr_depthwise", |rng| {
            let c = rng.gen_range(1..4);
            let th = rng.gen_range(1..4);
            let tw = rng.gen_range(1..4);
            let sh = th + rng.gen_range(0..4);
            let sw = tw + rng.gen_range(0..4);
            let inputs = vec![random_tensor(rng, &[c, sh, sw]), random_tensor(rng, &[c, th, tw])];
            (inputs, Box::new(|t, v| t.xcorr_depthwise(v[0], v[1])))
        }),
        ("cosine_similarity", |rng| {
            let n = rng.gen_range(2..12);
            let inputs = vec![random_tensor(rng, &[n]), random_tensor(rng, &[n])];
            (inputs, Box::new(|t, v| t.cosine_similarity(v[0], v[1])))
        }),
        ("relu", |rng| {
            let inputs = vec![kinked_tensor(rng, &[2, 5], &[0.0])];
            (inputs, Box::new(|t, v| Ok(t.relu(v[0]))))
        }),
        ("add", |rng| {
            let inputs = vec![random_tensor(rng, &[3, 4]), random_tensor(rng, &[3, 4])];
            (inputs, Box::new(|t, v| t.add(v[0], v[1])))
        }),
        ("sub", |rng| {
            let inputs = vec![random_tensor(rng, &[7]), random_tensor(rng, &[7])];
            (inputs, Box::new(|t, v| t.sub(v[0], v[1])))
        }),
        ("scale", |rng| {
            let s = rng.gen_range(-3.0..3.0);
            let b = rng.gen_range(-1.0..1.0);
            let inputs = vec![random_tensor(rng, &[6])];
            (inputs, Box::new(move |t, v| Ok(t.affine(v[0], s, b))))
        }),
        ("max_with_constant", |rng| {
            let m = (rng.gen_range(-10..10) as f64) * 0.1;
            let inputs = vec![kinked_tensor(rng, &[9], &[m])];
            (inputs, Box::new(move |t, v| Ok(t.max_with_constant(v[0], m))))
        }),
        ("clamp", |rng| {
            let inputs = vec![kinked_tensor(rng, &[10], &[-0.5, 0.75])];
            (inputs, Box::new(|t, v| Ok(t.clamp(v[0], -0.5, 0.75))))
        }),
        ("softmax_over_axis", |rng| {
            let axis = rng.gen_range(0..3);
            let inputs = vec![random_tensor(rng, &[2, 3, 4])];
            (inputs, Box::new(move |t, v| t.softmax(v[0], axis)))
        }),
        ("log_softmax", |rng| {
            let axis = rng.gen_range(0..2);
            let inputs = vec![random_tensor(rng, &[3, 5])];
            (inputs, Box::new(move |t, v| t.log_softmax(v[0], axis)))
        }),
        ("l2_norm", |rng| {
            let inputs = vec![random_tensor(rng, &[2, 4])];
            (inputs, Box::new(|t, v| Ok(t.l2_norm(v[0]))))
        }),
        ("sum", |rng| {
            let inputs = vec![random_tensor(rng, &[5])];
            (inputs, Box::new(|t, v| Ok(t.sum(v[0]))))
        }),
        ("weighted_sum", |rng| {
            let w: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let inputs = vec![random_tensor(rng, &[6])];
            (inputs, Box::new(move |t, v| t.weighted_sum(v[0], w.clone())))
        }),
        ("smooth_l1", |rng| {
            let n = 8;
            let target: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let beta = 0.5;
            let x: Vec<f64> =
                target.iter().map(|&t| t + away_from(rng, -2.0, 2.0, &[-beta, 0.0, beta], 0.02)).collect();
            let inputs = vec![Tensor::new(&[n], x).unwrap()];
            (inputs, Box::new(move |t, v| t.smooth_l1(v[0], target.clone(), weights.clone(), beta)))
        }),
        ("bias_add", |rng| {
            let inputs = vec![random_tensor(rng, &[3, 2, 2]), random_tensor(rng, &[3])];
            (inputs, Box::new(|t, v| t.bias_add(v[0], v[1])))
        }),
        ("narrow", |rng| {
            let start = rng.gen_range(0..3);
            let inputs = vec![random_tensor(rng, &[2, 4, 3])];
            (inputs, Box::new(move |t, v| t.narrow(v[0], 1, start, 2)))
        }),
        ("stack", |rng| {
            let inputs = vec![random_tensor(rng, &[2, 2]), random_tensor(rng, &[2, 2])];
            (inputs, Box::new(|t, v| t.stack(&[v[0], v[1], v[0]])))
        }),
        ("reshape", |rng| {
            let inputs = vec![random_tensor(rng, &[2, 6])];
            (inputs, Box::new(|t, v| t.reshape(v[0], &[3, 4])))
        }),
        ("fan_out", |rng| {
            let inputs = vec![random_tensor(rng, &[4])];
            (
                inputs,
                Box::new(|t, v| {
                    let sq = t.cosine_similarity(v[0], v[0])?;
                    let n = t.l2_norm(v[0]);
                    let s = t.add(sq, n)?;
                    let twice = t.add(v[0], v[0])?;
                    let m = t.sum(twice);
                    t.add(s, m)
                }),
            )
        }),
    ]
}

/// Worst relative error per operator over `trials` random instances.
pub fn run_op_trials(trials: usize, seed: u64) -> Vec<(&'static str, f64)> {
    op_cases()
        .into_iter()
        .enumerate()
        .map(|(k, (name, case))| {
            let mut worst = 0.0f64;
            for trial in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64) << 32) ^ trial as u64);
                let (inputs, build) = case(&mut rng);
                worst = worst.max(check(&inputs, &build, None, &mut rng));
            }
            (name, worst)
        })
        .collect()
}
