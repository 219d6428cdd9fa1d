//! Property suites: finite-difference gradient checks, causality and
//! receptive-field sweeps, and Monte-Carlo baseline oracles.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::nn::{
    init, BodySpec, Bound, CellKind, InputEncoding, ModelInput, ModelSpec, Readout, RnnSpec, SequenceModel, TcnSpec,
};
use crate::tasks::{self, baseline_loss, BatchInputs, TaskKind, Targets};
use crate::tensor::Tensor;

/// Relative-error bound for analytic vs central-difference gradients.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Gradcheck,
    Causality,
    Baselines,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gradcheck" => Some(Suite::Gradcheck),
            "causality" => Some(Suite::Causality),
            "baselines" => Some(Suite::Baselines),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} ({})", self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Gradcheck => gradcheck_suite(),
        Suite::Causality => causality_suite(20, 0x5eed),
        Suite::Baselines => baselines_suite(),
    }
}

/// Largest `|analytic − numeric| / max(1, |numeric|)` over every element
/// of every input, using central differences in `f64`.
pub fn max_gradient_error<F>(inputs: &[Tensor<f64>], f: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone().with_requires_grad(true))).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tape.grad(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();

    let eval = |inputs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };
    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (i, grads) in analytic.iter().enumerate() {
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + FD_STEP;
            let up = eval(&work)?;
            work[i].data_mut()[j] = orig - FD_STEP;
            let down = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let err = (grads[j] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn randn(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    init::normal(shape, std, rng)
}

fn grad_check(name: &str, inputs: Vec<Tensor<f64>>, f: impl Fn(&mut Tape<f64>, &[Var]) -> Result<Var>) -> Result<Check> {
    let err = max_gradient_error(&inputs, f)?;
    Ok(Check {
        name: format!("gradcheck {name}"),
        passed: err < GRADCHECK_TOLERANCE,
        detail: format!("max rel err {err:.2e}"),
    })
}

/// Reduces any tensor to a scalar with a fixed random projection, so
/// every output element contributes a distinct weight.
fn project(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.shape(y).to_vec();
    let w = tape.constant(randn(&shape, 1.0, &mut rng));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

fn model_check(name: &str, spec: ModelSpec, input: Tensor<f64>, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model: SequenceModel<f64> = SequenceModel::build(&spec, &mut rng)?;
    // Larger weights than the training init so every path carries signal.
    for t in model.params_mut().tensors_mut() {
        let fresh = randn(t.shape(), 0.5, &mut rng);
        t.data_mut().copy_from_slice(fresh.data());
    }
    let params: Vec<Tensor<f64>> = model.params().tensors().to_vec();
    let grad_model = model.clone();
    grad_check(name, params, move |tape, vars| {
        let bound = Bound::new(vars.to_vec());
        let mut drop_rng = ChaCha8Rng::seed_from_u64(99);
        let y = grad_model.forward(tape, &bound, ModelInput::Dense(&input), true, &mut drop_rng)?;
        project(tape, y, 5)
    })
}

fn gradcheck_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = Vec::new();

    let x = randn(&[2, 3, 9], 1.0, &mut rng);
    let w = randn(&[4, 3, 3], 1.0, &mut rng);
    let b = randn(&[4], 1.0, &mut rng);
    checks.push(grad_check("conv1d_causal", vec![x, w, b], |t, v| {
        let y = t.conv1d_causal(v[0], v[1], Some(v[2]), 2)?;
        project(t, y, 1)
    })?);

    let a = randn(&[3, 4], 1.0, &mut rng);
    let m = randn(&[4, 5], 1.0, &mut rng);
    checks.push(grad_check("matmul", vec![a, m], |t, v| {
        let y = t.matmul(v[0], v[1])?;
        project(t, y, 2)
    })?);

    let x = randn(&[3, 4], 1.0, &mut rng);
    let w = randn(&[5, 4], 1.0, &mut rng);
    let b = randn(&[5], 1.0, &mut rng);
    checks.push(grad_check("linear", vec![x, w, b], |t, v| {
        let y = t.linear(v[0], v[1], Some(v[2]))?;
        project(t, y, 3)
    })?);
    let x3 = randn(&[2, 4, 6], 1.0, &mut rng);
    let w = randn(&[3, 4], 1.0, &mut rng);
    let b = randn(&[3], 1.0, &mut rng);
    checks.push(grad_check("linear per-step", vec![x3, w, b], |t, v| {
        let y = t.linear(v[0], v[1], Some(v[2]))?;
        project(t, y, 4)
    })?);

    for (name, kind) in [
        ("add", crate::autodiff::BinaryKind::Add),
        ("sub", crate::autodiff::BinaryKind::Sub),
        ("mul", crate::autodiff::BinaryKind::Mul),
    ] {
        let a = randn(&[3, 4], 1.0, &mut rng);
        let b = randn(&[3, 4], 1.0, &mut rng);
        let c = randn(&[4], 1.0, &mut rng);
        checks.push(grad_check(&format!("{name} (with bias broadcast)"), vec![a, b, c], move |t, v| {
            let y = t.elementwise(kind, v[0], v[1])?;
            let y = t.elementwise(kind, y, v[2])?;
            project(t, y, 6)
        })?);
    }

    for (name, kind) in [
        ("relu", crate::autodiff::ActivationKind::Relu),
        ("sigmoid", crate::autodiff::ActivationKind::Sigmoid),
        ("tanh", crate::autodiff::ActivationKind::Tanh),
    ] {
        let x = randn(&[4, 5], 1.5, &mut rng);
        checks.push(grad_check(name, vec![x], move |t, v| {
            let y = t.activation(kind, v[0]);
            project(t, y, 7)
        })?);
    }

    let p = randn(&[6, 1], 1.0, &mut rng);
    let target: Vec<f64> = randn(&[6], 1.0, &mut rng).into_data();
    checks.push(grad_check("mse", vec![p], move |t, v| t.mse(v[0], &target))?);

    let logits = randn(&[4, 5], 2.0, &mut rng);
    checks.push(grad_check("cross_entropy", vec![logits], |t, v| t.cross_entropy(v[0], &[0, 4, 2, 2], None))?);
    let logits = randn(&[2, 4, 3], 2.0, &mut rng);
    let weights = vec![1.0, 0.0, 2.0, 0.5, 1.0, 0.0];
    checks.push(grad_check("cross_entropy per-step weighted", vec![logits], move |t, v| {
        t.cross_entropy(v[0], &[0, 1, 2, 3, 3, 1], Some(&weights))
    })?);

    let logits = randn(&[2, 5, 3], 2.0, &mut rng);
    let targets: Vec<f64> = (0..30).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
    checks.push(grad_check("bernoulli_nll", vec![logits], move |t, v| t.bernoulli_nll(v[0], &targets))?);

    let vdir = randn(&[3, 2, 4], 1.0, &mut rng);
    let g = randn(&[3], 1.0, &mut rng);
    checks.push(grad_check("weight_norm", vec![vdir, g], |t, v| {
        let w = t.weight_norm(v[0], v[1])?;
        project(t, w, 8)
    })?);

    let x = randn(&[4, 3, 5], 1.0, &mut rng);
    checks.push(grad_check("channel_dropout", vec![x], |t, v| {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let y = t.channel_dropout(v[0], 0.4, true, &mut r)?;
        project(t, y, 9)
    })?);

    let x = randn(&[2, 3, 4], 1.0, &mut rng);
    checks.push(grad_check("select_time/stack_time", vec![x], |t, v| {
        let parts: Vec<Var> = (0..4).rev().map(|s| t.select_time(v[0], s)).collect::<Result<_>>()?;
        let y = t.stack_time(&parts)?;
        project(t, y, 10)
    })?);
    let x = randn(&[3, 6], 1.0, &mut rng);
    checks.push(grad_check("slice_cols", vec![x], |t, v| {
        let a = t.slice_cols(v[0], 1, 3)?;
        let b = t.slice_cols(v[0], 2, 3)?;
        let y = t.mul(a, b)?;
        project(t, y, 11)
    })?);
    let table = randn(&[5, 3], 1.0, &mut rng);
    checks.push(grad_check("embedding", vec![table], |t, v| {
        let y = t.embedding(v[0], &[0, 4, 4, 1, 2, 0], 2)?;
        project(t, y, 12)
    })?);

    let tcn = |gating: bool| ModelSpec {
        body: BodySpec::Tcn(TcnSpec {
            input_ch: 2,
            level_channels: vec![4, 4],
            kernel_size: 2,
            dropout: 0.2,
            use_residual: true,
            use_gating: gating,
            dilation_base: 2,
        }),
        input: InputEncoding::Dense { channels: 2 },
        readout: Readout::PerStep,
        outputs: 3,
    };
    let input = randn(&[2, 2, 5], 1.0, &mut rng);
    checks.push(model_check("tcn composite", tcn(false), input.clone(), 21)?);
    checks.push(model_check("gated tcn composite", tcn(true), input.clone(), 22)?);
    for cell in [CellKind::Lstm, CellKind::Gru, CellKind::Vanilla] {
        let spec = ModelSpec {
            body: BodySpec::Rnn(RnnSpec {
                cell,
                input_ch: 2,
                hidden_size: 4,
                num_layers: 2,
                dropout: 0.2,
                forget_bias: 1.0,
            }),
            input: InputEncoding::Dense { channels: 2 },
            readout: Readout::LastStep,
            outputs: 3,
        };
        checks.push(model_check(&format!("{} composite", cell.name()), spec, input.clone(), 23)?);
    }
    Ok(checks)
}

fn tcn_output(model: &SequenceModel<f64>, x: &Tensor<f64>) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc = model.encode(&mut tape, &bound, ModelInput::Dense(x))?;
    let y = model.tcn().expect("tcn body").forward(&mut tape, &bound, enc, false, &mut rng)?;
    Ok(tape.data(y).to_vec())
}

/// Perturbation sweep over random TCN specs. Returns one check per spec.
pub fn causality_suite(specs: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(specs);
    for s in 0..specs {
        let k = rng.random_range(2..=8usize);
        let n = rng.random_range(1..=6usize);
        let cin = rng.random_range(1..=3usize);
        let widths: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4usize)).collect();
        let spec = TcnSpec {
            input_ch: cin,
            level_channels: widths.clone(),
            kernel_size: k,
            dropout: 0.0,
            use_residual: rng.random_bool(0.8),
            use_gating: rng.random_bool(0.2),
            dilation_base: 2,
        };
        let rf = spec.receptive_field();
        let model_spec = ModelSpec {
            body: BodySpec::Tcn(spec.clone()),
            input: InputEncoding::Dense { channels: cin },
            readout: Readout::PerStep,
            outputs: 1,
        };
        let mut model: SequenceModel<f64> = SequenceModel::build(&model_spec, &mut rng)?;
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        for t in model.params_mut().tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        }
        let len = rf + 6;
        let c = widths[n - 1];
        let x = randn(&[1, cin, len], 1.0, &mut rng);
        let base = tcn_output(&model, &x)?;

        let mut leaks = 0usize;
        let mut far_changes = 0usize;
        let positions = [0, len / 3, len / 2, len - 1];
        for &p in &positions {
            let mut xp = x.clone();
            for ch in 0..cin {
                xp.data_mut()[ch * len + p] += 1.0;
            }
            let out = tcn_output(&model, &xp)?;
            for ch in 0..c {
                for t in 0..len {
                    let same = out[ch * len + t].to_bits() == base[ch * len + t].to_bits();
                    if t < p && !same {
                        leaks += 1;
                    }
                    if t >= p + rf && !same {
                        far_changes += 1;
                    }
                }
            }
        }

        // With positive weights and inputs every unit stays active, so the
        // oldest input inside the window must reach the output.
        let mut positive = model.clone();
        for t in positive.params_mut().tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = v.abs() + 0.05);
        }
        let xpos = Tensor::full([1, cin, len], 0.5);
        let base_pos = tcn_output(&positive, &xpos)?;
        let mut xp = xpos.clone();
        xp.data_mut()[0] += 1.0;
        let out_pos = tcn_output(&positive, &xp)?;
        let edge = rf - 1;
        let edge_changed = (0..c).any(|ch| out_pos[ch * len + edge] != base_pos[ch * len + edge]);
        let beyond_same = (0..c).all(|ch| out_pos[ch * len + rf].to_bits() == base_pos[ch * len + rf].to_bits());

        let passed = leaks == 0 && far_changes == 0 && beyond_same && edge_changed;
        checks.push(Check {
            name: format!("causality spec {s} (k={k}, n={n}, widths={widths:?}, rf={rf})"),
            passed,
            detail: format!(
                "future leaks {leaks}, changes beyond rf {far_changes}, edge responds {edge_changed}, beyond edge unchanged {beyond_same}"
            ),
        });
    }
    Ok(checks)
}

fn relative_check(name: &str, measured: f64, expected: f64, tol: f64) -> Check {
    let rel = (measured - expected).abs() / expected.abs();
    Check {
        name: name.to_string(),
        passed: rel <= tol,
        detail: format!("measured {measured:.6}, analytic {expected:.6}, rel diff {rel:.2e}, tol {tol}"),
    }
}

/// Monte-Carlo adding-problem MSE of the constant predictor 1.0.
pub fn adding_constant_predictor_mse(samples: usize, seed: u64) -> Result<f64> {
    let chunk = 100_000;
    let mut total = 0.0;
    let mut done = 0;
    let mut k = 0u64;
    while done < samples {
        let n = chunk.min(samples - done);
        let batch = tasks::gen_adding::<f64>(n, 8, seed.wrapping_add(k))?;
        let Targets::Values(y) = &batch.targets else { unreachable!() };
        total += y.iter().map(|&v| (v - 1.0) * (v - 1.0)).sum::<f64>();
        done += n;
        k += 1;
    }
    Ok(total / samples as f64)
}

/// Copy-memory loss of the predictor that ignores its input: blank on
/// every position before recall, uniform over the digits 1..=8 during it.
pub fn copy_memoryless_loss(samples: usize, seq_len: usize, seed: u64) -> Result<f64> {
    let batch = tasks::gen_copy_memory::<f64>(samples, seq_len, seed)?;
    let len = seq_len + 20;
    let mut logits = vec![-1e9; samples * 10 * len];
    for b in 0..samples {
        for t in 0..len {
            if t < len - 10 {
                logits[(b * 10) * len + t] = 0.0;
            } else {
                for c in 1..=8 {
                    logits[(b * 10 + c) * len + t] = 0.0;
                }
            }
        }
    }
    let mut tape = Tape::new();
    let l = tape.constant(Tensor::from_vec(logits, [samples, 10, len])?);
    let loss = batch.loss(&mut tape, l)?;
    Ok(tape.value(loss).item())
}

/// Payload accuracy of guessing uniformly among 1..=8.
pub fn copy_random_guess_accuracy(samples: usize, seed: u64) -> Result<f64> {
    let batch = tasks::gen_copy_memory::<f64>(samples, 5, seed)?;
    let Targets::Labels(y) = &batch.targets else { unreachable!() };
    let mask = batch.mask.as_ref().expect("payload mask");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let (mut hit, mut total) = (0usize, 0usize);
    for (i, &m) in mask.iter().enumerate() {
        if m > 0.0 {
            total += 1;
            hit += (rng.random_range(1..=8usize) == y[i]) as usize;
        }
    }
    Ok(hit as f64 / total as f64)
}

fn baselines_suite() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let adding = adding_constant_predictor_mse(1_000_000, 17)?;
    checks.push(relative_check(
        "adding: constant-1 predictor MSE vs 1/6",
        adding,
        baseline_loss(TaskKind::Adding, 8).expect("adding baseline"),
        0.01,
    ));
    let copy = copy_memoryless_loss(64, 1000, 18)?;
    checks.push(relative_check(
        "copy T=1000: memoryless loss vs 10 ln 8 / 1020",
        copy,
        baseline_loss(TaskKind::Copy, 1000).expect("copy baseline"),
        0.01,
    ));
    let acc = copy_random_guess_accuracy(20_000, 19)?;
    checks.push(relative_check("copy: random payload guess accuracy vs 1/8", acc, 0.125, 0.02));

    let mut tape = Tape::<f64>::new();
    let logits = tape.constant(Tensor::zeros([3, 88, 7]));
    let targets: Vec<f64> = (0..3 * 88 * 7).map(|i| (i % 5 == 0) as u8 as f64).collect();
    let nll = tape.bernoulli_nll(logits, &targets)?;
    checks.push(relative_check(
        "music: uniform key predictor NLL per frame vs 88 ln 2",
        tape.value(nll).item(),
        88.0 * 2f64.ln(),
        1e-9,
    ));

    let corpus = tasks::char_corpus_from_bytes(b"the quick brown fox jumps over the lazy dog", Default::default())?;
    let v = corpus.vocab.size();
    let starts: Vec<usize> = (0..4).collect();
    let batch = tasks::CharCorpus::window_batch::<f64>(&corpus.train, &starts, 8)?;
    let BatchInputs::Tokens { batch: b, len, .. } = batch.inputs else { unreachable!() };
    let mut tape = Tape::<f64>::new();
    let logits = tape.constant(Tensor::zeros([b, v, len]));
    let loss = batch.loss(&mut tape, logits)?;
    checks.push(relative_check(
        "charlm: uniform predictor bpc vs log2 V",
        tape.value(loss).item() / 2f64.ln(),
        (v as f64).log2(),
        1e-9,
    ));
    Ok(checks)
}
