use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tcnlab::autodiff::ActivationKind;
use tcnlab::config::stream_seed;
use tcnlab::nn::*;
use tcnlab::tasks::{gen_adding, BatchInputs, Permutation, Targets, Vocab};
use tcnlab::{Tape64, Tensor64};

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

#[derive(Debug, Clone)]
struct ConvCase {
    b: usize,
    ci: usize,
    co: usize,
    k: usize,
    d: usize,
    t: usize,
    x: Vec<f64>,
    w: Vec<f64>,
}

fn conv_case() -> impl Strategy<Value = ConvCase> {
    (1usize..3, 1usize..4, 1usize..4, 1usize..5, 1usize..5, 3usize..16).prop_flat_map(|(b, ci, co, k, d, t)| {
        (values(b * ci * t), values(co * ci * k)).prop_map(move |(x, w)| ConvCase { b, ci, co, k, d, t, x, w })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_output_ignores_the_future(c in conv_case(), at in 0usize..16, bump in 0.5f64..5.0) {
        let ConvCase { b, ci, co, k, d, t, x, w } = c;
        let at = at % t;
        let run = |x: Vec<f64>| {
            let mut tape = Tape64::new();
            let xv = tape.constant(Tensor64::from_vec(x, [b, ci, t]).unwrap());
            let wv = tape.constant(Tensor64::from_vec(w.clone(), [co, ci, k]).unwrap());
            let y = tape.conv1d_causal(xv, wv, None, d).unwrap();
            tape.data(y).to_vec()
        };
        let before = run(x.clone());
        let mut moved = x;
        for row in 0..b * ci {
            moved[row * t + at] += bump;
        }
        let after = run(moved);
        prop_assert_eq!(before.len(), b * co * t);
        for row in 0..b * co {
            for s in 0..at {
                prop_assert_eq!(before[row * t + s], after[row * t + s]);
            }
        }
    }

    #[test]
    fn conv_is_finite_with_finite_gradients(c in conv_case()) {
        let ConvCase { b, ci, co, k, d, t, x, w } = c;
        let mut tape = Tape64::new();
        let xv = tape.leaf(Tensor64::from_vec(x, [b, ci, t]).unwrap().with_requires_grad(true));
        let wv = tape.leaf(Tensor64::from_vec(w, [co, ci, k]).unwrap().with_requires_grad(true));
        let y = tape.conv1d_causal(xv, wv, None, d).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss).unwrap();
        prop_assert!(tape.data(y).iter().all(|v| v.is_finite()));
        prop_assert!(tape.grad(xv).unwrap().iter().all(|v| v.is_finite()));
        prop_assert!(tape.grad(wv).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn activations_stay_finite_and_bounded(x in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let n = x.len();
        for kind in [ActivationKind::Relu, ActivationKind::Sigmoid, ActivationKind::Tanh] {
            let mut tape = Tape64::new();
            let xv = tape.leaf(Tensor64::from_vec(x.clone(), [n]).unwrap().with_requires_grad(true));
            let y = tape.activation(kind, xv);
            let loss = tape.sum(y);
            tape.backward(loss).unwrap();
            let out = tape.data(y);
            prop_assert!(out.iter().all(|v| v.is_finite()));
            prop_assert!(tape.grad(xv).unwrap().iter().all(|v| v.is_finite()));
            match kind {
                ActivationKind::Sigmoid => prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v))),
                ActivationKind::Tanh => prop_assert!(out.iter().all(|v| (-1.0..=1.0).contains(v))),
                _ => prop_assert!(out.iter().all(|&v| v >= 0.0)),
            }
        }
    }

    #[test]
    fn cross_entropy_is_finite_for_large_logits(logits in prop::collection::vec(-500.0f64..500.0, 12), label in 0usize..4) {
        let mut tape = Tape64::new();
        let l = tape.leaf(Tensor64::from_vec(logits, [3, 4]).unwrap().with_requires_grad(true));
        let loss = tape.cross_entropy(l, &[label, (label + 1) % 4, 0], None).unwrap();
        tape.backward(loss).unwrap();
        prop_assert!(tape.value(loss).item() >= 0.0);
        prop_assert!(tape.value(loss).item().is_finite());
        prop_assert!(tape.grad(l).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn weight_norm_rows_have_norm_g(v in prop::collection::vec(0.1f64..2.0, 12), g in prop::collection::vec(-3.0f64..3.0, 2)) {
        let mut tape = Tape64::new();
        let vv = tape.constant(Tensor64::from_vec(v, [2, 3, 2]).unwrap());
        let gv = tape.constant(Tensor64::from_vec(g.clone(), [2]).unwrap());
        let w = tape.weight_norm(vv, gv).unwrap();
        for (row, gi) in tape.data(w).chunks(6).zip(&g) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - gi.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn tcn_outputs_are_causal(seed in 0u64..1000, k in 2usize..5, n in 1usize..4, at in 0usize..12) {
        let spec = ModelSpec {
            body: BodySpec::Tcn(TcnSpec {
                input_ch: 2,
                level_channels: vec![3; n],
                kernel_size: k,
                dropout: 0.0,
                use_residual: true,
                use_gating: false,
                dilation_base: 2,
            }),
            input: InputEncoding::Dense { channels: 2 },
            readout: Readout::PerStep,
            outputs: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model: tcnlab::Model64 = SequenceModel::build(&spec, &mut rng).unwrap();
        let t = 12;
        let x: Vec<f64> = (0..2 * t).map(|i| ((i as f64 + seed as f64) * 0.37).sin()).collect();
        let run = |x: Vec<f64>| {
            let mut tape = Tape64::new();
            let bound = model.params().bind(&mut tape);
            let input = Tensor64::from_vec(x, [1, 2, t]).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let y = model.forward(&mut tape, &bound, ModelInput::Dense(&input), false, &mut r).unwrap();
            tape.data(y).to_vec()
        };
        let before = run(x.clone());
        let mut moved = x;
        moved[at] += 1.0;
        moved[t + at] -= 1.0;
        let after = run(moved);
        for c in 0..2 {
            for s in 0..at {
                prop_assert_eq!(before[c * t + s], after[c * t + s]);
            }
        }
    }

    #[test]
    fn permutation_is_a_bijection(n in 1usize..900, seed in any::<u64>()) {
        let p = Permutation::random(n, seed);
        let mut sorted = p.indices().to_vec();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(&p, &Permutation::random(n, seed));
    }

    #[test]
    fn adding_targets_sum_the_two_marked_values(n in 1usize..20, t in 2usize..60, seed in any::<u64>()) {
        let b = gen_adding::<f64>(n, t, seed).unwrap();
        let BatchInputs::Dense(x) = &b.inputs else { panic!("dense inputs") };
        let Targets::Values(y) = &b.targets else { panic!("real targets") };
        for (i, target) in y.iter().enumerate() {
            let row = &x.data()[i * 2 * t..(i + 1) * 2 * t];
            let (vals, marks) = row.split_at(t);
            prop_assert_eq!(marks.iter().filter(|&&m| m == 1.0).count(), 2);
            prop_assert!(marks.iter().all(|&m| m == 0.0 || m == 1.0));
            prop_assert!(vals.iter().all(|v| (0.0..1.0).contains(v)));
            let sum: f64 = vals.iter().zip(marks).map(|(v, m)| v * m).sum();
            prop_assert!((sum - target).abs() < 1e-12);
        }
    }

    #[test]
    fn vocab_round_trips_training_bytes(text in prop::collection::vec(any::<u8>(), 1..200)) {
        let vocab = Vocab::from_bytes(&text);
        let ids = vocab.encode(&text);
        let decoded: Vec<u8> = ids.iter().map(|&i| vocab.symbols()[i]).collect();
        prop_assert_eq!(decoded, text);
        prop_assert!(ids.iter().all(|&i| i < vocab.size()));
    }

    #[test]
    fn stream_seeds_separate_streams(master in any::<u64>(), index in any::<u64>()) {
        let names = ["init", "data.train", "data.test", "shuffle", "dropout", "windows"];
        let seeds: std::collections::HashSet<u64> = names.iter().map(|s| stream_seed(master, s, index)).collect();
        prop_assert_eq!(seeds.len(), names.len());
        prop_assert_ne!(stream_seed(master, "shuffle", index), stream_seed(master, "shuffle", index.wrapping_add(1)));
    }
}
