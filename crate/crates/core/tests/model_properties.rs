mod common;

use common::{random_net, random_trace, LABELS};
use procalign::discovery::{count_directly_follows, dependency_measure, precision_escaping_edges, token_replay_fitness};
use procalign::eventdata::{parse_prob_trace, write_prob_trace, Distribution, EventLog, TraceFormat, SUM_TOLERANCE};
use procalign::petri::{pnml_read, pnml_write};
use procalign::synth::{corrupt, net_alphabet, sample_trace, NoiseModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn normalization_sums_to_one(raw in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let scaled: Vec<f64> = raw.iter().map(|x| x / total * (1.0 + SUM_TOLERANCE / 2.0)).collect();
        let d = Distribution::normalized(scaled).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
        prop_assert_eq!(d.max(), d.prob(d.argmax()));
        prop_assert!(d.probs()[..d.argmax()].iter().all(|&p| p < d.max()));
    }

    #[test]
    fn raw_sums_off_by_more_than_tolerance_are_rejected(raw in prop::collection::vec(0.01f64..1.0, 1..10), factor in 1.02f64..3.0) {
        let total: f64 = raw.iter().sum();
        let scaled: Vec<f64> = raw.iter().map(|x| x / total * factor).collect();
        prop_assert!(Distribution::normalized(scaled).is_err());
    }

    #[test]
    fn prob_trace_round_trips(seed in any::<u64>(), json in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = random_trace(&mut rng, 8);
        let format = if json { TraceFormat::Json } else { TraceFormat::Csv };
        let mut buf = Vec::new();
        write_prob_trace(&trace, &mut buf, format).unwrap();
        let back = parse_prob_trace(buf.as_slice(), format).unwrap();
        prop_assert_eq!(back.alphabet(), trace.alphabet());
        prop_assert_eq!(back.len(), trace.len());
        for (a, b) in back.events().iter().zip(trace.events()) {
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pnml_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, 12);
        prop_assert_eq!(pnml_read(&pnml_write(&net)).unwrap(), net);
    }

    #[test]
    fn dependency_is_bounded_and_antisymmetric(seqs in prop::collection::vec(prop::collection::vec(0usize..4, 1..8), 1..20)) {
        let log = EventLog::from_sequences(seqs.iter().map(|s| s.iter().map(|&i| LABELS[i]))).unwrap();
        let df = count_directly_follows(&log);
        let n = log.alphabet().len();
        for a in 0..n {
            for b in 0..n {
                let d = dependency_measure(&df, a, b);
                prop_assert!(d > -1.0 && d < 1.0);
                if a != b {
                    prop_assert!((d + dependency_measure(&df, b, a)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn quality_measures_are_bounded(seed in any::<u64>(), seqs in prop::collection::vec(prop::collection::vec(0usize..5, 1..6), 1..10)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, 8);
        let log = EventLog::from_sequences(seqs.iter().map(|s| s.iter().map(|&i| LABELS[i]))).unwrap();
        let f = token_replay_fitness(&net, &log);
        let p = precision_escaping_edges(&net, &log);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn sampled_traces_are_accepted_by_their_net(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, 8);
        let samples: Vec<_> = (0..10).filter_map(|s| sample_trace(&net, seed ^ s, 30).ok()).collect();
        prop_assume!(!samples.is_empty());
        for t in &samples {
            // a zero-cost alignment of the one-hot trace proves the sequence is a model run
            let alphabet = net_alphabet(&net).unwrap();
            let lp = corrupt(t, &NoiseModel::none(), &alphabet).unwrap();
            let params = procalign::alignment::CostParams::new(0.5).unwrap();
            let a = procalign::alignment::align(&net, lp.trace(), params).unwrap();
            prop_assert_eq!(a.total_cost(), 0.0);
        }
    }

    #[test]
    fn noise_keeps_truth_supported(seed in any::<u64>(), conc in 0.1f64..50.0, swap in 0.0f64..0.95) {
        let net = procalign::petri::fixtures::drink_or_phone();
        let alphabet = net_alphabet(&net).unwrap();
        let truth = sample_trace(&net, seed, 10).unwrap();
        let dir = corrupt(&truth, &NoiseModel::dirichlet(conc, seed), &alphabet).unwrap();
        let conf = corrupt(&truth, &NoiseModel::confusion(&[("DrinkFromCup", "AnswerPhone", swap), ("PickUpCup", "PutDownCup", swap)], seed), &alphabet).unwrap();
        for (i, label) in truth.activities().iter().enumerate() {
            let k = alphabet.index_of(label).unwrap();
            prop_assert!(dir.trace().events()[i].prob(k) > 0.0);
            prop_assert!(conf.trace().events()[i].prob(k) >= 1.0 - swap - 1e-12);
        }
        prop_assert_eq!(dir, corrupt(&truth, &NoiseModel::dirichlet(conc, seed), &alphabet).unwrap());
    }
}
