use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use umaxent::em::{observation_distribution, run_umaxent, EmConfig, EmpiricalObservations, ObservationModel};
use umaxent::lab::{generate_program, kld, LearnerRegistry, RandomProgramSpec};
use umaxent::maxent::{model_distribution, FeatureTable, Weights};
use umaxent::Error;

#[test]
fn exact_observations_recover_a_log_linear_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (n, k) = (8, 3);
    let table =
        FeatureTable::from_rows((0..k).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()).unwrap();
    let truth = model_distribution(&Weights::new(vec![1.5, -2.0, 0.7]).unwrap(), &table).unwrap();
    // Mild noise: each element is reported correctly 80% of the time.
    let channel = ObservationModel::from_rows(
        (0..n)
            .map(|x| {
                let mut row = vec![0.2 / (n - 1) as f64; n];
                row[x] = 0.8;
                row
            })
            .collect(),
    )
    .unwrap();
    let data = EmpiricalObservations::new(observation_distribution(&truth, &channel).unwrap());
    let fit = run_umaxent(&table, &channel, &data, &EmConfig::default(), None).unwrap();
    let learned = model_distribution(&fit.weights, &table).unwrap();
    assert!(kld(&truth, &learned).unwrap() < 1e-3);
}

#[test]
fn most_likely_decoding_loses_to_em_on_generated_programs() {
    let learners = LearnerRegistry::standard();
    let ml = learners.get("MLMaxEnt").unwrap();
    let em = EmConfig::default();
    let mut wins = 0;
    for i in 0..100 {
        let program = generate_program(&RandomProgramSpec {
            seed: 1000 + i,
            ..RandomProgramSpec::default()
        })
        .unwrap();
        let exact = EmpiricalObservations::new(program.observation_distribution.clone());
        // Decoded histograms can leave elements empty, so the dual has no
        // finite minimizer; score the best iterate the solver reached.
        let decoded = match ml.learn(&program, &exact, &em) {
            Ok(d) => d,
            Err(Error::NotConverged { weights, .. }) => {
                model_distribution(&Weights::new(weights).unwrap(), &program.features).unwrap()
            }
            Err(e) => panic!("{e}"),
        };
        let fit = run_umaxent(&program.features, &program.channel, &exact, &em, None).unwrap();
        let uncertain = model_distribution(&fit.weights, &program.features).unwrap();
        let truth = &program.true_distribution;
        if kld(truth, &decoded).unwrap() > kld(truth, &uncertain).unwrap() {
            wins += 1;
        }
    }
    assert!(wins >= 95, "EM better on {wins}/100");
}
