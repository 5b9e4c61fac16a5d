use umaxent::fugitive::{build_tower_channel, observe, sample_expert, FugitiveWorld, GridMap, NoiseSetting};
use umaxent::io::{format_mdp, format_sequences, parse_mdp, parse_sequences};
use umaxent::irl::{DecodeRule, Demonstrations, IrlConfig, IrlProblem, IrlRegistry};

fn problem_parts(setting: &NoiseSetting) -> (GridMap, FugitiveWorld, Demonstrations) {
    let map = GridMap::default();
    let world = FugitiveWorld::new(&map).unwrap();
    let channel = build_tower_channel(&map, setting).unwrap();
    let trajectories = sample_expert(&world, 10.0, 8, 32, 5).unwrap();
    let observations = observe(&channel, &trajectories, 6).unwrap();
    (
        map,
        world,
        Demonstrations {
            trajectories,
            observations,
        },
    )
}

#[test]
fn noisy_observer_beats_decoding_in_low_noise() {
    let setting = NoiseSetting::low();
    let (map, world, demos) = problem_parts(&setting);
    let channel = build_tower_channel(&map, &setting).unwrap();
    let config = IrlConfig::default();
    let problem = IrlProblem {
        mdp: &world.mdp,
        features: &world.features,
        channel: &channel,
        rule: DecodeRule {
            special: Some(map.miss_symbol()),
            special_state: Some(map.decoy()),
        },
        config: &config,
    };
    let registry = IrlRegistry::standard();
    let score = |name: &str| {
        let res = registry.get(name).unwrap().learn(&problem, &demos).unwrap();
        world.score(&res.weights, 1e-8).unwrap()
    };
    let truth = score("TRUE");
    let uncertain = score("uMaxCausalEntIRL");
    let decoded = score("ML");
    assert!(truth < 1.0, "TRUE {truth}");
    assert!(uncertain < decoded, "uMaxCausalEntIRL {uncertain} vs ML {decoded}");
}

#[test]
fn domain_round_trips_through_text() {
    let (_, world, demos) = problem_parts(&NoiseSetting::high());
    let mdp = parse_mdp(&format_mdp(&world.mdp)).unwrap();
    assert_eq!(mdp, world.mdp);
    let seqs = parse_sequences(&format_sequences(&demos.observations)).unwrap();
    assert_eq!(seqs, demos.observations);
}
