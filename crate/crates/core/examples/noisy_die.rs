//! Recovers a loaded die from rolls read through a noisy channel.

use umaxent::em::{run_umaxent, EmConfig, EmpiricalObservations, ObservationModel};
use umaxent::maxent::{model_distribution, FeatureTable};

fn main() -> umaxent::Result<()> {
    // One feature: the face value.
    let features = FeatureTable::from_rows(vec![(1..=6).map(f64::from).collect()])?;
    // Each face is reported correctly 70% of the time, otherwise as a neighbour.
    let channel = ObservationModel::from_rows(
        (0..6)
            .map(|x| {
                let mut row = vec![0.0; 6];
                row[x] = 0.7;
                row[(x + 1) % 6] += 0.15;
                row[(x + 5) % 6] += 0.15;
                row
            })
            .collect(),
    )?;
    let seen = [5, 5, 4, 5, 3, 5, 4, 5, 5, 0, 4, 5, 5, 3, 5, 4];
    let data = EmpiricalObservations::from_samples(6, &seen)?;

    let fit = run_umaxent(&features, &channel, &data, &EmConfig::default(), None)?;
    let model = model_distribution(&fit.weights, &features)?;
    println!(
        "weights {:?} after {} EM iterations",
        fit.weights.as_slice(),
        fit.diagnostics.iterations
    );
    for (face, p) in model.probs().iter().enumerate() {
        println!("face {}: {p:.3}", face + 1);
    }
    Ok(())
}
