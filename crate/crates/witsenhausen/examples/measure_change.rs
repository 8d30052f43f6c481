//! Change-of-measure identities on finite team models, checked by enumeration.

use witsenhausen::measure_change::{
    brute_force_pbp, payoff_equivalence, random_model, random_profile, verify_martingale, ModelDocument,
    RandomShape, StrategySpace,
};

fn main() -> witsenhausen::Result<()> {
    let shape = RandomShape::default();
    for seed in 0..5 {
        let model = random_model(&shape, seed)?;
        let profile = random_profile(&model, seed);
        let m = verify_martingale(&model, &profile)?;
        let p = payoff_equivalence(&model, &profile)?;
        let r = brute_force_pbp(&model, &StrategySpace::full(&model)?)?;
        println!(
            "seed {seed}: E°[Θ_t] {:.15?}, conditional gap {:.1e}, payoff {:.12} vs {:.12}, \
             {} profiles, {} person-by-person, global ⊆ PbP: {}",
            m.unconditional,
            m.max_conditional_gap,
            p.original,
            p.reference,
            r.costs.len(),
            r.person_by_person.len(),
            r.global_within_pbp()
        );
    }

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/corrupted.json");
    let doc = ModelDocument::from_json(&std::fs::read_to_string(path)?)?;
    for d in doc.model.kernel_defects(1e-12) {
        println!("corrupted model: {} sums to {}", d.location, d.sum);
    }
    let m = verify_martingale(&doc.model, &doc.profile_or_default())?;
    if let Some(w) = m.worst {
        println!("  martingale fails at t = {}: E°[Θ_t | history] = {} but Θ_(t-1) = {}", w.t, w.conditional, w.previous);
    }
    Ok(())
}
