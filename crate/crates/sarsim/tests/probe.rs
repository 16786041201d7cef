// Scratch feasibility probe for the end-to-end experiment. Will be replaced
// by the acceptance suite.

use std::collections::BTreeMap;
use std::time::Instant;

use sarsim::data::SyntheticDatasetConfig;
use sarsim::optimize::{DEConfig, ParamLayout, VariantChoice};
use sarsim::pipeline::*;

#[test]
#[ignore]
fn probe_end_to_end() {
    let t0 = Instant::now();
    let prepared = prepare_synthetic_experiment(SyntheticDatasetConfig::default(), 5000.0).unwrap();
    println!("prepare: {:?} (tx = {:.3e})", t0.elapsed(), prepared.tx_amplitude);

    let class = prepared.dataset.classes()[0].clone();
    let split = train_test_split(&prepared.dataset, &class, 10.0, 2.0, 2.5, 1.0, 7).unwrap();
    let obs = observations_from(&prepared.dataset, &split.train).unwrap();
    let samples: Vec<&sarsim::data::SarSample> =
        split.test.iter().map(|&i| &prepared.dataset.samples()[i]).collect();
    let layout = ParamLayout::new(4, VariantChoice::FreeAll);
    let mut model_opt = None;
    for (bin, ds, floor) in [(10.0, 4usize, 1e-1)] {
        let (model, acc) = train_reference_with_floor(&prepared.dataset, bin, ds, floor).unwrap();
        println!("bin {bin} ds {ds} floor {floor:.0e}:");
        let de = DEConfig { max_iterations: 60, seed: 5, ..Default::default() };
        let (params, trace) = optimize_attack(&obs, &model, &class, &prepared.renderer, layout, OptimizerChoice::De(de)).unwrap();
        let mut attacks = BTreeMap::new();
        attacks.insert(class.clone(), params);
        let report = fooling_report(&attacks, &model, &prepared.renderer, &samples).unwrap();
        println!("floor {floor:.0e}: accuracy {acc:.4}, loss {:.3}, fooling {:.3}", trace.best_loss, report.average_rate);
        println!("  trace: {:?}", trace.best_loss_per_iteration.iter().step_by(4).map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
        model_opt = Some(model);
    }
    let model = model_opt.unwrap();

    // Manual spoof diagnostic: one boresight-aimed reflector at the ring9
    // marker radius, on ring5 samples.
    {
        use sarsim::attack::ReflectorConfig;
        use sarsim::classify::TargetModel as _;
        let mut flips = 0usize;
        let mut total = 0usize;
        let mut amp_sum = 0.0;
        for s in samples.iter().take(40) {
            let label_idx = model.class_labels().iter().position(|l| *l == s.class_label).unwrap();
            if model.predict_label(&s.chip).unwrap() != label_idx { continue; }
            total += 1;
            let aspect = sarsim::geometry::AspectAngles::from_degrees(s.incidence_deg, s.azimuth_deg).unwrap();
            // marker scene position rotates with the scene; place at radius 9 px along scene x
            let refl = ReflectorConfig {
                x: 15.5 * 0.3, y: 0.15,
                boresight_incidence: aspect.incidence(),
                boresight_azimuth: aspect.azimuth(),
            };
            let pert = prepared.renderer.render_reflectors(aspect.azimuth(), &[refl]);
            amp_sum += pert.magnitude().max() / s.chip.max();
            let adv = sarsim::attack::compose_adversarial(&s.chip, &pert).unwrap();
            if model.predict_label(&adv).unwrap() != label_idx { flips += 1; }
        }
        println!("manual spoof: {flips}/{total} flips, mean pert/clean peak ratio {:.2}", amp_sum / total.max(1) as f64);
    }

    // Hand-built reference attack: four reflectors on the ring9 radius at
    // 90-degree steps, boresights on the ring of azimuths, theta at 75 deg.
    {
        use sarsim::attack::AttackParams;
        let r = 15.5 * 0.3;
        let theta = vec![
            r, 0.15, -r, 0.15, // x: E, N(x=0.15), W, S
            0.15, r, 0.15, -r, // y
            75f64.to_radians(), 75f64.to_radians(), 75f64.to_radians(), 75f64.to_radians(),
            0.7854, // phi_1 = 45 deg in [0, 90]
        ];
        let hand = AttackParams::new(4, theta, 38.4, 38.4).unwrap();
        let loss = sarsim::attack::attack_loss(&hand, &obs, &model, &class, &prepared.renderer).unwrap();
        let mut a = BTreeMap::new();
        a.insert(class.clone(), hand);
        let rep = fooling_report(&a, &model, &prepared.renderer, &samples).unwrap();
        println!("hand-built: loss {loss:.4}, fooling {:.3}", rep.average_rate);
    }

    // Flip rate vs orientation offset from the sample azimuth.
    {
        use sarsim::attack::ReflectorConfig;
        use sarsim::classify::TargetModel as _;
        for off_deg in [0.0f64, 10.0, 20.0, 30.0, 40.0] {
            let mut flips = 0usize;
            let mut total = 0usize;
            for s in samples.iter().take(60) {
                let label_idx = model.class_labels().iter().position(|l| *l == s.class_label).unwrap();
                if model.predict_label(&s.chip).unwrap() != label_idx { continue; }
                total += 1;
                let aspect = sarsim::geometry::AspectAngles::from_degrees(s.incidence_deg, s.azimuth_deg).unwrap();
                let refl = ReflectorConfig {
                    x: 15.5 * 0.3, y: 0.15,
                    boresight_incidence: aspect.incidence(),
                    boresight_azimuth: aspect.azimuth() + off_deg.to_radians(),
                };
                let pert = prepared.renderer.render_reflectors(aspect.azimuth(), &[refl]);
                let adv = sarsim::attack::compose_adversarial(&s.chip, &pert).unwrap();
                if model.predict_label(&adv).unwrap() != label_idx { flips += 1; }
            }
            println!("orientation offset {off_deg:4.1} deg: flips {flips}/{total}");
        }
    }

    // m = 8 attack.
    {
        for iters in [120usize, 180] {
            let layout8 = ParamLayout::new(8, VariantChoice::FreeAll);
            let de = DEConfig { max_iterations: iters, seed: 5, ..Default::default() };
            let (params8, tr) = optimize_attack(&obs, &model, &class, &prepared.renderer, layout8, OptimizerChoice::De(de)).unwrap();
            let mut a = BTreeMap::new();
            a.insert(class.clone(), params8);
            let rep = fooling_report(&a, &model, &prepared.renderer, &samples).unwrap();
            println!("m=8 fooling ({iters} iters, loss {:.3}): {:.3}", tr.best_loss, rep.average_rate);
        }
    }

    // Known-aspect Delta = 0: single reflector, position-only DE on one sample.
    {
        use sarsim::attack::KnownAspectAttack;
        use sarsim::classify::TargetModel as _;
        let mut flips = 0usize;
        for class in prepared.dataset.classes() {
            let split = train_test_split(&prepared.dataset, &class, 10.0, 2.0, 2.5, 1.0, 11).unwrap();
            let i = split.train[3];
            let s = &prepared.dataset.samples()[i];
            let kaa = KnownAspectAttack {
                estimated_azimuth: s.azimuth_deg.to_radians(),
                estimated_incidence: s.incidence_deg.to_radians(),
                uncertainty: 0.0,
            };
            let ob = observations_from(&prepared.dataset, &[i]).unwrap();
            let ob0 = ob.iter().next().unwrap().clone();
            let de = DEConfig { max_iterations: 15, seed: 2, ..Default::default() };
            let (model_c, _) = train_reference_with_floor(&prepared.dataset, 10.0, 4, 1e-1).unwrap();
            let (pos, tr) = optimize_known_aspect(&kaa, &ob0, &model_c, &class, &prepared.renderer, &de, (38.4, 38.4)).unwrap();
            // Evaluate on the training sample.
            let refl = kaa.reflector(pos.0, pos.1);
            let aspect = sarsim::geometry::AspectAngles::from_degrees(s.incidence_deg, s.azimuth_deg).unwrap();
            let pert = prepared.renderer.render_reflectors(aspect.azimuth(), &[refl]);
            let adv = sarsim::attack::compose_adversarial(&s.chip, &pert).unwrap();
            let li = model_c.class_labels().iter().position(|l| *l == s.class_label).unwrap();
            let flipped = model_c.predict_label(&adv).unwrap() != li;
            println!("known-aspect {class}: loss {:.3} flipped {flipped}", tr.best_loss);
            if flipped { flips += 1; }
        }
        println!("known-aspect flip count: {flips}/4");
    }

    // Random-placement baseline: 20 random draws, best-of on the test split.
    use rand::{Rng as _, SeedableRng as _};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let bounds = layout.bounds();
    let mut best_rate = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = bounds.lower.iter().zip(&bounds.upper).map(|(l, u)| rng.gen_range(*l..=*u)).collect();
        let p = layout.to_attack_params(&x);
        let mut a = BTreeMap::new();
        a.insert(class.clone(), p);
        let r = fooling_report(&a, &model, &prepared.renderer, &samples).unwrap();
        best_rate = best_rate.max(r.average_rate);
    }
    println!("random baseline best-of-20: {best_rate:.3}");
}
