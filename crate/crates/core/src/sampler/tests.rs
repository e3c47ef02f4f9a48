use super::*;

fn unit_box(d: usize) -> SampleBox {
    SampleBox::new(vec![0.0; d], vec![1.0; d]).unwrap()
}

/// Total-variation distance between the 50-bin histogram of `run` and the
/// density `3 z^2` on `[0, 1]` (bin masses `((k+1)^3 - k^3) / 50^3`).
fn tv_to_cubic(run: &MhRun) -> f64 {
    let h = Histogram::new((0..run.len()).map(|i| run.sample(i)[0]), 0.0, 1.0, 50);
    let f = h.frequencies();
    let n = 50.0f64;
    0.5 * f
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let k = k as f64;
            (p - ((k + 1.0).powi(3) - k.powi(3)) / n.powi(3)).abs()
        })
        .sum::<f64>()
}

fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn acceptance_examples() {
    assert_eq!(acceptance_prob(2.0, 1.0, true).unwrap(), 1.0);
    assert_eq!(acceptance_prob(1.0, 2.0, true).unwrap(), 0.5);
    assert_eq!(acceptance_prob(5.0, 1.0, false).unwrap(), 0.0);
    assert_eq!(acceptance_prob(0.0, 0.0, true).unwrap(), 1.0);
    assert_eq!(acceptance_prob(3.0, 0.0, true).unwrap(), 1.0);
    assert!(matches!(acceptance_prob(-1.0, 1.0, true), Err(SamplerError::NegativeLoss { .. })));
    assert!(acceptance_prob(1.0, f64::NAN, true).is_err());
}

#[test]
fn constant_loss_gives_uniform_marginals() {
    let spec = ProposalSpec::new(vec![0.25, 0.25], 100_000, 50_000).with_seed(3);
    let run = mh_run(|_| 1.0, &unit_box(2), &spec).unwrap();
    assert_eq!(run.len(), 50_000);
    for axis in 0..2 {
        let ks = ks_uniform((0..run.len()).map(|i| run.sample(i)[axis]).collect());
        assert!(ks < 0.02, "axis {axis}: KS {ks}");
    }
    // Every rejection was an out-of-box proposal.
    assert!(run.acceptance_rate() > 0.3 && run.acceptance_rate() < 1.0);
}

#[test]
fn quadratic_target_is_reproduced() {
    let spec = ProposalSpec::new(vec![0.04], 200_000, 100_000).with_seed(11);
    let run = mh_run(|z| z[0] * z[0], &unit_box(1), &spec).unwrap();
    let tv = tv_to_cubic(&run);
    assert!(tv < 0.05, "TV {tv}");
    let rate = chain_diagnostics(&run, &unit_box(1), 50).acceptance_rate;
    assert!((0.1..=0.7).contains(&rate), "acceptance rate {rate}");
}

#[test]
fn tv_shrinks_with_more_samples() {
    let tvs: Vec<f64> = [10_000, 50_000, 100_000]
        .iter()
        .map(|&keep| {
            let spec = ProposalSpec::new(vec![0.04], 2 * keep, keep).with_seed(5);
            tv_to_cubic(&mh_run(|z| z[0] * z[0], &unit_box(1), &spec).unwrap())
        })
        .collect();
    for w in tvs.windows(2) {
        assert!(w[1] <= w[0] + 0.01, "{tvs:?}");
    }
}

#[test]
fn chains_escape_zero_loss_regions() {
    let loss = |z: &[f64]| if z[0] < 0.5 { 0.0 } else { 1.0 };
    for seed in 0..20 {
        let spec = ProposalSpec::new(vec![0.01], 2000, 100).with_seed(seed);
        let run = mh_run(loss, &unit_box(1), &spec).unwrap();
        assert!((0..run.len()).all(|i| run.sample(i)[0] >= 0.5), "seed {seed}");
    }
}

#[test]
fn samples_stay_in_box_and_are_deterministic() {
    let bx = SampleBox::new(vec![0.0, -1.0], vec![2.0, 0.5]).unwrap();
    let loss = |z: &[f64]| (3.0 * z[0]).sin().powi(2) + z[1] * z[1];
    let spec = ProposalSpec::new(vec![0.5, 0.1], 3000, 1000).with_seed(9);
    let a = mh_run(loss, &bx, &spec).unwrap();
    let b = mh_run(loss, &bx, &spec).unwrap();
    assert_eq!(a, b);
    assert!((0..a.len()).all(|i| bx.contains(a.sample(i))));
    let c = mh_run(loss, &bx, &spec.clone().with_seed(10)).unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn diagnostics_rates_at_the_extremes() {
    // A degenerate box rejects every proposal.
    let point = SampleBox::new(vec![0.5], vec![0.5]).unwrap();
    let run = mh_run(|_| 1.0, &point, &ProposalSpec::new(vec![0.1], 500, 10)).unwrap();
    assert_eq!(chain_diagnostics(&run, &point, 4).acceptance_rate, 0.0);
    // Negligible steps under a constant loss are always accepted.
    let run = mh_run(|_| 1.0, &unit_box(1), &ProposalSpec::new(vec![1e-20], 500, 10).with_seed(1)).unwrap();
    assert_eq!(chain_diagnostics(&run, &unit_box(1), 4).acceptance_rate, 1.0);
}

#[test]
fn replicas_run_in_lockstep_batches() {
    let spec = ProposalSpec::new(vec![0.04, 0.04], 100, 20).with_replicas(50).with_seed(2);
    let mut calls = 0;
    let mut evaluated = 0;
    let mut rng = rng::seeded(2, rng::stream::SAMPLER);
    let run = mh_run_batched(
        |pts, out| {
            calls += 1;
            evaluated += out.len();
            assert_eq!(pts.len(), 2 * out.len());
            for (p, o) in pts.chunks(2).zip(out.iter_mut()) {
                *o = p[0] + p[1];
            }
            Ok(())
        },
        &unit_box(2),
        &spec,
        &mut rng,
    )
    .unwrap();
    assert_eq!(calls, 100);
    assert_eq!(evaluated as u64, spec.evaluations());
    assert_eq!(run.evaluations, 5000);
    assert_eq!(run.len(), 1000);
    assert_eq!(run.chains.len(), 50);
    assert_eq!(run.proposed(), 50 * 99);
    for (i, l) in run.losses.iter().enumerate() {
        let z = run.sample(i);
        assert_eq!(*l, z[0] + z[1]);
    }
}

#[test]
fn bad_losses_and_specs_are_reported() {
    let err = mh_run(|_| f64::NAN, &unit_box(1), &ProposalSpec::new(vec![0.1], 10, 5)).unwrap_err();
    assert!(matches!(err, SamplerError::NonFiniteLoss { ref point, .. } if point.len() == 1));
    let err = mh_run(|_| -1.0, &unit_box(1), &ProposalSpec::new(vec![0.1], 10, 5)).unwrap_err();
    assert!(matches!(err, SamplerError::NegativeLossAt { .. }));
    for spec in [
        ProposalSpec::new(vec![0.0], 10, 5),
        ProposalSpec::new(vec![0.1], 10, 0),
        ProposalSpec::new(vec![0.1], 10, 11),
        ProposalSpec::new(vec![0.1, 0.1], 10, 5),
        ProposalSpec::new(vec![0.1], 10, 5).with_replicas(0),
    ] {
        assert!(matches!(mh_run(|_| 1.0, &unit_box(1), &spec), Err(SamplerError::InvalidSpec(_))), "{spec:?}");
    }
    assert!(SampleBox::new(vec![1.0], vec![0.0]).is_err());
}

#[test]
fn sample_csv_dump() {
    let run = mh_run(|_| 1.0, &unit_box(2), &ProposalSpec::new(vec![0.1, 0.1], 10, 3)).unwrap();
    let mut out = Vec::new();
    write_samples_csv(&mut out, &run, &["x", "t"], 7, true).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,x,t");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("7,"));
    assert!(write_samples_csv(Vec::new(), &run, &["x"], 0, false).is_err());
}
