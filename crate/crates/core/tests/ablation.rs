use vidphase::eval::*;

fn total_variation(p: &[[f64; 2]]) -> f64 {
    p.windows(2).map(|w| (w[1][0] - w[0][0]).abs()).sum::<f64>() / (p.len() - 1) as f64
}

#[test]
fn later_stages_are_smoother() {
    let cfg = PipelineConfig {
        videos: 20,
        ..Default::default()
    };
    let ab = run_methods(&prepare_synthetic(&cfg).unwrap(), &cfg).unwrap();
    assert_eq!(ab.reports.len(), 5);
    for (method, model, _) in &ab.tcn {
        let seqs = ab.inputs.sequences(*method);
        let (mut first, mut last) = (0.0, 0.0);
        for s in &seqs {
            let stages = model.forward(s).unwrap();
            first += total_variation(&stages[0]);
            last += total_variation(stages.last().unwrap());
        }
        let n = seqs.len() as f64;
        println!("{}: stage-1 variation {:.5}, final {:.5}", method.id(), first / n, last / n);
        assert!(last <= first, "{}: final stage rougher than stage 1", method.id());
    }
}
