use bogc::baselines::AggregatorKind;
use bogc::harness::{gen_synthetic, train, SyntheticSpec, TrainConfig};
use bogc::numerics::stream_id;

fn probe(name: &str, scen: u64, repeats: u64, sep: f64, ln: f64, epochs: usize) {
    for base_seed in [1u64, 2, 3] {
        let (mut dom, mut wu, mut wb, mut wf) = (0, vec![], vec![], vec![]);
        for r in 0..repeats {
            let spec = SyntheticSpec { redundancy: 0.6, label_noise: ln, separation: sep,
                seed: stream_id(&[40, base_seed, r, scen]), ..SyntheticSpec::default() };
            let data = gen_synthetic(&spec).unwrap();
            let seed = stream_id(&[41, base_seed, r, scen]);
            let cfg = TrainConfig { batch_size: 8, epochs, seed, ..TrainConfig::default() };
            let run = |agg: AggregatorKind| train(&TrainConfig { aggregator: agg, ..cfg.clone() }, &data).unwrap();
            let u = run(AggregatorKind::UniformSum);
            if u.conflict_dominant() { dom += 1; }
            wu.push(u.final_worst_group_acc());
            wb.push(run(AggregatorKind::Bogc).final_worst_group_acc());
            wf.push(run(AggregatorKind::FixedBlend{w:0.5}).final_worst_group_acc());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let cross = wf.iter().zip(wu.iter()).filter(|(f,u)| f < u).count();
        println!("{name} seed{base_seed}: dom {dom}/{repeats} u {:.3} b {:.3} gap {:+.3} f {:.3} cross {cross}",
            mean(&wu), mean(&wb), mean(&wb)-mean(&wu), mean(&wf));
    }
}

fn main() {
    probe("CONF sep1.6 e20", 1, 8, 1.6, 0.0, 20);
    probe("CONF sep1.4 e20", 1, 8, 1.4, 0.0, 20);
    probe("ALGN ln.25 e18", 0, 8, 1.8, 0.25, 18);
    probe("ALGN ln.30 e18", 0, 8, 1.8, 0.30, 18);
}
