use mvae::experiment::*;
use mvae::trainer::TrainConfig;
use std::time::Instant;

fn protocol(rep: u64, epochs: usize, lr: f64, hidden: usize, batch: usize) -> (f64, f64, f64, f64, f64, f64) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        data: DataSource::Mixture {
            classes: 2, n_per_class: 500, d_x: 2,
            means: vec![vec![0.0, 0.0], vec![2.5, 0.0]], std: 1.0,
        },
        corruption: CorruptionSpec::Sweep { p0: 0.2, p1_grid: vec![0.1, 0.3, 0.45] },
        per_class_labeled: 10,
        model: ModelSpec { d_z1: 2, d_z2: 2, hidden, noise: NoiseSpec::Oracle },
        train: TrainConfig { epochs, batch_size: batch, learning_rate: lr, ..TrainConfig::default() },
        seeds: (1..=5).map(|s| rep * 100 + s).collect(),
        out_dir: dir.path().to_path_buf(),
        eval: EvalSplit::All,
    };
    let rows = run_sweep(&cfg, 1).unwrap();
    let mean = |p1: f64, obj: &str| -> f64 {
        let v: Vec<f64> = rows.iter()
            .filter(|r| r.p1 == p1 && r.objective == obj && r.status == "ok")
            .map(|r| r.accuracy.unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    (mean(0.1, "mvae"), mean(0.1, "m1m2"),
     mean(0.3, "mvae"), mean(0.3, "m1m2"),
     mean(0.45, "mvae"), mean(0.45, "m1m2"))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(100);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let hidden: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(16);
    let batch: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(100);
    let reps: u64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1);
    println!("epochs={epochs} lr={lr} hidden={hidden} batch={batch}");
    for rep in 1..=reps {
        let t0 = Instant::now();
        let (a1, b1, a3, b3, a45, b45) = protocol(rep, epochs, lr, hidden, batch);
        let gap1 = a1 - b1;
        let gap45 = a45 - b45;
        let ok_a = a45 - b45 >= 0.03;
        let ok_b = gap45 > gap1;
        println!(
            "rep {rep}: p1=0.1 {a1:.3}/{b1:.3}  p1=0.3 {a3:.3}/{b3:.3}  p1=0.45 {a45:.3}/{b45:.3}  gap45={gap45:+.3} gap1={gap1:+.3}  (a){} (b){}  [{:.0}s]",
            if ok_a { "PASS" } else { "fail" },
            if ok_b { "PASS" } else { "fail" },
            t0.elapsed().as_secs_f64()
        );
    }
}
