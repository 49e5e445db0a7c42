//! Drives the command-line front end in-process: generate data, cluster it,
//! score the clustering and price it.

use deep_stdp::cli::run;

fn call(args: &[&str]) -> i32 {
    let mut argv = vec!["deepstdp"];
    argv.extend_from_slice(args);
    println!("$ {}", argv.join(" "));
    run(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

fn main() {
    let dir = std::env::temp_dir().join("deepstdp-cli-example");
    let data = dir.join("blobs");
    let labels = dir.join("kmeans.dstp");
    let (data, labels) = (data.to_str().unwrap(), labels.to_str().unwrap());
    let inputs = format!("{data}/inputs.dstp");
    let truth = format!("{data}/labels.dstp");
    let cfg = dir.join("k3.cfg");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(&cfg, "kmeans.k = 3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "gen-synth",
            "--out",
            data,
            "--kind",
            "blobs",
            "--classes",
            "3",
            "--per-class",
            "50",
            "--sigma",
            "0.05",
            "--seed",
            "1",
        ],
        vec![
            "cluster", "--method", "kmeans", "--in", &inputs, "--config", cfg, "--out", labels,
            "--seed", "1",
        ],
        vec!["metrics", "purity", "--labels", labels, "--truth", &truth],
        vec!["metrics", "nmi", "--a", labels, "--b", &truth],
        vec![
            "cost", "kmeans", "--k", "100", "--d", "256", "--it", "20", "--n", "5000", "--epochs",
            "175",
        ],
    ];
    for args in steps {
        let code = call(&args);
        if code != 0 {
            std::process::exit(code);
        }
    }
}
