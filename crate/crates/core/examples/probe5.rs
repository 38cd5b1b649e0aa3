use std::time::Instant;
use wosnn::fields::{mean_error, mse, FieldGrid};
use wosnn::nn::YzNet;
use wosnn::trainer::{predict_field, train, vectorize, TrainConfig};
use wosnn::wos::{sample_dataset, uniform_starts};
use wosnn::{PdeProblem, Point};

fn zero_head(net: &mut YzNet) {
    let mlp = net.mlp_mut();
    let last = mlp.layers().len() - 1;
    mlp.layers_mut()[last].weights.fill(0.0);
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_default();
    if mode == "lshape" {
        for seed in [1u64, 7] {
            let prob = PdeProblem::builtin("lshape_indicator").unwrap();
            let starts = uniform_starts(prob.domain(), 60_000, seed);
            let paths = sample_dataset(&prob, &starts, 1e-3, 20, seed).unwrap();
            let ds = vectorize(&paths).unwrap();
            let mut net = YzNet::init(2, &[32, 64, 128], seed);
            zero_head(&mut net);
            let cfg = TrainConfig { learning_rate: 3e-4, batch_size: 2048, epochs: 50, seed, shuffle: true };
            let t1 = Instant::now();
            let hist = train(&mut net, &ds, &cfg).unwrap();
            let t_train = t1.elapsed().as_secs_f64();
            let fdm = wosnn::fdm::solve_fdm(&prob, 0.02, 1e-10, 200_000).unwrap();
            let (u, _z) = predict_field(&net, &fdm).unwrap();
            println!(
                "lshape seed {seed}: {} paths train {t_train:.0}s loss {:.5} mse {:.6e}",
                ds.n_paths(), hist.last().unwrap(), mse(&u, &fdm).unwrap()
            );
        }
    }
    if mode == "train3d" {
        let seed = 7u64;
        let prob = PdeProblem::builtin("poisson3d_x2yz").unwrap();
        let starts = uniform_starts(prob.domain(), 60_000, seed);
        let t0 = Instant::now();
        let paths = sample_dataset(&prob, &starts, 1e-2, 80, seed).unwrap();
        let ds = vectorize(&paths).unwrap();
        let mean_len: f64 = ds.lengths().iter().map(|&k| k as f64).sum::<f64>() / ds.n_paths() as f64;
        println!("3d: {} valid maxlen {} meanlen {:.1} sample {:.1}s", ds.n_paths(), ds.max_len(), mean_len, t0.elapsed().as_secs_f64());
        let mut net = YzNet::init(3, &[64, 128, 128], seed);
        zero_head(&mut net);
        let cfg = TrainConfig { learning_rate: 2e-4, batch_size: 1024, epochs: 50, seed, shuffle: true };
        let t1 = Instant::now();
        let hist = train(&mut net, &ds, &cfg).unwrap();
        println!("3d train {:.0}s loss {:.5}", t1.elapsed().as_secs_f64(), hist.last().unwrap());
        let plane = FieldGrid::lattice_in(
            prob.domain(),
            Point::new3(-0.5, 0.0, 0.0),
            Point::new3(-0.5, 1.0, 1.0),
            0.02, 1,
        ).unwrap();
        let (u, _z) = predict_field(&net, &plane).unwrap();
        let mut exact = FieldGrid::like(&plane, 1);
        exact.fill_scalar(|p| prob.exact_u(p).unwrap());
        println!("3d plane err_u {:.5} ({} nodes)", mean_error(&u, &exact).unwrap(), plane.n_nodes());
    }
}
