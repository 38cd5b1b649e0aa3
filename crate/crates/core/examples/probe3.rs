use wosnn::fields::{mean_error, FieldGrid};
use wosnn::nn::YzNet;
use wosnn::trainer::{predict_field, train, vectorize, TrainConfig};
use wosnn::wos::{sample_dataset, uniform_starts};
use wosnn::PdeProblem;

fn run(seed: u64, zero_head: bool) {
    let prob = PdeProblem::builtin("laplace2d_xy").unwrap();
    let starts = uniform_starts(prob.domain(), 40_000, seed);
    let paths = sample_dataset(&prob, &starts, 1e-3, 20, seed).unwrap();
    let ds = vectorize(&paths).unwrap();
    let mut net = YzNet::init(2, &[32, 64, 128], seed);
    if zero_head {
        let mlp = net.mlp_mut();
        let last = mlp.layers().len() - 1;
        mlp.layers_mut()[last].weights.fill(0.0);
    }
    let cfg = TrainConfig { learning_rate: 3e-4, batch_size: 2048, epochs: 50, seed, shuffle: true };
    let hist = train(&mut net, &ds, &cfg).unwrap();
    let grid = FieldGrid::lattice(prob.domain(), 0.02, 1).unwrap();
    let (u, z) = predict_field(&net, &grid).unwrap();
    let mut eu = FieldGrid::like(&grid, 1);
    eu.fill_scalar(|p| p[0] * p[1]);
    let mut ez = FieldGrid::like(&grid, 2);
    ez.fill_vector(|p| wosnn::Point::new2(p[1], p[0]));
    println!(
        "seed {seed} zero_head {zero_head}: loss0 {:.4} loss49 {:.5} err_u {:.5} err_z {:.5}",
        hist[0], hist.last().unwrap(),
        mean_error(&u, &eu).unwrap(),
        mean_error(&z, &ez).unwrap()
    );
}

fn main() {
    for seed in [1u64, 2, 3, 7] {
        run(seed, true);
    }
}
