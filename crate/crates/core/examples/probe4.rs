use wosnn::fields::{mean_error, FieldGrid};
use wosnn::nn::YzNet;
use wosnn::trainer::{predict_field, train, vectorize, TrainConfig};
use wosnn::wos::{sample_dataset, uniform_starts};
use wosnn::PdeProblem;

fn run(name: &str, seed: u64, n_starts: usize) {
    let prob = PdeProblem::builtin(name).unwrap();
    let starts = uniform_starts(prob.domain(), n_starts, seed);
    let paths = sample_dataset(&prob, &starts, 1e-3, 20, seed).unwrap();
    let ds = vectorize(&paths).unwrap();
    let mut net = YzNet::init(2, &[32, 64, 128], seed);
    let mlp = net.mlp_mut();
    let last = mlp.layers().len() - 1;
    mlp.layers_mut()[last].weights.fill(0.0);
    let cfg = TrainConfig { learning_rate: 3e-4, batch_size: 2048, epochs: 50, seed, shuffle: true };
    let hist = train(&mut net, &ds, &cfg).unwrap();
    let grid = FieldGrid::lattice(prob.domain(), 0.02, 1).unwrap();
    let (u, z) = predict_field(&net, &grid).unwrap();
    let mut eu = FieldGrid::like(&grid, 1);
    eu.fill_scalar(|p| prob.exact_u(p).unwrap());
    let mut ez = FieldGrid::like(&grid, 2);
    ez.fill_vector(|p| prob.exact_grad(p).unwrap());
    println!(
        "{name} seed {seed} starts {n_starts}: {} paths loss {:.5} err_u {:.5} err_z {:.5}",
        ds.n_paths(), hist.last().unwrap(),
        mean_error(&u, &eu).unwrap(),
        mean_error(&z, &ez).unwrap()
    );
}

fn main() {
    for seed in [1u64, 2, 7] {
        run("poisson2d_xy2", seed, 45_000);
    }
}
