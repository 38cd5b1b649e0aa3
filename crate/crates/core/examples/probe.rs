use wosnn::fields::{mean_error, FieldGrid};
use wosnn::nn::YzNet;
use wosnn::trainer::{predict_field, train, vectorize, TrainConfig};
use wosnn::wos::{sample_dataset, uniform_starts};
use wosnn::PdeProblem;

fn run(seed: u64, epochs: usize, lr: f64) {
    let prob = PdeProblem::builtin("laplace2d_xy").unwrap();
    let starts = uniform_starts(prob.domain(), 40_000, seed);
    let paths = sample_dataset(&prob, &starts, 1e-3, 20, seed).unwrap();
    let ds = vectorize(&paths).unwrap();
    let mut net = YzNet::init(2, &[32, 64, 128], seed);
    let cfg = TrainConfig { learning_rate: lr, batch_size: 2048, epochs, seed, shuffle: true };
    let hist = train(&mut net, &ds, &cfg).unwrap();
    let grid = FieldGrid::lattice(prob.domain(), 0.02, 1).unwrap();
    let (u, z) = predict_field(&net, &grid).unwrap();
    let mut eu = FieldGrid::like(&grid, 1);
    eu.fill_scalar(|p| p[0] * p[1]);
    let mut ez = FieldGrid::like(&grid, 2);
    ez.fill_vector(|p| wosnn::Point::new2(p[1], p[0]));
    println!(
        "seed {seed} epochs {epochs} lr {lr}: loss {:.5} err_u {:.5} err_z {:.5}",
        hist.last().unwrap(),
        mean_error(&u, &eu).unwrap(),
        mean_error(&z, &ez).unwrap()
    );
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_default();
    match mode.as_str() {
        "epochs" => { run(7, 150, 3e-4); }
        "seeds" => { for s in [1, 2, 3] { run(s, 50, 3e-4); } }
        "lr" => { run(7, 50, 1e-3); }
        _ => {}
    }
}
