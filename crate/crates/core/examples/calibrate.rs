use std::time::Instant;

use wosnn::fields::{mean_error, FieldGrid};
use wosnn::nn::YzNet;
use wosnn::trainer::{predict_field, train, train_wos_driven, vectorize, TrainConfig};
use wosnn::wos::{sample_dataset, uniform_starts, wos_grid_estimates};
use wosnn::PdeProblem;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "valid" || which == "all" {
        // Valid-path rates at the paper's sampling budget.
        for seed in [7u64, 8, 9] {
            for name in ["laplace2d_xy", "poisson2d_xy2"] {
                let prob = PdeProblem::builtin(name).unwrap();
                let starts = uniform_starts(prob.domain(), 40_000, seed);
                let t = Instant::now();
                let paths = sample_dataset(&prob, &starts, 1e-3, 20, seed).unwrap();
                println!(
                    "{name} seed {seed}: {} / 40000 valid ({:.2}%) in {:.2}s",
                    paths.len(),
                    100.0 * paths.len() as f64 / 40_000.0,
                    t.elapsed().as_secs_f64()
                );
            }
        }
    }

    if which == "wos" || which == "all" {
        for name in ["laplace2d_xy", "poisson2d_xy2"] {
            let prob = PdeProblem::builtin(name).unwrap();
            let grid = FieldGrid::lattice(prob.domain(), 0.02, 1).unwrap();
            let t = Instant::now();
            let ests =
                wos_grid_estimates(&prob, grid.nodes(), 50, 1e-3, 20, 1234).unwrap();
            let dt = t.elapsed().as_secs_f64();
            let mut field = FieldGrid::like(&grid, 1);
            let mut total_valid = 0;
            for (i, e) in ests.iter().enumerate() {
                field.values_mut()[[i, 0]] = e.estimate;
                total_valid += e.n_valid;
            }
            let mut exact = FieldGrid::like(&grid, 1);
            exact.fill_scalar(|p| prob.exact_u(p).unwrap());
            println!(
                "wos {name}: mean err {:.5} valid {total_valid} in {dt:.1}s",
                mean_error(&field, &exact).unwrap()
            );
        }
    }

    if which == "train2d" || which == "all" {
        for name in ["laplace2d_xy", "poisson2d_xy2"] {
            let prob = PdeProblem::builtin(name).unwrap();
            let starts = uniform_starts(prob.domain(), 40_000, 7);
            let t0 = Instant::now();
            let paths = sample_dataset(&prob, &starts, 1e-3, 20, 7).unwrap();
            let ds = vectorize(&paths).unwrap();
            let t_sample = t0.elapsed().as_secs_f64();
            let mut net = YzNet::init(2, &[32, 64, 128], 7);
            let cfg = TrainConfig {
                learning_rate: 3e-4,
                batch_size: 2048,
                epochs: 50,
                seed: 7,
                shuffle: true,
            };
            let t1 = Instant::now();
            let hist = train(&mut net, &ds, &cfg).unwrap();
            let t_train = t1.elapsed().as_secs_f64();
            let grid = FieldGrid::lattice(prob.domain(), 0.02, 1).unwrap();
            let (u, z) = predict_field(&net, &grid).unwrap();
            let mut exact_u = FieldGrid::like(&grid, 1);
            exact_u.fill_scalar(|p| prob.exact_u(p).unwrap());
            let mut exact_z = FieldGrid::like(&grid, 2);
            exact_z.fill_vector(|p| prob.exact_grad(p).unwrap());
            println!(
                "train {name}: {} paths maxlen {} sample {t_sample:.1}s train {t_train:.1}s loss[0] {:.5} loss[49] {:.5} err_u {:.5} err_z {:.5}",
                ds.n_paths(),
                ds.max_len(),
                hist[0],
                hist[49],
                mean_error(&u, &exact_u).unwrap(),
                mean_error(&z, &exact_z).unwrap(),
            );
        }
    }

    if which == "baseline" || which == "all" {
        for name in ["laplace2d_xy", "poisson2d_xy2"] {
            let prob = PdeProblem::builtin(name).unwrap();
            let grid = FieldGrid::lattice(prob.domain(), 0.02, 1).unwrap();
            let ests =
                wos_grid_estimates(&prob, grid.nodes(), 50, 1e-3, 20, 1234).unwrap();
            let targets: Vec<f64> = ests.iter().map(|e| e.estimate).collect();
            let cfg = TrainConfig {
                learning_rate: 1e-4,
                batch_size: 256,
                epochs: 50,
                seed: 7,
                shuffle: true,
            };
            let t = Instant::now();
            let (net, hist) =
                train_wos_driven(grid.nodes(), &targets, &[32, 64, 128], &cfg).unwrap();
            let dt = t.elapsed().as_secs_f64();
            let u = wosnn::trainer::predict_scalar_field(&net, &grid).unwrap();
            let mut exact = FieldGrid::like(&grid, 1);
            exact.fill_scalar(|p| prob.exact_u(p).unwrap());
            println!(
                "baseline {name}: train {dt:.1}s loss {:.5} err_u {:.5}",
                hist.last().unwrap(),
                mean_error(&u, &exact).unwrap()
            );
        }
    }

    if which == "train3d" || which == "all" {
        let prob = PdeProblem::builtin("poisson3d_x2yz").unwrap();
        let starts = uniform_starts(prob.domain(), 60_000, 7);
        let t0 = Instant::now();
        let paths = sample_dataset(&prob, &starts, 1e-2, 80, 7).unwrap();
        let ds = vectorize(&paths).unwrap();
        let t_sample = t0.elapsed().as_secs_f64();
        let mean_len: f64 =
            ds.lengths().iter().map(|&k| k as f64).sum::<f64>() / ds.n_paths() as f64;
        println!(
            "3d sampled: {} valid, maxlen {}, mean len {mean_len:.1}, {t_sample:.1}s",
            ds.n_paths(),
            ds.max_len()
        );
        let mut net = YzNet::init(3, &[64, 128, 128], 7);
        let cfg = TrainConfig {
            learning_rate: 2e-4,
            batch_size: 1024,
            epochs: 50,
            seed: 7,
            shuffle: true,
        };
        let t1 = Instant::now();
        let hist = train(&mut net, &ds, &cfg).unwrap();
        let t_train = t1.elapsed().as_secs_f64();
        let dom = prob.domain();
        let plane = FieldGrid::lattice_in(
            dom,
            wosnn::Point::new3(-0.5, 0.0, 0.0),
            wosnn::Point::new3(-0.5, 1.0, 1.0),
            0.02,
            1,
        )
        .unwrap();
        let (u, _z) = predict_field(&net, &plane).unwrap();
        let mut exact = FieldGrid::like(&plane, 1);
        exact.fill_scalar(|p| prob.exact_u(p).unwrap());
        println!(
            "train 3d: train {t_train:.1}s loss[0] {:.5} loss[49] {:.5} plane err_u {:.5}",
            hist[0],
            hist[49],
            mean_error(&u, &exact).unwrap()
        );
    }

    if which == "lshape" || which == "all" {
        let prob = PdeProblem::builtin("lshape_indicator").unwrap();
        let starts = uniform_starts(prob.domain(), 40_000, 7);
        let t0 = Instant::now();
        let paths = sample_dataset(&prob, &starts, 1e-3, 20, 7).unwrap();
        let ds = vectorize(&paths).unwrap();
        println!(
            "lshape sampled: {} valid in {:.1}s",
            ds.n_paths(),
            t0.elapsed().as_secs_f64()
        );
        let mut net = YzNet::init(2, &[32, 64, 128], 7);
        let cfg = TrainConfig {
            learning_rate: 3e-4,
            batch_size: 2048,
            epochs: 50,
            seed: 7,
            shuffle: true,
        };
        let t1 = Instant::now();
        let hist = train(&mut net, &ds, &cfg).unwrap();
        let t_train = t1.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let fdm = wosnn::fdm::solve_fdm(&prob, 0.02, 1e-10, 200_000).unwrap();
        let t_fdm = t2.elapsed().as_secs_f64();
        let (u, _z) = predict_field(&net, &fdm).unwrap();
        println!(
            "lshape: train {t_train:.1}s fdm {t_fdm:.1}s loss {:.5} nodes {} mse {:.6e}",
            hist.last().unwrap(),
            fdm.n_nodes(),
            wosnn::fields::mse(&u, &fdm).unwrap()
        );
    }
}
