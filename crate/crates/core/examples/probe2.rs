use wosnn::trainer::{vectorize};
use wosnn::wos::{sample_dataset, uniform_starts};
use wosnn::PdeProblem;

fn main() {
    let prob = PdeProblem::builtin("laplace2d_xy").unwrap();
    let starts = uniform_starts(prob.domain(), 40_000, 7);
    let paths = sample_dataset(&prob, &starts, 1e-3, 20, 7).unwrap();
    let ds = vectorize(&paths).unwrap();

    // Residual of the TRUE fields under the telescoped objective:
    // u(x0) + sum (y_i, x_i)·Δ_i − g(x̄).
    let c = ds.centers();
    let mut loss = 0.0;
    let mut loss_u_only = 0.0; // residual if z were exact and u head measured at x0
    for row in 0..ds.n_paths() {
        let k = ds.lengths()[row] as usize;
        let u0 = c[[row, 0, 0]] * c[[row, 0, 1]];
        let mut acc = u0;
        for i in 0..k {
            let (x, y) = (c[[row, i, 0]], c[[row, i, 1]]);
            let dx = c[[row, i + 1, 0]] - x;
            let dy = c[[row, i + 1, 1]] - y;
            acc += y * dx + x * dy;
        }
        let r = acc - ds.targets()[row];
        loss += r * r;
        let rk = c[[row, k, 0]] * c[[row, k, 1]] - ds.targets()[row];
        loss_u_only += rk * rk;
    }
    println!(
        "oracle telescoped loss = {:.6}  (shell-gap-only loss = {:.6}) over {} paths",
        loss / ds.n_paths() as f64,
        loss_u_only / ds.n_paths() as f64,
        ds.n_paths()
    );

    // Target second moment and variance of targets for scale.
    let m2: f64 = ds.targets().iter().map(|t| t * t).sum::<f64>() / ds.n_paths() as f64;
    println!("target second moment = {m2:.5}");
}
