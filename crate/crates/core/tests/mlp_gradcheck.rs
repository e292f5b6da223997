use std::time::Instant;

use mibids_core::mlp::Mlp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn loss(net: &Mlp, x: &[f64], t: &[f64]) -> f64 {
    let o = net.forward(x).unwrap();
    o.iter().zip(t).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut components = 0;
    for net_no in 0..25 {
        let (i, h, o) = (rng.random_range(1..6), rng.random_range(1..7), rng.random_range(2..5));
        let mut vec = |n: usize| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        let net = Mlp::from_parts(i, h, o, vec(h * i), vec(h), vec(o * h), vec(o)).unwrap();
        let x: Vec<f64> = (0..i).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hot = rng.random_range(0..o);
        let t: Vec<f64> = (0..o).map(|k| if k == hot { 1.0 } else { 0.0 }).collect();

        let analytic: Vec<f64> = net.gradient(&x, &t).unwrap().iter().copied().collect();
        assert_eq!(analytic.len(), net.params().count());
        for (p, &a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(p).unwrap() += STEP;
            let mut minus = net.clone();
            *minus.params_mut().nth(p).unwrap() -= STEP;
            let numeric = (loss(&plus, &x, &t) - loss(&minus, &x, &t)) / (2.0 * STEP);
            let scale = a.abs().max(numeric.abs());
            if scale < 1e-8 {
                assert!((a - numeric).abs() < 1e-10, "net {net_no} param {p}: {a} vs {numeric}");
            } else {
                let rel = (a - numeric).abs() / scale;
                assert!(rel < 1e-4, "net {net_no} param {p}: {a} vs {numeric} (rel {rel:e})");
            }
            components += 1;
        }
    }
    assert!(components > 100);
    assert!(start.elapsed().as_secs_f64() < 10.0);
}
