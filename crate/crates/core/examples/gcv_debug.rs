// scratch: margin analysis for sine selection
use eqdisc_core::preprocess::{select_method, DerivMethod};

fn main() {
    let n = 600;
    let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let w = 2.0 * std::f64::consts::PI;
    let sine: Vec<f64> = t.iter().map(|&x| (w * x).sin()).collect();
    for sigma in [0.01f64, 0.02] {
        println!("== sigma {sigma}");
        for seed in 0..20u64 {
            let mut rng = eqdisc_core::util::rng::stream(seed, eqdisc_core::util::rng::Stream::Noise, 1);
            let y: Vec<f64> = sine.iter().map(|&v| v + sigma * eqdisc_core::util::rng::normal(&mut rng)).collect();
            let sel = select_method(&t, &y).unwrap();
            let label = match sel.method { DerivMethod::Spline{..} => "SP", DerivMethod::Tv{beta,..} => {
                println!("  seed {seed}: TV beta={beta:.2e} mae=({:.5},{:.5}) margin {:+.1}%", sel.mae.0, sel.mae.1, 100.0*(sel.mae.1-sel.mae.0)/sel.mae.0);
                continue;
            }};
            let _ = label;
        }
    }
}
