//! Huber smoothing of `max(t, 0)` and its derivatives for a few `eps`.

use smoothot::smoothing::{huber_deps, huber_dt, huber_eval, phi_map};

fn main() {
    let ts: [f64; 9] = [-1.0, -0.1, 0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0];
    for eps in [1.0, 0.1, 0.01] {
        println!("eps = {eps}");
        println!("      t      max(t,0)   h(eps,t)   dh/dt     dh/deps");
        for &t in &ts {
            println!(
                "{t:>7.2}  {:>9.4}  {:>9.5}  {:>8.4}  {:>9.5}",
                t.max(0.0),
                huber_eval(eps, t),
                huber_dt(eps, t).unwrap(),
                huber_deps(eps, t).unwrap()
            );
        }
    }
    // Every nonpositive argument maps to an exact zero.
    let w = [-3.0, 0.0, 0.4, -0.2, 1.5];
    println!("Phi(0.5, {w:?}) = {:?}", phi_map(0.5, &w));
}
