//! Measures forward+backward throughput of a 3×3 convolution.
//!
//! ```bash
//! cargo run --release -p jointhdr-autograd --example conv_throughput
//! ```

use std::time::Instant;

use jointhdr_autograd::{ConvGeom, Graph, Tensor};

fn main() {
    for &(b, cin, cout, hw, dil) in &[(4, 6, 16, 128, 1), (4, 16, 16, 128, 1), (4, 16, 16, 128, 2), (4, 32, 32, 64, 1)] {
        let x = Tensor::<f32>::full(&[b, cin, hw, hw], 0.5);
        let w = Tensor::<f32>::full(&[cout, cin, 3, 3], 0.01);
        let reps = 5;
        let start = Instant::now();
        for _ in 0..reps {
            let mut g = Graph::new();
            let xv = g.param(x.clone());
            let wv = g.param(w.clone());
            let y = g.conv2d(xv, wv, None, ConvGeom::same(3, dil)).unwrap();
            let t = g.input(Tensor::zeros(g.shape(y)));
            let l = g.mean_squared_diff(y, t).unwrap();
            let _ = g.backward(l).unwrap();
        }
        let dt = start.elapsed().as_secs_f64() / reps as f64;
        let macs = (b * cin * cout * 9 * hw * hw) as f64 * 3.0;
        println!("{b}×{cin}→{cout} @{hw}² d{dil}: {:.1} ms  {:.1} GMAC/s", dt * 1e3, macs / dt / 1e9);
    }
}
