use hyperad::adiabatic::{solve_at_r, BasisMeta, EnergyWindow};
use hyperad::galerkin::EigenOptions;
use hyperad::model::{PairPotential, Parity, SystemParams};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let r: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10.0);
    let sizes: Vec<usize> = args[2..].iter().map(|s| s.parse().unwrap()).collect();
    let potential = PairPotential::morse(100.0, 1.0).unwrap();
    let params = SystemParams::from_mass_ratio(1.3, Parity::Even).unwrap();
    let e_b = 181.65;
    let window = EnergyWindow::new(-e_b, 30.0);
    let ceiling = window.top() + 2.0;
    let opts = EigenOptions { parallel_slices: true, ..Default::default() };
    let mut prev: Option<Vec<f64>> = None;
    for &n in &sizes {
        let meta = BasisMeta::new(n, n);
        let t0 = Instant::now();
        let sol = solve_at_r(r, &potential, &params, &meta, ceiling, &opts).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let inw: Vec<f64> = sol.values.iter().copied().filter(|&v| window.contains(v)).collect();
        let spacing = window.width() / inw.len() as f64;
        print!("n = {n}: {} in window, mean spacing {spacing:.4}, {dt:.0} s", inw.len());
        if let Some(p) = &prev {
            let m = p.len().min(inw.len());
            let max_move = p[..m]
                .iter()
                .zip(&inw[..m])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            print!(
                ", count change {:+}, max move {max_move:.2e} = {:.2}% of spacing",
                inw.len() as isize - p.len() as isize,
                100.0 * max_move / spacing
            );
        }
        println!();
        prev = Some(inw);
    }
}
