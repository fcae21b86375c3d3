//! CIR paths with exact non-central χ² transitions and their table-driven
//! twins, next to truncated Euler–Maruyama.

use approx_rv::fit::fit_ncchi2;
use approx_rv::mlmc::{simulate_cir_coupled, CirParams, LevelSpec, Payoff, Scheme};
use approx_rv::sampler::UniformStream;

fn mean_var(x: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = x.collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (
        m,
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64,
    )
}

fn main() -> approx_rv::Result<()> {
    let params = CirParams::default();
    let table = fit_ncchi2(params.nu(), 16, 1, 15)?;
    let n = 2000;

    println!("exact transitions vs linear table (mean of X_T, variance of the difference)");
    for level in [1, 3, 5] {
        let spec = LevelSpec::new(level, Scheme::CirExact);
        let mut stream = UniformStream::new(5, level as u64);
        let out =
            simulate_cir_coupled(&params, &spec, Payoff::Identity, &[&table], &mut stream, n)?;
        let (m, _) = mean_var(out.iter().map(|o| o.p_fine));
        let (_, d) = mean_var(out.iter().map(|o| o.p_fine - o.p_approx[0]));
        println!(
            "  {:>3} steps: E[X_T] ~ {m:.4}, V[exact - table] = {d:.3e}",
            spec.n_steps_fine()
        );
    }

    println!("truncated Euler-Maruyama, V[P_l - P_l-1]");
    for level in 1..=6 {
        let spec = LevelSpec::new(level, Scheme::CirEulerTruncated);
        let mut stream = UniformStream::new(5, 100 + level as u64);
        let out = simulate_cir_coupled(&params, &spec, Payoff::Identity, &[], &mut stream, 20_000)?;
        let (_, v) = mean_var(out.iter().map(|o| o.p_fine - o.p_coarse));
        println!("  {:>3} steps: {v:.3e}", spec.n_steps_fine());
    }
    Ok(())
}
