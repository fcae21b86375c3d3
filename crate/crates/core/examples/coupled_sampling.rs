//! Exact and approximate Gaussians driven by the same uniform, and the
//! level statistics they produce in a GBM simulation.

use approx_rv::fit::fit_gaussian_dyadic;
use approx_rv::mlmc::{
    default_cost_ratio, estimate_level, GaussianSource, GbmParams, LevelSpec, Payoff, Scheme,
    StatKind,
};
use approx_rv::sampler::{sample_coupled, GaussianSampler, UniformStream};

fn main() -> approx_rv::Result<()> {
    let table = fit_gaussian_dyadic(1, 15, 0.5)?;
    let mut stream = UniformStream::new(2024, 0);
    let pairs = sample_coupled(&mut stream, &table, 100_000);
    let msd = pairs
        .iter()
        .map(|p| (p.z_exact - p.z_approx).powi(2))
        .sum::<f64>()
        / pairs.len() as f64;
    println!("E[(Z - Z~)^2] ~ {msd:.3e} over {} pairs", pairs.len());

    // The same seed and stream id always replay the same uniforms.
    let again = sample_coupled(&mut UniformStream::new(2024, 0), &table, 3);
    assert_eq!(again[..], pairs[..3]);

    let sampler = GaussianSampler::Dyadic(table);
    let source = GaussianSource {
        label: "linear".into(),
        cost_ratio: default_cost_ratio(&sampler),
        sampler,
    };
    let params = GbmParams::default();
    for level in [2, 5] {
        let spec = LevelSpec::new(level, Scheme::EulerMaruyama);
        let est = estimate_level(
            &params,
            &spec,
            Payoff::Identity,
            std::slice::from_ref(&source),
            20_000,
            1,
            4096,
        )?;
        let two = est.get(StatKind::TwoWay, "exact").unwrap().variance;
        let four = est.get(StatKind::FourWay, "linear").unwrap().variance;
        println!(
            "level {level}: V[two-way] {two:.3e}, V[four-way] {four:.3e}, log2 ratio {:.1}",
            (four / two).log2()
        );
    }
    Ok(())
}
