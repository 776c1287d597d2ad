//! Ranges of per-action proportions consistent with uniform play, for a few
//! sample sizes and both interval methods.

use playbench::analytics::{uniform_ci, CiMethod, Correction};
use playbench::UniformTestConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wald = UniformTestConfig::default();
    let exact = UniformTestConfig { method: CiMethod::ExactBinomial, ..wald };
    let uncorrected = UniformTestConfig { correction: Correction::None, ..wald };
    println!("z for alpha {} over {} actions: {:.5}", wald.alpha, wald.k, wald.z());
    println!("{:>6}  {:>15}  {:>15}  {:>15}", "n", "wald", "exact", "wald, no corr.");
    for n in [50, 200, 1000, 1800, 2000, 20_000] {
        let show = |cfg: &UniformTestConfig| -> Result<String, playbench::analytics::AnalyticsError> {
            let iv = uniform_ci(n, cfg)?;
            Ok(format!("{:.1}% - {:.1}%", iv.low * 100.0, iv.high * 100.0))
        };
        println!("{n:>6}  {:>15}  {:>15}  {:>15}", show(&wald)?, show(&exact)?, show(&uncorrected)?);
    }
    Ok(())
}
