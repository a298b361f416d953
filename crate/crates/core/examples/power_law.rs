//! Intensity augmentation `s = c · r^γ` with rational exponents.

use celldet::augment::{power_law, to_grayscale, Gamma, PowerLawParams};
use celldet::raster::ImageBuffer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ramp = ImageBuffer::from_fn(9, 1, 1, |x, _, _| f64::from(x) / 8.0)?;
    println!("{:>6}  {}", "r", ramp.data().iter().map(|v| format!("{v:>6.3}")).collect::<String>());
    for g in Gamma::default_schedule() {
        let out = power_law(&ramp, PowerLawParams::unit(g))?;
        println!("{:>6}  {}", g.to_string(), out.data().iter().map(|v| format!("{v:>6.3}")).collect::<String>());
    }

    // two passes fold into one: c = c2 · c1^γ2, γ = γ1 · γ2
    let (g1, g2) = (Gamma::new(3, 4)?, Gamma::new(4, 3)?);
    let twice = power_law(&power_law(&ramp, PowerLawParams::new(0.9, g1)?)?, PowerLawParams::new(0.8, g2)?)?;
    let once = power_law(&ramp, PowerLawParams::new(0.8 * 0.9f64.powf(g2.value()), Gamma::new(12, 12)?)?)?;
    let err = twice.data().iter().zip(once.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("composition error {err:.1e}");

    let rgb = ImageBuffer::new(1, 1, 3, vec![0.9, 0.2, 0.4])?;
    println!("luma of (0.9, 0.2, 0.4) = {:.4}", to_grayscale(&rgb).data()[0]);
    Ok(())
}
