//! Probability that a shifted residual outranks a clean one.
//!
//! For independent standard normals `e` and `e'`, `P(|e| < |e' + a|)` is one
//! half at `a = 0` and climbs towards one as the shift grows, which is why
//! even the plain residual score ranks corrupted rows higher on average.

use veracity::simbench::corollary1_probability;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>5} {:>9} {:>9}", "a", "P", "MC s.e.");
    for (i, a) in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        let e = corollary1_probability(a, 1_000_000, 100 + i as u64)?;
        println!("{:>5.1} {:>9.4} {:>9.5}", a, e.estimate, e.std_error);
    }
    Ok(())
}
