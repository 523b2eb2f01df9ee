/// Polynomially decaying step `1 / (t + 1)^exponent`.
///
/// Any exponent in `(0.5, 1]` gives a divergent sum with a summable square.
pub fn step_size(t: usize, exponent: f64) -> f64 {
    (t as f64 + 1.0).powf(-exponent)
}
