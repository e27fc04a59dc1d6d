/// Minimizer of `V κ f³ − a f / L` over `0 ≤ f ≤ f_max`:
/// `f* = min{√(a / (3VκL)), f_max}`.
///
/// With `V = 0` the objective is linear, so any positive weight drives the
/// CPU to `f_max` and a zero weight leaves it idle.
pub fn local_cpu_frequency(
    ue_weight: f64,
    v: f64,
    cpu_power_coeff: f64,
    processing_density: f64,
    max_freq: f64,
) -> f64 {
    if ue_weight <= 0.0 {
        0.0
    } else if v <= 0.0 {
        max_freq
    } else {
        (ue_weight / (3.0 * v * cpu_power_coeff * processing_density))
            .sqrt()
            .min(max_freq)
    }
}

/// `V κ f³ − a f / L`.
pub fn local_objective(
    freq: f64,
    ue_weight: f64,
    v: f64,
    cpu_power_coeff: f64,
    processing_density: f64,
) -> f64 {
    v * cpu_power_coeff * freq.powi(3) - ue_weight * freq / processing_density
}
