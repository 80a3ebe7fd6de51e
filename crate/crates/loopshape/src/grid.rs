//! Frequency grid helpers.

/// Logarithmically spaced grid of `n` points over `[lo, hi]` (inclusive),
/// in whatever unit the endpoints carry (rad/s throughout this crate).
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo, "log grid needs 0 < lo < hi");
    assert!(n >= 2, "log grid needs at least two points");
    let (la, lb) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(la + (lb - la) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Log grid with a fixed density in points per decade.
pub fn log_grid_per_decade(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(2);
    log_grid(lo, hi, n + 1)
}
