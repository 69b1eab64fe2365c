//! Configurations shipped inside the binary, runnable by name.

/// Gaussian ℓ₂ sweep: d = 512, m = 100, ‖g‖₂ = 100, per-coordinate spread
/// from 10⁻³ to 10², every ℓ₂ compressor at 2375 ± 25 bits per client,
/// 5 seeds.
pub const FIG3A: &str = include_str!("../configs/dme-fig3a.toml");

pub const BUNDLED: &[(&str, &str)] = &[("dme-fig3a", FIG3A)];

pub fn lookup(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
