/// Tolerance bundle threaded through every numerical decision.
///
/// Every report produced by the library echoes the tolerances it used, so a
/// verdict can always be traced back to the thresholds that produced it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Relative residual below which an algebraic identity counts as holding.
    pub residual: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_rel: f64,
    /// Minimum ratio between the last accepted and first rejected singular
    /// value; decisions with a smaller gap are reported as indeterminate.
    pub rank_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-12,
            rank_rel: 1e-9,
            rank_gap: 1e3,
        }
    }
}

impl Tolerances {
    /// Default tolerances with the residual threshold replaced.
    pub fn with_residual(residual: f64) -> Self {
        Tolerances {
            residual,
            ..Self::default()
        }
    }
}
