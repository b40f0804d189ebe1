/// Numerical tolerances. Every checked operation has a `_with` variant that
/// takes an explicit set; the plain variant uses [`Tol::default`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tol {
    pub sym: f64,
    pub det: f64,
    pub spectral: f64,
    pub energy: f64,
    pub rank: f64,
    pub frame: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            sym: 1e-9,
            det: 1e-9,
            spectral: 1e-9,
            energy: 1e-10,
            rank: 1e-8,
            frame: 1e-9,
        }
    }
}

/// Continuity tolerance for a jump across a shared edge, scaled by the size
/// of the affine data involved.
pub fn tau_cont(grad_norm: f64, diam: f64) -> f64 {
    1e-9 * (1.0 + grad_norm * diam)
}
