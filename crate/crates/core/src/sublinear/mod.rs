//! Sublinear second-order operators represented as maxima of finitely many
//! linear generators, and the geometry of `R^N x Sym^N` they live on.

mod checks;
mod generator;
mod pair;
mod sqrt;
mod support;

pub use checks::{
    check_ellipticity, check_sublinearity, pair_from, psd_from, EllipticitySample,
    SublinearitySample, ALGEBRAIC_TOL,
};
pub use generator::{
    argmax, evaluate_f, Diffusion, Drift, Evaluation, GeneratorSet, LinearGenerator, MatrixField,
    TieBreak, VectorField,
};
pub use pair::{inner_ps, PairPS};
pub use sqrt::{
    frobenius_dot, max_eigenvalue, min_eigenvalue, psd_sqrt, spectral_norm, symmetrize,
    PSD_TOLERANCE,
};
pub use support::{hausdorff_support, SphereDirections, DEFAULT_DIRECTIONS};

/// Lipschitz constant of the square-root map on matrices with eigenvalues at
/// least `2 lambda`.
pub fn sqrt_lipschitz_constant(lambda: f64) -> f64 {
    1.0 / (2.0 * lambda.sqrt())
}
