//! Reference 2×2 density-matrix arithmetic.
//!
//! The simulation works on Bloch vectors. This module repeats the same
//! operations with explicit complex matrices (`M ρ M†`, `U ρ U†`, traces) and
//! serves as an independent check of the closed-form Bloch maps.

use std::ops::Mul;

use num_complex::Complex64;

use crate::state::QubitState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Self::diag(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn diag(a: Complex64, b: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Mat2([[a, zero], [zero, b]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    /// `self · rho · self†`
    pub fn sandwich(&self, rho: &Mat2) -> Mat2 {
        *self * *rho * self.dagger()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

/// `ρ = (1 + x σx + y σy + z σz) / 2`
pub fn density_matrix(state: &QubitState) -> Mat2 {
    let QubitState { x, y, z } = *state;
    Mat2([
        [Complex64::new((1.0 + z) / 2.0, 0.0), Complex64::new(x / 2.0, -y / 2.0)],
        [Complex64::new(x / 2.0, y / 2.0), Complex64::new((1.0 - z) / 2.0, 0.0)],
    ])
}

/// Bloch vector of `rho / tr(rho)`.
pub fn bloch(rho: &Mat2) -> QubitState {
    let tr = rho.trace().re;
    let m = &rho.0;
    QubitState {
        x: 2.0 * m[0][1].re / tr,
        y: -2.0 * m[0][1].im / tr,
        z: (m[0][0].re - m[1][1].re) / tr,
    }
}

/// Gaussian POVM element `(a/2π)^{1/4} exp[-(a/4)(r - σz)²]` with `a = dt·strength`.
pub fn povm_operator(r: f64, strength: f64, dt: f64) -> Mat2 {
    let a = dt * strength;
    let norm = (a / (2.0 * std::f64::consts::PI)).powf(0.25);
    let up = norm * (-a / 4.0 * (r - 1.0).powi(2)).exp();
    let down = norm * (-a / 4.0 * (r + 1.0).powi(2)).exp();
    Mat2::diag(Complex64::new(up, 0.0), Complex64::new(down, 0.0))
}

/// `exp(-i θ σy / 2)`
pub fn rotation_y(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    Mat2([
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ])
}

/// `exp(-i θ σz / 2)`
pub fn rotation_z(theta: f64) -> Mat2 {
    Mat2::diag(
        Complex64::from_polar(1.0, -theta / 2.0),
        Complex64::from_polar(1.0, theta / 2.0),
    )
}

pub fn measure(state: &QubitState, r: f64, strength: f64, dt: f64) -> QubitState {
    bloch(&povm_operator(r, strength, dt).sandwich(&density_matrix(state)))
}

/// `tr(M_r ρ M_r†)`
pub fn readout_density(state: &QubitState, r: f64, strength: f64, dt: f64) -> f64 {
    povm_operator(r, strength, dt)
        .sandwich(&density_matrix(state))
        .trace()
        .re
}

pub fn rotate_y(state: &QubitState, theta: f64) -> QubitState {
    bloch(&rotation_y(theta).sandwich(&density_matrix(state)))
}

pub fn rotate_z(state: &QubitState, theta: f64) -> QubitState {
    bloch(&rotation_z(theta).sandwich(&density_matrix(state)))
}

/// Scale off-diagonal elements by `factor`.
pub fn dephase(state: &QubitState, factor: f64) -> QubitState {
    let mut rho = density_matrix(state);
    rho.0[0][1] *= factor;
    rho.0[1][0] *= factor;
    bloch(&rho)
}

/// Trace of `M_{-r} M_r ρ M_r† M_{-r}†` for the given state.
pub fn undo_weight(state: &QubitState, r: f64, strength: f64, dt: f64) -> f64 {
    let forward = povm_operator(r, strength, dt);
    let backward = povm_operator(-r, strength, dt);
    (backward * forward)
        .sandwich(&density_matrix(state))
        .trace()
        .re
}

/// `ln P(r_k|ρ_k) − ln P(−r_k|ρ_{k+1})` from matrix traces.
pub fn arrow_increment(pre: &QubitState, r: f64, strength: f64, dt: f64) -> f64 {
    let post = measure(pre, r, strength, dt);
    readout_density(pre, r, strength, dt).ln() - readout_density(&post, -r, strength, dt).ln()
}
