//! Coherent coupling between neighbouring components of the chain.
//!
//! Matrix-element convention, fixed so that the observable population
//! oscillation frequency matches `dressed::oscillation_frequency`:
//! two-state off-diagonal `ħΩ/2` (populations `sin²(Ωt/2)`), three-state
//! chain off-diagonals `ħΩ` on both legs (m=0 oscillating at `2^{3/2}Ω/2π`).
//! Transfer one step down the chain multiplies by `e^{−iκz}`, imparting
//! momentum `ħκ` along gravity.

use num_complex::Complex64;

use crate::phys::Scheme;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingMatrix {
    scheme: Scheme,
    /// Off-diagonal magnitude in rad/s.
    element: f64,
    kick: f64,
}

impl CouplingMatrix {
    /// `omega` in rad/s, `kick` in 1/m (positions passed to [`Self::at`] must
    /// use the matching unit).
    pub fn new(scheme: Scheme, omega: f64, kick: f64) -> Self {
        let element = if scheme.is_three_state() { omega } else { 0.5 * omega };
        Self { scheme, element, kick }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.scheme.n_components()
    }

    /// Off-diagonal magnitude, same unit as the Ω given to [`Self::new`].
    pub fn element(&self) -> f64 {
        self.element
    }

    pub fn kick(&self) -> f64 {
        self.kick
    }

    /// Row-major Hermitian matrix (in units of ħ) at position `z`.
    pub fn at(&self, z: f64) -> Vec<Complex64> {
        let n = self.dim();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        let down = Complex64::from_polar(self.element, -self.kick * z);
        for i in 0..n - 1 {
            m[(i + 1) * n + i] = down;
            m[i * n + i + 1] = down.conj();
        }
        m
    }

    /// `exp(−i C(z) τ)` in closed form, row-major.
    pub fn exponential(&self, z: f64, tau: f64) -> Vec<Complex64> {
        let n = self.dim();
        let c = self.at(z);
        let mut u = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            u[i * n + i] = Complex64::new(1.0, 0.0);
        }
        if self.element == 0.0 {
            return u;
        }
        let i_unit = Complex64::new(0.0, 1.0);
        match n {
            2 => {
                // C² = c² I
                let (s, co) = (self.element * tau).sin_cos();
                for k in 0..4 {
                    u[k] = u[k] * co - i_unit * c[k] * (s / self.element);
                }
            }
            3 => {
                // C³ = 2c² C, eigenvalues 0, ±√2 c
                let w = 2f64.sqrt() * self.element;
                let (s, co) = (w * tau).sin_cos();
                let c2 = matmul(&c, &c, 3);
                for k in 0..9 {
                    u[k] += c2[k] * ((co - 1.0) / (w * w)) - i_unit * c[k] * (s / w);
                }
            }
            _ => unreachable!("coupling chains have two or three components"),
        }
        u
    }
}

pub(crate) fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scaling-and-squaring Taylor series, independent of the closed forms.
    fn expm_taylor(h: &[Complex64], tau: f64, n: usize) -> Vec<Complex64> {
        let squarings = 8;
        let scale = tau / f64::from(1 << squarings);
        let a: Vec<Complex64> = h.iter().map(|&x| x * Complex64::new(0.0, -scale)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        let mut term = out.clone();
        for i in 0..n {
            out[i * n + i] = Complex64::new(1.0, 0.0);
            term[i * n + i] = Complex64::new(1.0, 0.0);
        }
        for k in 1..30 {
            term = matmul(&term, &a, n).into_iter().map(|x| x / k as f64).collect();
            for (o, t) in out.iter_mut().zip(&term) {
                *o += *t;
            }
        }
        for _ in 0..squarings {
            out = matmul(&out, &out, n);
        }
        out
    }

    fn dagger(a: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = a.to_vec();
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = a[j * n + i].conj();
            }
        }
        out
    }

    #[test]
    fn hermitian_and_unitary_everywhere() {
        for scheme in Scheme::ALL {
            let cm = CouplingMatrix::new(scheme, 3.7, 11.3);
            let n = cm.dim();
            for i in 0..50 {
                let z = -20.0 + 0.83 * i as f64;
                let h = cm.at(z);
                let hd = dagger(&h, n);
                for k in 0..n * n {
                    assert!((h[k] - hd[k]).norm() < 1e-15);
                }
                let u = cm.exponential(z, 0.37);
                let uu = matmul(&u, &dagger(&u, n), n);
                for r in 0..n {
                    for c in 0..n {
                        let id = if r == c { 1.0 } else { 0.0 };
                        assert!((uu[r * n + c] - id).norm() < 1e-12);
                    }
                }
                let reference = expm_taylor(&h, 0.37, n);
                for k in 0..n * n {
                    assert!((u[k] - reference[k]).norm() < 1e-12, "{scheme} z={z}");
                }
            }
        }
    }

    #[test]
    fn kick_phases_sit_on_conjugate_pairs() {
        let cm = CouplingMatrix::new(Scheme::RamanThreeState, 1.0, 2.0);
        let h = cm.at(0.5);
        let expected = Complex64::from_polar(1.0, -1.0);
        assert!((h[3] - expected).norm() < 1e-15);
        assert!((h[1] - expected.conj()).norm() < 1e-15);
        assert!((h[7] - expected).norm() < 1e-15);
    }
}
