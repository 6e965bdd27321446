use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Field;

/// Pressure law `p = kappa * n^gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PressureLaw {
    pub gamma: f64,
    pub kappa: f64,
}

impl PressureLaw {
    pub fn new(gamma: f64, kappa: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be > 1, got {gamma}")));
        }
        Self::checked(gamma, kappa)
    }

    /// `p = n^gamma`.
    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0)
    }

    /// The linear law `p = kappa * n`. Only the Aronson-Benilan monitor runs
    /// accept it; the schemes themselves are built for `gamma > 1`.
    pub fn linear(kappa: f64) -> Result<Self> {
        Self::checked(1.0, kappa)
    }

    /// `p = ((gamma + 1) / gamma) n^gamma`, which turns the model into
    /// `dn/dt = d^2(n^(gamma+1))/dx^2` when growth vanishes.
    pub fn porous_medium(gamma: f64) -> Result<Self> {
        Self::new(gamma, (gamma + 1.0) / gamma)
    }

    fn checked(gamma: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidArgument(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(Self { gamma, kappa })
    }

    #[inline]
    pub fn pressure(&self, n: f64) -> f64 {
        self.kappa * n.powf(self.gamma)
    }

    /// `dp/dn` at `n >= 0`.
    #[inline]
    pub fn dpressure(&self, n: f64) -> f64 {
        if n <= 0.0 {
            if self.gamma == 1.0 {
                self.kappa
            } else {
                0.0
            }
        } else {
            self.kappa * self.gamma * n.powf(self.gamma - 1.0)
        }
    }

    /// `p'(n)` given `p = p(n)`, without another power evaluation.
    #[inline]
    pub fn dpressure_given(&self, n: f64, p: f64) -> f64 {
        if n > 0.0 {
            self.gamma * p / n
        } else {
            self.dpressure(n)
        }
    }

    /// Density at which the pressure reaches `p`.
    pub fn density_at(&self, p: f64) -> f64 {
        (p.max(0.0) / self.kappa).powf(1.0 / self.gamma)
    }
}

/// Elementwise `p_i = kappa * n_i^gamma`; rejects negative densities.
pub fn pressure_from_density(n: &[f64], law: &PressureLaw) -> Result<Field> {
    let mut out = Vec::with_capacity(n.len());
    for (index, &v) in n.iter().enumerate() {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::Domain {
                index,
                value: v,
                what: "density must be finite and nonnegative",
            });
        }
        out.push(law.pressure(v));
    }
    Ok(Field::from(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pressure_examples() {
        let law = PressureLaw::power(3.0).unwrap();
        assert_eq!(pressure_from_density(&[0.0], &law).unwrap()[0], 0.0);
        assert_eq!(pressure_from_density(&[1.0], &law).unwrap()[0], 1.0);
        let law = PressureLaw::new(3.0, 4.0 / 3.0).unwrap();
        let p = pressure_from_density(&[0.5], &law).unwrap()[0];
        assert!((p - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn negative_density_names_index() {
        let law = PressureLaw::power(2.0).unwrap();
        match pressure_from_density(&[0.1, 0.2, -1e-3], &law) {
            Err(Error::Domain { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn law_validation() {
        assert!(PressureLaw::new(1.0, 1.0).is_err());
        assert!(PressureLaw::new(2.0, 0.0).is_err());
        assert!(PressureLaw::linear(1.0).is_ok());
        let law = PressureLaw::porous_medium(3.0).unwrap();
        assert!((law.kappa - 4.0 / 3.0).abs() < 1e-15);
        assert!((law.density_at(law.pressure(0.7)) - 0.7).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn pressure_is_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0, gamma in 1.01f64..90.0) {
            let law = PressureLaw::power(gamma).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let p = pressure_from_density(&[lo, hi], &law).unwrap();
            prop_assert!(p[0] <= p[1]);
            prop_assert!(p[0] >= 0.0);
        }

        #[test]
        fn derivative_from_pressure(n in 0.0f64..2.0, gamma in 1.01f64..90.0) {
            let law = PressureLaw::power(gamma).unwrap();
            let direct = law.dpressure(n);
            let given = law.dpressure_given(n, law.pressure(n));
            prop_assert!((direct - given).abs() <= 1e-12 * direct.abs().max(1e-300));
        }
    }
}
