//! The two-point upwind flux `A(U, V) = V Q_+(U, V) - U Q_-(U, V)` with
//! `Q(U, V) = (p(V) - p(U)) / dx`, together with its partial derivatives.

use crate::error::{Error, Result};
use crate::law::PressureLaw;

/// Flux value and partial derivatives with respect to the left (`U`) and
/// right (`V`) densities. `partial_1 <= 0 <= partial_2` always.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluxPair {
    pub value: f64,
    pub partial_1: f64,
    pub partial_2: f64,
}

/// Flux from precomputed pressures `pu = p(U)`, `pv = p(V)` and pressure
/// derivatives `dpu = p'(U)`, `dpv = p'(V)`.
///
/// On a tie (`Q = 0`) the flux is 0. Both one-sided derivatives agree
/// there when `U = V`, so the partials use the mean density as the
/// donor; this keeps the diffusive coupling on flat plateaus.
#[inline]
pub fn flux_from_pressures(u: f64, v: f64, pu: f64, pv: f64, dpu: f64, dpv: f64, dx: f64) -> FluxPair {
    let q = (pv - pu) / dx;
    if q > 0.0 {
        FluxPair {
            value: v * q,
            partial_1: -v * dpu / dx,
            partial_2: q + v * dpv / dx,
        }
    } else if q < 0.0 {
        FluxPair {
            value: u * q,
            partial_1: q - u * dpu / dx,
            partial_2: u * dpv / dx,
        }
    } else {
        let w = 0.5 * (u + v);
        FluxPair {
            value: 0.0,
            partial_1: -w * dpu / dx,
            partial_2: w * dpv / dx,
        }
    }
}

/// `A(U, V)` and its partials for densities `U, V >= 0`.
pub fn flux_a(u: f64, v: f64, law: &PressureLaw, dx: f64) -> Result<FluxPair> {
    for (index, value) in [(0, u), (1, v)] {
        if value < 0.0 || !value.is_finite() {
            return Err(Error::Domain {
                index,
                value,
                what: "flux arguments must be nonnegative",
            });
        }
    }
    Ok(flux_from_pressures(
        u,
        v,
        law.pressure(u),
        law.pressure(v),
        law.dpressure(u),
        law.dpressure(v),
        dx,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let law = PressureLaw::power(2.0).unwrap();
        let tie = flux_a(0.4, 0.4, &law, 0.1).unwrap();
        assert_eq!(tie.value, 0.0);
        assert!((tie.partial_1 + 3.2).abs() < 1e-12 && (tie.partial_2 - 3.2).abs() < 1e-12);
        assert_eq!(flux_a(0.0, 0.0, &law, 0.1).unwrap(), FluxPair::default());
        assert_eq!(flux_a(0.0, 1.0, &law, 1.0).unwrap().value, 1.0);
        assert_eq!(flux_a(1.0, 0.0, &law, 1.0).unwrap().value, -1.0);
        assert!(flux_a(-0.1, 0.0, &law, 1.0).is_err());
    }

    // Central finite differences away from the tie set.
    proptest! {
        #[test]
        fn tie_partials_match_finite_differences(u in 0.05f64..1.5, gamma in 1.2f64..6.0, dx in 0.05f64..1.0) {
            let law = PressureLaw::power(gamma).unwrap();
            let h = 1e-6;
            let f = |a: f64, b: f64| flux_a(a, b, &law, dx).unwrap().value;
            let exact = flux_a(u, u, &law, dx).unwrap();
            let d1 = (f(u + h, u) - f(u - h, u)) / (2.0 * h);
            let d2 = (f(u, u + h) - f(u, u - h)) / (2.0 * h);
            let scale = 1.0 + exact.partial_1.abs();
            prop_assert!((d1 - exact.partial_1).abs() < 1e-5 * scale);
            prop_assert!((d2 - exact.partial_2).abs() < 1e-5 * scale);
        }

        #[test]
        fn partials_match_finite_differences(
            u in 0.05f64..1.5,
            v in 0.05f64..1.5,
            gamma in 1.2f64..6.0,
            dx in 0.05f64..1.0,
        ) {
            let law = PressureLaw::power(gamma).unwrap();
            prop_assume!((law.pressure(u) - law.pressure(v)).abs() > 1e-3);
            let h = 1e-6;
            let f = |a: f64, b: f64| flux_a(a, b, &law, dx).unwrap().value;
            let exact = flux_a(u, v, &law, dx).unwrap();
            let d1 = (f(u + h, v) - f(u - h, v)) / (2.0 * h);
            let d2 = (f(u, v + h) - f(u, v - h)) / (2.0 * h);
            let scale = 1.0 + exact.partial_1.abs() + exact.partial_2.abs();
            prop_assert!((d1 - exact.partial_1).abs() < 1e-5 * scale, "{} vs {}", d1, exact.partial_1);
            prop_assert!((d2 - exact.partial_2).abs() < 1e-5 * scale, "{} vs {}", d2, exact.partial_2);
            prop_assert!(exact.partial_1 <= 0.0 && exact.partial_2 >= 0.0);
        }
    }
}
