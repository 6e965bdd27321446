//! Closed-form reference solutions and front-radius ODEs.

use crate::error::{Error, Result};

/// Time shift used by the delayed Barenblatt benchmark.
pub const BARENBLATT_T0: f64 = 0.01;

/// Default step of the front ODE integrator.
pub const FRONT_STEP: f64 = 1e-4;

/// Barenblatt profile of `dn/dt = d^2(n^(gamma+1))/dx^2` at (absolute,
/// already shifted) time `s > 0`:
/// `n = s^-b (C - b gamma / (2 (gamma+1)) x^2 / s^(2b))_+^(1/gamma)`, `b = 1/(gamma+2)`.
pub fn barenblatt(x: f64, s: f64, gamma: f64, c: f64) -> f64 {
    let beta = 1.0 / (gamma + 2.0);
    let arg = c - beta * gamma / (2.0 * (gamma + 1.0)) * x * x / s.powf(2.0 * beta);
    if arg <= 0.0 {
        0.0
    } else {
        s.powf(-beta) * arg.powf(1.0 / gamma)
    }
}

/// Barenblatt profile at simulation time `t`, i.e. shifted by `t0`.
pub fn barenblatt_delayed(x: f64, t: f64, gamma: f64, c: f64, t0: f64) -> f64 {
    barenblatt(x, t + t0, gamma, c)
}

/// Support half-width of the Barenblatt profile at absolute time `s`.
pub fn barenblatt_radius(s: f64, gamma: f64, c: f64) -> f64 {
    let beta = 1.0 / (gamma + 2.0);
    (c * 2.0 * (gamma + 1.0) / (beta * gamma)).sqrt() * s.powf(beta)
}

/// Front radius `R(t)` sampled on a uniform time grid, with the ODE
/// right-hand side kept for Hermite interpolation between samples.
#[derive(Clone, Debug)]
pub struct FrontRadius {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    speeds: Vec<f64>,
}

impl FrontRadius {
    /// `R(t)` by cubic Hermite interpolation, clamped to the sampled range.
    pub fn at(&self, t: f64) -> f64 {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.radii[0];
        }
        if t >= self.times[last] {
            return self.radii[last];
        }
        let k = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(last - 1);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.radii[k] + h10 * h * self.speeds[k] + h01 * self.radii[k + 1] + h11 * h * self.speeds[k + 1]
    }

    pub fn final_radius(&self) -> f64 {
        *self.radii.last().expect("front has at least one sample")
    }
}

/// Integrates `R' = f(R)` from `r0` over `[0, t_end]` with classical RK4 at
/// step at most `h` (the last step is shortened to land on `t_end`).
pub fn integrate_front(f: impl Fn(f64) -> f64, r0: f64, t_end: f64, h: f64) -> Result<FrontRadius> {
    if !(r0 > 0.0) || !(t_end >= 0.0) || !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "front integration needs R0 > 0, t_end >= 0, h > 0 (got {r0}, {t_end}, {h})"
        )));
    }
    let steps = crate::implicit1d::step_count(0.0, t_end, h);
    let mut times = Vec::with_capacity(steps + 1);
    let mut radii = Vec::with_capacity(steps + 1);
    let mut speeds = Vec::with_capacity(steps + 1);
    let mut r = r0;
    times.push(0.0);
    radii.push(r);
    speeds.push(f(r));
    for k in 1..=steps {
        let t_prev = *times.last().unwrap();
        let t = if k == steps { t_end } else { k as f64 * h };
        let dt = t - t_prev;
        let k1 = f(r);
        let k2 = f(r + 0.5 * dt * k1);
        let k3 = f(r + 0.5 * dt * k2);
        let k4 = f(r + dt * k3);
        r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        times.push(t);
        radii.push(r);
        speeds.push(f(r));
    }
    Ok(FrontRadius { times, radii, speeds })
}

/// In vitro front: `R' = c_B tanh R`.
pub fn integrate_front_vitro(r0: f64, c_b: f64, t_end: f64) -> Result<FrontRadius> {
    integrate_front_vitro_with_step(r0, c_b, t_end, FRONT_STEP)
}

pub fn integrate_front_vitro_with_step(r0: f64, c_b: f64, t_end: f64, h: f64) -> Result<FrontRadius> {
    integrate_front(|r| c_b * r.tanh(), r0, t_end, h)
}

/// In vivo front: `R' = c_B G0 sinh(R) / e^R`.
pub fn integrate_front_vivo(r0: f64, c_b: f64, g0: f64, t_end: f64) -> Result<FrontRadius> {
    integrate_front_vivo_with_step(r0, c_b, g0, t_end, FRONT_STEP)
}

pub fn integrate_front_vivo_with_step(r0: f64, c_b: f64, g0: f64, t_end: f64, h: f64) -> Result<FrontRadius> {
    // sinh(R) e^-R = (1 - e^-2R) / 2 avoids overflow for large R
    integrate_front(|r| c_b * g0 * 0.5 * (1.0 - (-2.0 * r).exp()), r0, t_end, h)
}

/// Limit nutrient and pressure of the in vitro model for a tumor `[-R, R]`.
pub fn vitro_exact(x: f64, r: f64, c_b: f64) -> (f64, f64) {
    if x.abs() <= r {
        let c = c_b * x.cosh() / r.cosh();
        (c, c_b - c)
    } else {
        (c_b, 0.0)
    }
}

/// Limit nutrient and pressure of the in vivo model for a tumor `[-R, R]`.
pub fn vivo_exact(x: f64, r: f64, c_b: f64, g0: f64) -> (f64, f64) {
    let e_r = r.exp();
    if x.abs() <= r {
        let c = c_b / e_r * x.cosh();
        let p = c_b * g0 / e_r * (r.cosh() - x.cosh());
        (c, p)
    } else {
        (c_b - c_b * r.sinh() * (-x.abs()).exp(), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barenblatt_examples() {
        assert_eq!(barenblatt(0.0, 1.0, 3.0, 1.0), 1.0);
        let s = 0.05;
        let edge = barenblatt_radius(s, 3.0, 1.0);
        assert_eq!(barenblatt(edge * 1.0001, s, 3.0, 1.0), 0.0);
        assert!(barenblatt(edge * 0.999, s, 3.0, 1.0) > 0.0);
        assert_eq!(barenblatt(0.3, s, 3.0, 1.0), barenblatt(-0.3, s, 3.0, 1.0));
    }

    #[test]
    fn barenblatt_mass_is_invariant() {
        let mass = |s: f64| {
            let (a, m) = (-5.0, 200_000);
            let h = 10.0 / m as f64;
            let mut sum = 0.0;
            for i in 0..=m {
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                sum += w * barenblatt(a + i as f64 * h, s, 3.0, 1.0);
            }
            sum * h
        };
        let (m1, m2) = (mass(0.01 + BARENBLATT_T0), mass(0.1 + BARENBLATT_T0));
        assert!((m1 - m2).abs() < 1e-6 * m1, "{m1} {m2}");
    }

    #[test]
    fn front_without_source_is_constant() {
        let f = integrate_front_vitro(1.3, 0.0, 1.0).unwrap();
        assert!(f.radii.iter().all(|&r| r == 1.3));
        let f = integrate_front_vivo(1.3, 1.0, 0.0, 1.0).unwrap();
        assert!(f.radii.iter().all(|&r| r == 1.3));
    }

    #[test]
    fn fronts_increase_and_saturate() {
        let f = integrate_front_vitro(6.0, 1.0, 2.0).unwrap();
        assert!(f.radii.windows(2).all(|w| w[1] > w[0]));
        assert!(((f.final_radius() - 6.0) - 2.0).abs() < 0.01 * 2.0);
        let v = integrate_front_vivo(7.0, 1.0, 1.0, 2.0).unwrap();
        assert!(v.radii.windows(2).all(|w| w[1] > w[0]));
        let slope = (v.final_radius() - 7.0) / 2.0;
        assert!((slope - 0.5).abs() < 0.005, "{slope}");
        let speed0 = 1f64.sinh() / std::f64::consts::E;
        assert!((speed0 - 0.43233).abs() < 1e-5);
    }

    #[test]
    fn step_halving_and_richardson_order() {
        for vivo in [false, true] {
            let run = |h: f64| {
                if vivo {
                    integrate_front_vivo_with_step(1.0, 1.0, 1.0, 1.5, h).unwrap().final_radius()
                } else {
                    integrate_front_vitro_with_step(1.0, 1.0, 1.5, h).unwrap().final_radius()
                }
            };
            assert!((run(FRONT_STEP) - run(FRONT_STEP / 2.0)).abs() < 1e-8);
            let (a, b, c) = (run(0.1), run(0.05), run(0.025));
            let order = ((a - b) / (b - c)).log2();
            assert!((order - 4.0).abs() < 0.3, "order {order}");
        }
    }

    #[test]
    fn hermite_interpolation_matches_fine_samples() {
        let coarse = integrate_front_vitro_with_step(1.0, 1.0, 1.0, 0.01).unwrap();
        let fine = integrate_front_vitro_with_step(1.0, 1.0, 1.0, 1e-4).unwrap();
        for t in [0.0031, 0.5, 0.777] {
            assert!((coarse.at(t) - fine.at(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_profiles() {
        let (c, p) = vitro_exact(0.0, 1.0, 1.0);
        assert!((c - 0.64805).abs() < 1e-5 && (p - 0.35195).abs() < 1e-5);
        assert_eq!(vitro_exact(1.0, 1.0, 1.0).1, 0.0);
        assert!((vitro_exact(1.0, 1.0, 1.0).0 - 1.0).abs() < 1e-15);
        assert_eq!(vitro_exact(0.4, 1.0, 2.0), vitro_exact(-0.4, 1.0, 2.0));
        let (_, p) = vivo_exact(0.0, 1.0, 1.0, 1.0);
        assert!((p - 0.199788).abs() < 1e-6, "{p}");
        let r: f64 = 1.7;
        let inside = vivo_exact(r, r, 1.0, 1.0).0;
        let outside = vivo_exact(r + 1e-12, r, 1.0, 1.0).0;
        assert!((inside - outside).abs() < 1e-10);
        for i in 0..=20 {
            let x = -r + i as f64 * r / 10.0;
            assert!(vivo_exact(x, r, 1.0, 1.0).1 >= -1e-15);
        }
        assert!((vivo_exact(40.0, r, 1.0, 1.0).0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vitro_profile_solves_its_discrete_equation() {
        // -c'' + c = 0 inside the tumor
        let res = |dx: f64| {
            let mut worst: f64 = 0.0;
            let mut x = -0.9;
            while x < 0.9 {
                let c = |y: f64| vitro_exact(y, 1.0, 1.0).0;
                let d2 = (c(x + dx) - 2.0 * c(x) + c(x - dx)) / (dx * dx);
                worst = worst.max((-d2 + c(x)).abs());
                x += 0.01;
            }
            worst
        };
        let ratio = res(0.02) / res(0.01);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }
}
