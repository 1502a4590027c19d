use crate::error::{require_finite, require_positive, Error, Result};
use crate::grid::Grid1D;

/// Log utility.
pub const MERTON_DEFAULT_GAMMA: f64 = 1.0;

/// CRRA-optimal dollar amount in the risky asset, `(μ − r) x / (γ σ²)`.
pub fn merton_policy(mu: f64, r: f64, sigma: f64, gamma: f64, x: f64) -> Result<f64> {
    require_finite("mu", mu)?;
    require_finite("r", r)?;
    require_positive("sigma", sigma)?;
    require_positive("gamma", gamma)?;
    require_positive("x", x)?;
    Ok((mu - r) * x / (gamma * sigma * sigma))
}

/// The control-dependent part of the HJB operator: `π (μ − r) V_x + ½ π² σ² V_xx`.
pub fn hamiltonian(pi: f64, vx: f64, vxx: f64, excess: f64, sigma: f64) -> f64 {
    pi * excess * vx + 0.5 * pi * pi * sigma * sigma * vxx
}

/// Grid point of `pi_grid` maximizing [`hamiltonian`]; ties go to the lower node.
pub fn brute_force_hjb_max(
    vx: f64,
    vxx: f64,
    mu: f64,
    r: f64,
    sigma: f64,
    pi_grid: &Grid1D,
) -> Result<f64> {
    require_finite("vx", vx)?;
    require_finite("vxx", vxx)?;
    require_positive("sigma", sigma)?;
    if !(vxx < 0.0) {
        return Err(Error::Concavity { vxx });
    }
    let excess = mu - r;
    let mut best = (f64::NEG_INFINITY, pi_grid.x_min());
    for i in 0..pi_grid.len() {
        let pi = pi_grid.node(i);
        let h = hamiltonian(pi, vx, vxx, excess, sigma);
        if h > best.0 {
            best = (h, pi);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn merton_examples() {
        assert_eq!(merton_policy(0.05, 0.05, 0.2, 1.0, 1.0).unwrap(), 0.0);
        let p = merton_policy(0.10, 0.05, 0.2, 1.0, 1.0).unwrap();
        assert!((p - 1.25).abs() < 1e-12);
        let p2 = merton_policy(0.10, 0.05, 0.2, 1.0, 2.0).unwrap();
        assert_eq!(p2, 2.0 * p);
        assert!(merton_policy(0.1, 0.05, 0.0, 1.0, 1.0).is_err());
        assert!(merton_policy(0.1, 0.05, 0.2, -1.0, 1.0).is_err());
        assert!(merton_policy(0.1, 0.05, 0.2, 1.0, 0.0).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let g = Grid1D::new(-10.0, 10.0, 20_001).unwrap();
        let step = g.step();
        let p = brute_force_hjb_max(1.0, -1.0, 0.10, 0.05, 0.2, &g).unwrap();
        assert!((p - 1.25).abs() <= step);
        let p = brute_force_hjb_max(1.0, -1.0, 0.05, 0.05, 0.2, &g).unwrap();
        assert!(p.abs() <= step);
        assert!(matches!(
            brute_force_hjb_max(1.0, 0.0, 0.1, 0.05, 0.2, &g),
            Err(Error::Concavity { .. })
        ));
    }

    #[test]
    fn brute_force_matches_first_order_condition() {
        let g = Grid1D::new(-10.0, 10.0, 4001).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let vx: f64 = rng.random_range(-3.0..3.0);
            let vxx: f64 = -rng.random_range(0.05..5.0);
            let excess: f64 = rng.random_range(-0.2..0.2);
            let sigma: f64 = rng.random_range(0.1..0.6);
            let foc = -excess * vx / (sigma * sigma * vxx);
            if foc.abs() > 9.5 {
                continue;
            }
            let p = brute_force_hjb_max(vx, vxx, 0.03 + excess, 0.03, sigma, &g).unwrap();
            assert!((p - foc).abs() <= g.step(), "{p} vs {foc}");
            checked += 1;
        }
    }
}
