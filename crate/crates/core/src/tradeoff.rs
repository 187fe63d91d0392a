//! Communication rounds needed per gradient step for the distributed method
//! to match the centralized proximal-gradient rate.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative slack when checking a round count against its target, so that
/// exact boundary cases are not pushed up by rounding.
const BOUNDARY_TOL: f64 = 1e-12;

/// Rate of centralized proximal gradient, `(κ−1)/(κ+1)`.
pub fn rho_opt(kappa: f64) -> Result<f64> {
    if !(kappa >= 1.0) || kappa.is_infinite() {
        return Err(Error::InvalidParameter(format!("condition number {kappa} must be finite and at least 1")));
    }
    Ok((kappa - 1.0) / (kappa + 1.0))
}

/// Mixing factor `2c^K/(1+c^{2K})` of `K` Chebyshev-accelerated rounds.
pub fn chebyshev_mixing_factor(rho_com: f64, k: usize) -> f64 {
    let c = chebyshev_base(rho_com);
    let ck = c.powi(k as i32);
    2.0 * ck / (1.0 + ck * ck)
}

fn chebyshev_base(rho_com: f64) -> f64 {
    let theta = (1.0 + rho_com) / (1.0 - rho_com);
    let s = theta.sqrt();
    (s - 1.0) / (s + 1.0)
}

fn check_rates(rho_com: f64, rho_opt: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho_com) {
        return Err(Error::InvalidParameter(format!("rho_com = {rho_com} outside [0, 1)")));
    }
    if !(rho_opt > 0.0 && rho_opt < 1.0) {
        return Err(Error::InvalidParameter(format!("rho_opt = {rho_opt} outside (0, 1)")));
    }
    Ok(())
}

/// Smallest `K ≥ 1` with `factor(K) ≤ target`, starting from a closed-form
/// estimate and correcting it by direct evaluation.
fn minimal_rounds(estimate: f64, target: f64, factor: impl Fn(usize) -> f64) -> usize {
    let holds = |k: usize| factor(k) <= target * (1.0 + BOUNDARY_TOL);
    let mut k = if estimate.is_finite() && estimate > 1.0 {
        estimate.ceil() as usize
    } else {
        1
    };
    while k > 1 && holds(k - 1) {
        k -= 1;
    }
    while !holds(k) {
        k += 1;
    }
    k
}

/// Rounds of plain gossip: smallest `K` with `ρ_com^K ≤ ρ_opt²`.
pub fn rounds_plain(rho_com: f64, rho_opt: f64) -> Result<usize> {
    check_rates(rho_com, rho_opt)?;
    if rho_com == 0.0 {
        return Ok(1);
    }
    let target = rho_opt * rho_opt;
    Ok(minimal_rounds(target.ln() / rho_com.ln(), target, |k| rho_com.powi(k as i32)))
}

/// Rounds of Chebyshev-accelerated gossip: smallest `K` with
/// `2c^K/(1+c^{2K}) ≤ ρ_opt²`.
pub fn rounds_chebyshev(rho_com: f64, rho_opt: f64) -> Result<usize> {
    check_rates(rho_com, rho_opt)?;
    if rho_com == 0.0 {
        return Ok(1);
    }
    let target = rho_opt * rho_opt;
    let inv = 1.0 / target;
    let c = chebyshev_base(rho_com);
    let estimate = (inv + (inv * inv - 1.0).sqrt()).ln() / (1.0 / c).ln();
    Ok(minimal_rounds(estimate, target, |k| chebyshev_mixing_factor(rho_com, k)))
}

/// Per-step mixing target `(√(1+ρ_opt) − √(1−ρ_opt))/2` of the baseline
/// multi-round scheme.
pub fn baseline_target(rho_opt: f64) -> f64 {
    ((1.0 + rho_opt).sqrt() - (1.0 - rho_opt).sqrt()) / 2.0
}

/// Rounds the baseline scheme needs: smallest `K` with
/// `ρ_com^K ≤ baseline_target(ρ_opt)`.
pub fn rounds_baseline(rho_com: f64, rho_opt: f64) -> Result<usize> {
    check_rates(rho_com, rho_opt)?;
    if rho_com == 0.0 {
        return Ok(1);
    }
    let target = baseline_target(rho_opt);
    Ok(minimal_rounds(target.ln() / rho_com.ln(), target, |k| rho_com.powi(k as i32)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub rho_com: f64,
    pub rho_opt: f64,
    pub k_plain: usize,
    pub k_cheby: usize,
    pub k_baseline: usize,
}

impl TradeoffPoint {
    pub fn new(rho_com: f64, rho_opt: f64) -> Result<Self> {
        Ok(TradeoffPoint {
            rho_com,
            rho_opt,
            k_plain: rounds_plain(rho_com, rho_opt)?,
            k_cheby: rounds_chebyshev(rho_com, rho_opt)?,
            k_baseline: rounds_baseline(rho_com, rho_opt)?,
        })
    }
}

/// `{0.05, 0.10, …, 0.95}`.
pub fn default_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}

/// Every `(ρ_com, ρ_opt)` pair, `ρ_com` varying slowest.
pub fn sweep(rho_coms: &[f64], rho_opts: &[f64]) -> Result<Vec<TradeoffPoint>> {
    let mut out = Vec::with_capacity(rho_coms.len() * rho_opts.len());
    for &rc in rho_coms {
        for &ro in rho_opts {
            out.push(TradeoffPoint::new(rc, ro)?);
        }
    }
    Ok(out)
}

pub const TRADEOFF_HEADER: &str = "rho_com,rho_opt,k_plain,k_cheby,k_baseline";

pub fn to_csv(points: &[TradeoffPoint]) -> String {
    let mut out = String::from(TRADEOFF_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.rho_com, p.rho_opt, p.k_plain, p.k_cheby, p.k_baseline
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centralized_rate() {
        assert_eq!(rho_opt(1.0).unwrap(), 0.0);
        assert_eq!(rho_opt(3.0).unwrap(), 0.5);
        assert!(rho_opt(0.5).is_err());
        let mut prev = 0.0;
        for kappa in [2.0, 10.0, 1e3, 1e9] {
            let r = rho_opt(kappa).unwrap();
            assert!(r > prev && r < 1.0);
            prev = r;
        }
    }

    #[test]
    fn plain_rounds() {
        assert_eq!(rounds_plain(0.5, 0.5).unwrap(), 2);
        assert_eq!(rounds_plain(0.9, 0.5).unwrap(), 14);
        assert_eq!(rounds_plain(0.2, 0.5).unwrap(), 1);
        assert_eq!(rounds_plain(0.0, 0.5).unwrap(), 1);
        assert!(rounds_plain(1.0, 0.5).is_err());
        assert!(rounds_plain(0.5, 0.0).is_err());
    }

    #[test]
    fn chebyshev_rounds() {
        // c = 1/3 gives a one-round factor of exactly 0.6.
        assert!((chebyshev_mixing_factor(0.6, 1) - 0.6).abs() < 1e-15);
        assert_eq!(rounds_chebyshev(0.6, 0.6f64.sqrt()).unwrap(), 1);
        assert_eq!(rounds_chebyshev(0.5, 0.999).unwrap(), 1);
        assert!(rounds_chebyshev(0.99, 0.9).unwrap() < rounds_plain(0.99, 0.9).unwrap());
        assert_eq!(rounds_chebyshev(0.0, 0.3).unwrap(), 1);
    }

    #[test]
    fn baseline_rounds() {
        assert!((baseline_target(0.5) - 0.258_819_045_102_520_8).abs() < 1e-15);
        assert!(rounds_baseline(0.9, 0.01).unwrap() <= rounds_plain(0.9, 0.01).unwrap());
        assert!(rounds_plain(0.9, 0.99).unwrap() <= rounds_baseline(0.9, 0.99).unwrap());
    }

    #[test]
    fn default_sweep_shape_and_monotonicity() {
        let grid = default_grid();
        assert_eq!(grid.len(), 19);
        let pts = sweep(&grid, &grid).unwrap();
        assert_eq!(pts.len(), 361);
        for ro in &grid {
            let column: Vec<_> = pts.iter().filter(|p| p.rho_opt == *ro).collect();
            for w in column.windows(2) {
                assert!(w[0].k_plain <= w[1].k_plain);
                assert!(w[0].k_cheby <= w[1].k_cheby);
                assert!(w[0].k_baseline <= w[1].k_baseline);
            }
        }
        let csv = to_csv(&pts);
        assert_eq!(csv.lines().count(), 362);
        assert!(csv.starts_with(TRADEOFF_HEADER));
    }

    #[test]
    fn crossover_between_plain_and_baseline_exists() {
        let grid = default_grid();
        let rc = 0.95;
        let diffs: Vec<i64> = grid
            .iter()
            .map(|&ro| rounds_plain(rc, ro).unwrap() as i64 - rounds_baseline(rc, ro).unwrap() as i64)
            .collect();
        assert!(diffs.first().unwrap() > &0);
        assert!(diffs.last().unwrap() < &0);
    }

    #[test]
    fn acceleration_advantage_grows_with_poor_connectivity() {
        let ratio = |rc: f64| rounds_chebyshev(rc, 0.5).unwrap() as f64 / rounds_plain(rc, 0.5).unwrap() as f64;
        assert!(ratio(0.999_99) < ratio(0.999));
        assert!(ratio(0.999_999) < 0.02);
    }
}
