//! Exhaustive evaluation of an MRF over all configurations.

use super::OracleError;
use crate::logspace::log_add_exp;
use crate::mrf::Mrf;

pub const MAX_CONFIGURATIONS: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MrfSummary {
    /// `ln Σ e^{-Ψ(y)}` over configurations.
    pub log_z: f64,
    pub min_energy: f64,
    /// Every configuration attaining `min_energy`, in odometer order.
    pub argmin: Vec<Vec<usize>>,
    /// `marginals[y][v] = P(y = v)`.
    pub marginals: Vec<Vec<f64>>,
}

/// All configurations in odometer order, the last variable fastest.
pub fn configurations(m: &Mrf) -> impl Iterator<Item = Vec<usize>> + '_ {
    let sizes: Vec<usize> = m.variables.iter().map(|v| v.domain.len()).collect();
    let mut next = (!sizes.contains(&0)).then(|| vec![0; sizes.len()]);
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        for y in (0..sizes.len()).rev() {
            succ[y] += 1;
            if succ[y] < sizes[y] {
                next = Some(succ);
                break;
            }
            succ[y] = 0;
        }
        Some(current)
    })
}

pub fn enumerate_mrf(m: &Mrf) -> Result<MrfSummary, OracleError> {
    let count = m.num_configurations();
    if count > MAX_CONFIGURATIONS {
        return Err(OracleError::TooLarge(format!("{count} configurations, limit {MAX_CONFIGURATIONS}")));
    }
    let mut log_z = f64::NEG_INFINITY;
    let mut min_energy = f64::INFINITY;
    let mut argmin = Vec::new();
    let mut log_marg: Vec<Vec<f64>> =
        m.variables.iter().map(|v| vec![f64::NEG_INFINITY; v.domain.len()]).collect();
    for config in configurations(m) {
        let e = m.energy(&config);
        log_z = log_add_exp(log_z, -e);
        for (y, &v) in config.iter().enumerate() {
            log_marg[y][v] = log_add_exp(log_marg[y][v], -e);
        }
        if e < min_energy {
            min_energy = e;
            argmin.clear();
        }
        if e == min_energy {
            argmin.push(config);
        }
    }
    let marginals = log_marg
        .into_iter()
        .map(|row| row.into_iter().map(|l| (l - log_z).exp()).collect())
        .collect();
    Ok(MrfSummary { log_z, min_energy, argmin, marginals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tables() {
        let mut m = Mrf::with_domain_sizes(&[2, 2, 2]);
        m.add_term(vec![0, 1], vec![0.0; 4]).unwrap();
        let s = enumerate_mrf(&m).unwrap();
        assert!((s.log_z.exp() - 8.0).abs() < 1e-12);
        assert_eq!(s.argmin.len(), 8);
    }

    #[test]
    fn single_unary() {
        let mut m = Mrf::with_domain_sizes(&[2]);
        m.add_term(vec![0], vec![0.0, 3f64.ln()]).unwrap();
        let s = enumerate_mrf(&m).unwrap();
        assert!((s.marginals[0][0] - 0.75).abs() < 1e-12);
        assert_eq!(s.argmin, vec![vec![0]]);
    }

    #[test]
    fn odometer_order_and_guard() {
        let m = Mrf::with_domain_sizes(&[2, 3]);
        let all: Vec<Vec<usize>> = configurations(&m).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[5], vec![1, 2]);
        assert!(enumerate_mrf(&Mrf::with_domain_sizes(&[10; 7])).is_err());
    }
}
