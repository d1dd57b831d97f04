use num_complex::Complex64;

use super::IqSignal;
use crate::error::{Error, Result};

/// Lowest reportable dB value; exact matches clamp here instead of -inf.
pub const DB_FLOOR: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub nmse_db: f64,
    pub evm_db: f64,
    pub aligned_gain: Complex64,
}

fn ratio_db(error_energy: f64, reference_energy: f64) -> f64 {
    let db = 10.0 * (error_energy / reference_energy).log10();
    if db.is_nan() || db < DB_FLOOR {
        DB_FLOOR
    } else {
        db
    }
}

fn check_pair(a: &IqSignal, reference: &IqSignal) -> Result<f64> {
    if a.len() != reference.len() {
        return Err(Error::Dimension {
            expected: reference.len(),
            got: a.len(),
        });
    }
    let energy = reference.energy();
    if energy == 0.0 {
        return Err(Error::Degenerate("reference signal is all zeros".into()));
    }
    Ok(energy)
}

/// `10 log10(sum |ref - est|^2 / sum |ref|^2)`, clamped at [`DB_FLOOR`].
pub fn nmse_db(estimate: &IqSignal, reference: &IqSignal) -> Result<f64> {
    let ref_energy = check_pair(estimate, reference)?;
    let err: f64 = estimate
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(e, r)| (r - e).norm_sqr())
        .sum();
    Ok(ratio_db(err, ref_energy))
}

/// Data-aided EVM after removing the least-squares complex gain between
/// `received` and `reference`.
///
/// The returned report also carries the plain (unaligned) NMSE.
pub fn evm_db(received: &IqSignal, reference: &IqSignal) -> Result<MetricReport> {
    let ref_energy = check_pair(received, reference)?;
    let cross: Complex64 = reference
        .samples()
        .iter()
        .zip(received.samples())
        .map(|(r, y)| r.conj() * y)
        .sum();
    let gain = cross / ref_energy;
    if gain.norm() == 0.0 || !gain.is_finite() {
        return Err(Error::Degenerate(
            "received signal is orthogonal to the reference; gain alignment undefined".into(),
        ));
    }
    let inv = gain.inv();
    let err: f64 = received
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(y, r)| (y * inv - r).norm_sqr())
        .sum();
    Ok(MetricReport {
        nmse_db: nmse_db(received, reference)?,
        evm_db: ratio_db(err, ref_energy),
        aligned_gain: gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: Vec<Complex64>) -> IqSignal {
        IqSignal::new(v, 1.0).unwrap()
    }

    fn reference() -> IqSignal {
        sig((0..32)
            .map(|n| Complex64::from_polar(1.0 + 0.1 * n as f64, 0.37 * n as f64))
            .collect())
    }

    #[test]
    fn nmse_identical_hits_floor() {
        let r = reference();
        assert_eq!(nmse_db(&r, &r).unwrap(), DB_FLOOR);
    }

    #[test]
    fn nmse_zero_estimate_is_0db() {
        let r = reference();
        let z = sig(vec![Complex64::new(0.0, 0.0); r.len()]);
        assert!(nmse_db(&z, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn nmse_one_percent_scale_is_minus_40db() {
        let r = reference();
        let e = r.scaled(Complex64::new(1.01, 0.0)).unwrap();
        // residual = 0.01 * ref exactly => 10 log10(1e-4)
        assert!((nmse_db(&e, &r).unwrap() + 40.0).abs() < 0.01);
    }

    #[test]
    fn nmse_is_invariant_to_common_scaling() {
        let r = reference();
        let e = r.scaled(Complex64::new(0.9, 0.05)).unwrap();
        let c = Complex64::new(-3.0, 1.5);
        let a = nmse_db(&e, &r).unwrap();
        let b = nmse_db(&e.scaled(c).unwrap(), &r.scaled(c).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nmse_errors() {
        let r = reference();
        let short = sig(r.samples()[..5].to_vec());
        assert!(matches!(nmse_db(&short, &r), Err(Error::Dimension { .. })));
        let z = sig(vec![Complex64::new(0.0, 0.0); r.len()]);
        assert!(matches!(nmse_db(&r, &z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn evm_removes_complex_gain() {
        let r = reference();
        let y = r.scaled(Complex64::new(0.0, 2.0)).unwrap();
        let m = evm_db(&y, &r).unwrap();
        assert_eq!(m.evm_db, DB_FLOOR);
        assert!((m.aligned_gain - Complex64::new(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn evm_orthogonal_perturbation() {
        let r = reference();
        // project a rotated copy off the reference, then scale to 1e-4 power
        let raw: Vec<Complex64> = r
            .samples()
            .iter()
            .enumerate()
            .map(|(n, z)| z * Complex64::from_polar(1.0, 1.3 * n as f64))
            .collect();
        let proj: Complex64 = r
            .samples()
            .iter()
            .zip(&raw)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            / r.energy();
        let e: Vec<Complex64> = raw.iter().zip(r.samples()).map(|(b, a)| b - proj * a).collect();
        let e_energy: f64 = e.iter().map(|z| z.norm_sqr()).sum();
        let k = (1e-4 * r.energy() / e_energy).sqrt();
        let y: Vec<Complex64> = r.samples().iter().zip(&e).map(|(a, b)| a + b * k).collect();
        let m = evm_db(&sig(y), &r).unwrap();
        assert!((m.evm_db + 40.0).abs() < 0.05, "{}", m.evm_db);
        assert!((m.aligned_gain - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn evm_all_zero_received_is_degenerate() {
        let r = reference();
        let z = sig(vec![Complex64::new(0.0, 0.0); r.len()]);
        assert!(matches!(evm_db(&z, &r), Err(Error::Degenerate(_))));
    }
}
