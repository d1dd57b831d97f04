//! Human-readable coefficient files.
//!
//! ```text
//! # free-form comment lines
//! format = gmp-coefficients-v1
//! structure.aligned_orders = 0,2,4
//! structure.aligned_lags = 0,1,2
//! structure.lagging_orders = 2,4
//! structure.lagging_lags = 0,1,2
//! structure.lagging_cross = 1
//! structure.leading_orders =
//! structure.leading_lags =
//! structure.leading_cross =
//! kernel aligned 0 0 - 9.87e-1 1.2e-2
//! kernel lagging 2 1 1 -3.1e-3 4e-4
//! ```
//!
//! One `kernel` record per nonzero coefficient: branch, `k`, `l`, `m` (`-`
//! for aligned kernels), real part, imaginary part. Omitted kernels are
//! zero. Floats are written in shortest round-trip form, so a write/read
//! cycle is exact. Extra `key = value` header lines are passed through to
//! the caller, which decides which keys it accepts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use super::model::CoefficientVector;
use super::structure::{Branch, GmpStructure, KernelDescriptor};
use crate::error::{Error, Result};

pub const COEFF_FORMAT: &str = "gmp-coefficients-v1";

const STRUCTURE_KEYS: [&str; 8] = [
    "structure.aligned_orders",
    "structure.aligned_lags",
    "structure.lagging_orders",
    "structure.lagging_lags",
    "structure.lagging_cross",
    "structure.leading_orders",
    "structure.leading_lags",
    "structure.leading_cross",
];

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Serializes `coeffs`. `comments` become `#` lines at the top; `extras`
/// are written as additional header fields.
pub fn format_coefficients(
    coeffs: &CoefficientVector,
    comments: &[String],
    extras: &[(String, String)],
) -> String {
    let st = coeffs.structure();
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "format = {COEFF_FORMAT}");
    let values = [
        join(&st.aligned_orders),
        join(&st.aligned_lags),
        join(&st.lagging_orders),
        join(&st.lagging_lags),
        join(&st.lagging_cross),
        join(&st.leading_orders),
        join(&st.leading_lags),
        join(&st.leading_cross),
    ];
    for (k, v) in STRUCTURE_KEYS.iter().zip(values) {
        let _ = writeln!(out, "{k} = {v}");
    }
    for (k, v) in extras {
        let _ = writeln!(out, "{k} = {v}");
    }
    for (d, w) in coeffs.columns().iter().zip(coeffs.values()) {
        if *w == Complex64::new(0.0, 0.0) {
            continue;
        }
        let m = d.m.map_or_else(|| "-".to_string(), |m| m.to_string());
        let _ = writeln!(
            out,
            "kernel {} {} {} {} {:e} {:e}",
            d.branch.name(),
            d.k,
            d.l,
            m,
            w.re,
            w.im
        );
    }
    out
}

/// Parsed coefficient file: the vector plus any non-structure header fields.
#[derive(Debug, Clone)]
pub struct CoefficientFile {
    pub coeffs: CoefficientVector,
    pub extras: BTreeMap<String, String>,
}

fn parse_list<T: std::str::FromStr>(offset: u64, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::format(offset, format!("{key}: '{t}' is not a valid index")))
        })
        .collect()
}

pub fn parse_coefficients(text: &str) -> Result<CoefficientFile> {
    let mut header: BTreeMap<String, (u64, String)> = BTreeMap::new();
    let mut records: Vec<(u64, KernelDescriptor, Complex64)> = Vec::new();
    let mut offset = 0u64;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len() as u64;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("kernel ") {
            records.push(parse_record(line_offset, rest)?);
        } else if let Some((k, v)) = line.split_once('=') {
            let key = k.trim().to_string();
            if header.contains_key(&key) {
                return Err(Error::format(line_offset, format!("duplicate header field '{key}'")));
            }
            header.insert(key, (line_offset, v.trim().to_string()));
        } else {
            return Err(Error::format(line_offset, format!("unrecognized line '{line}'")));
        }
    }

    match header.remove("format") {
        Some((_, f)) if f == COEFF_FORMAT => {}
        Some((o, f)) => return Err(Error::format(o, format!("unsupported format '{f}'"))),
        None => return Err(Error::format(0, "missing 'format' header")),
    }
    let mut field = |key: &str| -> Result<(u64, String)> {
        header
            .remove(key)
            .ok_or_else(|| Error::format(0, format!("missing header field '{key}'")))
    };
    let mut usizes = Vec::new();
    let mut orders = Vec::new();
    for key in STRUCTURE_KEYS {
        let (o, v) = field(key)?;
        if key.ends_with("_orders") {
            orders.push(parse_list::<u32>(o, key, &v)?);
        } else {
            usizes.push(parse_list::<usize>(o, key, &v)?);
        }
    }
    let mut orders = orders.into_iter();
    let mut usizes = usizes.into_iter();
    let mut o = || orders.next().expect("three order lists");
    let mut u = || usizes.next().expect("five index lists");
    let (ka, la) = (o(), u());
    let (kb, lb, mb) = (o(), u(), u());
    let (kc, lc, mc) = (o(), u(), u());
    let structure = GmpStructure::new(ka, la, kb, lb, mb, kc, lc, mc)
        .map_err(|e| Error::format(0, format!("invalid structure: {e}")))?;

    let mut coeffs = CoefficientVector::zeros(structure);
    let mut seen = vec![false; coeffs.len()];
    for (o, d, w) in records {
        let j = coeffs
            .columns()
            .iter()
            .position(|c| *c == d)
            .ok_or_else(|| Error::format(o, format!("kernel {d} is not part of the structure")))?;
        if seen[j] {
            return Err(Error::format(o, format!("duplicate record for kernel {d}")));
        }
        seen[j] = true;
        coeffs.values_mut()[j] = w;
    }
    Ok(CoefficientFile {
        coeffs,
        extras: header.into_iter().map(|(k, (_, v))| (k, v)).collect(),
    })
}

fn parse_record(offset: u64, rest: &str) -> Result<(u64, KernelDescriptor, Complex64)> {
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != 6 {
        return Err(Error::format(
            offset,
            format!("kernel record needs 6 fields, found {}", parts.len()),
        ));
    }
    let bad = |what: &str, t: &str| Error::format(offset, format!("invalid {what} '{t}'"));
    let branch = Branch::parse(parts[0]).map_err(|_| bad("branch", parts[0]))?;
    let k: u32 = parts[1].parse().map_err(|_| bad("order", parts[1]))?;
    let l: usize = parts[2].parse().map_err(|_| bad("lag", parts[2]))?;
    let m = match (branch, parts[3]) {
        (Branch::Aligned, "-") => None,
        (Branch::Aligned, t) => return Err(bad("cross lag for aligned kernel", t)),
        (_, t) => Some(t.parse::<usize>().map_err(|_| bad("cross lag", t))?),
    };
    let re: f64 = parts[4].parse().map_err(|_| bad("real part", parts[4]))?;
    let im: f64 = parts[5].parse().map_err(|_| bad("imaginary part", parts[5]))?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(Error::format(offset, "coefficient is not finite"));
    }
    Ok((offset, KernelDescriptor { branch, k, l, m }, Complex64::new(re, im)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmp::full_structure;
    use proptest::prelude::*;

    #[test]
    fn sparse_round_trip_and_extras() {
        let st = full_structure(2, 5, 1, true, 1).unwrap();
        let mut w = CoefficientVector::zeros(st);
        w.values_mut()[0] = Complex64::new(1.0, -0.0);
        w.values_mut()[7] = Complex64::new(-3.25e-5, 1.0 / 3.0);
        let last = w.len() - 1;
        w.values_mut()[last] = Complex64::new(0.0, 2e-300);
        let text = format_coefficients(
            &w,
            &["config-hash abc".into()],
            &[("pa.smallsignal_gain".into(), "1,0".into())],
        );
        assert!(text.starts_with("# config-hash abc\n"));
        assert_eq!(text.matches("\nkernel ").count(), 3);
        let back = parse_coefficients(&text).unwrap();
        assert_eq!(back.coeffs, w);
        assert_eq!(back.extras.get("pa.smallsignal_gain").map(String::as_str), Some("1,0"));
    }

    #[test]
    fn rejects_foreign_and_duplicate_kernels() {
        let st = full_structure(1, 3, 1, false, 0).unwrap();
        let w = CoefficientVector::zeros(st);
        let base = format_coefficients(&w, &[], &[]);
        let foreign = format!("{base}kernel aligned 4 0 - 1 0\n");
        assert!(matches!(parse_coefficients(&foreign), Err(Error::Format { .. })));
        let dup = format!("{base}kernel aligned 0 0 - 1 0\nkernel aligned 0 0 - 2 0\n");
        let err = parse_coefficients(&dup).unwrap_err();
        let first = base.len() as u64 + "kernel aligned 0 0 - 1 0\n".len() as u64;
        assert!(matches!(err, Error::Format { offset, .. } if offset == first));
        let junk = format!("{base}what is this\n");
        assert!(parse_coefficients(&junk).is_err());
        assert!(parse_coefficients("").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn dense_round_trip(vals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 10)) {
            let st = full_structure(1, 5, 1, false, 0).unwrap();
            let w = CoefficientVector::new(st, vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let back = parse_coefficients(&format_coefficients(&w, &[], &[])).unwrap();
            prop_assert_eq!(back.coeffs, w);
        }
    }
}
