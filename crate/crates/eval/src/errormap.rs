//! Element-wise mean absolute reconstruction errors.

use crate::report::fmt_f64;
use qtomo_core::{ComplexMatrix, DensityMatrix, Error, MeasurementRecord, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMap {
    /// Measurement collection the map belongs to.
    pub subset: Vec<usize>,
    pub dim: usize,
    /// Mean |ρ_αβ − ρ^rec_αβ|, row-major.
    pub values: Vec<f64>,
}

impl ErrorMap {
    pub fn get(&self, alpha: usize, beta: usize) -> f64 {
        self.values[alpha * self.dim + beta]
    }

    pub fn max_abs_diff(&self, other: &ErrorMap) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Mean element-wise error of paired truths and reconstructions.
pub fn error_map_from(
    subset: &[usize],
    truths: &[ComplexMatrix],
    recons: &[ComplexMatrix],
) -> Result<ErrorMap> {
    if truths.is_empty() || truths.len() != recons.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} states for {} reconstructions",
            truths.len(),
            recons.len()
        )));
    }
    let dim = truths[0].rows();
    let mut values = vec![0.0; dim * dim];
    for (t, r) in truths.iter().zip(recons) {
        if t.shape() != (dim, dim) || r.shape() != (dim, dim) {
            return Err(Error::ShapeMismatch("mixed dimensions in error map".into()));
        }
        for (v, (a, b)) in values.iter_mut().zip(t.as_slice().iter().zip(r.as_slice())) {
            *v += (a - b).norm();
        }
    }
    let n = truths.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(ErrorMap {
        subset: subset.to_vec(),
        dim,
        values,
    })
}

/// Measures every test state with `subset` and maps the errors of `reconstruct`.
pub fn error_map(
    test: &[DensityMatrix],
    subset: &[usize],
    reconstruct: impl Fn(&MeasurementRecord) -> Result<ComplexMatrix>,
) -> Result<ErrorMap> {
    let mut truths = Vec::with_capacity(test.len());
    let mut recons = Vec::with_capacity(test.len());
    for rho in test {
        let rec = MeasurementRecord::measure(rho, subset)?;
        recons.push(reconstruct(&rec)?);
        truths.push(rho.matrix().clone());
    }
    error_map_from(subset, &truths, &recons)
}

fn subset_label(s: &[usize]) -> String {
    s.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// CSV with columns subset,alpha,beta,value (α, β 0-based).
pub fn error_maps_to_csv(maps: &[ErrorMap]) -> String {
    let mut out = String::from("subset,alpha,beta,value\n");
    for m in maps {
        let label = subset_label(&m.subset);
        for a in 0..m.dim {
            for b in 0..m.dim {
                out.push_str(&format!("{label},{a},{b},{}\n", fmt_f64(m.get(a, b))));
            }
        }
    }
    out
}

pub fn error_maps_from_csv(text: &str) -> Result<Vec<ErrorMap>> {
    let bad = |line: &str| Error::Format(format!("bad error-map line {line:?}"));
    let mut maps: Vec<ErrorMap> = Vec::new();
    let mut entries: Vec<(String, usize, usize, f64)> = Vec::new();
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    if lines.next() != Some("subset,alpha,beta,value") {
        return Err(Error::Format("missing error-map header".into()));
    }
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(line));
        }
        entries.push((
            f[0].to_string(),
            f[1].parse().map_err(|_| bad(line))?,
            f[2].parse().map_err(|_| bad(line))?,
            f[3].parse().map_err(|_| bad(line))?,
        ));
    }
    let mut i = 0;
    while i < entries.len() {
        let label = entries[i].0.clone();
        let group: Vec<_> = entries[i..].iter().take_while(|e| e.0 == label).collect();
        let dim = (group.len() as f64).sqrt().round() as usize;
        if dim * dim != group.len() {
            return Err(Error::Format(format!("error map {label} is not square")));
        }
        let mut values = vec![0.0; dim * dim];
        for e in &group {
            if e.1 >= dim || e.2 >= dim {
                return Err(Error::Format(format!("index out of range in map {label}")));
            }
            values[e.1 * dim + e.2] = e.3;
        }
        let subset = label
            .split('-')
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Format(format!("bad subset {label}")))
            })
            .collect::<Result<_>>()?;
        maps.push(ErrorMap {
            subset,
            dim,
            values,
        });
        i += group.len();
    }
    Ok(maps)
}
