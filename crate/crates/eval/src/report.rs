//! CSV serialization of sweep results.

use qtomo_core::{Error, Result};

use crate::sweep::{SweepResult, SweepRow};

/// Shortest round-trip text for `v`; exponent form for very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub const SWEEP_HEADER: &str = "method,n_qubits,M,mean_bures,std_bures,n_samples,seed";

/// Metadata as `# key=value` lines (prefixed with the method), then one
/// header and the rows of every result.
pub fn sweeps_to_csv(results: &[SweepResult], extra_meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in extra_meta {
        out.push_str(&format!("# {k}={v}\n"));
    }
    for r in results {
        for (k, v) in &r.meta {
            out.push_str(&format!("# {}.{k}={v}\n", r.method));
        }
    }
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in results {
        for row in &r.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.method,
                r.n_qubits,
                row.m,
                fmt_f64(row.mean_bures),
                fmt_f64(row.std_bures),
                row.n_samples,
                r.seed
            ));
        }
    }
    out
}

/// Parses rows back into results grouped by consecutive method labels.
/// Per-method metadata lines are reattached; other comments are skipped.
pub fn sweeps_from_csv(text: &str) -> Result<Vec<SweepResult>> {
    let bad = |line: &str| Error::Format(format!("bad sweep line {line:?}"));
    let mut meta: Vec<(String, String, String)> = Vec::new();
    let mut results: Vec<SweepResult> = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        if let Some(c) = line.strip_prefix("# ") {
            if let Some((k, v)) = c.split_once('=') {
                if let Some((method, key)) = k.split_once('.') {
                    meta.push((method.to_string(), key.to_string(), v.to_string()));
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != SWEEP_HEADER {
                return Err(Error::Format("missing sweep header".into()));
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(line));
        }
        let row = SweepRow {
            m: f[2].parse().map_err(|_| bad(line))?,
            mean_bures: f[3].parse().map_err(|_| bad(line))?,
            std_bures: f[4].parse().map_err(|_| bad(line))?,
            n_samples: f[5].parse().map_err(|_| bad(line))?,
        };
        let n_qubits = f[1].parse().map_err(|_| bad(line))?;
        let seed = f[6].parse().map_err(|_| bad(line))?;
        match results.last_mut() {
            Some(r) if r.method == f[0] && r.n_qubits == n_qubits && r.seed == seed => {
                r.rows.push(row)
            }
            _ => results.push(SweepResult {
                method: f[0].to_string(),
                n_qubits,
                seed,
                rows: vec![row],
                meta: Vec::new(),
            }),
        }
    }
    if !saw_header {
        return Err(Error::Format("missing sweep header".into()));
    }
    for r in &mut results {
        r.meta = meta
            .iter()
            .filter(|(m, _, _)| *m == r.method)
            .map(|(_, k, v)| (k.clone(), v.clone()))
            .collect();
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [
            0.0,
            1.0,
            -0.25,
            7.8e-33,
            3.657e-9,
            0.1 + 0.2,
            1e300,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(7.5e-33), "7.5e-33");
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn rejects_missing_header() {
        assert!(sweeps_from_csv("# a=1\n").is_err());
        assert!(sweeps_from_csv("pinv,1,1,0.5,0.1,10,0\n").is_err());
    }
}
