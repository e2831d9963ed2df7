//! Order-preserving parallel map over an index range.

use qtomo_core::Result;

/// Evaluates `f(0..n)` on up to `jobs` scoped threads over contiguous
/// chunks. The output order, and hence any later reduction, does not depend
/// on `jobs`.
pub fn par_map<T: Send>(
    n: usize,
    jobs: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let jobs = jobs.max(1).min(n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(jobs);
    let f = &f;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let range = j * chunk..((j + 1) * chunk).min(n);
                scope.spawn(move || range.map(f).collect::<Result<Vec<T>>>())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_jobs() {
        let one = par_map(37, 1, |i| Ok(i * i)).unwrap();
        for jobs in [2, 3, 8, 100] {
            assert_eq!(par_map(37, jobs, |i| Ok(i * i)).unwrap(), one);
        }
        assert!(par_map(0, 4, Ok).unwrap().is_empty());
        assert!(par_map(5, 2, |i| if i == 3 {
            Err(qtomo_core::Error::AllUsed)
        } else {
            Ok(i)
        })
        .is_err());
    }
}
