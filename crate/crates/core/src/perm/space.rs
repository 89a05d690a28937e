/// `log10(n!)` by direct summation of `log10(m)`; exact up to float
/// accumulation, which is far inside the tolerances used on it.
pub fn log10_factorial(n: usize) -> f64 {
    (2..=n).map(|m| (m as f64).log10()).sum()
}

/// `log10` of the number of weight-vector-wise permutations available to a
/// network whose weight vectors have the given lengths: `sum_j log10(n_j!)`.
/// Biases are excluded by construction since they never form weight vectors.
pub fn permutation_space_log10(vector_lengths: &[usize]) -> f64 {
    // Vector lengths repeat heavily (one length per layer), so build each
    // factorial once.
    let mut cache: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut total = 0.0;
    for &n in vector_lengths {
        total += *cache.entry(n).or_insert_with(|| log10_factorial(n));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vector_of_five() {
        assert!((permutation_space_log10(&[5]) - 120f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn unit_vectors_contribute_nothing() {
        assert_eq!(permutation_space_log10(&[1, 1]), 0.0);
    }

    #[test]
    fn monotone_under_added_vectors() {
        let base = permutation_space_log10(&[10, 20, 30]);
        for extra in [2usize, 3, 7, 100] {
            let more = permutation_space_log10(&[10, 20, 30, extra]);
            assert!(more > base);
        }
    }
}
