//! Ranking math, permutation cycles, Lehmer codes, permutation-space
//! counting, and weight-profile export.

mod cycles;
mod lehmer;
mod permfile;
mod profiles;
mod space;

pub use cycles::{apply_permutation, decompose_cycles, extract_permutation, is_permutation};
pub use lehmer::{lehmer_decode, lehmer_encode};
pub use permfile::{read_permutation_file, write_permutation_file, PermutationFile};
pub use profiles::{export_weight_profiles, profile_matrix, profile_overlap_score};
pub use space::{log10_factorial, permutation_space_log10};

use crate::error::{Error, Result};

/// The ranking of a vector: entry `i` is the rank of `w[i]` among the
/// vector's values, ties broken by ascending index. A ranking is itself a
/// permutation of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking(pub Vec<u32>);

impl Ranking {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Rank each entry of `w` among the vector's values.
///
/// Stable: equal values are ranked by ascending index, so the result is a
/// total order even for vectors that are almost entirely ties (pruned zeros,
/// shared-value initializations).
pub fn compute_ranking(w: &[f32]) -> Result<Ranking> {
    if w.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("cannot rank a vector containing NaN".into()));
    }
    Ok(Ranking(argsort_ranks(w)))
}

/// Ranks without the NaN check, for internal hot paths that already
/// guarantee finite values.
pub(crate) fn argsort_ranks(w: &[f32]) -> Vec<u32> {
    let n = w.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    // Stable sort keeps equal values in index order.
    order.sort_by(|&a, &b| w[a as usize].partial_cmp(&w[b as usize]).unwrap());
    let mut ranks = vec![0u32; n];
    for (rank, &idx) in order.iter().enumerate() {
        ranks[idx as usize] = rank as u32;
    }
    ranks
}

/// Mean and standard deviation of the elementwise ranking distance
/// `D = |R_cur - R_prev|` over one or more vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingDistanceStats {
    pub mean: f64,
    pub sd: f64,
    /// Per-entry distances, concatenated in vector order.
    pub distances: Vec<u32>,
}

/// Distance stats for a single vector pair.
pub fn ranking_distance(prev: &Ranking, cur: &Ranking) -> Result<RankingDistanceStats> {
    if prev.len() != cur.len() {
        return Err(Error::Usage(format!(
            "ranking length mismatch: {} vs {}",
            prev.len(),
            cur.len()
        )));
    }
    Ok(distance_stats(std::iter::once((
        prev.as_slice(),
        cur.as_slice(),
    ))))
}

/// Distance stats aggregated over all vectors of one weight matrix.
pub fn ranking_distance_matrix(prev: &[Ranking], cur: &[Ranking]) -> Result<RankingDistanceStats> {
    if prev.len() != cur.len() {
        return Err(Error::Usage(format!(
            "matrix vector-count mismatch: {} vs {}",
            prev.len(),
            cur.len()
        )));
    }
    for (p, c) in prev.iter().zip(cur) {
        if p.len() != c.len() {
            return Err(Error::Usage(format!(
                "ranking length mismatch: {} vs {}",
                p.len(),
                c.len()
            )));
        }
    }
    Ok(distance_stats(
        prev.iter().zip(cur).map(|(p, c)| (p.as_slice(), c.as_slice())),
    ))
}

fn distance_stats<'a>(pairs: impl Iterator<Item = (&'a [u32], &'a [u32])>) -> RankingDistanceStats {
    let mut distances = Vec::new();
    for (p, c) in pairs {
        for (&a, &b) in p.iter().zip(c.iter()) {
            distances.push(a.abs_diff(b));
        }
    }
    let n = distances.len().max(1) as f64;
    let mean = distances.iter().map(|&d| d as f64).sum::<f64>() / n;
    let var = distances
        .iter()
        .map(|&d| {
            let e = d as f64 - mean;
            e * e
        })
        .sum::<f64>()
        / n;
    RankingDistanceStats {
        mean,
        sd: var.sqrt(),
        distances,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_by_definition() {
        assert_eq!(
            compute_ranking(&[1.5, -0.2, 0.7]).unwrap().as_slice(),
            &[2, 0, 1]
        );
    }

    #[test]
    fn ranking_ties_by_index() {
        assert_eq!(
            compute_ranking(&[0.0, 0.0, 0.0]).unwrap().as_slice(),
            &[0, 1, 2]
        );
    }

    #[test]
    fn ranking_rejects_nan() {
        assert!(matches!(
            compute_ranking(&[1.0, f32::NAN]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn distance_direct_formula() {
        let p = Ranking(vec![0, 1, 2]);
        let c = Ranking(vec![2, 0, 1]);
        let s = ranking_distance(&p, &c).unwrap();
        assert_eq!(s.distances, vec![2, 1, 1]);
        assert!((s.mean - 4.0 / 3.0).abs() < 1e-12);
        assert!((s.sd - 2.0f64.sqrt() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn distance_identical_is_zero() {
        let r = Ranking(vec![3, 0, 2, 1]);
        let s = ranking_distance(&r, &r).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.sd, 0.0);
    }

    #[test]
    fn distance_full_reversal() {
        let p = Ranking(vec![0, 1, 2, 3]);
        let c = Ranking(vec![3, 2, 1, 0]);
        let s = ranking_distance(&p, &c).unwrap();
        assert_eq!(s.distances, vec![3, 1, 1, 3]);
        assert_eq!(s.mean, 2.0);
    }

    #[test]
    fn distance_rejects_length_mismatch() {
        let p = Ranking(vec![0, 1]);
        let c = Ranking(vec![0, 1, 2]);
        assert!(matches!(ranking_distance(&p, &c), Err(Error::Usage(_))));
    }
}
