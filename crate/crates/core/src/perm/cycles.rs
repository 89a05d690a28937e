use crate::error::{Error, Result};
use crate::perm::Ranking;

/// True when `p` contains each of `0..n` exactly once.
pub fn is_permutation(p: &[u32]) -> bool {
    let n = p.len();
    let mut seen = vec![false; n];
    for &v in p {
        let v = v as usize;
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// `out[i] = v[perm[i]]`: positional application of a permutation.
pub fn apply_permutation<T: Copy>(perm: &[u32], v: &[T]) -> Vec<T> {
    perm.iter().map(|&p| v[p as usize]).collect()
}

/// The unique permutation `sigma` with `cur = apply_permutation(sigma, prev)`.
pub fn extract_permutation(prev: &Ranking, cur: &Ranking) -> Result<Vec<u32>> {
    if prev.len() != cur.len() {
        return Err(Error::Data(format!(
            "rankings differ in length: {} vs {}",
            prev.len(),
            cur.len()
        )));
    }
    if !is_permutation(prev.as_slice()) || !is_permutation(cur.as_slice()) {
        return Err(Error::Data("inputs are not valid rankings".into()));
    }
    // Invert prev, then route each current rank to the index that held it.
    let n = prev.len();
    let mut pos_in_prev = vec![0u32; n];
    for (i, &r) in prev.as_slice().iter().enumerate() {
        pos_in_prev[r as usize] = i as u32;
    }
    Ok(cur
        .as_slice()
        .iter()
        .map(|&r| pos_in_prev[r as usize])
        .collect())
}

/// Disjoint cycles of a permutation, fixed points included as 1-cycles.
/// Each cycle starts at its minimum element; cycles are sorted by that
/// minimum, so the output is canonical.
pub fn decompose_cycles(perm: &[u32]) -> Result<Vec<Vec<u32>>> {
    if !is_permutation(perm) {
        return Err(Error::Data("not a permutation".into()));
    }
    let n = perm.len();
    let mut visited = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = start;
        while !visited[cur] {
            visited[cur] = true;
            cycle.push(cur as u32);
            cur = perm[cur] as usize;
        }
        cycles.push(cycle);
    }
    Ok(cycles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_no_nontrivial_cycles() {
        let prev = Ranking(vec![2, 0, 1]);
        let sigma = extract_permutation(&prev, &prev).unwrap();
        assert_eq!(sigma, vec![0, 1, 2]);
        let cycles = decompose_cycles(&sigma).unwrap();
        assert!(cycles.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn rank_swap_is_a_two_cycle() {
        let prev = Ranking(vec![0, 1, 2]);
        let cur = Ranking(vec![1, 0, 2]);
        let sigma = extract_permutation(&prev, &cur).unwrap();
        assert_eq!(apply_permutation(&sigma, prev.as_slice()), cur.as_slice());
        let nontrivial: Vec<_> = decompose_cycles(&sigma)
            .unwrap()
            .into_iter()
            .filter(|c| c.len() > 1)
            .collect();
        assert_eq!(nontrivial, vec![vec![0, 1]]);
    }

    #[test]
    fn rejects_invalid_rankings() {
        let bad = Ranking(vec![0, 0, 2]);
        let ok = Ranking(vec![0, 1, 2]);
        assert!(extract_permutation(&bad, &ok).is_err());
        assert!(decompose_cycles(&[1, 1, 0]).is_err());
    }
}
