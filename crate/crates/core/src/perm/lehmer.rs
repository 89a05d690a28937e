use crate::error::{Error, Result};
use crate::perm::cycles::is_permutation;

/// Fenwick tree over counts, used for O(n log n) Lehmer coding.
struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, mut i: usize, delta: i32) {
        i += 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i32 + delta) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of counts over `[0, i)`.
    fn prefix(&self, mut i: usize) -> u32 {
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose prefix sum (inclusive) reaches `k + 1`; i.e. the
    /// position of the k-th remaining element when counts are 0/1 flags.
    fn select(&self, k: u32) -> usize {
        let mut pos = 0usize;
        let mut remaining = k + 1;
        let mut mask = self.tree.len().next_power_of_two() >> 1;
        while mask > 0 {
            let next = pos + mask;
            if next < self.tree.len() && self.tree[next] < remaining {
                remaining -= self.tree[next];
                pos = next;
            }
            mask >>= 1;
        }
        pos // 0-based element index
    }
}

/// Lehmer code of a permutation: digit `i` counts the elements to the right
/// of position `i` that are smaller than `perm[i]`. Digit `i` lies in
/// `[0, n-1-i]`.
pub fn lehmer_encode(perm: &[u32]) -> Result<Vec<u32>> {
    if !is_permutation(perm) {
        return Err(Error::Data("lehmer_encode input is not a permutation".into()));
    }
    let n = perm.len();
    let mut seen = Fenwick::new(n);
    let mut digits = vec![0u32; n];
    // Scan right to left: smaller-to-the-right equals the count of already
    // seen values below perm[i].
    for i in (0..n).rev() {
        let v = perm[i] as usize;
        digits[i] = seen.prefix(v);
        seen.add(v, 1);
    }
    Ok(digits)
}

/// Inverse of [`lehmer_encode`].
pub fn lehmer_decode(digits: &[u32]) -> Result<Vec<u32>> {
    let n = digits.len();
    for (i, &d) in digits.iter().enumerate() {
        if d as usize > n - 1 - i {
            return Err(Error::Data(format!(
                "lehmer digit {d} at position {i} exceeds bound {}",
                n - 1 - i
            )));
        }
    }
    let mut avail = Fenwick::new(n);
    for i in 0..n {
        avail.add(i, 1);
    }
    let mut perm = vec![0u32; n];
    for (i, &d) in digits.iter().enumerate() {
        let v = avail.select(d);
        perm[i] = v as u32;
        avail.add(v, -1);
    }
    Ok(perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_encodes_to_zeros() {
        assert_eq!(lehmer_encode(&[0, 1, 2, 3]).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn count_smaller_to_right() {
        assert_eq!(lehmer_encode(&[2, 0, 1]).unwrap(), vec![2, 0, 0]);
    }

    #[test]
    fn decode_rejects_out_of_range_digits() {
        assert!(matches!(lehmer_decode(&[3, 0, 0]), Err(Error::Data(_))));
    }

    #[test]
    fn empty_permutation_round_trips() {
        assert_eq!(lehmer_decode(&lehmer_encode(&[]).unwrap()).unwrap(), vec![]);
    }
}
