use crate::scalar::Real;

/// Cohen's kappa between two flagged sets, treating membership as two binary
/// raters over `n` items.
///
/// Identical degenerate outputs (both sets empty, or both full) score one.
pub fn kappa<T: Real>(a: &[usize], b: &[usize], n: usize) -> T {
    assert!(n > 0, "kappa needs at least one item");
    let mut in_a = vec![false; n];
    for &i in a {
        in_a[i] = true;
    }
    let mut in_b = vec![false; n];
    for &i in b {
        in_b[i] = true;
    }
    let size_a = in_a.iter().filter(|v| **v).count();
    let size_b = in_b.iter().filter(|v| **v).count();
    if (size_a == 0 && size_b == 0) || (size_a == n && size_b == n) {
        return T::one();
    }
    let agree = in_a.iter().zip(&in_b).filter(|(x, y)| x == y).count();
    let nn = T::from_count(n);
    let po = T::from_count(agree) / nn;
    let qa = T::from_count(size_a) / nn;
    let qb = T::from_count(size_b) / nn;
    let pe = qa * qb + (T::one() - qa) * (T::one() - qb);
    (po - pe) / (T::one() - pe)
}
