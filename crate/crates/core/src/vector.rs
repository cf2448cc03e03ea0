//! Small dense-vector helpers shared by matching and aggregation.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `v` to unit length in place. Zero vectors are left untouched.
pub fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > f64::MIN_POSITIVE {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    normalize(&mut v);
    v
}

/// Index and value of the best dot product of `query` against `candidates`.
/// Ties resolve to the lowest index.
pub fn argmax_dot<'a, I>(query: &[f64], candidates: I) -> Option<(usize, f64)>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.into_iter().enumerate() {
        let s = dot(query, c);
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        let q = [1.0, 0.0];
        let c: [&[f64]; 3] = [&[0.5, 0.5], &[1.0, 0.0], &[1.0, 0.0]];
        assert_eq!(argmax_dot(&q, c), Some((1, 1.0)));
    }

    #[test]
    fn zero_vector_survives_normalize() {
        let mut z = [0.0; 3];
        normalize(&mut z);
        assert_eq!(z, [0.0; 3]);
    }
}
