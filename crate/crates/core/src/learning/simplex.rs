/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn simplex_projection(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty());
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(simplex_projection(&[0.6, 0.6]), vec![0.5, 0.5]);
        assert_eq!(simplex_projection(&[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(simplex_projection(&[2.0, -1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn idempotent() {
        let p = simplex_projection(&[0.3, -2.0, 4.0, 1.1]);
        let q = simplex_projection(&p);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
