use nalgebra::Vector2;

/// Mean cosine between consecutive displacement vectors.
///
/// `history` is oldest first. With `m` running over the newest positions,
/// each displacement spans `n` entries: `d_m = o[t-m] - o[t-m-n]`. Returns
/// `None` when there are fewer than two displacement vectors. A zero-length
/// displacement contributes a cosine of 0 to both of its neighbors.
pub fn continuity_coefficient(history: &[Vector2<f64>], n: usize) -> Option<f64> {
    if n == 0 || history.len() < n + 2 {
        return None;
    }
    let last = history.len() - 1;
    let disp: Vec<Vector2<f64>> = (0..=last - n).map(|m| history[last - m] - history[last - m - n]).collect();
    let cosines = disp.windows(2).map(|w| {
        let (a, b) = (w[0], w[1]);
        let denom = a.norm() * b.norm();
        if denom == 0.0 {
            0.0
        } else {
            snap((a.dot(&b) / denom).clamp(-1.0, 1.0))
        }
    });
    let count = disp.len() - 1;
    Some(cosines.sum::<f64>() / count as f64)
}

/// Parallel vectors built from rounded positions land a few ulps off +-1.
fn snap(c: f64) -> f64 {
    if 1.0 - c.abs() < 1e-12 {
        c.signum()
    } else {
        c
    }
}
