//! Finite-difference building blocks shared by every scheme.
//!
//! Faces are indexed so that face `i` sits between nodes `i` and `i + 1`;
//! a field of `n` nodes has `n - 1` faces. The two boundary faces carry no
//! flux (homogeneous Neumann), so face-to-node differences treat them as 0.

/// Donor-cell density on a face: the left node when the face gradient is
/// negative, the right node when positive, and 0 on a tie (the flux
/// `n * q` vanishes there anyway).
#[inline]
pub fn upwind_face_value(n_left: f64, n_right: f64, q_face: f64) -> f64 {
    if q_face < 0.0 {
        n_left
    } else if q_face > 0.0 {
        n_right
    } else {
        0.0
    }
}

/// `q_{i+1/2} = (p_{i+1} - p_i) / dx` on interior faces.
pub fn face_gradient(p: &[f64], dx: f64) -> Vec<f64> {
    p.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
}

/// Face-to-node difference `(f_{i+1/2} - f_{i-1/2}) / dx` with zero
/// boundary faces.
pub fn face_divergence(faces: &[f64], dx: f64) -> Vec<f64> {
    let n = faces.len() + 1;
    (0..n)
        .map(|i| {
            let right = if i < faces.len() { faces[i] } else { 0.0 };
            let left = if i > 0 { faces[i - 1] } else { 0.0 };
            (right - left) / dx
        })
        .collect()
}

/// `delta^2 p_i = (p_{i+1} - 2 p_i + p_{i-1}) / dx^2` in the interior, with
/// the no-flux closure at the two end nodes.
pub fn second_difference(p: &[f64], dx: f64) -> Vec<f64> {
    (0..p.len()).map(|i| second_difference_at(p, i, dx)).collect()
}

/// Second difference at a single interior node.
#[inline]
pub fn second_difference_at(p: &[f64], i: usize, dx: f64) -> f64 {
    let right = if i + 1 < p.len() { (p[i + 1] - p[i]) / dx } else { 0.0 };
    let left = if i > 0 { (p[i] - p[i - 1]) / dx } else { 0.0 };
    (right - left) / dx
}
