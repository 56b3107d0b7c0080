//! Dense-vector kernels, generic over the element type.

use num_traits::Float;

pub fn dot<T: Float>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.to_f64().unwrap_or(0.0) * y.to_f64().unwrap_or(0.0)).sum()
}

pub fn l2_norm<T: Float>(v: &[T]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length in place. Returns `false` (leaving `v`
/// untouched) for the zero vector.
pub fn normalize<T: Float>(v: &mut [T]) -> bool {
    let norm = l2_norm(v);
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    let inv = T::from(1.0 / norm).expect("finite");
    for x in v.iter_mut() {
        *x = *x * inv;
    }
    true
}

/// Cosine similarity accumulated in double precision, clamped to [-1, 1].
/// Zero vectors have similarity 0 with everything.
pub fn cosine<T: Float>(a: &[T], b: &[T]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        return 0.0;
    }
    (dot(a, b) / denom).clamp(-1.0, 1.0)
}
