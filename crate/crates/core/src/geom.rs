//! Small vector helpers on coordinate slices.
//!
//! Vertices live in flat `Vec<f64>` buffers with stride equal to the ambient
//! dimension, so everything here works on `&[f64]` of length 2..4.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn normalize(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    scale(a, 1.0 / n)
}

pub fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Triangle area in any ambient dimension, via the Gram determinant.
pub fn triangle_area(p0: &[f64], p1: &[f64], p2: &[f64]) -> f64 {
    let u = sub(p1, p0);
    let v = sub(p2, p0);
    let uu = dot(&u, &u);
    let vv = dot(&v, &v);
    let uv = dot(&u, &v);
    let g = uu * vv - uv * uv;
    0.5 * g.max(0.0).sqrt()
}

/// Cotangent of the angle at `apex` in the triangle (`apex`, `a`, `b`).
pub fn cotangent(apex: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let u = sub(a, apex);
    let v = sub(b, apex);
    let c = dot(&u, &v);
    let uu = dot(&u, &u);
    let vv = dot(&v, &v);
    let s2 = (uu * vv - c * c).max(0.0);
    c / s2.sqrt().max(f64::MIN_POSITIVE)
}

/// Circumcenter of three points in 2- or 3-space, solved in their own plane.
/// Returns `None` for (near-)collinear input.
pub fn circumcenter(a: &[f64], b: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    let u = sub(b, a);
    let v = sub(c, a);
    let uu = dot(&u, &u);
    let vv = dot(&v, &v);
    let uv = dot(&u, &v);
    let det = uu * vv - uv * uv;
    if det <= 1e-14 * uu.max(vv).powi(2).max(f64::MIN_POSITIVE) {
        return None;
    }
    // Center = a + s*u + t*v from |p-a|^2 = |p-b|^2 = |p-c|^2.
    let s = 0.5 * (vv * uu - uv * vv) / det;
    let t = 0.5 * (uu * vv - uv * uu) / det;
    let mut p = a.to_vec();
    axpy(&mut p, s, &u);
    axpy(&mut p, t, &v);
    Some(p)
}

/// Signed volume contribution of an origin-based tetrahedron over a triangle
/// in 3-space; summing over a closed mesh gives its enclosed volume.
pub fn signed_tet_volume(p0: &[f64], p1: &[f64], p2: &[f64]) -> f64 {
    let c = cross3(p1, p2);
    dot(p0, &c) / 6.0
}
