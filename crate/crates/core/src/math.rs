//! Small numeric helpers shared across modules.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn squared_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `dot / sqrt(|a|^2 |b|^2)`, clamped into [-1, 1].
///
/// Taking a single square root of the product keeps `cos(v, v) == 1.0`
/// bit-exact, since `sqrt(x * x) == x` under IEEE rounding.
pub(crate) fn cosine_from_parts(dot: f64, sq_a: f64, sq_b: f64) -> Option<f64> {
    if sq_a == 0.0 || sq_b == 0.0 {
        return None;
    }
    let denom = libm::sqrt(sq_a * sq_b);
    let c = if denom.is_finite() && denom > 0.0 {
        dot / denom
    } else {
        // product over/underflowed
        dot / (libm::sqrt(sq_a) * libm::sqrt(sq_b))
    };
    Some(c.clamp(-1.0, 1.0))
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    libm::sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow for large |x|.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}
