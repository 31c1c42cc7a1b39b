use rand::Rng;

/// Writes `exp(eta * theta_j) / sum_k exp(eta * theta_k)` into `out`.
///
/// Exponents are shifted by the maximum so long horizons, where `eta * theta`
/// runs arbitrarily negative, never underflow the whole vector.
pub fn softmax_into(theta: &[f64], eta: f64, out: &mut [f64]) {
    debug_assert_eq!(theta.len(), out.len());
    let max = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &th) in out.iter_mut().zip(theta) {
        *o = (eta * (th - max)).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax(theta: &[f64], eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; theta.len()];
    softmax_into(theta, eta, &mut out);
    out
}

/// Draws an index from a probability vector by inversion.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // Rounding left the cumulative sum just under u; take the last index
    // with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
