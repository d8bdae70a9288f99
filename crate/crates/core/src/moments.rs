/// Arithmetic mean and population standard deviation, two-pass.
///
/// A row of identical values reports σ = 0 and μ = that value exactly.
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    let Some(&first) = v.first() else {
        return (f64::NAN, f64::NAN);
    };
    if v.iter().all(|&x| x == first) {
        return (first, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}
