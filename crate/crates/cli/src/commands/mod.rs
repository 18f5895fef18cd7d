pub mod ablate;
pub mod aut;
pub mod gen;
pub mod run;

/// Mean and sample standard deviation (n-1 denominator) of a value series.
/// Empty input yields `(None, None)`; a single value has no spread.
pub(crate) fn run_stats(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() >= 2 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Some(var.sqrt())
    } else {
        None
    };
    (Some(mean), std)
}
