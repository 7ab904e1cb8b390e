use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Magnitudes `|X_k|` of the unnormalized DFT `X_k = Σ_t x_t e^{-2πikt/n}`.
///
/// All `n` bins are returned. Mixed-radix and Bluestein plans keep every
/// length at `O(n log n)`.
pub fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}
