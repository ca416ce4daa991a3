/// Step between window starts: `round(window_size * (1 - overlap))`, rounding
/// half away from zero, never below 1.
pub fn stride_for(window_size: usize, overlap_fraction: f64) -> usize {
    let s = (window_size as f64 * (1.0 - overlap_fraction)).round();
    (s as usize).max(1)
}

/// Start offsets of every full window over a stream of `t` time steps.
pub fn window_offsets(t: usize, window_size: usize, overlap_fraction: f64) -> Vec<usize> {
    if window_size == 0 || t < window_size {
        return Vec::new();
    }
    let stride = stride_for(window_size, overlap_fraction);
    (0..=(t - window_size) / stride).map(|k| k * stride).collect()
}

/// Cuts a channel-major stream (`stream[ch * t + i]`) into channel-major
/// windows. A trailing remainder shorter than `window_size` is discarded.
pub fn window(
    stream: &[f64],
    channels: usize,
    window_size: usize,
    overlap_fraction: f64,
) -> Vec<Vec<f64>> {
    assert!(channels > 0 && stream.len() % channels == 0);
    assert!((0.0..1.0).contains(&overlap_fraction));
    let t = stream.len() / channels;
    window_offsets(t, window_size, overlap_fraction)
        .into_iter()
        .map(|start| {
            let mut w = Vec::with_capacity(channels * window_size);
            for ch in 0..channels {
                w.extend_from_slice(&stream[ch * t + start..ch * t + start + window_size]);
            }
            w
        })
        .collect()
}
