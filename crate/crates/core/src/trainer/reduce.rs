use crate::par::Exec;

/// Instances per gradient chunk. Chunk partial sums are added in chunk order,
/// which makes the reduction independent of thread scheduling.
pub(crate) const GRAD_CHUNK: usize = 8;

/// Sums per-instance gradient contributions into one buffer per network.
pub(crate) fn reduce_grads<F>(exec: Exec, n: usize, sizes: &[usize], f: F) -> Vec<Vec<f64>>
where
    F: Fn(usize, &mut [Vec<f64>]) + Sync + Send,
{
    let chunks = n.div_ceil(GRAD_CHUNK);
    let partial = exec.map_range(chunks, |c| {
        let mut bufs: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
        for i in c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(n) {
            f(i, &mut bufs);
        }
        bufs
    });
    let mut out: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    for bufs in partial {
        for (o, b) in out.iter_mut().zip(bufs) {
            for (x, y) in o.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    out
}
