use super::{TrainConfig, Weights};

/// One stochastic step with RMS-normalized per-weight rates:
///
/// `stats <- d·stats + (1-d)·g²`, `w <- w - base_rate·g / (sqrt(stats) + eps)`.
///
/// `stats` has the same shape as the weights and is updated in place.
pub fn online_update(w: &mut Weights, g: &Weights, stats: &mut Weights, cfg: &TrainConfig) {
    let d = cfg.adapt_decay;
    for ((ws, gs), ss) in w.slices_mut().into_iter().zip(g.slices()).zip(stats.slices_mut()) {
        for ((wi, &gi), si) in ws.iter_mut().zip(gs).zip(ss.iter_mut()) {
            *si = d * *si + (1.0 - d) * gi * gi;
            *wi -= cfg.base_rate * gi / (libm::sqrt(*si) + cfg.epsilon);
        }
    }
}
