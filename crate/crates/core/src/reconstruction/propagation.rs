//! Red/black spatio-temporal propagation with random refinement.
//!
//! A pixel `(x, y, f)` is red when `x + y + f` is even and black otherwise.
//! Its neighbours are the four 4-connected pixels of frame `f` and the
//! same pixel in frames `f − 1` and `f + 1`; all six have the opposite
//! colour, so every pixel of one colour can be updated at the same time
//! from a frozen snapshot of the other colour.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SolverConfig, SystemStore};
use crate::mueller::{cloude_filter, MuellerMatrix};
use crate::rng::{keyed_rng, stream};
use crate::video::MuellerVideo;

/// Up to six neighbour coordinates `(x, y, f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbors {
    items: [(usize, usize, usize); 6],
    len: usize,
}

impl Neighbors {
    pub fn as_slice(&self) -> &[(usize, usize, usize)] {
        &self.items[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn push(&mut self, p: (usize, usize, usize)) {
        self.items[self.len] = p;
        self.len += 1;
    }
}

/// Colour of a pixel: 0 for red, 1 for black.
pub fn color(x: usize, y: usize, f: usize) -> usize {
    (x + y + f) % 2
}

/// Neighbourhood of `(x, y, f)` in a `width × height × frames` video,
/// clipped at the borders. Order: left, right, up, down, previous, next.
pub fn spatio_temporal_neighbors(
    x: usize,
    y: usize,
    f: usize,
    width: usize,
    height: usize,
    frames: usize,
) -> Neighbors {
    let mut n = Neighbors {
        items: [(0, 0, 0); 6],
        len: 0,
    };
    if x > 0 {
        n.push((x - 1, y, f));
    }
    if x + 1 < width {
        n.push((x + 1, y, f));
    }
    if y > 0 {
        n.push((x, y - 1, f));
    }
    if y + 1 < height {
        n.push((x, y + 1, f));
    }
    if f > 0 {
        n.push((x, y, f - 1));
    }
    if f + 1 < frames {
        n.push((x, y, f + 1));
    }
    n
}

/// Counters collected during refinement.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub rounds: usize,
    pub propagation_accepts: usize,
    pub perturbation_accepts: usize,
    /// Updates whose recomputed cost exceeded the cost before the update.
    /// Always zero; kept as an inline check of the acceptance rule.
    pub cost_increases: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
}

struct Update {
    index: usize,
    matrix: MuellerMatrix,
    propagated: bool,
    perturbed: bool,
    before: f64,
    after: f64,
}

/// Multiplicative perturbation `M ⊙ (1 + σN)` with `N` drawn from the stream
/// keyed by `(seed, x, y, f, round)`.
pub fn perturb(m: &MuellerMatrix, sigma: f64, seed: u64, key: [u64; 4]) -> MuellerMatrix {
    let mut rng = keyed_rng(
        seed,
        &[stream::PERTURBATION, key[0], key[1], key[2], key[3]],
    );
    let mut noise = [[0.0; 4]; 4];
    for row in noise.iter_mut() {
        for v in row.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v = 1.0 + sigma * n;
        }
    }
    m.hadamard(&MuellerMatrix::from_rows(noise))
}

/// Refines `video` in place. `valid` pixels are the only propagation sources.
pub fn propagate_and_refine(
    video: &mut MuellerVideo,
    systems: &SystemStore,
    cfg: &SolverConfig,
) -> PropagationStats {
    let (w, h, frames) = (video.width, video.height, video.frames);
    let n = video.len();
    assert_eq!(n, systems.len(), "system store does not match the video");
    let mut stats = PropagationStats::default();
    let cost_of = |i: usize, m: &MuellerMatrix| systems.system(i).l1_cost(&m.to_vectorized());
    // Costs are gathered before summing so the total does not depend on how
    // rayon splits the range.
    let total_cost = |video: &MuellerVideo| -> f64 {
        let costs: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| cost_of(i, &video.matrices[i]))
            .collect();
        costs.iter().sum()
    };
    stats.initial_cost = total_cost(video);
    if cfg.skip_propagation && cfg.skip_perturbation {
        stats.final_cost = stats.initial_cost;
        return stats;
    }
    for round in 0..cfg.propagation_iterations {
        for phase in 0..2 {
            let current = &video.matrices;
            let valid = &video.valid;
            let updates: Vec<Update> = (0..n)
                .into_par_iter()
                .filter_map(|i| {
                    let (x, y, f) = video.coords(i);
                    if color(x, y, f) != phase || systems.count(i) == 0 {
                        return None;
                    }
                    let sys = systems.system(i);
                    let before = sys.l1_cost(&current[i].to_vectorized());
                    let mut best = current[i];
                    let mut best_cost = before;
                    let mut propagated = false;
                    let mut perturbed = false;
                    if !cfg.skip_propagation {
                        for &(nx, ny, nf) in
                            spatio_temporal_neighbors(x, y, f, w, h, frames).as_slice()
                        {
                            let j = (nf * h + ny) * w + nx;
                            if !valid[j] {
                                continue;
                            }
                            let c = sys.l1_cost(&current[j].to_vectorized());
                            if c < best_cost {
                                best = current[j];
                                best_cost = c;
                                propagated = true;
                            }
                        }
                    }
                    if !cfg.skip_perturbation && cfg.sigma > 0.0 {
                        let key = [x as u64, y as u64, f as u64, round as u64];
                        let raw = perturb(&best, cfg.sigma, cfg.seed, key);
                        let cand = if cfg.skip_cloude {
                            Ok(raw)
                        } else {
                            cloude_filter(&raw)
                        };
                        if let Ok(cand) = cand.and_then(|c| c.normalized()) {
                            let c = sys.l1_cost(&cand.to_vectorized());
                            if c < best_cost {
                                best = cand;
                                perturbed = true;
                            }
                        }
                    }
                    (propagated || perturbed).then(|| {
                        let after = sys.l1_cost(&best.to_vectorized());
                        Update {
                            index: i,
                            matrix: best,
                            propagated: propagated && !perturbed,
                            perturbed,
                            before,
                            after,
                        }
                    })
                })
                .collect();
            for u in updates {
                debug_assert!(u.after < u.before, "refinement raised a pixel cost");
                if !(u.after <= u.before) {
                    stats.cost_increases += 1;
                }
                if u.perturbed {
                    stats.perturbation_accepts += 1;
                } else if u.propagated {
                    stats.propagation_accepts += 1;
                }
                video.matrices[u.index] = u.matrix;
            }
        }
        stats.rounds += 1;
    }
    stats.final_cost = total_cost(video);
    stats
}
