//! Admissible sequences by farthest-point expansion and the gamma_2 functional of a
//! given sequence.

use rand::Rng;

use crate::function_class::{dist2, DistanceOracle, FunctionClass, PointSet};

/// `2^{2^s}`, saturating; level 0 is fixed to a single point.
pub fn level_cap(s: usize) -> usize {
    if s == 0 {
        1
    } else if s >= 6 {
        usize::MAX
    } else {
        1usize.checked_shl(1u32 << s).unwrap_or(usize::MAX)
    }
}

/// Smallest `s` with `2^{2^s} >= n`.
pub fn saturation_level(n: usize) -> usize {
    (0..).find(|&s| level_cap(s) >= n).expect("caps grow without bound")
}

/// Nested levels `H_0 ⊆ H_1 ⊆ ...` over a carrier, with nearest-point projections.
#[derive(Clone, Debug)]
pub struct AdmissibleSequence {
    n: usize,
    /// Farthest-point order; level `s` is the prefix of length `sizes[s]`.
    order: Vec<usize>,
    sizes: Vec<usize>,
    /// `proj[s][v]`: carrier index of `pi_s v`, for levels below saturation.
    proj: Vec<Vec<u32>>,
    /// Position of each carrier index in `order` (`u32::MAX` when never chosen).
    rank: Vec<u32>,
}

impl AdmissibleSequence {
    pub fn carrier_len(&self) -> usize {
        self.n
    }

    /// Index of the last level.
    pub fn s_max(&self) -> usize {
        self.sizes.len() - 1
    }

    /// First level equal to the whole carrier.
    pub fn saturation(&self) -> usize {
        self.proj.len()
    }

    pub fn level_size(&self, s: usize) -> usize {
        self.sizes[s.min(self.s_max())]
    }

    /// Carrier indices of `H_s`.
    pub fn level(&self, s: usize) -> Vec<usize> {
        if s >= self.saturation() {
            (0..self.n).collect()
        } else {
            self.order[..self.sizes[s]].to_vec()
        }
    }

    /// Carrier index of `pi_s v`.
    #[inline]
    pub fn project(&self, s: usize, v: usize) -> usize {
        match self.proj.get(s) {
            Some(p) => p[v] as usize,
            None => v,
        }
    }

    /// Position of `pi_s v` inside `H_s` (its rank in the level).
    pub fn project_position(&self, s: usize, v: usize) -> usize {
        let c = self.project(s, v);
        if s >= self.saturation() {
            c
        } else {
            self.rank[c] as usize
        }
    }

    /// `Delta_s v = pi_{s+1} v - pi_s v` as a vector of `points`.
    pub fn increment(&self, s: usize, v: usize, points: &PointSet) -> Vec<f64> {
        let a = points.row(self.project(s + 1, v));
        let b = points.row(self.project(s, v));
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    /// Center of `H_0`.
    pub fn root(&self) -> usize {
        self.order[0]
    }
}

/// Exact 1-center (minimax point) with smallest-index ties.
pub fn one_center(emb: &PointSet) -> usize {
    let n = emb.len();
    let d = emb.dim();
    let mut centroid = vec![0.0; d];
    for r in emb.rows() {
        for k in 0..d {
            centroid[k] += r[k] / n as f64;
        }
    }
    let dc: Vec<f64> = emb.rows().map(|r| dist2(r, &centroid)).collect();
    let mut far: Vec<usize> = (0..n).collect();
    far.sort_by(|&a, &b| dc[b].total_cmp(&dc[a]).then(a.cmp(&b)));
    let mut near = far.clone();
    near.reverse();
    let mut best = f64::INFINITY;
    let mut best_i = usize::MAX;
    for &c in &near {
        let p = emb.row(c);
        let mut r = 0.0f64;
        let mut complete = true;
        for &j in &far {
            r = r.max(dist2(p, emb.row(j)));
            if r > best {
                complete = false;
                break;
            }
        }
        if complete && (r < best || (r == best && c < best_i)) {
            best = r;
            best_i = c;
        }
    }
    best_i
}

/// Builds the sequence on a carrier given in coordinates where the metric is Euclidean.
/// `s_max` defaults to the saturation level.
pub fn build_on_embedded(emb: &PointSet, s_max: Option<usize>) -> AdmissibleSequence {
    let root = one_center(emb);
    build_from_root(emb, root, s_max, |mind, _| argmax_first(mind))
}

fn argmax_first(mind: &[f64]) -> usize {
    let mut best = 0;
    let mut bd = f64::NEG_INFINITY;
    for (i, &m) in mind.iter().enumerate() {
        if m > bd {
            bd = m;
            best = i;
        }
    }
    best
}

fn build_from_root<F>(emb: &PointSet, root: usize, s_max: Option<usize>, mut next: F) -> AdmissibleSequence
where
    F: FnMut(&[f64], usize) -> usize,
{
    let n = emb.len();
    let sat = saturation_level(n);
    let s_max = s_max.unwrap_or(sat).max(sat);
    let mut sizes: Vec<usize> = (0..=s_max).map(|s| level_cap(s).min(n)).collect();
    sizes[sat..].iter_mut().for_each(|x| *x = n);
    let target = sizes[..sat].last().copied().unwrap_or(1).max(1);
    let mut order = vec![root];
    let mut mind: Vec<f64> = (0..n).map(|i| dist2(emb.row(i), emb.row(root))).collect();
    let mut nearest: Vec<u32> = vec![root as u32; n];
    let mut proj = Vec::with_capacity(sat);
    let mut s = 0;
    while s < sat && sizes[s] == order.len() {
        proj.push(nearest.clone());
        s += 1;
    }
    while s < sat {
        let c = next(&mind, order.len());
        order.push(c);
        let pc = emb.row(c);
        for i in 0..n {
            let dd = dist2(emb.row(i), pc);
            if dd < mind[i] || (dd == mind[i] && (c as u32) < nearest[i]) {
                mind[i] = dd;
                nearest[i] = c as u32;
            }
        }
        while s < sat && sizes[s] == order.len() {
            proj.push(nearest.clone());
            s += 1;
        }
        debug_assert!(order.len() <= target);
    }
    let mut rank = vec![u32::MAX; n];
    for (k, &c) in order.iter().enumerate() {
        rank[c] = k as u32;
    }
    AdmissibleSequence {
        n,
        order,
        sizes,
        proj,
        rank,
    }
}

/// Greedy construction; nearest points under `metric`.
pub fn build_admissible_sequence(
    carrier: &FunctionClass,
    metric: &DistanceOracle,
    s_max: Option<usize>,
) -> AdmissibleSequence {
    build_on_embedded(&metric.embed(carrier.points()), s_max)
}

/// Greedy sequence plus `restarts` randomized variants (random root, farthest point
/// chosen among the three farthest); returns the one with the smallest gamma_2 under
/// `rho` (Euclidean coordinates).
pub fn build_best_of<R: Rng + ?Sized>(
    emb: &PointSet,
    rho: &PointSet,
    restarts: usize,
    rng: &mut R,
) -> AdmissibleSequence {
    let mut best = build_on_embedded(emb, None);
    let mut best_g = gamma2(&best, rho);
    for _ in 0..restarts {
        let seq = randomized(emb, rng);
        let g = gamma2(&seq, rho);
        if g < best_g {
            best = seq;
            best_g = g;
        }
    }
    best
}

pub(crate) fn randomized<R: Rng + ?Sized>(emb: &PointSet, rng: &mut R) -> AdmissibleSequence {
    let root = rng.random_range(0..emb.len());
    build_from_root(emb, root, None, |mind, _| {
        let mut top: Vec<usize> = (0..mind.len()).filter(|&i| mind[i] > 0.0).collect();
        top.sort_by(|&a, &b| mind[b].total_cmp(&mind[a]));
        top.truncate(3);
        if top.is_empty() {
            argmax_first(mind)
        } else {
            top[rng.random_range(0..top.len())]
        }
    })
}

/// `sup_v sum_s 2^{s/2} rho(pi_s v, pi_{s+1} v)` for this sequence, with `rho` the
/// Euclidean metric of `rho_points` (the carrier in rho-isometric coordinates).
pub fn gamma2(seq: &AdmissibleSequence, rho_points: &PointSet) -> f64 {
    let sat = seq.saturation();
    let mut best = 0.0f64;
    for v in 0..seq.carrier_len() {
        let mut sum = 0.0;
        for s in 0..sat {
            let a = seq.project(s, v);
            let b = seq.project(s + 1, v);
            if a != b {
                sum += 2f64.powf(s as f64 / 2.0) * dist2(rho_points.row(a), rho_points.row(b)).sqrt();
            }
        }
        best = best.max(sum);
    }
    best
}
