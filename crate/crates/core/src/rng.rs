//! Seed derivation. Every random stream in the crate comes from a master seed
//! plus a path of indices, so results are reproducible for a fixed worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `master` one index at a time.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(master: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Independent stream for worker `index` under `seed`.
pub fn worker_stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

/// Splits `0..n` into `workers` contiguous chunks (the first chunks get the remainder).
pub fn chunk_ranges(n: usize, workers: usize) -> Vec<std::ops::Range<usize>> {
    let w = workers.max(1).min(n.max(1));
    let base = n / w;
    let extra = n % w;
    let mut out = Vec::with_capacity(w);
    let mut start = 0;
    for i in 0..w {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Runs `job` on each chunk, one scoped thread per chunk, and returns results in chunk order.
pub fn run_chunks<T, F>(n: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, std::ops::Range<usize>) -> T + Sync,
{
    let ranges = chunk_ranges(n, workers);
    if ranges.len() == 1 {
        return vec![job(0, ranges[0].clone())];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, r)| {
                let job = &job;
                scope.spawn(move || job(i, r))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
