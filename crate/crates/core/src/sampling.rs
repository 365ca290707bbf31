//! Random coordinate subsets: serial, b-nice and (C,b)-distributed sampling.
//!
//! All three have uniform marginals `b/n`. Draws take an explicit generator so
//! that a draw is a pure function of the generator state. The solver hands
//! every iteration its own stream (see [`iteration_rng`]).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest support [`SamplingScheme::enumerate_support`] will materialize.
pub const SUPPORT_LIMIT: usize = 100_000;

/// The generator for iteration `t` of a run seeded with `seed`.
///
/// ChaCha8 keyed by the seed, with the iteration index as the stream id, so
/// iteration `t` sees the same numbers no matter how earlier iterations were
/// scheduled.
pub fn iteration_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingScheme {
    Serial { n: usize },
    Nice { n: usize, b: usize },
    Distributed { n: usize, b: usize, partition: Vec<Vec<usize>> },
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingScheme::Serial { n } => write!(f, "serial(n={n})"),
            SamplingScheme::Nice { n, b } => write!(f, "nice(n={n}, b={b})"),
            SamplingScheme::Distributed { n, b, partition } => {
                write!(f, "distributed(n={n}, C={}, b={b})", partition.len())
            }
        }
    }
}

impl SamplingScheme {
    pub fn serial(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSampling("n must be at least 1".into()));
        }
        Ok(SamplingScheme::Serial { n })
    }

    pub fn nice(n: usize, b: usize) -> Result<Self> {
        if b == 0 || b > n {
            return Err(Error::InvalidSampling(format!("batch size {b} must be in 1..={n}")));
        }
        Ok(SamplingScheme::Nice { n, b })
    }

    /// `(C, b)`-distributed sampling over contiguous blocks of `n/C`.
    pub fn distributed(n: usize, machines: usize, b: usize) -> Result<Self> {
        check_distributed(n, machines, b)?;
        let cell = n / machines;
        let partition = (0..machines).map(|c| (c * cell..(c + 1) * cell).collect()).collect();
        Ok(SamplingScheme::Distributed { n, b, partition })
    }

    /// Distributed sampling over an explicit partition.
    pub fn distributed_with_partition(n: usize, b: usize, partition: Vec<Vec<usize>>) -> Result<Self> {
        let machines = partition.len();
        check_distributed(n, machines, b)?;
        let cell = n / machines;
        let mut seen = vec![false; n];
        let mut partition = partition;
        for (c, members) in partition.iter_mut().enumerate() {
            if members.len() != cell {
                return Err(Error::InvalidSampling(format!(
                    "partition cell {c} has {} members, expected {cell}",
                    members.len()
                )));
            }
            members.sort_unstable();
            for &i in members.iter() {
                if i >= n || seen[i] {
                    return Err(Error::InvalidSampling(format!(
                        "coordinate {i} is out of range or assigned twice"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(SamplingScheme::Distributed { n, b, partition })
    }

    /// Distributed sampling from a per-coordinate cell assignment
    /// (`cells[i]` is the machine of coordinate `i`).
    pub fn distributed_from_assignment(b: usize, machines: usize, cells: &[usize]) -> Result<Self> {
        let mut partition = vec![Vec::new(); machines];
        for (i, &c) in cells.iter().enumerate() {
            if c >= machines {
                return Err(Error::InvalidSampling(format!(
                    "coordinate {i} assigned to cell {c}, but only {machines} cells exist"
                )));
            }
            partition[c].push(i);
        }
        Self::distributed_with_partition(cells.len(), b, partition)
    }

    /// Reads a partition file with one cell id per line.
    pub fn read_assignment<P: AsRef<Path>>(path: P) -> Result<Vec<usize>> {
        let text = std::fs::read_to_string(path)?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(k, l)| {
                l.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: k + 1,
                    msg: format!("malformed cell id '{}'", l.trim()),
                })
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        match self {
            SamplingScheme::Serial { n } | SamplingScheme::Nice { n, .. } | SamplingScheme::Distributed { n, .. } => *n,
        }
    }

    /// Expected (and exact) batch size.
    pub fn batch_size(&self) -> usize {
        match self {
            SamplingScheme::Serial { .. } => 1,
            SamplingScheme::Nice { b, .. } | SamplingScheme::Distributed { b, .. } => *b,
        }
    }

    /// Number of machines (1 unless distributed).
    pub fn machines(&self) -> usize {
        match self {
            SamplingScheme::Distributed { partition, .. } => partition.len(),
            _ => 1,
        }
    }

    pub fn partition(&self) -> Option<&[Vec<usize>]> {
        match self {
            SamplingScheme::Distributed { partition, .. } => Some(partition),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SamplingScheme::Serial { .. } => "serial",
            SamplingScheme::Nice { .. } => "nice",
            SamplingScheme::Distributed { .. } => "distributed",
        }
    }

    /// Draws one subset; indices are sorted and distinct.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        match self {
            SamplingScheme::Serial { n } => vec![rng.random_range(0..*n)],
            SamplingScheme::Nice { n, b } => {
                let mut s = partial_shuffle(*n, *b, rng);
                s.sort_unstable();
                s
            }
            SamplingScheme::Distributed { b, partition, .. } => {
                let per_cell = b / partition.len();
                let mut s = Vec::with_capacity(*b);
                for cell in partition {
                    s.extend(partial_shuffle(cell.len(), per_cell, rng).into_iter().map(|k| cell[k]));
                }
                s.sort_unstable();
                s
            }
        }
    }

    /// `P(i ∈ S) = b/n`.
    pub fn marginal(&self, i: usize) -> Result<f64> {
        let n = self.n();
        if i >= n {
            return Err(Error::Dimension { expected: n, got: i });
        }
        Ok(self.batch_size() as f64 / n as f64)
    }

    /// Number of subsets in the support.
    pub fn support_size(&self) -> f64 {
        match self {
            SamplingScheme::Serial { n } => *n as f64,
            SamplingScheme::Nice { n, b } => binomial(*n, *b),
            SamplingScheme::Distributed { n, b, partition } => {
                let c = partition.len();
                binomial(n / c, b / c).powi(c as i32)
            }
        }
    }

    /// Every subset in the support with its probability.
    pub fn enumerate_support(&self) -> Result<Vec<(Vec<usize>, f64)>> {
        let size = self.support_size();
        if size > SUPPORT_LIMIT as f64 {
            return Err(Error::SupportTooLarge {
                size,
                limit: SUPPORT_LIMIT,
            });
        }
        let sets: Vec<Vec<usize>> = match self {
            SamplingScheme::Serial { n } => (0..*n).map(|i| vec![i]).collect(),
            SamplingScheme::Nice { n, b } => combinations(&(0..*n).collect::<Vec<_>>(), *b),
            SamplingScheme::Distributed { b, partition, .. } => {
                let per_cell = b / partition.len();
                let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
                for cell in partition {
                    let local = combinations(cell, per_cell);
                    acc = acc
                        .iter()
                        .flat_map(|prefix| {
                            local.iter().map(move |l| {
                                let mut s = prefix.clone();
                                s.extend_from_slice(l);
                                s
                            })
                        })
                        .collect();
                }
                for s in &mut acc {
                    s.sort_unstable();
                }
                acc
            }
        };
        let p = 1.0 / sets.len() as f64;
        Ok(sets.into_iter().map(|s| (s, p)).collect())
    }
}

fn check_distributed(n: usize, machines: usize, b: usize) -> Result<()> {
    if machines == 0 {
        return Err(Error::InvalidSampling("machine count must be at least 1".into()));
    }
    if n % machines != 0 {
        return Err(Error::InvalidSampling(format!(
            "machine count {machines} does not divide n = {n}"
        )));
    }
    if b == 0 || b % machines != 0 {
        return Err(Error::InvalidSampling(format!(
            "machine count {machines} does not divide batch size {b}"
        )));
    }
    if b > n {
        return Err(Error::InvalidSampling(format!("batch size {b} exceeds n = {n}")));
    }
    Ok(())
}

/// First `k` entries of a uniformly shuffled `0..n`, via Fisher–Yates on a
/// virtual identity array (only swapped slots are stored), O(k).
fn partial_shuffle<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * k);
    let mut out = Vec::with_capacity(k);
    for pos in 0..k {
        let j = rng.random_range(pos..n);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_pos = *swapped.get(&pos).unwrap_or(&pos);
        swapped.insert(j, at_pos);
        out.push(at_j);
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let need = k - cur.len();
        for i in start..=items.len() - need {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}
