//! Training / validation / test splitting by maximum dissimilarity.
//!
//! The splitter works on normalized feature vectors and Euclidean distance.
//! The default `mdfis` strategy:
//!
//! 1. takes the test rows from an explicit list, or selects them greedily by
//!    maximin from all rows;
//! 2. drops rows whose API group (counted on the remaining rows) is smaller
//!    than the threshold from the validation candidate pool; these rows always
//!    end up in training;
//! 3. draws `n_initial` random candidates from the pool and keeps the most
//!    central one (smallest distance to its nearest pool neighbour) as the
//!    first validation row;
//! 4. grows the validation set greedily, each step adding the pool row with
//!    the best [`SelectionCost`] score against the rows already chosen.
//!
//! The cost function is pluggable. [`MaximinCost`] (maximize the distance to
//! the nearest selected row) is the default and the only cost shipped here.
//!
//! All ties resolve to the lowest row index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Scores a candidate row against the already selected rows; the greedy
/// step picks the highest score.
pub trait SelectionCost {
    /// `distances` holds the candidate's distance to every selected row. It is
    /// empty when nothing has been selected yet.
    fn score(&self, distances: &[f64]) -> f64;
}

/// Classical maximin: the distance to the nearest selected row.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaximinCost;

impl SelectionCost for MaximinCost {
    fn score(&self, distances: &[f64]) -> f64 {
        distances.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Seeded shuffle.
    Random,
    /// Random initial row and maximin growth, no small-group filter.
    Maximin,
    /// Small-group filter, representative initial row, maximin growth.
    #[default]
    Mdfis,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Random => "random",
            Strategy::Maximin => "maximin",
            Strategy::Mdfis => "mdfis",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "maximin" => Ok(Strategy::Maximin),
            "mdfis" => Ok(Strategy::Mdfis),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected random, maximin or mdfis)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub n_validation: usize,
    pub n_test: usize,
    pub small_group_threshold: usize,
    pub n_initial: usize,
    pub seed: u64,
    /// Explicit test rows; when set, its length must equal `n_test`.
    pub test_indices: Option<Vec<usize>>,
    pub strategy: Strategy,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_validation: 20,
            n_test: 20,
            small_group_threshold: 3,
            n_initial: 1,
            seed: 0,
            test_indices: None,
            strategy: Strategy::Mdfis,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self, rows: usize) -> Result<()> {
        if self.n_validation + self.n_test >= rows {
            return Err(Error::Config(format!(
                "n_validation ({}) + n_test ({}) must be smaller than the {rows} eligible rows",
                self.n_validation, self.n_test
            )));
        }
        if self.small_group_threshold == 0 {
            return Err(Error::Config(
                "small_group_threshold must be at least 1".into(),
            ));
        }
        if self.n_initial == 0 {
            return Err(Error::Config("n_initial must be at least 1".into()));
        }
        if let Some(test) = &self.test_indices {
            if test.len() != self.n_test {
                return Err(Error::Config(format!(
                    "{} explicit test rows given but n_test is {}",
                    test.len(),
                    self.n_test
                )));
            }
            let mut sorted = test.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != test.len() {
                return Err(Error::Config(
                    "explicit test rows contain duplicates".into(),
                ));
            }
            if let Some(&bad) = sorted.last().filter(|&&r| r >= rows) {
                return Err(Error::Config(format!(
                    "test row {bad} out of range 0..{rows}"
                )));
            }
        }
        Ok(())
    }
}

/// Row indices of the three sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitResult {
    /// Checks that the three sets partition `0..rows`.
    pub fn check_partition(&self, rows: usize) -> Result<()> {
        let mut seen = vec![false; rows];
        for &r in self.train.iter().chain(&self.validation).chain(&self.test) {
            if r >= rows {
                return Err(Error::Config(format!(
                    "split row {r} out of range 0..{rows}"
                )));
            }
            if std::mem::replace(&mut seen[r], true) {
                return Err(Error::Config(format!("split row {r} appears twice")));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("split does not cover row {missing}")));
        }
        Ok(())
    }

    /// Maps row indices through `f` (e.g. rows → corpus records).
    pub fn map(&self, f: impl Fn(usize) -> usize) -> SplitResult {
        let m = |v: &[usize]| v.iter().map(|&r| f(r)).collect();
        SplitResult {
            train: m(&self.train),
            validation: m(&self.validation),
            test: m(&self.test),
        }
    }

    /// The split file: `train:`, `validation:` and `test:` lines followed by
    /// comma-separated indices.
    pub fn to_file_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        format!(
            "train:{}\nvalidation:{}\ntest:{}\n",
            join(&self.train),
            join(&self.validation),
            join(&self.test)
        )
    }

    pub fn from_file_text(text: &str) -> Result<SplitResult> {
        const KIND: &str = "split";
        let mut sets: [Option<Vec<usize>>; 3] = [None, None, None];
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once(':')
                .ok_or_else(|| Error::format(KIND, i + 1, "expected `name: indices`"))?;
            let slot = match key.trim() {
                "train" => 0,
                "validation" => 1,
                "test" => 2,
                other => return Err(Error::format(KIND, i + 1, format!("unknown set `{other}`"))),
            };
            let parsed = parse_index_list(values).map_err(|m| Error::format(KIND, i + 1, m))?;
            if sets[slot].replace(parsed).is_some() {
                return Err(Error::format(
                    KIND,
                    i + 1,
                    format!("set `{}` repeated", key.trim()),
                ));
            }
        }
        let [train, validation, test] = sets;
        let missing = |name| Error::format(KIND, 0, format!("missing `{name}:` line"));
        Ok(SplitResult {
            train: train.ok_or_else(|| missing("train"))?,
            validation: validation.ok_or_else(|| missing("validation"))?,
            test: test.ok_or_else(|| missing("test"))?,
        })
    }
}

/// Parses comma- or whitespace-separated indices.
pub fn parse_index_list(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("`{s}` is not an index")))
        .collect()
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Splits rows into (eligible pool, protected) by API group size. Both lists
/// come back sorted.
pub fn small_group_filter(
    groups: &BTreeMap<String, Vec<usize>>,
    threshold: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut pool = Vec::new();
    let mut protected = Vec::new();
    for rows in groups.values() {
        if rows.len() < threshold {
            protected.extend_from_slice(rows);
        } else {
            pool.extend_from_slice(rows);
        }
    }
    pool.sort_unstable();
    protected.sort_unstable();
    (pool, protected)
}

/// Pairwise Euclidean distances between all points.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = euclidean_distance(&points[i], &points[j])?;
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Ok(DistanceMatrix { n, d })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Picks a representative starting row: among `n_initial` random pool rows,
/// the one closest to its nearest other pool row.
pub fn select_initial(
    dist: &DistanceMatrix,
    pool: &[usize],
    n_initial: usize,
    seed: u64,
) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    select_initial_with(dist, pool, n_initial, &mut rng)
}

fn select_initial_with(
    dist: &DistanceMatrix,
    pool: &[usize],
    n_initial: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::Config(
            "cannot select an initial row from an empty pool".into(),
        ));
    }
    let candidates: Vec<usize> = pool
        .choose_multiple(rng, n_initial.max(1).min(pool.len()))
        .copied()
        .collect();
    let nearest = |c: usize| {
        pool.iter()
            .filter(|&&r| r != c)
            .map(|&r| dist.get(c, r))
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = candidates[0];
    let mut best_d = nearest(best);
    for &c in &candidates[1..] {
        let d = nearest(c);
        if d < best_d || (d == best_d && c < best) {
            best = c;
            best_d = d;
        }
    }
    Ok(best)
}

/// Greedy selection of `k` rows from `pool` with the default maximin cost.
pub fn maximin_select(
    dist: &DistanceMatrix,
    pool: &[usize],
    selected_init: &[usize],
    k: usize,
) -> Result<Vec<usize>> {
    greedy_select(dist, pool, selected_init, k, &MaximinCost)
}

/// Greedy selection of `k` rows from `pool`. Each step scores every
/// remaining pool row against `selected_init` plus the rows chosen so far and
/// takes the highest score (lowest row index on ties). Returns the chosen rows
/// in selection order.
pub fn greedy_select(
    dist: &DistanceMatrix,
    pool: &[usize],
    selected_init: &[usize],
    k: usize,
    cost: &dyn SelectionCost,
) -> Result<Vec<usize>> {
    if k > pool.len() {
        return Err(Error::Config(format!(
            "cannot select {k} rows from a pool of {}",
            pool.len()
        )));
    }
    let mut remaining: Vec<usize> = pool.to_vec();
    remaining.sort_unstable();
    let mut selected: Vec<usize> = selected_init.to_vec();
    let mut chosen = Vec::with_capacity(k);
    let mut distances = Vec::new();
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &r) in remaining.iter().enumerate() {
            distances.clear();
            distances.extend(selected.iter().map(|&s| dist.get(r, s)));
            let score = cost.score(&distances);
            // `remaining` is sorted, so strict > keeps the lowest index on ties.
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((pos, score));
            }
        }
        let (pos, _) = best.expect("k <= pool size");
        let r = remaining.remove(pos);
        selected.push(r);
        chosen.push(r);
    }
    Ok(chosen)
}

/// Splits `points` (one normalized vector per row) into training, validation
/// and test sets. `groups` maps API name to the rows of that API.
pub fn split(
    points: &[Vec<f64>],
    groups: &BTreeMap<String, Vec<usize>>,
    config: &SplitConfig,
) -> Result<SplitResult> {
    let n = points.len();
    config.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let result = match config.strategy {
        Strategy::Random => random_split(n, config, &mut rng),
        Strategy::Maximin | Strategy::Mdfis => {
            let dist = DistanceMatrix::new(points)?;
            dissimilarity_split(&dist, groups, config, &mut rng)?
        }
    };
    result.check_partition(n)?;
    Ok(result)
}

fn random_split(n: usize, config: &SplitConfig, rng: &mut ChaCha8Rng) -> SplitResult {
    let test = config.test_indices.clone().unwrap_or_default();
    let mut rest: Vec<usize> = (0..n).filter(|r| !test.contains(r)).collect();
    rest.shuffle(rng);
    let take_test = if config.test_indices.is_some() {
        0
    } else {
        config.n_test
    };
    let mut test = test;
    test.extend_from_slice(&rest[..take_test]);
    let validation = rest[take_test..take_test + config.n_validation].to_vec();
    let train = rest[take_test + config.n_validation..].to_vec();
    sorted(train, validation, test)
}

fn dissimilarity_split(
    dist: &DistanceMatrix,
    groups: &BTreeMap<String, Vec<usize>>,
    config: &SplitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SplitResult> {
    let n = dist.len();
    let filtered = config.strategy == Strategy::Mdfis;
    let n_initial = if filtered { config.n_initial } else { 1 };

    let all: Vec<usize> = (0..n).collect();
    let test = match &config.test_indices {
        Some(t) => t.clone(),
        None => seeded_greedy(dist, &all, config.n_test, n_initial, rng)?,
    };

    let mut is_test = vec![false; n];
    for &t in &test {
        is_test[t] = true;
    }
    let remainder_groups: BTreeMap<String, Vec<usize>> = groups
        .iter()
        .map(|(name, rows)| {
            let kept: Vec<usize> = rows.iter().copied().filter(|&r| !is_test[r]).collect();
            (name.clone(), kept)
        })
        .filter(|(_, rows)| !rows.is_empty())
        .collect();
    let covered: usize = remainder_groups.values().map(Vec::len).sum();
    if covered != n - test.len() {
        return Err(Error::Config(format!(
            "API groups cover {covered} of the {} non-test rows",
            n - test.len()
        )));
    }
    let threshold = if filtered {
        config.small_group_threshold
    } else {
        1
    };
    let (pool, _protected) = small_group_filter(&remainder_groups, threshold);
    if pool.len() < config.n_validation || pool.is_empty() {
        return Err(Error::Config(format!(
            "only {} rows remain outside small API groups (threshold {threshold}); {} validation rows requested",
            pool.len(),
            config.n_validation
        )));
    }
    let validation = seeded_greedy(dist, &pool, config.n_validation, n_initial, rng)?;
    let mut in_validation = vec![false; n];
    for &v in &validation {
        in_validation[v] = true;
    }
    let train = (0..n)
        .filter(|&r| !is_test[r] && !in_validation[r])
        .collect();
    Ok(sorted(train, validation, test))
}

/// Initial row from `select_initial`, then `k - 1` maximin rows.
fn seeded_greedy(
    dist: &DistanceMatrix,
    pool: &[usize],
    k: usize,
    n_initial: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let first = select_initial_with(dist, pool, n_initial, rng)?;
    let rest: Vec<usize> = pool.iter().copied().filter(|&r| r != first).collect();
    let mut chosen = vec![first];
    chosen.extend(maximin_select(dist, &rest, &[first], k - 1)?);
    Ok(chosen)
}

fn sorted(mut train: Vec<usize>, mut validation: Vec<usize>, mut test: Vec<usize>) -> SplitResult {
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    SplitResult {
        train,
        validation,
        test,
    }
}
