//! Acceptance gates for the whole workspace: one test per numbered
//! criterion, every tolerance pinned in code, no calibration left for
//! later. Each test prints a `criterion NN PASS|FAIL <name>` line (run
//! with `--nocapture` to see the PASS lines); a failing criterion panics
//! with the collected detail.
//!
//! Oracles here are deliberately independent of the library internals:
//! a factorial brute force for exact transport, a SplitMix64-driven
//! permutation sampler for the rank statistics, a closed form for the
//! sliced distance.

use std::env;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use eqalign::augment::{augment_prompts, AugmentConfig, SynonymDict};
use eqalign::dataset::{entry_ids, load_dataset, prompt_stats, split_dataset, SplitSpec};
use eqalign::density::{
    reflective_kantorovich, reflective_kde, scott_bandwidth, standard_kde, Bandwidth, GridDensity,
    KdeConfig,
};
use eqalign::evalstats::{
    boxplot_summary, compare, dunn_posthoc, evaluate, kruskal_wallis, kruskal_wallis_with,
    Correction, EvalRun, Metric, MetricConfig, PValueMethod, ALPHA_LEVELS,
};
use eqalign::recommend::{
    parse_coords, OracleReplay, ParseError, RandomGaussianBaseline, StaticPresetBaseline,
};
use eqalign::transport::{
    sinkhorn_divergence, sliced_w1, w1_assignment, w1_exact, CostPower, DiscreteMeasure,
    SinkhornConfig,
};
use eqalign::BeoCoord;

// ------------------------------------------------------------- reporting

struct Criterion {
    n: u32,
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(n: u32, name: &'static str) -> Self {
        Criterion { n, name, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(detail());
        }
    }

    fn note(&mut self, line: String) {
        println!("criterion {:02} note {}", self.n, line);
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("criterion {:02} PASS {}", self.n, self.name);
        } else {
            println!("criterion {:02} FAIL {}", self.n, self.name);
            for f in &self.failures {
                println!("    {f}");
            }
            panic!(
                "criterion {:02} ({}) failed:\n  {}",
                self.n,
                self.name,
                self.failures.join("\n  ")
            );
        }
    }
}

// --------------------------------------------------------------- helpers

fn pt(x: f64, y: f64) -> BeoCoord {
    BeoCoord::new(x, y).unwrap()
}

fn rand_pt(rng: &mut ChaCha8Rng) -> BeoCoord {
    pt(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0))
}

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

const CANONICAL_SPLIT: SplitSpec = SplitSpec { train_n: 60, val_n: 30, test_n: 30, seed: 7 };

/// Minimal average assignment cost over all n! pairings, unpruned.
fn factorial_minimum(a: &[BeoCoord], b: &[BeoCoord]) -> f64 {
    fn go(a: &[BeoCoord], b: &[BeoCoord], used: &mut [bool], i: usize, acc: f64, best: &mut f64) {
        if i == a.len() {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(a, b, used, i + 1, acc + a[i].dist(&b[j]), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; b.len()];
    go(a, b, &mut used, 0, 0.0, &mut best);
    best / a.len() as f64
}

// --------------------------------------------------- criteria 1-4: transport

#[test]
fn criterion_01_exact_transport_matches_factorial_brute_force() {
    let start = Instant::now();
    let mut c = Criterion::new(1, "exact transport matches factorial brute force");
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);
    for case in 0..200 {
        let n = rng.random_range(1..=6);
        let a: Vec<BeoCoord> = (0..n).map(|_| rand_pt(&mut rng)).collect();
        let b: Vec<BeoCoord> = (0..n).map(|_| rand_pt(&mut rng)).collect();
        let brute = factorial_minimum(&a, &b);

        let mu = DiscreteMeasure::uniform(a.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(b.clone()).unwrap();
        let (exact, _) = w1_exact(&mu, &nu).unwrap();
        let assigned = w1_assignment(&a, &b).unwrap();

        c.check((exact - brute).abs() <= 1e-9, || {
            format!("case {case}: w1_exact {exact} vs brute force {brute}")
        });
        c.check((assigned - brute).abs() <= 1e-9, || {
            format!("case {case}: w1_assignment {assigned} vs brute force {brute}")
        });
    }
    let elapsed = start.elapsed();
    c.check(elapsed.as_secs_f64() < 5.0, || {
        format!("runtime {:.2}s exceeds the 5s budget", elapsed.as_secs_f64())
    });
    c.finish();
}

fn rand_measure(rng: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteMeasure {
    let n = rng.random_range(1..=max_atoms);
    let points: Vec<BeoCoord> = (0..n).map(|_| rand_pt(rng)).collect();
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    DiscreteMeasure::new(points, weights).unwrap()
}

#[test]
fn criterion_02_w1_satisfies_the_metric_axioms() {
    let mut c = Criterion::new(2, "w1_exact satisfies the metric axioms");
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);
    for case in 0..100 {
        let a = rand_measure(&mut rng, 50);
        let b = rand_measure(&mut rng, 50);
        let t = rand_measure(&mut rng, 50);

        let dist = |x: &DiscreteMeasure, y: &DiscreteMeasure| w1_exact(x, y).unwrap().0;
        let ab = dist(&a, &b);
        let ba = dist(&b, &a);
        let self_a = dist(&a, &a);
        let at = dist(&a, &t);
        let tb = dist(&t, &b);

        c.check((ab - ba).abs() <= 1e-9, || {
            format!("triple {case}: symmetry error {}", (ab - ba).abs())
        });
        c.check(self_a <= 1e-9, || format!("triple {case}: self-distance {self_a}"));
        c.check(at + tb - ab >= -1e-9, || {
            format!("triple {case}: triangle slack {}", at + tb - ab)
        });
    }
    c.finish();
}

#[test]
fn criterion_03_sinkhorn_tracks_w1_and_stays_nonnegative() {
    let start = Instant::now();
    let mut c = Criterion::new(3, "sinkhorn divergence tracks w1 within 5% + 0.01");
    let cfg = SinkhornConfig {
        epsilon: 0.01,
        max_iters: 100_000,
        tolerance: 1e-7,
        cost_power: CostPower::One,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC03);
    for case in 0..50 {
        let n_a = rng.random_range(5..=30);
        let n_b = rng.random_range(5..=30);
        let mu =
            DiscreteMeasure::uniform((0..n_a).map(|_| rand_pt(&mut rng)).collect()).unwrap();
        let nu =
            DiscreteMeasure::uniform((0..n_b).map(|_| rand_pt(&mut rng)).collect()).unwrap();

        let (w1, _) = w1_exact(&mu, &nu).unwrap();
        let s = sinkhorn_divergence(&mu, &nu, &cfg).unwrap();
        let s_self = sinkhorn_divergence(&mu, &mu, &cfg).unwrap();

        c.check((s - w1).abs() <= 0.05 * w1 + 0.01, || {
            format!("pair {case}: |S - W1| = {} vs budget {}", (s - w1).abs(), 0.05 * w1 + 0.01)
        });
        c.check(s >= -1e-6, || format!("pair {case}: divergence {s} below -1e-6"));
        c.check(s_self.abs() <= 1e-6, || format!("pair {case}: self-divergence {s_self}"));
    }
    let elapsed = start.elapsed();
    c.check(elapsed.as_secs_f64() < 30.0, || {
        format!("runtime {:.2}s exceeds the 30s budget", elapsed.as_secs_f64())
    });
    c.finish();
}

#[test]
fn criterion_04_sliced_w1_matches_the_closed_form() {
    let mut c = Criterion::new(4, "sliced w1 of singletons matches (2/pi) * 5");
    let mu = DiscreteMeasure::uniform(vec![pt(0.0, 0.0)]).unwrap();
    let nu = DiscreteMeasure::uniform(vec![pt(3.0, 4.0)]).unwrap();
    let sliced = sliced_w1(&mu, &nu, 100_000, 0xAC04).unwrap();
    c.check((sliced - 3.1831).abs() <= 0.02, || {
        format!("sliced_w1 {sliced} vs 3.1831 +/- 0.02")
    });

    // Monte-Carlo cross-check with an unrelated generator: average
    // |<direction, (3,4)>| over uniform angles.
    let mut mix = SplitMix64(0x0C04);
    let mut acc = 0.0;
    let draws = 100_000;
    for _ in 0..draws {
        let phi = mix.unit_f64() * TAU;
        acc += (3.0 * phi.cos() + 4.0 * phi.sin()).abs();
    }
    let oracle = acc / draws as f64;
    c.check((oracle - 3.1831).abs() <= 0.02, || {
        format!("independent Monte-Carlo oracle {oracle} vs 3.1831 +/- 0.02")
    });
    c.finish();
}

// ----------------------------------------------------- criteria 5-8: density

#[test]
fn criterion_05_scott_bandwidth_at_eleven_unit_sigma_points() {
    let mut c = Criterion::new(5, "Scott bandwidth for n=11, unit sigma");
    // 11 evenly spaced values scaled so the n-1 sample deviation is
    // exactly 1 per dimension: sum of (i-5)^2 over i=0..10 is 110.
    let scale = 1.0 / 11f64.sqrt();
    let points: Vec<BeoCoord> = (0..11)
        .map(|i| {
            let v = (i as f64 - 5.0) * scale;
            pt(v, -v)
        })
        .collect();
    let (hx, hy) = scott_bandwidth(&points).unwrap();
    c.check((hx - 0.6707).abs() <= 1e-3, || format!("hx {hx} vs 0.6707 +/- 1e-3"));
    c.check((hy - 0.6707).abs() <= 1e-3, || format!("hy {hy} vs 0.6707 +/- 1e-3"));
    c.finish();
}

#[test]
fn criterion_06_reflection_approximates_the_flat_density_better() {
    let mut c = Criterion::new(6, "reflection beats truncation on uniform samples");
    let cfg = KdeConfig::default();
    let flat = 1.0 / (cfg.resolution * cfg.resolution) as f64;
    let sup_dev = |g: &GridDensity| {
        g.probs().iter().map(|p| (p - flat).abs()).fold(0.0, f64::max)
    };

    let mut wins = 0;
    for seed in 1..=20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<BeoCoord> = (0..500).map(|_| rand_pt(&mut rng)).collect();
        let refl = reflective_kde(&points, &cfg).unwrap();
        let trunc = standard_kde(&points, &cfg).unwrap();
        if sup_dev(&refl) < sup_dev(&trunc) {
            wins += 1;
        }
    }
    c.check(wins >= 19, || format!("reflective won {wins}/20 trials, need >= 19"));
    c.finish();
}

/// 200 draws per mode around (-3,3) and (3,-3), unit deviation, clamped
/// into the square.
fn bimodal_fixture() -> Vec<BeoCoord> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC07);
    let mut points = Vec::with_capacity(400);
    for &(mx, my) in &[(-3.0, 3.0), (3.0, -3.0)] {
        for _ in 0..200 {
            let dx: f64 = normal.sample(&mut rng);
            let dy: f64 = normal.sample(&mut rng);
            points.push(BeoCoord::clamped(mx + dx, my + dy).unwrap());
        }
    }
    points
}

#[test]
fn criterion_07_bimodal_mode_separation_across_bandwidths() {
    let mut c = Criterion::new(7, "bimodal maxima: reflective at 1x/2x, truncated at 3x");
    let points = bimodal_fixture();
    let (hx, hy) = scott_bandwidth(&points).unwrap();

    let maxima = |mult: f64, reflect: bool| -> usize {
        let cfg = KdeConfig {
            bandwidth: Bandwidth::Fixed(hx * mult, hy * mult),
            resolution: 32,
            reflect,
        };
        let grid = if reflect {
            reflective_kde(&points, &cfg)
        } else {
            standard_kde(&points, &cfg)
        }
        .unwrap();
        grid.count_local_maxima()
    };

    let refl_1x = maxima(1.0, true);
    let refl_2x = maxima(2.0, true);
    let trunc_3x = maxima(3.0, false);
    c.check(refl_1x == 2, || format!("reflective at 1x Scott: {refl_1x} maxima, want 2"));
    c.check(refl_2x == 2, || format!("reflective at 2x Scott: {refl_2x} maxima, want 2"));
    // Gate kept exactly as stated even though it cannot hold: the sample
    // deviation per mode is ~1 and the modes sit 8.49 apart, so the
    // smoothed lobes (std = sqrt(1 + h^2)) only merge once h exceeds
    // ~4.12 dB — about 3.5x the Scott bandwidth of ~1.17. At 3x the
    // truncated estimator still resolves both modes (merging appears at
    // 4x). Recorded as a deliberate red gate rather than loosened.
    c.check(trunc_3x == 1, || {
        format!(
            "truncated at 3x Scott: {trunc_3x} maxima, want 1 (measured merge point ~3.5x; at 4x: {})",
            maxima(4.0, false)
        )
    });
    c.finish();
}

#[test]
fn criterion_08_reflective_kantorovich_sanity() {
    let mut c = Criterion::new(8, "reflective Kantorovich identity and singleton span");
    let set = [pt(0.0, 0.0), pt(1.0, -2.0), pt(3.0, 3.0), pt(-4.0, 1.0), pt(5.0, -5.0)];
    let cfg = KdeConfig { resolution: 32, ..KdeConfig::default() };
    let d_same = reflective_kantorovich(&set, &set, &cfg).unwrap();
    c.check(d_same.abs() <= 1e-9, || format!("identical sets: distance {d_same}"));

    let d_span = reflective_kantorovich(&[pt(-3.0, 3.0)], &[pt(3.0, -3.0)], &cfg).unwrap();
    c.check((d_span - 8.485).abs() <= 0.25, || {
        format!("opposite singletons: {d_span} vs 8.485 +/- 0.25")
    });
    c.finish();
}

// ------------------------------------------------ criterion 9: rank statistics

/// SplitMix64: deliberately unrelated to the library's ChaCha stream.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: usize) -> usize {
        // Modulo bias is ~n / 2^64: irrelevant at these sizes.
        (self.next_u64() % n as u64) as usize
    }

    fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            xs.swap(i, self.below(i + 1));
        }
    }
}

/// Midranks aligned with the input order, plus the tie term sum(t^3 - t).
fn oracle_midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // 1-based ranks i+1 ..= j+1
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        let t = (j - i + 1) as f64;
        tie += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie)
}

/// Tie-corrected H from a rank vector laid out group-by-group.
fn oracle_h(ranks: &[f64], sizes: &[usize], tie: f64) -> f64 {
    let n = ranks.len() as f64;
    let mut sum = 0.0;
    let mut offset = 0;
    for &sz in sizes {
        let r: f64 = ranks[offset..offset + sz].iter().sum();
        sum += r * r / sz as f64;
        offset += sz;
    }
    let h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let correction = 1.0 - tie / (n * n * n - n);
    if correction <= 0.0 {
        0.0
    } else {
        (h / correction).max(0.0)
    }
}

fn group_mean_ranks(ranks: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut means = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &sz in sizes {
        means.push(ranks[offset..offset + sz].iter().sum::<f64>() / sz as f64);
        offset += sz;
    }
    means
}

/// Permutation p for the Kruskal-Wallis H: under label shuffling the
/// pooled ranks are fixed, so shuffling the rank vector is the whole test.
fn mc_kruskal_p(groups: &[Vec<f64>], iters: usize, seed: u64) -> f64 {
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, tie) = oracle_midranks(&pooled);
    let observed = oracle_h(&ranks, &sizes, tie);
    let mut rng = SplitMix64(seed);
    let mut perm = ranks.clone();
    let mut hits = 0usize;
    for _ in 0..iters {
        rng.shuffle(&mut perm);
        if oracle_h(&perm, &sizes, tie) >= observed - 1e-12 {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (iters + 1) as f64
}

/// Permutation p for each pairwise mean-rank gap. The pooled multiset is
/// permutation-invariant, so the standard error is a constant and
/// comparing |gap| against the observed |gap| is equivalent to comparing
/// the z statistics.
fn mc_dunn_p(groups: &[Vec<f64>], iters: usize, seed: u64) -> Vec<Vec<f64>> {
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, _) = oracle_midranks(&pooled);
    let observed = group_mean_ranks(&ranks, &sizes);
    let k = sizes.len();

    let mut hits = vec![vec![0usize; k]; k];
    let mut rng = SplitMix64(seed);
    let mut perm = ranks.clone();
    for _ in 0..iters {
        rng.shuffle(&mut perm);
        let means = group_mean_ranks(&perm, &sizes);
        for i in 0..k {
            for j in (i + 1)..k {
                if (means[i] - means[j]).abs() >= (observed[i] - observed[j]).abs() - 1e-12 {
                    hits[i][j] += 1;
                }
            }
        }
    }
    let mut p = vec![vec![f64::NAN; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let v = (hits[i][j] + 1) as f64 / (iters + 1) as f64;
            p[i][j] = v;
            p[j][i] = v;
        }
    }
    p
}

/// Three overlapping groups of 10 with cross-group ties.
fn stats_fixture_a() -> Vec<Vec<f64>> {
    vec![
        vec![1.2, 3.4, 3.4, 5.0, 2.2, 4.4, 3.3, 1.2, 0.5, 2.8],
        vec![2.2, 4.1, 3.4, 6.2, 5.5, 3.9, 4.4, 2.2, 5.0, 3.3],
        vec![0.9, 2.0, 1.2, 3.1, 2.5, 1.7, 2.2, 0.5, 1.9, 2.4],
    ]
}

/// Two uneven groups (8 vs 12) with ties and a mild shift.
fn stats_fixture_b() -> Vec<Vec<f64>> {
    vec![
        vec![0.8, 1.4, 2.0, 2.0, 2.6, 3.1, 3.7, 4.2],
        vec![1.4, 2.2, 2.6, 3.1, 3.3, 3.9, 4.2, 4.6, 5.1, 5.4, 2.0, 4.9],
    ]
}

/// Four groups of 10; one sits visibly lower, the rest interleave.
fn stats_fixture_c() -> Vec<Vec<f64>> {
    vec![
        vec![2.1, 3.0, 3.8, 4.4, 2.6, 3.3, 4.0, 2.9, 3.5, 4.7],
        vec![2.4, 3.2, 4.1, 4.9, 2.8, 3.6, 4.3, 3.1, 3.9, 5.2],
        vec![1.2, 1.9, 2.5, 3.0, 1.6, 2.2, 2.8, 1.4, 2.0, 3.3],
        vec![2.6, 3.4, 4.2, 5.0, 3.0, 3.7, 4.5, 3.2, 4.0, 5.3],
    ]
}

#[test]
fn criterion_09_rank_tests_match_the_permutation_oracle() {
    let mut c = Criterion::new(9, "rank tests match a 100k-permutation oracle");
    const ITERS: usize = 100_000;

    for (fi, groups) in [stats_fixture_a(), stats_fixture_b(), stats_fixture_c()]
        .into_iter()
        .enumerate()
    {
        let p_mc = mc_kruskal_p(&groups, ITERS, 0x0AC9 + fi as u64);
        let (h, p_chi) = kruskal_wallis(&groups).unwrap();
        let (h_perm, p_perm) = kruskal_wallis_with(
            &groups,
            PValueMethod::Permutation { iterations: ITERS, seed: 0x90AC + fi as u64 },
        )
        .unwrap();

        // H is method-independent; the oracle recomputes it from scratch.
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
        let (ranks, tie) = oracle_midranks(&pooled);
        let h_oracle = oracle_h(&ranks, &sizes, tie);
        c.check((h - h_oracle).abs() <= 1e-9, || {
            format!("fixture {fi}: H {h} vs oracle {h_oracle}")
        });
        c.check((h_perm - h).abs() <= 1e-12, || {
            format!("fixture {fi}: H differs across p-value methods")
        });
        c.check((p_chi - p_mc).abs() <= 0.01, || {
            format!("fixture {fi}: chi-square p {p_chi} vs Monte-Carlo {p_mc}")
        });
        c.check((p_perm - p_mc).abs() <= 0.01, || {
            format!("fixture {fi}: library permutation p {p_perm} vs Monte-Carlo {p_mc}")
        });

        let dunn = dunn_posthoc(&groups, Correction::None).unwrap();
        let dunn_mc = mc_dunn_p(&groups, ITERS, 0xD0AC + fi as u64);
        let mut max_dunn_dev = 0.0f64;
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                max_dunn_dev = max_dunn_dev.max((dunn[i][j] - dunn_mc[i][j]).abs());
                c.check((dunn[i][j] - dunn_mc[i][j]).abs() <= 0.01, || {
                    format!(
                        "fixture {fi} pair ({i},{j}): dunn p {} vs Monte-Carlo {}",
                        dunn[i][j], dunn_mc[i][j]
                    )
                });
            }
        }
        c.note(format!(
            "fixture {fi}: p chi {p_chi:.4} / perm {p_perm:.4} / mc {p_mc:.4}; max dunn dev {max_dunn_dev:.4}"
        ));

        // Rank invariance: exp() is strictly monotone, so every statistic
        // must survive it to the last few bits.
        let transformed: Vec<Vec<f64>> =
            groups.iter().map(|g| g.iter().map(|v| v.exp()).collect()).collect();
        let (h_exp, p_exp) = kruskal_wallis(&transformed).unwrap();
        c.check((h_exp - h).abs() <= 1e-9, || {
            format!("fixture {fi}: H changed under exp(): {h} -> {h_exp}")
        });
        c.check((p_exp - p_chi).abs() <= 1e-9, || {
            format!("fixture {fi}: p changed under exp(): {p_chi} -> {p_exp}")
        });
        let dunn_exp = dunn_posthoc(&transformed, Correction::None).unwrap();
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                c.check((dunn_exp[i][j] - dunn[i][j]).abs() <= 1e-9, || {
                    format!("fixture {fi} pair ({i},{j}): dunn p changed under exp()")
                });
            }
        }
    }

    // Hand-computed H on {1,2,3} vs {4,5,6}: rank sums 6 and 15 give
    // 12/(6*7) * (36/3 + 225/3) - 3*7 = 27/7.
    let (h_hand, _) = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
    c.check((h_hand - 3.857).abs() <= 1e-3, || format!("hand fixture H {h_hand} vs 3.857"));
    c.finish();
}

// --------------------------------------------- criteria 10-12: the fixture

#[test]
fn criterion_10_offline_protocol_orders_the_recommenders() {
    let start = Instant::now();
    let mut c = Criterion::new(10, "offline protocol: oracle < preset < random");
    let ds = load_dataset(fixture_path("synthetic-120.json")).unwrap();
    let (train, _val, test) = split_dataset(&ds, &CANONICAL_SPLIT).unwrap();
    c.check(test.entries.len() == 30, || {
        format!("test split has {} prompts, want 30", test.entries.len())
    });

    let protocol = || -> Vec<EvalRun> {
        let oracle = OracleReplay::from_dataset(&test).unwrap();
        let preset = StaticPresetBaseline::from_train(&train).unwrap();
        let random = RandomGaussianBaseline::default();
        let cfg = MetricConfig::default();
        vec![
            evaluate(&oracle, &test, Metric::ReflectiveW1, &cfg, 11, 2024).unwrap(),
            evaluate(&preset, &test, Metric::ReflectiveW1, &cfg, 11, 2024).unwrap(),
            evaluate(&random, &test, Metric::ReflectiveW1, &cfg, 11, 2024).unwrap(),
        ]
    };
    let runs = protocol();
    let rerun = protocol();
    let bytes = serde_json::to_string(&runs).unwrap();
    let rerun_bytes = serde_json::to_string(&rerun).unwrap();
    c.check(bytes == rerun_bytes, || "consecutive runs are not byte-identical".into());

    for run in &runs {
        c.check(run.errors.is_empty(), || {
            format!("{}: {} prompts failed", run.recommender_name, run.errors.len())
        });
        c.check(run.per_prompt.len() == 30, || {
            format!("{}: {} prompts scored", run.recommender_name, run.per_prompt.len())
        });
    }

    let median = |run: &EvalRun| boxplot_summary(&run.distances()).unwrap().median;
    let (m_oracle, m_preset, m_random) = (median(&runs[0]), median(&runs[1]), median(&runs[2]));
    c.check(m_oracle < m_preset && m_preset < m_random, || {
        format!("median order violated: oracle {m_oracle}, preset {m_preset}, random {m_random}")
    });

    let report = compare(&runs, &ALPHA_LEVELS).unwrap();
    let p_oracle_random = report.dunn_p[0][2];
    c.check(p_oracle_random <= 0.01, || {
        format!("oracle vs random adjusted p {p_oracle_random} above 0.01")
    });

    let elapsed = start.elapsed();
    c.check(elapsed.as_secs_f64() < 120.0, || {
        format!("runtime {:.1}s exceeds the 2 minute budget", elapsed.as_secs_f64())
    });
    c.finish();
}

#[test]
fn criterion_11_fixture_statistics_match_their_metadata() {
    let mut c = Criterion::new(11, "prompt statistics equal the embedded metadata");
    let ds = load_dataset(fixture_path("synthetic-120.json")).unwrap();
    let stats = prompt_stats(&ds);
    let meta = |key: &str| -> String {
        ds.metadata.get(key).unwrap_or_else(|| panic!("metadata key {key} missing")).clone()
    };

    c.check(meta("total_prompts") == stats.total_prompts.to_string(), || {
        format!("total_prompts: metadata {} vs computed {}", meta("total_prompts"), stats.total_prompts)
    });
    c.check(meta("total_annotations") == stats.total_annotations.to_string(), || {
        format!(
            "total_annotations: metadata {} vs computed {}",
            meta("total_annotations"),
            stats.total_annotations
        )
    });
    c.check(meta("vocab_size") == stats.vocab_size.to_string(), || {
        format!("vocab_size: metadata {} vs computed {}", meta("vocab_size"), stats.vocab_size)
    });
    for (key, value) in [
        ("avg_words_per_prompt", stats.avg_words_per_prompt),
        ("gv_avg", stats.gv_avg),
        ("gv_min", stats.gv_min),
        ("gv_max", stats.gv_max),
    ] {
        let recorded: f64 = meta(key).parse().unwrap();
        c.check(recorded == value, || {
            format!("{key}: metadata {recorded} vs computed {value} (must be bit-equal)")
        });
    }

    // The published-corpus clause only binds when such a corpus is
    // supplied in-schema; point EQALIGN_REAL_DATASET at it to arm this
    // block. Word counts use whitespace tokenization — a corpus tokenized
    // differently can legitimately drift in vocab_size by one.
    match env::var("EQALIGN_REAL_DATASET") {
        Ok(path) => {
            let real = load_dataset(Path::new(&path)).unwrap();
            let s = prompt_stats(&real);
            c.check(s.total_prompts == 120, || format!("real total_prompts {}", s.total_prompts));
            c.check(s.total_annotations == 1320, || {
                format!("real total_annotations {}", s.total_annotations)
            });
            c.check((s.vocab_size as i64 - 380).abs() <= 1, || {
                format!("real vocab_size {} vs 380 +/- 1", s.vocab_size)
            });
            for (name, got, want) in [
                ("avg_words_per_prompt", s.avg_words_per_prompt, 9.89),
                ("gv_avg", s.gv_avg, 41.60),
                ("gv_min", s.gv_min, 2.19),
                ("gv_max", s.gv_max, 250.60),
            ] {
                c.check((got - want).abs() <= 0.01, || {
                    format!("real {name} {got} vs {want} +/- 0.01")
                });
            }
        }
        Err(_) => c.note("EQALIGN_REAL_DATASET not set; published-corpus clause is vacuous".into()),
    }
    c.finish();
}

#[test]
fn criterion_12_augmentation_expands_train_without_touching_the_splits() {
    let mut c = Criterion::new(12, "factor-50 augmentation stays in band and in train");
    let ds = load_dataset(fixture_path("synthetic-120.json")).unwrap();
    let dict = SynonymDict::load(&fixture_path("synonyms.json")).unwrap();
    let (train, val, test) = split_dataset(&ds, &CANONICAL_SPLIT).unwrap();

    let config = AugmentConfig { target_factor: 50.0, max_blur_db: 0.3, seed: 0 };
    let augmented = augment_prompts(&train, &dict, &config).unwrap();
    let factor = augmented.entries.len() as f64 / train.entries.len() as f64;
    c.check((45.0..=55.0).contains(&factor), || {
        format!("expansion {factor:.2}x outside the 45-55x band")
    });

    let by_id: std::collections::BTreeMap<&str, &eqalign::PromptEntry> =
        train.entries.iter().map(|e| (e.id.as_str(), e)).collect();
    for entry in &augmented.entries {
        let source_id = entry.id.split("-aug").next().unwrap();
        let source = by_id
            .get(source_id)
            .unwrap_or_else(|| panic!("augmented id {} has no train source", entry.id));
        if entry.id == source.id {
            continue; // the pass-through original
        }
        for (a, s) in entry.responses.points().iter().zip(source.responses.points()) {
            let (dx, dy) = ((a.x() - s.x()).abs(), (a.y() - s.y()).abs());
            c.check(dx <= 0.3 + 1e-12 && dy <= 0.3 + 1e-12, || {
                format!("{}: blur ({dx:.4}, {dy:.4}) exceeds 0.3 dB", entry.id)
            });
        }
    }

    // Augmentation reads train only: every output id maps to a train
    // source and no validation/test id leaks in.
    let aug_sources: std::collections::BTreeSet<&str> =
        augmented.entries.iter().map(|e| e.id.split("-aug").next().unwrap()).collect();
    let train_ids = entry_ids(&train);
    c.check(aug_sources.iter().all(|id| train_ids.contains(*id)), || {
        "augmented output contains a non-train source".into()
    });
    for other in [&val, &test] {
        let leaked = other.entries.iter().any(|e| aug_sources.contains(e.id.as_str()));
        c.check(!leaked, || "validation/test entry leaked into augmentation".into());
    }
    c.finish();
}

// ------------------------------------------------- criterion 13: the parser

#[derive(Deserialize)]
struct Corpus {
    valid: Vec<ValidCase>,
    invalid: Vec<InvalidCase>,
}

#[derive(Deserialize)]
struct ValidCase {
    reply: String,
    expected_count: usize,
    pairs: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct InvalidCase {
    reply: String,
    expected_count: usize,
    error: String,
}

fn parse_error_kind(e: &ParseError) -> &'static str {
    match e {
        ParseError::ZeroExpected => "zero-expected",
        ParseError::NoNumbers => "no-numbers",
        ParseError::WrongCount { .. } => "wrong-count",
        ParseError::OddNumbers { .. } => "odd-numbers",
        ParseError::NonFinite => "non-finite",
    }
}

#[test]
fn criterion_13_parser_corpus_round_trip() {
    let mut c = Criterion::new(13, "parser: 40 valid shapes, 20 structured failures");
    let corpus: Corpus =
        serde_json::from_str(&fs::read_to_string(fixture_path("parser_corpus.json")).unwrap())
            .unwrap();
    c.check(corpus.valid.len() == 40, || format!("{} valid cases, want 40", corpus.valid.len()));
    c.check(corpus.invalid.len() == 20, || {
        format!("{} invalid cases, want 20", corpus.invalid.len())
    });

    for (i, case) in corpus.valid.iter().enumerate() {
        match parse_coords(&case.reply, case.expected_count) {
            Ok(coords) => {
                c.check(coords.len() == case.pairs.len(), || {
                    format!("valid case {i}: {} coords, want {}", coords.len(), case.pairs.len())
                });
                for (coord, pair) in coords.iter().zip(&case.pairs) {
                    c.check(coord.x() == pair[0] && coord.y() == pair[1], || {
                        format!(
                            "valid case {i}: ({}, {}) vs expected ({}, {})",
                            coord.x(),
                            coord.y(),
                            pair[0],
                            pair[1]
                        )
                    });
                }
            }
            Err(e) => c.check(false, || format!("valid case {i} failed to parse: {e}")),
        }
    }

    for (i, case) in corpus.invalid.iter().enumerate() {
        match parse_coords(&case.reply, case.expected_count) {
            Ok(_) => c.check(false, || format!("invalid case {i} parsed successfully")),
            Err(e) => c.check(parse_error_kind(&e) == case.error, || {
                format!("invalid case {i}: error {} vs expected {}", parse_error_kind(&e), case.error)
            }),
        }
    }
    c.finish();
}
