//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nsmg::engine::{run, GameConfig, GameState, MarketSeries};
use nsmg::oracles::{gen_cascade, gen_fbm};
use nsmg::sf::{self, classify, fit_scaling, stationarity_check, structure_function};
use nsmg::stats::{
    gaussian_agreement, increment_pdf, kurtosis, normal_cdf, standardized_increments,
    tail_fraction, Binning,
};
use nsmg::sweep::{run_sweep, SweepConfig, SweepOutcome};
use nsmg::wtmm::{self, cwt, partition_at, weights, Normalization, WtmmConfig};

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {n} [{name}]: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} [{name}] failed: {detail}");
}

fn desk() -> &'static SweepOutcome {
    static DESK: OnceLock<SweepOutcome> = OnceLock::new();
    DESK.get_or_init(|| run_sweep(&SweepConfig::default()).expect("desk sweep"))
}

const MATCHED_REALIZATIONS: u64 = 8;

/// Eight games of 1e5 recorded steps at `alpha`, default g = 2, ts = (1, 5).
fn matched(alpha: f64) -> &'static [MarketSeries] {
    static LOW: OnceLock<Vec<MarketSeries>> = OnceLock::new();
    static HIGH: OnceLock<Vec<MarketSeries>> = OnceLock::new();
    let cell = if alpha < 0.2 { &LOW } else { &HIGH };
    cell.get_or_init(|| {
        (0..MATCHED_REALIZATIONS)
            .map(|r| {
                let mut c = GameConfig::default().with_alpha(alpha);
                c.seed = 1000 + r;
                assert_eq!(c.horizon - c.transient, 100_000);
                run(&c).unwrap()
            })
            .collect()
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for k in i..=j {
            r[idx[k]] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Weighted least-squares non-increasing fit (pool adjacent violators).
fn antitonic(means: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&m, &w) in means.iter().zip(weights) {
        blocks.push((m, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, n1 + n2);
        }
    }
    blocks
        .iter()
        .flat_map(|&(m, _, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Share of the variance explained by the best non-increasing step function
/// of the group means (the E-bar-squared statistic).
fn isotonic_statistic(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let sst: f64 = all.iter().map(|v| (v - grand).powi(2)).sum();
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let w: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let fit = antitonic(&means, &w);
    let ssb: f64 = fit
        .iter()
        .zip(&w)
        .map(|(f, n)| n * (f - grand).powi(2))
        .sum();
    ssb / sst
}

fn isotonic_p_value(groups: &[Vec<f64>], permutations: usize, seed: u64) -> f64 {
    let observed = isotonic_statistic(groups);
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let mut pool: Vec<f64> = groups.iter().flatten().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..permutations {
        pool.shuffle(&mut rng);
        let mut it = pool.iter().copied();
        let shuffled: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&n| it.by_ref().take(n).collect())
            .collect();
        if isotonic_statistic(&shuffled) >= observed {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (permutations + 1) as f64
}

#[test]
fn criterion_1_phase_transition() {
    let out = desk();
    let alpha: Vec<f64> = out.records.iter().map(|r| r.alpha).collect();
    let sigma2: Vec<f64> = out.records.iter().map(|r| r.sigma2.unwrap().mean).collect();
    let h: Vec<f64> = out.records.iter().map(|r| r.h_pred.unwrap().mean).collect();
    let imin = (0..sigma2.len())
        .min_by(|&a, &b| sigma2[a].partial_cmp(&sigma2[b]).unwrap())
        .unwrap();
    let rho = spearman(&alpha[imin + 1..], &h[imin + 1..]);
    let amin = alpha[imin];
    report(
        1,
        "phase transition",
        (0.1..=0.4).contains(&amin) && rho > 0.8,
        format!("argmin sigma2 at alpha = {amin:.4}, Spearman rho of H above it = {rho:.3}"),
    );
}

#[test]
fn criterion_2_gaussian_phase() {
    let runs = matched(0.84);
    let kurt: Vec<f64> = runs
        .iter()
        .map(|s| kurtosis(&s.returns()).unwrap())
        .collect();
    let k = median(&kurt);
    let mut detail = format!("median excess kurtosis {k:.3}");
    let mut pass = k.abs() <= 0.3;
    for tau in [1usize, 10, 100] {
        let (mut checked, mut within) = (0, 0);
        for s in runs {
            let hist = increment_pdf(&s.price(), tau, Binning::FreedmanDiaconis).unwrap();
            let g = gaussian_agreement(&hist, hist.samples / tau, 3.0, 5.0);
            checked += g.bins_checked;
            within += g.bins_within;
        }
        let frac = within as f64 / checked as f64;
        pass &= frac >= 0.9;
        detail += &format!(
            "; tau={tau}: {within}/{checked} bins in band ({:.1}%)",
            100.0 * frac
        );
    }
    report(2, "Gaussian ergodic phase", pass, detail);
}

#[test]
fn criterion_3_fat_tails() {
    let runs = matched(0.05);
    let kurt: Vec<f64> = runs
        .iter()
        .map(|s| kurtosis(&s.returns()).unwrap())
        .collect();
    let k = median(&kurt);
    let z: Vec<f64> = runs
        .iter()
        .flat_map(|s| standardized_increments(&s.price(), 1).unwrap())
        .collect();
    let tail = tail_fraction(&z, 4.0);
    let gauss = 2.0 * (1.0 - normal_cdf(4.0));
    report(
        3,
        "fat tails near criticality",
        k > 0.5 && tail > gauss,
        format!(
            "median excess kurtosis {k:.2}; P(|x| >= 4 sd) = {tail:.2e} vs Gaussian {gauss:.2e}"
        ),
    );
}

#[test]
fn criterion_4_stationarity() {
    let q: Vec<f64> = sf::default_q_values();
    let taus = sf::default_tau_values();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for alpha in [0.05, 0.84] {
        for s in matched(alpha) {
            let rep = stationarity_check(&s.returns(), &q, &taus, sf::DEFAULT_SLOPE_TOL).unwrap();
            worst = rep.slopes.iter().fold(worst, |m, v| m.max(v.abs()));
            failures += usize::from(!rep.pass);
        }
    }
    report(
        4,
        "stationarity of returns",
        failures == 0,
        format!(
            "max |slope| over q in [1, 6.5] and 16 runs = {worst:.4}; {failures} runs above 0.05"
        ),
    );
}

#[test]
fn criterion_5_sf_classification() {
    let q: Vec<f64> = (0..11).map(|i| 1.0 + 0.5 * i as f64).collect();
    let taus = sf::default_tau_values();
    let deviations = |alpha: f64| -> Vec<f64> {
        matched(alpha)
            .iter()
            .map(|s| {
                let r = fit_scaling(
                    &structure_function(&s.price(), &q, &taus).unwrap(),
                    sf::DEFAULT_SCALING_RANGE,
                )
                .unwrap();
                classify(&r, sf::DEFAULT_LINEARITY_TOL)
                    .unwrap()
                    .max_deviation
            })
            .collect()
    };
    let low = deviations(0.05);
    let high = deviations(0.84);
    let n_low = low.iter().filter(|&&d| d > 0.05).count();
    let n_high = high.iter().filter(|&&d| d <= 0.05).count();
    report(
        5,
        "SF regime classification",
        n_low >= 6 && n_high >= 6,
        format!(
            "multifractal at alpha=0.05 in {n_low}/8 (max dev {:.3}..{:.3}); fractal at alpha=0.84 in {n_high}/8 (max dev {:.3}..{:.3})",
            low.iter().cloned().fold(f64::INFINITY, f64::min),
            low.iter().cloned().fold(0.0, f64::max),
            high.iter().cloned().fold(f64::INFINITY, f64::min),
            high.iter().cloned().fold(0.0, f64::max),
        ),
    );
}

#[test]
fn criterion_6_fbm_oracle() {
    let cfg = WtmmConfig::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for hurst in [0.3, 0.5, 0.7] {
        for seed in 0..3 {
            let y = gen_fbm(1 << 17, hurst, seed).unwrap().y;
            let sfr = fit_scaling(
                &structure_function(&y, &sf::default_q_values(), &sf::default_tau_values())
                    .unwrap(),
                sf::DEFAULT_SCALING_RANGE,
            )
            .unwrap();
            let h2 = classify(&sfr, sf::DEFAULT_LINEARITY_TOL).unwrap().hurst;
            let e = wtmm::analyze(&y, &cfg).unwrap().spectrum.extrema;
            let ok =
                (h2 - hurst).abs() <= 0.05 && (e.h_0 - hurst).abs() <= 0.05 && e.width() <= 0.15;
            pass &= ok;
            detail.push(format!(
                "H={hurst} s{seed}: h(2)={h2:.3} h_0={:.3} width={:.3}",
                e.h_0,
                e.width()
            ));
        }
    }
    report(6, "fBm oracle", pass, detail.join("; "));
}

#[test]
fn criterion_7_cascade_oracle() {
    let y = gen_cascade(0.6, 17).unwrap().y;
    let e = wtmm::analyze(&y, &WtmmConfig::default())
        .unwrap()
        .spectrum
        .extrema;
    let (hl, hr) = (-(0.6f64).log2(), -(0.4f64).log2());
    report(
        7,
        "cascade oracle",
        (e.h_l - hl).abs() <= 0.1 && (e.h_r - hr).abs() <= 0.1 && (e.d_top - 1.0).abs() <= 0.05,
        format!(
            "h_l = {:.3} (target {hl:.3}), h_r = {:.3} (target {hr:.3}), D top = {:.3}",
            e.h_l, e.h_r, e.d_top
        ),
    );
}

#[test]
fn criterion_8_multifractal_transition() {
    let out = desk();
    let r = out.config.realizations;
    let groups: Vec<Vec<f64>> = out
        .realizations
        .chunks(r)
        .map(|g| {
            g.iter()
                .filter_map(|x| x.outcome.as_ref().ok())
                .map(|a| a.wtmm.as_ref().unwrap().spectrum.extrema.width())
                .collect()
        })
        .collect();
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let n = means.len();
    let gap = means[..3].iter().sum::<f64>() / 3.0 - means[n - 3..].iter().sum::<f64>() / 3.0;
    let p = isotonic_p_value(&groups, 2000, 17);
    let h0: Vec<f64> = out.records.iter().map(|x| x.h_0.unwrap().mean).collect();
    let h0_ok = h0.iter().all(|v| (0.35..=0.65).contains(v));
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    report(
        8,
        "multifractal transition",
        gap > 0.1 && p < 0.05 && h0_ok,
        format!(
            "width gap {gap:.3}; isotonic p = {p:.4}; mean widths [{}]; mean h_0 [{}]",
            fmt(&means),
            fmt(&h0)
        ),
    );
}

#[test]
fn criterion_9_exact_math() {
    let mut fails = Vec::new();

    // weight normalization
    let moduli: Vec<f64> = (1..200)
        .map(|i| 1e-3 * (i as f64).powf(1.7) + (i % 7) as f64)
        .collect();
    for q in [-5.0, -2.5, 0.0, 1.0, 3.75, 5.0] {
        let s: f64 = weights(&moduli, q).iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            fails.push(format!("weights sum {s} at q={q}"));
        }
    }
    // Z*(0) = -ln M
    let (_, zstar) = partition_at(&moduli, 0.0);
    if zstar != -(moduli.len() as f64).ln() {
        fails.push(format!("Z*(0) = {zstar}"));
    }
    // DOG4 kills cubic trends
    let y: Vec<f64> = (0..4096)
        .map(|t| {
            let x = t as f64 / 4096.0;
            1.0 + 2.0 * x - 3.0 * x * x + 0.5 * x * x * x
        })
        .collect();
    let plane = cwt(&y, &[4.0, 8.0, 16.0, 32.0], 4, Normalization::L1).unwrap();
    for (row, range) in plane.coeffs.iter().zip(&plane.interior) {
        let (lo, hi) = range.unwrap();
        let worst = row[lo..hi].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst > 1e-8 {
            fails.push(format!("cubic leaks {worst:e}"));
        }
    }
    // Y = c t gives zeta(q) = q
    let y: Vec<f64> = (0..5000).map(|t| 0.37 * t as f64).collect();
    let q = sf::default_q_values();
    let r = fit_scaling(
        &structure_function(&y, &q, &sf::default_tau_values()).unwrap(),
        sf::DEFAULT_SCALING_RANGE,
    )
    .unwrap();
    for (qq, z) in q.iter().zip(&r.fit.unwrap().zeta) {
        if (z - qq).abs() > 1e-9 {
            fails.push(format!("zeta({qq}) = {z}"));
        }
    }
    // payoff arithmetic
    let cfg = GameConfig {
        groups: 1,
        speculators_per_group: 1,
        producers: 4,
        strategies: 1,
        timescales: vec![1],
        epsilon: 0.01,
        horizon: 10,
        transient: 0,
        ..GameConfig::default()
    }
    .with_p_states(64);
    let mut game = GameState::new(&cfg).unwrap();
    let mu = (0..64)
        .find(|&mu| {
            (0..4)
                .map(|k| game.producer_table(k).action(mu) as i64)
                .sum::<i64>()
                .abs()
                == 4
        })
        .unwrap();
    let a_prod: i64 = (0..4)
        .map(|k| game.producer_table(k).action(mu) as i64)
        .sum();
    let a_spec = game.speculator_table(0, 0).action(mu) as f64;
    game.speculator_scores_mut(0)[1] = 100.0;
    let r1 = game.step_with(mu);
    let r2 = game.step_with(mu);
    let s = game.speculator_scores(0);
    // speculator abstains both times: A = producer sum, U = -a A per step, null gains epsilon
    if r1.demand != a_prod
        || r2.demand != a_prod
        || s[0] != -2.0 * a_spec * a_prod as f64
        || s[1] != 100.0 + 0.01 + 0.01
    {
        fails.push(format!("payoffs {s:?}, demand {} {}", r1.demand, r2.demand));
    }
    // determinism
    let mut c = GameConfig::default().with_alpha(0.1);
    c.horizon = 3000;
    c.transient = 500;
    if run(&c).unwrap() != run(&c).unwrap() {
        fails.push("reruns differ".into());
    }
    if gen_fbm(4096, 0.6, 9).unwrap().y != gen_fbm(4096, 0.6, 9).unwrap().y {
        fails.push("fBm reruns differ".into());
    }
    report(
        9,
        "exact-math micro-suite",
        fails.is_empty(),
        if fails.is_empty() {
            "all identities hold".into()
        } else {
            fails.join("; ")
        },
    );
}

#[test]
fn isotonic_helpers_behave() {
    assert_eq!(
        antitonic(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0]),
        vec![3.0, 1.5, 1.5]
    );
    let trend: Vec<Vec<f64>> = (0..6)
        .map(|i| (0..5).map(|j| 10.0 - i as f64 + 0.1 * j as f64).collect())
        .collect();
    assert!(isotonic_p_value(&trend, 500, 1) < 0.01);
    let flat: Vec<Vec<f64>> = (0..6)
        .map(|i| (0..5).map(|j| ((i * 5 + j) * 7 % 11) as f64).collect())
        .collect();
    assert!(isotonic_p_value(&flat, 500, 1) > 0.05);
    assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]) - 1.0).abs() < 1e-12);
}
