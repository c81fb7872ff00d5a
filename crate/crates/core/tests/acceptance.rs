//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with the measured quantities (visible with --nocapture).

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::distr::Distribution;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Binomial;

use finitekey::authsim::{
    run_app, run_channel, AdversaryPolicy, DeliveryStatus, Direction, SendEvent,
};
use finitekey::decoy::{
    adjusted_counts, bound_one_max, bound_one_min, bound_zero_min, tau_m, Deviation,
    IntensitySpec, OutcomeCounts,
};
use finitekey::detector::{delta_metrics_noswap, delta_metrics_swap, DetectorSpec};
use finitekey::hashing::{pa_variable_input, toeplitz_hash, BitString, SeedTable, ToeplitzSeed};
use finitekey::keyrate::EpsilonBudget;
use finitekey::logdomain::LogProb;
use finitekey::postselect::{
    decoy_bb84_blocks, lift_epsilon, log2_sym_dim, qubit_bb84_blocks, required_iid_epsilon,
    x_block_diagonal, PSParams,
};
use finitekey::simulate::{
    decoy_report_expected, expected_key_rate, ChannelModel, ProtocolParams, RateMode,
};
use finitekey::stats::{
    binom_tail_cbin, clopper_pearson, gamma_bin, gamma_serf, serfling_bound, GammaBinMethod,
    Probability, TailSpec,
};

fn p(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

fn paper_decoy_budget() -> EpsilonBudget {
    EpsilonBudget::decoy_even(
        LogProb::from_linear(5e-11),
        LogProb::from_linear(1e-10),
        LogProb::from_linear(2.5e-11),
    )
    .unwrap()
}

fn paper_channel(loss_db: f64, delta: f64, swap: bool) -> ChannelModel {
    ChannelModel {
        loss_db,
        misalignment_deg: 2.0,
        depolarization: 0.0,
        detector: DetectorSpec::new(0.7, delta, 1e-6, delta, swap).unwrap(),
    }
}

fn paper_params(n: u64) -> ProtocolParams {
    ProtocolParams {
        n,
        alice_x_prob: 0.5,
        bob_x_prob: 0.5,
        intensities: Some(IntensitySpec::with_equal_probs([1.0, 0.1, 0.01]).unwrap()),
        budget: paper_decoy_budget(),
        f_ec: 1.16,
    }
}

fn decoy_key_rate(loss_db: f64, delta: f64, swap: bool, n: u64) -> f64 {
    let report = decoy_report_expected(&paper_channel(loss_db, delta, swap), &paper_params(n))
        .expect("pipeline");
    report.key_length as f64 / n as f64
}

fn unit(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// 1. Zero characterization tolerances give exactly zero mismatch metrics,
///    and the decoy phase-error bound then reduces bit-for-bit to the plain
///    sampling form e1 + gamma_serf.
#[test]
fn acceptance_01_zero_mismatch_reduction() {
    let no_swap = DetectorSpec::new(0.7, 0.0, 1e-6, 0.0, false).unwrap();
    let m = delta_metrics_noswap(&no_swap).unwrap();
    assert_eq!((m.delta1, m.delta2), (0.0, 0.0));
    let swap = DetectorSpec::new(0.7, 0.0, 1e-6, 0.0, true).unwrap();
    let m = delta_metrics_swap(&swap).unwrap();
    assert_eq!((m.delta1, m.delta2), (0.0, 0.0));

    let channel = paper_channel(20.0, 0.0, false);
    let params = paper_params(10u64.pow(11));
    let report = decoy_report_expected(&channel, &params).unwrap();
    let pb = report.photon_bounds.as_ref().unwrap();
    let e1 = report.single_photon_error.unwrap();
    let serfling_form = e1
        + gamma_serf(
            pb.x_con.b1_min,
            pb.k_con.b1_min,
            p(params.budget.eps_a().to_linear()),
        )
        .unwrap();
    assert_eq!(
        report.phase_error_bound, serfling_form,
        "bound must reduce bit-for-bit at zero mismatch"
    );
    println!(
        "ACCEPTANCE 01 PASS: zero tolerances give (d1, d2) = (0, 0); pipeline bound {} equals e1 + gamma_serf exactly",
        report.phase_error_bound
    );
}

/// 2. At 25 dB loss and n = 10^12 with random swapping, the key rate stays
///    positive for characterization tolerances up to 0.30 and is
///    non-increasing across the tolerance sweep.
#[test]
fn acceptance_02_tolerance_sweep_at_25db() {
    let n = 10u64.pow(12);
    let deltas = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35];
    let rates: Vec<f64> = deltas.iter().map(|&d| decoy_key_rate(25.0, d, true, n)).collect();
    for (d, r) in deltas.iter().zip(&rates) {
        if *d <= 0.30 {
            assert!(*r > 0.0, "rate must stay positive at Delta = {d}, got {r}");
        }
    }
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "rate must not increase with Delta: {rates:?}");
    }
    println!("ACCEPTANCE 02 PASS: 25 dB swap rates over Delta {deltas:?}: {rates:?}");
}

/// 3. Shape checks: key rate non-increasing in loss; the Delta = 0 curve
///    dominates Delta = 0.05; the n = 10^12 curve dominates n = 10^10.
#[test]
fn acceptance_03_loss_curve_shapes() {
    let losses = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
    let n12 = 10u64.pow(12);
    let n10 = 10u64.pow(10);
    let curve_d0: Vec<f64> = losses.iter().map(|&l| decoy_key_rate(l, 0.0, true, n12)).collect();
    let curve_d05: Vec<f64> = losses.iter().map(|&l| decoy_key_rate(l, 0.05, true, n12)).collect();
    let curve_n10: Vec<f64> = losses.iter().map(|&l| decoy_key_rate(l, 0.05, true, n10)).collect();

    for curve in [&curve_d0, &curve_d05, &curve_n10] {
        for w in curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "rate increased with loss: {curve:?}");
        }
    }
    for (a, b) in curve_d0.iter().zip(&curve_d05) {
        assert!(a >= b, "Delta = 0 curve must dominate Delta = 0.05");
    }
    for (a, b) in curve_d05.iter().zip(&curve_n10) {
        assert!(a >= b, "n = 1e12 curve must dominate n = 1e10");
    }
    assert!(curve_d0[0] > 0.0 && curve_d05[0] > 0.0 && curve_n10[0] > 0.0);
    println!(
        "ACCEPTANCE 03 PASS: monotone loss curves; Delta 0 {curve_d0:?} dominates 0.05 {curve_d05:?} dominates n = 1e10 {curve_n10:?}"
    );
}

/// Exact binomial tail oracle in pure big-integer arithmetic. With
/// delta = a/d, the tail from index k is
/// [sum_{i=k}^{n} C(n,i) a^i (d-a)^{n-i}] / d^n; the numerator follows the
/// exact pmf recurrence over whichever side of k is shorter.
fn tail_exact(n: u64, num: u64, den: u64, k: u64) -> BigRational {
    if k == 0 {
        return BigRational::one();
    }
    if k > n || num == 0 {
        return BigRational::zero();
    }
    let a = BigInt::from(num);
    let b = BigInt::from(den - num);
    let sum_range = |from: u64, to: u64| -> BigInt {
        // term(i) = C(n,i) a^i b^{n-i}, built at i = from, then advanced.
        let mut term = {
            let mut binom = BigInt::one();
            for j in 0..from {
                binom = binom * BigInt::from(n - j) / BigInt::from(j + 1);
            }
            binom * a.pow(from as u32) * b.pow((n - from) as u32)
        };
        let mut acc = term.clone();
        for i in from..to {
            // Each step stays integral: C(n,i)(n-i)/(i+1) = C(n,i+1) and a
            // factor of b is exchanged for one of a.
            term = term * BigInt::from(n - i) / BigInt::from(i + 1) * &a / &b;
            acc += &term;
        }
        acc
    };
    let denominator = BigInt::from(den).pow(n as u32);
    let numerator = if n - k < k {
        sum_range(k, n)
    } else {
        &denominator - sum_range(0, k - 1)
    };
    BigRational::new(numerator, denominator)
}

fn rational_to_f64(x: &BigRational) -> f64 {
    // Scale into an integer so the conversion cannot overflow.
    let scale: i64 = 1 << 62;
    let scaled = (x * BigRational::from_integer(BigInt::from(scale))).to_integer();
    scaled.to_f64().unwrap() / scale as f64
}

/// 4. The incomplete-beta evaluation of the binomial tail matches exact
///    big-rational summation within 1e-12 on a grid of more than 200 cases.
#[test]
fn acceptance_04_binomial_tail_oracle() {
    let ns = [10u64, 25, 50, 100, 250, 500, 750, 1000];
    // delta and c as (float, exact numerator/denominator over 100).
    let deltas: [(f64, u64); 4] = [(0.0, 0), (0.01, 1), (0.1, 10), (0.5, 50)];
    let cs: [(f64, u64); 7] = [
        (0.0, 0),
        (0.02, 2),
        (0.05, 5),
        (0.1, 10),
        (0.2, 20),
        (0.3, 30),
        (0.4, 40),
    ];
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for &n in &ns {
        for &(df, da) in &deltas {
            for &(cf, ca) in &cs {
                if df + cf > 1.0 {
                    continue;
                }
                let spec = TailSpec::new(n, p(df), cf).unwrap();
                let got = binom_tail_cbin(&spec).value();
                // Nominal index ceil(n(delta+c)) with exact integers.
                let k = (n * (da + ca)).div_ceil(100);
                let exact = rational_to_f64(&tail_exact(n, da, 100, k));
                let err = (got - exact).abs();
                assert!(
                    err <= 1e-12,
                    "n={n} delta={df} c={cf}: got {got}, exact {exact}, err {err}"
                );
                worst = worst.max(err);
                cases += 1;
            }
        }
    }
    assert!(cases >= 200, "grid too small: {cases}");
    println!("ACCEPTANCE 04 PASS: {cases} tail cases within 1e-12 of exact summation (worst {worst:.3e})");
}

/// 5. Exact-mode gamma_bin is the minimal grid point with tail <= eps^2,
///    and the Hoeffding mode dominates it on every sampled instance.
#[test]
fn acceptance_05_gamma_bin_inversion() {
    let mut rng = ChaCha12Rng::seed_from_u64(50505);
    let mut checked = 0;
    while checked < 50 {
        let n = 100 + (rng.next_u64() % 4900);
        let delta = 0.002 + unit(&mut rng) * 0.35;
        let eps = 10f64.powf(-(1.5 + unit(&mut rng) * 5.0)); // in [1e-6.5, 1e-1.5]
        let d = p(delta);
        let e = p(eps);
        let c = gamma_bin(n, d, e, GammaBinMethod::Exact).unwrap();
        let eps_sq = eps * eps;
        let at = binom_tail_cbin(&TailSpec::new(n, d, c).unwrap()).value();
        assert!(at <= eps_sq, "tail at c must reach the level (n={n} delta={delta} eps={eps})");
        if c > 0.0 {
            let prev =
                binom_tail_cbin(&TailSpec::new(n, d, c - 1.0 / n as f64).unwrap()).value();
            assert!(prev > eps_sq, "one grid step below must exceed the level (n={n})");
        }
        let h = gamma_bin(n, d, e, GammaBinMethod::Hoeffding).unwrap();
        assert!(h >= c - 1e-12, "hoeffding {h} must dominate exact {c}");
        checked += 1;
    }
    println!("ACCEPTANCE 05 PASS: 50 sampled instances invert tightly; hoeffding always dominates");
}

/// 6. The Serfling tail bound is valid against direct hypergeometric
///    sampling of the test/key split at 1e5 trials.
#[test]
fn acceptance_06_serfling_monte_carlo() {
    let trials = 100_000u64;
    for &(n_test, n_key) in &[(1_000u64, 1_000u64), (10_000, 1_000)] {
        let total = n_test + n_key;
        let ones = total / 10;
        // Level chosen so the bound itself is measurable at 1e5 trials.
        let gamma = gamma_serf(n_test as f64, n_key as f64, p(0.1)).unwrap();
        let bound = serfling_bound(n_test as f64, n_key as f64, gamma).value();
        // Inverse-CDF hypergeometric table over the support
        // [max(0, n_test + ones - total), min(ones, n_test)], built from
        // the exact pmf ratio recurrence in log space.
        let k_min = (n_test + ones).saturating_sub(total);
        let k_max = ones.min(n_test);
        let mut cdf = Vec::with_capacity((k_max - k_min) as usize + 1);
        {
            let ln_choose = |n: u64, k: u64| -> f64 {
                let mut acc = 0.0f64;
                for j in 0..k {
                    acc += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
                }
                acc
            };
            let mut ln_pmf = ln_choose(ones, k_min) + ln_choose(total - ones, n_test - k_min)
                - ln_choose(total, n_test);
            let mut acc = 0.0f64;
            for k in k_min..=k_max {
                if k > k_min {
                    // pmf(k)/pmf(k-1) = (ones-k+1)(n_test-k+1) / (k (total-ones-n_test+k))
                    let num = (ones - k + 1) as f64 * (n_test - k + 1) as f64;
                    let den = k as f64 * (total + k - ones - n_test) as f64;
                    ln_pmf += num.ln() - den.ln();
                }
                acc += ln_pmf.exp();
                cdf.push(acc);
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(606060);
        let mut violations = 0u64;
        for _ in 0..trials {
            let u = unit(&mut rng) * cdf.last().unwrap();
            let k_test = k_min + cdf.partition_point(|c| *c < u) as u64;
            let e_test = k_test as f64 / n_test as f64;
            let e_key = (ones - k_test) as f64 / n_key as f64;
            if e_key >= e_test + gamma {
                violations += 1;
            }
        }
        let freq = violations as f64 / trials as f64;
        let tol = bound + 3.0 * (bound / trials as f64).sqrt();
        assert!(
            freq <= tol,
            "({n_test},{n_key}): violation rate {freq} above bound {bound} + 3se"
        );
        println!(
            "ACCEPTANCE 06 PASS ({n_test},{n_key}): violation rate {freq:.5} <= bound {bound:.5} + 3se"
        );
    }
}

/// 7. Clopper-Pearson coverage at 1e5 trials stays above 1 - eps - 3 sigma
///    for p in {0.01, 0.1, 0.5} and n in {100, 10^4}.
#[test]
fn acceptance_07_clopper_pearson_coverage() {
    let trials = 100_000u64;
    let eps = 0.01f64;
    let tol = 1.0 - eps - 3.0 * (eps / trials as f64).sqrt();
    for &n in &[100u64, 10_000] {
        for &prob in &[0.01f64, 0.1, 0.5, 0.9] {
            let dist = Binomial::new(n, prob).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(707070 + n);
            let mut cache: HashMap<u64, (f64, f64)> = HashMap::new();
            let mut covered = 0u64;
            for _ in 0..trials {
                let x = dist.sample(&mut rng);
                let (lo, hi) = *cache.entry(x).or_insert_with(|| {
                    let (l, h) = clopper_pearson(x, n, p(eps)).unwrap();
                    (l.value(), h.value())
                });
                if lo <= prob && prob <= hi {
                    covered += 1;
                }
            }
            let coverage = covered as f64 / trials as f64;
            assert!(
                coverage >= tol,
                "n={n} p={prob}: coverage {coverage} below {tol}"
            );
            println!("ACCEPTANCE 07 PASS (n={n}, p={prob}): coverage {coverage:.5} >= {tol:.5}");
        }
    }
}

/// 8. On 1000 randomized synthetic yield models with active deviations,
///    the decoy bounds bracket the exact photon-number decomposition with
///    zero violations.
#[test]
fn acceptance_08_decoy_bracketing() {
    let mut rng = ChaCha12Rng::seed_from_u64(80808);
    let eps_d = paper_decoy_budget().eps_d().unwrap();
    let mut worst_margin = f64::INFINITY;
    for instance in 0..1000 {
        let mu1 = 0.5 + unit(&mut rng);
        let mu2 = 0.05 + unit(&mut rng) * 0.15;
        let mu3 = unit(&mut rng) * 0.04;
        let w = [1.0 + unit(&mut rng), 1.0 + unit(&mut rng), 1.0 + unit(&mut rng)];
        let wsum: f64 = w.iter().sum();
        let spec = IntensitySpec::new([mu1, mu2, mu3], [w[0] / wsum, w[1] / wsum, w[2] / wsum])
            .unwrap();
        let n_total = 10f64.powf(6.0 + unit(&mut rng) * 4.0);
        let yields: Vec<f64> = (0..80).map(|_| unit(&mut rng)).collect();

        // Exact expected counts per intensity under the yield model.
        let mut per = [0.0; 3];
        for (k, per_k) in per.iter_mut().enumerate() {
            let mu = spec.mu()[k];
            let mut pois = (-mu).exp();
            let mut acc = 0.0;
            for (m, y) in yields.iter().enumerate() {
                acc += pois * y;
                pois *= mu / (m as f64 + 1.0);
            }
            *per_k = n_total * spec.p_mu()[k] * acc;
        }
        let counts = OutcomeCounts::new(per).unwrap();
        let tau0 = tau_m(&spec, 0).value();
        let tau1 = tau_m(&spec, 1).value();
        let adj = adjusted_counts(&counts, &spec, Deviation::Hoeffding(eps_d)).unwrap();
        let b0 = bound_zero_min(&adj, &spec, tau0).unwrap();
        let b1_min = bound_one_min(&adj, &spec, tau0, tau1, b0).unwrap();
        let b1_max = bound_one_max(&adj, &spec, tau1, counts.total()).unwrap();

        let true0 = n_total * tau0 * yields[0];
        let true1 = n_total * tau1 * yields[1];
        let tol = 1e-9 * n_total;
        assert!(b0 <= true0 + tol, "instance {instance}: b0 {b0} above true {true0}");
        assert!(b1_min <= true1 + tol, "instance {instance}: b1min {b1_min} above true {true1}");
        assert!(
            b1_max >= true1.min(counts.total()) - tol,
            "instance {instance}: b1max {b1_max} below true {true1}"
        );
        worst_margin = worst_margin.min(true1 - b1_min).min(true0 - b0).min(b1_max - true1);
    }
    println!("ACCEPTANCE 08 PASS: 1000 synthetic yield models bracketed with zero violations");
}

/// 9. Toeplitz hashing is ideal universal2 at (m, l) = (4, 2): every
///    distinct pair collides under exactly 8 of the 32 seeds; and all-zero
///    inputs of different lengths collide with probability 1.
#[test]
fn acceptance_09_toeplitz_universality() {
    let m = 4usize;
    let l = 2usize;
    let seed_count = 1usize << (m + l - 1);
    let inputs: Vec<BitString> = (0..(1u32 << m))
        .map(|v| {
            let mut s = BitString::zeros(m);
            for i in 0..m {
                s.set(i, ((v >> i) & 1) as u8);
            }
            s
        })
        .collect();
    for a in 0..inputs.len() {
        for b in (a + 1)..inputs.len() {
            let mut collisions = 0usize;
            for sv in 0..seed_count {
                let mut bits = BitString::zeros(m + l - 1);
                for i in 0..(m + l - 1) {
                    bits.set(i, ((sv >> i) & 1) as u8);
                }
                let seed = ToeplitzSeed::new(bits);
                if toeplitz_hash(&seed, &inputs[a], l).unwrap()
                    == toeplitz_hash(&seed, &inputs[b], l).unwrap()
                {
                    collisions += 1;
                }
            }
            assert_eq!(collisions, 8, "pair ({a},{b}) must collide under exactly 8 seeds");
        }
    }
    for key in 0..200u64 {
        let table = SeedTable::from_prng(key, 16);
        let h1 = pa_variable_input(&BitString::zeros(33), &table).unwrap();
        let h2 = pa_variable_input(&BitString::zeros(77), &table).unwrap();
        assert_eq!(h1, h2, "zero strings of different lengths must always collide");
    }
    println!("ACCEPTANCE 09 PASS: (4,2) exhaustively ideal universal2; variable-length zero-string collision certain");
}

/// 10. Authentication post-processing invariants over 1e4 randomized
///     adversary runs: core auth-aborts force (0,0), all outcomes lie in
///     the allowed set, honest runs keep equal nonzero lengths.
#[test]
fn acceptance_10_authentication_invariants() {
    let schedule: Vec<SendEvent> = (0..8)
        .map(|i| SendEvent {
            direction: if i % 2 == 0 { Direction::AToB } else { Direction::BToA },
            payload: vec![i as u8, 0x5A],
            t_sent: 5.0 * (i as f64 + 1.0),
        })
        .collect();
    let honest = run_app(
        Some(512),
        Some(512),
        &run_channel(&schedule, &AdversaryPolicy::honest()).unwrap(),
        &AdversaryPolicy::honest(),
    )
    .unwrap();
    assert_eq!((honest.l_a, honest.l_b), (512, 512));

    let mut aborted_runs = 0u32;
    for seed in 0..10_000u64 {
        let policy = AdversaryPolicy::randomized(seed, schedule.len(), 2);
        let core = run_channel(&schedule, &policy).unwrap();
        let out = run_app(Some(512), Some(512), &core, &policy).unwrap();
        let (la, lb) = (out.l_a, out.l_b);
        assert!(
            la == lb || la == 0 || lb == 0,
            "seed {seed}: outcome ({la},{lb}) outside the allowed set"
        );
        if core.iter().any(|e| e.status == DeliveryStatus::AuthAbort) {
            aborted_runs += 1;
            assert_eq!((la, lb), (0, 0), "seed {seed}: core auth-abort must abort both");
        }
    }
    assert!(aborted_runs > 1000, "adversary sampling should hit abort paths");
    println!(
        "ACCEPTANCE 10 PASS: 10000 adversarial runs in the allowed outcome set; {aborted_runs} core-abort runs all ended (0,0)"
    );
}

/// 11. Postselection accounting: the protocol dimension parameters come
///     out as 20 and 3600, the symmetric-subspace logarithm matches exact
///     binomials, and the epsilon lift inverts its requirement transform.
#[test]
fn acceptance_11_postselection_accounting() {
    assert_eq!(x_block_diagonal(&qubit_bb84_blocks()).unwrap(), 20);
    assert_eq!(x_block_diagonal(&decoy_bb84_blocks(3, 4)).unwrap(), 3600);

    fn binom_u128(n: u64, k: u64) -> u128 {
        let k = k.min(n - k);
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc
    }
    for x in 1u32..=59 {
        for n in 0u64..=(60 - x as u64) {
            let exact = (binom_u128(n + x as u64 - 1, n) as f64).log2();
            let got = log2_sym_dim(n, x).unwrap();
            assert!((got - exact).abs() < 1e-9, "n={n} x={x}");
        }
    }

    for &(n, x) in &[(10u64.pow(10), 20u32), (10u64.pow(10), 3600), (1_000, 7)] {
        let target = LogProb::from_linear(1e-10);
        let params = PSParams::with_default_eps_tilde(n, x, target).unwrap();
        let iid = required_iid_epsilon(target, &params).unwrap();
        let roundtrip = lift_epsilon(iid, &params);
        assert!(
            (roundtrip.log2() - target.log2()).abs() < 1e-9,
            "lift must invert at n={n}, x={x}"
        );
    }
    println!("ACCEPTANCE 11 PASS: x = 20 and 3600 reproduced; sym-dim exact to 1e-9; lift inverts to 1e-9 in log domain");
}

/// 12. With a fixed honest channel and 25-trial Monte Carlo, the
///     variable-length expected rate is at least the best fixed-length
///     expected rate over a 10-point tolerance grid, within 3 standard
///     errors.
#[test]
fn acceptance_12_expected_rate_ordering() {
    let channel = ChannelModel {
        loss_db: 2.0,
        misalignment_deg: 1.0,
        depolarization: 0.01,
        detector: DetectorSpec::new(0.7, 0.0, 1e-6, 0.0, false).unwrap(),
    };
    let params = ProtocolParams {
        n: 10_000_000,
        alice_x_prob: 0.3,
        bob_x_prob: 0.3,
        intensities: None,
        budget: EpsilonBudget::qubit_even(
            LogProb::from_linear(5e-11),
            LogProb::from_linear(1e-10),
            LogProb::from_linear(5e-11),
        )
        .unwrap(),
        f_ec: 1.16,
    };
    let trials = 25;
    let seed = 1212;
    let (var_rate, var_se) =
        expected_key_rate(RateMode::Variable, &channel, &params, trials, seed).unwrap();
    assert!(var_rate > 0.0, "variable rate must be positive on this channel");

    let mut best_fixed = 0.0f64;
    let mut best_se = 0.0f64;
    let mut best_t = 0.0f64;
    for i in 0..10 {
        // Log-spaced tolerances from 1e-5 to ~3e-2.
        let t = 1e-5 * 10f64.powf(i as f64 * 3.5 / 9.0);
        let (rate, se) = expected_key_rate(RateMode::Fixed(t), &channel, &params, trials, seed).unwrap();
        if rate > best_fixed {
            best_fixed = rate;
            best_se = se;
            best_t = t;
        }
    }
    let slack = 3.0 * (var_se * var_se + best_se * best_se).sqrt();
    assert!(
        var_rate >= best_fixed - slack,
        "variable {var_rate} must not trail best fixed {best_fixed} (t = {best_t}) beyond {slack}"
    );
    println!(
        "ACCEPTANCE 12 PASS: variable rate {var_rate:.6} >= best fixed rate {best_fixed:.6} (t = {best_t:.2e}) - 3se ({slack:.2e})"
    );
}
