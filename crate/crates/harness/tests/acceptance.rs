//! Acceptance criteria, one line each. Runs with `harness = false` so the
//! lines are printed even when everything passes.

use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use gibbsbd::config::ExperimentConfig;
use gibbsbd::experiments::spatial_mixing_rows;
use gibbsbd::stats::chi_square_p_value;
use gibbsbd::RayonRunner;
use gibbsbd_core::coupling::{contraction_rate, DisagreementSampler};
use gibbsbd_core::gibbs::{collar_point, gnz_residual, sample_exact, GnzStatistic};
use gibbsbd_core::oracle::{compare_to_simulation, discretization_term};
use gibbsbd_core::percolation::{non_increasing_within, ordered_hitting_check, poisson_tail, PercolationSetup};
use gibbsbd_core::potential::{penrose_ruelle_threshold, uniqueness_threshold, weak_temperedness_constant};
use gibbsbd_core::stats::{binomial, chi_square_two_sample, histogram, Welford};
use gibbsbd_core::{
    discretize, exact_stationary, run_percolation, simulate_coupled, BirthDeathSpec, BoxGrid, BoxRegion, GibbsSpec, PointConfiguration,
    PotentialSpec, ReplicaRng, ReplicaRunner,
};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn interval(lo: f64, hi: f64) -> BoxRegion {
    BoxRegion::new(vec![lo], vec![hi]).unwrap()
}

fn runner() -> RayonRunner {
    RayonRunner::new(0).unwrap()
}

fn c1_thresholds() -> Verdict {
    let hs = PotentialSpec::hard_sphere(2, 1.0).unwrap();
    let est = weak_temperedness_constant(&hs, 1e-12, None).unwrap();
    let a = uniqueness_threshold(&hs, &est);
    let st = PotentialSpec::strauss(1, 1.0, 1.0).unwrap();
    let est = weak_temperedness_constant(&st, 1e-12, None).unwrap();
    let b = uniqueness_threshold(&st, &est);
    let want_b = 1.0 / (2.0 * (1.0 - (-1.0f64).exp()));
    let ok = (a - 1.0 / std::f64::consts::PI).abs() <= 1e-6 && (b - want_b).abs() <= 1e-6;
    check(ok, format!("hard sphere {a:.9} vs 1/pi, strauss {b:.9} vs {want_b:.9}"))
}

fn c2_improvement() -> Verdict {
    let e = std::f64::consts::E;
    let mut worst = f64::INFINITY;
    let mut cases = Vec::new();
    for d in 1..=3 {
        cases.push(PotentialSpec::hard_sphere(d, 1.0).unwrap());
        cases.push(PotentialSpec::hard_sphere(d, 0.3).unwrap());
        for beta in [0.1, 1.0, 5.0] {
            cases.push(PotentialSpec::strauss(d, 0.7, beta).unwrap());
        }
    }
    for phi in &cases {
        let est = weak_temperedness_constant(phi, 1e-12, None).unwrap();
        worst = worst.min(uniqueness_threshold(phi, &est) / penrose_ruelle_threshold(phi, &est));
    }
    let sw = PotentialSpec::square_well(1, 0.5, 1.0, 0.2, 0.4).unwrap();
    let est = weak_temperedness_constant(&sw, 1e-12, None).unwrap();
    let sw_ratio = uniqueness_threshold(&sw, &est) / penrose_ruelle_threshold(&sw, &est);
    check(
        worst >= e - 1e-6 && sw_ratio > e,
        format!("min repulsive ratio {worst:.9} over {} potentials, square well ratio {sw_ratio:.6}", cases.len()),
    )
}

fn c3_oracle() -> Verdict {
    let spec = GibbsSpec::free(0.5, PotentialSpec::hard_sphere(1, 0.5).unwrap(), interval(0.0, 1.0)).unwrap();
    let inst = discretize(&spec, 6).map_err(|e| e.to_string())?;
    let chain = exact_stationary(&inst).map_err(|e| e.to_string())?;
    let bd = BirthDeathSpec::new(spec);
    let empty = PointConfiguration::empty(1);
    let samples: Vec<PointConfiguration> =
        runner().run(100_000, |i| bd.run_to(&empty, 50.0, &mut ReplicaRng::new(3, i)).unwrap());
    let term = discretization_term(&inst, &chain).map_err(|e| e.to_string())?;
    let cmp = compare_to_simulation(&inst, &chain, &samples, term).map_err(|e| e.to_string())?;
    check(
        cmp.passes(0.02),
        format!(
            "TV {:.5} <= 0.02 + discretization {:.5} (chi2 p = {:.3e}, {} off-support)",
            cmp.tv,
            cmp.discretization_term,
            chi_square_p_value(&cmp.chi_square),
            cmp.off_support
        ),
    )
}

fn c4_gnz() -> Verdict {
    let instances = [
        ("zero", GibbsSpec::free(1.5, PotentialSpec::zero(1), interval(0.0, 2.0)).unwrap()),
        ("hard sphere", GibbsSpec::free(0.8, PotentialSpec::hard_sphere(1, 0.3).unwrap(), interval(0.0, 2.0)).unwrap()),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (seed, (name, spec)) in instances.iter().enumerate() {
        let zs: Vec<f64> = runner().run(20, |r| gnz_residual(spec, &GnzStatistic::One, 100_000, &mut ReplicaRng::new(40 + seed as u64, r)).unwrap().z_score);
        let inside = zs.iter().filter(|z| z.abs() < 3.0).count();
        ok &= inside >= 19;
        parts.push(format!("{name}: {inside}/20"));
    }
    check(ok, format!("|z| < 3 in {}", parts.join(", ")))
}

fn hs_instance(lambda_fraction: f64) -> (BirthDeathSpec, f64) {
    let phi = PotentialSpec::hard_sphere(1, 0.5).unwrap();
    let est = weak_temperedness_constant(&phi, 1e-12, None).unwrap();
    let lambda = lambda_fraction * uniqueness_threshold(&phi, &est);
    let bd = BirthDeathSpec::new(GibbsSpec::free(lambda, phi, interval(0.0, 2.0)).unwrap());
    let delta = contraction_rate(&bd, &est);
    (bd, delta)
}

fn c5_contraction() -> Verdict {
    let (bd, delta) = hs_instance(0.8);
    let eta1 = PointConfiguration::from_points(1, [[0.25], [1.25]]).unwrap();
    let eta2 = PointConfiguration::from_points(1, [[0.75], [1.75]]).unwrap();
    let times = vec![1.0, 2.0, 4.0];
    let values: Vec<Vec<u64>> = runner().run(10_000, |i| {
        let mut s = DisagreementSampler::new(times.clone());
        simulate_coupled(&bd, &bd, &eta1, &eta2, 4.0, &mut ReplicaRng::new(5, i), &mut s).unwrap();
        s.values().to_vec()
    });
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, t) in times.iter().enumerate() {
        let e = values.iter().map(|v| v[j] as f64).collect::<Welford>().estimate();
        let limit = 4.0 * (-delta * t).exp() * (1.0 + 3.0 * e.se);
        ok &= e.mean <= limit;
        parts.push(format!("t={t}: {:.4} <= {:.4}", e.mean, limit));
    }
    check(ok, format!("delta = {delta:.4}; {}", parts.join(", ")))
}

fn c6_mixing_ceiling() -> Verdict {
    let (bd, delta) = hs_instance(0.8);
    let g = bd.gibbs();
    let mass = g.lambda() * g.potential().local_stability().exp() * g.volume();
    let empty = PointConfiguration::empty(1);
    let times = vec![2.0, 4.0, 8.0];
    let joined: Vec<Vec<bool>> = runner().run(10_000, |i| {
        let mut rng = ReplicaRng::new(6, i);
        let partner = sample_exact(g, &mut rng).unwrap();
        let mut s = DisagreementSampler::new(times.clone());
        simulate_coupled(&bd, &bd, &empty, &partner, 8.0, &mut rng, &mut s).unwrap();
        s.coalesced().to_vec()
    });
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, t) in times.iter().enumerate() {
        let apart = joined.iter().filter(|c| !c[j]).count() as u64;
        let e = binomial(apart, joined.len() as u64);
        let ceiling = (-delta * t).exp() * mass;
        ok &= e.mean <= ceiling + 3.0 * e.se;
        parts.push(format!("t={t}: {:.4} <= {:.4}", e.mean, ceiling));
    }
    check(ok, parts.join(", "))
}

fn c7_marginals() -> Verdict {
    let hs = PotentialSpec::hard_sphere(1, 0.5).unwrap();
    let st = PotentialSpec::strauss(1, 0.6, 0.8).unwrap();
    let hs2 = PotentialSpec::hard_sphere(2, 0.4).unwrap();
    let square = BoxRegion::new(vec![0.0, 0.0], vec![1.5, 1.5]).unwrap();
    let instances = [
        (
            GibbsSpec::free(0.8, hs.clone(), interval(0.0, 2.0)).unwrap(),
            GibbsSpec::new(0.8, hs, interval(0.0, 2.0), PointConfiguration::from_points(1, [[2.2]]).unwrap()).unwrap(),
            6.0,
        ),
        (
            GibbsSpec::free(1.2, st.clone(), interval(0.0, 2.0)).unwrap(),
            GibbsSpec::new(1.2, st, interval(0.0, 2.0), PointConfiguration::from_points(1, [[-0.3], [2.4]]).unwrap()).unwrap(),
            3.0,
        ),
        (
            GibbsSpec::free(1.0, hs2.clone(), square.clone()).unwrap(),
            GibbsSpec::new(1.0, hs2, square.clone(), collar_point(&square, 0, 0.2).unwrap()).unwrap(),
            4.0,
        ),
    ];
    let mut worst = 1.0f64;
    let mut parts = Vec::new();
    for (k, (a, b, t)) in instances.iter().enumerate() {
        let (a, b) = (BirthDeathSpec::new(a.clone()), BirthDeathSpec::new(b.clone()));
        let empty = PointConfiguration::empty(a.gibbs().dim());
        let seed = 70 + 2 * k as u64;
        let coupled: Vec<(usize, usize)> = runner().run(10_000, |i| {
            let s = simulate_coupled(&a, &b, &empty, &empty, *t, &mut ReplicaRng::new(seed, i), &mut ()).unwrap().final_state;
            (s.eta1().count() as usize, s.eta2().count() as usize)
        });
        let single = |spec: &BirthDeathSpec, seed: u64| -> Vec<u64> {
            histogram(runner().run(10_000, |i| spec.run_to(&empty, *t, &mut ReplicaRng::new(seed, i)).unwrap().count() as usize))
        };
        for (side, spec, stream) in [(0, &a, seed + 1000), (1, &b, seed + 2000)] {
            let marginal = histogram(coupled.iter().map(|p| if side == 0 { p.0 } else { p.1 }));
            let chi = chi_square_two_sample(&marginal, &single(spec, stream), 5.0).map_err(|e| e.to_string())?;
            let p = chi_square_p_value(&chi);
            worst = worst.min(p);
            parts.push(format!("{}{}: p={p:.3}", k + 1, if side == 0 { "a" } else { "b" }));
        }
    }
    // two marginals per instance, so each is tested at half the level
    check(worst >= 0.005, format!("min p {worst:.4} >= 0.01/2; {}", parts.join(", ")))
}

fn c8_ordered_hitting() -> Verdict {
    let phi = PotentialSpec::hard_sphere(1, 1.0).unwrap();
    let lambda = 0.25;
    let grid = BoxGrid::new(1, 1.0, 4).unwrap();
    let xi = collar_point(&grid.region(), 0, 0.5).unwrap();
    let setup = PercolationSetup::new(&phi, lambda, 4, xi, PointConfiguration::empty(1)).map_err(|e| e.to_string())?;
    let rho = lambda * phi.local_stability().exp() * phi.range();
    let chain = vec![vec![4], vec![3], vec![2]];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, t) in [2.0, 8.0].into_iter().enumerate() {
        let records = setup.records(t, 100_000, 80 + k as u64, &runner()).map_err(|e| e.to_string())?;
        let h = ordered_hitting_check(&grid, &records, &chain, t, rho).map_err(|e| e.to_string())?;
        debug_assert_eq!(h.bound, poisson_tail(rho, t, 3));
        ok &= h.empirical.mean <= h.bound + 3.0 * h.empirical.se;
        parts.push(format!("t={t}: {:.5} <= {:.5}", h.empirical.mean, h.bound));
    }
    check(ok, format!("rho = {rho}; {}", parts.join(", ")))
}

fn c9_percolation() -> Verdict {
    let phi = PotentialSpec::hard_sphere(1, 1.0).unwrap();
    let est = weak_temperedness_constant(&phi, 1e-12, None).unwrap();
    let lambda = 0.5 * uniqueness_threshold(&phi, &est);
    let grid = BoxGrid::new(1, 1.0, 6).unwrap();
    let xi = collar_point(&grid.region(), 0, 0.5).unwrap();
    let window = gibbsbd_core::percolation::percolation_window(&phi, lambda, 6, 0);
    let t = 0.5 * window;
    let r = run_percolation(6, 0, &phi, lambda, xi, PointConfiguration::empty(1), t, 100_000, 9, &runner()).map_err(|e| e.to_string())?;
    check(
        r.reach.mean <= r.ceiling + 3.0 * r.reach.se && r.locality_violations == 0,
        format!(
            "t = {t:.4} (window {window:.4}): reach {:.6} <= e^-6 = {:.6}; {} locality violations; outer-box hit rate {:.4}",
            r.reach.mean, r.ceiling, r.locality_violations, r.profile[6].mean
        ),
    )
}

fn c10_spatial_mixing() -> Verdict {
    let config = ExperimentConfig::from_toml(
        r#"
        experiment = "spatial-mixing"
        seed = 10
        lambda = 0.25
        replicas = 20000
        [potential]
        kind = "hard_sphere"
        dim = 1
        radius = 1.0
        [boundary]
        kind = "empty"
        [boundary2]
        kind = "saturated_collar"
        spacing = 1.0
        [spatial_mixing]
        k = 1
        n_values = [2, 4, 6]
        policy = "mixing_fallback"
        "#,
    )
    .map_err(|e| e.to_string())?
    .resolve();
    config.validate().map_err(|e| e.to_string())?;
    let rows = spatial_mixing_rows(&config, &runner()).map_err(|e| e.to_string())?;
    let last = rows.last().expect("three rows");
    let below = last.distance.distance <= (-6.0f64).exp() + 3.0 * last.distance.se;
    let parts: Vec<String> = rows
        .iter()
        .map(|r| format!("n={}: {:.5} (se {:.5}, t={:.2}{})", r.n, r.distance.distance, r.distance.se, r.t, if r.fallback { ", fallback" } else { "" }))
        .collect();
    check(non_increasing_within(&rows, 3.0) && below, parts.join(", "))
}

fn payload(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "meta.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c11_determinism() -> Verdict {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = Vec::new();
    for (name, overrides) in [
        ("simulate.toml", vec!["--replicas", "500"]),
        ("couple.toml", vec!["--replicas", "500"]),
        ("percolate.toml", vec!["--replicas", "2000"]),
        ("gnz.toml", vec![]),
        ("oracle.toml", vec!["--replicas", "2000"]),
        ("partition.json", vec![]),
    ] {
        let mut outs = Vec::new();
        for jobs in ["1", "4"] {
            let dir = tmp.path().join(format!("{name}-{jobs}"));
            let config = root.join(name);
            let mut args = vec!["gibbsbd", "--jobs", jobs, "--out-dir", dir.to_str().unwrap(), "run", "--config", config.to_str().unwrap()];
            let sub = name.split('.').next().unwrap();
            if !overrides.is_empty() {
                // overrides need the experiment subcommand rather than `run`
                args[5] = match sub {
                    "gnz" => "gnz-check",
                    other => other,
                };
                args.extend(overrides.iter().copied());
            }
            let cli = gibbsbd::cli::Cli::try_parse_from(args).map_err(|e| e.to_string())?;
            gibbsbd::cli::run(&cli).map_err(|e| format!("{name}: {e}"))?;
            outs.push(payload(&dir));
        }
        if outs[0] != outs[1] {
            return Err(format!("{name}: payload differs between --jobs 1 and --jobs 4"));
        }
        compared.push(format!("{name} ({} files)", outs[0].len()));
    }
    Ok(format!("byte-identical payloads: {}", compared.join(", ")))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 11] = [
        ("threshold correctness", Duration::from_secs(1), c1_thresholds),
        ("Penrose-Ruelle improvement", Duration::from_secs(1), c2_improvement),
        ("oracle stationarity", Duration::from_secs(300), c3_oracle),
        ("GNZ identity", Duration::from_secs(600), c4_gnz),
        ("contraction", Duration::from_secs(300), c5_contraction),
        ("TV mixing ceiling", Duration::from_secs(300), c6_mixing_ceiling),
        ("coupling marginals", Duration::from_secs(300), c7_marginals),
        ("ordered hitting-time bound", Duration::from_secs(600), c8_ordered_hitting),
        ("percolation ceiling", Duration::from_secs(900), c9_percolation),
        ("spatial-mixing decay", Duration::from_secs(1200), c10_spatial_mixing),
        ("determinism", Duration::from_secs(1200), c11_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || (i + 1).to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let (mut ok, detail) = match verdict {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let mut timing = format!("{:.2} s", elapsed.as_secs_f64());
        if elapsed > *budget {
            ok = false;
            timing.push_str(&format!(", over the {} s budget", budget.as_secs()));
        }
        println!("criterion {:>2} [{}] {name}: {detail} ({timing})", i + 1, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
