use gibbsbd_core::coupling::simulate_coupled;
use gibbsbd_core::dynamics::{Jump, Observer};
use gibbsbd_core::gibbs::sample_exact;
use gibbsbd_core::percolation::{run_percolation, PercolationSetup};
use gibbsbd_core::stats::binomial;
use gibbsbd_core::{
    discretize, exact_stationary, BirthDeathSpec, BoxGrid, BoxRegion, CoupledDiscreteChain, GibbsSpec, PointConfiguration, PotentialSpec,
    ReplicaRng, Sequential,
};

fn unit() -> BoxRegion {
    BoxRegion::new(vec![0.0], vec![1.0]).unwrap()
}

#[test]
fn free_occupancy_marginals_are_bernoulli() {
    let lambda = 1.0;
    let spec = GibbsSpec::free(lambda, PotentialSpec::zero(1), unit()).unwrap();
    let inst = discretize(&spec, 4).unwrap();
    let bd = BirthDeathSpec::new(spec);
    let empty = PointConfiguration::empty(1);
    let runs = 4000u64;
    let mut hits = [0u64; 4];
    for i in 0..runs {
        let mut rng = ReplicaRng::new(11, i);
        let eta = bd.run_to(&empty, 15.0, &mut rng).unwrap();
        for (c, h) in hits.iter_mut().enumerate() {
            if eta.count_in(&inst.cells()[c]) > 0 {
                *h += 1;
            }
        }
    }
    let p = 1.0 - (-lambda * 0.25f64).exp();
    for h in hits {
        let e = binomial(h, runs);
        assert!((e.mean - p).abs() <= 3.0 * e.se, "{} vs {p}", e.mean);
    }
}

#[test]
fn zero_activity_stays_empty() {
    let spec = GibbsSpec::free(0.0, PotentialSpec::hard_sphere(1, 0.5).unwrap(), unit()).unwrap();
    let inst = discretize(&spec, 6).unwrap();
    let chain = exact_stationary(&inst).unwrap();
    assert_eq!(chain.probability(&inst, &[0; 6]), 1.0);
    let bd = BirthDeathSpec::new(spec);
    let start = PointConfiguration::from_points(1, [[0.2], [0.9]]).unwrap();
    for i in 0..50 {
        let eta = bd.run_to(&start, 30.0, &mut ReplicaRng::new(2, i)).unwrap();
        assert!(eta.is_empty());
    }
}

/// Counts jumps between the four occupancy classes of the two half-intervals.
struct Flux {
    left: BoxRegion,
    class: usize,
    counts: [[u64; 4]; 4],
}

impl Flux {
    fn class_of(&self, eta: &PointConfiguration) -> usize {
        let l = eta.count_in(&self.left) > 0;
        let r = eta.count() > eta.count_in(&self.left);
        usize::from(l) + 2 * usize::from(r)
    }
}

impl Observer for Flux {
    fn jump(&mut self, _time: f64, _jump: Jump<'_>, state: &PointConfiguration) {
        let next = self.class_of(state);
        if next != self.class {
            self.counts[self.class][next] += 1;
            self.class = next;
        }
    }
}

#[test]
fn occupancy_class_flux_balances() {
    let phi = PotentialSpec::strauss(1, 0.4, 0.8).unwrap();
    let spec = GibbsSpec::free(1.5, phi, unit()).unwrap();
    let bd = BirthDeathSpec::new(spec.clone());
    let mut total = [[0u64; 4]; 4];
    for i in 0..200 {
        let mut rng = ReplicaRng::new(5, i);
        let start = sample_exact(&spec, &mut rng).unwrap();
        let mut flux = Flux { left: BoxRegion::new(vec![0.0], vec![0.5]).unwrap(), class: 0, counts: [[0; 4]; 4] };
        flux.class = flux.class_of(&start);
        bd.simulate(&start, 50.0, &mut rng, &mut flux).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                total[a][b] += flux.counts[a][b];
            }
        }
    }
    let mut compared = 0;
    for a in 0..4 {
        for b in (a + 1)..4 {
            let (x, y) = (total[a][b] as f64, total[b][a] as f64);
            if x + y > 0.0 {
                compared += 1;
                assert!((x - y).abs() <= 3.0 * (x + y).sqrt(), "{a}<->{b}: {x} vs {y}");
            }
        }
    }
    assert!(compared >= 4);
}

#[test]
fn single_point_disagreement_coalesces() {
    let phi = PotentialSpec::hard_sphere(1, 0.5).unwrap();
    let spec = GibbsSpec::free(0.2, phi, unit()).unwrap();
    let inst = discretize(&spec, 4).unwrap();
    let oracle = CoupledDiscreteChain::new(&inst, &inst, &[0, 0, 0, 0], &[0, 1, 0, 0]).unwrap();
    let exact = oracle.coalescence_probability(&inst, &inst, 10.0);
    assert!(exact > 0.9);
    let bd = BirthDeathSpec::new(spec);
    let empty = PointConfiguration::empty(1);
    let one = PointConfiguration::from_points(1, [[0.375]]).unwrap();
    let runs = 5000u64;
    let mut joined = 0;
    for i in 0..runs {
        let s = simulate_coupled(&bd, &bd, &empty, &one, 10.0, &mut ReplicaRng::new(8, i), &mut ()).unwrap();
        joined += u64::from(s.coalescence_time.is_some());
    }
    let e = binomial(joined, runs);
    assert!(e.mean > 0.9);
    assert!((e.mean - exact).abs() <= 3.0 * e.se + 0.01, "{} vs {exact}", e.mean);
}

#[test]
fn two_dimensional_percolation_is_local() {
    let phi = PotentialSpec::hard_sphere(2, 1.0).unwrap();
    let grid = BoxGrid::new(2, 1.0, 2).unwrap();
    let region = grid.region();
    let xi = PointConfiguration::from_points(2, [[region.upper()[0] + 0.5, 0.0]]).unwrap();
    let report = run_percolation(2, 0, &phi, 0.3, xi.clone(), PointConfiguration::empty(2), 6.0, 300, 4, &Sequential).unwrap();
    assert_eq!(report.locality_violations, 0);
    assert!(report.profile[2].mean >= report.profile[1].mean);
    let setup = PercolationSetup::new(&phi, 0.3, 2, xi, PointConfiguration::empty(2)).unwrap();
    let rec = setup.hitting_record(6.0, 4, 0).unwrap();
    assert_eq!(rec, report.records[0]);
}
