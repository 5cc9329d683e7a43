//! Effective resistance, traces and hitting estimates on random networks.

use lerw::exactlaw::{traced_kernel, TraceVariant};
use lerw::network::{
    check_exit_time_bound, check_hitting_bound, effective_resistance, harmonic_extension, trace_network,
    walk_from_network,
};
use lerw::rng::{trajectory_rng, StreamRng};
use lerw::{ElectricalNetwork, EntrySampler, Rational, Scalar, StateSet};
use rand::Rng;

/// A connected network: a random spanning tree plus extra edges.
fn random_edges(n: usize, extra: f64, rng: &mut StreamRng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for u in 0..n {
        for v in u + 1..n {
            if !edges.contains(&(u, v)) && rng.gen_bool(extra) {
                edges.push((u, v));
            }
        }
    }
    edges
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

fn random_network(n: usize, rng: &mut StreamRng) -> ElectricalNetwork<f64> {
    let edges = random_edges(n, 0.3, rng)
        .into_iter()
        .map(|(u, v)| (u, v, rng.gen_range(0.1..10.0)))
        .collect();
    ElectricalNetwork::new(labels(n), edges).unwrap()
}

fn random_rational_network(n: usize, rng: &mut StreamRng) -> ElectricalNetwork<Rational> {
    let edges = random_edges(n, 0.3, rng)
        .into_iter()
        .map(|(u, v)| (u, v, Rational::from_ratio(rng.gen_range(1..10), rng.gen_range(1..5))))
        .collect();
    ElectricalNetwork::new(labels(n), edges).unwrap()
}

#[test]
fn resistance_is_a_metric() {
    for i in 0..1000 {
        let mut rng = trajectory_rng(21, i);
        let n = rng.gen_range(2..=12);
        let net = random_network(n, &mut rng);
        let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        let rxy = effective_resistance(&net, x, y).unwrap();
        let ryx = effective_resistance(&net, y, x).unwrap();
        let ryz = effective_resistance(&net, y, z).unwrap();
        let rxz = effective_resistance(&net, x, z).unwrap();
        assert!((rxy - ryx).abs() <= 1e-9, "symmetry on network {i}");
        assert!(rxz <= rxy + ryz + 1e-9, "triangle inequality on network {i}");
        assert_eq!(rxy == 0.0, x == y);
        assert!(rxy >= 0.0);
    }
}

fn conductance_by_label<S: Scalar>(net: &ElectricalNetwork<S>, a: &str, b: &str) -> f64 {
    net.conductance(net.index_of(a).unwrap(), net.index_of(b).unwrap()).to_f64()
}

#[test]
fn traces_compose_and_keep_resistances() {
    for i in 0..200 {
        let mut rng = trajectory_rng(22, i);
        let n = rng.gen_range(4..=12);
        let net = random_network(n, &mut rng);
        let outer: StateSet = (0..n).filter(|&v| v < 3 || rng.gen_bool(0.5)).collect();
        let inner: StateSet = (0..3).collect();
        let once = trace_network(&net, &inner).unwrap();
        let twice = {
            let first = trace_network(&net, &outer).unwrap();
            let inner_in_first: StateSet = (0..3).map(|v| first.index_of(&format!("v{v}")).unwrap()).collect();
            trace_network(&first, &inner_in_first).unwrap()
        };
        assert_eq!(once.labels(), twice.labels());
        for a in once.labels() {
            for b in once.labels() {
                if a != b {
                    let (c1, c2) = (conductance_by_label(&once, a, b), conductance_by_label(&twice, a, b));
                    assert!((c1 - c2).abs() <= 1e-10 * c1.max(1.0), "network {i}: {c1} vs {c2}");
                }
            }
        }
        for (x, y) in [(0, 1), (0, 2), (1, 2)] {
            let r = effective_resistance(&net, x, y).unwrap();
            let rt = effective_resistance(&once, x, y).unwrap();
            assert!((r - rt).abs() <= 1e-10 * r.max(1.0));
        }
    }
}

#[test]
fn network_trace_is_the_walk_watched_on_the_subset() {
    for i in 0..100 {
        let mut rng = trajectory_rng(23, i);
        let n = rng.gen_range(3..=7);
        let net = random_rational_network(n, &mut rng);
        let subset: StateSet = (0..n).filter(|&v| v < 2 || rng.gen_bool(0.5)).collect();
        let traced_net = walk_from_network(&trace_network(&net, &subset).unwrap());
        let watched = traced_kernel(&walk_from_network(&net), &subset, &StateSet::empty(), TraceVariant::ExcludeCurrent)
            .unwrap()
            .chain;
        assert_eq!(traced_net.labels(), watched.labels());
        assert_eq!(traced_net.dense_rows(), watched.dense_rows(), "network {i}");
    }
}

#[test]
fn hitting_probability_bound_holds() {
    let mut informative = 0;
    for i in 0..1000 {
        let mut rng = trajectory_rng(24, i);
        let net = random_rational_network(8, &mut rng);
        let target = StateSet::from([7]);
        let x = rng.gen_range(0..7);
        let y = rng.gen_range(0..7);
        let report = check_hitting_bound(&net, x, y, &target).unwrap();
        assert!(report.holds(), "network {i}: {report:?}");
        informative += usize::from(!report.vacuous());
    }
    assert!(informative > 100);
}

#[test]
fn exit_time_bound_holds() {
    for i in 0..300 {
        let mut rng = trajectory_rng(25, i);
        let n = rng.gen_range(3..=8);
        let net = random_rational_network(n, &mut rng);
        let target: StateSet = (1..n).filter(|_| rng.gen_bool(0.4)).collect();
        let target = if target.is_empty() { StateSet::from([n - 1]) } else { target };
        let report = check_exit_time_bound(&net, 0, &target).unwrap();
        assert!(report.holds(), "network {i}: {report:?}");
    }
}

#[test]
fn harmonic_values_match_simulated_hitting() {
    // A triangle 0-1-2 with a pendant 3 hanging off 2.
    let net = ElectricalNetwork::unit(labels(4), &[(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
    let h = harmonic_extension(&net, &[(1, 1.0), (3, 0.0)]).unwrap();
    let chain = walk_from_network(&net);
    let sampler = EntrySampler::new(&chain, &StateSet::from([1, 3])).unwrap();
    let n = 100_000;
    let hits = (0..n)
        .filter(|&i| *sampler.sample(0, &mut trajectory_rng(26, i)).unwrap().last() == 1)
        .count();
    let p = hits as f64 / n as f64;
    let sigma = (h[0] * (1.0 - h[0]) / n as f64).sqrt();
    assert!((p - h[0]).abs() <= 3.0 * sigma, "simulated {p}, harmonic {}", h[0]);
}
