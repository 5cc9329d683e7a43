//! Geometry and symmetry of the gasket and carpet graphs.

use lerw::fractal::uniform_network;
use lerw::network::{effective_resistance, trace_network};
use lerw::{carpet_graph, gasket_graph, CarpetTemplate, FractalGraph, Rational, StateSet};
use num_traits::{One, Zero};

fn corner_resistances(graph: &FractalGraph, pairs: &[(&str, &str)]) -> Vec<Rational> {
    let net = uniform_network::<Rational>(graph);
    pairs
        .iter()
        .map(|(a, b)| effective_resistance(&net, graph.index_of(a).unwrap(), graph.index_of(b).unwrap()).unwrap())
        .collect()
}

#[test]
fn gasket_corners_are_interchangeable() {
    for m in 0..=3 {
        let g = gasket_graph(m).unwrap();
        let r = corner_resistances(&g, &[("q1", "q2"), ("q2", "q3"), ("q1", "q3")]);
        assert!(r.iter().all(|x| *x == r[0]), "level {m}: {r:?}");
        assert_eq!(g.degree(0), 2);
    }
}

#[test]
fn carpet_corners_are_interchangeable() {
    for m in 1..=2 {
        let g = carpet_graph(&CarpetTemplate::standard(), m).unwrap();
        let sides = corner_resistances(&g, &[("c00", "c10"), ("c00", "c01"), ("c11", "c10"), ("c11", "c01")]);
        assert!(sides.iter().all(|x| *x == sides[0]), "level {m}: {sides:?}");
        let diagonals = corner_resistances(&g, &[("c00", "c11"), ("c10", "c01")]);
        assert_eq!(diagonals[0], diagonals[1]);
        assert!(diagonals[0] > sides[0]);
    }
}

#[test]
fn edges_have_the_level_mesh_length() {
    for m in 0..=4 {
        let g = gasket_graph(m).unwrap();
        let h = 0.5f64.powi(m as i32);
        assert!(g.edges().iter().all(|&(u, v)| (g.distance(u, v) - h).abs() < 1e-12));
    }
    for m in 0..=3 {
        let g = carpet_graph(&CarpetTemplate::standard(), m).unwrap();
        let h = 3f64.powi(-(m as i32));
        assert!(g.edges().iter().all(|&(u, v)| (g.distance(u, v) - h).abs() < 1e-12));
    }
}

#[test]
fn coordinates_lie_on_the_level_lattice() {
    let graphs = [gasket_graph(3).unwrap(), carpet_graph(&CarpetTemplate::standard(), 2).unwrap()];
    for g in &graphs {
        let scale = Rational::from_integer(g.scale().into());
        for v in 0..g.len() {
            let (x, y) = g.coordinates(v);
            for c in [x.clone(), y.clone()] {
                assert!((c.clone() * scale.clone()).is_integer());
                assert!(c >= Rational::zero() && c <= Rational::one());
            }
            assert_eq!(g.locate(&x, &y), Some(v));
        }
    }
}

#[test]
fn coarse_vertices_keep_their_place_when_refined() {
    let coarse = gasket_graph(2).unwrap();
    let fine = gasket_graph(4).unwrap();
    for v in 0..coarse.len() {
        let w = coarse.refine_vertex(v, &fine).unwrap();
        assert_eq!(w, v);
        assert_eq!(coarse.coordinates(v), fine.coordinates(w));
    }
    assert_eq!(fine.nested(2), StateSet::full(coarse.len()));
}

#[test]
fn traced_fine_gasket_is_a_scaled_coarse_gasket() {
    let coarse = uniform_network::<Rational>(&gasket_graph(1).unwrap());
    let fine_graph = gasket_graph(2).unwrap();
    let traced = trace_network(&uniform_network::<Rational>(&fine_graph), &fine_graph.nested(1)).unwrap();
    let ratio = Rational::new(3.into(), 5.into());
    for ((u, v), c) in coarse.edges() {
        assert_eq!(traced.conductance(*u, *v), c.clone() * ratio.clone());
    }
}
