use frequency_lab::cauchy::{three_ball_interp, vanish_ratio};
use frequency_lab::fields::{extended_value, gradient_fd, CatalogField, HarmonicField, Term};
use frequency_lab::frequency::{geometric_radii, profile, FrequencyParams, ProfileOptions};
use frequency_lab::geometry::{sphere_cap_quadrature, sphere_integral, GraphDomain, LipschitzGraph, Side};
use frequency_lab::point::{dist, sphere_area, Point};
use frequency_lab::quad::Tolerance;
use frequency_lab::report::{parse_scenario, run_scenario, Overrides};
use frequency_lab::whitney::{build_whitney, WhitneyParams, Window};
use proptest::prelude::*;

fn graph(kind: u8, dim: usize, slope: f64, seed: u64) -> LipschitzGraph {
    match kind % 4 {
        0 => LipschitzGraph::ramp(dim, slope),
        1 => LipschitzGraph::sawtooth(dim, slope.abs(), 0.4),
        2 => LipschitzGraph::bump(dim, slope.abs(), 0.3),
        _ => LipschitzGraph::random_grid(dim, slope.abs().max(0.01), 0.05, 60, seed),
    }
    .unwrap()
}

fn term(code: u8, k: u32) -> Term {
    match code % 4 {
        0 => Term::Linear,
        1 => Term::Bilinear { axis: 0 },
        2 => Term::OddHarmonic { k },
        _ => Term::ReHarmonic { k },
    }
}

fn mixture(dim: usize, codes: &[(u8, u32, f64)]) -> CatalogField {
    let terms = codes.iter().map(|&(c, k, a)| (a, term(c, k))).collect();
    CatalogField::mix(dim, terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cap_nodes_lie_on_the_sphere_above_the_graph(
        kind in 0u8..4, dim in 2usize..=3, slope in -0.2f64..0.2, seed in any::<u64>(),
        s in -0.3f64..0.3, h in -0.05f64..0.3, r in 0.05f64..0.6,
    ) {
        let g = graph(kind, dim, slope, seed);
        let d = GraphDomain::at_origin(g, 1.0).unwrap().with_extent(2.0);
        let x = [s, 0.0, d.graph.phi(s) + h];
        let q = sphere_cap_quadrature(&d, &x, r, 1e-8).unwrap();
        for y in &q.nodes {
            prop_assert!((dist(y, &x) - r).abs() <= 1e-12 * r);
            prop_assert!(y[2] > d.graph.phi(y[0]));
        }
    }

    #[test]
    fn cap_and_complement_cover_the_sphere(
        kind in 0u8..4, dim in 2usize..=3, slope in -0.2f64..0.2, seed in any::<u64>(),
        s in -0.3f64..0.3, h in -0.2f64..0.2, r in 0.05f64..0.6,
    ) {
        let tol = 1e-8;
        let g = graph(kind, dim, slope, seed);
        let x = [s, 0.0, g.phi(s) + h];
        let area = |side| sphere_integral(&g, &x, r, side, Tolerance::relative(tol), |_| [1.0]).value[0];
        let full = sphere_area(dim, r);
        prop_assert!((area(Side::Above) + area(Side::Below) - full).abs() <= 2.0 * tol * full);
    }

    #[test]
    fn flat_caps_are_half_spheres(dim in 2usize..=3, s in -0.5f64..0.5, r in 0.01f64..1.0) {
        let d = GraphDomain::at_origin(LipschitzGraph::flat(dim).unwrap(), 1.0).unwrap().with_extent(2.0);
        let q = sphere_cap_quadrature(&d, &[s, 0.0, 0.0], r, 1e-8).unwrap();
        let half = 0.5 * sphere_area(dim, r);
        prop_assert!((q.total_weight() - half).abs() <= 1e-8 * half);
    }

    #[test]
    fn flat_cone_condition_holds(dim in 2usize..=3, s in -0.5f64..0.5, h in 0.0f64..0.5, r in 0.01f64..1.0) {
        let d = GraphDomain::at_origin(LipschitzGraph::flat(dim).unwrap(), 1.0).unwrap().with_extent(2.0);
        let c = d.cone_condition_check(&[s, 0.0, h], r, 64);
        prop_assert!(c.holds);
        prop_assert!((c.worst_margin - h).abs() <= 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences(
        dim in 2usize..=3,
        codes in prop::collection::vec((0u8..4, 1u32..6, -1.0f64..1.0), 1..4),
        p in prop::array::uniform3(-0.5f64..0.5),
    ) {
        let u = mixture(dim, &codes);
        let x: Point = [p[0], if dim == 3 { p[1] } else { 0.0 }, p[2].abs() + 1e-3];
        let g = u.gradient(&x);
        let fd = gradient_fd(&u, &x, 1e-5);
        let scale = g.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for i in 0..3 {
            prop_assert!((g[i] - fd[i]).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn extension_below_the_graph_is_zero(
        kind in 0u8..4, slope in -0.2f64..0.2, seed in any::<u64>(), s in -1.0f64..1.0, t in 1e-9f64..1.0,
    ) {
        let g = graph(kind, 2, slope, seed);
        let u = CatalogField::named(2, "odd-harmonic-3").unwrap();
        prop_assert_eq!(extended_value(&u, &g, &[s, 0.0, g.phi(s) - t]), 0.0);
    }

    #[test]
    fn vanish_ratio_follows_the_degree(dim in 2usize..=3, bilinear in any::<bool>(), r in 0.005f64..0.3) {
        let (name, deg) = if bilinear { ("bilinear", 2) } else { ("linear", 1) };
        let d = GraphDomain::at_origin(LipschitzGraph::flat(dim).unwrap(), 1.0).unwrap().with_extent(4.0);
        let v = vanish_ratio(&CatalogField::named(dim, name).unwrap(), &d, &[0.0; 3], r, 1e-9).unwrap();
        prop_assert!((v.ratio * 6f64.powi(dim as i32 + deg) - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn three_ball_holds_for_entire_harmonics(
        dim in 2usize..=3,
        codes in prop::collection::vec((0u8..4, 1u32..7, -1.0f64..1.0), 1..4),
        r1 in 0.05f64..0.3, q in 1.5f64..4.0, alpha in 0.05f64..0.95,
    ) {
        let u = mixture(dim, &codes);
        prop_assert!(three_ball_interp(&u, &[0.1, 0.0, 0.05], r1, q * r1, alpha, 1e-10).unwrap().ok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn profiles_are_monotone_and_agree(
        dim in 2usize..=3, slope in -0.1f64..0.1, s in -0.3f64..0.3, h in 0.0f64..0.2,
        codes in prop::collection::vec((1u8..3, 2u32..5, -0.5f64..0.5), 0..3),
    ) {
        let mut terms = vec![(1.0, Term::Linear)];
        terms.extend(codes.iter().map(|&(c, k, a)| (a, term(c, k))));
        let u = CatalogField::mix(dim, terms).unwrap().placed([0.0; 3], slope);
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(dim, slope).unwrap(), 1.0).unwrap().with_extent(2.0);
        let x = [s, 0.0, slope * s + h];
        let p = FrequencyParams::default();
        let radii = geometric_radii(0.05, 0.8, 6).unwrap();
        let prof = profile(&u, &d, &x, &radii, &p, ProfileOptions { volume_energy: true, derivative: false }).unwrap();
        for w in prof.rows.windows(2) {
            prop_assert!(w[1].h >= w[0].h - 3.0 * p.tol * w[1].h);
        }
        for row in &prof.rows {
            let fd = row.f_fd.unwrap();
            prop_assert!((row.f - fd).abs() <= 1e-3f64.max(1e-2 * row.f.abs()));
            let iv = row.energy_volume.unwrap();
            if iv > p.tol {
                prop_assert!((iv - row.energy).abs() <= 1e-4 * iv);
            }
            if row.admissible_cone {
                prop_assert!(row.f.is_finite());
            }
        }
    }

    #[test]
    fn unknown_keys_are_named(key in "[a-z]{3,10}_x") {
        for (at, text) in [
            (0, format!("{} = 1\n[experiment]\nkind = \"verify\"\n", key)),
            (1, format!("[experiment]\nkind = \"verify\"\n{} = 1\n", key)),
        ] {
            let e = parse_scenario(&text, "p.toml").unwrap_err();
            prop_assert!(e.is_config(), "{}", at);
            prop_assert!(e.to_string().contains(&key));
        }
    }

    #[test]
    fn frequency_runs_repeat_byte_for_byte(seed in 0u64..i64::MAX as u64, slope in -0.1f64..0.1) {
        let text = format!(
            "seed = {seed}\n[geometry]\ndim = 2\ngraph = {{ kind = \"ramp\", slope = {slope:?} }}\nextent = 2.0\n\
             [field]\nkind = \"catalog\"\nname = \"linear\"\n[experiment]\nkind = \"frequency\"\nr_min = 0.05\nr_max = 0.5\ncount = 4\n",
            seed = seed,
            slope = slope
        );
        let file = parse_scenario(&text, "d.toml").unwrap();
        let a = run_scenario(&file, &Overrides::default()).unwrap();
        let b = run_scenario(&file, &Overrides::default()).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert_eq!(&a.artifacts, &b.artifacts);
        let echo = format!("\"seed\": {}", seed);
        prop_assert!(a.to_json().contains(&echo));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn whitney_builds_pass_their_audits(tau in 0.02f64..0.1, seed in any::<u64>()) {
        let g = LipschitzGraph::random_grid(2, tau, 0.05, 60, seed).unwrap();
        let d = GraphDomain::at_origin(g, 1.0).unwrap().with_extent(64.0);
        let w = Window::new([-0.5, 0.0, -0.2], [0.5, 0.0, 1.0]).unwrap();
        let a = build_whitney(&d, &WhitneyParams { k_max: 8, ..WhitneyParams::for_dim(2) }, &w).unwrap().audit();
        prop_assert!(a.all_pass(), "{:?}", a);
        prop_assert!(a.lambda > 20.0);
    }
}
