use posture_core::conic::{eig3_sym, project_cone, smat3, Cone};
use posture_core::grid::{build_snapshot, Branch, Bus, CaseData, CostModel, DeratingSet, ElementRef, Generator, GridCase, OutageSet};
use posture_core::schedule::StepResolution;
use posture_core::scopf::{build_scopf, BuildConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn in_cone(v: &[f64], cone: Cone, tol: f64) -> bool {
    match cone {
        Cone::Zero(_) => v.iter().all(|x| x.abs() <= tol),
        Cone::NonNegative(_) => v.iter().all(|&x| x >= -tol),
        Cone::SecondOrder(_) => v[0] >= dot(&v[1..], &v[1..]).sqrt() - tol,
        Cone::Psd3 => eig3_sym(&smat3(v)).values.iter().all(|&l| l >= -tol),
    }
}

fn cone_and_vector() -> impl Strategy<Value = (Cone, Vec<f64>)> {
    let cone = prop_oneof![
        (1usize..6).prop_map(Cone::Zero),
        (1usize..6).prop_map(Cone::NonNegative),
        (2usize..6).prop_map(Cone::SecondOrder),
        Just(Cone::Psd3),
    ];
    cone.prop_flat_map(|c| (Just(c), prop::collection::vec(-100.0f64..100.0, c.dim())))
}

fn symmetric() -> impl Strategy<Value = [[f64; 3]; 3]> {
    prop::array::uniform6(-1e3f64..1e3).prop_map(|e| [[e[0], e[1], e[2]], [e[1], e[3], e[4]], [e[2], e[4], e[5]]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn projection_is_idempotent((cone, v) in cone_and_vector()) {
        let p = project_cone(&v, cone);
        let pp = project_cone(&p, cone);
        prop_assert!(max_abs_diff(&p, &pp) <= 1e-9 * (1.0 + dot(&v, &v).sqrt()));
        prop_assert!(in_cone(&p, cone, 1e-9 * (1.0 + dot(&v, &v).sqrt())));
    }

    #[test]
    fn moreau_decomposition((cone, v) in cone_and_vector()) {
        let scale = 1.0 + dot(&v, &v).sqrt();
        let p = project_cone(&v, cone);
        let rest: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        prop_assert!(dot(&p, &rest).abs() <= 1e-9 * scale * scale);
        if let Cone::Zero(_) = cone {
            prop_assert!(p.iter().all(|x| *x == 0.0));
        } else {
            // self-dual: the polar projection is −Π(−v)
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let polar: Vec<f64> = project_cone(&neg, cone).iter().map(|x| -x).collect();
            prop_assert!(max_abs_diff(&rest, &polar) <= 1e-9 * scale);
        }
    }

    #[test]
    fn eigen_decomposition_reconstructs(m in symmetric()) {
        let e = eig3_sym(&m);
        let r = e.reconstruct();
        let norm = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let err = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (r[i][j] - m[i][j]).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-10 * norm.max(f64::MIN_POSITIVE));
        prop_assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
        for a in 0..3 {
            for b in 0..3 {
                let d = dot(&e.vectors[a], &e.vectors[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() <= 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn susceptance_matrix_is_a_laplacian(seed in any::<u64>()) {
        let case = random_case(seed, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut outages = OutageSet::new();
        for b in case.branches() {
            if rng.gen_bool(0.2) {
                outages.insert(ElementRef::Branch(b.id));
            }
        }
        let snap = build_snapshot(&case, &outages, &DeratingSet::new(), 0);
        let b = snap.bus_susceptance.to_dense();
        let n = b.len();
        for i in 0..n {
            prop_assert!(b[i].iter().sum::<f64>().abs() <= 1e-12);
            for j in 0..n {
                prop_assert_eq!(b[i][j], b[j][i]);
            }
        }
        // flows out of every bus add up to its injection
        let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let flows = snap.flows(&theta);
        let inj = snap.injections(&theta);
        let mut net = vec![0.0; n];
        for (br, f) in snap.branches.iter().zip(&flows) {
            net[br.from] += f;
            net[br.to] -= f;
        }
        prop_assert!(max_abs_diff(&net, &inj) <= 1e-12);
        prop_assert!(snap.branches.iter().all(|br| !outages.contains(ElementRef::Branch(br.id))));
    }

    #[test]
    fn layout_ignores_input_order(seed in any::<u64>()) {
        let step = |case: &GridCase| {
            let first = case.branches()[0].id;
            StepResolution {
                step: 1,
                basecase_outages: OutageSet::new(),
                applied_outages: OutageSet::single(ElementRef::Branch(first)),
                security_contingencies: vec![OutageSet::single(ElementRef::Branch(first))],
                derate_targets: DeratingSet::new(),
            }
        };
        let a = random_case(seed, false);
        let b = random_case(seed, true);
        let pa = build_scopf(&a, &step(&a), &BuildConfig::default()).unwrap();
        let pb = build_scopf(&b, &step(&b), &BuildConfig::default()).unwrap();
        prop_assert_eq!(&pa, &pb);
        for (i, key) in pa.layout.keys().iter().enumerate() {
            prop_assert_eq!(pa.layout.index(key), Some(i));
        }
    }
}

/// A connected random case; `shuffled` permutes the input tables without
/// changing their contents.
fn random_case(seed: u64, shuffled: bool) -> GridCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb: u32 = rng.gen_range(2..=12);
    let mut buses: Vec<Bus> = (1..=nb).map(|i| Bus::new(i, rng.gen_range(0.0..40.0))).collect();
    let mut branches: Vec<Branch> = (2..=nb)
        .map(|i| Branch::new(i - 1, rng.gen_range(1..i), i, rng.gen_range(1.0..30.0), 200.0))
        .collect();
    for k in 0..rng.gen_range(0..nb) {
        let (x, y) = (rng.gen_range(1..=nb), rng.gen_range(1..=nb));
        if x != y {
            let mut br = Branch::new(nb + k, x, y, rng.gen_range(1.0..30.0), 200.0);
            br.angle_shift = if rng.gen_bool(0.2) { rng.gen_range(-0.1..0.1) } else { 0.0 };
            branches.push(br);
        }
    }
    let cost = CostModel {
        alpha_sqr: 0.01,
        alpha_lin: 10.0,
        ..CostModel::default()
    };
    let mut gens: Vec<Generator> = (1..=3).map(|g| Generator::new(g, rng.gen_range(1..=nb), 0.0, 300.0, cost)).collect();
    if shuffled {
        let mut r = ChaCha8Rng::seed_from_u64(!seed);
        buses.shuffle(&mut r);
        branches.shuffle(&mut r);
        gens.shuffle(&mut r);
    }
    GridCase::new(CaseData::new(100.0, buses, branches, gens)).unwrap()
}
