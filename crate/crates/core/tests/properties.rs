use lsnet::rng::{stream, Block};
use lsnet::sampler::{alpha_log_ratio, apply_position_move, position_log_ratio};
use lsnet::simulate::{sample_interp, sample_network, sample_prior};
use lsnet::*;
use proptest::prelude::*;

/// Orthogonal d×d map from Givens angles, optionally reflecting axis 0.
fn orthogonal(d: usize, angles: &[f64], reflect: bool) -> Matrix<f64> {
    let mut q = Matrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 });
    let mut it = angles.iter().cycle();
    for a in 0..d {
        for b in a + 1..d {
            let (s, c) = it.next().unwrap().sin_cos();
            let mut g = Matrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 });
            g[(a, a)] = c;
            g[(b, b)] = c;
            g[(a, b)] = -s;
            g[(b, a)] = s;
            q = g.matmul(&q);
        }
    }
    if reflect {
        for c in 0..d {
            q[(0, c)] = -q[(0, c)];
        }
    }
    q
}

fn pivots(p: usize, d: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::sample::subsequence((1..=p).collect::<Vec<_>>(), d)
}

proptest! {
    #[test]
    fn plt_is_glt_with_leading_pivots(d in 2usize..=8, extra in 0usize..=6) {
        let p = (d + extra).min(8);
        let plt = build_pattern(&RestrictionKind::Plt, p, d).unwrap();
        let glt = build_pattern(&RestrictionKind::Glt { pivots: (1..=d).collect() }, p, d).unwrap();
        prop_assert_eq!(&plt.cells, &glt.cells);
        prop_assert_eq!(plt.count(Cell::FixedZero), d * (d - 1) / 2);
        prop_assert_eq!(plt.count(Cell::PositiveDiagonal), d);
    }

    #[test]
    fn glt_cell_counts((p, piv) in (2usize..=8).prop_flat_map(|p| (2..=p).prop_flat_map(move |d| (Just(p), pivots(p, d))))) {
        let d = piv.len();
        let pat = build_pattern(&RestrictionKind::Glt { pivots: piv.clone() }, p, d).unwrap();
        let zeros: usize = piv.iter().map(|l| l - 1).sum();
        prop_assert_eq!(pat.count(Cell::PositiveDiagonal), d);
        prop_assert_eq!(pat.count(Cell::FixedZero), zeros);
        prop_assert_eq!(pat.count(Cell::Free), p * d - d - zeros);
        for (k, &l) in piv.iter().enumerate() {
            prop_assert_eq!(pat.cell(l - 1, k), Cell::PositiveDiagonal);
        }
    }

    #[test]
    fn network_lik_ignores_rotation_and_translation(
        seed in any::<u64>(),
        n in 3usize..10,
        d in 2usize..4,
        angles in prop::collection::vec(0.0..std::f64::consts::TAU, 3),
        reflect in any::<bool>(),
        shift in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        let pat = build_pattern(&RestrictionKind::Unrestricted, d, d).unwrap();
        let mut rng = stream(seed, Block::Truth);
        let state = sample_prior(n, &pat, &Hyperparams64::default(), &mut rng).unwrap();
        let net = sample_network(&state.lat, &mut rng).unwrap();
        let base = network_log_lik(&net, &state.lat).unwrap();

        let mut moved = state.lat.clone();
        moved.positions = orthogonal(d, &angles, reflect).matmul(&state.lat.positions);
        for (k, s) in shift.iter().enumerate().take(d) {
            moved.positions.row_mut(k).iter_mut().for_each(|v| *v += s);
        }
        let after = network_log_lik(&net, &moved).unwrap();
        prop_assert!((base - after).abs() < 1e-9 * base.abs().max(1.0), "{} vs {}", base, after);
    }

    #[test]
    fn local_ratios_match_full_posterior_difference(
        seed in any::<u64>(),
        n in 2usize..8,
        node in any::<prop::sample::Index>(),
        step in prop::collection::vec(-1.0..1.0f64, 2),
        dalpha in -1.0..1.0f64,
    ) {
        let pat = build_pattern(&RestrictionKind::Plt, 3, 2).unwrap();
        let hp = Hyperparams64::default();
        let mut rng = stream(seed, Block::Truth);
        let state = sample_prior(n, &pat, &hp, &mut rng).unwrap();
        let net = sample_network(&state.lat, &mut rng).unwrap();
        let y = sample_interp(&state.lat, &state.load, &mut rng).unwrap();
        let post = Posterior::new(&net, &y, &hp, &pat).unwrap();
        let before = post.log_posterior(&state).unwrap();

        let i = node.index(n);
        let local = position_log_ratio(&state, &post, i, &step);
        let mut moved = state.clone();
        apply_position_move(&mut moved.lat, i, &step);
        let full = post.log_posterior(&moved).unwrap() - before;
        prop_assert!((local - full).abs() < 1e-8, "position: {} vs {}", local, full);

        let local = alpha_log_ratio(&state, &post, state.lat.alpha + dalpha);
        let mut moved = state.clone();
        moved.lat.alpha += dalpha;
        let full = post.log_posterior(&moved).unwrap() - before;
        prop_assert!((local - full).abs() < 1e-8, "alpha: {} vs {}", local, full);
    }
}
