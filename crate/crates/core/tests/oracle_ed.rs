use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rsp_core::blocks::{count_crossings, BlockLadder};
use rsp_core::disorder::open_closed_unit;
use rsp_core::entropy::tsallis_singlet_entropy;
use rsp_core::oracle::{
    exact_ground_block_entropy, singlet_reduced_density, spectrum, SingletLayout,
};
use rsp_core::sdrg::{run_configuration, ChainState, ModelKind, TrioCoefficients};
use rsp_core::Error;

const SPIN_HALF: ModelKind = ModelKind::Heisenberg { two_s: 1 };

fn rg_entropies(couplings: &[f64], q: f64) -> Vec<f64> {
    let n = couplings.len();
    let rec = run_configuration(SPIN_HALF, couplings, TrioCoefficients::default()).unwrap();
    let t = count_crossings(
        &rec.events,
        &BlockLadder::new((1..n).collect(), 0, n).unwrap(),
    )
    .unwrap();
    t.first()
        .iter()
        .map(|&c| tsallis_singlet_entropy(c, q, 1).unwrap())
        .collect()
}

/// Smallest ratio, over the decimation history, between the decimated bond
/// and its stronger neighbour.
fn weakest_margin(couplings: &[f64]) -> f64 {
    let mut st = ChainState::new(SPIN_HALF, couplings, TrioCoefficients::default()).unwrap();
    let mut ln_margin = f64::INFINITY;
    while st.n_active() >= 4 {
        let bond = st.pop_strongest().unwrap();
        let (_, ln_neighbor) = st.stronger_neighbor(bond);
        ln_margin = ln_margin.min(bond.ln_strength - ln_neighbor);
        st.decimate_pair(bond);
    }
    ln_margin.exp()
}

#[test]
fn strong_disorder_rg_matches_exact_diagonalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut compared = 0;
    for n in [6, 8, 10] {
        let mut kept = 0;
        while kept < 10 {
            let j: Vec<f64> = (0..n)
                .map(|_| open_closed_unit(&mut rng).powi(10))
                .collect();
            if weakest_margin(&j) < 100.0 {
                continue;
            }
            kept += 1;
            let ratio =
                j.iter().cloned().fold(0.0, f64::max) / j.iter().cloned().fold(f64::MAX, f64::min);
            assert!(ratio >= 1e3);
            for q in [0.5, 1.0, 2.0] {
                let rg = rg_entropies(&j, q);
                let scale = tsallis_singlet_entropy(1, q, 1).unwrap();
                for l in 1..n {
                    let ed = match exact_ground_block_entropy(&j, q, 0, l) {
                        Ok(s) => s,
                        Err(Error::DegenerateGroundState { .. }) => continue,
                        Err(e) => panic!("{e}"),
                    };
                    let tol = 0.05 * rg[l - 1].max(scale);
                    assert!(
                        (rg[l - 1] - ed).abs() <= tol,
                        "N={n} q={q} L={l}: RG {} vs exact {ed} (J = {j:?})",
                        rg[l - 1]
                    );
                    compared += 1;
                }
            }
        }
    }
    assert!(compared > 200, "only {compared} comparisons");
}

#[test]
fn four_site_example_within_five_percent() {
    let j = [1.0, 1e-3, 0.9, 1e-3];
    let rec = run_configuration(SPIN_HALF, &j, TrioCoefficients::default()).unwrap();
    let n = count_crossings(&rec.events, &BlockLadder::new(vec![2], 1, 4).unwrap())
        .unwrap()
        .first()[0];
    let want = tsallis_singlet_entropy(n, 1.0, 1).unwrap();
    let ed = exact_ground_block_entropy(&j, 1.0, 1, 2).unwrap();
    assert!((ed - want).abs() <= 0.05 * want, "RG {want} vs exact {ed}");
}

#[test]
fn uniform_ring_is_outside_the_strong_disorder_regime() {
    let j = [1.0; 4];
    let rg = rg_entropies(&j, 1.0);
    let ed = exact_ground_block_entropy(&j, 1.0, 0, 2).unwrap();
    let scale = tsallis_singlet_entropy(1, 1.0, 1).unwrap();
    assert!(
        (rg[1] - ed).abs() > 0.05 * scale,
        "RG {} vs exact {ed}",
        rg[1]
    );
}

#[test]
fn reduced_density_is_a_state() {
    let layout = SingletLayout::new(8, vec![(0, 5), (1, 2), (3, 7), (4, 6)], 4).unwrap();
    for two_s in [1, 2] {
        let rho = singlet_reduced_density(&layout, two_s).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!((&rho - rho.transpose()).amax() < 1e-14);
        let eigs = spectrum(&rho);
        assert!(eigs.iter().all(|&e| e > -1e-12));
        let d = (two_s + 1) as f64;
        let nonzero = eigs.iter().filter(|&&e| e > 1e-12).count();
        assert_eq!(nonzero as f64, d.powi(layout.crossing_count() as i32));
    }
}

#[test]
fn ed_rejects_oversized_rings() {
    assert!(matches!(
        exact_ground_block_entropy(&[1.0; 14], 1.0, 0, 3),
        Err(Error::OracleLimit(_))
    ));
}
