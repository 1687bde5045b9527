//! Quick oracle checks runnable from the command line.

use crate::blocks::{count_crossings, BlockLadder};
use crate::entropy::{pseudo_additive, tsallis_singlet_entropy};
use crate::oracle::{all_pairings, exact_ground_block_entropy, SingletLayout};
use crate::sdrg::{run_configuration, DecimationEvent, ModelKind, TrioCoefficients};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const ORACLE_Q: [f64; 6] = [-1.5, -0.5, 0.0, 0.5, 1.0, 2.0];

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Worst relative deviation between the exact singlet-product entropy and
/// the closed form over every pairing of `n_sites` and every cut.
pub fn singlet_layout_deviation(
    n_sites: usize,
    two_s: u32,
    q_values: &[f64],
) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for pairs in all_pairings(n_sites) {
        for cut in 1..n_sites {
            worst = worst.max(layout_deviation(
                &SingletLayout::new(n_sites, pairs.clone(), cut)?,
                two_s,
                q_values,
            )?);
        }
    }
    Ok(worst)
}

pub fn layout_deviation(
    layout: &SingletLayout,
    two_s: u32,
    q_values: &[f64],
) -> crate::Result<f64> {
    let rho = crate::oracle::singlet_reduced_density(layout, two_s)?;
    let spec = crate::oracle::spectrum(&rho);
    let n = layout.crossing_count();
    let mut worst = 0.0f64;
    for &q in q_values {
        let exact = crate::oracle::tsallis_of_spectrum(&spec, q);
        let closed = tsallis_singlet_entropy(n, q, two_s)?;
        let err = if closed == 0.0 {
            exact.abs()
        } else {
            relative_error(exact, closed)
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

pub fn run_selftest() -> Vec<CheckResult> {
    let mut out = Vec::new();

    let dev = singlet_layout_deviation(8, 1, &ORACLE_Q)
        .and_then(|a| Ok(a.max(singlet_layout_deviation(6, 2, &ORACLE_Q)?)));
    out.push(match dev {
        Ok(d) => CheckResult {
            name: "singlet-product oracle",
            passed: d <= 1e-10,
            detail: format!("max relative error {d:.2e} (spin-1/2 N=8, spin-1 N=6)"),
        },
        Err(e) => CheckResult {
            name: "singlet-product oracle",
            passed: false,
            detail: e.to_string(),
        },
    });

    let mut worst = 0.0f64;
    for two_s in 1..=3 {
        for k in -20..=20 {
            let q = k as f64 * 0.1;
            let s1 = tsallis_singlet_entropy(1, q, two_s).unwrap_or(f64::NAN);
            for n in 0..20 {
                let sn = tsallis_singlet_entropy(n, q, two_s).unwrap_or(f64::NAN);
                let next = tsallis_singlet_entropy(n + 1, q, two_s).unwrap_or(f64::NAN);
                worst = worst.max(relative_error(next, pseudo_additive(sn, s1, q)));
            }
        }
    }
    out.push(CheckResult {
        name: "pseudo-additivity",
        passed: worst <= 1e-12,
        detail: format!("max relative error {worst:.2e}"),
    });

    let couplings = [1.0, 1e-3, 0.9, 1e-3];
    let rg = run_configuration(
        ModelKind::Heisenberg { two_s: 1 },
        &couplings,
        TrioCoefficients::default(),
    )
    .and_then(|r| count_crossings(&r.events, &BlockLadder::new(vec![2], 1, 4)?))
    .and_then(|c| tsallis_singlet_entropy(c.first()[0], 1.0, 1));
    let exact = exact_ground_block_entropy(&couplings, 1.0, 1, 2);
    out.push(match (rg, exact) {
        (Ok(rg), Ok(ex)) => CheckResult {
            name: "strong-disorder exact diagonalization",
            passed: relative_error(rg, ex) < 0.05,
            detail: format!("RG {rg:.6} vs exact {ex:.6}"),
        },
        (a, b) => CheckResult {
            name: "strong-disorder exact diagonalization",
            passed: false,
            detail: format!("{:?} / {:?}", a.err(), b.err()),
        },
    });

    let trace = run_configuration(
        ModelKind::Heisenberg { two_s: 1 },
        &[0.9, 0.01, 0.5, 0.02],
        TrioCoefficients::default(),
    );
    let expected = vec![
        DecimationEvent::Singlet { a: 0, b: 1 },
        DecimationEvent::Singlet { a: 2, b: 3 },
    ];
    out.push(CheckResult {
        name: "four-site decimation trace",
        passed: trace
            .as_ref()
            .map(|r| r.events == expected)
            .unwrap_or(false),
        detail: format!("{:?}", trace.map(|r| r.events)),
    });
    out
}
