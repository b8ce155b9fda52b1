//! Brute-force oracles over the full `d^N` configuration space.
#![allow(dead_code)]

use born_lab::Complex64;
use nalgebra::DMatrix;

/// Every configuration `(j_1, …, j_N)` with its probability `Π p_{j_i}` and
/// total `Σ α_{j_i}`, grouped by total (sorted ascending).
pub fn brute_sum_distribution(probs: &[f64], alphas: &[f64], count: usize) -> Vec<(f64, f64)> {
    let d = probs.len();
    let total = d.pow(count as u32);
    let mut raw: Vec<(f64, f64)> = Vec::with_capacity(total);
    for index in 0..total {
        let mut rest = index;
        let mut value = 0.0;
        let mut prob = 1.0;
        for _ in 0..count {
            let j = rest % d;
            rest /= d;
            value += alphas[j];
            prob *= probs[j];
        }
        raw.push((value, prob));
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = alphas.iter().fold(1.0f64, |m, a| m.max(a.abs()));
    let mut grouped: Vec<(f64, f64)> = Vec::new();
    for (value, prob) in raw {
        match grouped.last_mut() {
            Some(last) if (value - last.0).abs() <= 1e-9 * scale => last.1 += prob,
            _ => grouped.push((value, prob)),
        }
    }
    grouped
}

/// `|ψ⟩^{⊗N}` as a dense vector of length `d^N`.
pub fn product_state(single: &[Complex64], count: usize) -> Vec<Complex64> {
    let mut state = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..count {
        state = state
            .iter()
            .flat_map(|a| single.iter().map(move |b| a * b))
            .collect();
    }
    state
}

/// `Σ_i 1⊗…⊗A⊗…⊗1` assembled from the single-particle matrix.
pub fn collective_matrix(single: &DMatrix<Complex64>, count: usize) -> DMatrix<Complex64> {
    let d = single.nrows();
    let id = DMatrix::<Complex64>::identity(d, d);
    let mut total = DMatrix::<Complex64>::zeros(1, 1);
    let mut ident = DMatrix::<Complex64>::identity(1, 1);
    for _ in 0..count {
        total = total.kronecker(&id) + ident.kronecker(single);
        ident = ident.kronecker(&id);
    }
    total
}

/// `⟨Ψ| e^{−i t A_tot} |Ψ⟩` by dense matrix exponentiation.
pub fn vacuum_amplitude(
    single_state: &[Complex64],
    single_matrix: &DMatrix<Complex64>,
    count: usize,
    t: f64,
) -> Complex64 {
    let psi = nalgebra::DVector::from_vec(product_state(single_state, count));
    let generator = collective_matrix(single_matrix, count) * Complex64::new(0.0, -t);
    let evolved = generator.exp() * &psi;
    psi.dotc(&evolved)
}
