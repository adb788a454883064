//! Rewrites a dense positive-semidefinite quadratic form as one finite
//! penalty per eigenvector and checks the rewrite by enumeration.
//!
//!     cargo run --release --example spectral_qubo

use lagrange_anneal::model::BinaryVector;
use lagrange_anneal::problems::spectral_linearize;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let n = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = DMatrix::from_fn(n, 4, |_, _| rng.gen_range(-1.0..1.0));
    let a = &b * b.transpose();
    let p = spectral_linearize(&a).unwrap();
    println!("{n} variables, {} spectral constraints", p.n_constraints());
    let mut worst: f64 = 0.0;
    for mask in 0u32..1 << n {
        let bits: Vec<u8> = (0..n).map(|i| (mask >> i & 1) as u8).collect();
        let x = nalgebra::DVector::from_iterator(n, bits.iter().map(|&v| f64::from(v)));
        let want = 0.5 * (x.transpose() * &a * &x)[(0, 0)];
        let got = p.evaluate_penalty_form(&BinaryVector::new(bits).unwrap()).unwrap();
        worst = worst.max((got - want).abs());
    }
    println!("largest disagreement over all {} states: {worst:.2e}", 1u32 << n);
}
