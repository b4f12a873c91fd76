//! Second antiderivatives of polynomial sources solve the matching wave or
//! Laplace equation.

use std::sync::Arc;

use polyconf::analytic::{apply_operator, source_solution, PolyPolynomial, SourceCase};

fn main() {
    for case in SourceCase::ALL {
        let alg = Arc::new(case.algebra());
        let n = alg.dim();
        let coeffs: Vec<Vec<f64>> = (0..4)
            .map(|k| (0..n).map(|i| (k + i) as f64 - 1.5).collect())
            .collect();
        let source = PolyPolynomial::new(alg.clone(), coeffs).unwrap();
        let u = source_solution(&source, case, None).unwrap();
        let back = apply_operator(&u, case).unwrap();
        println!(
            "{:<12} divisor {}  degree {} -> {}  defect {:.1e}",
            case.name(),
            case.divisor(),
            source.degree(),
            u.degree(),
            back.max_coeff_diff(&source)
        );
    }
}
