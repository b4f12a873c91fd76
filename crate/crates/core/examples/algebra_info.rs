//! Units and q tensors of the built-in algebras, plus a custom one read from
//! the definition format.

use polyconf::algebra::AlgebraSpec;

fn main() {
    for name in AlgebraSpec::BUILTIN_NAMES {
        let alg = AlgebraSpec::builtin(name).unwrap();
        let t = alg.derived_tensors();
        println!(
            "{name:>6}: unit {:?}, diag(q) {:?}, degenerate {}",
            t.epsilon,
            t.q_lower.diagonal().as_slice(),
            t.is_degenerate()
        );
    }

    // Three idempotents: multiplication is componentwise.
    let text = "name P3
dim 3
p 1 1 1 1
p 2 2 2 1
p 3 3 3 1
";
    let alg = AlgebraSpec::parse_definition(text).unwrap();
    println!("\n{}", alg.to_definition());
    println!("q = {}", alg.derived_tensors().q_lower);
}
