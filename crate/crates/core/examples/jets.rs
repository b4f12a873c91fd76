use polyconf::expr::MapExpr;
use polyconf::jets::{eval_jet2, finite_diff_jet2};

fn main() {
    let map = MapExpr::parse_components(&["x1 * exp(x2)", "ln(1 + x1^2) - x2^3"]).unwrap();
    let x = [0.3, -0.7];
    let jet = eval_jet2(&map, &x).unwrap();
    println!("f(x) = {:?}", jet.value);
    println!("J = {}", jet.jac);
    for i in 0..2 {
        println!("H[{i}] = {}", jet.hessian_matrix(i));
    }
    let fd = finite_diff_jet2(&map, &x, 1e-4).unwrap();
    println!(
        "max |exact - central differences| = {:.2e}",
        jet.max_abs_diff(&fd)
    );
}
