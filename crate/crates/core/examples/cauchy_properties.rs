// Cauchy matrices over GF(2^θ): every square submatrix is invertible.

use std::sync::Arc;

use dsn_hiercode::field::FieldContext;
use dsn_hiercode::linalg::Matrix;
use itertools::Itertools;

pub fn run_example() -> String {
    let f = Arc::new(FieldContext::new(4).expect("GF(16) exists"));
    let el = f.enumerate_elements(8).expect("16 elements available");
    let c = Matrix::cauchy(&f, &el[..4], &el[4..]).expect("distinct elements");
    let mut out = format!("{c:?}");
    let mut tested = 0;
    let mut singular = 0;
    for size in 1..=4 {
        for rows in (0..4).combinations(size) {
            for cols in (0..4).combinations(size) {
                tested += 1;
                if !c.select(&rows, &cols).is_invertible() {
                    singular += 1;
                }
            }
        }
    }
    out.push_str(&format!("square submatrices: {tested}, singular: {singular}\n"));
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
