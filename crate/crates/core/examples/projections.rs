//! Euclidean projections onto the simplex and the l1 ball.
//!
//! cargo run --example projections

use isoquad::matcore::{norm1, project_l1_ball, project_signed_simplex, project_simplex};

fn main() {
    let v = [0.9, -1.4, 0.3, 2.2];
    println!("simplex(total 1):   {:?}", project_simplex(&v, 1.0));
    let b = project_l1_ball(&v, 2.0);
    println!("l1 ball(radius 2):  {b:?}  ||.||_1 = {}", norm1(&b));
    println!("signed simplex:     {:?}", project_signed_simplex(&v, &[1.0, -1.0, 1.0, 1.0], 1.0));
}
