// Higher-order kernels and their moments.

use dcdr::error::Result;
use dcdr::kernels::{box_indicator, build_higher_order_kernel, epanechnikov};

pub fn run() -> Result<()> {
    for order in [2, 4, 6] {
        let k = build_higher_order_kernel(order, 1)?;
        let moments: Vec<String> = (0..=order).map(|j| format!("{:+.2e}", k.coordinate_moment(j))).collect();
        println!("order {order}: moments 0..={order} [{}], ∫K² = {:.4}", moments.join(", "), k.l2_norm_sq());
    }
    let k = build_higher_order_kernel(4, 2)?;
    println!("2-d order 4: K(0.1, -0.3) = {:.4}, ∫u1²u2² K = {:.2e}", k.eval(&[0.1, -0.3])?, k.moment(&[2, 2])?);
    println!("epanechnikov ∫K² = {:.4}, box ∫K² = {:.4}", epanechnikov(1).l2_norm_sq(), box_indicator(1).l2_norm_sq());
    Ok(())
}

fn main() {
    run().unwrap();
}
