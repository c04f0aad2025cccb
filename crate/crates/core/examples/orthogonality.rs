//! How close to orthogonal are independent random directions?

use random_bases::analysis;

fn main() -> random_bases::Result<()> {
    let rows = analysis::orthogonality_study(&[10, 100, 1_000, 10_000, 100_000], 100, 0)?;
    println!("{:>7} {:>10} {:>10} {:>10}", "dim", "mean|cos|", "±se", "sqrt(2/πn)");
    for r in rows {
        println!(
            "{:>7} {:>10.5} {:>10.5} {:>10.5}",
            r.dim,
            r.mean_abs,
            r.abs_standard_error(),
            r.expected_abs
        );
    }
    Ok(())
}
