//! A short tour of the cat-map group G_A = Z² ⋊_A Z, A = [[2, 1], [1, 1]].
//!
//!     cargo run --release -p unstretch-core --example cat_map

use unstretch_core::automorphism::apply_automorphism;
use unstretch_core::matrix::int_vector;
use unstretch_core::{
    classify_growth, run_iteration, word_ball, ElementSet, GeneratingSet, GroupAutomorphism, GroupContext,
    GroupElement, IntMatrix, IterationConfig, ToralMatrix,
};

fn main() -> unstretch_core::Result<()> {
    let ctx = GroupContext::new(ToralMatrix::cat_map());
    let gens = GeneratingSet::standard(2);

    let g = GroupElement::from_i64(&[1, 0], 1);
    let h = GroupElement::from_i64(&[0, 1], -2);
    println!("{g} · {h} = {}", ctx.multiply(&g, &h)?);
    println!("[z, e1] = {}", ctx.commutator(&ctx.z(), &GroupElement::from_i64(&[1, 0], 0))?);

    let oracle = word_ball(&ctx, &gens, 8, 1_000_000)?;
    for row in oracle.census() {
        println!("radius {:>2}: ball {:>6}, sphere {:>5}", row.radius, row.ball_size, row.sphere_size);
    }
    // A³e1 = z³ e1 z⁻³ = (13, 8): length 21 in Z², at most 7 in the group.
    println!("|(13, 8)| = {:?}", oracle.word_length(&GroupElement::from_i64(&[13, 8], 0)));

    let phi = GroupAutomorphism::new(IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]])?, int_vector(&[0, 0]), 1)?;
    println!("φ(z e1) = {}", apply_automorphism(&ctx, &phi, &GroupElement::from_i64(&[1, 0], 1))?);

    let start: ElementSet = [ctx.identity(), ctx.z(), GroupElement::from_i64(&[1, 0], 0)].into_iter().collect();
    let config = IterationConfig::new(&ctx, phi, 1, start, 5, 1_000_000)?;
    let run = run_iteration(&ctx, &gens, &oracle, &config)?;
    for p in &run.curve.points {
        println!(
            "k={} |A_k|={:>5} diam={} (exact: {}) envelope B({}, {})",
            p.k, p.set_size, p.diam, p.diam_is_exact, p.envelope_ell, p.envelope_h
        );
    }
    // Diameters outgrow the radius-8 table after two steps, so there are too few exact points to classify.
    println!("{:?}", classify_growth(&run.curve).verdict);
    Ok(())
}
