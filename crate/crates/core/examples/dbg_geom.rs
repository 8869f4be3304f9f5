use projlab_core::dyadic::*;

fn main() {
    // cantor extraction at t = 0.25
    let c = generate_set(&SetSpec::Cantor { ratio: 0.25, depth: 8, k: 1 }).unwrap();
    let parent = spread_constant(&c, 0.25);
    let (sub, rep) = extract_spread_subset(&c, 0.25);
    println!("cantor: parent C={:.3} sub C={:.3} card={} (parent card {})",
             parent.constant, rep.constant, sub.cardinality(), c.cardinality());
    println!("  sub witness r={} center={:?}", rep.witness_radius, rep.witness_center);
    let tuples = sub.tuples();
    let xs: Vec<u32> = tuples.iter().map(|t| t[0]).collect();
    println!("  cells: {:?}", xs);

    // column case
    let tuples: Vec<Vec<u32>> = (0..64).map(|y| vec![3u32, y]).collect();
    let p = DyadicSet::from_tuples(2, 6, &tuples).unwrap();
    let (sub, rep) = extract_spread_subset(&p, 1.0);
    println!("column: sub card={} C={:.3}", sub.cardinality(), rep.constant);

    // corner block case
    let tuples: Vec<Vec<u32>> = (0..8).flat_map(|x| (0..8).map(move |y| vec![x as u32, y as u32])).collect();
    let p = DyadicSet::from_tuples(2, 6, &tuples).unwrap();
    let (sub, rep) = extract_spread_subset(&p, 1.0);
    println!("block: sub card={} C={:.3}", sub.cardinality(), rep.constant);
    let full = spread_constant(&p, 1.0);
    println!("block parent C={:.3}", full.constant);
}
