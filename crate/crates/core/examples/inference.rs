//! Exact inference on a small hand-built lattice, checked against
//! enumerating every path.

use tagunify::lattice::{self, brute_force, LabelConstraint, Lattice};

fn main() -> tagunify::Result<()> {
    // 4 tokens, 3 labels (O, B-X, I-X)
    let emission = vec![
        2.0, 0.5, -1.0, //
        0.1, 1.5, 0.3, //
        0.0, -0.5, 1.8, //
        1.2, 0.2, 0.4,
    ];
    let transition = vec![
        0.5, 0.2, -2.0, //
        0.1, -0.3, 1.0, //
        0.3, 0.0, 0.6,
    ];
    let lat = Lattice::from_parts(
        4,
        3,
        emission,
        transition,
        vec![0.3, 0.0, -1.0],
        vec![0.2, 0.0, 0.1],
    )?;

    let log_z = lattice::log_partition(&lat);
    println!("log Z            {log_z:.6}");
    println!("log Z (enum)     {:.6}", brute_force::log_partition(&lat)?);

    let (path, score) = lattice::viterbi(&lat);
    println!(
        "viterbi          {path:?} score {score:.4} p={:.4}",
        (score - log_z).exp()
    );

    let node = lattice::node_marginals(&lat);
    for t in 0..lat.len() {
        let row: Vec<String> = node.row(t).iter().map(|p| format!("{p:.4}")).collect();
        println!("p(y_{t} = .)       [{}]", row.join(", "));
    }

    // only paths that put an entity label on token 1
    let c = LabelConstraint::new(vec![
        vec![0, 1, 2],
        vec![1, 2],
        vec![0, 1, 2],
        vec![0, 1, 2],
    ])?;
    let constrained = lattice::constrained_log_partition(&lat, &c)?;
    println!("p(y_1 != O)      {:.4}", (constrained - log_z).exp());
    println!("same, marginals  {:.4}", node.get(1, 1) + node.get(1, 2));
    Ok(())
}
