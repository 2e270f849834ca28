//! Compare Walktrap and Louvain on a small signed network with two obvious
//! groups joined by one weak bridge.

use ndr::graph::{louvain, modularity, walktrap, Network};

fn main() -> ndr::Result<()> {
    let edges = [
        (0, 1, 0.6),
        (0, 2, 0.5),
        (1, 2, 0.4),
        (3, 4, 0.6),
        (3, 5, 0.5),
        (4, 5, 0.45),
        (2, 3, 0.05),
        (1, 5, -0.1),
    ];
    let net = Network::from_edges(6, &edges)?;

    let wt = walktrap(&net, 4)?;
    println!("walktrap: {:?}  Q = {:.4}", wt.assignment(), modularity(&net, &wt)?);

    for seed in [1, 2, 3] {
        let lv = louvain(&net, seed)?;
        println!("louvain (seed {seed}): {:?}  Q = {:.4}", lv.assignment(), modularity(&net, &lv)?);
    }
    Ok(())
}
