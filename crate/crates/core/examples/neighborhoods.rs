//! Neighborhoods `B_l(j)` on the five-node heat-equation graph and on a star.

use sepval::blockgraph::{BlockStructure, InterconnectionGraph};

fn main() -> sepval::Result<()> {
    let path = InterconnectionGraph::path(5)?;
    let blocks = BlockStructure::scalar(5)?;
    println!("path graph, diameter {}", path.diameter());
    for j in 0..5 {
        for l in 0..=2 {
            let nb = path.neighborhood(&blocks, j, l)?;
            let members: Vec<usize> = nb.members.iter().map(|m| m + 1).collect();
            println!("  B_{l}({}) = {members:?}", j + 1);
        }
    }

    let star = InterconnectionGraph::star(4)?;
    let blocks = BlockStructure::new(vec![2, 1, 1, 3])?;
    println!("star graph with block sizes {:?}", blocks.dims());
    for j in 0..4 {
        let nb = star.neighborhood(&blocks, j, 1)?;
        println!(
            "  B_1({}) has {} blocks, sub-dimension {}",
            j + 1,
            nb.members.len(),
            nb.sub_dim
        );
    }

    let edges = InterconnectionGraph::parse_edge_list(3, "# chain\n1 2\n2 3\n")?;
    println!(
        "directed chain: dist(1,3) = {:?}, dist(3,1) = {:?}",
        edges.dist(0, 2),
        edges.dist(2, 0)
    );
    Ok(())
}
