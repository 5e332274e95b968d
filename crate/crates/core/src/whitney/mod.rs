//! Whitney cubes above a Lipschitz graph and the generation maps that
//! select one cube per dyadic shadow below a root cube.

mod cube;
mod decomp;
mod generations;

pub use cube::{DyadicCube, Lattice};
pub use decomp::{
    build_whitney, CubeIndex, LazyWhitney, Located, Node, WhitneyAudit, WhitneyDecomposition, WhitneyParams, Window,
};
pub use generations::{
    generations, select_cell, select_r0, select_r0_translating, shadows, Ball, GenerationCell, GenerationLevel,
    GenerationMap, RootChoice,
};
