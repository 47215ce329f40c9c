//! Generation, verification and classification of CAZAC sequences.

pub mod anneal;
pub mod error;
pub mod families;
pub mod io;
pub mod ipuc;
pub mod metrics;
pub mod newton;
pub mod seqcore;
pub mod transforms;

pub use error::{Error, Result};
pub use seqcore::{ComplexSequence, PhaseSequence, SRepresentation};
