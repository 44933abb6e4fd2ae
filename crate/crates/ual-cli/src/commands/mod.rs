//! One module per subcommand. Each follows the same shape: resolve settings
//! (defaults, then config file, then flags), claim the run directory, write
//! the resolved-config snapshot, then do the work with atomic outputs.

pub mod analyze;
pub mod annotate;
pub mod eval;
pub mod gen_corpus;
pub mod plan;
pub mod train;
