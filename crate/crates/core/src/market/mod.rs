//! Market side: vanilla quotes, the implied surface, Dupire local volatility
//! and the one-dimensional forward equation it implies.

pub mod bs;
pub mod dupire;
pub mod quotes;
pub mod surface;

pub use dupire::{dupire_forward_solve, dupire_local_vol, ForwardConfig, LocalVolConfig, LocalVolSurface};
pub use quotes::{load_quotes, parse_quotes, OptionQuote, QuoteValue};
pub use surface::{build_implied_surface, ImpliedSurface};
