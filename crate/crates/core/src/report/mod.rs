//! Run configuration, kernel cache files and CSV output.

mod cache;
mod config;
mod csv;

pub use cache::{load_kernel, parse_kernel, render_kernel, save_kernel, CacheHeader};
pub use config::RunConfig;
pub use csv::{plot_script, render_csv, write_csv, Cell};
