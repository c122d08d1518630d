//! Command-line tools and the interactive paint service.

pub mod cli;
pub mod protocol;
pub mod service;

/// Caps the global rayon pool at `CANVOX_THREADS` threads when set.
pub fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("CANVOX_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            anyhow::anyhow!("CANVOX_THREADS must be a positive integer, got '{v}'")
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}
