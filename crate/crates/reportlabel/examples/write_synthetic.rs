//! Writes the bundled synthetic corpus to `data/synthetic` at the workspace
//! root, or to the directory given as the first argument.

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic"));
    std::fs::create_dir_all(&dir)?;
    for (name, bytes) in reportlabel::bundled::files() {
        std::fs::write(dir.join(name), bytes)?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
