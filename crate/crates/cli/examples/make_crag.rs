//! Regenerates `assets/crag.obj`: `cargo run -p hopclimb-cli --example make_crag`.

use std::path::Path;

fn main() -> std::io::Result<()> {
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/crag.obj");
    hopclimb::sim::terrain::crag(7).write_obj(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
