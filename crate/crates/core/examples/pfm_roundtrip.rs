//! Write a disparity map as PFM and read it back unchanged.

use disprefine::image::ImageBuffer;
use disprefine::io::{decode_pfm, encode_pfm, read_pfm, write_pfm};

fn main() -> disprefine::Result<()> {
    let disp = ImageBuffer::from_fn(64, 48, |x, y| -(x as f32 * 0.25 + y as f32 * 0.1) as f64);
    let path = std::env::temp_dir().join("disprefine-roundtrip.pfm");
    write_pfm(&path, &disp)?;
    let back = read_pfm(&path)?;
    println!("{}: {}x{}, identical: {}", path.display(), back.width(), back.height(), back == disp);

    let bytes = encode_pfm(&disp);
    let header: String = bytes.iter().take_while(|&&b| b != b'\n').map(|&b| b as char).collect();
    println!("magic {header:?}, {} bytes total", bytes.len());

    match decode_pfm(&bytes[..bytes.len() - 10]) {
        Err(e) => println!("truncated file: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
