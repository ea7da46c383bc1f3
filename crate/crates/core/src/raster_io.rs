//! PNG encoding for probability channels (16-bit grayscale) and display
//! images (8-bit).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Compression, Decoder, Encoder, Transformations};

use crate::error::{Error, Result};

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png {
        path: path.to_owned(),
        reason: e.to_string(),
    }
}

/// Decoded 8-bit image.
#[derive(Debug, Clone, PartialEq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

fn decode(path: &Path) -> Result<(png::OutputInfo, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

/// Reads a single-channel 16-bit PNG as raw samples.
pub fn read_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let (info, buf) = decode(path)?;
    if info.color_type != ColorType::Grayscale || info.bit_depth != BitDepth::Sixteen {
        return Err(png_err(
            path,
            format!(
                "expected 16-bit grayscale, found {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    let samples = buf
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((info.width as usize, info.height as usize, samples))
}

pub fn write_gray16(path: &Path, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    debug_assert_eq!(samples.len(), width * height);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(ColorType::Grayscale);
    encoder.set_depth(BitDepth::Sixteen);
    encoder.set_compression(Compression::Fast);
    let mut writer = encoder.write_header().map_err(|e| png_err(path, e))?;
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_be_bytes()).collect();
    writer
        .write_image_data(&bytes)
        .map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

/// Reads a radiograph for display. 16-bit samples keep their high byte;
/// colour images are reduced to luma.
pub fn read_display_gray8(path: &Path) -> Result<Gray8> {
    let (info, buf) = decode(path)?;
    let wide = info.bit_depth == BitDepth::Sixteen;
    let bytes_per_sample = if wide { 2 } else { 1 };
    let samples: Vec<u8> = buf.iter().step_by(bytes_per_sample).copied().collect();
    let pixels = match info.color_type {
        ColorType::Grayscale => samples,
        ColorType::GrayscaleAlpha => samples.iter().step_by(2).copied().collect(),
        ColorType::Rgb | ColorType::Rgba => {
            let stride = if info.color_type == ColorType::Rgb { 3 } else { 4 };
            samples
                .chunks_exact(stride)
                .map(|c| {
                    (0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2]))
                        .round() as u8
                })
                .collect()
        }
        ColorType::Indexed => return Err(png_err(path, "indexed colour not expanded")),
    };
    Ok(Gray8 {
        width: info.width as usize,
        height: info.height as usize,
        pixels,
    })
}

pub fn write_gray8(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    write_8bit(path, width, height, ColorType::Grayscale, pixels)
}

pub fn write_rgb8(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    write_8bit(path, width, height, ColorType::Rgb, pixels)
}

fn write_8bit(path: &Path, width: usize, height: usize, color: ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(data).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let samples = vec![0, 1, 65535, 30000, 258, 7];
        write_gray16(&path, 3, 2, &samples).unwrap();
        assert_eq!(read_gray16(&path).unwrap(), (3, 2, samples));
    }

    #[test]
    fn gray8_is_not_accepted_as_probability_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        write_gray8(&path, 2, 1, &[0, 255]).unwrap();
        assert!(matches!(read_gray16(&path), Err(Error::Png { .. })));
        assert_eq!(read_display_gray8(&path).unwrap().pixels, vec![0, 255]);
    }

    #[test]
    fn display_reader_takes_high_byte_of_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.png");
        write_gray16(&path, 2, 1, &[0x1234, 0xff00]).unwrap();
        assert_eq!(read_display_gray8(&path).unwrap().pixels, vec![0x12, 0xff]);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_gray16(Path::new("/nonexistent/x.png")),
            Err(Error::Io { .. })
        ));
    }
}
