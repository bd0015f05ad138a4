use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BadLength { expected: usize, actual: usize },
    #[error("unsupported channel count {0}")]
    BadChannels(u8),
    #[error("frame time must be finite and non-negative, got {0}")]
    BadTime(f64),
    #[error("png encode: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decode: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Input,
    Generated,
    OracleRendered,
}

/// Timestamped 8-bit RGB or RGBA raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: u8,
    data: Vec<u8>,
    pub time_sec: f64,
    pub provenance: Provenance,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        channels: u8,
        data: Vec<u8>,
        time_sec: f64,
        provenance: Provenance,
    ) -> Result<Self, FrameError> {
        if channels != 3 && channels != 4 {
            return Err(FrameError::BadChannels(channels));
        }
        let expected = width * height * usize::from(channels);
        if data.len() != expected {
            return Err(FrameError::BadLength { expected, actual: data.len() });
        }
        if !(time_sec.is_finite() && time_sec >= 0.0) {
            return Err(FrameError::BadTime(time_sec));
        }
        Ok(Frame { width, height, channels, data, time_sec, provenance })
    }

    /// Uniformly colored RGB frame.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3], time_sec: f64, provenance: Provenance) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Frame { width, height, channels: 3, data, time_sec, provenance }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn has_alpha(&self) -> bool {
        self.channels == 4
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = usize::from(self.channels);
        let i = (y * self.width + x) * c;
        &self.data[i..i + c]
    }

    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let p = self.pixel(x, y);
        [p[0], p[1], p[2]]
    }

    pub(crate) fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let c = usize::from(self.channels);
        let i = (y * self.width + x) * c;
        &mut self.data[i..i + c]
    }

    pub fn with_time(mut self, time_sec: f64, provenance: Provenance) -> Self {
        self.time_sec = time_sec;
        self.provenance = provenance;
        self
    }

    /// Drop the alpha channel if present.
    pub fn to_rgb(&self) -> Frame {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
        Frame { channels: 3, data, ..self.clone() }
    }

    /// Add an opaque alpha channel.
    pub fn to_rgba(&self) -> Frame {
        if self.channels == 4 {
            return self.clone();
        }
        let data = self.data.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect();
        Frame { channels: 4, data, ..self.clone() }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, FrameError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(if self.channels == 4 { png::ColorType::Rgba } else { png::ColorType::Rgb });
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header()?;
            writer.write_image_data(&self.data)?;
        }
        Ok(out)
    }

    /// Decode PNG bytes; grayscale and palette images are expanded to RGB(A).
    pub fn decode_png(bytes: &[u8], time_sec: f64, provenance: Provenance) -> Result<Frame, FrameError> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info()?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf)?;
        buf.truncate(info.buffer_size());
        let (w, h) = (info.width as usize, info.height as usize);
        let (channels, data) = match info.color_type {
            png::ColorType::Rgb => (3, buf),
            png::ColorType::Rgba => (4, buf),
            png::ColorType::Grayscale => (3, buf.iter().flat_map(|&v| [v, v, v]).collect()),
            png::ColorType::GrayscaleAlpha => {
                (4, buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0], p[1]]).collect())
            }
            other => return Err(FrameError::Unsupported(format!("{other:?}"))),
        };
        Frame::new(w, h, channels, data, time_sec, provenance)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), FrameError> {
        let bytes = self.encode_png()?;
        let mut f = BufWriter::new(File::create(path)?);
        std::io::Write::write_all(&mut f, &bytes)?;
        Ok(())
    }

    pub fn load_png(path: &Path, time_sec: f64, provenance: Provenance) -> Result<Frame, FrameError> {
        let bytes = std::fs::read(path)?;
        Frame::decode_png(&bytes, time_sec, provenance)
    }
}

/// File name of a stimulus frame: `frame_<milliseconds>.png`.
pub fn frame_file_name(time_sec: f64) -> String {
    format!("frame_{:04}.png", (time_sec * 1000.0).round() as i64)
}
