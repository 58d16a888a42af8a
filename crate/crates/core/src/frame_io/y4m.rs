use std::io::{BufRead, Cursor, Read, Write};

use super::{FrameError, FrameSequence, LuminanceFrame};

const SIGNATURE: &[u8] = b"YUV4MPEG2";
const MAX_HEADER_LEN: usize = 1024;

/// Chroma layouts the reader knows how to skip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Y4mChroma {
    C420,
    C422,
    C444,
    Mono,
}

impl Y4mChroma {
    fn parse(tag: &str) -> Result<Y4mChroma, FrameError> {
        match tag {
            "420" | "420jpeg" | "420paldv" | "420mpeg2" => Ok(Y4mChroma::C420),
            "422" => Ok(Y4mChroma::C422),
            "444" => Ok(Y4mChroma::C444),
            "mono" => Ok(Y4mChroma::Mono),
            other => Err(FrameError::UnsupportedChroma(format!("C{other}"))),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Y4mChroma::C420 => "420jpeg",
            Y4mChroma::C422 => "422",
            Y4mChroma::C444 => "444",
            Y4mChroma::Mono => "mono",
        }
    }

    fn chroma_bytes(self, width: usize, height: usize) -> usize {
        let half_w = width.div_ceil(2);
        match self {
            Y4mChroma::C420 => 2 * half_w * height.div_ceil(2),
            Y4mChroma::C422 => 2 * half_w * height,
            Y4mChroma::C444 => 2 * width * height,
            Y4mChroma::Mono => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    /// Frame rate as `numerator:denominator`.
    pub frame_rate: Option<(u32, u32)>,
    pub chroma: Y4mChroma,
}

impl Y4mHeader {
    pub fn fps(&self) -> Option<f64> {
        self.frame_rate
            .filter(|&(_, den)| den != 0)
            .map(|(num, den)| f64::from(num) / f64::from(den))
    }

    fn parse(line: &[u8]) -> Result<Y4mHeader, FrameError> {
        if !line.starts_with(SIGNATURE) {
            return Err(FrameError::BadSignature);
        }
        let rest = &line[SIGNATURE.len()..];
        if !(rest.is_empty() || rest[0] == b' ') {
            return Err(FrameError::BadSignature);
        }
        let rest = std::str::from_utf8(rest)
            .map_err(|_| FrameError::BadHeader("header is not ASCII".into()))?;

        let mut width = None;
        let mut height = None;
        let mut frame_rate = None;
        // Streams without a C tag are 4:2:0 by convention.
        let mut chroma = Y4mChroma::C420;
        for token in rest.split(' ').filter(|t| !t.is_empty()) {
            let (tag, value) = token.split_at(1);
            match tag {
                "W" => width = Some(parse_dimension("W", value)?),
                "H" => height = Some(parse_dimension("H", value)?),
                "F" => {
                    let (num, den) = value
                        .split_once(':')
                        .ok_or_else(|| FrameError::BadHeader(format!("bad frame rate `{token}`")))?;
                    let num = num
                        .parse()
                        .map_err(|_| FrameError::BadHeader(format!("bad frame rate `{token}`")))?;
                    let den = den
                        .parse()
                        .map_err(|_| FrameError::BadHeader(format!("bad frame rate `{token}`")))?;
                    frame_rate = Some((num, den));
                }
                "C" => chroma = Y4mChroma::parse(value)?,
                // Interlacing, aspect ratio and extensions do not affect the luma plane.
                _ => {}
            }
        }
        Ok(Y4mHeader {
            width: width.ok_or_else(|| FrameError::BadHeader("missing W".into()))?,
            height: height.ok_or_else(|| FrameError::BadHeader("missing H".into()))?,
            frame_rate,
            chroma,
        })
    }
}

fn parse_dimension(tag: &str, value: &str) -> Result<usize, FrameError> {
    match value.parse::<i64>() {
        Ok(v) if v > 0 => Ok(v as usize),
        _ => Err(FrameError::BadHeader(format!("{tag} must be a positive integer, got `{value}`"))),
    }
}

/// Streaming Y4M reader yielding one luma frame at a time.
pub struct Y4mReader<R> {
    inner: R,
    header: Y4mHeader,
    offset: u64,
    next_index: usize,
    chroma_scratch: Vec<u8>,
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FrameError> {
        let mut line = Vec::new();
        let n = read_line_limited(&mut inner, &mut line)?;
        if !line.starts_with(SIGNATURE) {
            return Err(FrameError::BadSignature);
        }
        if line.last() != Some(&b'\n') {
            return Err(FrameError::BadHeader("header is not LF-terminated".into()));
        }
        line.pop();
        let header = Y4mHeader::parse(&line)?;
        Ok(Y4mReader {
            inner,
            header,
            offset: n as u64,
            next_index: 0,
            chroma_scratch: Vec::new(),
        })
    }

    pub fn header(&self) -> &Y4mHeader {
        &self.header
    }

    /// Reads the next frame, or `None` at a clean end of stream.
    pub fn next_frame(&mut self) -> Result<Option<LuminanceFrame>, FrameError> {
        let marker_offset = self.offset;
        let mut line = Vec::new();
        let n = read_line_limited(&mut self.inner, &mut line)?;
        if n == 0 {
            return Ok(None);
        }
        let well_formed = line.starts_with(b"FRAME")
            && line.last() == Some(&b'\n')
            && matches!(line.get(5), Some(b'\n') | Some(b' '));
        if !well_formed {
            return Err(FrameError::BadFrameMarker {
                offset: marker_offset,
            });
        }
        self.offset += n as u64;

        let (w, h) = (self.header.width, self.header.height);
        let mut luma = vec![0u8; w * h];
        self.read_payload(&mut luma, 0, w * h + self.header.chroma.chroma_bytes(w, h))?;
        let chroma_len = self.header.chroma.chroma_bytes(w, h);
        let mut scratch = std::mem::take(&mut self.chroma_scratch);
        scratch.resize(chroma_len, 0);
        let result = self.read_payload(&mut scratch, w * h, w * h + chroma_len);
        self.chroma_scratch = scratch;
        result?;

        let frame = LuminanceFrame::from_bytes(w, h, &luma)?.with_index(self.next_index);
        self.next_index += 1;
        Ok(Some(frame))
    }

    /// Fills `buf`, which starts `already` bytes into a `expected`-byte payload.
    fn read_payload(
        &mut self,
        buf: &mut [u8],
        already: usize,
        expected: usize,
    ) -> Result<(), FrameError> {
        let got = read_fully(&mut self.inner, buf)?;
        self.offset += got as u64;
        if got < buf.len() {
            return Err(FrameError::Truncated {
                frame: self.next_index,
                offset: self.offset,
                expected,
                available: already + got,
            });
        }
        Ok(())
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<LuminanceFrame, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

fn read_line_limited<R: BufRead>(r: &mut R, line: &mut Vec<u8>) -> Result<usize, FrameError> {
    let n = r.by_ref().take(MAX_HEADER_LEN as u64).read_until(b'\n', line)?;
    if n == MAX_HEADER_LEN && line.last() != Some(&b'\n') {
        return Err(FrameError::BadHeader("header line too long".into()));
    }
    Ok(n)
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Parses a complete in-memory Y4M stream.
pub fn parse_y4m(bytes: &[u8]) -> Result<FrameSequence, FrameError> {
    let mut reader = Y4mReader::new(Cursor::new(bytes))?;
    let fps = reader.header().fps();
    let mut frames = Vec::new();
    while let Some(frame) = reader.next_frame()? {
        frames.push(frame);
    }
    FrameSequence::new(frames, "y4m", fps)
}

/// Streaming Y4M encoder. Samples are rounded and clamped to 8 bits;
/// chroma planes, when the layout has them, are neutral grey.
pub struct Y4mWriter<W> {
    out: W,
    width: usize,
    height: usize,
    neutral: Vec<u8>,
}

impl<W: Write> Y4mWriter<W> {
    pub fn new(
        mut out: W,
        width: usize,
        height: usize,
        fps: Option<f64>,
        chroma: Y4mChroma,
    ) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Invalid(format!("{width}x{height} frame")));
        }
        let mut header = format!("YUV4MPEG2 W{width} H{height}");
        if let Some((num, den)) = fps.and_then(fps_to_rational) {
            header.push_str(&format!(" F{num}:{den}"));
        }
        header.push_str(&format!(" Ip A1:1 C{}\n", chroma.tag()));
        out.write_all(header.as_bytes())?;
        Ok(Y4mWriter {
            out,
            width,
            height,
            neutral: vec![128u8; chroma.chroma_bytes(width, height)],
        })
    }

    pub fn write_frame(&mut self, frame: &LuminanceFrame) -> Result<(), FrameError> {
        if (frame.width(), frame.height()) != (self.width, self.height) {
            return Err(FrameError::Invalid(format!(
                "{}x{} frame in a {}x{} stream",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        self.out.write_all(b"FRAME\n")?;
        self.out.write_all(&frame.to_bytes())?;
        self.out.write_all(&self.neutral)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_y4m<W: Write>(
    seq: &FrameSequence,
    chroma: Y4mChroma,
    out: &mut W,
) -> Result<(), FrameError> {
    let mut writer = Y4mWriter::new(out, seq.width(), seq.height(), seq.declared_fps, chroma)?;
    for frame in seq.frames() {
        writer.write_frame(frame)?;
    }
    Ok(())
}

fn fps_to_rational(fps: f64) -> Option<(u32, u32)> {
    if !(fps.is_finite() && fps > 0.0) {
        return None;
    }
    if fps.fract() == 0.0 && fps <= f64::from(u32::MAX) {
        return Some((fps as u32, 1));
    }
    let num = (fps * 1000.0).round() as u64;
    let g = gcd(num, 1000);
    Some(((num / g) as u32, (1000 / g) as u32))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
