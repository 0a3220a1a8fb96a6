/// Splits an arbitrary chunked byte stream into newline-terminated frames.
///
/// Each returned frame includes its trailing `\n` and can be passed straight
/// to [`decode_command`](super::decode_command) or
/// [`decode_telemetry`](super::decode_telemetry).
#[derive(Debug, Default)]
pub struct FrameSplitter {
    pending: Vec<u8>,
}

impl FrameSplitter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `chunk` and returns every frame completed by it.
    pub fn push(&mut self, chunk: &[u8]) -> Vec<Vec<u8>> {
        let mut frames = Vec::new();
        let mut rest = chunk;
        while let Some(pos) = rest.iter().position(|&b| b == b'\n') {
            let mut frame = std::mem::take(&mut self.pending);
            frame.extend_from_slice(&rest[..=pos]);
            frames.push(frame);
            rest = &rest[pos + 1..];
        }
        self.pending.extend_from_slice(rest);
        frames
    }

    /// Bytes of an incomplete trailing frame.
    pub fn pending(&self) -> &[u8] {
        &self.pending
    }
}
