use crate::mueller::MuellerMatrix;

/// `F × H × W` grid of normalized Mueller matrices with a validity mask.
/// Storage is frame-major, then row, then column.
#[derive(Debug, Clone, PartialEq)]
pub struct MuellerVideo {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub matrices: Vec<MuellerMatrix>,
    pub valid: Vec<bool>,
}

impl MuellerVideo {
    /// All entries set to `fill` and marked `valid`.
    pub fn filled(
        frames: usize,
        height: usize,
        width: usize,
        fill: MuellerMatrix,
        valid: bool,
    ) -> Self {
        let n = frames * height * width;
        Self {
            frames,
            height,
            width,
            matrices: vec![fill; n],
            valid: vec![valid; n],
        }
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn index(&self, x: usize, y: usize, f: usize) -> usize {
        debug_assert!(x < self.width && y < self.height && f < self.frames);
        (f * self.height + y) * self.width + x
    }

    /// Inverse of [`MuellerVideo::index`]: `(x, y, f)`.
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.width;
        let y = (i / self.width) % self.height;
        let f = i / (self.width * self.height);
        (x, y, f)
    }

    pub fn get(&self, x: usize, y: usize, f: usize) -> &MuellerMatrix {
        &self.matrices[self.index(x, y, f)]
    }

    pub fn is_valid(&self, x: usize, y: usize, f: usize) -> bool {
        self.valid[self.index(x, y, f)]
    }

    pub fn set(&mut self, x: usize, y: usize, f: usize, m: MuellerMatrix, valid: bool) {
        let i = self.index(x, y, f);
        self.matrices[i] = m;
        self.valid[i] = valid;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn same_shape(&self, other: &MuellerVideo) -> bool {
        (self.frames, self.height, self.width) == (other.frames, other.height, other.width)
    }
}
