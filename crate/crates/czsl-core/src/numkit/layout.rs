//! Named segments of a flat parameter vector.
//!
//! Optimizers, the Reptile update, and the gradient checker all operate on a
//! single flat `Vec<f64>`; the layout maps positions back to human-readable
//! parameter paths for error reporting and checkpoint metadata.

use serde::{Deserialize, Serialize};

/// One named tensor inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    entries: Vec<ParamSpec>,
    offsets: Vec<usize>,
    total: usize,
}

impl ParamLayout {
    pub fn new(entries: Vec<ParamSpec>) -> Self {
        let mut offsets = Vec::with_capacity(entries.len());
        let mut total = 0;
        for e in &entries {
            offsets.push(total);
            total += e.len();
        }
        ParamLayout { entries, offsets, total }
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn entries(&self) -> &[ParamSpec] {
        &self.entries
    }

    /// Byte range of segment `idx` within the flat vector.
    pub fn range(&self, idx: usize) -> std::ops::Range<usize> {
        self.offsets[idx]..self.offsets[idx] + self.entries[idx].len()
    }

    /// Range of the segment with the given name, if present.
    pub fn range_of(&self, name: &str) -> Option<std::ops::Range<usize>> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(|i| self.range(i))
    }

    /// Path of the parameter at a flat index, e.g. "proj1.weight[3,7]".
    pub fn path_at(&self, flat: usize) -> String {
        // offsets is sorted; find the owning segment.
        match self.offsets.partition_point(|&o| o <= flat) {
            0 => format!("<out of range {flat}>"),
            p => {
                let idx = p - 1;
                let e = &self.entries[idx];
                let local = flat - self.offsets[idx];
                if local >= e.len() {
                    return format!("<out of range {flat}>");
                }
                if e.cols <= 1 {
                    format!("{}[{}]", e.name, local)
                } else {
                    format!("{}[{},{}]", e.name, local / e.cols, local % e.cols)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str, rows: usize, cols: usize) -> ParamSpec {
        ParamSpec { name: name.into(), rows, cols }
    }

    #[test]
    fn ranges_and_paths() {
        let layout = ParamLayout::new(vec![spec("w", 2, 3), spec("b", 3, 1)]);
        assert_eq!(layout.total_len(), 9);
        assert_eq!(layout.range(0), 0..6);
        assert_eq!(layout.range(1), 6..9);
        assert_eq!(layout.range_of("b"), Some(6..9));
        assert_eq!(layout.path_at(0), "w[0,0]");
        assert_eq!(layout.path_at(5), "w[1,2]");
        assert_eq!(layout.path_at(7), "b[1]");
        assert_eq!(layout.path_at(9), "<out of range 9>");
    }
}
