use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A rectangular grid of nodes with a boolean mask (`true` = inside the domain).
///
/// Node `(i, j)` sits at `((i + 1) h, (j + 1) h)`; the implicit ring of nodes at
/// `0` and `(n + 1) h` is the outer boundary, so the physical extent is
/// `(nx + 1) h` by `(ny + 1) h`. Masked nodes and the outer ring carry the
/// homogeneous Dirichlet condition.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    nx: usize,
    ny: usize,
    spacing: f64,
    mask: Vec<bool>,
}

impl GridDomain {
    pub fn new(nx: usize, ny: usize, spacing: f64, mask: Vec<bool>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid must have at least one node per axis"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("grid spacing must be > 0, got {spacing}")));
        }
        if mask.len() != nx * ny {
            return Err(Error::invalid(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                nx * ny
            )));
        }
        let d = GridDomain { nx, ny, spacing, mask };
        d.check_connected()?;
        Ok(d)
    }

    /// Unmasked `nx` by `ny` grid.
    pub fn full(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        GridDomain::new(nx, ny, spacing, vec![true; nx * ny])
    }

    /// Masks every node whose position lies in the closed rectangle.
    pub fn with_rect_hole(self, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        self.with_hole(|x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1)
    }

    /// Masks every node within `radius` of the centre.
    pub fn with_circle_hole(self, cx: f64, cy: f64, radius: f64) -> Result<Self> {
        self.with_hole(|x, y| (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius)
    }

    fn with_hole(mut self, inside_hole: impl Fn(f64, f64) -> bool) -> Result<Self> {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.node_position(i, j);
                if inside_hole(x, y) {
                    self.mask[j * self.nx + i] = false;
                }
            }
        }
        self.check_connected()?;
        Ok(self)
    }

    /// Parses the plain-text mask format: one line per grid row `j = 0, 1, ...`,
    /// one character per node, `.` inside and `#` masked. Blank lines are ignored.
    pub fn parse_mask(text: &str, spacing: f64) -> Result<Self> {
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let row = line
                .chars()
                .map(|c| match c {
                    '.' => Ok(true),
                    '#' => Ok(false),
                    other => Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("unexpected mask character {other:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("row has {} cells, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "mask file has no rows".into(),
            });
        }
        let (nx, ny) = (rows[0].len(), rows.len());
        GridDomain::new(nx, ny, spacing, rows.concat())
    }

    /// Inverse of [`GridDomain::parse_mask`].
    pub fn to_mask_text(&self) -> String {
        let mut s = String::with_capacity((self.nx + 1) * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                s.push(if self.is_inside(i, j) { '.' } else { '#' });
            }
            s.push('\n');
        }
        s
    }

    fn check_connected(&self) -> Result<()> {
        let Some(start) = self.mask.iter().position(|&m| m) else {
            return Err(Error::invalid("domain has no interior nodes"));
        };
        let mut seen = vec![false; self.mask.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            for nb in self.neighbours(k % self.nx, k / self.nx) {
                if !seen[nb] {
                    seen[nb] = true;
                    count += 1;
                    queue.push_back(nb);
                }
            }
        }
        let interior = self.mask.iter().filter(|&&m| m).count();
        if count != interior {
            return Err(Error::invalid(format!(
                "domain interior is not 4-connected ({count} of {interior} nodes reachable)"
            )));
        }
        Ok(())
    }

    /// Flat indices of the interior 4-neighbours of node `(i, j)`.
    pub(crate) fn neighbours(&self, i: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = (i as isize, j as isize);
        [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            .into_iter()
            .filter(|&(a, b)| a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny)
            .map(|(a, b)| b as usize * self.nx + a as usize)
            .filter(|&k| self.mask[k])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.mask[j * self.nx + i]
    }

    pub fn node_position(&self, i: usize, j: usize) -> (f64, f64) {
        ((i + 1) as f64 * self.spacing, (j + 1) as f64 * self.spacing)
    }

    /// Physical width and height including the boundary ring.
    pub fn extent(&self) -> (f64, f64) {
        ((self.nx + 1) as f64 * self.spacing, (self.ny + 1) as f64 * self.spacing)
    }

    /// Interior nodes in row-major order (`j` outer, `i` inner).
    pub fn interior_nodes(&self) -> Vec<(usize, usize)> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .filter(|&(i, j)| self.is_inside(i, j))
            .collect()
    }

    pub fn n_interior(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}
