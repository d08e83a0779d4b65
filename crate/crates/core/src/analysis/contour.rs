//! Marching-squares level sets of a scalar field sampled on a grid with
//! holes (cells without a value are skipped).

use std::collections::HashMap;

use serde::Serialize;

/// One polyline at a given level, as `(g, η)` points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourLine {
    pub level: f64,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// Between `(i, j)` and `(i, j + 1)`.
    Horizontal(usize, usize),
    /// Between `(i, j)` and `(i + 1, j)`.
    Vertical(usize, usize),
}

struct Grid<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    field: &'a [Vec<Option<f64>>],
    level: f64,
}

impl Grid<'_> {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.field[i][j].expect("checked by caller")
    }

    /// Interpolated crossing point on an edge, always computed from the
    /// lower-index endpoint so shared edges agree bit for bit.
    fn point(&self, edge: Edge) -> (f64, f64) {
        let (a, b, pa, pb) = match edge {
            Edge::Horizontal(i, j) => (
                self.value(i, j),
                self.value(i, j + 1),
                (self.xs[j], self.ys[i]),
                (self.xs[j + 1], self.ys[i]),
            ),
            Edge::Vertical(i, j) => (
                self.value(i, j),
                self.value(i + 1, j),
                (self.xs[j], self.ys[i]),
                (self.xs[j], self.ys[i + 1]),
            ),
        };
        let f = ((self.level - a) / (b - a)).clamp(0.0, 1.0);
        (pa.0 + f * (pb.0 - pa.0), pa.1 + f * (pb.1 - pa.1))
    }
}

fn square_segments(grid: &Grid, i: usize, j: usize, out: &mut Vec<(Edge, Edge)>) {
    let corners = [(i, j), (i, j + 1), (i + 1, j + 1), (i + 1, j)];
    let mut vals = [0.0; 4];
    for (k, &(a, b)) in corners.iter().enumerate() {
        match grid.field[a][b] {
            Some(v) if v.is_finite() => vals[k] = v,
            _ => return,
        }
    }
    let above: Vec<bool> = vals.iter().map(|&v| v >= grid.level).collect();
    // Edges in order: bottom, right, top, left; edge k joins corners k, k+1.
    let edges = [
        Edge::Horizontal(i, j),
        Edge::Vertical(i, j + 1),
        Edge::Horizontal(i + 1, j),
        Edge::Vertical(i, j),
    ];
    let cut: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
    match cut.len() {
        2 => out.push((edges[cut[0]], edges[cut[1]])),
        4 => {
            // Saddle: the corners on the opposite side of the centre value
            // are cut off individually.
            let centre = vals.iter().sum::<f64>() / 4.0 >= grid.level;
            for k in 0..4 {
                if above[k] != centre {
                    out.push((edges[(k + 3) % 4], edges[k]));
                }
            }
        }
        _ => {}
    }
}

/// Level-set polylines of `field[i][j]` sampled at `(xs[j], ys[i])`.
pub fn contour_lines(xs: &[f64], ys: &[f64], field: &[Vec<Option<f64>>], level: f64) -> Vec<ContourLine> {
    if ys.len() < 2 || xs.len() < 2 {
        return Vec::new();
    }
    let grid = Grid { xs, ys, field, level };
    let mut segments = Vec::new();
    for i in 0..ys.len() - 1 {
        for j in 0..xs.len() - 1 {
            square_segments(&grid, i, j, &mut segments);
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let next = |edge: Edge, used: &[bool]| -> Option<usize> {
        by_edge.get(&edge)?.iter().copied().find(|&s| !used[s])
    };

    let mut lines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut tail) = segments[start];
        let mut chain = std::collections::VecDeque::from([first, tail]);
        while let Some(s) = next(tail, &used) {
            used[s] = true;
            let (a, b) = segments[s];
            tail = if a == tail { b } else { a };
            chain.push_back(tail);
        }
        let mut head = first;
        while let Some(s) = next(head, &used) {
            used[s] = true;
            let (a, b) = segments[s];
            head = if a == head { b } else { a };
            chain.push_front(head);
        }
        let closed = chain.len() > 2 && chain.front() == chain.back();
        lines.push(ContourLine {
            level,
            points: chain.into_iter().map(|e| grid.point(e)).collect(),
            closed,
        });
    }
    lines
}
