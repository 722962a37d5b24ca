//! Connected-component labeling over cell predicates.
//!
//! Connectivity is face adjacency (4-connected in 2D, 6-connected in 3D).
//! Labels are assigned in scan order of the smallest linear index in each
//! component, so labeling is deterministic for a given mask.

use crate::grid::{Cell, Grid};

/// Component labels for a predicate over grid cells. `u32::MAX` marks cells
/// where the predicate is false.
#[derive(Debug, Clone)]
pub struct Labels {
    pub labels: Vec<u32>,
    pub count: usize,
}

pub const NO_LABEL: u32 = u32::MAX;

/// Label the connected components of `pred` under face adjacency.
pub fn label_components(grid: &Grid, pred: impl Fn(usize) -> bool) -> Labels {
    let n = grid.len();
    let mut labels = vec![NO_LABEL; n];
    let mut count = 0u32;
    let mut queue: Vec<usize> = Vec::new();
    let mut nbrs: Vec<Cell> = Vec::with_capacity(6);
    for start in 0..n {
        if labels[start] != NO_LABEL || !pred(start) {
            continue;
        }
        labels[start] = count;
        queue.clear();
        queue.push(start);
        while let Some(idx) = queue.pop() {
            grid.face_neighbors(grid.cell(idx), &mut nbrs);
            for &nb in nbrs.iter() {
                let j = grid.idx(nb);
                if labels[j] == NO_LABEL && pred(j) {
                    labels[j] = count;
                    queue.push(j);
                }
            }
        }
        count += 1;
    }
    Labels { labels, count: count as usize }
}

/// Scratch state for repeated connectivity queries without reallocating or
/// clearing the visited set; `epoch` invalidates previous marks in O(1).
pub struct ConnScratch {
    mark_a: Vec<u8>,
    mark_b: Vec<u8>,
    epoch: u8,
    frontier_a: Vec<usize>,
    frontier_b: Vec<usize>,
    next: Vec<usize>,
    nbrs: Vec<Cell>,
}

impl ConnScratch {
    pub fn new(ncells: usize) -> Self {
        ConnScratch {
            mark_a: vec![0; ncells],
            mark_b: vec![0; ncells],
            epoch: 0,
            frontier_a: Vec::new(),
            frontier_b: Vec::new(),
            next: Vec::new(),
            nbrs: Vec::with_capacity(6),
        }
    }

    /// Narrow marks keep per-query cost low; on epoch wrap-around both mark
    /// arrays are cleared so stale marks can never alias a live epoch.
    fn next_epoch(&mut self) -> u8 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark_a.fill(0);
            self.mark_b.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// True when `from` and `to` are joined by a face-adjacent path of cells
    /// satisfying `open`. Bidirectional breadth-first search; cost is bounded
    /// by the smaller of the two component sizes.
    pub fn connected(
        &mut self,
        grid: &Grid,
        open: impl Fn(usize) -> bool,
        from: usize,
        to: usize,
    ) -> bool {
        if from == to {
            return open(from);
        }
        if !open(from) || !open(to) {
            return false;
        }
        let e = self.next_epoch();
        self.mark_a[from] = e;
        self.mark_b[to] = e;
        self.frontier_a.clear();
        self.frontier_a.push(from);
        self.frontier_b.clear();
        self.frontier_b.push(to);
        loop {
            let expand_a = match (self.frontier_a.is_empty(), self.frontier_b.is_empty()) {
                (true, _) | (_, true) => return false,
                _ => self.frontier_a.len() <= self.frontier_b.len(),
            };
            self.next.clear();
            let (frontier, mine, theirs) = if expand_a {
                (&mut self.frontier_a, &mut self.mark_a, &self.mark_b)
            } else {
                (&mut self.frontier_b, &mut self.mark_b, &self.mark_a)
            };
            for &idx in frontier.iter() {
                grid.face_neighbors(grid.cell(idx), &mut self.nbrs);
                for &nb in self.nbrs.iter() {
                    let j = grid.idx(nb);
                    if mine[j] == e || !open(j) {
                        continue;
                    }
                    if theirs[j] == e {
                        return true;
                    }
                    mine[j] = e;
                    self.next.push(j);
                }
            }
            std::mem::swap(frontier, &mut self.next);
        }
    }

    /// True when any of `sources` reaches `target` through `open` cells.
    /// Multi-source variant of [`ConnScratch::connected`]: all sources seed
    /// one side of the bidirectional search.
    pub fn connected_any(
        &mut self,
        grid: &Grid,
        open: impl Fn(usize) -> bool,
        sources: &[usize],
        target: usize,
    ) -> bool {
        if !open(target) {
            return false;
        }
        let e = self.next_epoch();
        self.frontier_a.clear();
        for &s in sources {
            if !open(s) || self.mark_a[s] == e {
                continue;
            }
            if s == target {
                return true;
            }
            self.mark_a[s] = e;
            self.frontier_a.push(s);
        }
        if self.frontier_a.is_empty() {
            return false;
        }
        self.mark_b[target] = e;
        self.frontier_b.clear();
        self.frontier_b.push(target);
        loop {
            let expand_a = match (self.frontier_a.is_empty(), self.frontier_b.is_empty()) {
                (true, _) | (_, true) => return false,
                _ => self.frontier_a.len() <= self.frontier_b.len(),
            };
            self.next.clear();
            let (frontier, mine, theirs) = if expand_a {
                (&mut self.frontier_a, &mut self.mark_a, &self.mark_b)
            } else {
                (&mut self.frontier_b, &mut self.mark_b, &self.mark_a)
            };
            for &idx in frontier.iter() {
                grid.face_neighbors(grid.cell(idx), &mut self.nbrs);
                for &nb in self.nbrs.iter() {
                    let j = grid.idx(nb);
                    if mine[j] == e || !open(j) {
                        continue;
                    }
                    if theirs[j] == e {
                        return true;
                    }
                    mine[j] = e;
                    self.next.push(j);
                }
            }
            std::mem::swap(frontier, &mut self.next);
        }
    }
}
