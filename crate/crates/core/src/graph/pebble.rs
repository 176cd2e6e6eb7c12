/// The (2,3) pebble game for planar minimal rigidity.
///
/// Each vertex starts with two pebbles. An edge is accepted when four pebbles
/// can be gathered on its endpoints; accepting it consumes one pebble and
/// orients the edge away from the vertex that paid. A rejected edge witnesses
/// an over-braced vertex set: everything reachable from its endpoints.
#[derive(Clone, Debug)]
pub struct PebbleGame {
    pebbles: Vec<u8>,
    out: Vec<Vec<usize>>,
}

impl PebbleGame {
    pub fn new(n: usize) -> Self {
        PebbleGame {
            pebbles: vec![2; n],
            out: vec![Vec::new(); n],
        }
    }

    /// Tries to add edge `(u, v)`. On rejection returns the sorted vertex set
    /// that spans more than `2k - 3` edges once `(u, v)` is counted.
    pub fn insert(&mut self, u: usize, v: usize) -> Result<(), Vec<usize>> {
        // Reversals made for one endpoint can open paths for the other, so
        // alternate until neither side makes progress.
        loop {
            let mut moved = false;
            while self.pebbles[u] < 2 && self.gather(u, v) {
                moved = true;
            }
            while self.pebbles[v] < 2 && self.gather(v, u) {
                moved = true;
            }
            if !moved || self.pebbles[u] + self.pebbles[v] == 4 {
                break;
            }
        }
        if self.pebbles[u] + self.pebbles[v] < 4 {
            return Err(self.reach(&[u, v]));
        }
        self.pebbles[u] -= 1;
        self.out[u].push(v);
        Ok(())
    }

    /// Moves one free pebble onto `root` by reversing a directed path, never
    /// touching `keep`.
    fn gather(&mut self, root: usize, keep: usize) -> bool {
        let n = self.pebbles.len();
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[root] = true;
        seen[keep] = true;
        let mut stack = vec![root];
        while let Some(x) = stack.pop() {
            for idx in 0..self.out[x].len() {
                let y = self.out[x][idx];
                if seen[y] {
                    continue;
                }
                seen[y] = true;
                parent[y] = x;
                if self.pebbles[y] > 0 {
                    self.pebbles[y] -= 1;
                    self.pebbles[root] += 1;
                    let mut c = y;
                    while c != root {
                        let p = parent[c];
                        let pos = self.out[p].iter().position(|&t| t == c).expect("path edge");
                        self.out[p].swap_remove(pos);
                        self.out[c].push(p);
                        c = p;
                    }
                    return true;
                }
                stack.push(y);
            }
        }
        false
    }

    fn reach(&self, roots: &[usize]) -> Vec<usize> {
        let n = self.pebbles.len();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = roots.to_vec();
        for &r in roots {
            seen[r] = true;
        }
        while let Some(x) = stack.pop() {
            for &y in &self.out[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        (0..n).filter(|&v| seen[v]).collect()
    }
}
