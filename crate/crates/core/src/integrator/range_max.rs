/// Max segment tree over a stack: `push`, `pop` and range queries, all
/// logarithmic. Empty ranges yield `-inf`.
#[derive(Debug, Clone, Default)]
pub struct RangeMax {
    cap: usize,
    len: usize,
    tree: Vec<f64>,
}

impl RangeMax {
    pub fn new() -> Self {
        Self::with_capacity(16)
    }

    pub fn with_capacity(n: usize) -> Self {
        let cap = n.next_power_of_two().max(1);
        Self {
            cap,
            len: 0,
            tree: vec![f64::NEG_INFINITY; 2 * cap],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn set(&mut self, i: usize, v: f64) {
        let mut p = i + self.cap;
        self.tree[p] = v;
        while p > 1 {
            p /= 2;
            self.tree[p] = self.tree[2 * p].max(self.tree[2 * p + 1]);
        }
    }

    pub fn push(&mut self, v: f64) {
        if self.len == self.cap {
            let leaves: Vec<f64> = self.tree[self.cap..self.cap + self.len].to_vec();
            *self = Self::with_capacity(self.cap * 2);
            for (i, &x) in leaves.iter().enumerate() {
                self.tree[self.cap + i] = x;
            }
            self.len = leaves.len();
            for p in (1..self.cap).rev() {
                self.tree[p] = self.tree[2 * p].max(self.tree[2 * p + 1]);
            }
        }
        let i = self.len;
        self.len += 1;
        self.set(i, v);
    }

    pub fn pop(&mut self) -> Option<f64> {
        if self.len == 0 {
            return None;
        }
        self.len -= 1;
        let v = self.tree[self.cap + self.len];
        self.set(self.len, f64::NEG_INFINITY);
        Some(v)
    }

    /// Max over leaves `l..r`.
    pub fn query(&self, l: usize, r: usize) -> f64 {
        let r = r.min(self.len);
        if l >= r {
            return f64::NEG_INFINITY;
        }
        let (mut l, mut r) = (l + self.cap, r + self.cap);
        let mut m = f64::NEG_INFINITY;
        while l < r {
            if l & 1 == 1 {
                m = m.max(self.tree[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                m = m.max(self.tree[r]);
            }
            l /= 2;
            r /= 2;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_linear_scan(ops in proptest::collection::vec((any::<bool>(), -1e3f64..1e3), 1..300),
                               l in 0usize..300, w in 0usize..300) {
            let mut rm = RangeMax::new();
            let mut v: Vec<f64> = Vec::new();
            for (push, x) in ops {
                if push || v.is_empty() {
                    rm.push(x);
                    v.push(x);
                } else {
                    prop_assert_eq!(rm.pop(), v.pop());
                }
            }
            let r = (l + w).min(v.len());
            let l = l.min(r);
            let expect = v[l..r].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(rm.query(l, r), expect);
        }
    }
}
