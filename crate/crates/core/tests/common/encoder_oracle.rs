//! Non-recursive encoder reference: every state is rebuilt from scratch as
//! `S_t = Σ_{s≤t} (G_t ⋯ G_{s+1}) v_s k̂_sᵀ` with every transition
//! materialized as a dense matrix.

use frwkv::params::ParamStore;

/// Raw weights of one encoder block, looked up by name.
pub struct RawLayer {
    pub c: usize,
    pub heads: usize,
    gain: Vec<f64>,
    mu: Vec<f64>,
    w_r: Vec<f64>,
    w_k: Vec<f64>,
    w_v: Vec<f64>,
    w_g: Vec<f64>,
    decay: [Vec<f64>; 4],
    repl: [Vec<f64>; 4],
    bonus: Vec<f64>,
    w_o: Vec<f64>,
}

/// Per-token quantities of the reference.
pub struct Signals {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    pub d: Vec<f64>,
    pub i: Vec<f64>,
    pub kt: Vec<f64>,
    pub kh: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row vector times row-major `[rows, cols]`.
fn row_times(x: &[f64], w: &[f64], cols: usize) -> Vec<f64> {
    (0..cols).map(|o| x.iter().enumerate().map(|(p, xv)| xv * w[p * cols + o]).sum()).collect()
}

fn mlp(x: &[f64], p: &[Vec<f64>; 4], hidden: usize, c: usize) -> Vec<f64> {
    let h: Vec<f64> = row_times(x, &p[0], hidden).iter().zip(&p[1]).map(|(a, b)| (a + b).tanh()).collect();
    row_times(&h, &p[2], c).iter().zip(&p[3]).map(|(a, b)| sigmoid(a + b)).collect()
}

pub type Mat = Vec<Vec<f64>>;

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

impl RawLayer {
    pub fn from_store(store: &ParamStore, prefix: &str, heads: usize) -> Self {
        let get = |n: &str| store.get(store.find(&format!("{prefix}.{n}")).unwrap_or_else(|| panic!("{prefix}.{n}"))).data().to_vec();
        let mlp = |m: &str| [get(&format!("{m}.w1")), get(&format!("{m}.b1")), get(&format!("{m}.w2")), get(&format!("{m}.b2"))];
        let gain = get("norm_gain");
        Self {
            c: gain.len(),
            heads,
            gain,
            mu: get("mu"),
            w_r: get("w_r"),
            w_k: get("w_k"),
            w_v: get("w_v"),
            w_g: get("w_g"),
            decay: mlp("decay"),
            repl: mlp("replacement"),
            bonus: get("bonus"),
            w_o: get("w_o"),
        }
    }

    fn hidden(&self) -> usize {
        self.decay[1].len()
    }

    fn norm(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        x.iter().zip(&self.gain).map(|(v, g)| (v - m) / (var + 1e-5).sqrt() * g).collect()
    }

    /// Signals for every token of `z: [L·C]`.
    pub fn signals(&self, z: &[f64]) -> Vec<Signals> {
        let c = self.c;
        let hd = c / self.heads;
        let normed: Vec<Vec<f64>> = z.chunks(c).map(|row| self.norm(row)).collect();
        (0..normed.len())
            .map(|t| {
                let prev = if t == 0 { vec![0.0; c] } else { normed[t - 1].clone() };
                let mixed: Vec<f64> = (0..c).map(|j| normed[t][j] + self.mu[j] * (prev[j] - normed[t][j])).collect();
                let k = row_times(&mixed, &self.w_k, c);
                let d = mlp(&mixed, &self.decay, self.hidden(), c);
                let i = mlp(&mixed, &self.repl, self.hidden(), c);
                let mut kt = vec![0.0; c];
                for h in 0..self.heads {
                    let s = &k[h * hd..(h + 1) * hd];
                    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    for j in 0..hd {
                        kt[h * hd + j] = s[j] / norm;
                    }
                }
                let kh = kt.iter().zip(&i).map(|(a, b)| a * b).collect();
                Signals {
                    r: row_times(&mixed, &self.w_r, c),
                    v: row_times(&mixed, &self.w_v, c),
                    g: row_times(&mixed, &self.w_g, c).into_iter().map(sigmoid).collect(),
                    d,
                    i,
                    kt,
                    kh,
                }
            })
            .collect()
    }

    /// Transition `Diag(d) − k̃ iᵀ` of head `h` at one token.
    pub fn transition(&self, s: &Signals, h: usize) -> Mat {
        let hd = self.c / self.heads;
        let o = h * hd;
        (0..hd)
            .map(|a| (0..hd).map(|e| if a == e { s.d[o + a] } else { 0.0 } - s.kt[o + a] * s.i[o + e]).collect())
            .collect()
    }

    /// State of head `h` after token `t`, from the closed-form sum.
    pub fn state(&self, sig: &[Signals], h: usize, t: usize) -> Mat {
        let hd = self.c / self.heads;
        let o = h * hd;
        let mut total = vec![vec![0.0; hd]; hd];
        for s in 0..=t {
            let mut prod: Mat = (0..hd).map(|a| (0..hd).map(|e| f64::from(u8::from(a == e))).collect()).collect();
            for u in s + 1..=t {
                prod = matmul(&self.transition(&sig[u], h), &prod);
            }
            let outer: Mat = (0..hd).map(|a| (0..hd).map(|e| sig[s].v[o + a] * sig[s].kh[o + e]).collect()).collect();
            let term = matmul(&prod, &outer);
            for a in 0..hd {
                for e in 0..hd {
                    total[a][e] += term[a][e];
                }
            }
        }
        total
    }

    /// Block output for `z: [L·C]`.
    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        let c = self.c;
        let hd = c / self.heads;
        let sig = self.signals(z);
        let mut out = Vec::with_capacity(z.len());
        for (t, s) in sig.iter().enumerate() {
            let mut u = vec![0.0; c];
            for h in 0..self.heads {
                let st = self.state(&sig, h, t);
                let o = h * hd;
                let beta: f64 = (o..o + hd).map(|j| s.r[j] * self.bonus[j] * s.kh[j]).sum();
                for a in 0..hd {
                    let y: f64 = (0..hd).map(|e| st[a][e] * s.r[o + e]).sum();
                    u[o + a] = y + beta * s.v[o + a];
                }
            }
            let proj = row_times(&u, &self.w_o, c);
            for j in 0..c {
                out.push(z[t * c + j] + s.g[j] * proj[j]);
            }
        }
        out
    }
}
