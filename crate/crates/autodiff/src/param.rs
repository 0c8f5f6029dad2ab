//! Learnable parameters, the AdamW optimizer, EMA shadows and checkpoints.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Zip;
use rand::Rng;

use crate::error::{Error, Result};
use crate::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A weight matrix with its gradient and Adam moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Mat,
    pub grad: Mat,
    pub adam_m: Mat,
    pub adam_v: Mat,
    pub step: u64,
}

impl Parameter {
    fn new(name: String, value: Mat) -> Self {
        let dim = value.raw_dim();
        Self {
            name,
            value,
            grad: Mat::zeros(dim.clone()),
            adam_m: Mat::zeros(dim.clone()),
            adam_v: Mat::zeros(dim),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        self.params.push(Parameter::new(name.into(), value));
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Mat {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Mat {
        &self.params[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// True if any value is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        self.params.iter().any(|p| p.value.iter().any(|v| !v.is_finite()))
    }

    /// Write every parameter as a text block:
    ///
    /// ```text
    /// # name rows cols
    /// v00 v01 ...
    /// v10 v11 ...
    /// ```
    ///
    /// Values use Rust's shortest round-trip float formatting.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for p in &self.params {
            let (r, c) = p.value.dim();
            let _ = writeln!(out, "# {} {} {}", p.name, r, c);
            for row in p.value.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        std::fs::write(path, out).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Read a file written by [`ParamStore::save`]. Optimizer state is reset.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |msg: String| Error::Checkpoint {
            path: path.to_path_buf(),
            msg,
        };
        let mut store = Self::new();
        let mut lines = text.lines();
        while let Some(header) = lines.next() {
            if header.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = header
                .strip_prefix("# ")
                .ok_or_else(|| bad(format!("expected header, got `{header}`")))?
                .split_whitespace()
                .collect();
            let [name, r, c] = fields[..] else {
                return Err(bad(format!("bad header `{header}`")));
            };
            let parse_dim = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s}: {e}")));
            let (rows, cols) = (parse_dim(r)?, parse_dim(c)?);
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| bad(format!("{name}: truncated")))?;
                for tok in line.split_whitespace() {
                    values.push(tok.parse::<f64>().map_err(|e| bad(format!("{tok}: {e}")))?);
                }
            }
            let value = Mat::from_shape_vec((rows, cols), values)
                .map_err(|e| bad(format!("{name}: {e}")))?;
            store.add(name, value);
        }
        Ok(store)
    }
}

/// Glorot/Xavier uniform initialization for a `fan_in x fan_out` matrix.
pub fn glorot_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Mat {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Mat::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..=limit))
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }

    /// Update every parameter in the store.
    pub fn step(&self, store: &mut ParamStore) {
        for p in &mut store.params {
            self.update(p);
        }
    }

    /// Update only the listed parameters.
    pub fn step_params(&self, store: &mut ParamStore, ids: &[ParamId]) {
        for &id in ids {
            self.update(&mut store.params[id.0]);
        }
    }

    fn update(&self, p: &mut Parameter) {
        let (b1, b2) = self.betas;
        p.step += 1;
        let c1 = 1.0 - b1.powi(p.step as i32);
        let c2 = 1.0 - b2.powi(p.step as i32);
        let decay = 1.0 - self.lr * self.weight_decay;
        let (lr, eps) = (self.lr, self.eps);
        Zip::from(&mut p.value)
            .and(&p.grad)
            .and(&mut p.adam_m)
            .and(&mut p.adam_v)
            .for_each(|w, &g, m, v| {
                *w *= decay;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
}

/// Exponential moving average of a subset of a store's parameters.
///
/// Shadow values are plain matrices; they enter a tape only as constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaShadow {
    ids: Vec<ParamId>,
    values: Vec<Mat>,
    pub decay: f64,
}

impl EmaShadow {
    pub fn new(store: &ParamStore, ids: &[ParamId], decay: f64) -> Self {
        assert!((0.0..=1.0).contains(&decay), "decay {decay} outside [0, 1]");
        Self {
            ids: ids.to_vec(),
            values: ids.iter().map(|&id| store.value(id).clone()).collect(),
            decay,
        }
    }

    /// Shadow value tracking `id`.
    pub fn value(&self, id: ParamId) -> &Mat {
        let k = self
            .ids
            .iter()
            .position(|&x| x == id)
            .unwrap_or_else(|| panic!("{id:?} is not tracked"));
        &self.values[k]
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    /// `shadow <- decay * shadow + (1 - decay) * online`.
    pub fn update(&mut self, store: &ParamStore) {
        let d = self.decay;
        for (v, &id) in self.values.iter_mut().zip(&self.ids) {
            let online = store.value(id);
            assert_eq!(v.dim(), online.dim(), "shadow shape drifted for {id:?}");
            Zip::from(v).and(online).for_each(|s, &o| *s = d * *s + (1.0 - d) * o);
        }
    }
}
