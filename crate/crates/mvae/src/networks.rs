//! Minimal dense networks with softplus hidden layers and deterministic,
//! seeded initialization.
//!
//! A network is a chain of [`Dense`] layers; every layer but the last is
//! followed by softplus. The head decides how the final activations are
//! read: a logits head returns them raw, a Gaussian head doubles the final
//! layer width and splits it into a mean half and a log-variance half
//! (clamped to the range in [`crate::distributions`]).
//!
//! Parameters serialize to a line-oriented text format (`mlp v1` header,
//! layer shapes, then row-major weights and biases; floats printed with
//! Rust's shortest round-trip formatting, so reading recovers them
//! bit-exactly).

use std::io::{self, BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Grads, Scalar, Tape, Var};
use crate::distributions::{DiagGaussian, LOG_VAR_MAX, LOG_VAR_MIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Final layer emits `2d` values, split into mean and log-variance.
    Gaussian,
    /// Final layer emits raw class scores.
    Logits,
}

impl Head {
    fn tag(self) -> &'static str {
        match self {
            Head::Gaussian => "gaussian",
            Head::Logits => "logits",
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "gaussian" => Ok(Head::Gaussian),
            "logits" => Ok(Head::Logits),
            other => Err(Error::Checkpoint(format!("unknown head tag {other:?}"))),
        }
    }
}

/// One affine layer, weights stored row-major `(out x in)`.
#[derive(Debug, Clone)]
pub struct Dense<S = f64> {
    pub weights: Vec<S>,
    pub bias: Vec<S>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<S: Scalar> Dense<S> {
    fn apply(&self, input: &[S]) -> Vec<S> {
        debug_assert_eq!(input.len(), self.in_dim);
        (0..self.out_dim)
            .map(|i| {
                let mut acc = self.bias[i];
                let row = &self.weights[i * self.in_dim..(i + 1) * self.in_dim];
                for (w, x) in row.iter().zip(input.iter()) {
                    acc = acc + *w * *x;
                }
                acc
            })
            .collect()
    }
}

/// Output of a forward pass, shaped by the network head.
#[derive(Debug, Clone)]
pub enum MlpOutput<S = f64> {
    Gaussian(DiagGaussian<S>),
    Logits(Vec<S>),
}

impl<S> MlpOutput<S> {
    pub fn expect_gaussian(self) -> DiagGaussian<S> {
        match self {
            MlpOutput::Gaussian(g) => g,
            MlpOutput::Logits(_) => panic!("expected a Gaussian head output"),
        }
    }

    pub fn expect_logits(self) -> Vec<S> {
        match self {
            MlpOutput::Logits(l) => l,
            MlpOutput::Gaussian(_) => panic!("expected a logits head output"),
        }
    }
}

/// Multilayer perceptron; `S` is `f64` for storage and evaluation, or a tape
/// variable during gradient computation.
#[derive(Debug, Clone)]
pub struct Mlp<S = f64> {
    layers: Vec<Dense<S>>,
    head: Head,
    /// Head output dimension (per-vector for Gaussian heads).
    out_dim: usize,
}

impl<S: Scalar> Mlp<S> {
    pub fn head(&self) -> Head {
        self.head
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Head output dimension: length of the logits vector, or of each of the
    /// mean and log-variance vectors for Gaussian heads.
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters in a fixed order (per layer: weights row-major, then
    /// bias). This order is shared by `flatten`, `set_from_flat`, `lift`,
    /// and gradient extraction.
    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Unchecked forward pass (dimensions asserted in debug builds only).
    pub fn forward_s(&self, input: &[S]) -> MlpOutput<S> {
        debug_assert_eq!(input.len(), self.in_dim());
        let mut h: Vec<S> = self.layers[0].apply(input);
        for layer in &self.layers[1..] {
            h = h.iter().map(|v| v.softplus()).collect();
            h = layer.apply(&h);
        }
        match self.head {
            Head::Logits => MlpOutput::Logits(h),
            Head::Gaussian => {
                let d = self.out_dim;
                let mean = h[..d].to_vec();
                let log_var = h[d..]
                    .iter()
                    .map(|v| v.clamped(LOG_VAR_MIN, LOG_VAR_MAX))
                    .collect();
                MlpOutput::Gaussian(DiagGaussian { mean, log_var })
            }
        }
    }
}

impl Mlp<f64> {
    /// Seeded initialization: weights drawn from `N(0, 1/fan_in)` (standard
    /// deviation `1/sqrt(fan_in)`), biases zero. The same seed always
    /// produces bit-identical parameters.
    pub fn init(layer_sizes: &[usize], head: Head, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "layer_sizes",
                reason: format!("need at least input and output sizes, got {layer_sizes:?}"),
            });
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter {
                name: "layer_sizes",
                reason: "layer sizes must be positive".into(),
            });
        }
        let out_dim = *layer_sizes.last().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = layer_sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let in_dim = layer_sizes[l];
            let mut out = layer_sizes[l + 1];
            if l == n_layers - 1 && head == Head::Gaussian {
                out *= 2;
            }
            let normal = Normal::new(0.0, 1.0 / (in_dim as f64).sqrt()).expect("valid std");
            let weights = (0..out * in_dim).map(|_| normal.sample(&mut rng)).collect();
            layers.push(Dense {
                weights,
                bias: vec![0.0; out],
                in_dim,
                out_dim: out,
            });
        }
        Ok(Mlp {
            layers,
            head,
            out_dim,
        })
    }

    /// Assemble from explicit layers, checking that dimensions chain and the
    /// final layer width matches the head contract.
    pub fn from_layers(layers: Vec<Dense<f64>>, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter {
                name: "layers",
                reason: "need at least one layer".into(),
            });
        }
        for layer in &layers {
            if layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.bias.len() != layer.out_dim
            {
                return Err(Error::InvalidParameter {
                    name: "layers",
                    reason: "weight or bias length does not match declared shape".into(),
                });
            }
            if !layer
                .weights
                .iter()
                .chain(layer.bias.iter())
                .all(|v| v.is_finite())
            {
                return Err(Error::NonFinite {
                    context: "network parameters".into(),
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    context: "consecutive layer dimensions",
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        let last = layers.last().unwrap().out_dim;
        let out_dim = match head {
            Head::Logits => last,
            Head::Gaussian => {
                if last % 2 != 0 {
                    return Err(Error::InvalidParameter {
                        name: "layers",
                        reason: "gaussian head needs an even final layer width".into(),
                    });
                }
                last / 2
            }
        };
        Ok(Mlp {
            layers,
            head,
            out_dim,
        })
    }

    /// Checked forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<MlpOutput<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp forward input",
                expected: self.in_dim(),
                got: input.len(),
            });
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "mlp forward input".into(),
            });
        }
        Ok(self.forward_s(input))
    }

    /// Copy all parameters out in the shared flat order.
    pub fn flatten(&self) -> Vec<f64> {
        self.params()
    }

    /// Overwrite all parameters from a flat vector in the shared order.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "mlp flat parameter vector",
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + w]);
            offset += w;
            let b = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + b]);
            offset += b;
        }
        Ok(())
    }

    /// Register every parameter on a tape, preserving the flat order.
    pub fn lift<'t>(&self, tape: &'t Tape) -> Mlp<Var<'t>> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weights: l.weights.iter().map(|&w| tape.var(w)).collect(),
                    bias: l.bias.iter().map(|&b| tape.var(b)).collect(),
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                })
                .collect(),
            head: self.head,
            out_dim: self.out_dim,
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "mlp v1")?;
        writeln!(w, "head {}", self.head.tag())?;
        writeln!(w, "layers {}", self.layers.len())?;
        writeln!(w, "outdim {}", self.out_dim)?;
        for layer in &self.layers {
            writeln!(w, "layer {} {}", layer.out_dim, layer.in_dim)?;
            write_floats(w, "w", &layer.weights)?;
            write_floats(w, "b", &layer.bias)?;
        }
        writeln!(w, "end mlp")?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: &mut R) -> Result<Self> {
        expect_line(r, "mlp v1")?;
        let head = Head::from_tag(&read_tagged(r, "head")?)?;
        let n_layers: usize = parse_one(&read_tagged(r, "layers")?)?;
        let out_dim: usize = parse_one(&read_tagged(r, "outdim")?)?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let shape = read_tagged(r, "layer")?;
            let mut it = shape.split_whitespace();
            let out: usize = parse_one(it.next().unwrap_or(""))?;
            let inp: usize = parse_one(it.next().unwrap_or(""))?;
            let weights = read_floats(r, "w", out * inp)?;
            let bias = read_floats(r, "b", out)?;
            layers.push(Dense {
                weights,
                bias,
                in_dim: inp,
                out_dim: out,
            });
        }
        expect_line(r, "end mlp")?;
        let mlp = Mlp::from_layers(layers, head)?;
        if mlp.out_dim != out_dim {
            return Err(Error::Checkpoint(format!(
                "declared out_dim {out_dim} does not match layer shapes"
            )));
        }
        Ok(mlp)
    }
}

/// Scalar loss value and its exact reverse-mode gradient with respect to
/// every parameter of `mlp`, in flat order.
///
/// The closure receives the tape-lifted network and the tape itself (for
/// lifting constants).
pub fn grad<F>(mlp: &Mlp, loss: F) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> Fn(&Mlp<Var<'t>>, &'t Tape) -> Var<'t>,
{
    let tape = Tape::new();
    let lifted = mlp.lift(&tape);
    let out = loss(&lifted, &tape);
    if !out.value().is_finite() {
        return Err(Error::NonFinite {
            context: format!("loss value {}", out.value()),
        });
    }
    let grads: Grads = out.grad();
    let gradient = lifted.params().iter().map(|v| grads.wrt(*v)).collect();
    Ok((out.value(), gradient))
}

fn write_floats<W: Write>(w: &mut W, tag: &str, values: &[f64]) -> io::Result<()> {
    write!(w, "{tag}")?;
    for v in values {
        write!(w, " {v}")?;
    }
    writeln!(w)
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    let n = r
        .read_line(&mut line)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    if n == 0 {
        return Err(Error::Checkpoint("unexpected end of file".into()));
    }
    Ok(line.trim_end().to_string())
}

pub(crate) fn expect_line<R: BufRead>(r: &mut R, expected: &str) -> Result<()> {
    let line = read_line(r)?;
    if line != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected:?}, found {line:?}"
        )));
    }
    Ok(())
}

pub(crate) fn read_tagged<R: BufRead>(r: &mut R, tag: &str) -> Result<String> {
    let line = read_line(r)?;
    line.strip_prefix(tag)
        .map(|rest| rest.trim().to_string())
        .ok_or_else(|| Error::Checkpoint(format!("expected line tagged {tag:?}, found {line:?}")))
}

pub(crate) fn parse_one<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Checkpoint(format!("failed to parse {s:?}")))
}

pub(crate) fn read_floats<R: BufRead>(r: &mut R, tag: &str, expected: usize) -> Result<Vec<f64>> {
    let body = read_tagged(r, tag)?;
    let values: Vec<f64> = body
        .split_whitespace()
        .map(parse_one::<f64>)
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} floats after {tag:?}, found {}",
            values.len()
        )));
    }
    Ok(values)
}
