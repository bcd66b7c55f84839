//! Model file: a versioned, line-oriented text format.
//!
//! ```text
//! raceline-mlp 1
//! f 10
//! s 2
//! l_ref 30
//! spacing 5
//! feature_order normal-major;l,alpha,theta;aft-to-fore
//! output_order slot k predicts normal i-s+k
//! hidden_activation sigmoid
//! output_activation hard_sigmoid
//! train huber_delta=1 learning_rate=0.001 beta1=0.9 beta2=0.999 epsilon=1e-8 batch_size=256 epochs=100 seed=0
//! layers 63 64 32 32 5
//! weights 0 63 64
//! <63 rows of 64 values>
//! bias 0 64
//! <1 row of 64 values>
//! ...
//! end
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! bits, so a save/load round trip reproduces predictions exactly.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use super::{Layer, MlpModel, ModelMeta, TrainConfig};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "raceline-mlp";
pub const MODEL_VERSION: u32 = 1;
const OUTPUT_ORDER: &str = "slot k predicts normal i-s+k";

pub fn save_model(model: &MlpModel) -> String {
    let m = &model.meta;
    let c = &model.train_config;
    let mut out = String::new();
    writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
    writeln!(out, "f {}", m.f).unwrap();
    writeln!(out, "s {}", m.s).unwrap();
    writeln!(out, "l_ref {:e}", m.l_ref).unwrap();
    writeln!(out, "spacing {:e}", m.spacing).unwrap();
    writeln!(out, "feature_order {}", m.feature_order).unwrap();
    writeln!(out, "output_order {OUTPUT_ORDER}").unwrap();
    out.push_str("hidden_activation sigmoid\noutput_activation hard_sigmoid\n");
    writeln!(
        out,
        "train huber_delta={:e} learning_rate={:e} beta1={:e} beta2={:e} epsilon={:e} batch_size={} epochs={} seed={}",
        c.huber_delta, c.learning_rate, c.beta1, c.beta2, c.epsilon, c.batch_size, c.epochs, c.seed
    )
    .unwrap();
    let sizes: Vec<String> = model.layer_sizes().iter().map(|s| s.to_string()).collect();
    writeln!(out, "layers {}", sizes.join(" ")).unwrap();
    for (k, layer) in model.layers.iter().enumerate() {
        let (rows, cols) = layer.weights.dim();
        writeln!(out, "weights {k} {rows} {cols}").unwrap();
        for row in layer.weights.rows() {
            write_row(&mut out, row.iter());
        }
        writeln!(out, "bias {k} {}", layer.bias.len()).unwrap();
        write_row(&mut out, layer.bias.iter());
    }
    out.push_str("end\n");
    out
}

fn write_row<'a>(out: &mut String, vals: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in vals {
        if !first {
            out.push(' ');
        }
        write!(out, "{v:e}").unwrap();
        first = false;
    }
    out.push('\n');
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .ok_or_else(|| Error::CorruptFile(format!("file ends before {what}")))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let (n, line) = self.next_line(key)?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::CorruptFile(format!("line {n}: expected `{key}`")))
    }
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::CorruptFile(format!("bad {what}: {s:?}")))
}

fn parse_values(line: &str, expect: usize, what: &str) -> Result<Vec<f64>> {
    let vals = line
        .split_ascii_whitespace()
        .map(|v| num::<f64>(v, what))
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != expect {
        return Err(Error::CorruptFile(format!(
            "{what}: expected {expect} values, found {}",
            vals.len()
        )));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::CorruptFile(format!("{what}: non-finite value")));
    }
    Ok(vals)
}

fn parse_train(line: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    for item in line.split_ascii_whitespace() {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::CorruptFile(format!("bad train entry {item:?}")))?;
        match k {
            "huber_delta" => cfg.huber_delta = num(v, k)?,
            "learning_rate" => cfg.learning_rate = num(v, k)?,
            "beta1" => cfg.beta1 = num(v, k)?,
            "beta2" => cfg.beta2 = num(v, k)?,
            "epsilon" => cfg.epsilon = num(v, k)?,
            "batch_size" => cfg.batch_size = num(v, k)?,
            "epochs" => cfg.epochs = num(v, k)?,
            "seed" => cfg.seed = num(v, k)?,
            _ => return Err(Error::CorruptFile(format!("unknown train key {k:?}"))),
        }
    }
    Ok(cfg)
}

pub fn load_model(text: &str) -> Result<MlpModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, header) = lines.next_line("header")?;
    let mut parts = header.split_ascii_whitespace();
    if parts.next() != Some(MODEL_MAGIC) {
        return Err(Error::CorruptFile("not a raceline model file".into()));
    }
    let version: u32 = num(parts.next().unwrap_or(""), "version")?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch(format!(
            "file version {version}, this build reads {MODEL_VERSION}"
        )));
    }
    let f = num(lines.keyed("f")?, "f")?;
    let s = num(lines.keyed("s")?, "s")?;
    let l_ref = num(lines.keyed("l_ref")?, "l_ref")?;
    let spacing = num(lines.keyed("spacing")?, "spacing")?;
    let feature_order = lines.keyed("feature_order")?.to_string();
    if lines.keyed("output_order")? != OUTPUT_ORDER {
        return Err(Error::VersionMismatch("unknown output ordering".into()));
    }
    if lines.keyed("hidden_activation")? != "sigmoid" || lines.keyed("output_activation")? != "hard_sigmoid" {
        return Err(Error::VersionMismatch("unsupported activation functions".into()));
    }
    let train_config = parse_train(lines.keyed("train")?)?;
    let sizes: Vec<usize> = lines
        .keyed("layers")?
        .split_ascii_whitespace()
        .map(|v| num(v, "layer size"))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 {
        return Err(Error::CorruptFile("need at least two layer sizes".into()));
    }

    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for (k, pair) in sizes.windows(2).enumerate() {
        let head = format!("{k} {} {}", pair[0], pair[1]);
        if lines.keyed("weights")? != head {
            return Err(Error::CorruptFile(format!(
                "weights header for layer {k} should read `{head}`"
            )));
        }
        let mut w = Vec::with_capacity(pair[0] * pair[1]);
        for r in 0..pair[0] {
            let (_, line) = lines.next_line(&format!("weights row {r} of layer {k}"))?;
            w.extend(parse_values(line, pair[1], &format!("layer {k} weights row {r}"))?);
        }
        let head = format!("{k} {}", pair[1]);
        if lines.keyed("bias")? != head {
            return Err(Error::CorruptFile(format!(
                "bias header for layer {k} should read `{head}`"
            )));
        }
        let (_, line) = lines.next_line(&format!("bias of layer {k}"))?;
        let b = parse_values(line, pair[1], &format!("layer {k} bias"))?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((pair[0], pair[1]), w).map_err(|e| Error::CorruptFile(e.to_string()))?,
            bias: Array1::from(b),
        });
    }
    let (_, end) = lines.next_line("end marker")?;
    if end.trim() != "end" {
        return Err(Error::CorruptFile("missing end marker".into()));
    }
    let meta = ModelMeta {
        f,
        s,
        l_ref,
        spacing,
        feature_order,
    };
    let mut model = MlpModel::from_layers(layers, meta).map_err(|e| Error::CorruptFile(e.to_string()))?;
    model.train_config = train_config;
    Ok(model)
}

/// Loads a model and checks it was built for windows with foresight `f`
/// and sampling `s`.
pub fn load_model_for(text: &str, f: usize, s: usize) -> Result<MlpModel> {
    let model = load_model(text)?;
    model.check_compatible(f, s)?;
    Ok(model)
}
