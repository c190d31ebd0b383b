use std::fmt::Write;

use super::Model;
use crate::layers::Layer;
use crate::tensor::{shape_string, Scalar};

const HEADER: [&str; 6] = ["Layer", "Kernels", "Kernel Size", "Stride", "Feature Map Size", "Activation"];
const WIDTHS: [usize; 6] = [15, 9, 13, 8, 18, 10];

fn row(out: &mut String, cells: [&str; 6]) {
    let mut line = String::new();
    for (cell, width) in cells.iter().zip(WIDTHS) {
        let _ = write!(line, "{cell:<width$}");
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

fn with_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Layer table: one row per layer with kernel count, kernel size, stride,
/// output shape and activation, then the parameter total. A model without
/// layers prints the header alone.
pub fn summary<T: Scalar>(model: &Model<T>) -> String {
    let mut out = String::new();
    row(&mut out, HEADER);
    if model.layers().is_empty() {
        return out;
    }
    let input = model.input_shape();
    // Single-channel inputs print as the bare image size.
    let input_str = match input {
        [h, w, 1] => format!("{h} x {w}"),
        other => shape_string(other),
    };
    row(&mut out, ["InputLayer", "-", "-", "-", &input_str, "-"]);
    for (layer, shape) in model.layers().iter().zip(model.layer_shapes()) {
        let (kernels, size, stride, act) = match layer {
            Layer::Conv2d(c) => (
                c.filters().to_string(),
                format!("{k} x {k}", k = c.kernel_size()),
                c.stride().to_string(),
                if c.activation_alpha().is_some() { "LeakyReLU" } else { "-" },
            ),
            Layer::MaxPool2d(p) => (
                "-".into(),
                format!("{k} x {k}", k = p.pool_size()),
                p.stride().to_string(),
                "-",
            ),
            Layer::LeakyRelu(_) => ("-".into(), "-".into(), "-".into(), "LeakyReLU"),
            _ => ("-".into(), "-".into(), "-".into(), "-"),
        };
        row(&mut out, [layer.name(), &kernels, &size, &stride, &shape_string(shape), act]);
    }
    let _ = writeln!(out, "Total params: {}", with_thousands(model.param_count()));
    out
}
