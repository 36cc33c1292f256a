//! Sequential layer stack.

use crate::layers::{Layer, ParamMut, Pass};
use crate::{NnError, Real, Result, Tensor};

/// One row of a static shape trace: layer name and per-sample output shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeRow {
    pub name: String,
    pub shape: Vec<usize>,
}

pub struct Sequential<T: Real> {
    input_shape: Vec<usize>,
    layers: Vec<Box<dyn Layer<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Sequential<T> {
    pub fn new(input_shape: &[usize]) -> Result<Self> {
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(NnError::InvalidArgument(format!("bad input shape {input_shape:?}")));
        }
        Ok(Sequential {
            input_shape: input_shape.to_vec(),
            layers: Vec::new(),
            shapes: Vec::new(),
        })
    }

    /// Appends a layer after checking that it accepts the current output
    /// shape; the error names the offending layer.
    pub fn push(&mut self, layer: impl Layer<T> + 'static) -> Result<&mut Self> {
        let current = self.output_shape().to_vec();
        let next = layer.output_shape(&current).map_err(|e| {
            NnError::InvalidArgument(format!("layer '{}' rejects input {current:?}: {e}", layer.name()))
        })?;
        self.shapes.push(next);
        self.layers.push(Box::new(layer));
        Ok(self)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap_or(&self.input_shape)
    }

    pub fn layers(&self) -> impl Iterator<Item = &dyn Layer<T>> {
        self.layers.iter().map(|l| l.as_ref())
    }

    /// Input row followed by every layer's output shape.
    pub fn shape_trace(&self) -> Vec<ShapeRow> {
        std::iter::once(ShapeRow {
            name: "Input".into(),
            shape: self.input_shape.clone(),
        })
        .chain(self.layers.iter().zip(&self.shapes).map(|(l, s)| ShapeRow {
            name: l.name().to_string(),
            shape: s.clone(),
        }))
        .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|(_, t)| t.len())
            .sum()
    }

    pub fn forward(&mut self, input: &Tensor<T>, pass: &mut Pass<'_>) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, pass)?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grads(&mut self) {
        self.layers.iter_mut().for_each(|l| l.zero_grads());
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// Parameters as `layer.param` names, in stack order.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .flat_map(|l| {
                let layer = l.name().to_string();
                l.params()
                    .into_iter()
                    .map(move |(p, t)| (format!("{layer}.{p}"), t))
            })
            .collect()
    }

    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.named_params().into_iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<T>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != snapshot.len() {
            return Err(NnError::InvalidArgument(format!(
                "snapshot has {} tensors, model has {}",
                snapshot.len(),
                params.len()
            )));
        }
        for (p, t) in params.iter_mut().zip(snapshot) {
            if p.value.shape() != t.shape() {
                return Err(NnError::shape(p.name, p.value.shape(), t.shape()));
            }
            *p.value = t.clone();
        }
        Ok(())
    }

    /// Loads named tensors, requiring an exact name and shape match.
    pub fn load_named(&mut self, entries: &[(String, Tensor<T>)]) -> Result<()> {
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != entries.len() {
            return Err(NnError::InvalidArgument(format!(
                "checkpoint has {} tensors, model expects {}",
                entries.len(),
                names.len()
            )));
        }
        let mut ordered = Vec::with_capacity(names.len());
        for name in &names {
            let (_, t) = entries
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| NnError::InvalidArgument(format!("checkpoint lacks tensor '{name}'")))?;
            ordered.push(t.clone());
        }
        self.restore(&ordered)
    }
}
