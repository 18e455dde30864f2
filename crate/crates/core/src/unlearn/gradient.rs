use crate::data::PackedExample;
use crate::error::{Error, Result};
use crate::model::{Model, ParameterVector};
use crate::parallel::{map_ordered, Execution};

/// Mean loss and mean gradient over a batch, given a per-example
/// evaluator. Per-example results are summed in batch order.
pub fn batch_gradient_by<F>(exec: Execution, batch: &[&PackedExample], f: F) -> Result<(f64, ParameterVector)>
where
    F: Fn(&PackedExample) -> Result<(f64, ParameterVector)> + Sync + Send,
{
    if batch.is_empty() {
        return Err(Error::NoBatches("batch gradient"));
    }
    let results = map_ordered(exec, batch, |e| f(e));
    let mut loss = 0.0;
    let mut acc: Option<ParameterVector> = None;
    for r in results {
        let (l, g) = r?;
        loss += l;
        match &mut acc {
            Some(a) => a.add_scaled(1.0, &g)?,
            None => acc = Some(g),
        }
    }
    let n = batch.len() as f64;
    let mut grad = acc.expect("batch is non-empty");
    grad.scale(1.0 / n);
    Ok((loss / n, grad))
}

/// Batch loss is the mean over examples of each example's masked-mean
/// cross-entropy; the gradient is the matching mean.
pub fn batch_gradient(model: &Model, batch: &[&PackedExample]) -> Result<(f64, ParameterVector)> {
    batch_gradient_with(Execution::default(), model, batch)
}

pub fn batch_gradient_with(exec: Execution, model: &Model, batch: &[&PackedExample]) -> Result<(f64, ParameterVector)> {
    batch_gradient_by(exec, batch, |e| model.loss_and_gradient(e))
}

pub fn per_example_losses(model: &Model, examples: &[PackedExample]) -> Result<Vec<f64>> {
    map_ordered(Execution::default(), examples, |e| model.sequence_loss(e))
        .into_iter()
        .collect()
}

/// Mean sequence loss, or `NaN` for an empty set.
pub fn mean_loss(model: &Model, examples: &[PackedExample]) -> Result<f64> {
    let losses = per_example_losses(model, examples)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
