use super::{Tape, Tensor, TensorError, Var};

/// Compares the tape gradient of `f` against central differences for every
/// element of every input. Returns the worst relative error, using
/// `max(|analytic|, |numeric|, 1e-8)` as the denominator.
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let probes: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.len()).map(move |e| (i, e)))
        .collect();
    grad_check_probes(f, inputs, &probes, step)
}

/// Same as [`grad_check`] restricted to the `(input, element)` pairs in
/// `probes`.
pub fn grad_check_probes<F>(
    f: F,
    inputs: &[Tensor],
    probes: &[(usize, usize)],
    step: f64,
) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    assert!(step > 0.0, "finite-difference step must be positive");

    let eval = |values: &[Tensor]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let t = tape.value(out);
        if t.shape() != [1] {
            return Err(TensorError::NonScalarLoss(t.shape().to_vec()));
        }
        Ok(t.data()[0])
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for &(input, elem) in probes {
        let analytic = grads
            .get(vars[input])
            .map(|g| g.data()[elem])
            .unwrap_or(0.0);
        let orig = work[input].data()[elem];
        work[input].data_mut()[elem] = orig + step;
        let plus = eval(&work)?;
        work[input].data_mut()[elem] = orig - step;
        let minus = eval(&work)?;
        work[input].data_mut()[elem] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}
