use super::{NumericsError, Tape, Tensor, Var};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(1, |analytic|)` over every coordinate.
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` where the maximum was attained.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

/// Checks a scalar function of a single tensor.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64, NumericsError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, NumericsError>,
{
    let report = grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), eps)?;
    Ok(report.max_rel_error)
}

/// Checks a scalar function of several tensors, perturbing every coordinate
/// of every input.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NumericsError>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(NumericsError::InvalidArgument(format!(
            "finite-difference step must lie in (0, 1e-2], got {eps}"
        )));
    }

    let eval = |values: &[Tensor]| -> Result<f64, NumericsError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out);
        if v.len() != 1 {
            return Err(NumericsError::NotScalar {
                shape: v.shape().to_vec(),
            });
        }
        Ok(v.item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (which, var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*var, inputs[which].shape());
        for coord in 0..inputs[which].len() {
            let original = inputs[which].data()[coord];
            work[which].data_mut()[coord] = original + eps;
            let plus = eval(&work)?;
            work[which].data_mut()[coord] = original - eps;
            let minus = eval(&work)?;
            work[which].data_mut()[coord] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.data()[coord];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if !err.is_finite() {
                return Err(NumericsError::NonFiniteValue { op: "grad_check" });
            }
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((which, coord));
            }
        }
    }
    Ok(report)
}
