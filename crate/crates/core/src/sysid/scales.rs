use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

use super::{Channel, FlightLog, ScaleParams};

/// Least-squares fit of `z = lambda * u` on all four channels jointly.
///
/// The residual is linear in `lambda`, so Gauss-Newton lands on the optimum in one
/// step; the loop only polishes round-off.
pub fn estimate_scales(log: &FlightLog) -> Result<ScaleParams> {
    let u: Vec<[f64; 4]> = log.records().iter().map(|r| r.command.to_array()).collect();
    let outputs: Vec<Vec<f64>> = Channel::ALL.iter().map(|&c| log.output(c)).collect();
    let z: Vec<[f64; 4]> = (0..u.len())
        .map(|i| [outputs[0][i], outputs[1][i], outputs[2][i], outputs[3][i]])
        .collect();

    let mut jtj = Matrix4::<f64>::zeros();
    for ui in &u {
        for c in 0..4 {
            jtj[(c, c)] += ui[c] * ui[c];
        }
    }
    for ch in Channel::ALL {
        let i = ch.index();
        if !(jtj[(i, i)] > 0.0) {
            return Err(Error::ChannelNotExcited(ch.name()));
        }
    }
    let chol = jtj
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("singular normal matrix".into()))?;

    let mut lambda = Vector4::<f64>::zeros();
    for _ in 0..5 {
        let mut g = Vector4::<f64>::zeros();
        for (ui, zi) in u.iter().zip(&z) {
            for c in 0..4 {
                g[c] += ui[c] * (zi[c] - lambda[c] * ui[c]);
            }
        }
        let step = chol.solve(&g);
        lambda += step;
        if step.amax() <= 1e-15 * lambda.amax() {
            break;
        }
    }
    let p = ScaleParams::from_array([lambda[0], lambda[1], lambda[2], lambda[3]]);
    p.validate()?;
    Ok(p)
}
