//! Loop-level single-unit reference, written from the published pseudocode
//! and sharing no dynamics code with the engine.

/// Raw register values for one unit with one input synapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarParams {
    pub delta_i: i64,
    pub delta_v: i64,
    pub v_mantissa: i64,
    pub bias: i64,
    pub refractory: u32,
    /// Weight mantissa as given by the user.
    pub mantissa: i64,
    pub exponent: i32,
    /// Grid exponent of the weight storage format.
    pub precision_exponent: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScalarTrace {
    pub current: Vec<i64>,
    pub voltage: Vec<i64>,
    pub spikes: Vec<bool>,
}

const J_LIMIT: i128 = (1 << 21) - (1 << 6);

/// `sign(x) * ceil(|x|)` for `x = num / 4096`.
fn rnd_over_4096(num: i128) -> i128 {
    let mag = (num.abs() + 4095) / 4096;
    if num < 0 {
        -mag
    } else {
        mag
    }
}

/// Shift the mantissa onto its grid toward zero, scale by `2^(6+exp)`,
/// clip to 21 bits and drop the low six bits toward zero.
pub fn scalar_weight(mantissa: i64, exponent: i32, precision_exponent: u32) -> i64 {
    let sign: i128 = if mantissa < 0 { -1 } else { 1 };
    let mut mag = i128::from(mantissa).abs();
    mag = (mag >> precision_exponent) << precision_exponent;
    let shift = 6 + exponent;
    let scaled = if shift >= 0 { mag << shift } else { mag >> -shift };
    let clipped = (sign * scaled).clamp(-J_LIMIT, J_LIMIT);
    let out = clipped.abs() / 64 * 64;
    (clipped.signum() * out) as i64
}

pub fn scalar_algorithm1(params: &ScalarParams, input: &[bool]) -> ScalarTrace {
    let j = i128::from(scalar_weight(
        params.mantissa,
        params.exponent,
        params.precision_exponent,
    ));
    let v_th = i128::from(params.v_mantissa) * 64;
    let (di, dv) = (i128::from(params.delta_i), i128::from(params.delta_v));
    let mut out = ScalarTrace::default();
    let (mut i, mut v) = (0i128, 0i128);
    let mut hold = 0u32;
    for &s in input {
        i = i - rnd_over_4096(i * di) + if s { j } else { 0 };
        let mut spike = false;
        if hold > 0 {
            hold -= 1;
            v = 0;
        } else {
            v = v - rnd_over_4096(v * dv) + i + i128::from(params.bias);
            if v > v_th {
                spike = true;
                v = 0;
                hold = params.refractory;
            }
        }
        out.current.push(i as i64);
        out.voltage.push(v as i64);
        out.spikes.push(spike);
    }
    out
}

/// `sum_k J exp((t_k - t) / tau) H(t - t_k)`.
pub fn closed_form_current(spike_times: &[f64], weight: f64, tau: f64, t: f64) -> f64 {
    spike_times
        .iter()
        .filter(|&&tk| t >= tk)
        .map(|&tk| weight * ((tk - t) / tau).exp())
        .sum()
}
