use super::{BinarySelection, QuboError, QuboModel};

/// Largest model `exhaustive_min` will enumerate.
pub const MAX_EXHAUSTIVE: usize = 24;

/// Global minimizer by Gray-code enumeration of all `2^N` states. Ties go to
/// the smallest state read as a big-endian integer.
pub fn exhaustive_min(model: &QuboModel) -> Result<BinarySelection, QuboError> {
    let n = model.size();
    if n > MAX_EXHAUSTIVE {
        return Err(QuboError::TooLarge {
            n,
            max: MAX_EXHAUSTIVE,
        });
    }
    if n == 0 {
        return Ok(BinarySelection::zeros(0));
    }
    // incremental energies are within `slack` of exact; near-ties are rescored
    let slack = 1e-9 * model.magnitude().max(f64::MIN_POSITIVE);
    let mut bits = vec![false; n];
    let mut field: Vec<f64> = (0..n).map(|i| model.coefficient(i, i)).collect();
    let mut energy = 0.0;
    let mut best_code = 0u64;
    let mut best_exact = 0.0;
    let mut gray = 0u64;
    for k in 1u64..(1u64 << n) {
        let pos = k.trailing_zeros() as usize;
        gray ^= 1 << pos;
        let i = n - 1 - pos;
        let d = if bits[i] { -field[i] } else { field[i] };
        bits[i] = !bits[i];
        energy += d;
        let sign = if bits[i] { 1.0 } else { -1.0 };
        for (j, f) in field.iter_mut().enumerate() {
            if j != i {
                *f += sign * model.coefficient(i, j);
            }
        }
        if energy < best_exact - slack {
            best_code = gray;
            best_exact = model.energy_of(&bits);
        } else if energy <= best_exact + slack {
            let exact = model.energy_of(&bits);
            if exact < best_exact || (exact == best_exact && gray < best_code) {
                best_code = gray;
                best_exact = exact;
            }
        }
    }
    Ok(BinarySelection::from_integer(best_code, n))
}
