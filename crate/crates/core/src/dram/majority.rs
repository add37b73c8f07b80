use crate::error::{Result, SimError};

/// Per-bit majority of equally sized rows; exact ties take `bias`.
pub fn majority_overwrite(contents: &[&[u8]], bias: bool) -> Result<Vec<u8>> {
    let first = contents.first().ok_or_else(|| SimError::Shape("majority of zero rows".into()))?;
    let len = first.len();
    if contents.iter().any(|c| c.len() != len) {
        return Err(SimError::Shape("majority rows differ in length".into()));
    }
    if contents.iter().all(|c| c == first) {
        return Ok(first.to_vec());
    }
    let n = contents.len();
    let mut out = vec![0u8; len];
    for (i, byte) in out.iter_mut().enumerate() {
        let mut counts = [0usize; 8];
        for c in contents {
            let b = c[i];
            for (bit, cnt) in counts.iter_mut().enumerate() {
                *cnt += usize::from(b >> bit & 1);
            }
        }
        for (bit, &ones) in counts.iter().enumerate() {
            let set = match (2 * ones).cmp(&n) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => bias,
            };
            if set {
                *byte |= 1 << bit;
            }
        }
    }
    Ok(out)
}
