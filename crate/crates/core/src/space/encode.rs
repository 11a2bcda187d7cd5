//! Unit-cube encoding used by the surrogate and by real-valued genetic operators.
//!
//! continuous → affine (log-affine when flagged) onto [0, 1]; integers and
//! tuple elements → scaled onto [0, 1]; categoricals → one-hot block.

use super::{Configuration, ParamKind, ParamValue, SearchSpace, SpaceError};

/// Where one parameter lives inside the encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedBlock {
    pub offset: usize,
    pub width: usize,
}

fn width(kind: &ParamKind) -> usize {
    match kind {
        ParamKind::Continuous { .. } | ParamKind::Integer { .. } => 1,
        ParamKind::Categorical { values } => values.len(),
        ParamKind::IntTuple { lo, .. } => lo.len(),
    }
}

pub fn encoded_dim(space: &SearchSpace) -> usize {
    space.params().iter().map(|p| width(&p.kind)).sum()
}

/// Encoded block of every parameter, in parameter order.
pub fn blocks(space: &SearchSpace) -> Vec<EncodedBlock> {
    let mut offset = 0;
    space
        .params()
        .iter()
        .map(|p| {
            let b = EncodedBlock { offset, width: width(&p.kind) };
            offset += b.width;
            b
        })
        .collect()
}

fn scale_int(v: i64, lo: i64, hi: i64) -> f64 {
    (v - lo) as f64 / (hi - lo) as f64
}

fn unscale_int(x: f64, lo: i64, hi: i64) -> i64 {
    let v = lo as f64 + x.clamp(0.0, 1.0) * (hi - lo) as f64;
    (v.round() as i64).clamp(lo, hi)
}

pub(crate) fn encode_real(x: f64, lo: f64, hi: f64, log: bool) -> f64 {
    let t = if log { (x.ln() - lo.ln()) / (hi.ln() - lo.ln()) } else { (x - lo) / (hi - lo) };
    t.clamp(0.0, 1.0)
}

pub(crate) fn decode_real(t: f64, lo: f64, hi: f64, log: bool) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let x = if log { (lo.ln() + t * (hi.ln() - lo.ln())).exp() } else { lo + t * (hi - lo) };
    x.clamp(lo, hi)
}

/// Maps a valid configuration into `[0, 1]^d`.
pub fn encode_unit_cube(space: &SearchSpace, config: &Configuration) -> Result<Vec<f64>, SpaceError> {
    space.check(config)?;
    let mut out = Vec::with_capacity(encoded_dim(space));
    for p in space.params() {
        let v = config.get(&p.name).expect("checked");
        match &p.kind {
            ParamKind::Continuous { lo, hi, log } => {
                out.push(encode_real(v.as_real().expect("checked"), *lo, *hi, *log));
            }
            ParamKind::Integer { lo, hi } => out.push(scale_int(v.as_int().expect("checked"), *lo, *hi)),
            ParamKind::Categorical { values } => {
                let c = v.as_cat().expect("checked");
                out.extend(values.iter().map(|x| if x == c { 1.0 } else { 0.0 }));
            }
            ParamKind::IntTuple { lo, hi } => {
                let t = v.as_tuple().expect("checked");
                out.extend(t.iter().zip(lo).zip(hi).map(|((x, l), h)| scale_int(*x, *l, *h)));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`encode_unit_cube`]. Accepts any vector of the right length:
/// coordinates are clamped, integers rounded, categoricals take the argmax of
/// their block (lowest index on ties), so the result is always valid.
pub fn decode_unit_cube(space: &SearchSpace, x: &[f64]) -> Result<Configuration, SpaceError> {
    let dim = encoded_dim(space);
    if x.len() != dim {
        return Err(SpaceError::DimensionMismatch { expected: dim, found: x.len() });
    }
    let mut config = Configuration::new();
    for (p, b) in space.params().iter().zip(blocks(space)) {
        let seg = &x[b.offset..b.offset + b.width];
        let value = match &p.kind {
            ParamKind::Continuous { lo, hi, log } => ParamValue::Real(decode_real(seg[0], *lo, *hi, *log)),
            ParamKind::Integer { lo, hi } => ParamValue::Int(unscale_int(seg[0], *lo, *hi)),
            ParamKind::Categorical { values } => {
                let mut best = 0;
                for (i, v) in seg.iter().enumerate() {
                    if *v > seg[best] {
                        best = i;
                    }
                }
                ParamValue::Cat(values[best].clone())
            }
            ParamKind::IntTuple { lo, hi } => ParamValue::Tuple(
                seg.iter().zip(lo).zip(hi).map(|((t, l), h)| unscale_int(*t, *l, *h)).collect(),
            ),
        };
        config.insert(p.name.clone(), value);
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{sample_random, ParameterSpec};

    fn space() -> SearchSpace {
        SearchSpace::new(
            vec!["R(2+1)D".into()],
            vec![
                ParameterSpec::log_continuous("lr", 1e-4, 1e-1),
                ParameterSpec::continuous("dropout", 0.0, 0.5),
                ParameterSpec::integer("batch", 16, 256),
                ParameterSpec::categorical("optimizer", ["Adam", "AdamW", "SGD"]),
                ParameterSpec::int_tuple("layers", 5, 1, 6),
            ],
        )
        .unwrap()
    }

    fn with_lr(lr: f64) -> Configuration {
        Configuration::new()
            .with("lr", ParamValue::Real(lr))
            .with("dropout", ParamValue::Real(0.1))
            .with("batch", ParamValue::Int(128))
            .with("optimizer", ParamValue::Cat("AdamW".into()))
            .with("layers", ParamValue::Tuple(vec![3, 3, 3, 3, 3]))
    }

    #[test]
    fn endpoints_map_to_cube_corners() {
        let s = space();
        assert_eq!(encode_unit_cube(&s, &with_lr(1e-4)).unwrap()[0], 0.0);
        assert_eq!(encode_unit_cube(&s, &with_lr(1e-1)).unwrap()[0], 1.0);
    }

    #[test]
    fn categorical_is_one_hot() {
        let s = space();
        let x = encode_unit_cube(&s, &with_lr(1e-3)).unwrap();
        assert_eq!(encoded_dim(&s), 1 + 1 + 1 + 3 + 5);
        assert_eq!(&x[3..6], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let s = space();
        assert!(matches!(encode_unit_cube(&s, &with_lr(2.0)), Err(SpaceError::InvalidConfig(_))));
        assert!(matches!(decode_unit_cube(&s, &[0.5; 3]), Err(SpaceError::DimensionMismatch { .. })));
    }

    fn close(a: &Configuration, b: &Configuration) -> bool {
        a.len() == b.len()
            && a.iter().all(|(k, v)| match (v, b.get(k)) {
                (ParamValue::Real(x), Some(ParamValue::Real(y))) => (x - y).abs() <= 1e-12 * x.abs().max(1.0),
                (v, Some(w)) => v == w,
                _ => false,
            })
    }

    #[test]
    fn decode_inverts_encode_on_random_configs() {
        let s = space();
        for seed in 0..100 {
            let c = sample_random(&s, seed);
            let x = encode_unit_cube(&s, &c).unwrap();
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            let back = decode_unit_cube(&s, &x).unwrap();
            assert!(close(&c, &back), "seed {seed}: {c} vs {back}");
        }
    }

    #[test]
    fn decode_of_arbitrary_vectors_is_valid() {
        let s = space();
        let x = vec![-3.0, 7.0, 0.49, 0.2, 0.2, 0.1, 1.5, -1.0, 0.5, 0.25, 0.99];
        let c = decode_unit_cube(&s, &x).unwrap();
        assert!(s.check(&c).is_ok());
        assert_eq!(c.get("optimizer"), Some(&ParamValue::Cat("Adam".into())));
    }
}
