//! Logged samples `(x, z_obs, y)` and their CSV representation.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::ActionGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    /// Action that was in force when `y` was observed.
    pub z_obs: f64,
    pub y: f64,
}

/// Non-empty collection of samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("dataset must contain at least one sample"))?;
        let feature_dim = first.x.len();
        if feature_dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != feature_dim {
                return Err(Error::invalid(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.x.len()
                )));
            }
            if !s.z_obs.is_finite() || !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "sample {i} contains a non-finite value"
                )));
            }
        }
        Ok(Dataset {
            samples,
            feature_dim,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.x.clone()).collect()
    }

    /// Checks that every logged action lies inside the grid's interval.
    pub fn check_actions(&self, grid: &ActionGrid) -> Result<()> {
        match self.samples.iter().position(|s| !grid.contains(s.z_obs)) {
            Some(i) => Err(Error::invalid(format!(
                "sample {i} has z_obs = {} outside [{}, {}]",
                self.samples[i].z_obs,
                grid.z_min(),
                grid.z_max()
            ))),
            None => Ok(()),
        }
    }

    /// Writes `x0,...,x{d-1},z_obs,y` with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header: Vec<String> = (0..self.feature_dim).map(|i| format!("x{i}")).collect();
        header.push("z_obs".into());
        header.push("y".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let row = s.x.iter().chain([&s.z_obs, &s.y]).map(|v| v.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let header = r.headers()?.clone();
        let n = header.len();
        if n < 3 {
            return Err(Error::invalid(
                "dataset CSV needs at least x0, z_obs and y columns",
            ));
        }
        for (i, name) in header.iter().take(n - 2).enumerate() {
            if name != format!("x{i}") {
                return Err(Error::invalid(format!(
                    "unexpected column `{name}` at position {i}, expected `x{i}`"
                )));
            }
        }
        if &header[n - 2] != "z_obs" || &header[n - 1] != "y" {
            return Err(Error::invalid("last two dataset columns must be `z_obs,y`"));
        }
        let mut samples = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("row {}: {e}", line + 1)))?;
            samples.push(LabeledSample {
                x: values[..n - 2].to_vec(),
                z_obs: values[n - 2],
                y: values[n - 1],
            });
        }
        Dataset::new(samples)
    }
}

/// Seeded shuffle followed by a `floor(n * frac)` cut for train and val; the
/// remainder becomes the test split.
pub fn split_dataset(
    data: &Dataset,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::invalid(format!(
            "split fractions must be positive with train + val < 1, got ({train_frac}, {val_frac})"
        )));
    }
    let n = data.len();
    let n_train = (n as f64 * train_frac).floor() as usize;
    let n_val = (n as f64 * val_frac).floor() as usize;
    let n_test = n - n_train - n_val;
    for (name, size) in [("train", n_train), ("val", n_val), ("test", n_test)] {
        if size == 0 {
            return Err(Error::invalid(format!(
                "{name} split would be empty ({n} samples, fractions ({train_frac}, {val_frac}))"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |idx: &[usize]| Dataset::new(idx.iter().map(|&i| data.samples[i].clone()).collect());
    Ok((
        take(&order[..n_train])?,
        take(&order[n_train..n_train + n_val])?,
        take(&order[n_train + n_val..])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| LabeledSample {
                    x: vec![i as f64, -(i as f64)],
                    z_obs: (i % 3) as f64,
                    y: i as f64 * 0.5,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_sizes() {
        let (a, b, c) = split_dataset(&toy(10), 0.6, 0.2, 7).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
    }

    #[test]
    fn split_rejects_empty_val() {
        assert!(matches!(
            split_dataset(&toy(5), 0.8, 0.1, 7),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        assert!(split_dataset(&toy(100), 0.6, 0.4, 1).is_err());
        assert!(split_dataset(&toy(100), 0.0, 0.4, 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy(50);
        assert_eq!(
            split_dataset(&d, 0.5, 0.2, 3).unwrap(),
            split_dataset(&d, 0.5, 0.2, 3).unwrap()
        );
        assert_ne!(
            split_dataset(&d, 0.5, 0.2, 3).unwrap().0,
            split_dataset(&d, 0.5, 0.2, 4).unwrap().0
        );
    }

    #[test]
    fn rejects_ragged_and_empty() {
        assert!(Dataset::new(vec![]).is_err());
        let bad = vec![
            LabeledSample {
                x: vec![1.0],
                z_obs: 0.0,
                y: 0.0,
            },
            LabeledSample {
                x: vec![1.0, 2.0],
                z_obs: 0.0,
                y: 0.0,
            },
        ];
        assert!(Dataset::new(bad).is_err());
    }

    #[test]
    fn csv_layout() {
        let d = Dataset::new(vec![LabeledSample {
            x: vec![0.1, -2.0],
            z_obs: 3.0,
            y: 1e-7,
        }])
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x0,x1,z_obs,y\n0.1,-2,3,0.0000001\n");
        assert_eq!(Dataset::read_csv(text.as_bytes()).unwrap(), d);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(Dataset::read_csv("a,z_obs,y\n1,2,3\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("x0,y,z_obs\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn action_range_check() {
        let grid = ActionGrid::new(0.0, 1.0, 3).unwrap();
        assert!(toy(2).check_actions(&grid).is_ok());
        assert!(toy(3).check_actions(&grid).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions(n in 10usize..200, seed in any::<u64>()) {
            let d = toy(n);
            let (a, b, c) = split_dataset(&d, 0.5, 0.25, seed).unwrap();
            let mut seen: Vec<f64> = a.samples().iter()
                .chain(b.samples())
                .chain(c.samples())
                .map(|s| s.x[0])
                .collect();
            seen.sort_by(f64::total_cmp);
            let all: Vec<f64> = (0..n).map(|i| i as f64).collect();
            prop_assert_eq!(seen, all);
        }

        #[test]
        fn csv_round_trip(rows in proptest::collection::vec((any::<f64>(), -1e6f64..1e6, any::<f64>()), 1..20)) {
            let samples: Vec<_> = rows.into_iter()
                .filter(|(a, _, c)| a.is_finite() && c.is_finite())
                .map(|(a, z, y)| LabeledSample { x: vec![a], z_obs: z, y })
                .collect();
            prop_assume!(!samples.is_empty());
            let d = Dataset::new(samples).unwrap();
            let mut buf = Vec::new();
            d.write_csv(&mut buf).unwrap();
            prop_assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
        }
    }
}
