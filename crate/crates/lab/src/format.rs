//! Plain-text configuration files.
//!
//! ```text
//! lrp-configuration 1
//! d 1
//! alpha 0.5
//! beta 1
//! amplitude 1
//! norm sup
//! n 2
//! master_seed 7
//! replica 0
//! edges 2
//! -1 ; 0
//! 0 ; 2
//! ```
//!
//! Floats are written in shortest round-trip form, so parsing returns the
//! identical bits.

use std::fmt::Write as _;

use lrp_core::kernel::{KernelSpec, LatticeBox, Norm};
use lrp_core::rng::SeedSpec;
use lrp_core::sampler::{Configuration, Edge};

use crate::error::{LabError, LabResult};

const MAGIC: &str = "lrp-configuration 1";

pub fn write_configuration(config: &Configuration) -> String {
    let s = &config.spec;
    let mut out = String::new();
    let norm = match s.norm {
        Norm::Sup => "sup",
        Norm::Euclidean => "euclidean",
    };
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "d {}\nalpha {}\nbeta {}\namplitude {}\nnorm {norm}", s.d, s.alpha, s.beta, s.amplitude).unwrap();
    writeln!(out, "n {}\nmaster_seed {}\nreplica {}", config.lattice.n, config.seed.master_seed, config.seed.replica_index).unwrap();
    writeln!(out, "edges {}", config.edges.len()).unwrap();
    let (mut x, mut y) = (vec![0i64; s.d], vec![0i64; s.d]);
    for e in &config.edges {
        config.lattice.coords_into(e.a as usize, &mut x);
        config.lattice.coords_into(e.b as usize, &mut y);
        let join = |v: &[i64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "{} ; {}", join(&x), join(&y)).unwrap();
    }
    out
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("configuration line {line}: {msg}"))
}

pub fn parse_configuration(text: &str) -> LabResult<Configuration> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut next = |key: &str| -> LabResult<(usize, String)> {
        let (no, line) = lines.next().ok_or_else(|| LabError::Config(format!("configuration ends before `{key}`")))?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((no, v.trim().to_string())),
            _ => Err(parse_err(no, format!("expected `{key} <value>`, found `{line}`"))),
        }
    };
    fn num<T: std::str::FromStr>(no: usize, v: &str) -> LabResult<T>
    where
        T::Err: std::fmt::Display,
    {
        v.parse().map_err(|e| parse_err(no, format!("`{v}`: {e}")))
    }
    let (no, version) = next("lrp-configuration")?;
    if version != "1" {
        return Err(parse_err(no, format!("unsupported format version {version}")));
    }
    let (no, v) = next("d")?;
    let d: usize = num(no, &v)?;
    let (no, v) = next("alpha")?;
    let alpha: f64 = num(no, &v)?;
    let (no, v) = next("beta")?;
    let beta: f64 = num(no, &v)?;
    let (no, v) = next("amplitude")?;
    let amplitude: f64 = num(no, &v)?;
    let (no, v) = next("norm")?;
    let norm = match v.as_str() {
        "sup" => Norm::Sup,
        "euclidean" => Norm::Euclidean,
        other => return Err(parse_err(no, format!("unknown norm `{other}`"))),
    };
    let spec = KernelSpec { d, alpha, beta, amplitude, norm };
    spec.validate()?;
    let (no, v) = next("n")?;
    let lattice = LatticeBox::new(d, num(no, &v)?)?;
    let (no, v) = next("master_seed")?;
    let master_seed = num(no, &v)?;
    let (no, v) = next("replica")?;
    let seed = SeedSpec::new(master_seed, num(no, &v)?);
    let (no, v) = next("edges")?;
    let count: usize = num(no, &v)?;
    let mut edges = Vec::with_capacity(count);
    for (no, line) in lines.by_ref() {
        let (a, b) = line.split_once(';').ok_or_else(|| parse_err(no, "edge lines look like `x-coords ; y-coords`"))?;
        let point = |part: &str| -> LabResult<u32> {
            let c: Vec<i64> = part.split_whitespace().map(|t| num(no, t)).collect::<LabResult<_>>()?;
            if c.len() != d {
                return Err(parse_err(no, format!("expected {d} coordinates, found {}", c.len())));
            }
            lattice.index_of(&c).map(|i| i as u32).ok_or_else(|| parse_err(no, format!("point {c:?} lies outside the box of radius {}", lattice.n)))
        };
        edges.push(Edge::new(point(a)?, point(b)?));
    }
    if edges.len() != count {
        return Err(LabError::Config(format!("header announces {count} edges, found {}", edges.len())));
    }
    Ok(Configuration::new(lattice, spec, edges, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lrp_core::sampler::sample_grouped;
    use proptest::prelude::*;

    #[test]
    fn hand_written_file_parses() {
        let text = "lrp-configuration 1\nd 1\nalpha 0.5\nbeta 1\namplitude 1\nnorm sup\nn 2\nmaster_seed 7\nreplica 0\nedges 2\n-1 ; 0\n0 ; 2\n";
        let c = parse_configuration(text).unwrap();
        assert_eq!(c.edges, [Edge::new(1, 2), Edge::new(2, 4)]);
        assert_eq!(write_configuration(&c), text);
    }

    #[test]
    fn rejects_bad_files() {
        let good = "lrp-configuration 1\nd 1\nalpha 0.5\nbeta 1\namplitude 1\nnorm sup\nn 2\nmaster_seed 7\nreplica 0\nedges 1\n-1 ; 0\n";
        assert!(parse_configuration(good).is_ok());
        assert!(parse_configuration(&good.replace("-1 ; 0", "-3 ; 0")).is_err());
        assert!(parse_configuration(&good.replace("edges 1", "edges 2")).is_err());
        assert!(parse_configuration(&good.replace("-1 ; 0", "-1 0")).is_err());
        assert!(parse_configuration(&good.replace("norm sup", "norm l1")).is_err());
        assert!(parse_configuration(&good.replace("-1 ; 0", "0 ; 0")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            d in 1usize..=3,
            n in 1u32..4,
            alpha_bits in 1u64..0x7fe0_0000_0000_0000,
            beta in 0.0f64..5.0,
            amp in 0.01f64..10.0,
            seed in any::<u64>(),
            replica in any::<u64>(),
        ) {
            let alpha = f64::from_bits(alpha_bits);
            let spec = KernelSpec::new(d, alpha, beta).unwrap().with_amplitude(amp);
            let lattice = LatticeBox::new(d, n).unwrap();
            let config = sample_grouped(&spec, lattice, SeedSpec::new(seed, replica)).unwrap();
            let text = write_configuration(&config);
            let back = parse_configuration(&text).unwrap();
            prop_assert_eq!(back.spec.alpha.to_bits(), alpha.to_bits());
            prop_assert_eq!(back.spec.beta.to_bits(), beta.to_bits());
            prop_assert_eq!(back.spec.amplitude.to_bits(), amp.to_bits());
            prop_assert_eq!(&back, &config);
            prop_assert_eq!(write_configuration(&back), text);
        }
    }
}
