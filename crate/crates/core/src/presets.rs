//! Named experiment setups.
//!
//! | name       | domain      | σ                  | initial    | grid                |
//! |------------|-------------|--------------------|------------|---------------------|
//! | `example1` | `[0, 2]`    | `100 (x − 1)⁴`     | box        | 200 × 100           |
//! | `example2` | `[0, 2]`    | striped            | box        | 200 × 100           |
//! | `example3` | `[0, 2]`    | striped `σ₀(1+μμ')`| box        | 200 × 100           |
//! | `example5` | `[0, 1]²`   | `1`                | Gaussian   | 80² × 16, ε ladder  |
//! | `example6` | `[0, 1]²`   | two weak blocks    | Gaussian   | 80² × 10            |
//!
//! All use `Δt = Δx/3`. The slab examples default to `ε = 1`, `t_max = 1`
//! with the explicit reference; the planar ones to their small-ε setups with
//! the diffusion reference.

use std::path::Path;

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 5] = ["example1", "example2", "example3", "example5", "example6"];

fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "example1" => {
            "[grid]\nnx = 200\nnv = 100\n\
             [physics]\nepsilon = 1\nsigma = vanishing_quartic\ninitial = box\n\
             [solver]\ndt = dx_over_3\nt_max = 1\nmax_iter = 20000\n\
             [output]\nprefix = example1\nreference = auto\n"
        }
        "example2" => {
            "[grid]\nnx = 200\nnv = 100\n\
             [physics]\nepsilon = 1\nsigma = striped\ninitial = box\n\
             [solver]\ndt = dx_over_3\nt_max = 1\nmax_iter = 20000\n\
             [output]\nprefix = example2\nreference = auto\n"
        }
        "example3" => {
            "[grid]\nnx = 200\nnv = 100\n\
             [physics]\nepsilon = 1\nsigma = striped\nkernel = degree1\ninitial = box\n\
             [solver]\nscheme = aniso_gmres\ndt = dx_over_3\nt_max = 1\nmax_iter = 20000\n\
             [output]\nprefix = example3\nreference = auto\n"
        }
        "example5" => {
            "[grid]\ngeometry = planar2d\nx_min = 0\nx_max = 1\nnx = 80\nnv = 16\n\
             [physics]\nepsilon = 1e-3\nepsilons = 1e-1, 1e-2, 1e-3\nsigma = constant\n\
             sigma_value = 1\ninitial = gaussian2d\n\
             [solver]\ndt = dx_over_3\nt_max = 0.1\n\
             [output]\nmode = ap_sweep\nprefix = example5\nreference = diffusion\n"
        }
        "example6" => {
            "[grid]\ngeometry = planar2d\nx_min = 0\nx_max = 1\nnx = 80\nnv = 10\n\
             [physics]\nepsilon = 1e-4\nsigma = blocks2d\ninitial = gaussian2d\n\
             [solver]\ndt = dx_over_3\nt_max = 0.1\n\
             [output]\nprefix = example6\nreference = diffusion\n"
        }
        _ => return None,
    })
}

/// Preset configuration with optional overrides. An `epsilon` override on
/// an ε-ladder preset replaces the ladder by that single value.
pub fn preset(
    name: &str,
    epsilon: Option<f64>,
    t_max: Option<f64>,
    out: Option<&Path>,
) -> Result<ExperimentConfig> {
    let body = text(name).ok_or_else(|| {
        let hint = PRESET_NAMES
            .iter()
            .min_by_key(|p| strsim::levenshtein(name, p))
            .copied()
            .unwrap_or("example1");
        Error::config(
            0,
            format!("unknown preset `{name}`; did you mean `{hint}`?"),
        )
    })?;
    let mut c = parse_config(body)?;
    if let Some(e) = epsilon {
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::config(
                0,
                format!("epsilon must be positive, got {e}"),
            ));
        }
        c.epsilon = e;
        c.epsilons = vec![e];
    }
    if let Some(t) = t_max {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::config(
                0,
                format!("t_max must be non-negative, got {t}"),
            ));
        }
        c.t_max = t;
        c.times.retain(|s| *s <= t);
    }
    if let Some(dir) = out {
        c.dir = dir.to_path_buf();
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{KernelChoice, ReferenceKind, SigmaPreset};
    use crate::stepper::Scheme;

    #[test]
    fn every_preset_parses_and_round_trips() {
        for name in PRESET_NAMES {
            let c = preset(name, None, None, None).unwrap();
            assert_eq!(c, parse_config(&c.to_text()).unwrap(), "{name}");
            assert!(c.resolved_dt().unwrap() > 0.0);
        }
    }

    #[test]
    fn documented_parameters() {
        let c = preset("example1", None, None, None).unwrap();
        assert_eq!((c.nx, c.nv, c.t_max, c.epsilon), (200, 100, 1.0, 1.0));
        assert_eq!(c.sigma, SigmaPreset::VanishingQuartic);
        assert!((c.resolved_dt().unwrap() - 0.01 / 3.0).abs() < 1e-18);
        let c = preset("example3", None, None, None).unwrap();
        assert_eq!(
            (c.kernel, c.scheme),
            (KernelChoice::Degree1, Scheme::AnisoGmres)
        );
        let c = preset("example5", None, None, None).unwrap();
        assert_eq!(c.epsilons, vec![1e-1, 1e-2, 1e-3]);
        assert_eq!((c.nx, c.ny, c.nv), (80, 80, 16));
        let c = preset("example6", None, None, None).unwrap();
        assert_eq!((c.nx, c.nv, c.epsilon), (80, 10, 1e-4));
    }

    #[test]
    fn overrides_apply() {
        let c = preset("example1", Some(1e-3), Some(0.1), Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!((c.epsilon, c.t_max), (1e-3, 0.1));
        assert_eq!(c.reference_for(c.epsilon), ReferenceKind::Diffusion);
        assert_eq!(c.dir, Path::new("/tmp/x"));
        assert!(preset("example4", None, None, None).is_err());
        assert!(preset("example1", Some(-1.0), None, None).is_err());
    }
}
