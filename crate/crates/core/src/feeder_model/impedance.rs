use num_complex::Complex64;
use serde::Serialize;

use super::{FeederError, LineConfig, LineSegment, Mat3};

pub const FEET_PER_MILE: f64 = 5280.0;

/// Three-phase apparent power base used only to scale per-unit
/// transformer impedances into ohms.
pub const S_BASE_VA: f64 = 1.0e6;

/// Series impedance in ohms and total shunt susceptance in microsiemens.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchImpedance {
    pub z_ohm: [[Complex64; 3]; 3],
    pub b_us: Mat3,
}

impl BranchImpedance {
    pub fn zero() -> BranchImpedance {
        BranchImpedance {
            z_ohm: [[Complex64::new(0.0, 0.0); 3]; 3],
            b_us: [[0.0; 3]; 3],
        }
    }
}

pub fn branch_impedance(
    segment: &LineSegment,
    config: &LineConfig,
) -> Result<BranchImpedance, FeederError> {
    if !config.is_line {
        return Err(FeederError::TransformerConfigPassed(config.config_id));
    }
    let k = segment.length_ft / FEET_PER_MILE;
    let mut out = BranchImpedance::zero();
    for i in 0..3 {
        for j in 0..3 {
            out.z_ohm[i][j] = Complex64::new(
                config.r_ohm_per_mile[i][j] * k,
                config.x_ohm_per_mile[i][j] * k,
            );
            out.b_us[i][j] = config.b_usiemens_per_mile[i][j] * k;
        }
    }
    Ok(out)
}

/// Transformer row: R11 and X11 are per-unit series impedance on the feeder
/// base, applied to every phase with no coupling, shift or magnetizing branch.
pub fn transformer_impedance(config: &LineConfig, v_nom_kv: f64) -> BranchImpedance {
    let v_ll = v_nom_kv * 1000.0;
    let z_base = v_ll * v_ll / S_BASE_VA;
    let z = Complex64::new(config.r_ohm_per_mile[0][0], config.x_ohm_per_mile[0][0]) * z_base;
    let mut out = BranchImpedance::zero();
    for i in 0..3 {
        out.z_ohm[i][i] = z;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder_model::BusId;

    fn config1() -> LineConfig {
        LineConfig::from_upper(
            1,
            true,
            [0.4576, 0.156, 0.1535, 0.4666, 0.158, 0.4615],
            [1.078, 0.5017, 0.3849, 1.0482, 0.4236, 1.0651],
            [5.6765, -1.8319, -0.6982, 5.9809, -1.1645, 5.3971],
        )
    }

    fn seg(len: f64, cfg: u32) -> LineSegment {
        LineSegment {
            from_bus: BusId(149),
            to_bus: BusId(1),
            length_ft: len,
            config_id: cfg,
        }
    }

    #[test]
    fn config1_400ft() {
        let z = branch_impedance(&seg(400.0, 1), &config1()).unwrap();
        assert!((z.z_ohm[0][0].re - 0.4576 * 400.0 / 5280.0).abs() < 1e-15);
        assert!((z.z_ohm[0][0].re - 0.034667).abs() < 5e-7);
        assert!((z.z_ohm[0][0].im - 0.081667).abs() < 5e-7);
    }

    #[test]
    fn one_mile_is_identity_scaling() {
        let c = config1();
        let z = branch_impedance(&seg(5280.0, 1), &c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(z.z_ohm[i][j].re, c.r_ohm_per_mile[i][j]);
                assert_eq!(z.z_ohm[i][j].im, c.x_ohm_per_mile[i][j]);
                assert_eq!(z.b_us[i][j], c.b_usiemens_per_mile[i][j]);
            }
        }
    }

    #[test]
    fn transformer_rejected() {
        let c = LineConfig::from_upper(13, false, [0.1, 0., 0., 0., 0., 0.], [0.0; 6], [0.0; 6]);
        assert!(matches!(
            branch_impedance(&seg(1.0, 13), &c),
            Err(FeederError::TransformerConfigPassed(13))
        ));
        let t = transformer_impedance(&c, 4.16);
        assert!((t.z_ohm[2][2].re - 0.1 * 4160.0 * 4160.0 / 1e6).abs() < 1e-12);
        assert_eq!(t.z_ohm[0][1], Complex64::new(0.0, 0.0));
    }
}
