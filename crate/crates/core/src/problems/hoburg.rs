//! Long-endurance UAV sizing problem with outbound, return and sprint
//! segments.
//!
//! Variant 0 is a pure GP. Variants 1 and 3 replace the profile-drag fit
//! with the implicit black box `f(C_L, tau, Re) / C_Dp <= 1`, for the sprint
//! segment only or for all three segments. The feasible set does not change.
//!
//! Each cruise leg is flown at its end weight: `W_out` for the outbound leg,
//! `W_zfw` for the return leg.

use std::path::Path;

use crate::model::{Objective, ProblemBuilder, StandardFormProblem};

use super::constants::{Constants, ConstantsError};
use super::drag::{drag_constraint, drag_fit_posynomial};

pub const CONSTANTS: &str = include_str!("../../data/hoburg.constants");

pub const KEYS: [&str; 20] = [
    "g",
    "rho",
    "rho_sl",
    "mu",
    "e",
    "c_lmax",
    "cda_fuse",
    "n_lift",
    "sigma_max",
    "sigma_max_shear",
    "rho_cap",
    "rho_web",
    "w_bar",
    "r_h",
    "f_wadd",
    "w_fixed",
    "eta_eng",
    "eta_v",
    "h_fuel",
    "a_prop",
];

pub const RANGE: f64 = 5000e3;
pub const V_STALL_MAX: f64 = 38.0;
pub const V_SPRINT_MIN: f64 = 150.0;
pub const PAYLOAD_MASS: f64 = 500.0;
pub const TAU_MAX: f64 = 0.15;
pub const P_MIN: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Every drag-fit row is a posynomial.
    Gp,
    /// Sprint drag-fit row black-boxed.
    OneBlackBox,
    /// All three drag-fit rows black-boxed.
    ThreeBlackBoxes,
}

impl Variant {
    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            0 => Some(Self::Gp),
            1 => Some(Self::OneBlackBox),
            3 => Some(Self::ThreeBlackBoxes),
            _ => None,
        }
    }

    pub fn black_boxes(self) -> usize {
        match self {
            Self::Gp => 0,
            Self::OneBlackBox => 1,
            Self::ThreeBlackBoxes => 3,
        }
    }
}

const SEGMENTS: [&str; 3] = ["out", "ret", "sprint"];
const SEGMENT_VARS: [&str; 9] = ["V", "C_L", "C_D", "C_Dp", "Re", "T", "eta_0", "eta_prop", "eta_i"];
const LEG_VARS: [&str; 3] = ["R", "z_bre", "W_fuel"];
const GLOBAL_VARS: [&str; 22] = [
    "S", "A", "tau", "W_MTO", "V_stall", "P_max", "W_pay", "W_tilde", "W_zfw", "W_eng", "W_wing", "W_web", "W_cap",
    "W_out", "W_sprint", "q", "p", "M_r", "t_cap", "I_cap", "t_web", "nu",
];

/// Rough hand-sized design used to start the reference solve, in
/// [`variable_names`] order.
pub const NOMINAL_START: [f64; 55] = [
    25.0, 20.0, 0.12, 40000.0, 35.0, 1e6, 5000.0, 22000.0, 30000.0, 3000.0, 8000.0, 400.0, 4000.0, 33000.0, 33000.0,
    1.5, 2.0, 5e4, 0.005, 2e-5, 0.001, 0.8, //
    50.0, 0.6, 0.013, 0.0055, 1e6, 400.0, 0.25, 0.7, 0.85, //
    50.0, 0.6, 0.013, 0.0055, 1e6, 400.0, 0.25, 0.7, 0.85, //
    150.0, 0.07, 0.008, 0.0057, 3e6, 2200.0, 0.28, 0.8, 0.94, //
    5e6, 0.1, 3000.0, 5e6, 0.1, 3000.0,
];

/// Variable names in index order: globals, then per segment, then per leg.
pub fn variable_names() -> Vec<String> {
    let mut names: Vec<String> = GLOBAL_VARS.iter().map(|s| s.to_string()).collect();
    for seg in SEGMENTS {
        names.extend(SEGMENT_VARS.iter().map(|v| format!("{v}_{seg}")));
    }
    for leg in &SEGMENTS[..2] {
        names.extend(LEG_VARS.iter().map(|v| format!("{v}_{leg}")));
    }
    names
}

pub fn problem(variant: Variant) -> StandardFormProblem {
    let c = Constants::parse(CONSTANTS, "hoburg.constants").expect("shipped constants parse");
    problem_with(&c, variant).expect("shipped constants are complete")
}

pub fn problem_from(path: &Path, variant: Variant) -> Result<StandardFormProblem, ConstantsError> {
    problem_with(&Constants::load(path)?, variant)
}

pub fn problem_with(c: &Constants, variant: Variant) -> Result<StandardFormProblem, ConstantsError> {
    c.require(&KEYS)?;
    let k = |key: &str| c.get(key);
    let pi = std::f64::consts::PI;
    let g = k("g");

    let name = format!("hoburg{}", variant.black_boxes());
    let mut b = ProblemBuilder::new(name);
    let ids: Vec<usize> = variable_names().into_iter().map(|v| b.var(v)).collect();
    let n = ids.len();
    let [s, a, tau, w_mto, v_stall, p_max, w_pay, w_tilde, w_zfw, w_eng, w_wing, w_web, w_cap, w_out, w_sprint, q, p, m_r, t_cap, i_cap, t_web, nu] =
        ids[..22]
    else {
        unreachable!()
    };
    let seg = |j: usize, v: usize| ids[22 + 9 * j + v];
    let leg = |j: usize, v: usize| ids[22 + 27 + 3 * j + v];

    for (j, name) in SEGMENTS.iter().enumerate() {
        let [vel, c_l, c_d, c_dp, re, thrust, eta0, eta_prop, eta_i] = std::array::from_fn(|v| seg(j, v));
        let weight = [w_out, w_zfw, w_sprint][j];
        let rho = k("rho");

        // W = 1/2 rho V^2 C_L S
        b.mono_eq_one(
            format!("lift_{name}"),
            b.mono(0.5 * rho, &[(vel, 2.0), (c_l, 1.0), (s, 1.0), (weight, -1.0)]),
        );
        // T >= 1/2 rho V^2 C_D S
        b.mono_leq_one(
            format!("thrust_{name}"),
            b.mono(0.5 * rho, &[(vel, 2.0), (c_d, 1.0), (s, 1.0), (thrust, -1.0)]),
        );
        // Re = rho V S^1/2 / (A^1/2 mu)
        b.mono_eq_one(
            format!("reynolds_{name}"),
            b.mono(rho / k("mu"), &[(vel, 1.0), (s, 0.5), (a, -0.5), (re, -1.0)]),
        );
        // C_D >= CDA_fuse / S + C_Dp + C_L^2 / (pi e A)
        let drag = b.posy(&[
            (k("cda_fuse"), &[(s, -1.0)]),
            (1.0, &[(c_dp, 1.0)]),
            (1.0 / (pi * k("e")), &[(c_l, 2.0), (a, -1.0)]),
        ]);
        b.posy_leq_mono(format!("drag_coefficient_{name}"), drag, &b.mono(1.0, &[(c_d, 1.0)]));
        // profile drag fit, posynomial or implicit black box
        let label = format!("profile_drag_{name}");
        let boxed = match variant {
            Variant::Gp => false,
            Variant::OneBlackBox => j == 2,
            Variant::ThreeBlackBoxes => true,
        };
        if boxed {
            b.bb_leq_one(label.clone(), drag_constraint(&label, n, c_l, tau, re, c_dp));
        } else {
            b.posy_leq_one(label, drag_fit_posynomial(n, c_l, tau, re, c_dp));
        }
        // eta_0 <= eta_eng eta_prop
        b.mono_leq_one(
            format!("overall_efficiency_{name}"),
            b.mono(1.0 / k("eta_eng"), &[(eta0, 1.0), (eta_prop, -1.0)]),
        );
        // eta_prop <= eta_i eta_v
        b.mono_leq_one(
            format!("propeller_efficiency_{name}"),
            b.mono(1.0 / k("eta_v"), &[(eta_prop, 1.0), (eta_i, -1.0)]),
        );
        // eta_i + T eta_i^2 / (4 * 1/2 rho V^2 A_prop) <= 1
        let momentum = b.posy(&[
            (1.0, &[(eta_i, 1.0)]),
            (1.0 / (2.0 * rho * k("a_prop")), &[(thrust, 1.0), (eta_i, 2.0), (vel, -2.0)]),
        ]);
        b.posy_leq_one(format!("actuator_disk_{name}"), momentum);

        if j == 2 {
            // P_max >= T V / eta_0
            b.mono_leq_one(
                "sprint_power",
                b.mono(1.0, &[(thrust, 1.0), (vel, 1.0), (eta0, -1.0), (p_max, -1.0)]),
            );
            b.mono_leq_one("sprint_speed", b.mono(V_SPRINT_MIN, &[(vel, -1.0)]));
            continue;
        }

        let [range, z, w_fuel] = std::array::from_fn(|v| leg(j, v));
        b.mono_leq_one(format!("range_{name}"), b.mono(RANGE, &[(range, -1.0)]));
        // z_bre >= g R T / (h_fuel eta_0 W)
        b.mono_leq_one(
            format!("breguet_exponent_{name}"),
            b.mono(
                g / k("h_fuel"),
                &[(range, 1.0), (thrust, 1.0), (eta0, -1.0), (weight, -1.0), (z, -1.0)],
            ),
        );
        // W_fuel / W >= z + z^2/2 + z^3/6 + z^4/24
        let series = b.posy(&[
            (1.0, &[(z, 1.0)]),
            (0.5, &[(z, 2.0)]),
            (1.0 / 6.0, &[(z, 3.0)]),
            (1.0 / 24.0, &[(z, 4.0)]),
        ]);
        b.posy_leq_mono(
            format!("fuel_fraction_{name}"),
            series,
            &b.mono(1.0, &[(w_fuel, 1.0), (weight, -1.0)]),
        );
    }
    let w_fuel_out = leg(0, 2);
    let w_fuel_ret = leg(1, 2);

    // W_MTO <= 1/2 rho_sl V_stall^2 C_Lmax S
    b.mono_leq_one(
        "landing_lift",
        b.mono(
            1.0 / (0.5 * k("rho_sl") * k("c_lmax")),
            &[(w_mto, 1.0), (v_stall, -2.0), (s, -1.0)],
        ),
    );
    b.mono_leq_one("stall_speed", b.mono(1.0 / V_STALL_MAX, &[(v_stall, 1.0)]));

    b.mono_leq_one("payload", b.mono(PAYLOAD_MASS * g, &[(w_pay, -1.0)]));
    let p1 = b.posy(&[(k("w_fixed"), &[]), (1.0, &[(w_pay, 1.0)]), (1.0, &[(w_eng, 1.0)])]);
    b.posy_leq_mono("fixed_weight", p1, &b.mono(1.0, &[(w_tilde, 1.0)]));
    let p1 = b.posy(&[(1.0, &[(w_tilde, 1.0)]), (1.0, &[(w_wing, 1.0)])]);
    b.posy_leq_mono("zero_fuel_weight", p1, &b.mono(1.0, &[(w_zfw, 1.0)]));
    // W_eng >= 0.0372 P_max^0.803 (P_max in W)
    b.mono_leq_one("engine_weight", b.mono(0.0372, &[(p_max, 0.803), (w_eng, -1.0)]));
    let p1 = b.posy(&[(1.0, &[(w_web, 1.0)]), (1.0, &[(w_cap, 1.0)])]);
    b.posy_leq_mono("wing_weight", p1, &b.mono(1.0 / k("f_wadd"), &[(w_wing, 1.0)]));
    let p1 = b.posy(&[(1.0, &[(w_zfw, 1.0)]), (1.0, &[(w_fuel_ret, 1.0)])]);
    b.posy_leq_mono("outbound_weight", p1, &b.mono(1.0, &[(w_out, 1.0)]));
    let p1 = b.posy(&[(1.0, &[(w_out, 1.0)]), (1.0, &[(w_fuel_out, 1.0)])]);
    b.posy_leq_mono("takeoff_weight", p1, &b.mono(1.0, &[(w_mto, 1.0)]));
    b.mono_eq_one("sprint_weight", b.mono(1.0, &[(w_sprint, 1.0), (w_out, -1.0)]));

    // 2q >= 1 + p
    b.posy_leq_one("taper_q", b.posy(&[(0.5, &[(q, -1.0)]), (0.5, &[(p, 1.0), (q, -1.0)])]));
    b.mono_leq_one("taper_p", b.mono(P_MIN, &[(p, -1.0)]));
    b.mono_leq_one("thickness", b.mono(1.0 / TAU_MAX, &[(tau, 1.0)]));
    // M_r >= W_tilde A p / 24
    b.mono_leq_one(
        "root_moment",
        b.mono(1.0 / 24.0, &[(w_tilde, 1.0), (a, 1.0), (p, 1.0), (m_r, -1.0)]),
    );
    // 0.92 w tau t_cap^2 + I_cap <= 0.92^2/2 w tau^2 t_cap
    let w_bar = k("w_bar");
    let box_rhs = b.mono(0.92 * 0.92 / 2.0 * w_bar, &[(tau, 2.0), (t_cap, 1.0)]);
    let p1 = b.posy(&[(0.92 * w_bar, &[(tau, 1.0), (t_cap, 2.0)]), (1.0, &[(i_cap, 1.0)])]);
    b.posy_leq_mono("cap_inertia", p1, &box_rhs);
    // 8 >= N M_r A q^2 tau / (S I_cap sigma_max)
    b.mono_leq_one(
        "cap_stress",
        b.mono(
            k("n_lift") / (8.0 * k("sigma_max")),
            &[(m_r, 1.0), (a, 1.0), (q, 2.0), (tau, 1.0), (s, -1.0), (i_cap, -1.0)],
        ),
    );
    // 12 >= A W_tilde N q^2 / (tau S t_web sigma_shear)
    b.mono_leq_one(
        "web_shear",
        b.mono(
            k("n_lift") / (12.0 * k("sigma_max_shear")),
            &[(a, 1.0), (w_tilde, 1.0), (q, 2.0), (tau, -1.0), (s, -1.0), (t_web, -1.0)],
        ),
    );
    // nu^3.94 >= 0.86 p^-2.38 + 0.14 p^0.56
    let p1 = b.posy(&[(0.86, &[(p, -2.38)]), (0.14, &[(p, 0.56)])]);
    b.posy_leq_mono("taper_factor", p1, &b.mono(1.0, &[(nu, 3.94)]));
    // W_cap >= 8 rho_cap g w t_cap S^1.5 nu / (3 A^0.5)
    b.mono_leq_one(
        "cap_weight",
        b.mono(
            8.0 * k("rho_cap") * g * w_bar / 3.0,
            &[(t_cap, 1.0), (s, 1.5), (nu, 1.0), (a, -0.5), (w_cap, -1.0)],
        ),
    );
    // W_web >= 8 rho_web g r_h tau t_web S^1.5 nu / (3 A^0.5)
    b.mono_leq_one(
        "web_weight",
        b.mono(
            8.0 * k("rho_web") * g * k("r_h") / 3.0,
            &[(tau, 1.0), (t_web, 1.0), (s, 1.5), (nu, 1.0), (a, -0.5), (w_web, -1.0)],
        ),
    );

    let f = b.posy(&[(1.0, &[(w_fuel_out, 1.0)]), (1.0, &[(w_fuel_ret, 1.0)])]);
    Ok(b.build(Objective::Posynomial(f)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_zero_is_gp() {
        let p = problem(Variant::Gp);
        assert_eq!(p.n_vars(), 55);
        assert!(p.is_pure_gp());
        assert!(p.validate().is_valid());
    }

    #[test]
    fn black_box_counts() {
        for (v, count) in [(Variant::OneBlackBox, 1), (Variant::ThreeBlackBoxes, 3)] {
            let p = problem(v);
            assert_eq!(p.bb_ineq.len(), count);
            assert!(!p.is_pure_gp());
            assert_eq!(p.n_constraints(), problem(Variant::Gp).n_constraints());
        }
        assert_eq!(problem(Variant::OneBlackBox).bb_ineq[0].label, "profile_drag_sprint");
    }

    #[test]
    fn range_row_is_a_lower_bound() {
        let p = problem(Variant::Gp);
        let row = p.mono_ineq.iter().find(|r| r.label == "range_out").unwrap();
        let r = p.variable_index("R_out").unwrap();
        let mut x = vec![1.0; p.n_vars()];
        x[r] = RANGE;
        assert!((row.body.eval(&x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variant_ids() {
        assert_eq!(Variant::from_count(3), Some(Variant::ThreeBlackBoxes));
        assert_eq!(Variant::from_count(2), None);
    }

    #[test]
    fn missing_constants_are_listed() {
        let c = Constants::parse("g = 9.81\n", "partial").unwrap();
        let err = problem_with(&c, Variant::Gp).unwrap_err().to_string();
        assert!(err.contains("w_fixed") && err.contains("h_fuel"));
    }
}
