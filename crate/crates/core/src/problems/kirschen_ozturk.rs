//! Low-fidelity wing sizing problem with a fuselage fuel tank.
//!
//! All rows but one are posynomial or monomial after dividing through. The
//! structural weight row `W_w,strc >= C2 N A^1.5 sqrt((W_0 + V_fuse g rho_f) W S) / tau`
//! is squared so that it reads as a two-term posynomial. The fuel volume
//! balance `V_avail <= V_wing + V_fuse` is a signomial and is passed as the
//! black box `V_avail / (V_wing + V_fuse) <= 1`.

use std::path::Path;

use crate::model::{Objective, ProblemBuilder, StandardFormProblem};

use super::constants::{Constants, ConstantsError};
use super::ratio_constraint;

pub const CONSTANTS: &str = include_str!("../../data/kirschen_ozturk.constants");

pub const KEYS: [&str; 20] = [
    "g",
    "rho",
    "mu",
    "rho_f",
    "c_t",
    "range",
    "k",
    "e",
    "s_wet_ratio",
    "c_lmax",
    "v_min",
    "w_0",
    "n_ult",
    "tau",
    "c_ww1",
    "c_ww2",
    "fuse_length",
    "c_f_coeff",
    "c_f_exp",
    "v_f_wing_coeff",
];

pub const VARIABLES: [&str; 19] = [
    "W_f", "t", "D", "V", "S", "C_D", "CDA_0", "C_f", "Re", "A", "C_L", "W", "W_w", "W_w_surf", "W_w_strc",
    "V_f", "V_f_avail", "V_f_wing", "V_f_fuse",
];

/// Rough hand-sized design used to start the reference solve.
pub const NOMINAL_START: [f64; 19] = [
    1250.0, 5e4, 150.0, 60.0, 15.0, 0.03, 0.03, 0.05, 5e6, 10.0, 0.5, 1e4, 2000.0, 900.0, 1000.0, 0.15, 0.2, 0.15, 0.1,
];

/// Problem built from the shipped constants.
pub fn problem() -> StandardFormProblem {
    let c = Constants::parse(CONSTANTS, "kirschen_ozturk.constants").expect("shipped constants parse");
    problem_with(&c).expect("shipped constants are complete")
}

pub fn problem_from(path: &Path) -> Result<StandardFormProblem, ConstantsError> {
    problem_with(&Constants::load(path)?)
}

pub fn problem_with(c: &Constants) -> Result<StandardFormProblem, ConstantsError> {
    c.require(&KEYS)?;
    let k = |key: &str| c.get(key);
    let pi = std::f64::consts::PI;

    let mut b = ProblemBuilder::new("kirschen_ozturk");
    let v: Vec<usize> = VARIABLES.iter().map(|name| b.var(*name)).collect();
    let [w_f, t, d, vel, s, c_d, cda0, c_f, re, a, c_l, w, w_w, w_surf, w_strc, v_f, v_avail, v_wing, v_fuse] =
        v[..]
    else {
        unreachable!()
    };

    // W_f >= c_T t D
    b.mono_leq_one("fuel_burn", b.mono(k("c_t"), &[(t, 1.0), (d, 1.0), (w_f, -1.0)]));
    // t >= R / V
    b.mono_leq_one("flight_time", b.mono(k("range"), &[(vel, -1.0), (t, -1.0)]));
    // D >= 1/2 rho V^2 S C_D
    b.mono_leq_one(
        "drag",
        b.mono(0.5 * k("rho"), &[(vel, 2.0), (s, 1.0), (c_d, 1.0), (d, -1.0)]),
    );
    // C_D >= CDA_0 / S + k C_f S_wet/S + C_L^2 / (pi A e)
    let p = b.posy(&[
        (1.0, &[(cda0, 1.0), (s, -1.0)]),
        (k("k") * k("s_wet_ratio"), &[(c_f, 1.0)]),
        (1.0 / (pi * k("e")), &[(c_l, 2.0), (a, -1.0)]),
    ]);
    b.posy_leq_mono("drag_coefficient", p, &b.mono(1.0, &[(c_d, 1.0)]));
    // C_f >= 0.074 Re^-0.02
    b.mono_leq_one(
        "skin_friction",
        b.mono(k("c_f_coeff"), &[(re, -k("c_f_exp")), (c_f, -1.0)]),
    );
    // Re <= rho V sqrt(S/A) / mu
    b.mono_leq_one(
        "reynolds",
        b.mono(k("mu") / k("rho"), &[(re, 1.0), (vel, -1.0), (s, -0.5), (a, 0.5)]),
    );
    // 1/2 rho V^2 S C_L >= W_0 + W_w + W_f / 2
    let p = b.posy(&[(k("w_0"), &[]), (1.0, &[(w_w, 1.0)]), (0.5, &[(w_f, 1.0)])]);
    let lift = b.mono(0.5 * k("rho"), &[(vel, 2.0), (s, 1.0), (c_l, 1.0)]);
    b.posy_leq_mono("cruise_lift", p, &lift);
    // 1/2 rho V_min^2 S C_Lmax >= W
    b.mono_leq_one(
        "takeoff_lift",
        b.mono(
            1.0 / (0.5 * k("rho") * k("v_min").powi(2) * k("c_lmax")),
            &[(w, 1.0), (s, -1.0)],
        ),
    );
    // W >= W_0 + W_w + W_f
    let p = b.posy(&[(k("w_0"), &[]), (1.0, &[(w_w, 1.0)]), (1.0, &[(w_f, 1.0)])]);
    b.posy_leq_mono("total_weight", p, &b.mono(1.0, &[(w, 1.0)]));
    // W_w >= W_w,surf + W_w,strc
    let p = b.posy(&[(1.0, &[(w_surf, 1.0)]), (1.0, &[(w_strc, 1.0)])]);
    b.posy_leq_mono("wing_weight", p, &b.mono(1.0, &[(w_w, 1.0)]));
    // W_w,surf >= C1 S
    b.mono_leq_one("wing_surface_weight", b.mono(k("c_ww1"), &[(s, 1.0), (w_surf, -1.0)]));
    // W_w,strc^2 >= C2^2 N^2 A^3 (W_0 + V_fuse g rho_f) W S / tau^2
    let coeff = (k("c_ww2") * k("n_ult") / k("tau")).powi(2);
    let p = b.posy(&[
        (coeff * k("w_0"), &[(a, 3.0), (w, 1.0), (s, 1.0), (w_strc, -2.0)]),
        (
            coeff * k("g") * k("rho_f"),
            &[(a, 3.0), (v_fuse, 1.0), (w, 1.0), (s, 1.0), (w_strc, -2.0)],
        ),
    ]);
    b.posy_leq_one("wing_structural_weight", p);
    // V_f <= V_f,avail
    b.mono_leq_one("fuel_volume", b.mono(1.0, &[(v_f, 1.0), (v_avail, -1.0)]));
    // V_f = W_f / (g rho_f)
    b.mono_eq_one(
        "fuel_volume_definition",
        b.mono(k("g") * k("rho_f"), &[(v_f, 1.0), (w_f, -1.0)]),
    );
    // V_f,avail <= V_f,wing + V_f,fuse
    let n = b.n_vars();
    let num = b.posy(&[(1.0, &[(v_avail, 1.0)])]);
    let den = b.posy(&[(1.0, &[(v_wing, 1.0)]), (1.0, &[(v_fuse, 1.0)])]);
    b.bb_leq_one("fuel_volume_available", ratio_constraint("fuel_volume_available", n, num, den));
    // V_f,wing^2 <= 0.0009 S^3 tau^2 / A
    b.mono_leq_one(
        "wing_fuel_volume",
        b.mono(
            1.0 / (k("v_f_wing_coeff") * k("tau").powi(2)),
            &[(v_wing, 2.0), (s, -3.0), (a, 1.0)],
        ),
    );
    // V_f,fuse <= CDA_0 * 10 m
    b.mono_leq_one(
        "fuselage_fuel_volume",
        b.mono(1.0 / k("fuse_length"), &[(v_fuse, 1.0), (cda0, -1.0)]),
    );

    let f = b.posy(&[(1.0, &[(w_f, 1.0)])]);
    Ok(b.build(Objective::Posynomial(f)))
}
