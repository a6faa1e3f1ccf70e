//! Reference values shared by the integration tests.
#![allow(dead_code)]

use seqrb::design::DesignPlan;
use seqrb::record::{ArmRecord, StratumSeries, TrialRecord};

/// Terminal two-arm realisation with its naive and orderings analyses.
pub struct TerminalCase {
    pub k: usize,
    pub s1: u32,
    pub s2: u32,
    pub z: f64,
    pub v: f64,
    pub upper: bool,
    pub naive: [f64; 4],
    pub orderings: [f64; 4],
}

#[allow(clippy::too_many_arguments)]
const fn case(
    k: usize,
    s1: u32,
    s2: u32,
    z: f64,
    v: f64,
    b: u8,
    naive: [f64; 4],
    orderings: [f64; 4],
) -> TerminalCase {
    TerminalCase {
        k,
        s1,
        s2,
        z,
        v,
        upper: b == 1,
        naive,
        orderings,
    }
}

/// Twelve two-arm realisations, 36 patients per arm per interim.
/// `naive` and `orderings` are `[p, estimate, lower, upper]`.
pub const TERMINAL_CASES: [TerminalCase; 12] = [
    case(
        2,
        35,
        59,
        -12.0,
        8.160,
        0,
        [1.000, -1.471, -2.157, -0.784],
        [1.000, -1.470, -2.156, -0.783],
    ),
    case(
        3,
        68,
        87,
        -9.5,
        10.943,
        0,
        [0.998, -0.868, -1.461, -0.276],
        [0.997, -0.857, -1.454, -0.256],
    ),
    case(
        4,
        102,
        118,
        -8.0,
        12.986,
        0,
        [0.987, -0.616, -1.160, -0.072],
        [0.983, -0.599, -1.149, -0.044],
    ),
    case(
        10,
        284,
        285,
        -0.5,
        29.833,
        0,
        [0.537, -0.017, -0.376, 0.342],
        [0.485, 0.007, -0.358, 0.378],
    ),
    case(
        8,
        201,
        201,
        0.0,
        30.359,
        0,
        [0.500, 0.000, -0.356, 0.356],
        [0.464, 0.017, -0.344, 0.382],
    ),
    case(
        13,
        275,
        259,
        8.0,
        57.337,
        0,
        [0.144, 0.140, -0.119, 0.398],
        [0.089, 0.187, -0.084, 0.468],
    ),
    case(
        9,
        252,
        222,
        15.0,
        31.819,
        1,
        [0.004, 0.471, 0.124, 0.819],
        [0.007, 0.454, 0.097, 0.807],
    ),
    case(
        6,
        120,
        88,
        16.0,
        26.963,
        1,
        [0.001, 0.593, 0.216, 0.971],
        [0.003, 0.563, 0.168, 0.949],
    ),
    case(
        6,
        161,
        130,
        15.5,
        23.745,
        1,
        [0.001, 0.653, 0.251, 1.055],
        [0.002, 0.623, 0.205, 1.034],
    ),
    case(
        5,
        135,
        108,
        13.5,
        19.744,
        1,
        [0.001, 0.684, 0.243, 1.125],
        [0.002, 0.676, 0.231, 1.120],
    ),
    case(
        5,
        124,
        92,
        16.0,
        21.600,
        1,
        [0.000, 0.741, 0.319, 1.162],
        [0.001, 0.704, 0.260, 1.137],
    ),
    case(
        3,
        82,
        55,
        13.5,
        12.527,
        1,
        [0.000, 1.078, 0.524, 1.631],
        [0.000, 1.075, 0.519, 1.629],
    ),
];

/// Rao-Blackwell analyses of the same cases:
/// `(rb1 estimate, rb1 se, percent complete, rb2 estimate, rb2 se)`.
pub const RAO_BLACKWELL: [(f64, f64, f64, f64, f64); 12] = [
    (-1.463, 0.360, 99.3, -1.473, 0.383),
    (-0.823, 0.325, 89.3, -0.834, 0.334),
    (-0.560, 0.298, 79.9, -0.567, 0.295),
    (0.046, 0.204, 55.7, 0.046, 0.158),
    (0.051, 0.201, 67.0, 0.052, 0.183),
    (0.224, 0.166, 17.0, 0.227, 0.158),
    (0.420, 0.197, 63.7, 0.424, 0.185),
    (0.519, 0.214, 56.0, 0.529, 0.213),
    (0.580, 0.226, 54.9, 0.584, 0.229),
    (0.653, 0.239, 85.7, 0.658, 0.245),
    (0.655, 0.238, 58.5, 0.671, 0.243),
    (1.059, 0.291, 95.8, 1.069, 0.312),
];

pub fn two_arm_record(c: &TerminalCase) -> TrialRecord {
    let n = 36 * c.k as u32;
    // Only the terminal counts are known; earlier interims are filled with
    // proportional placeholders that keep the series valid.
    let series = |s: u32| -> (Vec<u32>, Vec<u32>) {
        let ns = (1..=c.k as u32).map(|i| 36 * i).collect::<Vec<_>>();
        let ss = (1..=c.k as u32)
            .map(|i| s * i / c.k as u32)
            .collect::<Vec<_>>();
        (ns, ss)
    };
    let (n1, s1) = series(c.s1);
    let (n2, s2) = series(c.s2);
    assert_eq!(*n1.last().unwrap(), n);
    TrialRecord {
        design: DesignPlan::two_arm_default(),
        treatments: vec![
            ArmRecord::unstratified(1, n1, s1),
            ArmRecord::unstratified(2, n2, s2),
        ],
    }
}

fn stratum(centre: u8, n: &[u32], s: &[u32]) -> StratumSeries {
    StratumSeries {
        centre,
        n: n.to_vec(),
        s: s.to_vec(),
    }
}

/// The single four-arm, four-centre run.
pub fn four_arm_record() -> TrialRecord {
    let arm = |t: u8, strata: Vec<StratumSeries>, total_n: u32, total_s: u32| ArmRecord {
        treatment: t,
        last_interim: strata[0].n.len(),
        strata,
        total_n: Some(total_n),
        total_s: Some(total_s),
    };
    let mut design = DesignPlan::four_arm_default();
    design.n_strata = 4;
    TrialRecord {
        design,
        treatments: vec![
            arm(
                1,
                vec![
                    stratum(
                        1,
                        &[11, 18, 30, 41, 50, 57, 65, 76, 86, 92, 98, 103],
                        &[10, 17, 27, 35, 41, 46, 53, 63, 69, 74, 78, 83],
                    ),
                    stratum(
                        2,
                        &[10, 16, 25, 33, 41, 49, 60, 71, 82, 88, 96, 100],
                        &[10, 14, 20, 25, 30, 34, 40, 47, 58, 61, 65, 67],
                    ),
                    stratum(
                        3,
                        &[7, 17, 25, 35, 44, 55, 63, 68, 72, 83, 90, 104],
                        &[6, 11, 16, 20, 26, 32, 36, 41, 43, 49, 55, 64],
                    ),
                    stratum(
                        4,
                        &[8, 21, 28, 35, 45, 55, 64, 73, 84, 97, 112, 125],
                        &[4, 13, 15, 20, 27, 34, 38, 45, 48, 53, 62, 68],
                    ),
                ],
                432,
                282,
            ),
            arm(
                2,
                vec![
                    stratum(1, &[12, 24, 31, 39], &[9, 17, 19, 25]),
                    stratum(2, &[6, 13, 25, 30], &[4, 8, 12, 13]),
                    stratum(3, &[7, 16, 22, 35], &[5, 11, 15, 21]),
                    stratum(4, &[11, 19, 30, 40], &[1, 5, 8, 11]),
                ],
                144,
                70,
            ),
            arm(
                3,
                vec![
                    stratum(
                        1,
                        &[9, 19, 29, 39, 48, 57, 67, 74, 85, 91, 102, 111],
                        &[8, 15, 21, 27, 33, 41, 49, 56, 65, 70, 79, 85],
                    ),
                    stratum(
                        2,
                        &[7, 15, 24, 32, 40, 49, 57, 64, 72, 79, 88, 94],
                        &[5, 9, 15, 22, 28, 31, 33, 38, 44, 47, 52, 56],
                    ),
                    stratum(
                        3,
                        &[9, 17, 25, 32, 42, 50, 58, 68, 76, 90, 101, 111],
                        &[3, 5, 8, 13, 21, 27, 31, 37, 41, 48, 55, 60],
                    ),
                    stratum(
                        4,
                        &[11, 21, 30, 41, 50, 60, 70, 82, 91, 100, 105, 116],
                        &[4, 7, 12, 15, 18, 23, 26, 34, 37, 42, 44, 45],
                    ),
                ],
                432,
                246,
            ),
            arm(
                4,
                vec![
                    stratum(1, &[9, 15, 23, 36, 50], &[5, 11, 17, 24, 32]),
                    stratum(2, &[9, 20, 32, 42, 47], &[6, 11, 16, 24, 27]),
                    stratum(3, &[11, 19, 28, 32, 40], &[5, 8, 12, 14, 18]),
                    stratum(4, &[7, 18, 25, 34, 43], &[3, 9, 10, 13, 16]),
                ],
                180,
                93,
            ),
        ],
    }
}

/// Per-comparison reference values: `(first, second, interim,
/// per-centre (Z, V), total (Z, V), naive [estimate, se, lower, upper],
/// proportion complete, rb2 [estimate, se, lower, upper])`.
pub struct PairRow {
    pub first: u8,
    pub second: u8,
    pub interim: usize,
    pub centres: [(f64, f64); 4],
    pub total: (f64, f64),
    pub naive: [f64; 4],
    pub complete: f64,
    pub rb2: [f64; 4],
}

pub const FOUR_ARM_PAIRS: [PairRow; 6] = [
    PairRow {
        first: 1,
        second: 2,
        interim: 4,
        centres: [(4.25, 3.75), (5.10, 3.76), (-0.50, 4.25), (5.53, 4.53)],
        total: (14.38, 16.28),
        naive: [0.883, 0.248, 0.347, 1.319],
        complete: 0.7381,
        rb2: [0.869, 0.286, 0.309, 1.429],
    },
    PairRow {
        first: 1,
        second: 3,
        interim: 12,
        centres: [(2.14, 9.02), (3.60, 11.24), (4.02, 13.11), (9.39, 14.98)],
        total: (19.15, 48.35),
        naive: [0.396, 0.144, 0.114, 0.678],
        complete: 0.0199,
        rb2: [0.405, 0.220, -0.027, 0.837],
    },
    PairRow {
        first: 1,
        second: 4,
        interim: 5,
        centres: [(4.50, 4.93), (3.44, 5.00), (2.95, 5.23), (5.01, 5.49)],
        total: (15.91, 20.64),
        naive: [0.771, 0.220, 0.340, 1.202],
        complete: 0.3050,
        rb2: [0.667, 0.256, 0.165, 1.169],
    },
    PairRow {
        first: 2,
        second: 3,
        interim: 4,
        centres: [(-1.00, 4.33), (-3.94, 3.81), (3.23, 4.18), (-1.84, 4.41)],
        total: (-3.54, 16.73),
        naive: [-0.212, 0.244, -0.690, 0.266],
        complete: 0.7381,
        rb2: [-0.167, 0.255, -0.667, 0.333],
    },
    PairRow {
        first: 2,
        second: 4,
        interim: 4,
        centres: [(-0.48, 4.24), (-2.42, 4.37), (2.72, 4.17), (-1.97, 4.03)],
        total: (-2.15, 16.81),
        naive: [-0.128, 0.244, -0.606, 0.350],
        complete: 0.7381,
        rb2: [-0.069, 0.249, -0.557, 0.418],
    },
    PairRow {
        first: 3,
        second: 4,
        interim: 5,
        centres: [(1.16, 5.47), (2.71, 5.02), (1.02, 5.11), (-0.28, 5.36)],
        total: (4.62, 20.97),
        naive: [0.220, 0.218, -0.207, 0.647],
        complete: 0.3050,
        rb2: [0.165, 0.225, -0.277, 0.606],
    },
];
