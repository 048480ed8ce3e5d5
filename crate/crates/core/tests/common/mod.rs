use washout_core::linalg::{Mat, Vector};

/// Adaptive Dormand–Prince 5(4) for `ż = F z + c`, stepping exactly onto
/// `dt` with local error per step below `tol · max(1, ‖z‖∞)`.
pub fn oracle(f: &Mat, c: &Vector, z0: &Vector, dt: f64) -> Vector {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let tol = 1e-14;
    let rhs = |z: &Vector| f * z + c;
    let mut z = z0.clone();
    let mut t = 0.0;
    let mut h = (dt / 100.0).max(1e-6);
    while t < dt {
        let last = t + h >= dt;
        let step = if last { dt - t } else { h };
        let mut k: Vec<Vector> = Vec::with_capacity(7);
        k.push(rhs(&z));
        for row in &A {
            let mut y = z.clone();
            for (j, a) in row.iter().enumerate().take(k.len()) {
                y += &k[j] * (step * a);
            }
            k.push(rhs(&y));
        }
        let mut z5 = z.clone();
        let mut e = Vector::zeros(z.len());
        for j in 0..7 {
            z5 += &k[j] * (step * B5[j]);
            e += &k[j] * (step * (B5[j] - B4[j]));
        }
        let scale = tol * z.amax().max(z5.amax()).max(1.0);
        let err = e.amax() / scale;
        if err <= 1.0 {
            z = z5;
            t = if last { dt } else { t + step };
        }
        h = step * (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    z
}
