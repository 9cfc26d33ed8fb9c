use crate::network::{Load, ZipFractions};

/// Load power and its partials with respect to |V| and Δf, all in pu.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoadEval {
    pub p: f64,
    pub q: f64,
    pub dp_dv: f64,
    pub dq_dv: f64,
    pub dp_df: f64,
    pub dq_df: f64,
}

impl std::ops::AddAssign for LoadEval {
    fn add_assign(&mut self, o: Self) {
        self.p += o.p;
        self.q += o.q;
        self.dp_dv += o.dp_dv;
        self.dq_dv += o.dq_dv;
        self.dp_df += o.dp_df;
        self.dq_df += o.dq_df;
    }
}

fn zip(base: f64, fr: &ZipFractions, v: f64) -> (f64, f64) {
    let [z, i, p] = *fr;
    (base * ((z * v + i) * v + p), base * (2.0 * z * v + i))
}

/// `1 + k·Δf`, floored at zero so a load never changes sign.
fn freq_factor(k: f64, df: f64) -> (f64, f64) {
    let f = 1.0 + k * df;
    if f > 0.0 {
        (f, k)
    } else {
        (0.0, 0.0)
    }
}

/// ZIP load at voltage magnitude `v_mag`, scaled by the frequency factors.
pub fn scaled_load(load: &Load, v_mag: f64, df: f64) -> (f64, f64) {
    let e = scaled_load_with_derivatives(load, v_mag, df);
    (e.p, e.q)
}

pub fn scaled_load_with_derivatives(load: &Load, v_mag: f64, df: f64) -> LoadEval {
    let (p_zip, dp_zip) = zip(load.p0, &load.zip_p, v_mag);
    let (q_zip, dq_zip) = zip(load.q0, &load.zip_q, v_mag);
    let (fp, dfp) = freq_factor(load.k_pf, df);
    let (fq, dfq) = freq_factor(load.k_qf, df);
    LoadEval {
        p: p_zip * fp,
        q: q_zip * fq,
        dp_dv: dp_zip * fp,
        dq_dv: dq_zip * fq,
        dp_df: p_zip * dfp,
        dq_df: q_zip * dfq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Status, PURE_PQ};

    fn load(p0: f64, zip_p: ZipFractions, k_pf: f64) -> Load {
        Load { id: 1, bus_id: 1, p0, q0: 0.3 * p0, zip_p, zip_q: PURE_PQ, k_pf, k_qf: 0.0, status: Status::InService }
    }

    #[test]
    fn nominal_point() {
        assert_eq!(scaled_load(&load(100.0, PURE_PQ, 0.0), 1.0, 0.0), (100.0, 30.0));
    }

    #[test]
    fn frequency_scaling() {
        let (p, _) = scaled_load(&load(100.0, PURE_PQ, 0.02), 1.0, -0.5);
        assert!((p - 99.0).abs() < 1e-12);
    }

    #[test]
    fn impedance_term() {
        let (p, _) = scaled_load(&load(100.0, [1.0, 0.0, 0.0], 0.0), 0.95, 0.0);
        assert!((p - 90.25).abs() < 1e-12);
    }

    #[test]
    fn clamps_at_zero() {
        let e = scaled_load_with_derivatives(&load(100.0, PURE_PQ, 0.5), 1.0, -3.0);
        assert_eq!(e.p, 0.0);
        assert_eq!(e.dp_df, 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let l = Load { zip_q: [0.2, 0.5, 0.3], k_qf: -0.03, ..load(1.3, [0.3, 0.3, 0.4], 0.04) };
        let (v, df, h) = (0.97, -0.2, 1e-6);
        let e = scaled_load_with_derivatives(&l, v, df);
        let pv = |v, df| scaled_load(&l, v, df);
        let d = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h));
        let (dpv, dqv) = d(pv(v + h, df), pv(v - h, df));
        let (dpf, dqf) = d(pv(v, df + h), pv(v, df - h));
        for (a, b) in [(e.dp_dv, dpv), (e.dq_dv, dqv), (e.dp_df, dpf), (e.dq_df, dqf)] {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}
