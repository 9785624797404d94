//! Dormand–Prince 8(5,3) integrator for complex vector ODEs ẏ = f(t, y).
//!
//! Step-size control follows Hairer's DOP853: a fifth-order and a third-order
//! error estimate are blended, and real and imaginary parts count as
//! separate components in the scaled error norm.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }
}

/// Work counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub evaluations: usize,
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

/// Stateful integrator; keeps the step size and the FSAL derivative between
/// calls to [`Dop853::advance`] so sampling does not restart the controller.
pub struct Dop853 {
    settings: OdeSettings,
    k: [Vec<Complex64>; 12],
    ytmp: Vec<Complex64>,
    h: f64,
    fsal_t: Option<f64>,
    facold: f64,
    pub stats: OdeStats,
}

impl Dop853 {
    pub fn new(settings: OdeSettings, dim: usize) -> Self {
        Dop853 {
            settings,
            k: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); dim]),
            ytmp: vec![Complex64::new(0.0, 0.0); dim],
            h: 0.0,
            fsal_t: None,
            facold: 1e-4,
            stats: OdeStats::default(),
        }
    }

    fn eval<F>(&mut self, f: &mut F, t: f64, idx: usize)
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        f(t, &self.ytmp, &mut self.k[idx]);
        self.stats.evaluations += 1;
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &[Complex64], span: f64) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let (rtol, atol) = (self.settings.rtol, self.settings.atol);
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let sk = atol + rtol * yi.norm();
            dnf += fi.norm_sqr() / (sk * sk);
            dny += yi.norm_sqr() / (sk * sk);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(self.settings.h_max).min(span);
        for (i, yi) in y.iter().enumerate() {
            self.ytmp[i] = yi + self.k[0][i] * h;
        }
        self.eval(f, t + h, 1);
        let mut der2 = 0.0;
        for (i, yi) in y.iter().enumerate() {
            let sk = atol + rtol * yi.norm();
            der2 += (self.k[1][i] - self.k[0][i]).norm_sqr() / (sk * sk);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        (100.0 * h).min(h1).min(self.settings.h_max)
    }

    /// Integrates from `*t` to `t_end`, updating `y` in place. The final
    /// step is clipped so that `*t == t_end` on return.
    pub fn advance<F>(&mut self, f: &mut F, t: &mut f64, y: &mut [Complex64], t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        if n != self.ytmp.len() {
            return Err(Error::Contract("state dimension changed".into()));
        }
        if t_end <= *t {
            return Ok(());
        }
        if self.fsal_t != Some(*t) {
            self.ytmp.copy_from_slice(y);
            self.eval(f, *t, 0);
            self.fsal_t = Some(*t);
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(f, *t, y, t_end - *t);
        }
        let (rtol, atol) = (self.settings.rtol, self.settings.atol);
        let mut last_rejected = false;
        let mut steps = 0usize;
        while *t < t_end {
            steps += 1;
            if steps > self.settings.max_steps {
                return Err(Error::SolverFailure(format!("step limit reached at t = {}", *t)));
            }
            let clipped = *t + self.h >= t_end;
            let h = if clipped { t_end - *t } else { self.h };
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::SolverFailure(format!("step size underflow at t = {}", *t)));
            }
            let t0 = *t;
            macro_rules! stage {
                ($out:expr, $c:expr, $( ($a:expr, $kk:expr) ),+) => {{
                    for i in 0..n {
                        let mut s = Complex64::new(0.0, 0.0);
                        $( s += self.k[$kk][i] * $a; )+
                        self.ytmp[i] = y[i] + s * h;
                    }
                    self.eval(f, t0 + $c * h, $out);
                }};
            }
            stage!(1, C2, (A21, 0));
            stage!(2, C3, (A31, 0), (A32, 1));
            stage!(3, C4, (A41, 0), (A43, 2));
            stage!(4, C5, (A51, 0), (A53, 2), (A54, 3));
            stage!(5, C6, (A61, 0), (A64, 3), (A65, 4));
            stage!(6, C7, (A71, 0), (A74, 3), (A75, 4), (A76, 5));
            stage!(7, C8, (A81, 0), (A84, 3), (A85, 4), (A86, 5), (A87, 6));
            stage!(8, C9, (A91, 0), (A94, 3), (A95, 4), (A96, 5), (A97, 6), (A98, 7));
            stage!(9, C10, (A101, 0), (A104, 3), (A105, 4), (A106, 5), (A107, 6), (A108, 7), (A109, 8));
            stage!(
                10,
                C11,
                (A111, 0),
                (A114, 3),
                (A115, 4),
                (A116, 5),
                (A117, 6),
                (A118, 7),
                (A119, 8),
                (A1110, 9)
            );
            stage!(
                11,
                1.0,
                (A121, 0),
                (A124, 3),
                (A125, 4),
                (A126, 5),
                (A127, 6),
                (A128, 7),
                (A129, 8),
                (A1210, 9),
                (A1211, 10)
            );
            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..n {
                let k = &self.k;
                let incr = k[0][i] * B1
                    + k[5][i] * B6
                    + k[6][i] * B7
                    + k[7][i] * B8
                    + k[8][i] * B9
                    + k[9][i] * B10
                    + k[10][i] * B11
                    + k[11][i] * B12;
                let ynew = y[i] + incr * h;
                let sk = atol + rtol * y[i].norm().max(ynew.norm());
                let e2 = incr - k[0][i] * BHH1 - k[8][i] * BHH2 - k[11][i] * BHH3;
                let e1 = k[0][i] * ER1
                    + k[5][i] * ER6
                    + k[6][i] * ER7
                    + k[7][i] * ER8
                    + k[8][i] * ER9
                    + k[9][i] * ER10
                    + k[10][i] * ER11
                    + k[11][i] * ER12;
                err2 += (e2.re / sk).powi(2) + (e2.im / sk).powi(2);
                err += (e1.re / sk).powi(2) + (e1.im / sk).powi(2);
                self.ytmp[i] = ynew;
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err * (1.0 / (deno * (2 * n) as f64)).sqrt();
            if !err.is_finite() {
                return Err(Error::SolverFailure(format!("non-finite error estimate at t = {t0}")));
            }
            let fac11 = err.powf(1.0 / 8.0);
            let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let h_new = h / fac;
            if err <= 1.0 {
                self.facold = err.max(1e-4);
                self.stats.accepted += 1;
                y.copy_from_slice(&self.ytmp);
                *t = if clipped { t_end } else { t0 + h };
                self.eval(f, *t, 0);
                self.fsal_t = Some(*t);
                let h_next = if last_rejected { h_new.min(h) } else { h_new };
                // A clipped step says little about the natural step size.
                if !clipped || h_next > self.h {
                    self.h = h_next.min(self.settings.h_max);
                }
                last_rejected = false;
            } else {
                self.stats.rejected += 1;
                self.h = h / (fac11 / SAFE).min(1.0 / FAC_MIN);
                last_rejected = true;
            }
        }
        Ok(())
    }
}
