//! Daubechies low-pass filters, normalized so that the taps sum to sqrt(2).
//!
//! Computed by spectral factorization of the Daubechies polynomial and
//! taking the minimum-phase root set.

#![allow(clippy::excessive_precision)]

const DB3: [f64; 6] = [
    0.33267055295008262,
    0.80689150931109258,
    0.45987750211849157,
    -0.13501102001025459,
    -0.085441273882026662,
    0.035226291885709537,
];

const DB4: [f64; 8] = [
    0.2303778133088965,
    0.71484657055291565,
    0.63088076792985891,
    -0.027983769416859854,
    -0.18703481171909308,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];

const DB5: [f64; 10] = [
    0.16010239797419291,
    0.60382926979718967,
    0.72430852843777293,
    0.13842814590132073,
    -0.24229488706638203,
    -0.032244869584638375,
    0.077571493840045714,
    -0.0062414902127982743,
    -0.012580751999081999,
    0.0033357252854737713,
];

const DB6: [f64; 12] = [
    0.11154074335010946,
    0.49462389039845309,
    0.75113390802109535,
    0.31525035170919763,
    -0.22626469396543982,
    -0.12976686756726194,
    0.097501605587323049,
    0.027522865530305729,
    -0.03158203931748603,
    0.00055384220116149614,
    0.0047772575109455106,
    -0.0010773010853084796,
];

const DB7: [f64; 14] = [
    0.077852054085009179,
    0.39653931948191731,
    0.72913209084623512,
    0.46978228740519312,
    -0.14390600392856498,
    -0.22403618499387498,
    0.071309219266830265,
    0.080612609151083072,
    -0.038029936935014414,
    -0.016574541630666881,
    0.012550998556099841,
    0.00042957797292136652,
    -0.0018016407040474909,
    0.00035371379997452025,
];

const DB8: [f64; 16] = [
    0.05441584224310401,
    0.31287159091429997,
    0.67563073629728981,
    0.58535468365420671,
    -0.015829105256349306,
    -0.28401554296154693,
    0.00047248457391328277,
    0.12874742662047846,
    -0.017369301001807546,
    -0.044088253930794752,
    0.013981027917398282,
    0.0087460940474057767,
    -0.0048703529934515743,
    -0.00039174037337694705,
    0.00067544940645056937,
    -0.00011747678412476953,
];

const DB9: [f64; 18] = [
    0.038077947363878347,
    0.24383467461259035,
    0.60482312369011111,
    0.65728807805130054,
    0.13319738582500758,
    -0.29327378327917491,
    -0.096840783222976461,
    0.14854074933810638,
    0.030725681479333379,
    -0.067632829061329974,
    0.00025094711483145196,
    0.022361662123679097,
    -0.0047232047577513973,
    -0.0042815036824634298,
    0.0018476468830562265,
    0.00023038576352319597,
    -0.00025196318894271014,
    0.000039347320316271599,
];

const DB10: [f64; 20] = [
    0.026670057900555554,
    0.18817680007769149,
    0.52720118893172559,
    0.68845903945360357,
    0.28117234366057746,
    -0.24984642432731538,
    -0.19594627437737704,
    0.12736934033579326,
    0.093057364603572351,
    -0.071394147166397087,
    -0.029457536821875813,
    0.033212674059341002,
    0.0036065535669561697,
    -0.010733175483330575,
    0.0013953517470529012,
    0.0019924052951850561,
    -0.00068585669495971163,
    -0.00011646685512928545,
    0.000093588670320069591,
    -0.000013264202894521245,
];


/// Smallest supported number of vanishing moments (order 2 is not C¹).
pub const MIN_ORDER: usize = 3;
/// Largest tabulated order.
pub const MAX_ORDER: usize = 10;

/// Low-pass filter `h` with `2 * order` taps, or `None` if the order is not tabulated.
pub fn lowpass(order: usize) -> Option<&'static [f64]> {
    Some(match order {
        3 => &DB3,
        4 => &DB4,
        5 => &DB5,
        6 => &DB6,
        7 => &DB7,
        8 => &DB8,
        9 => &DB9,
        10 => &DB10,
        _ => return None,
    })
}

/// Quadrature-mirror high-pass filter `g_k = (-1)^k h_{2r-1-k}`.
pub fn highpass(order: usize) -> Option<Vec<f64>> {
    let h = lowpass(order)?;
    let len = h.len();
    Some(
        (0..len)
            .map(|k| if k % 2 == 0 { h[len - 1 - k] } else { -h[len - 1 - k] })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_satisfy_orthonormality_conditions() {
        for order in MIN_ORDER..=MAX_ORDER {
            let h = lowpass(order).unwrap();
            let sum: f64 = h.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-14, "order {order}");
            // sum_k h_k h_{k+2m} = delta_m
            for m in 0..order {
                let dot: f64 = (0..h.len() - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
                let want = if m == 0 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-14, "order {order} shift {m}: {dot}");
            }
        }
    }

    #[test]
    fn highpass_has_vanishing_moments() {
        for order in MIN_ORDER..=MAX_ORDER {
            let g = highpass(order).unwrap();
            for moment in 0..order as i32 {
                let s: f64 = g
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (k as f64).powi(moment))
                    .sum();
                let scale = (2.0 * order as f64).powi(moment);
                assert!(s.abs() / scale < 1e-9, "order {order} moment {moment}: {s}");
            }
        }
    }

    #[test]
    fn untabulated_orders_are_rejected() {
        assert!(lowpass(2).is_none());
        assert!(lowpass(11).is_none());
    }
}
