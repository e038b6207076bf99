//! Synthetic rooftop PV production.

use std::f64::consts::PI;

use chrono::Datelike;
use rand::Rng;

use crate::model::{EnergySeries, TimeAxis};

/// Latitude of the synthetic site (south-east France), degrees.
pub const SITE_LATITUDE_DEG: f64 = 43.7;

fn sin_elevation(day_of_year: f64, solar_hour: f64, latitude: f64) -> f64 {
    let declination = (23.44 * PI / 180.0) * (2.0 * PI * (284.0 + day_of_year) / 365.0).sin();
    let hour_angle = (solar_hour - 12.0) * 15.0 * PI / 180.0;
    latitude.sin() * declination.sin() + latitude.cos() * declination.cos() * hour_angle.cos()
}

/// Daily clearness index: mostly clear in summer, mostly overcast in winter.
fn clearness<R: Rng>(rng: &mut R, day_of_year: f64) -> (f64, bool) {
    let p_clear = 0.55 + 0.25 * (2.0 * PI * (day_of_year - 172.0) / 365.0).cos();
    if rng.random_bool(p_clear) {
        (rng.random_range(0.85..1.0), false)
    } else {
        (rng.random_range(0.2..0.7), true)
    }
}

/// Daylight bell from solar geometry, seasonal amplitude through the sun's
/// elevation, random per-day cloud attenuation with intra-day flicker on
/// overcast days. Scaled to `capacity_factor` and capped at `capacity_kw`.
/// Axis hours are treated as solar time.
pub fn synthetic_pv_profile<R: Rng>(
    rng: &mut R,
    capacity_kw: f64,
    capacity_factor: f64,
    axis: &TimeAxis,
) -> EnergySeries {
    let latitude = SITE_LATITUDE_DEG * PI / 180.0;
    let step_h = axis.step_hours();
    let mut day = usize::MAX;
    let mut sky = (1.0, false);
    let mut values: Vec<f64> = (0..axis.count)
        .map(|t| {
            let doy = axis.timestamp(t).ordinal0() as f64;
            if axis.day_index(t) != day {
                day = axis.day_index(t);
                sky = clearness(rng, doy);
            }
            let hour = axis.hour_of_day(t) + step_h / 2.0;
            let elevation = sin_elevation(doy, hour, latitude);
            if elevation <= 0.0 {
                return 0.0;
            }
            let (k, overcast) = sky;
            let flicker = if overcast {
                rng.random_range(0.6..1.2)
            } else {
                1.0
            };
            elevation.powf(1.2) * k * flicker
        })
        .collect();

    let cap = capacity_kw * step_h;
    let target = capacity_kw * capacity_factor * axis.count as f64 * step_h;
    // rescale, clip at the inverter limit, repeat until the clipped energy is restored
    for _ in 0..8 {
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            break;
        }
        let scale = target / total;
        if (scale - 1.0).abs() < 1e-9 {
            break;
        }
        values.iter_mut().for_each(|v| *v = (*v * scale).min(cap));
    }
    EnergySeries::new(*axis, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn year() -> TimeAxis {
        TimeAxis::quarter_hourly(Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(), 365).unwrap()
    }

    #[test]
    fn zero_at_night_and_capped() {
        let axis = year();
        let s = synthetic_pv_profile(&mut ChaCha8Rng::seed_from_u64(5), 3.0, 0.14, &axis);
        for (t, &v) in s.values.iter().enumerate() {
            assert!(v <= 0.75 + 1e-12, "interval {t}: {v}");
            assert!(v >= 0.0);
            let h = axis.hour_of_day(t);
            if !(4.0..20.0).contains(&h) {
                assert_eq!(v, 0.0, "night production at {t}");
            }
        }
    }

    #[test]
    fn annual_energy_near_capacity_factor() {
        let s = synthetic_pv_profile(&mut ChaCha8Rng::seed_from_u64(5), 3.0, 0.14, &year());
        let expected = 3.0 * 8760.0 * 0.14;
        assert!((s.total() - expected).abs() <= 0.10 * expected, "{}", s.total());
    }

    #[test]
    fn summer_beats_winter() {
        let s = synthetic_pv_profile(&mut ChaCha8Rng::seed_from_u64(11), 3.0, 0.14, &year());
        let january: f64 = s.values[..31 * 96].iter().sum();
        let july: f64 = s.values[181 * 96..212 * 96].iter().sum();
        assert!(july > 2.0 * january, "july {july} january {january}");
    }
}
