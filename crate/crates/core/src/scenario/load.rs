//! Synthetic residential consumption profiles.

use std::f64::consts::PI;

use chrono::{Datelike, Weekday};
use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use crate::model::{EnergySeries, TimeAxis};

/// Household archetype: annual consumption and the weights of the daily
/// shape components (relative to a unit base load).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadClass {
    pub annual_kwh: f64,
    pub morning: f64,
    pub daytime: f64,
    pub evening: f64,
    /// Relative amplitude of the winter consumption increase.
    pub winter_boost: f64,
}

impl LoadClass {
    pub fn draw<R: Rng>(rng: &mut R, min_kwh: f64, max_kwh: f64) -> Self {
        Self {
            annual_kwh: rng.random_range(min_kwh..=max_kwh),
            morning: rng.random_range(0.8..2.0),
            daytime: rng.random_range(0.3..1.5),
            evening: rng.random_range(1.5..3.5),
            winter_boost: rng.random_range(0.1..0.45),
        }
    }
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    // circular distance on the 24 h clock
    let d = (hour - centre).rem_euclid(24.0);
    let d = d.min(24.0 - d);
    (-(d * d) / (2.0 * width * width)).exp()
}

fn shape(class: &LoadClass, hour: f64, day_of_year: f64, weekend: bool) -> f64 {
    let (morning_at, daytime_scale) = if weekend { (9.0, 1.5) } else { (7.5, 1.0) };
    let night = if (0.5..5.5).contains(&hour) { 0.7 } else { 1.0 };
    let daily = night
        + class.morning * bump(hour, morning_at, 1.1)
        + class.daytime * daytime_scale * bump(hour, 13.0, 2.8)
        + class.evening * bump(hour, 19.8, 1.7);
    let seasonal = 1.0 + class.winter_boost * (2.0 * PI * (day_of_year - 15.0) / 365.0).cos();
    daily * seasonal
}

/// Base load with morning, midday and evening components, weekly and
/// seasonal modulation and multiplicative log-normal noise, scaled so that
/// a full year sums to `class.annual_kwh` (pro rata for shorter axes).
pub fn synthetic_load_profile<R: Rng>(
    rng: &mut R,
    class: &LoadClass,
    axis: &TimeAxis,
    noise: f64,
) -> EnergySeries {
    let noise = if noise > 0.0 {
        Some(LogNormal::new(-noise * noise / 2.0, noise).expect("finite sigma"))
    } else {
        None
    };
    let mut values: Vec<f64> = (0..axis.count)
        .map(|t| {
            let ts = axis.timestamp(t);
            let weekend = matches!(ts.weekday(), Weekday::Sat | Weekday::Sun);
            let hour = axis.hour_of_day(t) + axis.step_hours() / 2.0;
            let base = shape(class, hour, ts.ordinal0() as f64, weekend);
            match &noise {
                Some(d) => base * d.sample(rng),
                None => base,
            }
        })
        .collect();

    let target = class.annual_kwh * axis.count as f64 * axis.step_hours() / (365.0 * 24.0);
    let raw: f64 = values.iter().sum();
    if raw > 0.0 {
        let scale = target / raw;
        values.iter_mut().for_each(|v| *v *= scale);
    }
    EnergySeries::new(*axis, values)
}
