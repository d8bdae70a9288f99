//! UTC calendar helpers over the proleptic Gregorian calendar.

use chrono::{DateTime, Datelike, Days, NaiveDate, NaiveTime};

pub const SECS_PER_HOUR: i64 = 3_600;
pub const SECS_PER_DAY: i64 = 86_400;

/// Calendar date (UTC) containing the instant `secs` since the Unix epoch.
pub fn date_of(secs: i64) -> NaiveDate {
    let days = secs.div_euclid(SECS_PER_DAY);
    NaiveDate::from_num_days_from_ce_opt(days_to_ce(days)).expect("epoch day within chrono range")
}

/// Epoch seconds of midnight UTC starting `date`.
pub fn midnight_of(date: NaiveDate) -> i64 {
    date.and_time(NaiveTime::MIN).and_utc().timestamp()
}

/// Hour of day in `0..24` for the instant `secs`.
pub fn hour_of(secs: i64) -> u32 {
    (secs.rem_euclid(SECS_PER_DAY) / SECS_PER_HOUR) as u32
}

/// ISO weekday, Monday = 1 through Sunday = 7.
pub fn iso_weekday(date: NaiveDate) -> u32 {
    date.weekday().number_from_monday()
}

/// The Monday starting the ISO week that contains `date`.
pub fn monday_of(date: NaiveDate) -> NaiveDate {
    date - Days::new(u64::from(iso_weekday(date) - 1))
}

pub fn is_weekend(date: NaiveDate) -> bool {
    iso_weekday(date) >= 6
}

/// Converts a UTC timestamp into an RFC 3339 string; used for labels only.
pub fn format_instant(secs: i64) -> alloc::string::String {
    use alloc::string::ToString;
    DateTime::from_timestamp(secs, 0)
        .map(|d| d.naive_utc().to_string())
        .unwrap_or_default()
}

fn days_to_ce(days_since_epoch: i64) -> i32 {
    // 1970-01-01 is day 719_163 counting 0001-01-01 as day 1.
    (days_since_epoch + 719_163) as i32
}
