use crate::error::{Error, Result};

const STATES: &[(&str, &str)] = &[
    ("01", "AL"),
    ("02", "AK"),
    ("04", "AZ"),
    ("05", "AR"),
    ("06", "CA"),
    ("08", "CO"),
    ("09", "CT"),
    ("10", "DE"),
    ("11", "DC"),
    ("12", "FL"),
    ("13", "GA"),
    ("15", "HI"),
    ("16", "ID"),
    ("17", "IL"),
    ("18", "IN"),
    ("19", "IA"),
    ("20", "KS"),
    ("21", "KY"),
    ("22", "LA"),
    ("23", "ME"),
    ("24", "MD"),
    ("25", "MA"),
    ("26", "MI"),
    ("27", "MN"),
    ("28", "MS"),
    ("29", "MO"),
    ("30", "MT"),
    ("31", "NE"),
    ("32", "NV"),
    ("33", "NH"),
    ("34", "NJ"),
    ("35", "NM"),
    ("36", "NY"),
    ("37", "NC"),
    ("38", "ND"),
    ("39", "OH"),
    ("40", "OK"),
    ("41", "OR"),
    ("42", "PA"),
    ("44", "RI"),
    ("45", "SC"),
    ("46", "SD"),
    ("47", "TN"),
    ("48", "TX"),
    ("49", "UT"),
    ("50", "VT"),
    ("51", "VA"),
    ("53", "WA"),
    ("54", "WV"),
    ("55", "WI"),
    ("56", "WY"),
    ("72", "PR"),
];

/// Normalizes a county code to the 5-digit zero-padded form.
///
/// Accepts bare codes ("1001", "01001") and census geography identifiers
/// ("0500000US01001").
pub fn normalize_fips(raw: &str) -> Result<String> {
    let trimmed = raw.trim();
    let digits = match trimmed.rfind("US") {
        Some(pos) => &trimmed[pos + 2..],
        None => trimmed,
    };
    if digits.is_empty() || digits.len() > 5 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::InvalidFips(raw.to_string()));
    }
    Ok(format!("{digits:0>5}"))
}

/// Two-letter postal abbreviation for the state encoded in a normalized fips.
pub fn state_for_fips(fips: &str) -> Option<&'static str> {
    let prefix = fips.get(..2)?;
    STATES
        .iter()
        .find(|(code, _)| *code == prefix)
        .map(|(_, abbr)| *abbr)
}

pub fn state_code(abbr: &str) -> Option<&'static str> {
    STATES
        .iter()
        .find(|(_, a)| a.eq_ignore_ascii_case(abbr))
        .map(|(code, _)| *code)
}

pub fn all_states() -> impl Iterator<Item = &'static str> {
    STATES.iter().map(|(_, abbr)| *abbr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_short_codes() {
        assert_eq!(normalize_fips("1001").unwrap(), "01001");
        assert_eq!(normalize_fips(" 48427 ").unwrap(), "48427");
        assert_eq!(normalize_fips("0500000US26163").unwrap(), "26163");
    }

    #[test]
    fn rejects_garbage() {
        assert!(normalize_fips("").is_err());
        assert!(normalize_fips("12a45").is_err());
        assert!(normalize_fips("123456").is_err());
    }

    #[test]
    fn state_lookup() {
        assert_eq!(state_for_fips("48427"), Some("TX"));
        assert_eq!(state_for_fips("02013"), Some("AK"));
        assert_eq!(state_for_fips("99001"), None);
        assert_eq!(state_code("wi"), Some("55"));
    }
}
