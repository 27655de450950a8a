//! Price strings to decimals, with currency detection from ISO codes and
//! symbols.

use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use rust_decimal::Decimal;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrice {
    pub amount: Decimal,
    /// ISO-4217 code, when one could be determined.
    pub currency: Option<String>,
    /// The currency came from a symbol shared by several currencies (`$`, `¥`).
    pub ambiguous: bool,
}

/// ISO codes recognized as whole tokens inside price strings.
const ISO_CODES: &[&str] = &[
    "USD", "EUR", "GBP", "CAD", "AUD", "NZD", "HKD", "SGD", "MYR", "PHP", "INR", "IDR", "VND",
    "THB", "JPY", "CNY", "KRW", "TWD", "CHF", "SEK", "NOK", "DKK", "PLN", "CZK", "HUF", "RON",
    "TRY", "RUB", "UAH", "BRL", "MXN", "ARS", "CLP", "COP", "PEN", "ZAR", "NGN", "KES", "EGP",
    "AED", "SAR", "ILS",
];

/// Symbol table, longest markers first so `US $` wins over `$`.
/// (marker, code, ambiguous)
const SYMBOLS: &[(&str, &str, bool)] = &[
    ("US $", "USD", false),
    ("AU $", "AUD", false),
    ("US$", "USD", false),
    ("AU$", "AUD", false),
    ("CA$", "CAD", false),
    ("C $", "CAD", false),
    ("HK$", "HKD", false),
    ("NZ$", "NZD", false),
    ("MX$", "MXN", false),
    ("NT$", "TWD", false),
    ("Rs.", "INR", false),
    ("A$", "AUD", false),
    ("C$", "CAD", false),
    ("S$", "SGD", false),
    ("R$", "BRL", false),
    ("RM", "MYR", false),
    ("Rp", "IDR", false),
    ("zł", "PLN", false),
    ("Kč", "CZK", false),
    ("₱", "PHP", false),
    ("₹", "INR", false),
    ("₫", "VND", false),
    ("₽", "RUB", false),
    ("₦", "NGN", false),
    ("₩", "KRW", false),
    ("฿", "THB", false),
    ("₺", "TRY", false),
    ("₴", "UAH", false),
    ("€", "EUR", false),
    ("£", "GBP", false),
    ("¥", "JPY", true),
    ("$", "USD", true),
];

/// Currencies whose usual decimal separator is a comma.
const COMMA_DECIMAL: &[&str] = &[
    "EUR", "BRL", "PLN", "IDR", "VND", "TRY", "RUB", "UAH", "CZK", "HUF", "RON", "SEK", "NOK",
    "DKK", "ARS", "CLP", "COP",
];

pub fn decimal_separator(currency: &str) -> Option<char> {
    if COMMA_DECIMAL.contains(&currency) {
        Some(',')
    } else if ISO_CODES.contains(&currency) {
        Some('.')
    } else {
        None
    }
}

pub fn is_currency_code(s: &str) -> bool {
    s.len() == 3 && s.bytes().all(|b| b.is_ascii_uppercase())
}

/// Trimmed, uppercased ISO-like code, or nothing.
pub fn normalize_currency(s: &str) -> Option<String> {
    let c = s.trim().to_ascii_uppercase();
    is_currency_code(&c).then_some(c)
}

static ISO_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[A-Z]{3}\b").unwrap());
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d(?:[\d.,'\u{a0}\u{202f} ]*\d)?").unwrap());

fn bounded(s: &str, start: usize, marker: &str) -> bool {
    let alpha_edge = |c: Option<char>| c.is_some_and(char::is_alphabetic);
    let first_alpha = marker.chars().next().is_some_and(char::is_alphabetic);
    let last_alpha = marker.chars().last().is_some_and(char::is_alphabetic);
    let before = s[..start].chars().last();
    let after = s[start + marker.len()..].chars().next();
    !(first_alpha && alpha_edge(before)) && !(last_alpha && alpha_edge(after))
}

/// Currency named in a price string: an ISO code token, else a symbol.
pub fn detect_currency(s: &str) -> Option<(String, bool)> {
    if let Some(m) = ISO_TOKEN
        .find_iter(s)
        .find(|m| ISO_CODES.contains(&m.as_str()))
    {
        return Some((m.as_str().to_string(), false));
    }
    for (marker, code, ambiguous) in SYMBOLS {
        let mut from = 0;
        while let Some(pos) = s[from..].find(marker) {
            let at = from + pos;
            if bounded(s, at, marker) {
                return Some((code.to_string(), *ambiguous));
            }
            from = at + marker.len();
        }
    }
    None
}

/// Reads the first number in `raw`. The decimal separator is the last of
/// `.`/`,` when both occur; with one kind, the currency's convention decides,
/// falling back to "three trailing digits means a thousands group".
pub fn parse_amount(raw: &str, currency: Option<&str>) -> Option<Decimal> {
    let m = NUMBER.find(raw)?;
    let digits: String = m
        .as_str()
        .chars()
        .filter(|c| !matches!(c, '\'' | '\u{a0}' | '\u{202f}' | ' '))
        .collect();
    let last_dot = digits.rfind('.');
    let last_comma = digits.rfind(',');
    let decimal_sep = match (last_dot, last_comma) {
        (Some(d), Some(c)) => Some(if d > c { '.' } else { ',' }),
        (None, None) => None,
        (Some(_), None) | (None, Some(_)) => {
            let sep = if last_dot.is_some() { '.' } else { ',' };
            let count = digits.matches(sep).count();
            if count > 1 {
                None
            } else if let Some(locale) = currency.and_then(decimal_separator) {
                (locale == sep).then_some(sep)
            } else {
                let tail = digits.len() - digits.rfind(sep)? - 1;
                (tail != 3).then_some(sep)
            }
        }
    };
    let normalized: String = digits
        .chars()
        .filter_map(|c| match c {
            '0'..='9' => Some(c),
            c if Some(c) == decimal_sep => Some('.'),
            _ => None,
        })
        .collect();
    let amount = Decimal::from_str(&normalized).ok()?;
    (amount >= Decimal::ZERO).then(|| amount.normalize())
}

/// Parses a display price such as `US $1,500.00` or `12,50 €`.
/// `currency_hint` is used for separator conventions and as the currency
/// when the string names none.
pub fn parse_price(raw: &str, currency_hint: Option<&str>) -> Option<ParsedPrice> {
    let detected = detect_currency(raw);
    let hint = currency_hint.and_then(normalize_currency);
    let for_locale = hint.clone().or_else(|| detected.as_ref().map(|(c, _)| c.clone()));
    let amount = parse_amount(raw, for_locale.as_deref())?;
    let (currency, ambiguous) = match (hint, detected) {
        (Some(h), _) => (Some(h), false),
        (None, Some((c, amb))) => (Some(c), amb),
        (None, None) => (None, false),
    };
    Some(ParsedPrice {
        amount,
        currency,
        ambiguous,
    })
}

/// Serde codec for `Option<Decimal>` as a decimal string or null. Goes
/// through `Option<String>` so it also works inside flattened structs.
pub mod decimal_str {
    use std::str::FromStr;

    use rust_decimal::Decimal;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Decimal>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&d.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Decimal>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| Decimal::from_str(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    #[test]
    fn us_dollar_listing() {
        let p = parse_price("US $1,500.00", None).unwrap();
        assert_eq!(p.amount, dec("1500"));
        assert_eq!(p.currency.as_deref(), Some("USD"));
        assert!(!p.ambiguous);
    }

    #[test]
    fn both_separator_orders() {
        assert_eq!(parse_amount("1,500.00", None), Some(dec("1500")));
        assert_eq!(parse_amount("1.500,00", None), Some(dec("1500")));
        assert_eq!(parse_amount("1.234.567,5", None), Some(dec("1234567.5")));
        assert_eq!(parse_amount("1 234,50", Some("EUR")), Some(dec("1234.5")));
    }

    #[test]
    fn single_separator_uses_locale_then_digits() {
        assert_eq!(parse_amount("1.500", Some("EUR")), Some(dec("1500")));
        assert_eq!(parse_amount("12,50", Some("EUR")), Some(dec("12.5")));
        assert_eq!(parse_amount("12.5", Some("USD")), Some(dec("12.5")));
        assert_eq!(parse_amount("1,500", Some("USD")), Some(dec("1500")));
        assert_eq!(parse_amount("1,500", None), Some(dec("1500")));
        assert_eq!(parse_amount("1,5", None), Some(dec("1.5")));
        assert_eq!(parse_amount("2.999", None), Some(dec("2999")));
        assert_eq!(parse_amount("1,000,000", None), Some(dec("1000000")));
    }

    #[test]
    fn symbols_and_codes() {
        assert_eq!(detect_currency("€ 12,50"), Some(("EUR".into(), false)));
        assert_eq!(detect_currency("12.50 GBP"), Some(("GBP".into(), false)));
        assert_eq!(detect_currency("$12"), Some(("USD".into(), true)));
        assert_eq!(detect_currency("HK$ 300"), Some(("HKD".into(), false)));
        assert_eq!(detect_currency("RM150"), Some(("MYR".into(), false)));
        assert_eq!(detect_currency("WARM 150"), None);
        assert_eq!(detect_currency("150 zł"), Some(("PLN".into(), false)));
        assert_eq!(detect_currency("no price"), None);
        let p = parse_price("R$ 1.200,00", None).unwrap();
        assert_eq!((p.amount, p.currency.as_deref()), (dec("1200"), Some("BRL")));
    }

    #[test]
    fn hint_wins_over_symbol() {
        let p = parse_price("$25", Some("cad")).unwrap();
        assert_eq!(p.currency.as_deref(), Some("CAD"));
        assert!(!p.ambiguous);
    }

    #[test]
    fn rejects_non_prices() {
        assert!(parse_price("call for price", None).is_none());
        assert!(parse_price("", None).is_none());
        assert_eq!(normalize_currency(" usd "), Some("USD".into()));
        assert_eq!(normalize_currency("US$"), None);
    }
}
