//! URL parsing and the normalization used to derive `url_id`.

use super::canonical::sha256;
use super::types::UrlId;

/// Returns the normalized form of an absolute URL, or `None` when it has no
/// scheme or host.
///
/// Scheme and host are lowercased and a default port is dropped; the path,
/// query and fragment are kept byte for byte.
pub fn normalize_url(raw: &str) -> Option<String> {
    let parsed = url::Url::parse(raw).ok()?;
    if parsed.cannot_be_a_base() || parsed.host_str().is_none_or(str::is_empty) {
        return None;
    }

    let (scheme, rest) = raw.split_once("://")?;
    let authority_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (authority, tail) = rest.split_at(authority_end);
    let (userinfo, hostport) = match authority.rfind('@') {
        Some(at) => (&authority[..=at], &authority[at + 1..]),
        None => ("", authority),
    };
    let scheme = scheme.to_ascii_lowercase();
    let (host, port) = split_port(hostport);
    let host = host.to_ascii_lowercase();
    if host.is_empty() {
        return None;
    }
    let keep_port = match (scheme.as_str(), port) {
        (_, None) => None,
        ("http", Some("80")) | ("https", Some("443")) | ("ftp", Some("21")) => None,
        (_, Some(p)) => Some(p),
    };

    let mut out = String::with_capacity(raw.len());
    out.push_str(&scheme);
    out.push_str("://");
    out.push_str(userinfo);
    out.push_str(&host);
    if let Some(p) = keep_port {
        out.push(':');
        out.push_str(p);
    }
    out.push_str(tail);
    Some(out)
}

fn split_port(hostport: &str) -> (&str, Option<&str>) {
    // bracketed IPv6 literal
    if hostport.starts_with('[') {
        if let Some(end) = hostport.find(']') {
            let port = hostport[end + 1..].strip_prefix(':');
            return (&hostport[..=end], port);
        }
        return (hostport, None);
    }
    match hostport.rsplit_once(':') {
        Some((h, p)) if p.chars().all(|c| c.is_ascii_digit()) => (h, if p.is_empty() { None } else { Some(p) }),
        _ => (hostport, None),
    }
}

/// `url_id` for a URL: hex SHA-256 of its normalized form.
pub fn url_id(raw: &str) -> Option<UrlId> {
    normalize_url(raw).map(|n| hex::encode(sha256(n.as_bytes()).0))
}
