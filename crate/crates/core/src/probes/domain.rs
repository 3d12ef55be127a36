use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("not a domain: {0:?}")]
    NotADomain(String),
    #[error("{0:?} is a public suffix")]
    PublicSuffixOnly(String),
}

/// Lowercased registrable domain (public suffix plus one label) of a host
/// name or of the part of an email address after `@`.
pub fn registrable_domain(host_or_email: &str) -> Result<String, DomainError> {
    let input = host_or_email.trim();
    let host = match input.split_once('@') {
        Some((local, host)) if !local.is_empty() && !host.contains('@') => host,
        Some(_) => return Err(DomainError::NotADomain(input.to_string())),
        None => input,
    };
    let host = host.trim_end_matches('.').to_ascii_lowercase();

    let labels_ok = !host.is_empty()
        && host.split('.').all(|label| {
            !label.is_empty()
                && label.len() <= 63
                && !label.starts_with('-')
                && !label.ends_with('-')
                && label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
        });
    let is_ip = host.bytes().all(|b| b.is_ascii_digit() || b == b'.');
    if !labels_ok || is_ip || !host.contains('.') && psl::suffix_str(&host) != Some(host.as_str()) {
        return Err(DomainError::NotADomain(input.to_string()));
    }
    match psl::domain_str(&host) {
        Some(domain) => Ok(domain.to_string()),
        None => Err(DomainError::PublicSuffixOnly(host)),
    }
}

/// Host part of a URL (`scheme://[user@]host[:port]/...`), or of an
/// scp-style git address (`git@host:path`).
pub fn url_host(url: &str) -> Option<String> {
    let rest = match url.split_once("://") {
        Some((_, rest)) => rest,
        None if url.contains('@') && url.contains(':') => url,
        None => return None,
    };
    let authority = rest.split(['/', '?', '#']).next()?;
    let host_port = authority.rsplit_once('@').map_or(authority, |(_, h)| h);
    let host = host_port.split(':').next()?;
    (!host.is_empty()).then(|| host.to_ascii_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emails_and_hosts() {
        assert_eq!(registrable_domain("dev@mail.CORP.example.co.uk").unwrap(), "example.co.uk");
        assert_eq!(registrable_domain("github.com").unwrap(), "github.com");
        assert_eq!(registrable_domain("a.b.github.io").unwrap(), "b.github.io");
        assert_eq!(registrable_domain("git.abandoned-example.test.").unwrap(), "abandoned-example.test");
    }

    #[test]
    fn suffix_only() {
        assert_eq!(
            registrable_domain("co.uk"),
            Err(DomainError::PublicSuffixOnly("co.uk".into()))
        );
        assert!(matches!(registrable_domain("com"), Err(DomainError::PublicSuffixOnly(_))));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "@x.com", "a@b@c.com", "exa mple.com", "127.0.0.1", "-x.com", "x..com"] {
            assert!(matches!(registrable_domain(bad), Err(DomainError::NotADomain(_))), "{bad}");
        }
    }

    #[test]
    fn hosts_from_urls() {
        assert_eq!(url_host("https://github.com/a/b.git").as_deref(), Some("github.com"));
        assert_eq!(url_host("https://u:p@Git.Corp.test:8443/x").as_deref(), Some("git.corp.test"));
        assert_eq!(url_host("git@github.com:a/b.git").as_deref(), Some("github.com"));
        assert_eq!(url_host("../local"), None);
    }
}
