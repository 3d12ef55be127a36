use super::{GitHubRepoStatus, HttpResponse, ProbeError, Prober};

/// GitHub user and organization names: alphanumerics and single hyphens,
/// no leading or trailing hyphen, at most 39 characters.
pub fn valid_github_namespace(ns: &str) -> bool {
    !ns.is_empty()
        && ns.len() <= 39
        && !ns.starts_with('-')
        && !ns.ends_with('-')
        && !ns.contains("--")
        && ns.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

pub fn valid_github_image(image: &str) -> bool {
    !image.is_empty()
        && image.len() <= 100
        && image != "."
        && image != ".."
        && image
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

/// `(namespace, image)` of a github.com repository URL, in https, ssh or
/// scp form. `.git` is stripped from the image.
pub fn github_repo_from_url(url: &str) -> Option<(String, String)> {
    let path = if let Some(rest) = url.strip_prefix("git@github.com:") {
        rest
    } else {
        let (_, rest) = url.split_once("://")?;
        let (authority, path) = rest.split_once('/')?;
        let host = authority.rsplit('@').next()?.split(':').next()?;
        if !host.eq_ignore_ascii_case("github.com") && !host.eq_ignore_ascii_case("www.github.com") {
            return None;
        }
        path
    };
    let mut segs = path.split(['/', '?', '#']);
    let ns = segs.next()?;
    let image = segs.next()?;
    let image = image.strip_suffix(".git").unwrap_or(image);
    (valid_github_namespace(ns) && valid_github_image(image))
        .then(|| (ns.to_string(), image.to_string()))
}

fn rate_limit(resp: &HttpResponse, now_epoch: i64) -> Option<ProbeError> {
    if !matches!(resp.status, 403 | 429) {
        return None;
    }
    let exhausted = resp.header("x-ratelimit-remaining") == Some("0");
    let retry_after = resp.header("retry-after").and_then(|s| s.trim().parse::<i64>().ok());
    if !exhausted && retry_after.is_none() && resp.status != 429 {
        return None;
    }
    let reset_epoch = resp
        .header("x-ratelimit-reset")
        .and_then(|s| s.trim().parse::<i64>().ok())
        .or(retry_after.map(|s| now_epoch + s))
        .unwrap_or(now_epoch);
    Some(ProbeError::RateLimited { reset_epoch })
}

fn repo_summary(resp: &HttpResponse, url: &str) -> Result<(String, u64), ProbeError> {
    let v = resp
        .json()
        .ok_or_else(|| ProbeError::MalformedResponse(format!("{url}: body is not JSON")))?;
    let full_name = v
        .get("full_name")
        .and_then(|f| f.as_str())
        .ok_or_else(|| ProbeError::MalformedResponse(format!("{url}: missing full_name")))?;
    let stars = v
        .get("stargazers_count")
        .and_then(|s| s.as_u64())
        .ok_or_else(|| ProbeError::MalformedResponse(format!("{url}: missing stargazers_count")))?;
    Ok((full_name.to_string(), stars))
}

impl Prober {
    fn github_get(&self, url: &str) -> Result<HttpResponse, ProbeError> {
        let auth = self.github_token.as_ref().map(|t| format!("Bearer {t}"));
        let mut headers = vec![
            ("accept", "application/vnd.github+json"),
            ("x-github-api-version", "2022-11-28"),
        ];
        if let Some(auth) = auth.as_deref() {
            headers.push(("authorization", auth));
        }
        let resp = self.transport.http_get(url, &headers)?;
        match rate_limit(&resp, self.now().timestamp()) {
            Some(e) => Err(e),
            None => Ok(resp),
        }
    }

    pub(super) fn probe_github(&self, ns: &str, image: &str) -> Result<GitHubRepoStatus, ProbeError> {
        if !valid_github_namespace(ns) || !valid_github_image(image) {
            return Err(ProbeError::InvalidSubject(format!("{ns}/{image}")));
        }
        let api = self.endpoints.github_api.trim_end_matches('/');
        let repo_url = format!("{api}/repos/{ns}/{image}");
        let resp = self.github_get(&repo_url)?;
        match resp.status {
            200 => {
                let (full_name, stars) = repo_summary(&resp, &repo_url)?;
                if full_name.eq_ignore_ascii_case(&format!("{ns}/{image}")) {
                    Ok(GitHubRepoStatus::exists(ns, image, stars))
                } else {
                    Ok(GitHubRepoStatus::redirected(ns, image, &full_name, stars))
                }
            }
            301 | 302 | 307 | 308 => {
                let location = resp.header("location").ok_or_else(|| {
                    ProbeError::MalformedResponse(format!("{repo_url}: redirect without location"))
                })?;
                let target = self.github_get(location)?;
                if target.status != 200 {
                    return Err(ProbeError::UnexpectedStatus {
                        url: location.to_string(),
                        status: target.status,
                    });
                }
                let (full_name, stars) = repo_summary(&target, location)?;
                Ok(GitHubRepoStatus::redirected(ns, image, &full_name, stars))
            }
            404 => {
                let user_url = format!("{api}/users/{ns}");
                let user = self.github_get(&user_url)?;
                match user.status {
                    404 => Ok(GitHubRepoStatus::user_missing(ns, image)),
                    200 => Ok(GitHubRepoStatus::repo_missing(ns, image)),
                    status => Err(ProbeError::UnexpectedStatus { url: user_url, status }),
                }
            }
            status => Err(ProbeError::UnexpectedStatus { url: repo_url, status }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert!(valid_github_namespace("myuser"));
        assert!(valid_github_namespace("a-b"));
        assert!(!valid_github_namespace("-ab"));
        assert!(!valid_github_namespace("a--b"));
        assert!(!valid_github_namespace("a_b"));
        assert!(!valid_github_namespace(&"a".repeat(40)));
        assert!(valid_github_image("my.repo_name-2"));
        assert!(!valid_github_image(".."));
    }

    #[test]
    fn urls() {
        let want = Some(("erikdoe".to_string(), "ocmock".to_string()));
        assert_eq!(github_repo_from_url("https://github.com/erikdoe/ocmock.git"), want);
        assert_eq!(github_repo_from_url("git@github.com:erikdoe/ocmock.git"), want);
        assert_eq!(github_repo_from_url("ssh://git@github.com/erikdoe/ocmock"), want);
        assert_eq!(github_repo_from_url("https://GitHub.com/erikdoe/ocmock/tree/master"), want);
        assert_eq!(github_repo_from_url("https://gitlab.com/erikdoe/ocmock.git"), None);
        assert_eq!(github_repo_from_url("https://github.com/erikdoe"), None);
    }

    #[test]
    fn rate_limit_detection() {
        let r = HttpResponse::new(403, "")
            .with_header("x-ratelimit-remaining", "0")
            .with_header("x-ratelimit-reset", "1700000000");
        assert_eq!(rate_limit(&r, 5), Some(ProbeError::RateLimited { reset_epoch: 1_700_000_000 }));
        assert_eq!(rate_limit(&HttpResponse::new(403, ""), 5), None);
        let r = HttpResponse::new(429, "").with_header("retry-after", "60");
        assert_eq!(rate_limit(&r, 5), Some(ProbeError::RateLimited { reset_epoch: 65 }));
    }
}
