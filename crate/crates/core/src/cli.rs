//! Command-line frontend.
//!
//! Exit codes: 0 no finding at or above `--fail-on`, 1 findings at or above
//! it, 2 usage or input error, 3 probe or transport failure.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::bundle::scan_bundle;
use crate::manifest::{parse_manifest, ManifestKind};
use crate::probes::{
    Availability, Clock, FixtureTransport, GitHubRepoStatus, HttpTransport, ManualClock, PodOwner,
    ProbeCache, ProbeError, ProbeRequest, ProbeResults, Prober, SystemClock, Transport, DEFAULT_TTL_DAYS,
};
use crate::report::{exit_code, render_json, render_text, Report, ReportInput};
use crate::risk::{probes_for_bundle, probes_for_manifest, probes_for_pod, RiskEngine, Severity};
use crate::specindex::{build_index_at, load_index, save_index, SpecIndex};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Transport(_) => EXIT_TRANSPORT,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn probe_error(e: ProbeError) -> CliError {
    match e {
        ProbeError::InvalidSubject(_) | ProbeError::Domain(_) => CliError::Usage(e.to_string()),
        other => CliError::Transport(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "depsentry", version, about = "Dependency confusion and hijacking auditor")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Probe cache file (JSON lines).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Days a cached probe result stays valid.
    #[arg(long, global = true, default_value_t = DEFAULT_TTL_DAYS)]
    cache_ttl_days: i64,
    /// Forbid all network access.
    #[arg(long, global = true)]
    offline: bool,
    /// Maximum probes in flight.
    #[arg(long, global = true, default_value_t = 8, value_parser = clap::value_parser!(u16).range(1..))]
    concurrency: u16,
    /// Lowest severity that makes the exit code 1.
    #[arg(long, global = true, default_value = "high")]
    fail_on: Severity,
    /// Per-request network timeout in seconds.
    #[arg(long, global = true, default_value_t = 20)]
    timeout: u64,
    /// Serve probes from a fixture file instead of the network.
    #[arg(long, global = true, hide = true)]
    transport_fixture: Option<PathBuf>,
    /// Fixed report timestamp (RFC 3339).
    #[arg(long, global = true, hide = true, value_parser = parse_time)]
    now: Option<DateTime<Utc>>,
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spec index operations.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Scan an app bundle or a manifest.
    #[command(subcommand)]
    Scan(ScanCommand),
    /// Probe a single subject.
    #[command(subcommand)]
    Check(CheckCommand),
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    /// Build an index from a Specs repository checkout.
    Build {
        specs_dir: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum ScanCommand {
    /// Scan an unpacked `.app` directory or an `.ipa` archive.
    App {
        bundle: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// Query registries for additional evidence.
        #[arg(long)]
        online: bool,
        /// Newline-delimited internal names to leave out of confusion checks.
        #[arg(long)]
        private_names: Option<PathBuf>,
    },
    /// Scan a Podfile, Podfile.lock, Cartfile.resolved, Package.resolved or go.mod.
    Manifest {
        file: PathBuf,
        /// Required for Podfile and Podfile.lock.
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        online: bool,
        /// Override detection: podfile, podfile_lock, cartfile_resolved, package_resolved, go_mod.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        private_names: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum CheckCommand {
    /// Registrability of a domain.
    Domain { domain: String },
    /// State of a GitHub repository, given as `namespace/image`.
    Github { repo: String },
    /// Availability of an npm package name.
    Npm { name: String },
    /// Trunk owners of a pod; with `--index`, evaluate takeover rules too.
    PodOwners {
        pod: String,
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_CLEAN
            };
        }
    };
    let mut session = Session {
        global: &cli.global,
        now: cli.global.now.unwrap_or_else(Utc::now),
        out,
        err,
    };
    match session.dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(session.err, "error: {e}");
            e.code()
        }
    }
}

struct Session<'a> {
    global: &'a GlobalArgs,
    now: DateTime<Utc>,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Session<'_> {
    fn dispatch(&mut self, command: &Command) -> Result<i32, CliError> {
        match command {
            Command::Index(IndexCommand::Build { specs_dir, output }) => self.index_build(specs_dir, output),
            Command::Scan(ScanCommand::App {
                bundle,
                index,
                online,
                private_names,
            }) => self.scan_app(bundle, index, *online, private_names.as_deref()),
            Command::Scan(ScanCommand::Manifest {
                file,
                index,
                online,
                kind,
                private_names,
            }) => self.scan_manifest(file, index.as_deref(), *online, kind.as_deref(), private_names.as_deref()),
            Command::Check(check) => self.check(check),
        }
    }

    fn note(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.err, "{msg}");
    }

    fn emit_bytes(&mut self, bytes: &[u8]) -> Result<(), CliError> {
        self.out
            .write_all(bytes)
            .map_err(|e| usage(format!("writing output: {e}")))
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        let value = serde_json::to_value(value).map_err(usage)?;
        let mut bytes = serde_json::to_vec_pretty(&value).map_err(usage)?;
        bytes.push(b'\n');
        self.emit_bytes(&bytes)
    }

    fn emit_report(&mut self, report: &Report) -> Result<i32, CliError> {
        match self.global.format {
            Format::Json => self.emit_bytes(&render_json(report))?,
            Format::Text => self.emit_bytes(render_text(report).as_bytes())?,
        }
        Ok(exit_code(&report.findings, self.global.fail_on))
    }

    fn prober(&mut self, purpose: &str) -> Result<Prober, CliError> {
        if self.global.offline {
            return Err(usage(format!("{purpose} needs network access, which --offline forbids")));
        }
        let transport: Arc<dyn Transport> = match &self.global.transport_fixture {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                Arc::new(FixtureTransport::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?)
            }
            None => Arc::new(
                HttpTransport::new(Duration::from_secs(self.global.timeout))
                    .map_err(|e| CliError::Transport(e.to_string()))?,
            ),
        };
        let clock: Arc<dyn Clock> = match self.global.now {
            Some(t) => Arc::new(ManualClock::new(t)),
            None => Arc::new(SystemClock),
        };
        let mut prober = Prober::new(transport)
            .with_clock(clock)
            .with_github_token(std::env::var("GITHUB_TOKEN").ok().filter(|t| !t.is_empty()));
        if let Some(path) = &self.global.cache {
            let ttl = chrono::Duration::days(self.global.cache_ttl_days);
            let cache = ProbeCache::open(path, ttl).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            prober = prober.with_cache(Arc::new(cache));
        }
        Ok(prober)
    }

    /// Runs every request; any failure aborts with exit code 3 after
    /// listing the failed subjects.
    fn probe_all(&mut self, prober: &Prober, requests: &[ProbeRequest]) -> Result<ProbeResults, CliError> {
        let (results, failed) = ProbeResults::from_bulk(prober.bulk(requests, self.global.concurrency.into()));
        for (req, e) in &failed {
            self.note(format!("probe {req} failed: {e}"));
        }
        if failed.is_empty() {
            Ok(results)
        } else {
            Err(CliError::Transport(format!("{} of {} probes failed", failed.len(), requests.len())))
        }
    }

    fn online_prober(&mut self, online: bool) -> Result<Option<Prober>, CliError> {
        match (online, self.global.offline) {
            (true, true) => Err(usage("--online conflicts with --offline")),
            (true, false) => self.prober("--online").map(Some),
            (false, _) => Ok(None),
        }
    }

    fn engine(&mut self, private_names: Option<&Path>) -> Result<RiskEngine, CliError> {
        let engine = RiskEngine::default();
        match private_names {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                Ok(engine.with_private_names_text(&text))
            }
            None => Ok(engine),
        }
    }

    fn index_build(&mut self, specs_dir: &Path, output: &Path) -> Result<i32, CliError> {
        let index = build_index_at(specs_dir, self.now).map_err(usage)?;
        save_index(&index, output).map_err(usage)?;
        let summary = IndexSummary {
            output: output.display().to_string(),
            pods: index.pods.len(),
            versions: index.version_count(),
            skipped_podspecs: index.skipped_podspecs,
            source_tree_digest: index.source_tree_digest.clone(),
        };
        match self.global.format {
            Format::Json => self.emit_json(&summary)?,
            Format::Text => {
                let line = format!(
                    "indexed {} pods ({} versions, {} podspecs skipped) into {}\n",
                    summary.pods, summary.versions, summary.skipped_podspecs, summary.output
                );
                self.emit_bytes(line.as_bytes())?;
            }
        }
        Ok(EXIT_CLEAN)
    }

    fn load_index(&mut self, path: &Path) -> Result<SpecIndex, CliError> {
        load_index(path).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    fn scan_app(
        &mut self,
        bundle: &Path,
        index_path: &Path,
        online: bool,
        private_names: Option<&Path>,
    ) -> Result<i32, CliError> {
        let index = self.load_index(index_path)?;
        let engine = self.engine(private_names)?;
        let prober = self.online_prober(online)?;

        let unpacked;
        let dir = if bundle.is_file() {
            unpacked = unpack_ipa(bundle)?;
            app_root(unpacked.path())
        } else if bundle.is_dir() {
            bundle.to_path_buf()
        } else {
            return Err(usage(format!("{}: no such bundle", bundle.display())));
        };
        let scan = scan_bundle(&dir).map_err(usage)?;
        for w in &scan.scan_warnings {
            self.note(format!("warning: {w}"));
        }

        let probes = match &prober {
            Some(p) => {
                let reqs: Vec<ProbeRequest> = probes_for_bundle(&scan, &index)
                    .into_iter()
                    .filter(|r| !is_private_request(&engine, r))
                    .collect();
                Some(self.probe_all(p, &reqs)?)
            }
            None => {
                if !scan.npm_names.is_empty() {
                    self.note("note: npm names are only checked with --online");
                }
                None
            }
        };
        let findings = engine.evaluate_bundle(&scan, &index, probes.as_ref());
        let inputs = vec![
            ReportInput::new("app", bundle.display().to_string()),
            ReportInput::new("index", index_path.display().to_string()),
        ];
        self.emit_report(&Report::new(inputs, findings, self.now))
    }

    fn scan_manifest(
        &mut self,
        file: &Path,
        index_path: Option<&Path>,
        online: bool,
        kind: Option<&str>,
        private_names: Option<&Path>,
    ) -> Result<i32, CliError> {
        let kind = match kind {
            Some(k) => ManifestKind::from_name(k).ok_or_else(|| usage(format!("unknown manifest kind {k:?}")))?,
            None => ManifestKind::detect(file).ok_or_else(|| {
                usage(format!("cannot tell the manifest kind of {}; pass --kind", file.display()))
            })?,
        };
        let text = std::fs::read_to_string(file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
        let manifest = parse_manifest(kind, &text).map_err(|e| usage(format!("{}: {e}", file.display())))?;
        for w in &manifest.parse_warnings {
            self.note(format!("warning: {}: {w}", file.display()));
        }

        let index = match (index_path, kind) {
            (Some(p), _) => self.load_index(p)?,
            (None, ManifestKind::Podfile | ManifestKind::PodfileLock) => {
                return Err(usage(format!("--index is required for {}", kind.as_str())))
            }
            (None, _) => SpecIndex::from_records(Vec::new(), self.now, String::new()),
        };
        let engine = self.engine(private_names)?;
        let prober = self.online_prober(online)?;
        match (kind, &prober) {
            (ManifestKind::GoMod, None) => self.note("note: go.mod takeover checks only run with --online"),
            (ManifestKind::CartfileResolved | ManifestKind::PackageResolved, _) => self.note(format!(
                "note: parsed {} entries; no rule evaluates {} manifests",
                manifest.entries.len(),
                kind.as_str()
            )),
            _ => {}
        }

        let probes = match &prober {
            Some(p) => {
                let reqs: Vec<ProbeRequest> = probes_for_manifest(&manifest, &index)
                    .map_err(usage)?
                    .into_iter()
                    .filter(|r| !is_private_request(&engine, r))
                    .collect();
                Some(self.probe_all(p, &reqs)?)
            }
            None => None,
        };
        let findings = engine
            .evaluate_manifest(&manifest, &index, probes.as_ref())
            .map_err(usage)?;
        let mut inputs = vec![ReportInput::new(kind.as_str(), file.display().to_string())];
        if let Some(p) = index_path {
            inputs.push(ReportInput::new("index", p.display().to_string()));
        }
        self.emit_report(&Report::new(inputs, findings, self.now))
    }

    fn check(&mut self, check: &CheckCommand) -> Result<i32, CliError> {
        let prober = self.prober("check")?;
        match check {
            CheckCommand::Domain { domain } => {
                let a = prober.check_domain(domain).map_err(probe_error)?;
                self.emit_availability(&a)?;
            }
            CheckCommand::Npm { name } => {
                let a = prober.check_npm_name(name).map_err(probe_error)?;
                self.emit_availability(&a)?;
            }
            CheckCommand::Github { repo } => {
                let (ns, image) = repo
                    .split_once('/')
                    .filter(|(ns, image)| !ns.is_empty() && !image.is_empty() && !image.contains('/'))
                    .ok_or_else(|| usage(format!("expected namespace/image, got {repo:?}")))?;
                let status = prober.check_github_repo(ns, image).map_err(probe_error)?;
                self.emit_github(&status)?;
            }
            CheckCommand::PodOwners { pod, index } => {
                let owners = prober.fetch_pod_owners(pod).map_err(probe_error)?;
                match index {
                    Some(path) => return self.pod_hijack(&prober, pod, &owners, path),
                    None => self.emit_owners(pod, &owners)?,
                }
            }
        }
        Ok(EXIT_CLEAN)
    }

    fn pod_hijack(&mut self, prober: &Prober, pod: &str, owners: &[PodOwner], index_path: &Path) -> Result<i32, CliError> {
        let index = self.load_index(index_path)?;
        let record = index
            .pod(pod)
            .ok_or_else(|| usage(format!("pod {pod} is not in {}", index_path.display())))?;
        let probes = self.probe_all(prober, &probes_for_pod(record, owners))?;
        let findings = RiskEngine::default()
            .evaluate_pod_hijack(record, owners, &probes)
            .map_err(|e| CliError::Transport(e.to_string()))?;
        let inputs = vec![
            ReportInput::new("pod", pod),
            ReportInput::new("index", index_path.display().to_string()),
        ];
        self.emit_report(&Report::new(inputs, findings, self.now))
    }

    fn emit_availability(&mut self, a: &Availability) -> Result<(), CliError> {
        match self.global.format {
            Format::Json => self.emit_json(a),
            Format::Text => {
                let state = serde_json::to_value(a.state()).map_err(usage)?;
                let mut text = format!("{}: {}\n", a.subject(), state.as_str().unwrap_or_default());
                for e in a.evidence() {
                    text.push_str(&format!("  {}: {}\n", e.probe, e.observation));
                }
                self.emit_bytes(text.as_bytes())
            }
        }
    }

    fn emit_github(&mut self, s: &GitHubRepoStatus) -> Result<(), CliError> {
        match self.global.format {
            Format::Json => self.emit_json(s),
            Format::Text => {
                let state = serde_json::to_value(s.state).map_err(usage)?;
                let mut line = format!("{}/{}: {}", s.namespace, s.image_name, state.as_str().unwrap_or_default());
                if let Some(t) = &s.redirect_target {
                    line.push_str(&format!(" -> {t}"));
                }
                if let Some(n) = s.stars {
                    line.push_str(&format!(" ({n} stars)"));
                }
                line.push('\n');
                self.emit_bytes(line.as_bytes())
            }
        }
    }

    fn emit_owners(&mut self, pod: &str, owners: &[PodOwner]) -> Result<(), CliError> {
        match self.global.format {
            Format::Json => self.emit_json(&owners),
            Format::Text => {
                let mut text = format!("{pod}: {} owners\n", owners.len());
                for o in owners {
                    text.push_str(&format!("  {} <{}> ({})\n", o.owner_name, o.email, o.email_domain));
                }
                self.emit_bytes(text.as_bytes())
            }
        }
    }
}

#[derive(Serialize)]
struct IndexSummary {
    output: String,
    pods: usize,
    versions: usize,
    skipped_podspecs: usize,
    source_tree_digest: String,
}

/// Internal names must not leak to public registries as probe subjects.
fn is_private_request(engine: &RiskEngine, req: &ProbeRequest) -> bool {
    match req {
        ProbeRequest::PodName(n) | ProbeRequest::Npm(n) => engine.is_private(n),
        _ => false,
    }
}

fn unpack_ipa(path: &Path) -> Result<tempfile::TempDir, CliError> {
    let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut archive =
        zip::ZipArchive::new(file).map_err(|e| usage(format!("{}: not an .ipa archive: {e}", path.display())))?;
    let dir = tempfile::tempdir().map_err(|e| usage(format!("temporary directory: {e}")))?;
    archive
        .extract(dir.path())
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(dir)
}

/// `Payload/<Name>.app` inside an unpacked archive, or the archive root.
fn app_root(unpacked: &Path) -> PathBuf {
    let payload = unpacked.join("Payload");
    std::fs::read_dir(&payload)
        .ok()
        .and_then(|entries| {
            let mut apps: Vec<PathBuf> = entries
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.is_dir() && p.extension().is_some_and(|x| x == "app"))
                .collect();
            apps.sort();
            apps.into_iter().next()
        })
        .unwrap_or_else(|| unpacked.to_path_buf())
}
