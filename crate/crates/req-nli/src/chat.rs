//! Chatbot baseline: render a fixed prompt per sample, send it to an
//! OpenAI-style completion endpoint, and parse a yes/no verdict. Raw
//! responses are cached on disk before any parsing so runs can resume
//! without re-asking, and requests are paced and retried politely.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Classification prompt; slots are `{CLASS_NAME}`, `{CLASS_DESCRIPTION}`,
/// and `{REQUIREMENT}`.
pub const CLASSIFY_TEMPLATE: &str = "Given the following definition of {CLASS_NAME} software requirement class:\n{CLASS_NAME}: {CLASS_DESCRIPTION}\nidentify if the following requirement belong to class {CLASS_NAME} with Yes or No.\n-Requirement: {REQUIREMENT}";

/// Pairwise conflict prompt; slots are `{REQUIREMENT_A}` and
/// `{REQUIREMENT_B}`.
pub const CONFLICT_TEMPLATE: &str = "Given the following two software requirements:\n-Requirement A: {REQUIREMENT_A}\n-Requirement B: {REQUIREMENT_B}\nidentify if the two requirements conflict with each other with Yes or No.";

/// A prompt template with named slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    /// Accepts any text with a `{REQUIREMENT}` slot or both pairwise slots.
    pub fn new(text: impl Into<String>) -> Result<PromptTemplate> {
        let text = text.into();
        let single = text.contains("{REQUIREMENT}");
        let pairwise = text.contains("{REQUIREMENT_A}") && text.contains("{REQUIREMENT_B}");
        if !single && !pairwise {
            return Err(Error::Config(
                "template needs a {REQUIREMENT} slot or both {REQUIREMENT_A} and {REQUIREMENT_B}"
                    .into(),
            ));
        }
        Ok(PromptTemplate { text })
    }

    pub fn classification() -> PromptTemplate {
        PromptTemplate {
            text: CLASSIFY_TEMPLATE.to_string(),
        }
    }

    pub fn conflict() -> PromptTemplate {
        PromptTemplate {
            text: CONFLICT_TEMPLATE.to_string(),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// First 16 hex chars of the template digest; names the cache bucket so
    /// editing the template invalidates cached responses.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.text.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn render_classification(
        &self,
        class_name: &str,
        class_description: &str,
        requirement: &str,
    ) -> Result<String> {
        for (value, what) in [
            (class_name, "class name"),
            (class_description, "class description"),
            (requirement, "requirement"),
        ] {
            if value.trim().is_empty() {
                return Err(Error::InvalidArgument(format!("empty {what}")));
            }
        }
        let rendered = self
            .text
            .replace("{CLASS_NAME}", class_name)
            .replace("{CLASS_DESCRIPTION}", class_description)
            .replace("{REQUIREMENT}", requirement);
        verify_filled(&rendered)?;
        Ok(rendered)
    }

    pub fn render_conflict(&self, requirement_a: &str, requirement_b: &str) -> Result<String> {
        if requirement_a.trim().is_empty() || requirement_b.trim().is_empty() {
            return Err(Error::InvalidArgument("empty requirement".into()));
        }
        let rendered = self
            .text
            .replace("{REQUIREMENT_A}", requirement_a)
            .replace("{REQUIREMENT_B}", requirement_b);
        verify_filled(&rendered)?;
        Ok(rendered)
    }
}

const SLOTS: [&str; 4] = [
    "{CLASS_NAME}",
    "{CLASS_DESCRIPTION}",
    "{REQUIREMENT}",
    "{REQUIREMENT_A}",
];

fn verify_filled(rendered: &str) -> Result<()> {
    for slot in SLOTS.iter().chain(&["{REQUIREMENT_B}"]) {
        if rendered.contains(slot) {
            return Err(Error::Config(format!("unfilled template slot {slot}")));
        }
    }
    Ok(())
}

/// Parsed answer; total over all strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    Unparseable,
}

/// First alphabetic token decides; otherwise an unambiguous yes/no token
/// anywhere in the response does; otherwise the response is unparseable.
pub fn parse_verdict(response: &str) -> Verdict {
    let tokens: Vec<String> = response
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect();
    match tokens.first().map(String::as_str) {
        Some("yes") => return Verdict::Yes,
        Some("no") => return Verdict::No,
        _ => {}
    }
    let has_yes = tokens.iter().any(|t| t == "yes");
    let has_no = tokens.iter().any(|t| t == "no");
    match (has_yes, has_no) {
        (true, false) => Verdict::Yes,
        (false, true) => Verdict::No,
        _ => Verdict::Unparseable,
    }
}

/// One answered sample: the verbatim model output plus its parsed verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatVerdict {
    pub sample_id: String,
    pub raw_response: String,
    pub verdict: Verdict,
}

/// A batch's verdicts in input order plus a manifest of failed samples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BatchOutcome {
    pub verdicts: Vec<ChatVerdict>,
    /// `(sample id, error)` for samples whose fetch failed after retries;
    /// such samples appear in `verdicts` as unparseable with empty output.
    pub failures: Vec<(String, String)>,
}

/// Answer every `(sample id, prompt)` job, order-preserving and resumable:
/// cached samples cost no request, and a failed sample is marked
/// unparseable and recorded rather than aborting the batch.
pub fn run_batch(
    client: &mut ChatClient,
    template_hash: &str,
    jobs: &[(String, String)],
) -> BatchOutcome {
    let mut outcome = BatchOutcome::default();
    for (sample_id, prompt) in jobs {
        match client.complete(template_hash, sample_id, prompt) {
            Ok(raw) => outcome.verdicts.push(ChatVerdict {
                sample_id: sample_id.clone(),
                verdict: parse_verdict(&raw),
                raw_response: raw,
            }),
            Err(e) => {
                log::warn!("sample {sample_id:?} failed: {e}");
                outcome.verdicts.push(ChatVerdict {
                    sample_id: sample_id.clone(),
                    raw_response: String::new(),
                    verdict: Verdict::Unparseable,
                });
                outcome.failures.push((sample_id.clone(), e.to_string()));
            }
        }
    }
    outcome
}

/// Connection settings; read from `CHAT_API_KEY`, `CHAT_API_BASE`, and
/// `CHAT_MODEL`.
#[derive(Debug, Clone)]
pub struct ChatSettings {
    pub api_base: String,
    pub api_key: String,
    pub model: String,
    /// Minimum gap between consecutive network requests.
    pub pacing: Duration,
    /// Extra attempts after the first on retryable failures.
    pub max_retries: u32,
    /// Base delay for exponential backoff between attempts.
    pub backoff: Duration,
    pub timeout: Duration,
}

pub const API_KEY_VAR: &str = "CHAT_API_KEY";
pub const API_BASE_VAR: &str = "CHAT_API_BASE";
pub const MODEL_VAR: &str = "CHAT_MODEL";

impl ChatSettings {
    /// The key is required; base and model have conventional defaults.
    pub fn from_env() -> Result<ChatSettings> {
        let api_key = std::env::var(API_KEY_VAR)
            .map_err(|_| Error::External(format!("{API_KEY_VAR} is not set")))?;
        let api_base =
            std::env::var(API_BASE_VAR).unwrap_or_else(|_| "https://api.openai.com/v1".into());
        let model = std::env::var(MODEL_VAR).unwrap_or_else(|_| "gpt-4".into());
        Ok(ChatSettings {
            api_base,
            api_key,
            model,
            pacing: Duration::from_secs(1),
            max_retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
        })
    }
}

/// Completion client with an on-disk response cache.
pub struct ChatClient {
    settings: ChatSettings,
    cache_dir: PathBuf,
    agent: ureq::Agent,
    last_request: Option<Instant>,
    requests_sent: usize,
}

impl ChatClient {
    pub fn new(settings: ChatSettings, cache_dir: impl Into<PathBuf>) -> ChatClient {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(settings.timeout))
            .build();
        ChatClient {
            settings,
            cache_dir: cache_dir.into(),
            agent: config.into(),
            last_request: None,
            requests_sent: 0,
        }
    }

    /// Network requests sent so far (cache hits send none; each retry
    /// attempt counts).
    pub fn requests_sent(&self) -> usize {
        self.requests_sent
    }

    fn cache_path(&self, template_hash: &str, sample_id: &str) -> PathBuf {
        let safe: String = sample_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                    c
                } else {
                    '-'
                }
            })
            .collect();
        let name = if safe == sample_id {
            format!("{safe}.txt")
        } else {
            let digest = Sha256::digest(sample_id.as_bytes());
            format!("{safe}-{:02x}{:02x}{:02x}{:02x}.txt", digest[0], digest[1], digest[2], digest[3])
        };
        self.cache_dir.join(template_hash).join(name)
    }

    /// Return the cached raw response for a sample, if any.
    pub fn cached(&self, template_hash: &str, sample_id: &str) -> Option<String> {
        std::fs::read_to_string(self.cache_path(template_hash, sample_id)).ok()
    }

    /// Fetch the completion for one sample, preferring the cache. A fresh
    /// response is written to the cache before it is returned, so nothing
    /// downstream (verdict parsing included) can lose it.
    pub fn complete(
        &mut self,
        template_hash: &str,
        sample_id: &str,
        prompt: &str,
    ) -> Result<String> {
        if let Some(cached) = self.cached(template_hash, sample_id) {
            return Ok(cached);
        }
        let content = self.fetch(prompt)?;
        let path = self.cache_path(template_hash, sample_id);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &content)?;
        Ok(content)
    }

    fn fetch(&mut self, prompt: &str) -> Result<String> {
        let url = format!("{}/chat/completions", self.settings.api_base.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": self.settings.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        })
        .to_string();

        let mut last_error = String::new();
        for attempt in 0..=self.settings.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.settings.backoff * 2u32.pow(attempt - 1));
            }
            if let Some(t) = self.last_request {
                let elapsed = t.elapsed();
                if elapsed < self.settings.pacing {
                    std::thread::sleep(self.settings.pacing - elapsed);
                }
            }
            self.last_request = Some(Instant::now());
            self.requests_sent += 1;

            let sent = self
                .agent
                .post(&url)
                .header("Authorization", &format!("Bearer {}", self.settings.api_key))
                .header("Content-Type", "application/json")
                .send(body.as_str());
            let mut response = match sent {
                Ok(r) => r,
                Err(e) => {
                    last_error = format!("transport: {e}");
                    continue;
                }
            };
            let status = response.status().as_u16();
            let text = response
                .body_mut()
                .read_to_string()
                .map_err(|e| Error::External(format!("reading response body: {e}")))?;
            if status == 429 || status >= 500 {
                last_error = format!("status {status}: {}", snippet(&text));
                continue;
            }
            if status != 200 {
                return Err(Error::External(format!(
                    "endpoint returned status {status}: {}",
                    snippet(&text)
                )));
            }
            return extract_content(&text);
        }
        Err(Error::External(format!(
            "giving up after {} attempt(s); last failure: {last_error}",
            self.settings.max_retries + 1
        )))
    }
}

fn extract_content(body: &str) -> Result<String> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| Error::External(format!("malformed response JSON: {e}")))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| {
            Error::External(format!(
                "response lacks choices[0].message.content: {}",
                snippet(body)
            ))
        })
}

fn snippet(text: &str) -> String {
    let trimmed = text.trim();
    if trimmed.len() <= 160 {
        trimmed.to_string()
    } else {
        format!("{}...", &trimmed[..160])
    }
}

/// Stable per-sample cache key for a classification sample.
pub fn classification_sample_id(req_id: &str, category: &str) -> String {
    format!("{req_id}__{category}")
}

/// Stable per-sample cache key for a conflict pair.
pub fn conflict_sample_id(project: &str, id_a: &str, id_b: &str) -> String {
    format!("{project}__{id_a}__{id_b}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn templates_render_and_reject_unfilled_slots() {
        let t = PromptTemplate::classification();
        let rendered = t
            .render_classification(
                "Security",
                "Describes protection against unauthorized access.",
                "The system shall encrypt all stored data.",
            )
            .unwrap();
        assert!(rendered.starts_with(
            "Given the following definition of Security software requirement class:\nSecurity: Describes protection"
        ));
        assert!(rendered.ends_with("-Requirement: The system shall encrypt all stored data."));
        assert!(rendered.contains("with Yes or No."));
        // classification render leaves pairwise slots alone and vice versa
        assert!(matches!(
            PromptTemplate::conflict().render_classification("a", "b", "c"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            t.render_conflict("a", "b"),
            Err(Error::Config(_))
        ));
        let pairwise = PromptTemplate::conflict()
            .render_conflict("The valve shall open.", "The valve shall never open.")
            .unwrap();
        assert!(pairwise.contains("-Requirement A: The valve shall open."));
        assert!(matches!(
            PromptTemplate::new("no slots here"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn template_hash_is_stable_and_content_sensitive() {
        let a = PromptTemplate::classification().content_hash();
        let b = PromptTemplate::classification().content_hash();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        let c = PromptTemplate::new("changed {REQUIREMENT}").unwrap().content_hash();
        assert_ne!(a, c);
    }

    #[test]
    fn verdict_parser_contract() {
        assert_eq!(parse_verdict("Yes"), Verdict::Yes);
        assert_eq!(parse_verdict("no"), Verdict::No);
        // the published response shapes
        assert_eq!(parse_verdict("- Yes"), Verdict::Yes);
        assert_eq!(parse_verdict("-No"), Verdict::No);
        assert_eq!(parse_verdict("Yes, it belongs to this class."), Verdict::Yes);
        assert_eq!(parse_verdict("No. The requirement is functional."), Verdict::No);
        // first-token rule beats later mentions
        assert_eq!(parse_verdict("No, although one could say yes."), Verdict::No);
        // fallback scan when the answer is buried
        assert_eq!(parse_verdict("The answer is yes."), Verdict::Yes);
        assert_eq!(parse_verdict("I would say no here."), Verdict::No);
        // ambiguities and non-answers are unparseable
        assert_eq!(parse_verdict("maybe yes, maybe no"), Verdict::Unparseable);
        assert_eq!(parse_verdict("It depends."), Verdict::Unparseable);
        assert_eq!(parse_verdict(""), Verdict::Unparseable);
        // "no" inside a word does not count
        assert_eq!(parse_verdict("I do not know."), Verdict::Unparseable);
    }

    #[test]
    fn batches_preserve_order_and_record_failures() {
        // server answers one sample, then the client gives up on the next
        // (connection refused after the listener is dropped)
        let (base, server) = mock_server(vec![(200, ok_body("Yes."))]);
        let dir = tempfile::tempdir().unwrap();
        let mut client = ChatClient::new(fast_settings(&base), dir.path());
        let jobs = vec![
            ("a".to_string(), "p1".to_string()),
            ("b".to_string(), "p2".to_string()),
        ];
        let outcome = run_batch(&mut client, "t", &jobs);
        server.join().unwrap();
        assert_eq!(outcome.verdicts.len(), 2);
        assert_eq!(outcome.verdicts[0].sample_id, "a");
        assert_eq!(outcome.verdicts[0].verdict, Verdict::Yes);
        assert_eq!(outcome.verdicts[1].verdict, Verdict::Unparseable);
        assert_eq!(outcome.failures.len(), 1);
        assert_eq!(outcome.failures[0].0, "b");
    }

    /// Minimal one-shot HTTP server: answers `responses` in order, records
    /// each request body.
    fn mock_server(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 1024];
                let request = loop {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                    if let Some(pos) = find_blank_line(&buf) {
                        let header = String::from_utf8_lossy(&buf[..pos]).to_string();
                        let need: usize = header
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                            .unwrap_or(0);
                        while buf.len() < pos + 4 + need {
                            let n = stream.read(&mut chunk).unwrap();
                            buf.extend_from_slice(&chunk[..n]);
                        }
                        break String::from_utf8_lossy(&buf[pos + 4..pos + 4 + need]).to_string();
                    }
                };
                bodies.push(request);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
            bodies
        });
        (format!("http://{addr}"), handle)
    }

    fn find_blank_line(buf: &[u8]) -> Option<usize> {
        buf.windows(4).position(|w| w == b"\r\n\r\n")
    }

    fn ok_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    fn fast_settings(base: &str) -> ChatSettings {
        ChatSettings {
            api_base: base.to_string(),
            api_key: "test-key".into(),
            model: "test-model".into(),
            pacing: Duration::from_millis(30),
            max_retries: 2,
            backoff: Duration::from_millis(5),
            timeout: Duration::from_secs(5),
        }
    }

    #[test]
    fn completes_and_caches_before_returning() {
        let (base, server) = mock_server(vec![(200, ok_body("Yes, it is."))]);
        let dir = tempfile::tempdir().unwrap();
        let mut client = ChatClient::new(fast_settings(&base), dir.path());
        let hash = PromptTemplate::classification().content_hash();
        let answer = client.complete(&hash, "r1__Security", "prompt text").unwrap();
        assert_eq!(answer, "Yes, it is.");
        assert_eq!(client.requests_sent(), 1);
        // raw response persisted on disk
        let cached = client.cached(&hash, "r1__Security").unwrap();
        assert_eq!(cached, "Yes, it is.");
        // second ask is a cache hit, no new request
        let again = client.complete(&hash, "r1__Security", "prompt text").unwrap();
        assert_eq!(again, "Yes, it is.");
        assert_eq!(client.requests_sent(), 1);
        let bodies = server.join().unwrap();
        assert_eq!(bodies.len(), 1);
        let sent: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["temperature"], 0);
        assert_eq!(sent["messages"][0]["content"], "prompt text");
    }

    #[test]
    fn resume_fetches_only_uncached_samples_in_order() {
        let (base, server) = mock_server(vec![(200, ok_body("No."))]);
        let dir = tempfile::tempdir().unwrap();
        let hash = PromptTemplate::classification().content_hash();
        // pre-seed two of three samples as if an earlier run fetched them
        std::fs::create_dir_all(dir.path().join(&hash)).unwrap();
        std::fs::write(dir.path().join(&hash).join("s1.txt"), "Yes.").unwrap();
        std::fs::write(dir.path().join(&hash).join("s3.txt"), "Yes.").unwrap();
        let mut client = ChatClient::new(fast_settings(&base), dir.path());
        let mut answers = Vec::new();
        for id in ["s1", "s2", "s3"] {
            answers.push(client.complete(&hash, id, &format!("prompt {id}")).unwrap());
        }
        assert_eq!(answers, vec!["Yes.", "No.", "Yes."]);
        assert_eq!(client.requests_sent(), 1);
        let bodies = server.join().unwrap();
        assert!(bodies[0].contains("prompt s2"));
    }

    #[test]
    fn retries_on_server_errors_and_paces_requests() {
        let (base, server) = mock_server(vec![
            (500, "oops".into()),
            (200, ok_body("Yes.")),
            (200, ok_body("No.")),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let mut settings = fast_settings(&base);
        settings.pacing = Duration::from_millis(40);
        let mut client = ChatClient::new(settings, dir.path());
        let hash = "t".to_string();
        let start = Instant::now();
        let first = client.complete(&hash, "a", "p1").unwrap();
        let second = client.complete(&hash, "b", "p2").unwrap();
        let elapsed = start.elapsed();
        assert_eq!((first.as_str(), second.as_str()), ("Yes.", "No."));
        // three requests: failed, retried, then the second sample
        assert_eq!(client.requests_sent(), 3);
        // pacing enforces a gap before each of the 2nd and 3rd requests
        assert!(elapsed >= Duration::from_millis(80), "elapsed {elapsed:?}");
        server.join().unwrap();
    }

    #[test]
    fn non_retryable_status_fails_fast() {
        let (base, server) = mock_server(vec![(401, "denied".into())]);
        let dir = tempfile::tempdir().unwrap();
        let mut client = ChatClient::new(fast_settings(&base), dir.path());
        let err = client.complete("t", "a", "p").unwrap_err();
        assert!(matches!(err, Error::External(_)));
        assert!(err.to_string().contains("401"));
        assert_eq!(client.requests_sent(), 1);
        // nothing cached on failure
        assert!(client.cached("t", "a").is_none());
        server.join().unwrap();
    }

    #[test]
    fn missing_api_key_is_an_external_error() {
        if std::env::var(API_KEY_VAR).is_ok() {
            return; // caller's environment has credentials; skip
        }
        assert!(matches!(ChatSettings::from_env(), Err(Error::External(_))));
    }

    #[test]
    fn sample_ids_map_to_safe_unique_cache_files() {
        let dir = tempfile::tempdir().unwrap();
        let client = ChatClient::new(fast_settings("http://unused"), dir.path());
        let a = client.cache_path("t", "weird/id with spaces");
        let b = client.cache_path("t", "weird id/with spaces");
        assert_ne!(a, b, "sanitation collisions must be disambiguated");
        assert!(a.file_name().unwrap().to_str().unwrap().ends_with(".txt"));
        let plain = client.cache_path("t", "r1__Security");
        assert_eq!(plain.file_name().unwrap().to_str().unwrap(), "r1__Security.txt");
    }
}
