//! Line-delimited JSON exchanges with out-of-process models, plus replay
//! files holding the same records for deterministic runs.
//!
//! A replay file has one JSON object per line, either an adapter header
//!
//! ```text
//! {"role":"gpt2_base","identity":"gpt2@base","convention":{"begin_marker":"Ġ","byte_level":true,"log_base":"e"}}
//! ```
//!
//! or an exchange
//!
//! ```text
//! {"role":"gpt2_base","request":{"op":"score","text":"It's all"},"response":{"subwords":[{"surface":"It","logprob":-9.0}]}}
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    AdapterError, CausalLm, Convention, EmbeddedSubword, EncoderAdapter, MtAdapter, ParserAdapter,
    RawSubword, Sentence,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Score { text: String },
    ScoreSubwords { subwords: Vec<String> },
    MtScore { src: String, tgt: String },
    MtArgmax { src: String, tgt: String },
    Embed { text: String, lang: String },
    Parse { text: String, lang: String },
}

impl Request {
    fn summary(&self) -> String {
        let s = serde_json::to_string(self).unwrap_or_default();
        if s.chars().count() > 120 {
            s.chars().take(117).collect::<String>() + "..."
        } else {
            s
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Subwords(Vec<RawSubword>),
    Tokens(Vec<String>),
    Embeddings(Vec<EmbeddedSubword>),
    Sentences(Vec<Sentence>),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Exchange {
        role: String,
        request: Request,
        response: Response,
    },
    Adapter {
        role: String,
        identity: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        convention: Option<Convention>,
    },
}

/// Something that answers requests for named model roles.
pub trait ModelBackend: Send + Sync {
    fn call(&self, role: &str, request: &Request) -> Result<Response, AdapterError>;

    /// Identity and convention declared for a role, if known.
    fn describe(&self, role: &str) -> Option<(String, Option<Convention>)>;
}

/// Recorded exchanges keyed by role and request.
#[derive(Debug, Default, Clone)]
pub struct ReplayStore {
    exchanges: HashMap<(String, Request), Response>,
    adapters: HashMap<String, (String, Option<Convention>)>,
}

impl ReplayStore {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, AdapterError> {
        let mut store = ReplayStore::default();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record =
                serde_json::from_str(&line).map_err(|source| AdapterError::Json { line: n + 1, source })?;
            store.insert(record);
        }
        Ok(store)
    }

    pub fn open(path: &Path) -> Result<Self, AdapterError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn insert(&mut self, record: Record) {
        match record {
            Record::Exchange {
                role,
                request,
                response,
            } => {
                self.exchanges.entry((role, request)).or_insert(response);
            }
            Record::Adapter {
                role,
                identity,
                convention,
            } => {
                self.adapters.insert(role, (identity, convention));
            }
        }
    }

    pub fn merge(&mut self, other: ReplayStore) {
        for (k, v) in other.exchanges {
            self.exchanges.entry(k).or_insert(v);
        }
        self.adapters.extend(other.adapters);
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

impl ModelBackend for ReplayStore {
    fn call(&self, role: &str, request: &Request) -> Result<Response, AdapterError> {
        self.exchanges
            .get(&(role.to_string(), request.clone()))
            .cloned()
            .ok_or_else(|| AdapterError::ReplayMiss {
                role: role.to_string(),
                request: request.summary(),
            })
    }

    fn describe(&self, role: &str) -> Option<(String, Option<Convention>)> {
        self.adapters.get(role).cloned()
    }
}

/// A model server spoken to over stdin/stdout, one JSON object per line:
/// `{"role":..,"request":{..}}` out, a [`Response`] object back.
pub struct LineClient {
    io: Mutex<(ChildStdin, BufReader<ChildStdout>)>,
    child: Mutex<Child>,
    adapters: HashMap<String, (String, Option<Convention>)>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    role: &'a str,
    request: &'a Request,
}

impl LineClient {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, AdapterError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().ok_or_else(|| std::io::Error::other("no stdin"))?;
        let stdout = child.stdout.take().ok_or_else(|| std::io::Error::other("no stdout"))?;
        Ok(LineClient {
            io: Mutex::new((stdin, BufReader::new(stdout))),
            child: Mutex::new(child),
            adapters: HashMap::new(),
        })
    }

    /// Declares the identity and convention of a role served by this process.
    pub fn declare(&mut self, role: &str, identity: &str, convention: Option<Convention>) {
        self.adapters
            .insert(role.to_string(), (identity.to_string(), convention));
    }
}

impl ModelBackend for LineClient {
    fn call(&self, role: &str, request: &Request) -> Result<Response, AdapterError> {
        let mut guard = self.io.lock().expect("adapter channel poisoned");
        let (stdin, stdout) = &mut *guard;
        let line = serde_json::to_string(&Envelope { role, request })
            .map_err(|source| AdapterError::Json { line: 0, source })?;
        writeln!(stdin, "{line}")?;
        stdin.flush()?;
        let mut reply = String::new();
        if stdout.read_line(&mut reply)? == 0 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "model server closed its output",
            )
            .into());
        }
        serde_json::from_str(&reply).map_err(|source| AdapterError::Json { line: 1, source })
    }

    fn describe(&self, role: &str) -> Option<(String, Option<Convention>)> {
        self.adapters.get(role).cloned()
    }
}

impl Drop for LineClient {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Passes requests through and keeps every exchange for a replay file.
pub struct Recorder<B> {
    inner: B,
    log: Mutex<Vec<Record>>,
}

impl<B: ModelBackend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Recorder {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<Record> {
        self.log.lock().expect("recorder poisoned").clone()
    }

    /// Writes adapter headers for `roles` followed by all exchanges.
    pub fn write_jsonl<W: Write>(&self, roles: &[&str], mut sink: W) -> Result<(), AdapterError> {
        for role in roles {
            if let Some((identity, convention)) = self.inner.describe(role) {
                let rec = Record::Adapter {
                    role: role.to_string(),
                    identity,
                    convention,
                };
                writeln!(sink, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
            }
        }
        for rec in self.records() {
            writeln!(sink, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
        }
        Ok(())
    }
}

impl<B: ModelBackend> ModelBackend for Recorder<B> {
    fn call(&self, role: &str, request: &Request) -> Result<Response, AdapterError> {
        let response = self.inner.call(role, request)?;
        self.log.lock().expect("recorder poisoned").push(Record::Exchange {
            role: role.to_string(),
            request: request.clone(),
            response: response.clone(),
        });
        Ok(response)
    }

    fn describe(&self, role: &str) -> Option<(String, Option<Convention>)> {
        self.inner.describe(role)
    }
}

/// Common state of the wire-backed adapters.
#[derive(Clone)]
pub struct WireRole {
    backend: Arc<dyn ModelBackend>,
    role: String,
    identity: String,
    convention: Option<Convention>,
}

impl WireRole {
    /// Binds a role, taking identity and convention from the backend.
    pub fn bind(backend: Arc<dyn ModelBackend>, role: &str) -> Result<Self, AdapterError> {
        let (identity, convention) = backend.describe(role).ok_or_else(|| AdapterError::Invalid {
            role: role.to_string(),
            message: "no adapter header declared for this role".to_string(),
        })?;
        Ok(WireRole {
            backend,
            role: role.to_string(),
            identity,
            convention,
        })
    }

    fn call(&self, request: Request) -> Result<Response, AdapterError> {
        match self.backend.call(&self.role, &request)? {
            Response::Error(message) => Err(AdapterError::Remote {
                role: self.role.clone(),
                message,
            }),
            other => Ok(other),
        }
    }

    fn unexpected(&self, request: &Request) -> AdapterError {
        AdapterError::UnexpectedResponse {
            role: self.role.clone(),
            request: request.summary(),
        }
    }

    fn subwords(&self, request: Request) -> Result<Vec<RawSubword>, AdapterError> {
        match self.call(request.clone())? {
            Response::Subwords(s) => Ok(s),
            _ => Err(self.unexpected(&request)),
        }
    }

    fn require_convention(&self) -> Result<&Convention, AdapterError> {
        self.convention.as_ref().ok_or_else(|| AdapterError::Invalid {
            role: self.role.clone(),
            message: "scoring role declares no subword convention".to_string(),
        })
    }
}

pub struct WireLm(WireRole, Convention);

impl WireLm {
    pub fn bind(backend: Arc<dyn ModelBackend>, role: &str) -> Result<Self, AdapterError> {
        let r = WireRole::bind(backend, role)?;
        let c = r.require_convention()?.clone();
        Ok(WireLm(r, c))
    }
}

impl CausalLm for WireLm {
    fn identity(&self) -> String {
        self.0.identity.clone()
    }

    fn convention(&self) -> &Convention {
        &self.1
    }

    fn score(&self, text: &str) -> Result<Vec<RawSubword>, AdapterError> {
        self.0.subwords(Request::Score {
            text: text.to_string(),
        })
    }

    fn score_subwords(&self, subwords: &[String]) -> Result<Vec<RawSubword>, AdapterError> {
        self.0.subwords(Request::ScoreSubwords {
            subwords: subwords.to_vec(),
        })
    }
}

pub struct WireMt(WireRole, Convention);

impl WireMt {
    pub fn bind(backend: Arc<dyn ModelBackend>, role: &str) -> Result<Self, AdapterError> {
        let r = WireRole::bind(backend, role)?;
        let c = r.require_convention()?.clone();
        Ok(WireMt(r, c))
    }
}

impl MtAdapter for WireMt {
    fn identity(&self) -> String {
        self.0.identity.clone()
    }

    fn convention(&self) -> &Convention {
        &self.1
    }

    fn score(&self, src: &str, tgt: &str) -> Result<Vec<RawSubword>, AdapterError> {
        self.0.subwords(Request::MtScore {
            src: src.to_string(),
            tgt: tgt.to_string(),
        })
    }

    fn predict_argmax(&self, src: &str, tgt: &str) -> Result<Vec<String>, AdapterError> {
        let request = Request::MtArgmax {
            src: src.to_string(),
            tgt: tgt.to_string(),
        };
        match self.0.call(request.clone())? {
            Response::Tokens(t) => Ok(t),
            _ => Err(self.0.unexpected(&request)),
        }
    }
}

pub struct WireEncoder(WireRole);

impl WireEncoder {
    pub fn bind(backend: Arc<dyn ModelBackend>, role: &str) -> Result<Self, AdapterError> {
        Ok(WireEncoder(WireRole::bind(backend, role)?))
    }
}

impl EncoderAdapter for WireEncoder {
    fn identity(&self) -> String {
        self.0.identity.clone()
    }

    fn embed(&self, text: &str, lang: &str) -> Result<Vec<EmbeddedSubword>, AdapterError> {
        let request = Request::Embed {
            text: text.to_string(),
            lang: lang.to_string(),
        };
        match self.0.call(request.clone())? {
            Response::Embeddings(e) => Ok(e),
            _ => Err(self.0.unexpected(&request)),
        }
    }
}

pub struct WireParser(WireRole);

impl WireParser {
    pub fn bind(backend: Arc<dyn ModelBackend>, role: &str) -> Result<Self, AdapterError> {
        Ok(WireParser(WireRole::bind(backend, role)?))
    }
}

impl ParserAdapter for WireParser {
    fn identity(&self) -> String {
        self.0.identity.clone()
    }

    fn parse(&self, text: &str, lang: &str) -> Result<Vec<Sentence>, AdapterError> {
        let request = Request::Parse {
            text: text.to_string(),
            lang: lang.to_string(),
        };
        match self.0.call(request.clone())? {
            Response::Sentences(s) => Ok(s),
            _ => Err(self.0.unexpected(&request)),
        }
    }
}
