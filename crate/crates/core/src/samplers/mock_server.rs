use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tiny_http::{Header, Method, Response, Server};

use super::external::{SampleRequest, SampleResponse};
use super::{gibbs_sample, onehot_gibbs_sample, SamplerConfig};
use crate::model::{
    add_squared_penalty, ConstrainedProblem, EffectiveModel, LinearConstraint, ModelError, ObjectiveDoc,
    PenaltyWeight, ProblemDocument,
};

/// Encodes an effective model as a problem document. One-hot groups become
/// hard constraints, or finite-weight penalties when `onehot_weight` is set.
pub fn model_to_wire(m: &EffectiveModel, onehot_weight: Option<f64>) -> ProblemDocument {
    let constraints = m
        .onehot_groups
        .iter()
        .map(|g| match onehot_weight {
            None => LinearConstraint::onehot(g.iter().copied()),
            Some(w) => LinearConstraint::new(g.iter().map(|&i| (i, 1.0)), 1.0).with_penalty(PenaltyWeight::Finite(w)),
        })
        .map(|c| (&c).into())
        .collect();
    ProblemDocument {
        n_vars: m.n_vars,
        base: ObjectiveDoc(m.objective.clone()),
        constraints,
        encoding: Default::default(),
    }
}

/// Decodes a problem document into something a local sampler can run:
/// finite-weight constraints are folded into the QUBO, infinite one-hot
/// constraints become groups, and any other infinite constraint is rejected.
pub fn model_from_wire(doc: ProblemDocument) -> Result<EffectiveModel, ModelError> {
    let p = ConstrainedProblem::from_document(doc)?;
    let mut objective = p.base().clone();
    let mut groups = Vec::new();
    for (k, c) in p.constraints().iter().enumerate() {
        match c.penalty() {
            PenaltyWeight::Finite(w) => add_squared_penalty(&mut objective, c, w),
            PenaltyWeight::Infinite if c.is_hard_onehot() => groups.push(c.coeffs().keys().copied().collect()),
            PenaltyWeight::Infinite => {
                return Err(ModelError::Document(format!(
                    "constraint {k} has infinite weight and is not one-hot"
                )))
            }
        }
    }
    EffectiveModel::new(p.n_vars(), objective, groups)
}

type Handler = dyn Fn(&str) -> (u16, String) + Send + Sync;

/// In-process HTTP server speaking the annealer wire protocol.
///
/// Stops when dropped.
pub struct MockAnnealerServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockAnnealerServer {
    /// Serves `POST /sample` backed by the local Gibbs samplers using the
    /// default schedule.
    pub fn start(addr: &str) -> std::io::Result<Self> {
        Self::with_config(addr, SamplerConfig::default())
    }

    /// Same as [`start`](Self::start) with a custom schedule; `n_samples` and
    /// `seed` come from each request.
    pub fn with_config(addr: &str, template: SamplerConfig) -> std::io::Result<Self> {
        Self::with_handler(addr, move |body| gibbs_handler(&template, body))
    }

    /// Serves every `POST /sample` with a custom handler returning
    /// `(status, body)`.
    pub fn with_handler<F>(addr: &str, handler: F) -> std::io::Result<Self>
    where
        F: Fn(&str) -> (u16, String) + Send + Sync + 'static,
    {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let local = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let handler: Box<Handler> = Box::new(handler);
        let handle = thread::spawn(move || serve(server, &*handler, &flag));
        Ok(MockAnnealerServer {
            addr: local,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Serves until the process is terminated.
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    pub fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockAnnealerServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn serve(server: Server, handler: &Handler, shutdown: &AtomicBool) {
    let json = Header::from_bytes("Content-Type", "application/json").expect("static header");
    while !shutdown.load(Ordering::SeqCst) {
        let mut req = match server.recv_timeout(Duration::from_millis(50)) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(_) => break,
        };
        let (status, body) = if req.url() != "/sample" {
            (404, error_body("not found"))
        } else if *req.method() != Method::Post {
            (405, error_body("method not allowed"))
        } else {
            let mut text = String::new();
            match req.as_reader().read_to_string(&mut text) {
                Ok(_) => handler(&text),
                Err(e) => (400, error_body(&e.to_string())),
            }
        };
        let resp = Response::from_string(body)
            .with_status_code(status)
            .with_header(json.clone());
        let _ = req.respond(resp);
    }
}

fn error_body(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn gibbs_handler(template: &SamplerConfig, body: &str) -> (u16, String) {
    let req: SampleRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return (400, error_body(&e.to_string())),
    };
    let model = match model_from_wire(req.model) {
        Ok(m) => m,
        Err(e) => return (400, error_body(&e.to_string())),
    };
    let cfg = template.clone().with_samples(req.num_reads).with_seed(req.seed);
    let batch = if model.onehot_groups.is_empty() {
        gibbs_sample(&model, &cfg)
    } else {
        onehot_gibbs_sample(&model, &cfg)
    };
    match batch {
        Ok(b) => {
            let samples = b
                .samples
                .iter()
                .map(|q| q.as_slice().iter().map(|&x| i64::from(x)).collect())
                .collect();
            (200, serde_json::to_string(&SampleResponse { samples }).expect("serializable"))
        }
        Err(e) => (400, error_body(&e.to_string())),
    }
}
