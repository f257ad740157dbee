use std::time::Duration;

use serde_json::{json, Value};

use super::{decode_hex, Address, IngestError};

pub const RPC_URL_ENV: &str = "PATHLAB_RPC_URL";

const TIMEOUT: Duration = Duration::from_secs(30);

/// Minimal JSON-RPC client for `eth_getCode`.
#[derive(Debug, Clone)]
pub struct RpcClient {
    endpoint: String,
    agent: ureq::Agent,
}

impl RpcClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(TIMEOUT)).build().into();
        RpcClient { endpoint: endpoint.into(), agent }
    }

    /// Client for the endpoint in `PATHLAB_RPC_URL`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var(RPC_URL_ENV).ok().filter(|u| !u.trim().is_empty()).map(RpcClient::new)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Runtime bytecode at the latest block.
    pub fn fetch_code(&self, address: &Address) -> Result<Vec<u8>, IngestError> {
        let request = json!({
            "jsonrpc": "2.0",
            "id": 1,
            "method": "eth_getCode",
            "params": [address.to_string(), "latest"],
        });
        let reply: Value = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .and_then(|mut r| r.body_mut().read_json())
            .map_err(|e| IngestError::Rpc(e.to_string()))?;
        if let Some(err) = reply.get("error") {
            return Err(IngestError::Rpc(format!("node error: {err}")));
        }
        let code = reply
            .get("result")
            .and_then(Value::as_str)
            .ok_or_else(|| IngestError::Rpc("reply has no string `result`".into()))?;
        let bytes = decode_hex(code).map_err(|e| IngestError::Rpc(format!("result: {e}")))?;
        if bytes.is_empty() {
            return Err(IngestError::EmptyCode(*address));
        }
        Ok(bytes)
    }
}
