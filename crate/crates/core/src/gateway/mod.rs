//! Operator service: TOML config, the persistent JSONL decision log and the
//! HTTP/WebSocket API.

mod config;
mod journal;
mod service;

pub use config::{load_config, parse_config_str, ConfigError, GatewayConfig, LoadedConfig};
pub use journal::JsonlLog;
pub use service::{
    serve, serve_with_log, EventRequest, GatewayError, GatewayHandle, PoseUpdate, PushMessage, StateView,
    POSE_PUSH_INTERVAL, PUSH_BUFFER,
};
