use super::{BackendError, ChatRequest, ModelBackend};

type Handler = dyn Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync;

/// Backend driven by a closure; handy for tests and embedding.
pub struct FnBackend {
    id: String,
    deterministic: bool,
    handler: Box<Handler>,
}

impl FnBackend {
    pub fn new(id: &str, handler: impl Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync + 'static) -> Self {
        Self {
            id: id.to_string(),
            deterministic: false,
            handler: Box::new(handler),
        }
    }

    pub fn deterministic(mut self) -> Self {
        self.deterministic = true;
        self
    }
}

impl ModelBackend for FnBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (self.handler)(request)
    }

    fn deterministic(&self) -> bool {
        self.deterministic
    }
}
