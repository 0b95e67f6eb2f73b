//! Chat-completion gateway: one interface over an HTTP provider and a
//! scripted transcript, with tool schemas, structured-output parsing and a
//! usage ledger.

mod gateway;
mod http;
mod ledger;
mod message;
mod mock;
mod structured;

pub use gateway::{ChatProvider, Gateway, GatewayError, ProviderReply};
pub use http::{HttpProvider, HttpSettings};
pub use ledger::{LedgerReport, Price, RoleTotals, TokenUsage, UsageEntry, UsageLedger};
pub use message::{
    ChatMessage, CompletionRequest, ParamKind, Role, ToolInvocation, ToolParameter, ToolSchema,
};
pub use mock::{
    fingerprint, load_transcript, ScriptedProvider, ScriptedResponse, ScriptedUsage, Transcript,
    TranscriptStep,
};
pub use structured::extract_structured;
