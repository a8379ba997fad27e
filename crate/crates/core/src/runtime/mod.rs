//! Device-edge co-inference over TCP.
//!
//! The device runs its mapped layer segments on seeded synthetic input and
//! ships intermediate tensors at every `Communicate`; the edge runs the rest
//! and sends back tensors or the final result. Each side keeps one compute
//! worker plus a sender and a receiver worker joined by bounded queues, so a
//! batch waiting on the link never blocks compute for the next one.
//!
//! A session is `HELLO`, `ARCH` (the deployment descriptor) and `ACK`, then
//! batch frames, then `BYE` in both directions. The edge answers a bad
//! header or an unexpected message with a `BYE` carrying the reason.

mod device;
mod edge;
mod exec;
pub mod kernels;
mod profiler;
mod session;
mod throttle;
pub mod wire;

pub use device::{run_device, BatchReport, RunConfig, RunReport};
pub use edge::{handle_session, serve_edge, serve_listener, EdgeConfig, SessionReport, EDGE_HELLO};
pub use exec::{run_local, tensor_digest, Deployment, DeploymentDescriptor};
pub use profiler::{
    profile_endpoint, timer_resolution, EndpointMeasurements, MachineFingerprint, Measurement, ProfileConfig,
};
pub use throttle::{Throttled, TokenBucket};
pub use wire::{Codec, Frame, MsgType};
