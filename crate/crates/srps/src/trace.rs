//! Run trace: one line per handler invocation, in a stable text format.
//!
//! Format (space separated, one event per line):
//!
//! `t_us=<micros> node=<id> ev=<event> act=<action> reason=<reason>`
//!
//! `reason` is `-` when the action needs none.

use crate::message::NodeId;

#[derive(Debug, Clone)]
pub struct TraceLine {
    pub t_us: u64,
    pub node: NodeId,
    pub event: &'static str,
    pub action: String,
    pub reason: &'static str,
}

/// Collects trace lines for a run. Disabled sinks cost one branch per event.
#[derive(Debug, Default)]
pub struct TraceSink {
    enabled: bool,
    lines: Vec<TraceLine>,
}

impl TraceSink {
    pub fn new(enabled: bool) -> Self {
        TraceSink {
            enabled,
            lines: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn record(&mut self, t_us: u64, node: NodeId, event: &'static str, action: String, reason: &'static str) {
        if self.enabled {
            self.lines.push(TraceLine {
                t_us,
                node,
                event,
                action,
                reason,
            });
        }
    }

    pub fn lines(&self) -> &[TraceLine] {
        &self.lines
    }

    /// Renders the whole trace in the documented format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&format!(
                "t_us={} node={} ev={} act={} reason={}\n",
                l.t_us, l.node, l.event, l.action, l.reason
            ));
        }
        out
    }
}
