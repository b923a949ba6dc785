//! External trainer invocation between online iterations.

use std::path::Path;
use std::process::Command;

use log::info;

/// A command run as `<command> [args..] --data <path> --iteration <n>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainerHook {
    pub program: String,
    pub args: Vec<String>,
}

/// What the trainer asked the loop to use next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NextEndpoint {
    Unchanged,
    /// A base URL to re-target the backend to.
    Url(String),
    /// A model name served by the current endpoint.
    Model(String),
}

impl TrainerHook {
    /// Splits `command` on whitespace into program and leading arguments.
    pub fn parse(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts.next()?;
        Some(TrainerHook {
            program,
            args: parts.collect(),
        })
    }

    /// Runs the hook and interprets the last non-empty stdout line.
    pub fn invoke(&self, data: &Path, iteration: usize) -> Result<NextEndpoint, String> {
        info!("running trainer hook `{}` on {}", self.program, data.display());
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg("--data")
            .arg(data)
            .arg("--iteration")
            .arg(iteration.to_string())
            .output()
            .map_err(|e| format!("could not start `{}`: {e}", self.program))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(format!("`{}` exited with {}: {}", self.program, out.status, stderr.trim()));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        Ok(match stdout.lines().map(str::trim).rfind(|l| !l.is_empty()) {
            None => NextEndpoint::Unchanged,
            Some(l) if l.starts_with("http://") || l.starts_with("https://") => NextEndpoint::Url(l.to_owned()),
            Some(l) => NextEndpoint::Model(l.to_owned()),
        })
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    #[test]
    fn reads_last_stdout_line() {
        let hook = TrainerHook::parse("sh -c").unwrap();
        let echo = |script: &str| TrainerHook {
            program: hook.program.clone(),
            args: vec!["-c".into(), script.into(), "hook".into()],
        };
        let p = Path::new("/tmp/x.jsonl");
        assert_eq!(echo("echo training; echo model-v2").invoke(p, 0).unwrap(), NextEndpoint::Model("model-v2".into()));
        assert_eq!(
            echo("echo http://127.0.0.1:9/").invoke(p, 0).unwrap(),
            NextEndpoint::Url("http://127.0.0.1:9/".into())
        );
        assert_eq!(echo("true").invoke(p, 0).unwrap(), NextEndpoint::Unchanged);
        assert!(echo("exit 3").invoke(p, 0).is_err());
        // the data path and iteration arrive as trailing arguments
        assert_eq!(
            echo("echo \"$2-$4\"").invoke(p, 7).unwrap(),
            NextEndpoint::Model("/tmp/x.jsonl-7".into())
        );
    }

    #[test]
    fn missing_program() {
        let hook = TrainerHook::parse("/nonexistent/trainer").unwrap();
        assert!(hook.invoke(Path::new("d"), 0).is_err());
        assert!(TrainerHook::parse("   ").is_none());
    }
}
