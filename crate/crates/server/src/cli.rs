//! Operator command line.
//!
//! | command                           | exit status                              |
//! |-----------------------------------|------------------------------------------|
//! | `serve [--config <path>]`         | 0 after Ctrl-C, 1 on bad config          |
//! | `inspect <data_dir> <workspace>`  | 0, 1 on bad arguments, 2 on a bad log    |
//! | `verify <data_dir>`               | 0 if every log replays, otherwise 2      |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use collab_ir_core::repository::{verify_workspace, DirStorage, Storage, VerifyError};
use collab_ir_core::WorkspaceId;

use crate::config::ServiceConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "collab-ir", version, about = "Collaborative information retrieval service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP and WebSocket service.
    Serve {
        /// Flat key=value config file; MECO_* environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Replay one workspace and print its summary.
    Inspect { data_dir: PathBuf, workspace: String },
    /// Replay every workspace log and cross-check snapshot files.
    Verify { data_dir: PathBuf },
}

fn open_existing(data_dir: &Path, err: &mut dyn Write) -> Option<DirStorage> {
    if !data_dir.is_dir() {
        let _ = writeln!(err, "error: {} is not a directory", data_dir.display());
        return None;
    }
    match DirStorage::open(data_dir, false) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: cannot open {}: {e}", data_dir.display());
            None
        }
    }
}

fn report_failure(workspace: &WorkspaceId, e: &VerifyError, out: &mut dyn Write) {
    let _ = match e {
        VerifyError::Corrupt(c) => {
            writeln!(out, "FAIL {workspace}: corrupt log at offset {} (line {}): {}", c.offset, c.line, c.reason)
        }
        other => writeln!(out, "FAIL {workspace}: {other}"),
    };
}

pub fn inspect(data_dir: &Path, workspace: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Ok(id) = workspace.parse::<WorkspaceId>() else {
        let _ = writeln!(err, "error: invalid workspace id `{workspace}`");
        return EXIT_USAGE;
    };
    let Some(storage) = open_existing(data_dir, err) else { return EXIT_USAGE };
    match storage.workspaces() {
        Ok(list) if list.contains(&id) => {}
        Ok(_) => {
            let _ = writeln!(err, "error: no workspace `{id}` in {}", data_dir.display());
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    }
    match verify_workspace(&storage, &id) {
        Ok(summary) => {
            let t = summary.tally;
            let _ = writeln!(out, "workspace: {}", summary.workspace);
            let _ = writeln!(out, "problems: {}", summary.problem_count);
            let _ = writeln!(out, "events: {}", summary.event_count);
            let _ = writeln!(out, "socialization: {}", t.socialization);
            let _ = writeln!(out, "externalization: {}", t.externalization);
            let _ = writeln!(out, "combination: {}", t.combination);
            let _ = writeln!(out, "internalization: {}", t.internalization);
            EXIT_OK
        }
        Err(e) => {
            report_failure(&id, &e, out);
            EXIT_VERIFY
        }
    }
}

pub fn verify(data_dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(storage) = open_existing(data_dir, err) else { return EXIT_USAGE };
    let workspaces = match storage.workspaces() {
        Ok(w) => w,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut failed = 0;
    for id in &workspaces {
        match verify_workspace(&storage, id) {
            Ok(s) => {
                let snap = s.snapshot_seq.map_or("none".to_string(), |q| q.to_string());
                let _ = writeln!(out, "ok {id}: {} events, snapshot seq {snap}", s.event_count);
            }
            Err(e) => {
                failed += 1;
                report_failure(id, &e, out);
            }
        }
    }
    let _ = writeln!(out, "{} workspaces, {failed} failed", workspaces.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

fn serve(config: Option<&Path>, err: &mut dyn Write) -> i32 {
    let config = match ServiceConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .try_init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    match runtime.block_on(crate::run(config)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            if informational {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Serve { config } => serve(config.as_deref(), err),
        Command::Inspect { data_dir, workspace } => inspect(&data_dir, &workspace, out, err),
        Command::Verify { data_dir } => verify(&data_dir, out, err),
    }
}
