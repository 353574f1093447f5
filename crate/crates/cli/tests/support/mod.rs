#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

pub const ATTACK: &str =
    "Select * from login where user='hacker' or '1'='1' —' and pass='something'";
pub const LEGAL: &str = "SELECT * FROM user_account WHERE login='John' AND pass='xyz'";
pub const PARTIAL: &str = "SELECT * FROM users WHERE name='x' or '1 LIMIT 1";
pub const TAUTOLOGY_ONLY: &str = "#sqlia-spl v1\n1\tseed\t2024-01-01T00:00:00Z\t' or '1'='1\n";

pub fn sqlia(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqlia"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("run sqlia")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().next().unwrap_or("null")).expect("json line")
}

pub fn stdout_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("json line"))
        .collect()
}

/// A `sqlia serve` child process bound to an ephemeral port.
pub struct Served {
    pub child: Child,
    pub base: String,
}

impl Served {
    pub fn start(dir: &Path, extra: &[&str]) -> Served {
        let mut child = Command::new(env!("CARGO_BIN_EXE_sqlia"))
            .current_dir(dir)
            .env("RUST_LOG", "warn")
            .args(["serve", "--listen", "127.0.0.1:0"])
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn sqlia serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).expect("listening line");
        let base = format!("http://{}", v["listening"].as_str().unwrap());
        Served { child, base }
    }

    /// Sends SIGINT and waits for a clean exit.
    pub fn interrupt(mut self) -> std::process::ExitStatus {
        let pid = self.child.id().to_string();
        Command::new("kill").args(["-INT", &pid]).status().unwrap();
        self.child.wait().unwrap()
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
