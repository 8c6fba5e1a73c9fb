#pragma once

#include <sys/types.h>

#include <chrono>
#include <string>

namespace idard {

// A `/bin/sh -c` child in its own process group. Pipes that were requested
// are exposed as parent-side fds (-1 otherwise).
struct ChildProcess {
  pid_t pid = -1;
  int stdin_fd = -1;
  int stdout_fd = -1;
  int stderr_fd = -1;
};

struct SpawnOptions {
  bool pipe_stdin = false;
  bool pipe_stdout = false;
  bool pipe_stderr = false;
};

// Writes to a closed pipe or socket then fail with EPIPE instead of killing
// the process.
void IgnoreSigpipeOnce();

// Throws IoError if the shell cannot be spawned.
ChildProcess SpawnShell(const std::string& command, const SpawnOptions& options);

// Kills the whole process group and reaps the child. Returns the exit code
// (or -1 if it died from a signal).
int KillAndReap(ChildProcess& child);

// Waits for exit; returns the exit code or -1 for a signal.
int Reap(ChildProcess& child);

struct RunResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string stdout_text;
  std::string stderr_text;
};

// Runs a command to completion with captured stdout/stderr and a wall-clock
// limit; the process group is killed on timeout.
RunResult RunShell(const std::string& command, std::chrono::milliseconds timeout);

// Single-quotes `arg` for /bin/sh.
std::string ShellQuote(const std::string& arg);

}  // namespace idard
