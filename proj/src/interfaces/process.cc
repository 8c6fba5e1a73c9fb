#include "idard/process.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <vector>

#include "idard/error.h"

extern char** environ;

namespace idard {
namespace {

struct Pipe {
  int read = -1;
  int write = -1;
};

Pipe MakePipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw IoError(std::string("pipe2 failed: ") + std::strerror(errno));
  }
  return {fds[0], fds[1]};
}

void CloseFd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

int DecodeStatus(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

}  // namespace

void IgnoreSigpipeOnce() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

ChildProcess SpawnShell(const std::string& command, const SpawnOptions& options) {
  IgnoreSigpipeOnce();
  Pipe in, out, err;
  if (options.pipe_stdin) in = MakePipe();
  if (options.pipe_stdout) out = MakePipe();
  if (options.pipe_stderr) err = MakePipe();

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (options.pipe_stdin) posix_spawn_file_actions_adddup2(&actions, in.read, 0);
  if (options.pipe_stdout) posix_spawn_file_actions_adddup2(&actions, out.write, 1);
  if (options.pipe_stderr) posix_spawn_file_actions_adddup2(&actions, err.write, 2);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  std::string cmd = command;
  char arg0[] = "sh";
  char arg1[] = "-c";
  std::vector<char*> argv = {arg0, arg1, cmd.data(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);

  CloseFd(in.read);
  CloseFd(out.write);
  CloseFd(err.write);
  if (rc != 0) {
    CloseFd(in.write);
    CloseFd(out.read);
    CloseFd(err.read);
    throw IoError("cannot spawn '" + command + "': " + std::strerror(rc));
  }
  return {pid, in.write, out.read, err.read};
}

int Reap(ChildProcess& child) {
  CloseFd(child.stdin_fd);
  CloseFd(child.stdout_fd);
  CloseFd(child.stderr_fd);
  if (child.pid <= 0) return -1;
  int status = 0;
  while (::waitpid(child.pid, &status, 0) < 0 && errno == EINTR) {
  }
  child.pid = -1;
  return DecodeStatus(status);
}

int KillAndReap(ChildProcess& child) {
  if (child.pid > 0) ::kill(-child.pid, SIGKILL);
  return Reap(child);
}

RunResult RunShell(const std::string& command, std::chrono::milliseconds timeout) {
  ChildProcess child = SpawnShell(command, {.pipe_stdin = false,
                                            .pipe_stdout = true,
                                            .pipe_stderr = true});
  RunResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  char buf[4096];
  while (child.stdout_fd >= 0 || child.stderr_fd >= 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd fds[2];
    nfds_t n = 0;
    if (child.stdout_fd >= 0) fds[n++] = {child.stdout_fd, POLLIN, 0};
    if (child.stderr_fd >= 0) fds[n++] = {child.stderr_fd, POLLIN, 0};
    const int ready = ::poll(fds, n, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (nfds_t i = 0; i < n; ++i) {
      if (fds[i].revents == 0) continue;
      const ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
      const bool is_out = fds[i].fd == child.stdout_fd;
      if (got <= 0) {
        CloseFd(is_out ? child.stdout_fd : child.stderr_fd);
      } else {
        (is_out ? result.stdout_text : result.stderr_text).append(buf, got);
      }
    }
  }
  if (result.timed_out) {
    KillAndReap(child);
    result.exit_code = -1;
    return result;
  }
  // Pipes closed; the process may still be running if it detached them.
  while (true) {
    int status = 0;
    const pid_t done = ::waitpid(child.pid, &status, WNOHANG);
    if (done == child.pid) {
      child.pid = -1;
      result.exit_code = DecodeStatus(status);
      return result;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      result.timed_out = true;
      KillAndReap(child);
      result.exit_code = -1;
      return result;
    }
    ::usleep(1000);
  }
}

std::string ShellQuote(const std::string& arg) {
  std::string out = "'";
  for (char ch : arg) {
    if (ch == '\'') {
      out += "'\\''";
    } else {
      out += ch;
    }
  }
  return out + "'";
}

}  // namespace idard
