#include "idard/transport.h"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>

#include "idard/error.h"

namespace idard {
namespace {

// Fills `buf` completely. Returns the number of bytes read before EOF.
std::size_t ReadFully(Transport& t, std::span<std::uint8_t> buf) {
  std::size_t got = 0;
  while (got < buf.size()) {
    const std::size_t n = t.ReadSome(buf.subspan(got));
    if (n == 0) break;
    got += n;
  }
  return got;
}

}  // namespace

bool ReadFrame(Transport& transport, protocol::Frame& out) {
  std::array<std::uint8_t, protocol::kHeaderSize> header;
  const std::size_t got = ReadFully(transport, header);
  if (got == 0) return false;
  if (got < header.size()) {
    throw ProtocolError("stream ended inside a frame header (" + std::to_string(got) +
                        " of 12 bytes)");
  }
  const protocol::FrameHeader h = protocol::ParseHeader(header);
  out.kind = h.kind;
  out.payload.assign(h.length, 0);
  const std::size_t body = ReadFully(transport, out.payload);
  if (body < h.length) {
    throw ProtocolError("stream ended inside a " +
                        std::string(protocol::FrameKindName(h.kind)) + " payload (" +
                        std::to_string(body) + " of " + std::to_string(h.length) +
                        " bytes)");
  }
  return true;
}

void WriteFrame(Transport& transport, const protocol::Frame& frame) {
  transport.WriteAll(protocol::EncodeFrame(frame));
}

std::size_t MemoryTransport::ReadSome(std::span<std::uint8_t> buf) {
  const std::size_t n = std::min(buf.size(), incoming_.size() - pos_);
  std::copy_n(incoming_.begin() + static_cast<std::ptrdiff_t>(pos_), n, buf.begin());
  pos_ += n;
  return n;
}

FdTransport::FdTransport(int read_fd, int write_fd, std::string description,
                         std::chrono::milliseconds read_timeout)
    : read_fd_(read_fd), write_fd_(write_fd), description_(std::move(description)),
      read_timeout_(read_timeout) {}

FdTransport::~FdTransport() { CloseFds(); }

void FdTransport::CloseFds() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
}

void FdTransport::WriteAll(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::write(write_fd_, bytes.data() + sent, bytes.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write to " + description_ + " failed: " + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t FdTransport::ReadSome(std::span<std::uint8_t> buf) {
  while (true) {
    pollfd p{read_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(read_timeout_.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw IoError("poll on " + description_ + " failed: " + std::strerror(errno));
    }
    if (ready == 0) {
      throw IoError("read from " + description_ + " timed out after " +
                    std::to_string(read_timeout_.count()) + " ms");
    }
    const ssize_t n = ::read(read_fd_, buf.data(), buf.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("read from " + description_ + " failed: " + std::strerror(errno));
    }
    return static_cast<std::size_t>(n);
  }
}

StdioTransport::StdioTransport(ChildProcess child, std::string command,
                               std::chrono::milliseconds read_timeout)
    : FdTransport(child.stdout_fd, child.stdin_fd, "stdio:" + command, read_timeout),
      child_(child) {
  // The base class owns the pipe fds now.
  child_.stdin_fd = child_.stdout_fd = -1;
}

StdioTransport::~StdioTransport() {
  // Closing stdin signals the backend to exit; give it a moment, then kill.
  CloseFds();
  for (int i = 0; i < 200 && child_.pid > 0; ++i) {
    int status = 0;
    if (::waitpid(child_.pid, &status, WNOHANG) == child_.pid) {
      child_.pid = -1;
      break;
    }
    ::usleep(5000);
  }
  KillAndReap(child_);
}

std::unique_ptr<Transport> SpawnStdioTransport(const std::string& command,
                                               std::chrono::milliseconds read_timeout) {
  ChildProcess child =
      SpawnShell(command, {.pipe_stdin = true, .pipe_stdout = true, .pipe_stderr = false});
  return std::make_unique<StdioTransport>(child, command, read_timeout);
}

std::unique_ptr<Transport> ConnectTcp(const std::string& host, std::uint16_t port,
                                      std::chrono::milliseconds read_timeout) {
  IgnoreSigpipeOnce();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  const int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res);
  const std::string where = "tcp:" + host + ":" + port_str;
  if (rc != 0) throw IoError("cannot resolve " + where + ": " + ::gai_strerror(rc));
  int fd = -1;
  std::string last_error = "no addresses";
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    last_error = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw IoError("cannot connect to " + where + ": " + last_error);
  return std::make_unique<FdTransport>(fd, fd, where, read_timeout);
}

}  // namespace idard
