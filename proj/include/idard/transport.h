#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "idard/process.h"
#include "idard/protocol.h"

namespace idard {

// Byte stream to a backend. Implementations throw IoError on transport
// failure.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual void WriteAll(std::span<const std::uint8_t> bytes) = 0;
  // Reads up to buf.size() bytes; returns 0 at end of stream.
  virtual std::size_t ReadSome(std::span<std::uint8_t> buf) = 0;
  virtual std::string Describe() const = 0;
};

// Reads a whole frame. End of stream before the first byte yields
// std::nullopt-like `false`; end of stream mid-frame or any framing defect
// throws ProtocolError.
bool ReadFrame(Transport& transport, protocol::Frame& out);
void WriteFrame(Transport& transport, const protocol::Frame& frame);

// In-memory transport: reads from a fixed byte buffer, records writes.
class MemoryTransport : public Transport {
 public:
  explicit MemoryTransport(std::vector<std::uint8_t> incoming = {})
      : incoming_(std::move(incoming)) {}

  void WriteAll(std::span<const std::uint8_t> bytes) override {
    written_.insert(written_.end(), bytes.begin(), bytes.end());
  }
  std::size_t ReadSome(std::span<std::uint8_t> buf) override;
  std::string Describe() const override { return "memory"; }

  void Append(std::span<const std::uint8_t> bytes) {
    incoming_.insert(incoming_.end(), bytes.begin(), bytes.end());
  }
  const std::vector<std::uint8_t>& written() const { return written_; }

 private:
  std::vector<std::uint8_t> incoming_;
  std::size_t pos_ = 0;
  std::vector<std::uint8_t> written_;
};

// Transport over file descriptors (a socket, or a child's stdio pipes).
class FdTransport : public Transport {
 public:
  // Takes ownership of the fds (read_fd may equal write_fd).
  FdTransport(int read_fd, int write_fd, std::string description,
              std::chrono::milliseconds read_timeout);
  ~FdTransport() override;

  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void WriteAll(std::span<const std::uint8_t> bytes) override;
  std::size_t ReadSome(std::span<std::uint8_t> buf) override;
  std::string Describe() const override { return description_; }

 protected:
  void CloseFds();

 private:
  int read_fd_;
  int write_fd_;
  std::string description_;
  std::chrono::milliseconds read_timeout_;
};

// A backend subprocess spoken to over its stdin/stdout.
class StdioTransport : public FdTransport {
 public:
  StdioTransport(ChildProcess child, std::string command,
                 std::chrono::milliseconds read_timeout);
  ~StdioTransport() override;

 private:
  ChildProcess child_;
};

std::unique_ptr<Transport> SpawnStdioTransport(const std::string& command,
                                               std::chrono::milliseconds read_timeout);
std::unique_ptr<Transport> ConnectTcp(const std::string& host, std::uint16_t port,
                                      std::chrono::milliseconds read_timeout);

}  // namespace idard
