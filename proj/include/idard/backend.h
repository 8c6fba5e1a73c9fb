#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "idard/image.h"
#include "idard/protocol.h"
#include "idard/transport.h"

namespace idard {

// Where a backend lives: "stdio:<shell command>" or "tcp:<host>:<port>".
struct EndpointSpec {
  enum class Transport { kStdio, kTcp };
  Transport transport = Transport::kStdio;
  std::string command;  // stdio
  std::string host;     // tcp
  std::uint16_t port = 0;

  // Throws ConfigError on malformed text.
  static EndpointSpec Parse(const std::string& text);
  std::string ToString() const;
};

// One handshaken connection. Requests are serialised by an internal mutex;
// after a ProtocolError or transport failure the connection is closed and
// every later call fails.
class BackendConnection {
 public:
  // Sends HELLO and waits for the server's HELLO.
  BackendConnection(std::unique_ptr<Transport> transport, std::string endpoint);

  const protocol::Hello& capabilities() const { return server_hello_; }
  bool broken() const { return broken_; }

  // Returns samples i = 1..n_samples for (seed, image id).
  std::vector<Raster> Upscale(const Raster& lr, int factor, int n_samples,
                              std::uint64_t seed, const std::string& image_id);
  double Metric(const std::string& kind, const Raster& a, const Raster& b);

 private:
  protocol::Frame Exchange(const protocol::Frame& request, std::string_view what);
  protocol::Frame Receive(std::string_view what);
  [[noreturn]] void Fail(std::string_view what, const std::exception& e);

  std::unique_ptr<Transport> transport_;
  std::string endpoint_;
  protocol::Hello server_hello_;
  bool broken_ = false;
  std::mutex mu_;
};

using TransportFactory = std::function<std::unique_ptr<Transport>()>;

// Thread-safe handle to a backend, backed by a pool of up to
// `max_connections` connections opened on demand. Capability checks happen
// locally before any request is sent.
class Backend {
 public:
  Backend(EndpointSpec endpoint, std::size_t max_connections = 1,
          std::chrono::milliseconds read_timeout = std::chrono::minutes(5));
  Backend(std::string name, TransportFactory factory, std::size_t max_connections = 1);

  const std::string& endpoint() const { return name_; }

  // Connects (if needed) and returns the server's HELLO.
  protocol::Hello Capabilities();

  // Throws BackendError when `factor` is not a declared factor.
  std::vector<Raster> Upscale(const Raster& lr, int factor, int n_samples,
                              std::uint64_t seed, const std::string& image_id);
  double Metric(const std::string& kind, const Raster& a, const Raster& b);

  // Splits `factor` into a product of declared factors, largest first
  // (e.g. 32 -> {8, 4} when {4, 8} are declared). Empty if impossible.
  std::vector<int> DecomposeFactor(int factor);

 private:
  class Lease;
  std::unique_ptr<BackendConnection> Acquire();
  void Release(std::unique_ptr<BackendConnection> conn);

  std::string name_;
  TransportFactory factory_;
  std::size_t max_connections_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<BackendConnection>> idle_;
  std::size_t open_ = 0;
  std::optional<protocol::Hello> hello_;
};

}  // namespace idard
