#include "idard/backend.h"

#include <algorithm>

#include "idard/error.h"

namespace idard {

using protocol::Frame;
using protocol::FrameKind;

EndpointSpec EndpointSpec::Parse(const std::string& text) {
  EndpointSpec spec;
  if (text.rfind("stdio:", 0) == 0) {
    spec.transport = Transport::kStdio;
    spec.command = text.substr(6);
    if (spec.command.empty()) throw ConfigError("empty stdio backend command");
    return spec;
  }
  if (text.rfind("tcp:", 0) == 0) {
    const std::string rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw ConfigError("tcp endpoint must be tcp:<host>:<port>, got " + text);
    }
    spec.transport = Transport::kTcp;
    spec.host = rest.substr(0, colon);
    try {
      const int port = std::stoi(rest.substr(colon + 1));
      if (port < 1 || port > 65535) throw std::out_of_range("port");
      spec.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
      throw ConfigError("bad tcp port in endpoint " + text);
    }
    return spec;
  }
  throw ConfigError("backend endpoint must start with stdio: or tcp:, got '" + text + "'");
}

std::string EndpointSpec::ToString() const {
  if (transport == Transport::kStdio) return "stdio:" + command;
  return "tcp:" + host + ":" + std::to_string(port);
}

BackendConnection::BackendConnection(std::unique_ptr<idard::Transport> transport,
                                     std::string endpoint)
    : transport_(std::move(transport)), endpoint_(std::move(endpoint)) {
  protocol::Hello hello;
  hello.mode = "client";
  const Frame reply =
      Exchange({FrameKind::kHello, protocol::EncodeHello(hello)}, "HELLO");
  if (reply.kind != FrameKind::kHello) {
    broken_ = true;
    throw ProtocolError("backend " + endpoint_ + " [HELLO]: expected HELLO, got " +
                        std::string(protocol::FrameKindName(reply.kind)));
  }
  try {
    server_hello_ = protocol::DecodeHello(reply.payload);
  } catch (const std::exception& e) {
    Fail("HELLO", e);
  }
}

void BackendConnection::Fail(std::string_view what, const std::exception& e) {
  broken_ = true;
  transport_.reset();
  if (dynamic_cast<const ProtocolError*>(&e) != nullptr) {
    throw ProtocolError("backend " + endpoint_ + " [" + std::string(what) + "]: " + e.what());
  }
  throw BackendError(endpoint_, std::string(what), e.what());
}

Frame BackendConnection::Receive(std::string_view what) {
  Frame frame;
  bool got = false;
  try {
    got = ReadFrame(*transport_, frame);
  } catch (const std::exception& e) {
    Fail(what, e);
  }
  if (!got) {
    broken_ = true;
    transport_.reset();
    throw BackendError(endpoint_, std::string(what), "connection closed by backend");
  }
  if (frame.kind == FrameKind::kError) {
    throw BackendError(endpoint_, std::string(what),
                       "backend error: " + protocol::DecodeErrorMessage(frame.payload));
  }
  return frame;
}

Frame BackendConnection::Exchange(const Frame& request, std::string_view what) {
  if (broken_) throw BackendError(endpoint_, std::string(what), "connection is closed");
  try {
    WriteFrame(*transport_, request);
  } catch (const std::exception& e) {
    Fail(what, e);
  }
  return Receive(what);
}

std::vector<Raster> BackendConnection::Upscale(const Raster& lr, int factor, int n_samples,
                                               std::uint64_t seed,
                                               const std::string& image_id) {
  std::lock_guard lock(mu_);
  if (factor < 1 || factor > 0xffff || n_samples < 1 || n_samples > 0xffff) {
    throw InvalidArgument("UPSCALE factor and n_samples must fit in u16 and be >= 1");
  }
  protocol::UpscaleRequest req{lr, static_cast<std::uint16_t>(factor),
                               static_cast<std::uint16_t>(n_samples), seed, image_id};
  std::vector<Raster> out;
  Frame first = Exchange({FrameKind::kUpscaleReq, protocol::EncodeUpscaleRequest(req)},
                         "UPSCALE");
  for (int i = 0; i < n_samples; ++i) {
    Frame frame = i == 0 ? std::move(first) : Receive("UPSCALE");
    try {
      if (frame.kind != FrameKind::kUpscaleResp) {
        throw ProtocolError("expected UPSCALE_RESP, got " +
                            std::string(protocol::FrameKindName(frame.kind)));
      }
      Raster r = protocol::DecodeRaster(frame.payload);
      if (r.height() != lr.height() * factor || r.width() != lr.width() * factor ||
          r.channels() != lr.channels()) {
        throw ProtocolError("UPSCALE_RESP raster has dims " + std::to_string(r.height()) +
                            "x" + std::to_string(r.width()) + "x" +
                            std::to_string(r.channels()) + ", expected " +
                            std::to_string(lr.height() * factor) + "x" +
                            std::to_string(lr.width() * factor) + "x" +
                            std::to_string(lr.channels()));
      }
      out.push_back(std::move(r));
    } catch (const ProtocolError& e) {
      Fail("UPSCALE", e);
    }
  }
  return out;
}

double BackendConnection::Metric(const std::string& kind, const Raster& a, const Raster& b) {
  std::lock_guard lock(mu_);
  protocol::MetricRequest req{kind, a, b};
  Frame reply = Exchange({FrameKind::kMetricReq, protocol::EncodeMetricRequest(req)},
                         "METRIC");
  try {
    if (reply.kind != FrameKind::kMetricResp) {
      throw ProtocolError("expected METRIC_RESP, got " +
                          std::string(protocol::FrameKindName(reply.kind)));
    }
    return protocol::DecodeMetricResponse(reply.payload);
  } catch (const ProtocolError& e) {
    Fail("METRIC", e);
  }
}

Backend::Backend(EndpointSpec endpoint, std::size_t max_connections,
                 std::chrono::milliseconds read_timeout)
    : name_(endpoint.ToString()), max_connections_(std::max<std::size_t>(1, max_connections)) {
  factory_ = [endpoint, read_timeout]() -> std::unique_ptr<idard::Transport> {
    if (endpoint.transport == EndpointSpec::Transport::kStdio) {
      return SpawnStdioTransport(endpoint.command, read_timeout);
    }
    return ConnectTcp(endpoint.host, endpoint.port, read_timeout);
  };
}

Backend::Backend(std::string name, TransportFactory factory, std::size_t max_connections)
    : name_(std::move(name)), factory_(std::move(factory)),
      max_connections_(std::max<std::size_t>(1, max_connections)) {}

std::unique_ptr<BackendConnection> Backend::Acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !idle_.empty() || open_ < max_connections_; });
  if (!idle_.empty()) {
    auto conn = std::move(idle_.back());
    idle_.pop_back();
    return conn;
  }
  ++open_;
  lock.unlock();
  try {
    std::unique_ptr<idard::Transport> transport;
    try {
      transport = factory_();
    } catch (const Error& e) {
      throw BackendError(name_, "CONNECT", e.what());
    }
    auto conn = std::make_unique<BackendConnection>(std::move(transport), name_);
    std::lock_guard relock(mu_);
    if (!hello_) hello_ = conn->capabilities();
    return conn;
  } catch (...) {
    std::lock_guard relock(mu_);
    --open_;
    cv_.notify_one();
    throw;
  }
}

void Backend::Release(std::unique_ptr<BackendConnection> conn) {
  std::lock_guard lock(mu_);
  if (conn->broken()) {
    --open_;
  } else {
    idle_.push_back(std::move(conn));
  }
  cv_.notify_one();
}

// Returns the connection to the pool on scope exit.
class Backend::Lease {
 public:
  explicit Lease(Backend& owner) : owner_(owner), conn_(owner.Acquire()) {}
  ~Lease() { owner_.Release(std::move(conn_)); }
  BackendConnection* operator->() { return conn_.get(); }

 private:
  Backend& owner_;
  std::unique_ptr<BackendConnection> conn_;
};

protocol::Hello Backend::Capabilities() {
  {
    std::lock_guard lock(mu_);
    if (hello_) return *hello_;
  }
  Lease lease(*this);
  return lease->capabilities();
}

std::vector<Raster> Backend::Upscale(const Raster& lr, int factor, int n_samples,
                                     std::uint64_t seed, const std::string& image_id) {
  const protocol::Hello caps = Capabilities();
  if (std::find(caps.factors.begin(), caps.factors.end(), factor) == caps.factors.end()) {
    throw BackendError(name_, "UPSCALE",
                       "factor " + std::to_string(factor) + " not declared by backend");
  }
  Lease lease(*this);
  return lease->Upscale(lr, factor, n_samples, seed, image_id);
}

double Backend::Metric(const std::string& kind, const Raster& a, const Raster& b) {
  const protocol::Hello caps = Capabilities();
  if (std::find(caps.metric_kinds.begin(), caps.metric_kinds.end(), kind) ==
      caps.metric_kinds.end()) {
    throw BackendError(name_, "METRIC", "metric kind '" + kind + "' not declared by backend");
  }
  Lease lease(*this);
  return lease->Metric(kind, a, b);
}

std::vector<int> Backend::DecomposeFactor(int factor) {
  std::vector<int> declared;
  for (auto f : Capabilities().factors) {
    if (f > 1) declared.push_back(f);
  }
  std::sort(declared.rbegin(), declared.rend());
  // Depth-first search, largest factors first.
  std::vector<int> stages;
  std::function<bool(int)> search = [&](int remaining) {
    if (remaining == 1) return true;
    for (int f : declared) {
      if (remaining % f != 0) continue;
      stages.push_back(f);
      if (search(remaining / f)) return true;
      stages.pop_back();
    }
    return false;
  };
  if (factor >= 1 && search(factor)) return stages;
  return {};
}

}  // namespace idard
