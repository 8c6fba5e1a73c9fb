#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace idard {

// SplitMix64 finaliser; used to fold stream-key components together.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t HashString(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Identifies one deterministic random stream. A key starts from
// (global seed, image id) and is refined by stage tags and indices; the
// resulting stream is independent of the order in which keys are consumed.
class StreamKey {
 public:
  StreamKey() = default;
  StreamKey(std::uint64_t global_seed, std::string image_id)
      : seed_(global_seed), image_id_(std::move(image_id)),
        state_(Mix64(Mix64(global_seed) ^ HashString(image_id_))) {}

  StreamKey With(std::string_view tag) const {
    StreamKey k = *this;
    k.state_ = Mix64(state_ ^ HashString(tag));
    k.refined_ = true;
    return k;
  }

  StreamKey With(std::uint64_t index) const {
    StreamKey k = *this;
    k.state_ = Mix64(state_ + Mix64(index ^ 0x5851f42d4c957f2dULL));
    k.refined_ = true;
    return k;
  }

  std::uint64_t global_seed() const { return seed_; }
  const std::string& image_id() const { return image_id_; }
  std::uint64_t state() const { return state_; }

  // Seed a remote backend should use: the global seed for a root key (so
  // backends see the documented (seed, image id, i) triple), otherwise the
  // refined state.
  std::uint64_t wire_seed() const { return refined_ ? state_ : seed_; }

  std::mt19937_64 Engine() const { return std::mt19937_64(state_); }

 private:
  std::uint64_t seed_ = 0;
  std::string image_id_;
  std::uint64_t state_ = Mix64(0);
  bool refined_ = false;
};

}  // namespace idard
