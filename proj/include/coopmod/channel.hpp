#pragma once

// Unit-disk broadcast medium with independent loss and jittered latency.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "coopmod/geometry.hpp"
#include "coopmod/messages.hpp"
#include "coopmod/random.hpp"

namespace coopmod::channel {

struct ChannelConfig {
  double comm_range_m = 150.0;
  double loss_prob = 0.0;
  double latency_base_s = 0.01;
  double latency_jitter_s = 0.005;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(comm_range_m > 0.0)) throw std::invalid_argument("comm_range_m must be > 0");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) {
      throw std::invalid_argument("loss_prob must be in [0, 1]");
    }
    // Strictly positive base latency keeps every delivery after its send.
    if (!(latency_base_s > 0.0)) throw std::invalid_argument("latency_base_s must be > 0");
    if (!(latency_jitter_s >= 0.0)) throw std::invalid_argument("latency_jitter_s must be >= 0");
  }
};

struct Receiver {
  std::uint32_t id = 0;
  Vec2 position;
};

struct Delivery {
  std::uint32_t receiver_id = 0;
  double time_s = 0.0;

  friend bool operator==(const Delivery&, const Delivery&) = default;
};

class Channel {
 public:
  explicit Channel(ChannelConfig cfg) : cfg_(cfg), rng_(cfg.rng_seed) { cfg_.validate(); }

  [[nodiscard]] const ChannelConfig& config() const { return cfg_; }

  /// Receivers are visited in id order and every one of them consumes
  /// exactly two draws (loss, jitter) whether or not it is in range, so a
  /// receiver's fate never depends on who else is listening or how far.
  std::vector<Delivery> broadcast(std::span<const std::uint8_t> bytes, Vec2 tx_pos, double tx_time,
                                  std::vector<Receiver> receivers) {
    if (std::holds_alternative<msg::DecodeError>(
            msg::try_decode_message(bytes, msg::CodecLimits{255}))) {
      throw std::invalid_argument("broadcast payload is not a decodable message");
    }
    std::sort(receivers.begin(), receivers.end(),
              [](const Receiver& a, const Receiver& b) { return a.id < b.id; });
    std::vector<Delivery> out;
    for (const auto& r : receivers) {
      const double loss_draw = rng_.uniform01();
      const double jitter_draw = rng_.uniform01();
      if (distance(tx_pos, r.position) > cfg_.comm_range_m) continue;
      if (loss_draw < cfg_.loss_prob) continue;
      out.push_back({r.id, tx_time + cfg_.latency_base_s + cfg_.latency_jitter_s * jitter_draw});
    }
    return out;
  }

 private:
  ChannelConfig cfg_;
  Rng rng_;
};

}  // namespace coopmod::channel
