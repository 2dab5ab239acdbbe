#pragma once

// CAM / CPM / DENM message types and their fixed-layout binary codec.
//
// Wire layout (all multi-byte integers big-endian):
//
//   header  : magic u8 (0x56) | version u8 (1) | msg_type u8 | station_id u32
//             | timestamp_ms u64 | payload_len u16                  = 17 bytes
//   CAM     : station_type u8 | pos_x_cm i32 | pos_y_cm i32 | speed_cms u16
//             | heading_cdeg u16                                    = 13 bytes
//   CPM     : n_sensors u8 | n * {sensor_id u8, sensor_type u8, range_dm u16}
//             | n_objects u8 | n * {object_id u16, object_class u8,
//               pos_x_cm i32, pos_y_cm i32, speed_cms i16, meas_delta_ms u16}
//   DENM    : cause_code u8 | sequence_number u16 | event_pos_x_cm i32
//             | event_pos_y_cm i32 | validity_s u16 | hop_count u8
//             | origin_station_id u32                               = 18 bytes

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopmod/geometry.hpp"

namespace coopmod::msg {

inline constexpr std::uint8_t kMagic = 0x56;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 17;
inline constexpr std::size_t kCamPayloadSize = 13;
inline constexpr std::size_t kDenmPayloadSize = 18;
inline constexpr std::size_t kSensorEntrySize = 4;
inline constexpr std::size_t kObjectEntrySize = 15;
inline constexpr std::size_t kMaxListLength = 255;

enum class MessageType : std::uint8_t { cam = 1, cpm = 2, denm = 3 };

/// ETSI station-type numbering; the robot announces itself as a pedestrian.
enum class StationType : std::uint8_t { pedestrian = 1, passenger_car = 5, road_side_unit = 15 };

inline constexpr bool is_valid_station_type(std::uint8_t raw) {
  return raw == 1 || raw == 5 || raw == 15;
}

inline constexpr std::uint8_t kSensorTypeCamera = 1;
inline constexpr std::uint8_t kCauseRoadworks = 3;

struct CamPayload {
  StationType station_type = StationType::passenger_car;
  std::int32_t pos_x_cm = 0;
  std::int32_t pos_y_cm = 0;
  std::uint16_t speed_cms = 0;
  std::uint16_t heading_cdeg = 0;  // [0, 36000)

  friend bool operator==(const CamPayload&, const CamPayload&) = default;
};

struct SensorInfo {
  std::uint8_t sensor_id = 0;
  std::uint8_t sensor_type = kSensorTypeCamera;
  std::uint16_t range_dm = 0;

  friend bool operator==(const SensorInfo&, const SensorInfo&) = default;
};

struct PerceivedObject {
  std::uint16_t object_id = 0;
  std::uint8_t object_class = static_cast<std::uint8_t>(ObjectClass::car);
  std::int32_t pos_x_cm = 0;
  std::int32_t pos_y_cm = 0;
  std::int16_t speed_cms = 0;  // negative: approaching the sensing camera
  std::uint16_t meas_delta_ms = 0;

  friend bool operator==(const PerceivedObject&, const PerceivedObject&) = default;
};

struct CpmPayload {
  std::vector<SensorInfo> sensors;
  std::vector<PerceivedObject> objects;

  friend bool operator==(const CpmPayload&, const CpmPayload&) = default;
};

struct DenmPayload {
  std::uint8_t cause_code = kCauseRoadworks;
  std::uint16_t sequence_number = 0;
  std::int32_t event_pos_x_cm = 0;
  std::int32_t event_pos_y_cm = 0;
  std::uint16_t validity_s = 0;
  std::uint8_t hop_count = 0;
  // Station that raised the event. Equals the header station_id at the
  // origin; relays keep it while writing their own id into the header.
  std::uint32_t origin_station_id = 0;

  friend bool operator==(const DenmPayload&, const DenmPayload&) = default;
};

using Payload = std::variant<CamPayload, CpmPayload, DenmPayload>;

struct Message {
  std::uint32_t station_id = 0;
  std::uint64_t timestamp_ms = 0;
  Payload payload;

  [[nodiscard]] MessageType type() const {
    return static_cast<MessageType>(payload.index() + 1);
  }
  [[nodiscard]] const CamPayload* cam() const { return std::get_if<CamPayload>(&payload); }
  [[nodiscard]] const CpmPayload* cpm() const { return std::get_if<CpmPayload>(&payload); }
  [[nodiscard]] const DenmPayload* denm() const { return std::get_if<DenmPayload>(&payload); }

  friend bool operator==(const Message&, const Message&) = default;
};

struct CodecLimits {
  std::uint8_t max_hops = 1;
};

enum class DecodeError {
  bad_magic,
  bad_version,
  unknown_type,
  truncated_payload,
  invariant_violation,
};

inline std::string_view to_string(DecodeError e) {
  switch (e) {
    case DecodeError::bad_magic: return "BadMagic";
    case DecodeError::bad_version: return "BadVersion";
    case DecodeError::unknown_type: return "UnknownType";
    case DecodeError::truncated_payload: return "TruncatedPayload";
    case DecodeError::invariant_violation: return "InvariantViolation";
  }
  return "Unknown";
}

inline std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::cam: return "CAM";
    case MessageType::cpm: return "CPM";
    case MessageType::denm: return "DENM";
  }
  return "?";
}

class InvalidMessage : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DecodeFailure : public std::runtime_error {
 public:
  explicit DecodeFailure(DecodeError code)
      : std::runtime_error(std::string(to_string(code))), code_(code) {}
  [[nodiscard]] DecodeError code() const { return code_; }

 private:
  DecodeError code_;
};

namespace detail {

inline std::optional<std::string> check(const CamPayload& cam) {
  if (!is_valid_station_type(static_cast<std::uint8_t>(cam.station_type))) {
    return "CAM station_type must be 1, 5 or 15";
  }
  if (cam.heading_cdeg >= 36000) return "CAM heading_cdeg must be < 36000";
  return std::nullopt;
}

inline std::optional<std::string> check(const CpmPayload& cpm) {
  if (cpm.sensors.size() > kMaxListLength) return "CPM sensor list longer than 255";
  if (cpm.objects.size() > kMaxListLength) return "CPM object list longer than 255";
  std::set<std::uint16_t> ids;
  for (const auto& o : cpm.objects) {
    if (!is_valid_object_class(o.object_class)) return "CPM object_class must be 1, 2 or 3";
    if (!ids.insert(o.object_id).second) return "CPM object_id repeated within one message";
  }
  return std::nullopt;
}

inline std::optional<std::string> check(const DenmPayload& denm, const CodecLimits& limits) {
  if (denm.hop_count > limits.max_hops) return "DENM hop_count exceeds max_hops";
  return std::nullopt;
}

inline std::optional<std::string> check(const Message& m, const CodecLimits& limits) {
  return std::visit(
      [&](const auto& p) -> std::optional<std::string> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DenmPayload>) {
          return check(p, limits);
        } else {
          return check(p);
        }
      },
      m.payload);
}

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = bytes - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }
  [[nodiscard]] bool ok() const { return ok_; }

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

 private:
  std::uint64_t take(std::size_t bytes) {
    if (!ok_ || remaining() < bytes) {
      ok_ = false;
      return 0;
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

inline void write_payload(Writer& w, const CamPayload& p) {
  w.u8(static_cast<std::uint8_t>(p.station_type));
  w.i32(p.pos_x_cm);
  w.i32(p.pos_y_cm);
  w.u16(p.speed_cms);
  w.u16(p.heading_cdeg);
}

inline void write_payload(Writer& w, const CpmPayload& p) {
  w.u8(static_cast<std::uint8_t>(p.sensors.size()));
  for (const auto& s : p.sensors) {
    w.u8(s.sensor_id);
    w.u8(s.sensor_type);
    w.u16(s.range_dm);
  }
  w.u8(static_cast<std::uint8_t>(p.objects.size()));
  for (const auto& o : p.objects) {
    w.u16(o.object_id);
    w.u8(o.object_class);
    w.i32(o.pos_x_cm);
    w.i32(o.pos_y_cm);
    w.i16(o.speed_cms);
    w.u16(o.meas_delta_ms);
  }
}

inline void write_payload(Writer& w, const DenmPayload& p) {
  w.u8(p.cause_code);
  w.u16(p.sequence_number);
  w.i32(p.event_pos_x_cm);
  w.i32(p.event_pos_y_cm);
  w.u16(p.validity_s);
  w.u8(p.hop_count);
  w.u32(p.origin_station_id);
}

inline std::optional<Payload> read_payload(Reader& r, MessageType type) {
  switch (type) {
    case MessageType::cam: {
      CamPayload p;
      p.station_type = static_cast<StationType>(r.u8());
      p.pos_x_cm = r.i32();
      p.pos_y_cm = r.i32();
      p.speed_cms = r.u16();
      p.heading_cdeg = r.u16();
      if (!r.ok()) return std::nullopt;
      return p;
    }
    case MessageType::cpm: {
      CpmPayload p;
      const std::uint8_t n_sensors = r.u8();
      for (std::uint8_t i = 0; i < n_sensors && r.ok(); ++i) {
        SensorInfo s;
        s.sensor_id = r.u8();
        s.sensor_type = r.u8();
        s.range_dm = r.u16();
        p.sensors.push_back(s);
      }
      const std::uint8_t n_objects = r.u8();
      for (std::uint8_t i = 0; i < n_objects && r.ok(); ++i) {
        PerceivedObject o;
        o.object_id = r.u16();
        o.object_class = r.u8();
        o.pos_x_cm = r.i32();
        o.pos_y_cm = r.i32();
        o.speed_cms = r.i16();
        o.meas_delta_ms = r.u16();
        p.objects.push_back(o);
      }
      if (!r.ok()) return std::nullopt;
      return p;
    }
    case MessageType::denm: {
      DenmPayload p;
      p.cause_code = r.u8();
      p.sequence_number = r.u16();
      p.event_pos_x_cm = r.i32();
      p.event_pos_y_cm = r.i32();
      p.validity_s = r.u16();
      p.hop_count = r.u8();
      p.origin_station_id = r.u32();
      if (!r.ok()) return std::nullopt;
      return p;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Throws InvalidMessage naming the first violated invariant.
inline void validate(const Message& m, const CodecLimits& limits = {}) {
  if (auto problem = detail::check(m, limits)) throw InvalidMessage(*problem);
}

inline std::vector<std::uint8_t> encode_message(const Message& m, const CodecLimits& limits = {}) {
  validate(m, limits);
  std::vector<std::uint8_t> body;
  detail::Writer pw(body);
  std::visit([&](const auto& p) { detail::write_payload(pw, p); }, m.payload);

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + body.size());
  detail::Writer w(out);
  w.u8(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(m.type()));
  w.u32(m.station_id);
  w.u64(m.timestamp_ms);
  w.u16(static_cast<std::uint16_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

/// Total over arbitrary input: returns the message or exactly one error class.
inline std::variant<Message, DecodeError> try_decode_message(std::span<const std::uint8_t> bytes,
                                                             const CodecLimits& limits = {}) {
  if (bytes.size() < kHeaderSize) return DecodeError::truncated_payload;
  detail::Reader r(bytes.first(kHeaderSize));
  if (r.u8() != kMagic) return DecodeError::bad_magic;
  if (r.u8() != kVersion) return DecodeError::bad_version;
  const std::uint8_t raw_type = r.u8();
  if (raw_type < 1 || raw_type > 3) return DecodeError::unknown_type;
  const auto type = static_cast<MessageType>(raw_type);

  Message m;
  m.station_id = r.u32();
  m.timestamp_ms = r.u64();
  const std::uint16_t payload_len = r.u16();

  const auto rest = bytes.subspan(kHeaderSize);
  if (rest.size() < payload_len) return DecodeError::truncated_payload;
  // Trailing bytes beyond payload_len: no valid message encodes to this input.
  if (rest.size() > payload_len) return DecodeError::invariant_violation;

  detail::Reader pr(rest);
  auto payload = detail::read_payload(pr, type);
  if (!payload) return DecodeError::truncated_payload;
  if (pr.remaining() != 0) return DecodeError::invariant_violation;
  m.payload = std::move(*payload);
  if (detail::check(m, limits)) return DecodeError::invariant_violation;
  return m;
}

inline Message decode_message(std::span<const std::uint8_t> bytes, const CodecLimits& limits = {}) {
  auto result = try_decode_message(bytes, limits);
  if (auto* e = std::get_if<DecodeError>(&result)) throw DecodeFailure(*e);
  return std::get<Message>(std::move(result));
}

// ---------------------------------------------------------------------------
// Canonical JSON form used in event logs.

inline nlohmann::json payload_to_json(const CamPayload& p) {
  return {{"station_type", static_cast<int>(p.station_type)},
          {"pos_x_cm", p.pos_x_cm},
          {"pos_y_cm", p.pos_y_cm},
          {"speed_cms", p.speed_cms},
          {"heading_cdeg", p.heading_cdeg}};
}

inline nlohmann::json payload_to_json(const CpmPayload& p) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& s : p.sensors) {
    sensors.push_back(
        {{"sensor_id", s.sensor_id}, {"sensor_type", s.sensor_type}, {"range_dm", s.range_dm}});
  }
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : p.objects) {
    objects.push_back({{"object_id", o.object_id},
                       {"object_class", o.object_class},
                       {"pos_x_cm", o.pos_x_cm},
                       {"pos_y_cm", o.pos_y_cm},
                       {"speed_cms", o.speed_cms},
                       {"meas_delta_ms", o.meas_delta_ms}});
  }
  return {{"sensors", std::move(sensors)}, {"objects", std::move(objects)}};
}

inline nlohmann::json payload_to_json(const DenmPayload& p) {
  return {{"cause_code", p.cause_code},
          {"sequence_number", p.sequence_number},
          {"event_pos_x_cm", p.event_pos_x_cm},
          {"event_pos_y_cm", p.event_pos_y_cm},
          {"validity_s", p.validity_s},
          {"hop_count", p.hop_count},
          {"origin_station_id", p.origin_station_id}};
}

inline std::size_t payload_size(const Message& m) {
  if (const auto* cpm = m.cpm()) {
    return 2 + cpm->sensors.size() * kSensorEntrySize + cpm->objects.size() * kObjectEntrySize;
  }
  return m.cam() ? kCamPayloadSize : kDenmPayloadSize;
}

inline nlohmann::json to_json(const Message& m) {
  nlohmann::json header = {{"magic", kMagic},
                           {"version", kVersion},
                           {"msg_type", static_cast<int>(m.type())},
                           {"station_id", m.station_id},
                           {"timestamp_ms", m.timestamp_ms},
                           {"payload_len", payload_size(m)}};
  nlohmann::json payload = std::visit([](const auto& p) { return payload_to_json(p); }, m.payload);
  return {{"header", std::move(header)}, {"payload", std::move(payload)}};
}

/// Inverse of to_json. Throws InvalidMessage on malformed input.
inline Message message_from_json(const nlohmann::json& j) {
  try {
    const auto& h = j.at("header");
    const auto& p = j.at("payload");
    if (h.at("magic").get<int>() != kMagic) throw InvalidMessage("bad magic");
    if (h.at("version").get<int>() != kVersion) throw InvalidMessage("bad version");
    Message m;
    m.station_id = h.at("station_id").get<std::uint32_t>();
    m.timestamp_ms = h.at("timestamp_ms").get<std::uint64_t>();
    switch (h.at("msg_type").get<int>()) {
      case 1: {
        CamPayload c;
        const auto st = p.at("station_type").get<std::uint8_t>();
        c.station_type = static_cast<StationType>(st);
        c.pos_x_cm = p.at("pos_x_cm").get<std::int32_t>();
        c.pos_y_cm = p.at("pos_y_cm").get<std::int32_t>();
        c.speed_cms = p.at("speed_cms").get<std::uint16_t>();
        c.heading_cdeg = p.at("heading_cdeg").get<std::uint16_t>();
        m.payload = c;
        break;
      }
      case 2: {
        CpmPayload c;
        for (const auto& s : p.at("sensors")) {
          c.sensors.push_back({s.at("sensor_id").get<std::uint8_t>(),
                               s.at("sensor_type").get<std::uint8_t>(),
                               s.at("range_dm").get<std::uint16_t>()});
        }
        for (const auto& o : p.at("objects")) {
          c.objects.push_back({o.at("object_id").get<std::uint16_t>(),
                               o.at("object_class").get<std::uint8_t>(),
                               o.at("pos_x_cm").get<std::int32_t>(),
                               o.at("pos_y_cm").get<std::int32_t>(),
                               o.at("speed_cms").get<std::int16_t>(),
                               o.at("meas_delta_ms").get<std::uint16_t>()});
        }
        m.payload = std::move(c);
        break;
      }
      case 3: {
        DenmPayload d;
        d.cause_code = p.at("cause_code").get<std::uint8_t>();
        d.sequence_number = p.at("sequence_number").get<std::uint16_t>();
        d.event_pos_x_cm = p.at("event_pos_x_cm").get<std::int32_t>();
        d.event_pos_y_cm = p.at("event_pos_y_cm").get<std::int32_t>();
        d.validity_s = p.at("validity_s").get<std::uint16_t>();
        d.hop_count = p.at("hop_count").get<std::uint8_t>();
        d.origin_station_id = p.at("origin_station_id").get<std::uint32_t>();
        m.payload = d;
        break;
      }
      default:
        throw InvalidMessage("unknown msg_type");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidMessage(std::string("malformed message JSON: ") + e.what());
  }
}

}  // namespace coopmod::msg
