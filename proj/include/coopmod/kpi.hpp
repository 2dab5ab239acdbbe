#pragma once

// Scenario-level and communication indicators computed from an event log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopmod/sim.hpp"

namespace coopmod::kpi {

/// A metric value, or empty when the log has no events of its class.
struct Metric {
  std::optional<double> value;
  std::size_t samples = 0;
  bool open_interval = false;  // an interval was still open at the end of the log

  [[nodiscard]] bool empty() const { return !value.has_value(); }
};

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
  bool open = false;
};

struct VehicleStats {
  std::uint32_t id = 0;
  double tracked_duration_s = 0.0;
  double path_length_m = 0.0;
  double mean_speed_ms = 0.0;
};

struct KpiReport {
  Metric ari_igg_s;
  Metric vw_ipg_s;
  Metric cpm_latency_s;
  Metric vw_zod_time_s;
  Metric ari_stop_time_s;
  Metric rsu_ipg_s;
  Metric first_detection_mean_m;
  Metric first_detection_std_m;
  std::optional<VehicleStats> subject;
  std::map<std::string, std::size_t> counts;  // records per event type
};

/// Who the indicators are about. Unset ids fall back to the log header.
struct Subjects {
  std::optional<std::uint32_t> robot_id;
  std::optional<std::uint32_t> vehicle_id;
  std::optional<std::uint32_t> infra_id;
  std::optional<std::uint32_t> rsu_id;
};

namespace detail {

inline std::optional<std::uint32_t> header_id(const sim::EventLog& log, const char* key) {
  auto it = log.header.find(key);
  if (it == log.header.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0) return std::nullopt;
  return it->get<std::uint32_t>();
}

inline double duration(const sim::EventLog& log) {
  if (auto it = log.header.find("duration_s"); it != log.header.end() && it->is_number()) {
    return it->get<double>();
  }
  return log.records.empty() ? 0.0 : log.records.back().time_s;
}

/// Mean consecutive gap of a time series.
inline Metric mean_gap(std::vector<double> times) {
  Metric m;
  std::sort(times.begin(), times.end());
  if (times.size() < 2) return m;
  m.samples = times.size() - 1;
  m.value = (times.back() - times.front()) / static_cast<double>(m.samples);
  return m;
}

inline bool is_msg(const sim::EventRecord& r, const char* type, std::uint32_t from) {
  return r.payload.value("msg_type", "") == type && r.payload.value("from", 0u) == from;
}

inline Metric interval_total(const std::vector<Interval>& intervals) {
  Metric m;
  if (intervals.empty()) return m;
  double total = 0.0;
  for (const auto& i : intervals) {
    total += i.end_s - i.start_s;
    m.open_interval = m.open_interval || i.open;
  }
  m.samples = intervals.size();
  m.value = total;
  return m;
}

}  // namespace detail

/// Ground-truth zone occupancy intervals of one vehicle.
inline std::vector<Interval> zod_intervals(const sim::EventLog& log, std::uint32_t vehicle_id) {
  std::vector<Interval> out;
  std::optional<double> entered;
  for (const auto& r : log.records) {
    if (r.actor_id != vehicle_id) continue;
    if (r.type == sim::EventType::zod_enter && !entered) entered = r.time_s;
    if (r.type == sim::EventType::zod_exit && entered) {
      out.push_back({*entered, r.time_s, false});
      entered.reset();
    }
  }
  if (entered) out.push_back({*entered, std::max(*entered, detail::duration(log)), true});
  return out;
}

/// Intervals during which the robot's decision mode was DANGER.
inline std::vector<Interval> danger_intervals(const sim::EventLog& log, std::uint32_t robot_id) {
  std::vector<Interval> out;
  bool in_danger = false;
  double since = 0.0;
  for (const auto& r : log.records) {
    if (r.type != sim::EventType::decision || r.actor_id != robot_id) continue;
    const bool danger = r.payload.value("mode", "") == "DANGER";
    if (danger && !in_danger) since = r.time_s;
    if (!danger && in_danger) out.push_back({since, r.time_s, false});
    in_danger = danger;
  }
  if (in_danger) out.push_back({since, std::max(since, detail::duration(log)), true});
  return out;
}

/// Times of decision records carrying a STOP action.
inline std::vector<double> stop_commands(const sim::EventLog& log, std::uint32_t robot_id) {
  std::vector<double> out;
  for (const auto& r : log.records) {
    if (r.type == sim::EventType::decision && r.actor_id == robot_id &&
        r.payload.value("action", "") == "STOP") {
      out.push_back(r.time_s);
    }
  }
  return out;
}

inline KpiReport compute(const sim::EventLog& log, const Subjects& who = {}) {
  KpiReport rep;
  const auto robot = who.robot_id ? who.robot_id : detail::header_id(log, "robot_id");
  const auto infra = who.infra_id ? who.infra_id : detail::header_id(log, "infra_id");
  const auto rsu = who.rsu_id ? who.rsu_id : detail::header_id(log, "rsu_id");
  const auto vehicle = who.vehicle_id;

  std::vector<double> robot_cams;
  std::vector<double> vehicle_cam_rx;
  std::vector<double> rsu_rx;
  std::map<std::uint64_t, double> cpm_generated;
  std::vector<double> cpm_latencies;
  std::vector<double> first_detections;

  for (const auto& r : log.records) {
    ++rep.counts[std::string(sim::to_string(r.type))];
    switch (r.type) {
      case sim::EventType::cam_gen:
        if (robot && r.actor_id == *robot) robot_cams.push_back(r.time_s);
        break;
      case sim::EventType::cpm_gen:
        if (infra && r.actor_id == *infra) cpm_generated[r.payload.value("cpm_id", std::uint64_t{0})] = r.time_s;
        break;
      case sim::EventType::msg_rx: {
        if (!robot || r.actor_id != *robot) break;
        if (vehicle && detail::is_msg(r, "CAM", *vehicle)) vehicle_cam_rx.push_back(r.time_s);
        if (rsu && detail::is_msg(r, "DENM", *rsu) && r.payload.value("hop_count", 0) == 0) {
          rsu_rx.push_back(r.time_s);
        }
        if (infra && detail::is_msg(r, "CPM", *infra)) {
          auto it = cpm_generated.find(r.payload.value("cpm_id", std::uint64_t{0}));
          if (it != cpm_generated.end()) cpm_latencies.push_back(r.time_s - it->second);
        }
        break;
      }
      case sim::EventType::detection:
        if (r.payload.value("first", false)) first_detections.push_back(r.payload.value("est_distance_m", 0.0));
        break;
      default:
        break;
    }
  }

  rep.ari_igg_s = detail::mean_gap(robot_cams);
  rep.vw_ipg_s = detail::mean_gap(vehicle_cam_rx);
  rep.rsu_ipg_s = detail::mean_gap(rsu_rx);
  if (!cpm_latencies.empty()) {
    double sum = 0.0;
    for (double l : cpm_latencies) sum += l;
    rep.cpm_latency_s.samples = cpm_latencies.size();
    rep.cpm_latency_s.value = sum / static_cast<double>(cpm_latencies.size());
  }
  if (vehicle) rep.vw_zod_time_s = detail::interval_total(zod_intervals(log, *vehicle));
  if (robot) {
    rep.ari_stop_time_s = detail::interval_total(danger_intervals(log, *robot));
    if (rep.ari_stop_time_s.empty()) rep.ari_stop_time_s.value = 0.0;
  }

  if (!first_detections.empty()) {
    const double n = static_cast<double>(first_detections.size());
    double sum = 0.0;
    for (double d : first_detections) sum += d;
    const double mean = sum / n;
    rep.first_detection_mean_m = {mean, first_detections.size(), false};
    if (first_detections.size() > 1) {
      double ss = 0.0;
      for (double d : first_detections) ss += (d - mean) * (d - mean);
      rep.first_detection_std_m = {std::sqrt(ss / (n - 1.0)), first_detections.size(), false};
    }
  }

  if (vehicle && log.header.contains("entities")) {
    for (const auto& e : log.header["entities"]) {
      if (e.value("id", 0u) != *vehicle) continue;
      rep.subject = VehicleStats{*vehicle, e.value("tracked_duration_s", 0.0), e.value("path_length_m", 0.0),
                                 e.value("mean_speed_ms", 0.0)};
    }
  }
  return rep;
}

inline nlohmann::json to_json(const Metric& m) {
  return {{"value", m.value ? nlohmann::json(*m.value) : nlohmann::json(nullptr)},
          {"samples", m.samples},
          {"open_interval", m.open_interval},
          {"empty", m.empty()}};
}

inline nlohmann::json to_json(const KpiReport& r) {
  nlohmann::json j = {{"ari_igg_s", to_json(r.ari_igg_s)},
                      {"vw_ipg_s", to_json(r.vw_ipg_s)},
                      {"cpm_latency_s", to_json(r.cpm_latency_s)},
                      {"vw_zod_time_s", to_json(r.vw_zod_time_s)},
                      {"ari_stop_time_s", to_json(r.ari_stop_time_s)},
                      {"rsu_ipg_s", to_json(r.rsu_ipg_s)},
                      {"first_detection_mean_m", to_json(r.first_detection_mean_m)},
                      {"first_detection_std_m", to_json(r.first_detection_std_m)},
                      {"counts", r.counts}};
  if (r.subject) {
    j["subject"] = {{"id", r.subject->id},
                    {"tracked_duration_s", r.subject->tracked_duration_s},
                    {"path_length_m", r.subject->path_length_m},
                    {"mean_speed_ms", r.subject->mean_speed_ms}};
  }
  return j;
}

/// Two-column (Metric, Value) table; empty metrics print as "n/a".
inline std::string to_csv(const KpiReport& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  auto row = [&](const char* name, const Metric& m) {
    out << name << ',';
    if (m.value) {
      out << *m.value;
    } else {
      out << "n/a";
    }
    out << '\n';
  };
  out << "Metric,Value\n";
  row("ARI IGG", r.ari_igg_s);
  row("VW IPG", r.vw_ipg_s);
  row("CPM Latency", r.cpm_latency_s);
  row("VW ZoD Time", r.vw_zod_time_s);
  row("ARI STOP Time", r.ari_stop_time_s);
  if (!r.rsu_ipg_s.empty()) row("RSU IPG", r.rsu_ipg_s);
  return out.str();
}

}  // namespace coopmod::kpi
