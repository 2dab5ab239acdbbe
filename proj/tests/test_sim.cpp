#include <catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "coopmod/kpi.hpp"
#include "coopmod/sim.hpp"

using namespace coopmod;
using namespace coopmod::sim;
using Catch::Matchers::WithinAbs;

namespace {

const std::string kDir = COOPMOD_SCENARIO_DIR;

Scenario single_pass(bool v2x) {
  Scenario sc;
  sc.name = "single_pass";
  sc.duration_s = 40.0;
  sc.rng_seed = 5;
  sc.infra = default_infra(-24.0);
  Vehicle v;
  v.id = 11;
  v.station_id = v2x ? 11 : 0;
  v.trajectory.push_back({0.0, -200.0, 10.0, 0.0});
  sc.entities.push_back(v);
  sc.merging.windows.push_back({5.0, 40.0, 5.0});
  return sc;
}

std::size_t count(const EventLog& log, EventType t) {
  std::size_t n = 0;
  for (const auto& r : log.records) n += r.type == t;
  return n;
}

}  // namespace

TEST_CASE("same scenario and seed give byte-identical logs") {
  const auto sc = load_scenario(kDir + "/rotterdam_run.json");
  CHECK(run(sc).log.to_jsonl() == run(sc).log.to_jsonl());
  CHECK(run(sc, {.seed = 43}).log.to_jsonl() != run(sc).log.to_jsonl());
}

TEST_CASE("no traffic means PASS throughout") {
  const auto result = run(load_scenario(kDir + "/idle.json"));
  std::size_t decisions = 0;
  for (const auto& r : result.log.records) {
    if (r.type != EventType::decision) continue;
    ++decisions;
    REQUIRE(r.payload["action"] == "PASS");
    REQUIRE(r.payload["mode"] == "SAFE");
  }
  CHECK(decisions == 26);  // t = 0, 0.2, ..., 5.0
  CHECK(count(result.log, EventType::actuation) == 0);
  CHECK(count(result.log, EventType::cam_gen) == 6);
}

TEST_CASE("a camera-only approach gives one STOP and one release") {
  const auto log = run(single_pass(false)).log;
  CHECK(kpi::stop_commands(log, 100).size() == 1);
  const auto danger = kpi::danger_intervals(log, 100);
  REQUIRE(danger.size() == 1);
  CHECK_FALSE(danger[0].open);
  const auto zod = kpi::zod_intervals(log, 11);
  REQUIRE(zod.size() == 1);
  CHECK(danger[0].start_s <= zod[0].start_s);
  CHECK(danger[0].end_s >= zod[0].end_s);
  CHECK(count(log, EventType::cam_gen) > 0);
}

TEST_CASE("no STOP without a merging road user") {
  auto sc = single_pass(true);
  sc.merging.windows.clear();
  const auto log = run(sc).log;
  CHECK(kpi::stop_commands(log, 100).empty());
  CHECK(kpi::danger_intervals(log, 100).empty());
}

TEST_CASE("every reception matches an earlier transmission") {
  auto sc = load_scenario(kDir + "/rotterdam_run.json");
  sc.channel.loss_prob = 0.2;
  const auto log = run(sc).log;
  std::map<std::uint64_t, std::pair<double, std::size_t>> sent;
  std::set<std::pair<std::uint64_t, std::uint32_t>> received;
  double last = 0.0;
  for (const auto& r : log.records) {
    REQUIRE(r.time_s >= last);
    last = r.time_s;
    if (r.type == EventType::msg_tx) {
      sent[r.payload["tx_id"].get<std::uint64_t>()] = {r.time_s, r.payload["receivers"].get<std::size_t>()};
    }
    if (r.type == EventType::msg_rx) {
      const auto id = r.payload["tx_id"].get<std::uint64_t>();
      REQUIRE(sent.contains(id));
      REQUIRE(r.time_s > sent[id].first);
      REQUIRE(received.insert({id, r.actor_id}).second);
    }
  }
  std::map<std::uint64_t, std::size_t> per_tx;
  for (const auto& [id, who] : received) ++per_tx[id];
  for (const auto& [id, n] : per_tx) REQUIRE(n <= sent[id].second);
}

TEST_CASE("zone events alternate per vehicle") {
  const auto log = run(load_scenario(kDir + "/rotterdam_run.json")).log;
  bool inside = false;
  std::size_t events = 0;
  for (const auto& r : log.records) {
    if (r.actor_id != 7) continue;
    if (r.type == EventType::zod_enter) {
      REQUIRE_FALSE(inside);
      inside = true;
      ++events;
    } else if (r.type == EventType::zod_exit) {
      REQUIRE(inside);
      inside = false;
      ++events;
    }
  }
  CHECK(events == 2);
}

TEST_CASE("log header carries ground truth") {
  const auto log = run(load_scenario(kDir + "/rotterdam_run.json")).log;
  CHECK(log.header["robot_id"] == 100);
  CHECK(log.header["infra_id"] == 200);
  const auto& e = log.header["entities"][0];
  CHECK(e["id"] == 7);
  CHECK(e["stopped"] == true);
  CHECK_THAT(e["tracked_duration_s"].get<double>(), WithinAbs(19.82, 1e-9));
  CHECK_THAT(e["path_length_m"].get<double>(), WithinAbs(185.5, 0.01));
}

TEST_CASE("log survives a write/read round trip") {
  const auto log = run(load_scenario(kDir + "/rotterdam_run.json")).log;
  std::istringstream in(log.to_jsonl());
  const auto back = EventLog::read_jsonl(in);
  CHECK(back.records.size() == log.records.size());
  CHECK(back.to_jsonl() == log.to_jsonl());
}

TEST_CASE("series rows follow the trajectory") {
  const auto result = run(load_scenario(kDir + "/rotterdam_run.json"), {.collect_series = true});
  REQUIRE_FALSE(result.series.empty());
  for (const auto& row : result.series) {
    REQUIRE(row.vehicle_id == 7);
  }
  std::ostringstream csv;
  write_series_csv(csv, result.series);
  CHECK(csv.str().rfind("time_s,", 0) == 0);
}
