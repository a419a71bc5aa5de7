#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "scopegen/calibrator.hpp"
#include "scopegen/errors.hpp"
#include "scopegen/oracle_service.hpp"
#include "scopegen/world.hpp"

using namespace scopegen;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

/// A labeler session that answers over HTTP by exact match on the payloads
/// it is shown, optionally going quiet after `limit` answers.
class ScriptedLabeler {
 public:
  ScriptedLabeler(int port, std::size_t limit = SIZE_MAX)
      : client_("127.0.0.1", port), limit_(limit), thread_([this] { run(); }) {}
  ~ScriptedLabeler() { finish(); }

  /// Stops polling and returns the number of verdicts posted. The last POST
  /// may still be in flight when the calibrator wakes up, hence the join.
  std::size_t finish() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    return answered_;
  }

 private:
  void run() {
    while (!stop_) {
      if (answered_ >= limit_) {
        std::this_thread::sleep_for(2ms);
        continue;
      }
      auto res = client_.Get("/queries/next");
      if (!res || res->status != 200) {
        std::this_thread::sleep_for(1ms);
        continue;
      }
      const auto q = json::parse(res->body);
      const auto candidate = q["candidate_payload"].get<std::string>();
      std::istringstream refs(q["reference_payload"].get<std::string>());
      bool match = false;
      for (std::string alias; std::getline(refs, alias, '|');) {
        const auto begin = alias.find_first_not_of(' ');
        const auto end = alias.find_last_not_of(' ');
        if (begin != std::string::npos && alias.substr(begin, end - begin + 1) == candidate) match = true;
      }
      const auto path = "/queries/" + std::to_string(q["query_id"].get<std::uint64_t>()) + "/verdict";
      auto posted = client_.Post(path, json{{"admissible", match}}.dump(), "application/json");
      if (posted && posted->status == 200) ++answered_;
    }
  }

  httplib::Client client_;
  std::size_t limit_;
  std::atomic<std::size_t> answered_{0};
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

struct Fixture {
  std::shared_ptr<SyntheticWorld> world = std::make_shared<SyntheticWorld>(WorldParams{0.15, 0.9, 12});
  std::vector<Example> data = world->draw(180, 2024);
  CalibrationConfig config;

  Fixture() {
    config.filters = {FilterSpec::diversity(world->distance_fn(), 1.0), FilterSpec::quality()};
    config.seed = 31;
    config.budget.max = 8;
  }
};

}  // namespace

TEST_CASE("human labels over HTTP reproduce the automated calibration") {
  Fixture f;
  ExactMatchOracle automated;
  const auto expected = calibrate(f.data, f.world, automated, f.config);
  REQUIRE_FALSE(expected.rejected);

  OracleQueue queue;
  OracleServer server(queue);
  const int port = server.start({"127.0.0.1", 0});
  RemoteHumanOracle human(queue, 20s);
  CalibrationResult got;
  {
    ScriptedLabeler labeler(port);
    got = calibrate(f.data, f.world, human, f.config);
    CHECK(labeler.finish() == human.query_count());
  }
  CHECK(got == expected);
  CHECK(got.lambdas == expected.lambdas);
  CHECK(human.query_count() == automated.query_count());
  CHECK(queue.status().pending == 0);
  CHECK(queue.status().answered == human.query_count());

  // replaying the human log needs no labeler at all
  const auto log = human.log();
  ReplayOracle replay(log);
  CHECK(calibrate(f.data, f.world, replay, f.config) == expected);
  server.stop();
}

TEST_CASE("an interrupted labeling session resumes from its checkpoint") {
  Fixture f;
  ExactMatchOracle automated;
  const auto expected = calibrate(f.data, f.world, automated, f.config);
  const std::size_t total = automated.query_count();
  REQUIRE(total > 20);

  const auto dir = std::filesystem::temp_directory_path() / "scopegen-integration";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto checkpoint = dir / "verdicts.ndjson";

  OracleQueue queue;
  OracleServer server(queue);
  const int port = server.start({"127.0.0.1", 0});

  const std::size_t first_session = total / 2;
  {
    RemoteHumanOracle human(queue, 300ms, checkpoint);
    ScriptedLabeler labeler(port, first_session);
    CHECK_THROWS_AS(calibrate(f.data, f.world, human, f.config), OracleTimeout);
    CHECK(labeler.finish() == first_session);
  }
  {
    std::ifstream in(checkpoint);
    CHECK(read_ndjson(in).size() == first_session);
  }

  RemoteHumanOracle resumed(queue, 20s, checkpoint);
  CHECK(resumed.resumed_count() == first_session);
  CalibrationResult got;
  std::size_t asked = 0;
  {
    ScriptedLabeler labeler(port);
    got = calibrate(f.data, f.world, resumed, f.config);
    asked = labeler.finish();
  }
  CHECK(got == expected);
  CHECK(asked == total - first_session);
  std::ifstream in(checkpoint);
  CHECK(read_ndjson(in).size() == total);

  server.stop();
  std::filesystem::remove_all(dir);
}

TEST_CASE("NDJSON log round trip drives an identical replay") {
  Fixture f;
  ExactMatchOracle automated;
  const auto expected = calibrate(f.data, f.world, automated, f.config);
  std::stringstream io;
  const auto log = automated.log();
  write_ndjson(io, log);
  const auto records = read_ndjson(io);
  CHECK(records == log);
  ReplayOracle replay(records);
  CHECK(calibrate(f.data, f.world, replay, f.config) == expected);
  CHECK(replay.query_count() == automated.query_count());
}
