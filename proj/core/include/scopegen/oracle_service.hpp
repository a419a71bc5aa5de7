#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "scopegen/oracle.hpp"

namespace scopegen {

/// A query waiting for a human verdict, as served by GET /queries/next.
struct PendingQuery {
  std::uint64_t query_id = 0;
  std::uint64_t condition_id = 0;
  std::uint64_t candidate_id = 0;
  std::string condition_payload;
  std::string candidate_payload;
  std::string reference_payload;
  std::size_t stage = 0;
  std::size_t position = 0;
};

struct QueueStatus {
  std::size_t pending = 0;
  std::size_t answered = 0;
  std::string calibration_stage;
};

enum class VerdictStatus { accepted, not_found, conflict };

/// FIFO of outstanding human queries shared by the calibrator and the HTTP
/// service. A query handed out by next() is leased to that labeler and not
/// re-served until the lease expires.
class OracleQueue {
 public:
  explicit OracleQueue(std::chrono::milliseconds lease = std::chrono::seconds(60));

  std::uint64_t submit(PendingQuery query);
  /// Blocks until a verdict arrives or the timeout elapses.
  std::optional<bool> wait(std::uint64_t query_id, std::chrono::milliseconds timeout);
  /// Drops an unanswered query (after a timeout).
  void cancel(std::uint64_t query_id);

  std::optional<PendingQuery> next();
  VerdictStatus post_verdict(std::uint64_t query_id, bool admissible);

  QueueStatus status() const;
  void set_stage(std::string stage);

 private:
  struct Entry {
    PendingQuery query;
    std::optional<bool> verdict;
    std::chrono::steady_clock::time_point lease_until{};
  };

  std::chrono::milliseconds lease_;
  mutable std::mutex mutex_;
  std::condition_variable answered_cv_;
  std::map<std::uint64_t, Entry> entries_;
  std::deque<std::uint64_t> order_;
  std::uint64_t next_id_ = 1;
  std::size_t answered_ = 0;
  std::string stage_ = "idle";
};

/// Blocks the calibrating worker on the queue until a verdict arrives.
/// Verdicts already present in the checkpoint are served without asking;
/// new ones are appended to it as they arrive. A timeout throws OracleTimeout
/// and leaves the checkpoint ready for a resumed run.
class RemoteHumanOracle final : public AdmissionOracle {
 public:
  RemoteHumanOracle(OracleQueue& queue,
                    std::chrono::milliseconds timeout = std::chrono::minutes(10),
                    std::filesystem::path checkpoint = {});

  std::size_t resumed_count() const { return resumed_.size(); }

 protected:
  bool judge(const AdmissionQuery& query) override;
  AdmissionSource source() const override { return AdmissionSource::human; }

 private:
  OracleQueue& queue_;
  std::chrono::milliseconds timeout_;
  std::filesystem::path checkpoint_;
  std::map<std::tuple<std::uint64_t, std::uint64_t, std::size_t>, bool> resumed_;
  std::mutex file_mutex_;
  std::ofstream checkpoint_out_;
};

std::string stage_label(std::size_t stage);

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8765;
};

inline constexpr const char* kBindEnvVar = "SCOPEGEN_ORACLE_BIND";

/// "host:port" parsing; an empty value falls back to $SCOPEGEN_ORACLE_BIND,
/// then to 127.0.0.1:8765.
BindAddress resolve_bind_address(std::string_view value);

/// HTTP front end for an OracleQueue:
///   GET  /queries/next            -> 200 {query_id, condition_payload, ...} | 204
///   POST /queries/{id}/verdict    -> 200 | 400 | 404 | 409
///   GET  /status                  -> 200 {pending, answered, calibration_stage}
class OracleServer {
 public:
  explicit OracleServer(OracleQueue& queue);
  ~OracleServer();
  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  /// Binds and starts serving on a background thread; port 0 picks a free port.
  int start(const BindAddress& address);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace scopegen
