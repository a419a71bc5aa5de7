#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "scopegen/types.hpp"

namespace scopegen {

enum class AdmissionSource { automated, human, replay };

std::string_view to_string(AdmissionSource source);
AdmissionSource admission_source_from_string(std::string_view text);

/// One oracle verdict. `stage` is the pipeline stage that issued the query and
/// `position` the 0-based query index within that instance.
struct AdmissionRecord {
  std::uint64_t condition_id = 0;
  std::uint64_t candidate_id = 0;
  std::string candidate_payload;
  bool admissible = false;
  AdmissionSource source = AdmissionSource::automated;
  double latency_ms = 0.0;
  std::size_t stage = 0;
  std::size_t position = 0;

  bool operator==(const AdmissionRecord&) const = default;
};

struct AdmissionQuery {
  const Condition& condition;
  const Output& candidate;
  const Reference& reference;
  std::size_t stage = 0;
  std::size_t position = 0;
};

/// a(y, y^t) exact-match form: 1 iff the candidate matches any alias.
bool admit_exact(const Output& candidate, const Reference& reference);

using SimilarityFn = std::function<double(const Output&, const Output&)>;

/// 1 iff sim(candidate, alias) > tau for some alias (strict).
bool admit_threshold(const Output& candidate, const Reference& reference,
                     const SimilarityFn& similarity, double tau);

/// Admission function A with a complete audit log: every call to query()
/// appends exactly one record. Safe for concurrent queries.
class AdmissionOracle {
 public:
  virtual ~AdmissionOracle() = default;

  bool query(const AdmissionQuery& query);

  std::vector<AdmissionRecord> log() const;
  std::size_t query_count() const;
  void clear_log();

 protected:
  virtual bool judge(const AdmissionQuery& query) = 0;
  virtual AdmissionSource source() const = 0;

 private:
  mutable std::mutex mutex_;
  std::vector<AdmissionRecord> log_;
};

class ExactMatchOracle final : public AdmissionOracle {
 protected:
  bool judge(const AdmissionQuery& query) override;
  AdmissionSource source() const override { return AdmissionSource::automated; }
};

class ThresholdOracle final : public AdmissionOracle {
 public:
  ThresholdOracle(SimilarityFn similarity, double tau);

 protected:
  bool judge(const AdmissionQuery& query) override;
  AdmissionSource source() const override { return AdmissionSource::automated; }

 private:
  SimilarityFn similarity_;
  double tau_;
};

/// Re-serves verdicts keyed by (condition, candidate, stage) from a stored log.
class ReplayOracle final : public AdmissionOracle {
 public:
  explicit ReplayOracle(std::span<const AdmissionRecord> records);

  bool has(std::uint64_t condition_id, std::uint64_t candidate_id, std::size_t stage) const;

 protected:
  bool judge(const AdmissionQuery& query) override;
  AdmissionSource source() const override { return AdmissionSource::replay; }

 private:
  std::map<std::tuple<std::uint64_t, std::uint64_t, std::size_t>, bool> verdicts_;
};

/// Newline-delimited JSON, one AdmissionRecord per line.
std::string to_ndjson_line(const AdmissionRecord& record);
AdmissionRecord parse_ndjson_line(std::string_view line);
void write_ndjson(std::ostream& out, std::span<const AdmissionRecord> records);
std::vector<AdmissionRecord> read_ndjson(std::istream& in);

}  // namespace scopegen
