#include "scopegen/oracle.hpp"

#include <chrono>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "scopegen/errors.hpp"

namespace scopegen {

using nlohmann::json;

std::string_view to_string(AdmissionSource source) {
  switch (source) {
    case AdmissionSource::automated:
      return "automated";
    case AdmissionSource::human:
      return "human";
    case AdmissionSource::replay:
      return "replay";
  }
  return "automated";
}

AdmissionSource admission_source_from_string(std::string_view text) {
  if (text == "automated") return AdmissionSource::automated;
  if (text == "human") return AdmissionSource::human;
  if (text == "replay") return AdmissionSource::replay;
  throw InvalidInput(fmt::format("unknown admission source '{}'", text));
}

bool admit_exact(const Output& candidate, const Reference& reference) {
  for (const auto& alias : reference.aliases) {
    if (same_payload(candidate, alias)) return true;
  }
  return false;
}

bool admit_threshold(const Output& candidate, const Reference& reference,
                     const SimilarityFn& similarity, double tau) {
  for (const auto& alias : reference.aliases) {
    if (similarity(candidate, alias) > tau) return true;
  }
  return false;
}

bool AdmissionOracle::query(const AdmissionQuery& query) {
  const auto start = std::chrono::steady_clock::now();
  const bool verdict = judge(query);
  const std::chrono::duration<double, std::milli> elapsed =
      std::chrono::steady_clock::now() - start;

  AdmissionRecord record;
  record.condition_id = query.condition.id;
  record.candidate_id = query.candidate.id;
  record.candidate_payload = payload(query.candidate);
  record.admissible = verdict;
  record.source = source();
  record.latency_ms = elapsed.count();
  record.stage = query.stage;
  record.position = query.position;
  {
    std::lock_guard lock(mutex_);
    log_.push_back(std::move(record));
  }
  return verdict;
}

std::vector<AdmissionRecord> AdmissionOracle::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t AdmissionOracle::query_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

void AdmissionOracle::clear_log() {
  std::lock_guard lock(mutex_);
  log_.clear();
}

bool ExactMatchOracle::judge(const AdmissionQuery& query) {
  return admit_exact(query.candidate, query.reference);
}

ThresholdOracle::ThresholdOracle(SimilarityFn similarity, double tau)
    : similarity_(std::move(similarity)), tau_(tau) {
  if (!similarity_) throw InvalidInput("ThresholdOracle: missing similarity function");
}

bool ThresholdOracle::judge(const AdmissionQuery& query) {
  return admit_threshold(query.candidate, query.reference, similarity_, tau_);
}

ReplayOracle::ReplayOracle(std::span<const AdmissionRecord> records) {
  for (const auto& r : records) {
    verdicts_[{r.condition_id, r.candidate_id, r.stage}] = r.admissible;
  }
}

bool ReplayOracle::has(std::uint64_t condition_id, std::uint64_t candidate_id,
                       std::size_t stage) const {
  return verdicts_.contains({condition_id, candidate_id, stage});
}

bool ReplayOracle::judge(const AdmissionQuery& query) {
  const auto it = verdicts_.find({query.condition.id, query.candidate.id, query.stage});
  if (it == verdicts_.end()) {
    throw OracleError(fmt::format("replay log has no verdict for condition {} candidate {} stage {}",
                                  query.condition.id, query.candidate.id, query.stage));
  }
  return it->second;
}

std::string to_ndjson_line(const AdmissionRecord& r) {
  const json j = {{"condition_id", r.condition_id},
                  {"candidate_id", r.candidate_id},
                  {"candidate", r.candidate_payload},
                  {"admissible", r.admissible},
                  {"source", to_string(r.source)},
                  {"latency_ms", r.latency_ms},
                  {"stage", r.stage},
                  {"position", r.position}};
  return j.dump();
}

AdmissionRecord parse_ndjson_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    AdmissionRecord r;
    r.condition_id = j.at("condition_id").get<std::uint64_t>();
    r.candidate_id = j.at("candidate_id").get<std::uint64_t>();
    r.candidate_payload = j.value("candidate", std::string{});
    r.admissible = j.at("admissible").get<bool>();
    r.source = admission_source_from_string(j.value("source", std::string{"automated"}));
    r.latency_ms = j.value("latency_ms", 0.0);
    r.stage = j.value("stage", std::size_t{0});
    r.position = j.value("position", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw InvalidInput(fmt::format("malformed admission record: {}", e.what()));
  }
}

void write_ndjson(std::ostream& out, std::span<const AdmissionRecord> records) {
  for (const auto& r : records) out << to_ndjson_line(r) << '\n';
}

std::vector<AdmissionRecord> read_ndjson(std::istream& in) {
  std::vector<AdmissionRecord> out;
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_ndjson_line(line));
  }
  return out;
}

}  // namespace scopegen
