#include "scopegen/oracle_service.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "scopegen/errors.hpp"

namespace scopegen {

using nlohmann::json;

OracleQueue::OracleQueue(std::chrono::milliseconds lease) : lease_(lease) {}

std::uint64_t OracleQueue::submit(PendingQuery query) {
  std::lock_guard lock(mutex_);
  const std::uint64_t id = next_id_++;
  query.query_id = id;
  entries_.emplace(id, Entry{std::move(query), std::nullopt, {}});
  order_.push_back(id);
  return id;
}

std::optional<bool> OracleQueue::wait(std::uint64_t query_id, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  const bool done = answered_cv_.wait_for(lock, timeout, [&] {
    const auto it = entries_.find(query_id);
    return it == entries_.end() || it->second.verdict.has_value();
  });
  const auto it = entries_.find(query_id);
  if (!done || it == entries_.end()) return std::nullopt;
  return it->second.verdict;
}

void OracleQueue::cancel(std::uint64_t query_id) {
  std::lock_guard lock(mutex_);
  entries_.erase(query_id);
  order_.erase(std::remove(order_.begin(), order_.end(), query_id), order_.end());
  answered_cv_.notify_all();
}

std::optional<PendingQuery> OracleQueue::next() {
  std::lock_guard lock(mutex_);
  const auto now = std::chrono::steady_clock::now();
  for (std::uint64_t id : order_) {
    Entry& entry = entries_.at(id);
    if (entry.lease_until > now) continue;
    entry.lease_until = now + lease_;
    return entry.query;
  }
  return std::nullopt;
}

VerdictStatus OracleQueue::post_verdict(std::uint64_t query_id, bool admissible) {
  {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(query_id);
    if (it == entries_.end()) return VerdictStatus::not_found;
    if (it->second.verdict.has_value()) return VerdictStatus::conflict;
    it->second.verdict = admissible;
    ++answered_;
    order_.erase(std::remove(order_.begin(), order_.end(), query_id), order_.end());
  }
  answered_cv_.notify_all();
  return VerdictStatus::accepted;
}

QueueStatus OracleQueue::status() const {
  std::lock_guard lock(mutex_);
  return {order_.size(), answered_, stage_};
}

void OracleQueue::set_stage(std::string stage) {
  std::lock_guard lock(mutex_);
  stage_ = std::move(stage);
}

std::string stage_label(std::size_t stage) {
  return stage == 0 ? std::string("generation") : fmt::format("filter {}", stage);
}

RemoteHumanOracle::RemoteHumanOracle(OracleQueue& queue, std::chrono::milliseconds timeout,
                                     std::filesystem::path checkpoint)
    : queue_(queue), timeout_(timeout), checkpoint_(std::move(checkpoint)) {
  if (checkpoint_.empty()) return;
  if (std::filesystem::exists(checkpoint_)) {
    std::ifstream in(checkpoint_);
    for (const auto& r : read_ndjson(in)) {
      resumed_[{r.condition_id, r.candidate_id, r.stage}] = r.admissible;
    }
    spdlog::info("resuming from {} with {} recorded verdicts", checkpoint_.string(),
                 resumed_.size());
  }
  checkpoint_out_.open(checkpoint_, std::ios::app);
  if (!checkpoint_out_) {
    throw OracleError(fmt::format("cannot open checkpoint {}", checkpoint_.string()));
  }
}

bool RemoteHumanOracle::judge(const AdmissionQuery& query) {
  const auto key = std::make_tuple(query.condition.id, query.candidate.id, query.stage);
  if (const auto it = resumed_.find(key); it != resumed_.end()) return it->second;

  PendingQuery pending;
  pending.condition_id = query.condition.id;
  pending.candidate_id = query.candidate.id;
  pending.condition_payload = query.condition.text;
  pending.candidate_payload = payload(query.candidate);
  for (const auto& alias : query.reference.aliases) {
    if (!pending.reference_payload.empty()) pending.reference_payload += " | ";
    pending.reference_payload += payload(alias);
  }
  pending.stage = query.stage;
  pending.position = query.position;

  queue_.set_stage(stage_label(query.stage));
  const std::uint64_t id = queue_.submit(std::move(pending));
  const auto verdict = queue_.wait(id, timeout_);
  if (!verdict) {
    queue_.cancel(id);
    throw OracleTimeout(fmt::format("no verdict for query {} within {} ms", id, timeout_.count()));
  }
  {
    AdmissionRecord record;
    record.condition_id = query.condition.id;
    record.candidate_id = query.candidate.id;
    record.candidate_payload = payload(query.candidate);
    record.admissible = *verdict;
    record.source = AdmissionSource::human;
    record.stage = query.stage;
    record.position = query.position;
    std::lock_guard lock(file_mutex_);
    if (checkpoint_out_.is_open()) {
      checkpoint_out_ << to_ndjson_line(record) << '\n';
      checkpoint_out_.flush();
    }
  }
  return *verdict;
}

BindAddress resolve_bind_address(std::string_view value) {
  std::string text(value);
  if (text.empty()) {
    if (const char* env = std::getenv(kBindEnvVar); env != nullptr) text = env;
  }
  BindAddress address;
  if (text.empty()) return address;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw InvalidInput(fmt::format("bind address '{}' lacks a port", text));
  address.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), address.port);
  if (ec != std::errc{} || ptr != port.data() + port.size() || address.port < 0 ||
      address.port > 65535) {
    throw InvalidInput(fmt::format("invalid port in bind address '{}'", text));
  }
  if (address.host.empty()) address.host = "0.0.0.0";
  return address;
}

struct OracleServer::Impl {
  explicit Impl(OracleQueue& q) : queue(q) {}
  OracleQueue& queue;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

OracleServer::OracleServer(OracleQueue& queue) : impl_(std::make_unique<Impl>(queue)) {
  auto& server = impl_->server;
  OracleQueue& q = queue;
  // Without SO_REUSEPORT a second service on the same port fails loudly
  // instead of silently splitting the labeling traffic.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });

  server.Get("/queries/next", [&q](const httplib::Request&, httplib::Response& res) {
    const auto next = q.next();
    if (!next) {
      res.status = 204;
      return;
    }
    reply(res, 200,
          {{"query_id", next->query_id},
           {"condition_id", next->condition_id},
           {"candidate_id", next->candidate_id},
           {"condition_payload", next->condition_payload},
           {"candidate_payload", next->candidate_payload},
           {"reference_payload", next->reference_payload},
           {"stage", next->stage},
           {"stage_label", stage_label(next->stage)},
           {"position", next->position}});
  });

  server.Post(R"(/queries/(\d+)/verdict)", [&q](const httplib::Request& req,
                                                httplib::Response& res) {
    std::uint64_t id = 0;
    const std::string id_text = req.matches[1];
    const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc{} || ptr != id_text.data() + id_text.size()) {
      reply(res, 400, {{"error", "invalid query id"}});
      return;
    }
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("admissible") ||
        !body["admissible"].is_boolean()) {
      reply(res, 400, {{"error", "body must be {\"admissible\": true|false}"}});
      return;
    }
    const bool admissible = body["admissible"].get<bool>();
    switch (q.post_verdict(id, admissible)) {
      case VerdictStatus::accepted:
        reply(res, 200, {{"query_id", id}, {"admissible", admissible}, {"status", "accepted"}});
        break;
      case VerdictStatus::not_found:
        reply(res, 404, {{"error", "unknown query id"}, {"query_id", id}});
        break;
      case VerdictStatus::conflict:
        reply(res, 409, {{"error", "verdict already recorded"}, {"query_id", id}});
        break;
    }
  });

  server.Get("/status", [&q](const httplib::Request&, httplib::Response& res) {
    const auto s = q.status();
    reply(res, 200,
          {{"pending", s.pending}, {"answered", s.answered}, {"calibration_stage", s.calibration_stage}});
  });
}

OracleServer::~OracleServer() { stop(); }

int OracleServer::start(const BindAddress& address) {
  auto& server = impl_->server;
  if (address.port == 0) {
    port_ = server.bind_to_any_port(address.host);
  } else {
    port_ = server.bind_to_port(address.host, address.port) ? address.port : -1;
  }
  if (port_ < 0) {
    throw OracleError(fmt::format("cannot bind oracle service to {}:{}", address.host, address.port));
  }
  thread_ = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  spdlog::info("oracle service listening on {}:{}", address.host, port_);
  return port_;
}

void OracleServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace scopegen
