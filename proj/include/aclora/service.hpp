// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// JSON-over-HTTP serving layer. Handlers are plain functions from JSON to
// (status, JSON) so they can be exercised without a socket; bind() wires
// them onto an httplib::Server.

#pragma once

#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "aclora/audit.hpp"
#include "aclora/deployment.hpp"
#include "aclora/remote_embedder.hpp"
#include "httplib.h"
#include "json.hpp"

namespace aclora {

struct EmbedderConfig {
  std::string type = "hash";  // "hash" | "remote"
  std::size_t dim = HashEmbedder::kDefaultDim;
  std::uint64_t seed = HashEmbedder::kDefaultSeed;
  std::string url;

  std::unique_ptr<Embedder> make() const {
    if (type == "hash") return std::make_unique<HashEmbedder>(dim, seed);
    if (type == "remote") return std::make_unique<RemoteEmbedder>(url, dim);
    throw Error(ErrorCode::kInvalidArgument, "unknown embedder type '" + type + "'");
  }
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  DeploymentPaths paths;
  EmbedderConfig embedder;
  RetrievalConfig retrieval;
  std::size_t chunk_size = kDefaultChunkSize;
  bool metrics_enabled = true;
  bool persist_mutations = true;
  std::string admin_token;
  std::string console_dir;

  static constexpr const char* kEnvVar = "AC_CONFIG";

  /// Missing keys keep their defaults.
  static ServiceConfig from_json(const nlohmann::json& j) {
    ServiceConfig c;
    try {
      c.host = j.value("host", c.host);
      c.port = j.value("port", c.port);
      c.paths.store = j.value("store_path", std::string{});
      c.paths.adapters_dir = j.value("adapters_dir", std::string{});
      c.paths.permissions = j.value("permissions_path", std::string{});
      c.paths.model = j.value("model_path", std::string{});
      if (j.contains("embedder")) {
        const auto& e = j["embedder"];
        c.embedder.type = e.value("type", c.embedder.type);
        c.embedder.dim = e.value("dim", c.embedder.dim);
        c.embedder.seed = e.value("seed", c.embedder.seed);
        c.embedder.url = e.value("url", c.embedder.url);
      }
      if (j.contains("retrieval")) {
        const auto& r = j["retrieval"];
        c.retrieval.fetch_k = r.value("fetch_k", c.retrieval.fetch_k);
        c.retrieval.k = r.value("k", c.retrieval.k);
        c.retrieval.threshold = r.value("threshold", c.retrieval.threshold);
        c.retrieval.hints_enabled = r.value("hints_enabled", c.retrieval.hints_enabled);
      }
      c.chunk_size = j.value("chunk_size", c.chunk_size);
      c.metrics_enabled = j.value("metrics_enabled", c.metrics_enabled);
      c.persist_mutations = j.value("persist_mutations", c.persist_mutations);
      c.admin_token = j.value("admin_token", c.admin_token);
      c.console_dir = j.value("console_dir", c.console_dir);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
    }
    c.retrieval.validate();
    return c;
  }

  nlohmann::json to_json() const {
    return {{"host", host},
            {"port", port},
            {"store_path", paths.store.string()},
            {"adapters_dir", paths.adapters_dir.string()},
            {"permissions_path", paths.permissions.string()},
            {"model_path", paths.model.string()},
            {"embedder", {{"type", embedder.type}, {"dim", embedder.dim}, {"seed", embedder.seed}, {"url", embedder.url}}},
            {"retrieval",
             {{"fetch_k", retrieval.fetch_k},
              {"k", retrieval.k},
              {"threshold", retrieval.threshold},
              {"hints_enabled", retrieval.hints_enabled}}},
            {"chunk_size", chunk_size},
            {"metrics_enabled", metrics_enabled},
            {"persist_mutations", persist_mutations},
            {"admin_token", admin_token},
            {"console_dir", console_dir}};
  }

  static ServiceConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config is not a JSON object");
    return from_json(j);
  }

  /// Explicit path first, then $AC_CONFIG, then `fallback` if it exists.
  static std::optional<std::filesystem::path> resolve_path(const std::string& explicit_path,
                                                           const std::filesystem::path& fallback = "aclora.json") {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* env = std::getenv(kEnvVar); env && *env) return std::filesystem::path(env);
    if (std::filesystem::exists(fallback)) return fallback;
    return std::nullopt;
  }
};

/// Counters plus a TTFT histogram per active-adapter count.
/// Buckets: [0,1ms) [1,5ms) [5,25ms) [25ms,inf).
class Metrics {
 public:
  static constexpr std::array<double, 3> kBoundsMs{1.0, 5.0, 25.0};

  void record_query(std::size_t active, double ttft_ms) {
    ++queries_;
    std::size_t bucket = 0;
    while (bucket < kBoundsMs.size() && ttft_ms >= kBoundsMs[bucket]) ++bucket;
    std::lock_guard lock(mu_);
    auto& h = by_active_[active];
    ++h.counts[bucket];
    ++h.count;
    h.sum_ms += ttft_ms;
  }
  void record_error() { ++errors_; }
  void record_admin() { ++admin_; }
  void record_audit() { ++audits_; }

  nlohmann::json to_json() const {
    nlohmann::json buckets = nlohmann::json::object();
    {
      std::lock_guard lock(mu_);
      for (const auto& [active, h] : by_active_) {
        buckets[std::to_string(active)] = {{"count", h.count},
                                           {"sum_ms", h.sum_ms},
                                           {"buckets", {{"[0,1ms)", h.counts[0]},
                                                        {"[1,5ms)", h.counts[1]},
                                                        {"[5,25ms)", h.counts[2]},
                                                        {"[25ms,inf)", h.counts[3]}}}};
      }
    }
    return {{"counters",
             {{"queries_total", queries_.load()},
              {"errors_total", errors_.load()},
              {"admin_mutations_total", admin_.load()},
              {"audits_total", audits_.load()}}},
            {"ttft", {{"bucket_bounds_ms", kBoundsMs}, {"by_active_adapters", std::move(buckets)}}}};
  }

 private:
  struct Histogram {
    std::array<std::uint64_t, 4> counts{};
    std::uint64_t count = 0;
    double sum_ms = 0.0;
  };
  std::atomic<std::uint64_t> queries_{0}, errors_{0}, admin_{0}, audits_{0};
  mutable std::mutex mu_;
  std::map<std::size_t, Histogram> by_active_;
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

inline nlohmann::json outcome_to_json(const QueryOutcome& o) {
  nlohmann::json active = nlohmann::json::array();
  for (const auto& a : o.active) active.push_back({{"id", a.id.str()}, {"weight", a.weight}});
  nlohmann::json hints = nlohmann::json::array();
  for (const auto& h : o.hints) hints.push_back({{"id", h.id.str()}, {"metadata", h.metadata}});
  return {{"response", {{"output", std::vector<double>(o.response.data(), o.response.data() + o.response.size())},
                        {"trace", o.trace}}},
          {"active", std::move(active)},
          {"hints", std::move(hints)},
          {"timing", {{"embed_ms", o.timing.embed_ms}, {"retrieve_ms", o.timing.retrieve_ms}, {"ttft_ms", o.timing.ttft_ms}}}};
}

/// Serving state. Queries share a reader lock; admin mutations take it
/// exclusively, so every query sees one consistent pre- or post-mutation
/// snapshot of store, adapters and permissions.
class Service {
 public:
  using Clock = Pipeline::Clock;

  Service(ServiceConfig config, Deployment deployment)
      : config_(std::move(config)), d_(std::move(deployment)), pipeline_(d_.pipeline()) {
    config_.retrieval.validate();
  }

  /// Loads every component from the configured paths; all must be readable.
  static std::unique_ptr<Service> open(const ServiceConfig& config) {
    for (const auto& p : {config.paths.store, config.paths.permissions, config.paths.model, config.paths.adapters_dir}) {
      if (p.empty() || !std::filesystem::exists(p)) {
        throw Error(ErrorCode::kIo, "configured path missing: '" + p.string() + "'");
      }
    }
    return std::make_unique<Service>(config, Deployment::load(config.paths, config.embedder.make()));
  }

  const ServiceConfig& config() const { return config_; }
  const Metrics& metrics() const { return metrics_; }
  Deployment& deployment() { return d_; }

  HttpReply query(const std::string& raw_body, Clock::time_point received = Clock::now()) {
    const auto body = nlohmann::json::parse(raw_body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return fail(400, "body must be a JSON object");
    if (!body.contains("user_id") || !body["user_id"].is_string()) return fail(400, "user_id (string) required");
    if (!body.contains("query") || !body["query"].is_string()) return fail(400, "query (string) required");
    RetrievalConfig cfg = config_.retrieval;
    try {
      if (body.contains("k")) cfg.k = body["k"].get<std::size_t>();
      if (body.contains("fetch_k")) cfg.fetch_k = body["fetch_k"].get<std::size_t>();
      if (body.contains("threshold")) cfg.threshold = body["threshold"].get<double>();
      if (body.contains("hints_enabled")) cfg.hints_enabled = body["hints_enabled"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      return fail(400, std::string("bad retrieval override: ") + e.what());
    }
    try {
      cfg.validate();
    } catch (const Error& e) {
      return fail(422, e.what());
    }
    try {
      QueryOutcome outcome;
      {
        std::shared_lock lock(mu_);
        outcome = pipeline_.query(body["user_id"].get<std::string>(), body["query"].get<std::string>(), cfg, received);
      }
      nlohmann::json out = outcome_to_json(outcome);
      // First response byte: everything up to handing the body to the socket.
      outcome.timing.ttft_ms = std::chrono::duration<double, std::milli>(Clock::now() - received).count();
      out["timing"]["ttft_ms"] = outcome.timing.ttft_ms;
      if (config_.metrics_enabled) metrics_.record_query(outcome.active.size(), outcome.timing.ttft_ms);
      return {200, std::move(out)};
    } catch (const Error& e) {
      return fail(e.code() == ErrorCode::kEmptyInput ? 400 : 500, e.what());
    }
  }

  /// Registers an adapter and ingests its documents. 409 on a duplicate id,
  /// 422 when it does not fit the reference model.
  HttpReply add_adapter(LowRankAdapter adapter, const std::vector<TextRecord>& documents = {}) {
    const AdapterId id = adapter.id;
    std::unique_lock lock(mu_);
    try {
      d_.adapters.register_adapter(adapter);
    } catch (const Error& e) {
      return fail(e.code() == ErrorCode::kDuplicateId ? 409 : 422, e.what());
    }
    std::size_t chunks = 0;
    try {
      for (const auto& doc : documents) {
        chunks += ingest_document(*d_.embedder, d_.store, doc.id, doc.text, id, config_.chunk_size);
      }
    } catch (const Error& e) {
      d_.store.remove_by_tag(id);
      d_.adapters.unregister(id);
      return fail(400, e.what());
    }
    if (persisting()) {
      save_adapter(adapter, config_.paths.adapters_dir / (id.str() + std::string(kAdapterExtension)));
      if (chunks) d_.store.save(config_.paths.store);
    }
    metrics_.record_admin();
    return {201, {{"id", id.str()}, {"chunks", chunks}}};
  }

  HttpReply add_adapter_request(const httplib::Request& req) {
    try {
      std::vector<std::uint8_t> bytes;
      std::vector<TextRecord> docs;
      auto parse_docs = [&docs](const nlohmann::json& j) {
        for (const auto& d : j) {
          docs.push_back({d.value("doc_id", std::string("doc") + std::to_string(docs.size())), d.at("text").get<std::string>()});
        }
      };
      if (req.is_multipart_form_data()) {
        if (!req.has_file("adapter")) return fail(400, "multipart body needs an 'adapter' file field");
        const auto& content = req.get_file_value("adapter").content;
        bytes.assign(content.begin(), content.end());
        if (req.has_file("documents")) parse_docs(nlohmann::json::parse(req.get_file_value("documents").content));
      } else if (req.get_header_value("Content-Type").starts_with("application/json")) {
        const auto body = nlohmann::json::parse(req.body);
        if (!body.contains("path")) return fail(400, "JSON body needs 'path' to an .acadapter file");
        bytes = detail::read_file(body["path"].get<std::string>());
        if (body.contains("documents")) parse_docs(body["documents"]);
      } else {
        bytes.assign(req.body.begin(), req.body.end());
      }
      return add_adapter(decode_adapter(bytes), docs);
    } catch (const Error& e) {
      return fail(400, e.what());
    } catch (const nlohmann::json::exception& e) {
      return fail(400, e.what());
    }
  }

  /// Unregisters the adapter and drops its chunks from the store.
  HttpReply delete_adapter(const std::string& id_text) {
    if (!AdapterId::is_valid(id_text)) return fail(404, "unknown adapter '" + id_text + "'");
    const AdapterId id(id_text);
    std::unique_lock lock(mu_);
    try {
      d_.adapters.unregister(id);
    } catch (const Error& e) {
      return fail(404, e.what());
    }
    const std::size_t removed = d_.store.remove_by_tag(id);
    if (persisting()) {
      std::filesystem::remove(config_.paths.adapters_dir / (id.str() + std::string(kAdapterExtension)));
      d_.store.save(config_.paths.store);
    }
    metrics_.record_admin();
    return {200, {{"id", id.str()}, {"removed_chunks", removed}}};
  }

  HttpReply put_permissions(const std::string& user_id, const std::string& raw_body) {
    const auto body = nlohmann::json::parse(raw_body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("grants") || !body["grants"].is_array()) {
      return fail(400, "body must be {\"grants\": [adapter ids]}");
    }
    GrantSet grants;
    try {
      for (const auto& g : body["grants"]) grants.insert(AdapterId(g.get<std::string>()));
    } catch (const std::exception& e) {
      return fail(400, e.what());
    }
    std::unique_lock lock(mu_);
    d_.permissions.set_permissions(user_id, grants);
    if (persisting()) PermissionRegistry::append(config_.paths.permissions, user_id, grants);
    metrics_.record_admin();
    nlohmann::json list = nlohmann::json::array();
    for (const auto& g : grants) list.push_back(g.str());
    return {200, {{"user_id", user_id}, {"grants", std::move(list)}}};
  }

  HttpReply metrics_json() const { return {200, metrics_.to_json()}; }

  /// Body: {"prediction": str, "n": int, "training": [str]?, "training_ids": [doc_id]?}.
  /// training_ids name documents in the store, reassembled from their chunks.
  HttpReply audit(const std::string& raw_body) {
    const auto body = nlohmann::json::parse(raw_body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return fail(400, "body must be a JSON object");
    if (!body.contains("prediction") || !body["prediction"].is_string()) return fail(400, "prediction (string) required");
    if (!body.contains("n") || !body["n"].is_number_unsigned() || body["n"].get<std::size_t>() == 0) {
      return fail(400, "n (positive integer) required");
    }
    std::vector<TokenSequence> training;
    try {
      if (body.contains("training")) {
        for (const auto& t : body["training"]) training.push_back(tokenize(t.get<std::string>()));
      }
      if (body.contains("training_ids")) {
        std::shared_lock lock(mu_);
        for (const auto& id : body["training_ids"]) {
          TokenSequence doc;
          for (const auto& c : d_.store.chunks_for_doc(id.get<std::string>())) {
            const auto toks = tokenize(c.text);
            doc.insert(doc.end(), toks.begin(), toks.end());
          }
          training.push_back(std::move(doc));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      return fail(400, e.what());
    }
    const TokenSequence p = tokenize(body["prediction"].get<std::string>());
    if (p.empty()) return fail(400, "EmptyPrediction: prediction has no words");
    metrics_.record_audit();
    return {200, to_json(score_prediction(p, training, body["n"].get<std::size_t>()))};
  }

  /// Registers every route on `server`.
  void bind(httplib::Server& server) {
    auto send = [](httplib::Response& res, const HttpReply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Post("/v1/query", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, query(req.body, Clock::now()));
    });
    server.Post("/v1/admin/adapters", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, authorized(req) ? add_adapter_request(req) : unauthorized());
    });
    server.Delete(R"(/v1/admin/adapters/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, authorized(req) ? delete_adapter(req.matches[1]) : unauthorized());
    });
    server.Put(R"(/v1/admin/permissions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, authorized(req) ? put_permissions(req.matches[1], req.body) : unauthorized());
    });
    server.Get("/v1/metrics", [this, send](const httplib::Request&, httplib::Response& res) { send(res, metrics_json()); });
    server.Post("/v1/audit/memorization", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, audit(req.body));
    });
    if (!config_.console_dir.empty()) server.set_mount_point("/console", config_.console_dir);
  }

  static constexpr const char* kAdminHeader = "X-Admin-Token";

 private:
  bool authorized(const httplib::Request& req) const {
    return !config_.admin_token.empty() && req.get_header_value(kAdminHeader) == config_.admin_token;
  }

  HttpReply unauthorized() {
    metrics_.record_error();
    return {401, {{"error", "missing or bad admin token"}}};
  }

  HttpReply fail(int status, const std::string& message) {
    metrics_.record_error();
    return {status, {{"error", message}}};
  }

  bool persisting() const {
    return config_.persist_mutations && !config_.paths.store.empty() && !config_.paths.adapters_dir.empty() &&
           !config_.paths.permissions.empty();
  }

  ServiceConfig config_;
  Deployment d_;
  Pipeline pipeline_;
  Metrics metrics_;
  mutable std::shared_mutex mu_;
};

}  // namespace aclora
