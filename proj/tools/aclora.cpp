// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 ok, 1 usage error, 2 runtime error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "aclora/bench.hpp"
#include "aclora/service.hpp"

namespace fs = std::filesystem;
using namespace aclora;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags that override values from the config file.
struct ConfigFlags {
  std::string config;
  std::optional<std::string> host, store, adapters_dir, permissions, model, admin_token, console_dir, embedder_url;
  std::optional<int> port;
  std::optional<std::size_t> dim, k, fetch_k, chunk_size;
  std::optional<double> threshold;
  bool no_hints = false;

  void attach(CLI::App* app, bool serving) {
    app->add_option("--config", config, "config JSON (default: $AC_CONFIG, then ./aclora.json)");
    app->add_option("--store", store, ".acstore path");
    app->add_option("--adapters-dir", adapters_dir, "directory of .acadapter files");
    app->add_option("--permissions", permissions, ".acperm path");
    app->add_option("--model", model, ".acmodel path");
    app->add_option("--dim", dim, "hash embedder dimension");
    app->add_option("--embedder-url", embedder_url, "use a remote embedder at this base URL");
    app->add_option("--k", k);
    app->add_option("--fetch-k", fetch_k);
    app->add_option("--threshold", threshold);
    app->add_flag("--no-hints", no_hints);
    if (serving) {
      app->add_option("--host", host);
      app->add_option("--port", port);
      app->add_option("--admin-token", admin_token);
      app->add_option("--console-dir", console_dir, "serve static files under /console");
      app->add_option("--chunk-size", chunk_size);
    }
  }

  ServiceConfig resolve() const {
    ServiceConfig c;
    if (const auto path = ServiceConfig::resolve_path(config)) {
      c = ServiceConfig::load(*path);
      // Relative paths in the file are relative to the file.
      const fs::path base = path->parent_path();
      for (fs::path* p : {&c.paths.store, &c.paths.adapters_dir, &c.paths.permissions, &c.paths.model}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
      }
      if (!c.console_dir.empty() && fs::path(c.console_dir).is_relative()) c.console_dir = (base / c.console_dir).string();
    }
    if (host) c.host = *host;
    if (port) c.port = *port;
    if (store) c.paths.store = *store;
    if (adapters_dir) c.paths.adapters_dir = *adapters_dir;
    if (permissions) c.paths.permissions = *permissions;
    if (model) c.paths.model = *model;
    if (admin_token) c.admin_token = *admin_token;
    if (console_dir) c.console_dir = *console_dir;
    if (dim) c.embedder.dim = *dim;
    if (embedder_url) {
      c.embedder.type = "remote";
      c.embedder.url = *embedder_url;
    }
    if (k) c.retrieval.k = *k;
    if (fetch_k) c.retrieval.fetch_k = *fetch_k;
    if (threshold) c.retrieval.threshold = *threshold;
    if (no_hints) c.retrieval.hints_enabled = false;
    if (chunk_size) c.chunk_size = *chunk_size;
    try {
      c.retrieval.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_ingest(const fs::path& dir, const std::string& tag, const fs::path& store_path, std::size_t chunk_size,
               std::size_t dim, std::uint64_t seed) {
  if (!fs::is_directory(dir)) throw UsageError(dir.string() + " is not a directory");
  if (!AdapterId::is_valid(tag)) throw UsageError("invalid adapter tag '" + tag + "'");
  const HashEmbedder embedder(dim, seed);
  VectorStore store = fs::exists(store_path) ? VectorStore::load(store_path) : VectorStore(dim);
  if (store.dim() != dim) {
    throw Error(ErrorCode::kUnknownEmbedderDim,
                "store dim " + std::to_string(store.dim()) + " != --dim " + std::to_string(dim));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t docs = 0, chunks = 0;
  for (const auto& f : files) {
    const std::string text = read_text(f);
    if (tokenize(text).empty()) continue;
    chunks += ingest_document(embedder, store, f.filename().string(), text, AdapterId(tag), chunk_size);
    ++docs;
  }
  if (store_path.has_parent_path()) fs::create_directories(store_path.parent_path());
  store.save(store_path);
  std::cout << "ingested " << docs << " documents, " << chunks << " chunks; store now holds " << store.size()
            << " entries\n";
  return 0;
}

int run_serve(const ServiceConfig& config) {
  auto service = Service::open(config);
  httplib::Server server;
  service->bind(server);
  std::cerr << "aclora listening on " << config.host << ":" << config.port << "\n";
  if (!server.listen(config.host, config.port)) throw Error(ErrorCode::kIo, "cannot listen on port " + std::to_string(config.port));
  return 0;
}

int run_query(const ServiceConfig& config, const std::string& user, const std::string& text) {
  auto service = Service::open(config);
  const auto r = service->query(nlohmann::json{{"user_id", user}, {"query", text}}.dump());
  std::cout << r.body.dump(2) << "\n";
  if (r.status == 200) return 0;
  return r.status < 500 ? 1 : 2;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& s) {
  try {
    const auto dots = s.find("..");
    if (dots == std::string::npos) return {1, std::stoul(s)};
    return {std::stoul(s.substr(0, dots)), std::stoul(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw UsageError("bad adapter range '" + s + "' (expected N or LO..HI)");
  }
}

int run_bench_latency(const std::string& range, bench::LatencyOptions opt) {
  const auto [lo, hi] = parse_range(range);
  if (lo == 0 || lo > hi) throw UsageError("adapter range must satisfy 1 <= LO <= HI");
  opt.max_adapters = hi;
  const auto rows = bench::bench_latency(opt);
  std::printf("active_adapters,median_ttft_ms,p95_ttft_ms,samples\n");
  for (const auto& r : rows) {
    if (r.active_adapters < lo) continue;
    std::printf("%zu,%.6f,%.6f,%zu\n", r.active_adapters, r.median(), r.p95(), r.ttft_ms.size());
  }
  return 0;
}

// JSONL records {"topic": adapter id, "text": ..., "kind": "document" | "query"}.
std::vector<bench::SyntheticTopic> read_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<bench::SyntheticTopic> topics;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("topic") || !j.contains("text") || !j.contains("kind")) {
      throw Error(ErrorCode::kCorruptFile, path.string() + ":" + std::to_string(lineno) + ": bad corpus record");
    }
    const std::string topic = j["topic"].get<std::string>();
    auto [it, fresh] = index.try_emplace(topic, topics.size());
    if (fresh) topics.push_back({AdapterId(topic), {}, {}, {}});
    auto& t = topics[it->second];
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "document") {
      t.documents.push_back(j["text"].get<std::string>());
    } else if (kind == "query") {
      t.queries.push_back(j["text"].get<std::string>());
    } else {
      throw Error(ErrorCode::kCorruptFile, path.string() + ":" + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
  }
  return topics;
}

int run_bench_retrieval(const std::string& corpus, std::size_t dim, const RetrievalConfig& config, std::uint64_t seed) {
  auto embedder = std::make_unique<HashEmbedder>(dim);
  std::vector<bench::SyntheticTopic> topics;
  if (corpus == "synthetic") {
    bench::CorpusOptions opt;
    opt.seed = seed;
    topics = bench::make_synthetic_corpus(*embedder, opt);
  } else {
    topics = read_corpus(corpus);
  }
  auto d = bench::make_synthetic_deployment(std::move(embedder), topics);
  const auto rows = bench::evaluate_retrieval(d, bench::labeled_queries(topics), config);
  std::printf("topic,queries,hit_rate,mean_retrieved\n");
  for (const auto& r : rows) std::printf("%s,%zu,%.6f,%.6f\n", r.topic.c_str(), r.queries, r.hit_rate(), r.mean_retrieved);
  return 0;
}

std::vector<std::size_t> parse_n_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      const std::size_t n = std::stoul(part);
      if (n == 0) throw UsageError("n must be positive");
      out.push_back(n);
    } catch (const std::logic_error&) {
      throw UsageError("bad --n list '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty --n list");
  return out;
}

int run_audit(const fs::path& pred, const fs::path& train, const std::string& n_list, bool as_json,
              std::size_t workers) {
  const auto reports = audit_corpus(read_text_records(pred), read_text_records(train), parse_n_list(n_list), workers);
  if (as_json) {
    for (const auto& r : reports) std::cout << to_json(r).dump() << "\n";
  } else {
    write_audit_csv(std::cout, reports);
  }
  return 0;
}

// Writes a small demo deployment plus a config file into `dir`.
int run_init(const fs::path& dir, std::size_t dim) {
  auto embedder = std::make_unique<HashEmbedder>(dim);
  bench::CorpusOptions opt;
  opt.words_per_topic = std::clamp<std::size_t>(dim / (2 * opt.topics), 1, opt.words_per_topic);
  const auto topics = bench::make_synthetic_corpus(*embedder, opt);
  auto d = bench::make_synthetic_deployment(std::move(embedder), topics);
  d.permissions.set_permissions("alice", {AdapterId("topic0"), AdapterId("topic1")});
  d.permissions.set_permissions("bob", {AdapterId("topic2")});
  ServiceConfig c;
  c.paths = DeploymentPaths{"docs.acstore", "adapters", "users.acperm", "reference.acmodel"};
  c.embedder.dim = dim;
  c.admin_token = "change-me";
  d.save(DeploymentPaths::under(dir));
  std::ofstream(dir / "aclora.json") << c.to_json().dump(2) << "\n";
  std::ofstream q(dir / "sample_queries.txt");
  for (const auto& t : topics) q << t.adapter.str() << "\t" << t.queries.front() << "\n";
  std::cout << "wrote demo deployment to " << dir.string() << " (" << topics.size() << " adapters, users alice, bob)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aclora: access-control-aware low-rank adapter serving"};
  app.require_subcommand(1);

  ConfigFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve_flags.attach(serve, true);

  std::string ingest_dir, ingest_tag, ingest_store;
  std::size_t ingest_chunk = kDefaultChunkSize, ingest_dim = HashEmbedder::kDefaultDim;
  std::uint64_t ingest_seed = HashEmbedder::kDefaultSeed;
  auto* ingest = app.add_subcommand("ingest", "chunk, embed and store every file of a directory");
  ingest->add_option("dir", ingest_dir, "documents directory")->required();
  ingest->add_option("--tag", ingest_tag, "adapter id the documents belong to")->required();
  ingest->add_option("--store", ingest_store, ".acstore path (created if absent)")->required();
  ingest->add_option("--chunk-size", ingest_chunk)->check(CLI::PositiveNumber);
  ingest->add_option("--dim", ingest_dim)->check(CLI::PositiveNumber);
  ingest->add_option("--seed", ingest_seed);

  ConfigFlags query_flags;
  std::string query_user, query_text;
  auto* query = app.add_subcommand("query", "run one query against persisted state");
  query_flags.attach(query, false);
  query->add_option("--user", query_user)->required();
  query->add_option("--text", query_text)->required();

  auto* bench_cmd = app.add_subcommand("bench", "benchmarks (CSV on stdout)");
  bench_cmd->require_subcommand(1);
  std::string latency_range;
  bench::LatencyOptions latency;
  auto* bench_latency = bench_cmd->add_subcommand("latency", "TTFT against active adapter count");
  bench_latency->add_option("--adapters", latency_range, "N or LO..HI")->required();
  bench_latency->add_option("--reps", latency.reps);
  bench_latency->add_option("--warmup", latency.warmup);
  bench_latency->add_option("--dim", latency.dim)->check(CLI::PositiveNumber);
  bench_latency->add_option("--hidden", latency.hidden)->check(CLI::PositiveNumber);
  bench_latency->add_option("--rank", latency.rank)->check(CLI::PositiveNumber);
  bench_latency->add_option("--seed", latency.seed);

  std::string corpus;
  std::size_t retrieval_dim = HashEmbedder::kDefaultDim;
  std::uint64_t retrieval_seed = 1;
  RetrievalConfig retrieval;
  auto* bench_retrieval = bench_cmd->add_subcommand("retrieval", "per-topic retrieval hit rate");
  bench_retrieval->add_option("--corpus", corpus, "'synthetic' or a JSONL corpus")->required();
  bench_retrieval->add_option("--dim", retrieval_dim)->check(CLI::PositiveNumber);
  bench_retrieval->add_option("--fetch-k", retrieval.fetch_k);
  bench_retrieval->add_option("--k", retrieval.k);
  bench_retrieval->add_option("--seed", retrieval_seed);

  std::string audit_pred, audit_train, audit_n = "8,12,15,18";
  bool audit_json = false;
  std::size_t audit_workers = 1;
  auto* audit_cmd = app.add_subcommand("audit", "verbatim overlap between predictions and training text");
  audit_cmd->add_option("--pred", audit_pred, "JSONL {\"id\",\"text\"}")->required();
  audit_cmd->add_option("--train", audit_train, "JSONL {\"id\",\"text\"}")->required();
  audit_cmd->add_option("--n", audit_n, "comma-separated minimum lengths");
  audit_cmd->add_flag("--json", audit_json, "JSON lines instead of CSV");
  audit_cmd->add_option("--workers", audit_workers)->check(CLI::PositiveNumber);

  std::string init_dir;
  std::size_t init_dim = HashEmbedder::kDefaultDim;
  auto* init = app.add_subcommand("init", "write a demo deployment and config");
  init->add_option("dir", init_dir)->required();
  init->add_option("--dim", init_dim)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*serve) return run_serve(serve_flags.resolve());
    if (*ingest) return run_ingest(ingest_dir, ingest_tag, ingest_store, ingest_chunk, ingest_dim, ingest_seed);
    if (*query) return run_query(query_flags.resolve(), query_user, query_text);
    if (*bench_latency) return run_bench_latency(latency_range, latency);
    if (*bench_retrieval) {
      try {
        retrieval.validate();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      return run_bench_retrieval(corpus, retrieval_dim, retrieval, retrieval_seed);
    }
    if (*audit_cmd) return run_audit(audit_pred, audit_train, audit_n, audit_json, audit_workers);
    if (*init) return run_init(init_dir, init_dim);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
