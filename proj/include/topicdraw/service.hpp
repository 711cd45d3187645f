#pragma once

// HTTP backend for the exploration UI. Count building and topic training run
// as polled jobs; every other endpoint answers synchronously. Response bodies
// for similar words, condensation stats and series are produced by the same
// serializers the CLI writes to disk.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "topicdraw/condenser.hpp"
#include "topicdraw/corpus.hpp"
#include "topicdraw/count_store_io.hpp"
#include "topicdraw/diachron.hpp"
#include "topicdraw/error.hpp"
#include "topicdraw/pipeline.hpp"
#include "topicdraw/similarity.hpp"
#include "topicdraw/topics.hpp"
#include "topicdraw/window_stats.hpp"

namespace topicdraw {

struct ServiceConfig {
  std::optional<fs::path> cache_dir;
  std::size_t cache_cap = 8;     // count stores kept in memory
  std::size_t session_cap = 32;  // sessions kept before LRU eviction
  std::optional<fs::path> static_dir;
  std::optional<fs::path> stopwords;
  unsigned threads = 1;
};

enum class JobStatus { queued, running, done, failed };

inline std::string_view status_name(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "failed";
}

class Job {
 public:
  Job(std::string id, std::string stage) : id_(std::move(id)), stage_(std::move(stage)) {}

  const std::string& id() const noexcept { return id_; }
  const std::string& stage() const noexcept { return stage_; }

  void start() {
    std::lock_guard lock(mu_);
    if (status_ == JobStatus::queued) status_ = JobStatus::running;
  }

  // Progress never moves backwards.
  void advance(double fraction) {
    std::lock_guard lock(mu_);
    progress_ = std::max(progress_, std::clamp(fraction, 0.0, 1.0));
  }

  void finish(nlohmann::json result) {
    {
      std::lock_guard lock(mu_);
      if (terminal()) return;
      result_ = std::move(result);
      progress_ = 1.0;
      status_ = JobStatus::done;
    }
    cv_.notify_all();
  }

  void fail(std::string error) {
    {
      std::lock_guard lock(mu_);
      if (terminal()) return;
      error_ = std::move(error);
      status_ = JobStatus::failed;
    }
    cv_.notify_all();
  }

  void wait() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return terminal(); });
  }

  JobStatus status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  nlohmann::json to_json() const {
    std::lock_guard lock(mu_);
    nlohmann::json j = {{"id", id_}, {"stage", stage_}, {"status", status_name(status_)}, {"progress", progress_}};
    if (status_ == JobStatus::done && !result_.is_null()) j["result"] = result_;
    if (status_ == JobStatus::failed) j["error"] = error_;
    return j;
  }

 private:
  bool terminal() const { return status_ == JobStatus::done || status_ == JobStatus::failed; }

  std::string id_;
  std::string stage_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  JobStatus status_ = JobStatus::queued;
  double progress_ = 0.0;
  nlohmann::json result_;
  std::string error_;
};

// Error carrying an HTTP status and a JSON body.
class HttpError : public Error {
 public:
  HttpError(int status, nlohmann::json body)
      : Error(body.dump()), status_(status), body_(std::move(body)) {}
  int status() const noexcept { return status_; }
  const nlohmann::json& body() const noexcept { return body_; }

 private:
  int status_;
  nlohmann::json body_;
};

class Service {
 public:
  Service(CorpusHandle corpus, ServiceConfig cfg) : corpus_(std::move(corpus)), cfg_(std::move(cfg)) {
    stopwords_ = resolve_stopwords(cfg_.stopwords, false);
  }

  ~Service() {
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      workers.swap(workers_);
    }
    for (auto& t : workers)
      if (t.joinable()) t.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const Corpus& corpus() const noexcept { return *corpus_; }

  void mount(httplib::Server& server) {
    using httplib::Request;
    using httplib::Response;
    auto route = [this](auto handler) {
      return [this, handler](const Request& req, Response& res) { respond(req, res, handler); };
    };
    server.Get("/api/health", route([this](const Request&, Response& res) {
      const auto t = corpus_->total();
      send_json(res, 200, {{"status", "ok"}, {"corpus", {{"years", corpus_->years()}, {"tokens", t.tokens}}}});
    }));
    server.Post("/api/jobs/counts", route([this](const Request& req, Response& res) { post_counts_job(req, res); }));
    server.Get(R"(/api/jobs/([^/]+))", route([this](const Request& req, Response& res) {
      send_json(res, 200, find_job(req.matches[1])->to_json());
    }));
    server.Post("/api/similar", route([this](const Request& req, Response& res) { post_similar(req, res); }));
    server.Patch(R"(/api/similar/([^/]+)/include)",
                 route([this](const Request& req, Response& res) { patch_include(req, res); }));
    server.Post("/api/condense", route([this](const Request& req, Response& res) { post_condense(req, res); }));
    server.Get(R"(/api/condense/([^/]+)/stats)", route([this](const Request& req, Response& res) {
      const auto c = find_condensed(req, req.matches[1]);
      res.status = 200;
      res.set_content(json_text(reduction_report(*c)), "application/json");
    }));
    server.Get(R"(/api/condense/([^/]+)/export)", route([this](const Request& req, Response& res) {
      const auto c = find_condensed(req, req.matches[1]);
      const auto format = parse_export_format(req.has_param("format") ? req.get_param_value("format") : "tagged");
      std::string body = req.has_param("year")
                             ? export_year(*c, *corpus_, parse_year(req.get_param_value("year")), format)
                             : export_all(*c, *corpus_, format);
      res.status = 200;
      res.set_content(body, "text/plain; charset=utf-8");
    }));
    server.Post("/api/jobs/topics", route([this](const Request& req, Response& res) { post_topics_job(req, res); }));
    server.Get("/api/series/freq", route([this](const Request& req, Response& res) { get_freq(req, res); }));
    server.Get("/api/series/sim", route([this](const Request& req, Response& res) { get_sim(req, res); }));
    if (cfg_.static_dir) server.set_mount_point("/", cfg_.static_dir->string());
  }

  // Blocks until the count store for (scope, table) is available, starting
  // a counts job if none exists.
  std::shared_ptr<const CountStore> counts(const YearScope& scope, const ThresholdTable& table) {
    auto [job, entry, created] = ensure_counts_job(scope, table);
    job->wait();
    if (job->status() == JobStatus::failed) throw HttpError(500, job->to_json());
    return entry->store.get();
  }

 private:
  struct StoreEntry {
    std::string job_id;
    std::shared_future<std::shared_ptr<const CountStore>> store;
  };

  struct Session {
    std::map<std::string, SimilarWordSet> similar;
    std::map<std::string, std::shared_ptr<const CondensedCorpus>> condensed;
  };

  template <typename Handler>
  void respond(const httplib::Request& req, httplib::Response& res, const Handler& handler) {
    try {
      handler(req, res);
    } catch (const HttpError& e) {
      send_json(res, e.status(), e.body());
    } catch (const UnknownWord& e) {
      send_json(res, 404, {{"error", "unknown word"}, {"word", e.word()}});
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", "bad request"}, {"detail", e.what()}});
    } catch (const ConfigError& e) {
      send_json(res, 400, {{"error", "bad request"}, {"detail", e.what()}});
    } catch (const DomainError& e) {
      send_json(res, 422, {{"error", "domain error"}, {"detail", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "internal"}, {"detail", e.what()}});
    }
  }

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(json_text(body), "application/json");
  }

  static void send_text(httplib::Response& res, int status, std::string body) {
    res.status = status;
    res.set_content(std::move(body), "application/json");
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    auto j = nlohmann::json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!j.is_object()) throw ConfigError("request body must be a JSON object");
    return j;
  }

  YearScope scope_from(const nlohmann::json& body) const {
    if (!body.contains("years") || body["years"].is_null()) return corpus_->years();
    const auto& y = body["years"];
    if (y.is_string()) return resolve_scope(*corpus_, parse_year_range(y.get<std::string>()));
    if (y.is_array()) {
      auto scope = normalize_scope(y.get<YearScope>());
      corpus_->require_scope(scope);
      return scope;
    }
    throw ConfigError("\"years\" must be \"A..B\" or an array of years");
  }

  static ThresholdTable table_from(const nlohmann::json& body) {
    if (!body.contains("thresholds") || body["thresholds"].is_null()) return ThresholdTable::standard();
    return ThresholdTable::from_json(body["thresholds"]);
  }

  Session& session(const httplib::Request& req) {
    const std::string id = req.has_header("X-Session") ? req.get_header_value("X-Session") : "default";
    auto it = sessions_.find(id);
    if (it != sessions_.end()) {
      session_lru_.splice(session_lru_.begin(), session_lru_, it->second.first);
      return it->second.second;
    }
    session_lru_.push_front(id);
    auto& entry = sessions_[id];
    entry.first = session_lru_.begin();
    while (sessions_.size() > std::max<std::size_t>(1, cfg_.session_cap)) {
      sessions_.erase(session_lru_.back());
      session_lru_.pop_back();
    }
    return entry.second;
  }

  std::shared_ptr<Job> new_job(const std::string& stage) {
    auto job = std::make_shared<Job>("j" + std::to_string(++job_counter_), stage);
    jobs_[job->id()] = job;
    return job;
  }

  std::shared_ptr<Job> find_job(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw HttpError(404, {{"error", "unknown job"}, {"job", id}});
    return it->second;
  }

  std::shared_ptr<const CondensedCorpus> find_condensed(const httplib::Request& req, const std::string& id) {
    std::lock_guard lock(mu_);
    auto& s = session(req);
    auto it = s.condensed.find(id);
    if (it == s.condensed.end()) throw HttpError(404, {{"error", "unknown handle"}, {"id", id}});
    return it->second;
  }

  static std::string counts_key(const YearScope& scope, const ThresholdTable& table) {
    return scope_key(scope) + "|" + table.fingerprint();
  }

  std::shared_ptr<const CountStore> compute_store(const YearScope& scope, const ThresholdTable& table,
                                                  Job& job) {
    std::optional<fs::path> cached;
    if (cfg_.cache_dir) {
      cached = *cfg_.cache_dir / sha256_hex(corpus_->fingerprint() + "|" + counts_key(scope, table)).substr(0, 24);
      std::error_code ec;
      if (fs::exists(*cached / "meta.json", ec)) {
        auto store = load_store(*cached);
        const auto& m = store.meta();
        if (m.corpus_fingerprint == corpus_->fingerprint() && m.years == scope && m.thresholds == table &&
            m.pass == 2)
          return std::make_shared<const CountStore>(std::move(store));
      }
    }
    BuildOptions opts;
    opts.threads = cfg_.threads;
    opts.progress = [&job](int pass, double f) { job.advance(0.5 * (pass - 1) + 0.5 * f); };
    auto store = std::make_shared<const CountStore>(build_counts(*corpus_, table, scope, opts));
    if (cached) save_store(*store, corpus_->vocabulary(), *cached);
    return store;
  }

  // Returns the job for a cache key, creating and launching it when absent.
  std::tuple<std::shared_ptr<Job>, std::shared_ptr<StoreEntry>, bool> ensure_counts_job(
      const YearScope& scope, const ThresholdTable& table) {
    const std::string key = counts_key(scope, table);
    std::lock_guard lock(mu_);
    if (auto it = stores_.find(key); it != stores_.end()) {
      store_lru_.remove(key);
      store_lru_.push_front(key);
      return {jobs_.at(it->second->job_id), it->second, false};
    }
    auto job = new_job("counts");
    auto promise = std::make_shared<std::promise<std::shared_ptr<const CountStore>>>();
    auto entry = std::make_shared<StoreEntry>(StoreEntry{job->id(), promise->get_future().share()});
    stores_[key] = entry;
    store_lru_.push_front(key);
    while (stores_.size() > std::max<std::size_t>(1, cfg_.cache_cap)) {
      // Evicting only drops the cache slot; holders of the future keep it alive.
      stores_.erase(store_lru_.back());
      store_lru_.pop_back();
    }
    workers_.emplace_back([this, job, promise, scope, table] {
      job->start();
      try {
        promise->set_value(compute_store(scope, table, *job));
        job->finish(nlohmann::json{{"years", scope}, {"thresholds_fingerprint", table.fingerprint()}});
      } catch (const std::exception& e) {
        promise->set_exception(std::current_exception());
        job->fail(e.what());
      }
    });
    return {job, entry, true};
  }

  void post_counts_job(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto scope = scope_from(body);
    const auto table = table_from(body);
    auto [job, entry, created] = ensure_counts_job(scope, table);
    if (!created) {
      send_json(res, 409, {{"error", "duplicate job"}, {"job", job->id()}});
      return;
    }
    send_json(res, 202, {{"job", job->id()}});
  }

  void post_similar(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const std::string central = body.at("central").get<std::string>();
    if (!corpus_->vocabulary().contains(central)) throw UnknownWord(central);
    SimilarOptions opts;
    opts.k = body.value("k", std::size_t{300});
    opts.min_frequency = body.value("min_frequency", std::size_t{5});
    opts.threads = cfg_.threads;
    if (body.contains("pos") && body["pos"].is_array()) {
      std::set<PosClass> classes;
      for (const auto& p : body["pos"]) classes.insert(parse_pos_class(p.get<std::string>()));
      opts.pos_classes = classes;
    }
    const auto store = counts(scope_from(body), table_from(body));
    auto set = top_k_similar(corpus_->vocabulary(), *store, central, opts);
    std::string text = json_text(to_json(set));
    {
      std::lock_guard lock(mu_);
      session(req).similar[central] = std::move(set);
    }
    send_text(res, 200, std::move(text));
  }

  void patch_include(const httplib::Request& req, httplib::Response& res) {
    const std::string central = req.matches[1];
    const auto body = parse_body(req);
    const std::string word = body.at("word").get<std::string>();
    const bool included = body.at("included").get<bool>();
    std::lock_guard lock(mu_);
    auto& s = session(req);
    auto it = s.similar.find(central);
    if (it == s.similar.end()) throw HttpError(404, {{"error", "no similar set"}, {"central", central}});
    if (it->second.find(word) == nullptr) throw HttpError(404, {{"error", "unknown word"}, {"word", word}});
    it->second.set_included(word, included);
    send_text(res, 200, json_text(to_json(it->second)));
  }

  void post_condense(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const std::string central = body.value("central", std::string{});
    MatchSet match;
    if (body.contains("words")) {
      match = make_match_set(central, body["words"].get<std::vector<std::string>>());
    } else {
      std::lock_guard lock(mu_);
      auto& s = session(req);
      auto it = s.similar.find(central);
      if (it == s.similar.end()) throw HttpError(404, {{"error", "no similar set"}, {"central", central}});
      match = make_match_set(it->second);
    }
    auto condensed = std::make_shared<const CondensedCorpus>(
        condense(*corpus_, match, scope_from(body), cfg_.threads));
    std::string id;
    {
      std::lock_guard lock(mu_);
      id = "c" + std::to_string(++condensed_counter_);
      session(req).condensed[id] = condensed;
    }
    send_json(res, 200, {{"id", id}, {"stats", reduction_report(*condensed)}});
  }

  static LdaConfig lda_from(const nlohmann::json& j) {
    LdaConfig c;
    c.topics = j.value("k", c.topics);
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    c.beta = j.value("beta", c.beta);
    c.iterations = j.value("iterations", c.iterations);
    c.burn_in = j.value("burn_in", c.burn_in);
    if (!j.contains("seed")) throw ConfigError("topic config needs an explicit seed");
    c.seed = j["seed"].get<std::uint64_t>();
    c.min_doc_len = j.value("min_doc_len", c.min_doc_len);
    c.validate();
    return c;
  }

  void post_topics_job(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const std::string cid = body.at("condensed").get<std::string>();
    const auto condensed = find_condensed(req, cid);
    const auto cfg = lda_from(body.value("config", nlohmann::json::object()));
    const bool summary = body.value("summary", false);
    const std::string key = cid + "|" + req.get_header_value("X-Session") + "|" + to_json(cfg).dump() +
                            (summary ? "|s" : "");
    std::shared_ptr<Job> job;
    {
      std::lock_guard lock(mu_);
      if (auto it = topic_jobs_.find(key); it != topic_jobs_.end()) {
        send_json(res, 409, {{"error", "duplicate job"}, {"job", it->second}});
        return;
      }
      job = new_job("topics");
      topic_jobs_[key] = job->id();
      workers_.emplace_back([this, job, condensed, cfg, summary] {
        job->start();
        try {
          // Train on the condensed text re-read as a corpus, as the CLI does
          // with an exported directory.
          std::vector<std::pair<Year, std::string>> texts;
          for (const auto& [y, s] : condensed->per_year)
            texts.emplace_back(y, export_year(*condensed, *corpus_, y, ExportFormat::tagged));
          const auto sub = ingest_texts(std::move(texts), cfg_.threads);
          const auto lda = prepare_lda_corpus(*sub, stopwords_, cfg.min_doc_len);
          const double total = static_cast<double>(cfg.iterations);
          const auto model = train_lda(lda, cfg, [&](const GibbsSampler& s) {
            job->advance(static_cast<double>(s.sweeps()) / total);
          });
          job->finish(nlohmann::json::parse(model_json(model, summary)));
        } catch (const std::exception& e) {
          job->fail(e.what());
        }
      });
    }
    send_json(res, 202, {{"job", job->id()}});
  }

  YearRange range_from(const httplib::Request& req) const {
    YearRange r{corpus_->years().front(), corpus_->years().back()};
    if (req.has_param("from")) r.from = parse_year(req.get_param_value("from"));
    if (req.has_param("to")) r.to = parse_year(req.get_param_value("to"));
    if (r.from > r.to) throw ConfigError("empty year range");
    return r;
  }

  void get_freq(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("word")) throw ConfigError("missing word parameter");
    const auto series = frequency_series(req.get_param_value("word"), *corpus_, range_from(req));
    send_text(res, 200, json_text(to_json(series)));
  }

  void get_sim(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("word") || !req.has_param("base")) throw ConfigError("missing word or base parameter");
    SeriesOptions opts;
    opts.mode = parse_variation_mode(req.has_param("mode") ? req.get_param_value("mode") : "base");
    opts.threads = cfg_.threads;
    const auto series = similarity_series(req.get_param_value("word"), *corpus_,
                                          parse_year(req.get_param_value("base")), range_from(req),
                                          ThresholdTable::standard(), opts);
    send_text(res, 200, json_text(to_json(series)));
  }

  CorpusHandle corpus_;
  ServiceConfig cfg_;
  StopwordList stopwords_;

  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::map<std::string, std::shared_ptr<StoreEntry>> stores_;
  std::list<std::string> store_lru_;
  std::map<std::string, std::string> topic_jobs_;
  std::list<std::string> session_lru_;
  std::unordered_map<std::string, std::pair<std::list<std::string>::iterator, Session>> sessions_;
  std::vector<std::thread> workers_;
  std::uint64_t job_counter_ = 0;
  std::uint64_t condensed_counter_ = 0;
};

// Ingests the corpus and serves until the server is stopped.
inline void serve(const fs::path& corpus_path, const std::string& host, int port, ServiceConfig cfg,
                  const std::function<void(httplib::Server&)>& on_ready = {}) {
  auto corpus = ingest(corpus_path, {std::nullopt, cfg.threads});
  Service service(std::move(corpus), std::move(cfg));
  httplib::Server server;
  service.mount(server);
  if (!server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  if (on_ready) on_ready(server);
  server.listen_after_bind();
}

}  // namespace topicdraw
