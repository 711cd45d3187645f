// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failures (capped at 1).

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "cli_runner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "topicdraw/condenser.hpp"
#include "topicdraw/diachron.hpp"
#include "topicdraw/service.hpp"
#include "topicdraw/similarity.hpp"
#include "topicdraw/topics.hpp"
#include "topicdraw/window_stats.hpp"

namespace td = topicdraw;
using nlohmann::json;

namespace {

struct Failed {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failed{why};
}

int failures = 0;

void criterion(const std::string& name, const std::function<std::string()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const Failed& f) {
    ok = false;
    detail = f.why;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(2);
  line << (ok ? "PASS " : "FAIL ") << name << " (" << detail << (detail.empty() ? "" : ", ") << secs << " s)";
  std::cout << line.str() << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::map<char, std::pair<double, double>> oracle_classes(const td::ThresholdTable& t) {
  std::map<char, std::pair<double, double>> m;
  const char letters[] = {'n', 'v', 'a', 'd'};
  for (int i = 0; i < 4; ++i) {
    const auto b = t[static_cast<td::PosClass>(i)];
    m[letters[i]] = {b.left, b.right};
  }
  return m;
}

oracle::PairMap store_as_map(const td::CountStore& s, const td::Vocabulary& v) {
  oracle::PairMap m;
  s.for_each_pair([&](const td::PairCount& p) {
    m[{v.surface(p.target), v.surface(p.context), td::side_code(p.side)}] = static_cast<long>(p.count);
  });
  return m;
}

std::map<std::string, std::uint32_t> id_map(const td::Vocabulary& v) {
  std::map<std::string, std::uint32_t> m;
  for (td::WordId w = 0; w < v.size(); ++w) m[v.surface(w)] = w;
  return m;
}

td::CountStore hand_store(std::size_t vocab,
                          std::vector<std::tuple<td::WordId, td::WordId, td::Side, std::uint64_t>> pairs) {
  td::CountMeta meta;
  meta.vocab_size = vocab;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> entries;
  for (auto [t, c, s, n] : pairs) entries.emplace_back(td::pair_key(t, c, s), n);
  std::sort(entries.begin(), entries.end());
  return td::CountStore(meta, std::vector<std::uint64_t>(vocab, 1), entries);
}

std::string counts_oracle() {
  std::mt19937_64 rng(101);
  const auto start = std::chrono::steady_clock::now();
  for (int round = 0; round < 20; ++round) {
    auto lines = fixtures::random_lines(rng, 4 + rng() % 20, 1 + rng() % 12, 1, 18);
    std::size_t tokens = 0;
    std::size_t keep = 0;
    while (keep < lines.size() && tokens + lines[keep].size() <= 200) tokens += lines[keep++].size();
    lines.resize(std::max<std::size_t>(keep, 1));
    const std::string text = fixtures::render(lines);
    td::ThresholdTable table;
    std::uniform_real_distribution<double> u(0.0, 12.0);
    for (int i = 0; i < 5; ++i) table.set(static_cast<td::PosClass>(i), {u(rng), u(rng)});
    if (round % 4 == 0) table = td::ThresholdTable::standard();
    auto c = td::ingest_texts({{1970, text}});
    const auto docs = oracle::parse(text);
    const auto boot = td::build_bootstrap_counts(*c, c->years());
    require(store_as_map(boot, c->vocabulary()) == oracle::count_fixed(docs, 5),
            "pass 1 differs on corpus " + std::to_string(round));
    const auto other = table[td::PosClass::other];
    const auto want = oracle::count_two_pass(docs, oracle_classes(table), {other.left, other.right}).first;
    require(store_as_map(td::build_counts(*c, table, c->years()), c->vocabulary()) == want,
            "pass 2 differs on corpus " + std::to_string(round));
  }
  const double t = seconds_since(start);
  require(t < 5.0, "took " + std::to_string(t) + " s");
  return "20 corpora";
}

std::string similarity_oracle() {
  std::mt19937_64 rng(202);
  const auto start = std::chrono::steady_clock::now();
  const auto table = td::ThresholdTable::standard();
  std::size_t probes = 0;
  for (int round = 0; round < 20; ++round) {
    const std::size_t vocab = 30 + rng() % 471;
    const std::string text = fixtures::render(fixtures::random_lines(rng, vocab, 250, 2, 20));
    auto c = td::ingest_texts({{1960, text}});
    require(c->vocabulary().size() <= 500, "vocabulary too large");
    const auto store = td::build_counts(*c, table, c->years());
    const auto docs = oracle::parse(text);
    const auto pairs = oracle::count_two_pass(docs, oracle_classes(table), {15, 15}).first;
    oracle::SimilarityOracle o(pairs, docs, id_map(c->vocabulary()));
    for (int p = 0; p < 5; ++p) {
      const std::string central = c->vocabulary().surface(rng() % c->vocabulary().size());
      const std::size_t k = 1 + rng() % 60;
      const std::size_t min_freq = rng() % 6;
      const auto got = td::top_k_similar(c->vocabulary(), store, central, {k, min_freq, std::nullopt, 1});
      const auto want = o.top_k(central, k, static_cast<long>(min_freq));
      require(got.neighbors.size() == want.size(), "neighbor count differs for " + central);
      for (std::size_t i = 0; i < want.size(); ++i) {
        require(got.neighbors[i].id == want[i].first, "order differs for " + central);
        require(std::abs(got.neighbors[i].score - want[i].second) <= 1e-9, "score differs for " + central);
      }
      ++probes;
    }
  }
  const double t = seconds_since(start);
  require(t < 30.0, "took " + std::to_string(t) + " s");
  return std::to_string(probes) + " probes on 20 corpora";
}

std::string formula_checks() {
  // information with no smoothing against -log(pair / marginal).
  auto s = hand_store(4, {{0, 1, td::Side::left, 3}, {0, 2, td::Side::left, 1}, {0, 3, td::Side::right, 6},
                          {1, 0, td::Side::right, 2}, {1, 2, td::Side::right, 5}});
  const std::vector<std::tuple<td::WordId, td::WordId, td::Side, double>> expected = {
      {1, 0, td::Side::left, 3.0 / 4.0},  {2, 0, td::Side::left, 1.0 / 4.0}, {3, 0, td::Side::right, 1.0},
      {0, 1, td::Side::right, 2.0 / 7.0}, {2, 1, td::Side::right, 5.0 / 7.0}};
  for (auto [ctx, target, side, ratio] : expected)
    require(std::abs(td::information(ctx, target, side, s, 0.0) + std::log(ratio)) <= 1e-12, "information");

  // Independent counts: c(t, x) = row(t) * col(x) / N.
  auto ind = hand_store(5, {{0, 2, td::Side::left, 2}, {0, 3, td::Side::left, 4}, {0, 4, td::Side::left, 6},
                            {1, 2, td::Side::left, 1}, {1, 3, td::Side::left, 2}, {1, 4, td::Side::left, 3}});
  for (td::WordId t : {0u, 1u})
    for (td::WordId x : {2u, 3u, 4u})
      require(std::abs(td::pmi(t, td::dimension(x, td::Side::left), ind)) <= 1e-12, "pmi independence");

  std::mt19937_64 rng(303);
  auto c = td::ingest_texts({{1960, fixtures::render(fixtures::random_lines(rng, 80, 200, 3, 25))}});
  const auto store = td::build_counts(*c, td::ThresholdTable::standard(), c->years());
  std::size_t checked = 0;
  for (td::WordId w = 0; w < c->vocabulary().size(); ++w) {
    const auto v = td::pmi_vector(w, store);
    if (v.empty()) continue;
    require(std::abs(td::cosine(v, v) - 1.0) <= 1e-12, "cosine self-similarity");
    ++checked;
  }
  require(checked > 0, "no non-empty vectors");
  return std::to_string(checked) + " self-similarities";
}

std::string window_monotonicity() {
  std::mt19937_64 rng(404);
  auto c = td::ingest_texts({{1970, fixtures::render(fixtures::random_lines(rng, 60, 200, 5, 40))}});
  const auto boot = td::build_bootstrap_counts(*c, c->years());
  const auto docs = c->documents(1970);
  std::uniform_real_distribution<double> u(0.0, 25.0), delta(1e-9, 10.0);
  for (int probe = 0; probe < 100; ++probe) {
    const auto& d = docs[rng() % docs.size()];
    const std::size_t pos = rng() % d.size();
    const td::Budget lo{u(rng), u(rng)};
    const td::Budget hi{lo.left + delta(rng), lo.right + delta(rng)};
    const auto a = td::grow_window(d.words, pos, lo, boot);
    const auto b = td::grow_window(d.words, pos, hi, boot);
    require(a.left.extent <= b.left.extent && a.right.extent <= b.right.extent,
            "window shrank at probe " + std::to_string(probe));
  }
  return "100 probes";
}

std::string condenser_checks() {
  const std::vector<std::string> reserved = {"周恩来", "总理", "访问"};
  const auto planted = fixtures::choose(505, 10000, 137);
  const std::string text = fixtures::render(fixtures::planted_lines(506, 10000, reserved, planted));
  auto c = td::ingest_texts({{1957, text}});
  const auto r = td::condense(*c, td::make_match_set("周恩来", {"总理", "访问"}), c->years());
  std::vector<std::size_t> kept;
  for (const auto& d : r.documents) kept.push_back(d.seq);
  const auto want = oracle::matching_lines(text, {reserved.begin(), reserved.end()});
  require(want.size() == 137, "oracle found " + std::to_string(want.size()) + " lines");
  require(kept == want, "kept lines differ from the oracle");

  std::mt19937_64 rng(507);
  std::vector<std::pair<td::Year, std::string>> texts;
  for (int y = 1960; y < 1963; ++y)
    texts.emplace_back(y, fixtures::render(fixtures::random_lines(rng, 400, 500, 2, 20)));
  auto rc = td::ingest_texts(texts);
  const auto& v = rc->vocabulary();
  for (int round = 0; round < 20; ++round) {
    std::vector<std::string> small;
    for (std::size_t i = 0; i < 1 + rng() % 6; ++i) small.push_back(v.surface(rng() % v.size()));
    auto large = small;
    for (std::size_t i = 0; i < 1 + rng() % 6; ++i) large.push_back(v.surface(rng() % v.size()));
    const auto a = td::condense(*rc, td::make_match_set("", small), rc->years());
    const auto b = td::condense(*rc, td::make_match_set("", large), rc->years());
    require(std::includes(b.documents.begin(), b.documents.end(), a.documents.begin(), a.documents.end()),
            "monotonicity broken in round " + std::to_string(round));
    std::vector<std::pair<td::Year, std::string>> again;
    for (const auto& [y, st] : a.per_year)
      if (st.lines_kept) again.emplace_back(y, td::export_year(a, *rc, y, td::ExportFormat::tagged));
    if (again.empty()) continue;
    auto c2 = td::ingest_texts(again);
    const auto a2 = td::condense(*c2, td::make_match_set("", small), c2->years());
    require(a2.total.lines_kept == a.total.lines_kept && a2.total.bytes_kept == a.total.bytes_kept,
            "idempotence broken in round " + std::to_string(round));
  }
  return "137/10000 lines, 20 match sets";
}

std::string directionality() {
  fixtures::TempDir dir("acc-dir");
  const double rate = 0.2;
  fixtures::write_large_corpus(dir.path(), 400000, "周恩来", rate, 606, 1957, 4);
  auto c = td::ingest(dir.path());
  const auto r = td::condense(*c, td::make_match_set("周恩来", {}), c->years());
  const double ratio = r.total.ratio();
  std::ostringstream d;
  d << r.total.bytes_kept << "/" << r.total.bytes_scanned << " = " << ratio;
  require(ratio > 0.0 && ratio < 0.5, "ratio " + d.str() + " outside (0, 0.5)");
  require(std::abs(ratio - rate) <= 0.1, "ratio " + d.str() + " not within 0.1 of " + std::to_string(rate));
  return d.str();
}

td::LdaConfig lda_config(std::size_t k, std::size_t iters, std::uint64_t seed) {
  td::LdaConfig c;
  c.topics = k;
  c.iterations = iters;
  c.burn_in = iters / 5;
  c.seed = seed;
  return c;
}

std::string lda_invariants() {
  const auto p = fixtures::planted_topics(707, 300, 3, 30, 60);
  auto c = td::ingest_texts({{1960, fixtures::render(p.lines)}});
  const auto lda = td::prepare_lda_corpus(*c, {}, 1);
  require(lda.docs.size() == 300, "fixture has " + std::to_string(lda.docs.size()) + " docs");
  const auto cfg = lda_config(5, 60, 708);
  std::size_t sweeps = 0;
  const auto model = td::train_lda(lda, cfg, [&](const td::GibbsSampler& s) {
    ++sweeps;
    std::vector<std::uint64_t> by_topic(s.topics(), 0);
    for (const auto& z : s.assignments())
      for (auto t : z) by_topic[t] += 1;
    for (std::size_t d = 0; d < lda.docs.size(); ++d) {
      std::uint64_t sum = 0;
      for (std::size_t t = 0; t < s.topics(); ++t) sum += s.doc_topic(d, t);
      require(sum == lda.docs[d].size(), "doc-topic counts off at sweep " + std::to_string(sweeps));
    }
    for (std::size_t t = 0; t < s.topics(); ++t) {
      std::uint64_t sum = 0;
      for (std::size_t w = 0; w < s.vocab_size(); ++w) sum += s.word_topic(w, t);
      require(sum == s.topic_total(t) && by_topic[t] == s.topic_total(t),
              "word-topic counts off at sweep " + std::to_string(sweeps));
    }
  });
  require(sweeps == cfg.iterations, "observer saw " + std::to_string(sweeps) + " sweeps");
  for (std::size_t t = 0; t < model.topics; ++t) {
    const auto row = model.phi_row(t);
    require(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-9, "phi row sum");
  }
  for (std::size_t d = 0; d < model.doc_count(); ++d) {
    const auto row = model.theta_row(d);
    require(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-9, "theta row sum");
  }
  const auto again = td::train_lda(lda, cfg);
  require(td::model_json(model, true) == td::model_json(again, true), "model.json differs between runs");
  return std::to_string(sweeps) + " sweeps checked";
}

std::string lda_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const auto p = fixtures::planted_topics(2024, 300, 3, 30, 60);
  auto c = td::ingest_texts({{1960, fixtures::render(p.lines)}});
  const auto r = td::train_lda(*c, td::all_documents(*c), {}, lda_config(3, 500, 42));
  std::ostringstream d;
  double worst = 1.0;
  for (std::size_t t = 0; t < r.topics; ++t) {
    std::map<int, int> owners;
    for (const auto& w : td::top_words(r, t, 10)) owners[p.owner.at(w.word)] += 1;
    int best = 0;
    for (auto& [o, n] : owners) best = std::max(best, n);
    worst = std::min(worst, best / 10.0);
  }
  const double t = seconds_since(start);
  d << "min purity " << worst;
  require(worst >= 0.9, d.str());
  require(t < 60.0, "took " + std::to_string(t) + " s");
  return d.str();
}

std::string planted_year(const std::string& word, int hits, int total) {
  std::string out;
  for (int i = 0; i < total; ++i) {
    out += (i < hits ? word : "f" + std::to_string(i % 13)) + "/n";
    out += (i % 10 == 9) ? "\n" : " ";
  }
  return out;
}

std::string diachron() {
  auto f = td::ingest_texts({{1957, planted_year("人民", 1, 100)},
                             {1958, planted_year("人民", 5, 100)},
                             {1959, planted_year("人民", 25, 100)}});
  const auto s = td::frequency_series("人民", *f, {1957, 1959});
  std::vector<double> got;
  for (const auto& p : s.points) got.push_back(p.value);
  require(got == std::vector<double>{0.01, 0.05, 0.25}, "frequency series differs");

  std::mt19937_64 rng(808);
  std::vector<std::pair<td::Year, std::string>> texts;
  for (int y = 1960; y < 1963; ++y)
    texts.emplace_back(y, fixtures::render(fixtures::random_lines(rng, 80, 300, 3, 20)));
  auto c = td::ingest_texts(texts);
  const auto& v = c->vocabulary();
  std::size_t checked = 0;
  for (td::WordId w = 0; w < v.size(); w += 7) {
    const auto series = td::similarity_series(v.surface(w), *c, 1961, {1960, 1962}, td::ThresholdTable::standard());
    for (const auto& p : series.points)
      if (p.year == 1961) {
        require(std::abs(p.value - 1.0) <= 1e-12, "base-year self-similarity of " + v.surface(w));
        ++checked;
      }
  }
  require(checked > 0, "no base-year points");
  return "[0.01, 0.05, 0.25], " + std::to_string(checked) + " self-similarities";
}

std::string performance() {
  fixtures::TempDir dir("acc-perf");
  const auto bytes = fixtures::write_large_corpus(dir / "corpus", 10ull * 1024 * 1024, "周恩来");
  const auto start = std::chrono::steady_clock::now();
  const auto r = fixtures::run_cli({"draw", "--corpus", (dir / "corpus").string(), "--central", "周恩来", "--topics",
                                    "10", "--iters", "200", "--seed", "1", "--out", (dir / "run").string()});
  const double t = seconds_since(start);
  require(r.code == 0, "draw exited with " + std::to_string(r.code));
  require(std::filesystem::exists(dir / "run" / "model.json"), "model.json missing");
  std::ostringstream d;
  d.precision(3);
  d << bytes / 1e6 << " MB in " << t << " s on " << std::thread::hardware_concurrency() << " core(s)";
  require(t < 120.0, d.str());
  return d.str();
}

std::string parity() {
  fixtures::TempDir dir("acc-parity");
  const std::string central = "周恩来";
  fixtures::write_large_corpus(dir / "corpus", 150000, central, 0.2, 909, 1960, 3);
  const std::string corpus = (dir / "corpus").string();

  td::Service service(td::ingest(dir / "corpus"), {});
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(300, 0);
  const httplib::Headers session = {{"X-Session", "parity"}};
  std::vector<std::string> mismatched;
  try {
    auto similar = client.Post("/api/similar", session, json{{"central", central}, {"k", 40}}.dump(), "application/json");
    auto cli_similar = fixtures::run_cli({"similar", "--corpus", corpus, "--central", central, "-k", "40"});
    if (!similar || similar->status != 200 || cli_similar.code != 0 || similar->body != cli_similar.out)
      mismatched.push_back("similar");

    auto cond = client.Post("/api/condense", session, json{{"central", central}}.dump(), "application/json");
    std::string stats_body;
    if (cond && cond->status == 200) {
      const std::string id = json::parse(cond->body)["id"];
      auto stats = client.Get("/api/condense/" + id + "/stats", session);
      if (stats && stats->status == 200) stats_body = stats->body;
    }
    auto cli_cond = fixtures::run_cli({"condense", "--corpus", corpus, "--central", central, "-k", "40", "--out",
                                       (dir / "cond").string()});
    if (stats_body.empty() || cli_cond.code != 0 || stats_body != fixtures::read_all(dir / "cond" / "stats.json"))
      mismatched.push_back("condense");

    const std::string word = httplib::detail::encode_url(central);
    auto freq = client.Get("/api/series/freq?word=" + word, session);
    auto cli_freq = fixtures::run_cli({"series", "freq", "--corpus", corpus, "--word", central});
    if (!freq || freq->status != 200 || cli_freq.code != 0 || freq->body != cli_freq.out)
      mismatched.push_back("series freq");
    auto sim = client.Get("/api/series/sim?word=" + word + "&base=1961", session);
    auto cli_sim = fixtures::run_cli({"series", "sim", "--corpus", corpus, "--word", central, "--base", "1961"});
    if (!sim || sim->status != 200 || cli_sim.code != 0 || sim->body != cli_sim.out)
      mismatched.push_back("series sim");
  } catch (...) {
    server.stop();
    thread.join();
    throw;
  }
  server.stop();
  thread.join();
  std::string list;
  for (const auto& m : mismatched) list += (list.empty() ? "" : ", ") + m;
  require(mismatched.empty(), "mismatch: " + list);
  return "similar, condense, series freq, series sim";
}

}  // namespace

int main() {
  criterion("counts oracle equivalence", counts_oracle);
  criterion("similarity oracle equivalence", similarity_oracle);
  criterion("formula checks", formula_checks);
  criterion("window monotonicity", window_monotonicity);
  criterion("condenser soundness and completeness", condenser_checks);
  criterion("condensation directionality", directionality);
  criterion("LDA invariants", lda_invariants);
  criterion("LDA recovery", lda_recovery);
  criterion("diachron", diachron);
  criterion("performance floor", performance);
  criterion("CLI/service parity", parity);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
