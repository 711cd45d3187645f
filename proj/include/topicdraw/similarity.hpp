#pragma once

// Positive-PMI word vectors over directed contexts and exact top-k cosine
// neighbors.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "topicdraw/corpus.hpp"
#include "topicdraw/error.hpp"
#include "topicdraw/parallel.hpp"
#include "topicdraw/window_stats.hpp"

namespace topicdraw {

using DimId = std::uint64_t;

// Left and right occurrences of a context word are distinct dimensions.
inline DimId dimension(WordId context, Side side) noexcept {
  return 2 * static_cast<DimId>(context) + static_cast<DimId>(side);
}
inline WordId dimension_context(DimId d) noexcept { return static_cast<WordId>(d / 2); }
inline Side dimension_side(DimId d) noexcept { return static_cast<Side>(d % 2); }

struct PmiEntry {
  DimId dim;
  double value;
};

struct PmiVector {
  WordId word = 0;
  std::vector<PmiEntry> entries;  // ascending dim, all values > 0
  double norm = 0.0;

  bool empty() const noexcept { return entries.empty(); }
};

inline void require_word(const CountStore& store, WordId w) {
  if (!store.has_word(w)) throw DomainError("unknown word: id " + std::to_string(w));
}

// log(N_side * c(x, y, side) / (c_t(y, side) * c_c(x, side))); -inf if the
// pair was never observed.
inline double pmi(WordId target, DimId dim, const CountStore& store) {
  const WordId context = dimension_context(dim);
  const Side side = dimension_side(dim);
  require_word(store, target);
  require_word(store, context);
  const std::uint64_t c = store.count(target, context, side);
  if (c == 0) return -std::numeric_limits<double>::infinity();
  return std::log(static_cast<double>(store.side_total(side)) * static_cast<double>(c) /
                  (static_cast<double>(store.target_total(target, side)) *
                   static_cast<double>(store.context_total(context, side))));
}

// Entries are visited in ascending dimension order; the norm sums squares in
// that order.
inline PmiVector pmi_vector(WordId target, const CountStore& store) {
  PmiVector v;
  v.word = target;
  const auto row = store.row(target);
  if (row.size() == 0) return v;
  const double t_left = static_cast<double>(store.target_total(target, Side::left));
  const double t_right = static_cast<double>(store.target_total(target, Side::right));
  const double n_left = static_cast<double>(store.side_total(Side::left));
  const double n_right = static_cast<double>(store.side_total(Side::right));
  double sq = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const auto key = row.keys[i];
    const WordId context = key_context(key);
    const Side side = key_side(key);
    const double n = side == Side::left ? n_left : n_right;
    const double t = side == Side::left ? t_left : t_right;
    const double value = std::log(n * static_cast<double>(row.counts[i]) /
                                  (t * static_cast<double>(store.context_total(context, side))));
    if (value > 0.0) {
      v.entries.push_back({dimension(context, side), value});
      sq += value * value;
    }
  }
  v.norm = std::sqrt(sq);
  return v;
}

inline double dot(const PmiVector& u, const PmiVector& v) noexcept {
  double sum = 0.0;
  auto a = u.entries.begin(), b = v.entries.begin();
  while (a != u.entries.end() && b != v.entries.end()) {
    if (a->dim < b->dim) {
      ++a;
    } else if (b->dim < a->dim) {
      ++b;
    } else {
      sum += a->value * b->value;
      ++a, ++b;
    }
  }
  return sum;
}

inline double cosine(const PmiVector& u, const PmiVector& v) noexcept {
  if (u.norm == 0.0 || v.norm == 0.0) return 0.0;
  return dot(u, v) / (u.norm * v.norm);
}

struct Neighbor {
  WordId id = 0;
  std::string word;
  double score = 0.0;
  bool included = true;
};

// Score descending, then word id ascending.
inline bool ranks_before(double score_a, WordId a, double score_b, WordId b) noexcept {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

struct SimilarWordSet {
  WordId central_id = 0;
  std::string central;
  std::vector<Neighbor> neighbors;
  std::size_t k = 0;
  std::size_t min_frequency = 0;
  std::string thresholds_fingerprint;
  YearScope years;

  Neighbor* find(std::string_view word) {
    for (auto& n : neighbors)
      if (n.word == word) return &n;
    return nullptr;
  }

  void set_included(std::string_view word, bool included) {
    auto* n = find(word);
    if (n == nullptr) throw UnknownWord(std::string(word), "not a neighbor");
    n->included = included;
  }
};

struct SimilarOptions {
  std::size_t k = 300;
  std::size_t min_frequency = 5;
  // Restrict candidates to words whose dominant POS falls in these classes.
  std::optional<std::set<PosClass>> pos_classes;
  unsigned threads = 1;
};

// Exact scan over every candidate word. Candidates must occur at least
// `min_frequency` times in the store's scope and score strictly above zero.
inline SimilarWordSet top_k_similar(const Vocabulary& vocab, const CountStore& store,
                                    const std::string& central, const SimilarOptions& opts = {}) {
  if (opts.k < 1) throw ConfigError("k must be >= 1");
  const auto central_id = vocab.find(central);
  if (!central_id) throw UnknownWord(central);

  SimilarWordSet result;
  result.central_id = *central_id;
  result.central = central;
  result.k = opts.k;
  result.min_frequency = opts.min_frequency;
  result.thresholds_fingerprint = store.meta().thresholds.fingerprint();
  result.years = store.meta().years;

  const PmiVector query = pmi_vector(*central_id, store);
  if (query.empty()) return result;

  struct Scored {
    double score;
    WordId id;
  };
  auto better = [](const Scored& a, const Scored& b) { return ranks_before(a.score, a.id, b.score, b.id); };

  const std::size_t v = store.vocab_size();
  const unsigned threads = resolve_threads(opts.threads);
  std::vector<std::vector<Scored>> partial(shard_count(v, threads));
  parallel_shards(v, threads, [&](std::size_t s, std::size_t b, std::size_t e) {
    auto& best = partial[s];  // heap whose front is the worst kept candidate
    for (std::size_t w = b; w < e; ++w) {
      const auto id = static_cast<WordId>(w);
      if (id == *central_id || store.unigram(id) < std::max<std::size_t>(1, opts.min_frequency)) continue;
      if (opts.pos_classes && !opts.pos_classes->count(pos_class(vocab.dominant_pos(id)))) continue;
      const double score = cosine(query, pmi_vector(id, store));
      if (!(score > 0.0)) continue;
      const Scored cand{score, id};
      if (best.size() < opts.k) {
        best.push_back(cand);
        std::push_heap(best.begin(), best.end(), better);
      } else if (better(cand, best.front())) {
        std::pop_heap(best.begin(), best.end(), better);
        best.back() = cand;
        std::push_heap(best.begin(), best.end(), better);
      }
    }
  });

  std::vector<Scored> all;
  for (auto& p : partial) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end(), better);
  if (all.size() > opts.k) all.resize(opts.k);
  for (const auto& s : all) result.neighbors.push_back({s.id, vocab.surface(s.id), s.score, true});
  return result;
}

inline nlohmann::json to_json(const SimilarWordSet& s) {
  nlohmann::json neighbors = nlohmann::json::array();
  for (const auto& n : s.neighbors)
    neighbors.push_back({{"word", n.word}, {"score", n.score}, {"included", n.included}});
  return {{"central", s.central},
          {"neighbors", neighbors},
          {"meta",
           {{"k", s.k},
            {"min_frequency", s.min_frequency},
            {"thresholds_fingerprint", s.thresholds_fingerprint},
            {"years", s.years}}}};
}

// Reads either a similar-word JSON document or a bare {"central", "words"}
// match list. Words absent from the vocabulary are kept by surface only.
inline SimilarWordSet similar_set_from_json(const nlohmann::json& j, const Vocabulary& vocab) {
  SimilarWordSet s;
  if (j.contains("central") && j["central"].is_string()) {
    s.central = j["central"].get<std::string>();
    if (auto id = vocab.find(s.central)) s.central_id = *id;
  }
  auto add = [&](const std::string& word, double score, bool included) {
    Neighbor n;
    n.word = word;
    n.score = score;
    n.included = included;
    if (auto id = vocab.find(word)) n.id = *id;
    s.neighbors.push_back(std::move(n));
  };
  if (j.contains("neighbors")) {
    for (const auto& n : j.at("neighbors"))
      add(n.at("word").get<std::string>(), n.value("score", 0.0), n.value("included", true));
  } else if (j.contains("words")) {
    for (const auto& w : j.at("words")) add(w.get<std::string>(), 0.0, true);
  } else {
    throw ConfigError("match file needs \"neighbors\" or \"words\"");
  }
  if (j.contains("meta")) {
    const auto& m = j["meta"];
    s.k = m.value("k", s.neighbors.size());
    s.min_frequency = m.value("min_frequency", std::size_t{0});
    s.thresholds_fingerprint = m.value("thresholds_fingerprint", std::string{});
    if (m.contains("years")) s.years = m["years"].get<YearScope>();
  } else {
    s.k = s.neighbors.size();
  }
  return s;
}

}  // namespace topicdraw
