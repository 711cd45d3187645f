#pragma once

// Directed co-occurrence counting under information-budgeted context windows.
//
// For a target token Y and a context token X on one side of it, the
// conditional self-information is -log Pr(X | Y, side), estimated from
// directed pair counts. A window grows outward one token at a time while the
// running sum of that quantity stays within the budget assigned to the
// target's POS class.
//
// Counts are gathered in two passes: a fixed +-5 window bootstraps the
// estimates, then every window is re-sized with them and the pairs recounted.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topicdraw/corpus.hpp"
#include "topicdraw/error.hpp"
#include "topicdraw/parallel.hpp"
#include "topicdraw/sha256.hpp"
#include "topicdraw/years.hpp"

namespace topicdraw {

enum class Side : std::uint8_t { left = 0, right = 1 };

inline char side_code(Side s) noexcept { return s == Side::left ? 'L' : 'R'; }

enum class PosClass : std::uint8_t { noun = 0, verb, adjective, adverb, other };

inline constexpr std::array<std::string_view, 5> kPosClassNames = {"noun", "verb", "adjective",
                                                                   "adverb", "default"};

inline PosClass pos_class(std::string_view tag) noexcept {
  if (tag.empty()) return PosClass::other;
  switch (tag.front()) {
    case 'n': return PosClass::noun;
    case 'v': return PosClass::verb;
    case 'a': return PosClass::adjective;
    case 'd': return PosClass::adverb;
    default: return PosClass::other;
  }
}

inline PosClass parse_pos_class(std::string_view name) {
  for (std::size_t i = 0; i < kPosClassNames.size(); ++i)
    if (kPosClassNames[i] == name) return static_cast<PosClass>(i);
  throw ConfigError("unknown POS class: " + std::string(name));
}

struct Budget {
  double left = 0.0;
  double right = 0.0;

  double operator[](Side s) const noexcept { return s == Side::left ? left : right; }
  friend bool operator==(const Budget&, const Budget&) = default;
};

// Per-POS-class left/right information budgets, in nats.
class ThresholdTable {
 public:
  ThresholdTable() { rows_.fill(Budget{15.0, 15.0}); }

  // Noun 21/14, verb 24/15, adjective 7/9, adverb 12/20; default 15/15.
  static ThresholdTable standard() {
    ThresholdTable t;
    t.set(PosClass::noun, {21, 14});
    t.set(PosClass::verb, {24, 15});
    t.set(PosClass::adjective, {7, 9});
    t.set(PosClass::adverb, {12, 20});
    t.set(PosClass::other, {15, 15});
    return t;
  }

  static ThresholdTable uniform(double left, double right) {
    ThresholdTable t;
    t.rows_.fill(Budget{left, right});
    t.validate();
    return t;
  }

  const Budget& operator[](PosClass c) const noexcept { return rows_[static_cast<std::size_t>(c)]; }

  void set(PosClass c, Budget b) {
    if (!(b.left >= 0.0) || !(b.right >= 0.0))
      throw ConfigError("thresholds must be >= 0 for " +
                        std::string(kPosClassNames[static_cast<std::size_t>(c)]));
    rows_[static_cast<std::size_t>(c)] = b;
  }

  void validate() const {
    for (std::size_t i = 0; i < rows_.size(); ++i)
      if (!(rows_[i].left >= 0.0) || !(rows_[i].right >= 0.0))
        throw ConfigError("thresholds must be >= 0 for " + std::string(kPosClassNames[i]));
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < rows_.size(); ++i)
      j[std::string(kPosClassNames[i])] = {{"left", rows_[i].left}, {"right", rows_[i].right}};
    return j;
  }

  // Rows missing from the JSON keep their standard values.
  static ThresholdTable from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("threshold table must be a JSON object");
    ThresholdTable t = standard();
    for (auto& [key, row] : j.items()) {
      const PosClass c = parse_pos_class(key);
      if (!row.is_object() || !row.contains("left") || !row.contains("right") ||
          !row["left"].is_number() || !row["right"].is_number())
        throw ConfigError("threshold row '" + key + "' needs numeric left and right");
      t.set(c, {row["left"].get<double>(), row["right"].get<double>()});
    }
    return t;
  }

  std::string fingerprint() const { return sha256_hex(to_json().dump()).substr(0, 16); }

  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;

 private:
  std::array<Budget, 5> rows_{};
};

inline ThresholdTable load_thresholds(const fs::path& path) {
  try {
    return ThresholdTable::from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed threshold file " + path.string() + ": " + e.what());
  }
}

inline constexpr std::size_t kBootstrapWindow = 5;
inline constexpr std::size_t kWindowCap = 50;
inline constexpr double kQuerySmoothing = 0.5;

// Packed (target, context, side) key; numeric order equals lexicographic
// order on the triple.
inline std::uint64_t pair_key(WordId target, WordId context, Side side) noexcept {
  return (static_cast<std::uint64_t>(target) << 32) | (static_cast<std::uint64_t>(context) << 1) |
         static_cast<std::uint64_t>(side);
}
inline WordId key_target(std::uint64_t k) noexcept { return static_cast<WordId>(k >> 32); }
inline WordId key_context(std::uint64_t k) noexcept {
  return static_cast<WordId>((k >> 1) & 0x7fffffffu);
}
inline Side key_side(std::uint64_t k) noexcept { return static_cast<Side>(k & 1u); }

struct PairCount {
  WordId target;
  WordId context;
  Side side;
  std::uint64_t count;
};

struct CountMeta {
  int pass = 0;
  ThresholdTable thresholds = ThresholdTable::standard();
  std::string corpus_fingerprint;
  YearScope years;
  std::size_t vocab_size = 0;
  std::size_t bootstrap_window = kBootstrapWindow;
  std::size_t cap = kWindowCap;
  double epsilon = kQuerySmoothing;
  std::string log_base = "e";
  std::string marginals = "side-specific";

  friend bool operator==(const CountMeta&, const CountMeta&) = default;
};

// Sparse directed co-occurrence counts plus unigram counts over a year
// scope. Immutable once built; pairs are stored sorted by key with per-target
// row offsets.
class CountStore {
 public:
  CountStore() = default;

  // `entries` must be sorted by key with no duplicate keys and no zero counts.
  CountStore(CountMeta meta, std::vector<std::uint64_t> unigram,
             std::vector<std::pair<std::uint64_t, std::uint64_t>> entries)
      : meta_(std::move(meta)), unigram_(std::move(unigram)) {
    const std::size_t v = meta_.vocab_size;
    if (unigram_.size() != v) throw Error("count store: unigram table size mismatch");
    offsets_.assign(v + 1, 0);
    for (auto& m : target_total_) m.assign(v, 0);
    for (auto& m : context_total_) m.assign(v, 0);
    keys_.reserve(entries.size());
    counts_.reserve(entries.size());
    for (const auto& [key, count] : entries) {
      const WordId t = key_target(key);
      const WordId c = key_context(key);
      const auto s = static_cast<std::size_t>(key_side(key));
      if (t >= v || c >= v) throw Error("count store: pair id out of range");
      keys_.push_back(key);
      counts_.push_back(count);
      offsets_[t + 1] += 1;
      target_total_[s][t] += count;
      context_total_[s][c] += count;
      side_total_[s] += count;
    }
    for (std::size_t i = 0; i < v; ++i) offsets_[i + 1] += offsets_[i];
    for (auto u : unigram_) total_tokens_ += u;
  }

  const CountMeta& meta() const noexcept { return meta_; }
  int pass() const noexcept { return meta_.pass; }
  std::size_t vocab_size() const noexcept { return meta_.vocab_size; }
  std::uint64_t total_tokens() const noexcept { return total_tokens_; }
  std::size_t pair_entries() const noexcept { return keys_.size(); }

  std::uint64_t unigram(WordId w) const noexcept { return w < unigram_.size() ? unigram_[w] : 0; }
  bool has_word(WordId w) const noexcept { return unigram(w) > 0; }

  std::uint64_t count(WordId target, WordId context, Side side) const noexcept {
    if (target >= vocab_size()) return 0;
    const auto begin = keys_.begin() + static_cast<std::ptrdiff_t>(offsets_[target]);
    const auto end = keys_.begin() + static_cast<std::ptrdiff_t>(offsets_[target + 1]);
    const auto key = pair_key(target, context, side);
    auto it = std::lower_bound(begin, end, key);
    if (it == end || *it != key) return 0;
    return counts_[static_cast<std::size_t>(it - keys_.begin())];
  }

  // Pairs with `target` on `side`, summed over contexts.
  std::uint64_t target_total(WordId target, Side side) const noexcept {
    return target < vocab_size() ? target_total_[static_cast<std::size_t>(side)][target] : 0;
  }
  std::uint64_t context_total(WordId context, Side side) const noexcept {
    return context < vocab_size() ? context_total_[static_cast<std::size_t>(side)][context] : 0;
  }
  std::uint64_t side_total(Side side) const noexcept {
    return side_total_[static_cast<std::size_t>(side)];
  }

  // The row of `target`, ordered by (context, side).
  struct Row {
    std::span<const std::uint64_t> keys;
    std::span<const std::uint64_t> counts;
    std::size_t size() const noexcept { return keys.size(); }
  };

  Row row(WordId target) const noexcept {
    if (target >= vocab_size()) return {};
    const std::size_t b = offsets_[target], e = offsets_[target + 1];
    return {std::span(keys_).subspan(b, e - b), std::span(counts_).subspan(b, e - b)};
  }

  template <typename Fn>
  void for_each_pair(Fn&& fn) const {
    for (std::size_t i = 0; i < keys_.size(); ++i)
      fn(PairCount{key_target(keys_[i]), key_context(keys_[i]), key_side(keys_[i]), counts_[i]});
  }

  friend bool operator==(const CountStore& a, const CountStore& b) {
    return a.meta_ == b.meta_ && a.unigram_ == b.unigram_ && a.keys_ == b.keys_ &&
           a.counts_ == b.counts_;
  }

 private:
  CountMeta meta_;
  std::vector<std::uint64_t> unigram_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::size_t> offsets_;
  std::array<std::vector<std::uint64_t>, 2> target_total_;
  std::array<std::vector<std::uint64_t>, 2> context_total_;
  std::array<std::uint64_t, 2> side_total_{};
  std::uint64_t total_tokens_ = 0;
};

// -log of the add-epsilon-smoothed Pr(context | target, side), natural log.
// With epsilon = 0 an unseen pair carries infinite information.
inline double information(WordId context, WordId target, Side side, const CountStore& store,
                          double epsilon = kQuerySmoothing) {
  if (!store.has_word(target)) throw DomainError("unknown target: id " + std::to_string(target));
  const double pair = static_cast<double>(store.count(target, context, side));
  const double marginal = static_cast<double>(store.target_total(target, side));
  if (epsilon == 0.0 && pair == 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(pair + epsilon) +
         std::log(marginal + epsilon * static_cast<double>(store.vocab_size()));
}

struct SideTrace {
  std::size_t extent = 0;
  double information = 0.0;
};

struct WindowTrace {
  std::size_t position = 0;
  SideTrace left;
  SideTrace right;

  const SideTrace& operator[](Side s) const noexcept { return s == Side::left ? left : right; }
};

inline PosClass target_class(const Corpus& corpus, const Document& doc, std::size_t i) {
  return pos_class(corpus.tag_name(doc.tags[i]));
}

// Sizes the window around doc[pos] from `store` (unsmoothed estimates). Each
// side stops before the first token that would push its running information
// strictly above the side's budget, at the document edge, or at `cap`.
inline WindowTrace grow_window(std::span<const WordId> words, std::size_t pos, Budget budget,
                               const CountStore& store, std::size_t cap = kWindowCap) {
  WindowTrace trace;
  trace.position = pos;
  const WordId target = words[pos];
  for (Side side : {Side::left, Side::right}) {
    SideTrace& st = side == Side::left ? trace.left : trace.right;
    const std::size_t room = side == Side::left ? pos : words.size() - pos - 1;
    const std::size_t limit = std::min(room, cap);
    const double threshold = budget[side];
    const double log_marginal = std::log(static_cast<double>(store.target_total(target, side)));
    while (st.extent < limit) {
      const std::size_t j = side == Side::left ? pos - st.extent - 1 : pos + st.extent + 1;
      const std::uint64_t c = store.count(target, words[j], side);
      if (c == 0) break;
      const double step = -std::log(static_cast<double>(c)) + log_marginal;
      if (st.information + step > threshold) break;
      st.information += step;
      st.extent += 1;
    }
  }
  return trace;
}

inline WindowTrace grow_window(const Corpus& corpus, const Document& doc, std::size_t pos,
                               const ThresholdTable& table, const CountStore& store) {
  if (pos >= doc.size()) throw DomainError("position outside document");
  return grow_window(doc.words, pos, table[target_class(corpus, doc, pos)], store, store.meta().cap);
}

struct BuildOptions {
  unsigned threads = 1;
  // Called with (pass, fraction of that pass's documents done).
  std::function<void(int, double)> progress;
};

namespace detail {

using KeyCounts = std::vector<std::pair<std::uint64_t, std::uint64_t>>;

inline KeyCounts compact_keys(std::vector<std::uint64_t>& keys) {
  std::sort(keys.begin(), keys.end());
  KeyCounts out;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    out.emplace_back(keys[i], j - i);
    i = j;
  }
  keys.clear();
  return out;
}

inline KeyCounts merge_counts(const KeyCounts& a, const KeyCounts& b) {
  KeyCounts out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j].first < a[i].first) {
      out.push_back(b[j++]);
    } else {
      out.emplace_back(a[i].first, a[i].second + b[j].second);
      ++i, ++j;
    }
  }
  return out;
}

// Accumulates raw keys and folds them into sorted (key, count) runs once the
// buffer grows large, bounding memory on big corpora.
class PairAccumulator {
 public:
  void add(std::uint64_t key) {
    buffer_.push_back(key);
    if (buffer_.size() >= kFlushAt) flush();
  }

  KeyCounts finish() {
    flush();
    return std::move(counts_);
  }

 private:
  static constexpr std::size_t kFlushAt = std::size_t{1} << 23;

  void flush() {
    if (buffer_.empty()) return;
    auto run = compact_keys(buffer_);
    counts_ = counts_.empty() ? std::move(run) : merge_counts(counts_, run);
  }

  std::vector<std::uint64_t> buffer_;
  KeyCounts counts_;
};

inline std::vector<const Document*> scope_documents(const Corpus& corpus, const YearScope& scope) {
  std::vector<const Document*> docs;
  for (Year y : scope)
    for (const auto& d : corpus.documents(y)) docs.push_back(&d);
  return docs;
}

template <typename WindowFn>
KeyCounts count_pass(const std::vector<const Document*>& docs, unsigned threads,
                     const std::function<void(double)>& progress, WindowFn&& window) {
  const std::size_t shards = shard_count(docs.size(), threads);
  std::vector<KeyCounts> partial(shards);
  parallel_shards(docs.size(), threads, [&](std::size_t s, std::size_t b, std::size_t e) {
    PairAccumulator acc;
    for (std::size_t i = b; i < e; ++i) {
      const Document& d = *docs[i];
      for (std::size_t p = 0; p < d.size(); ++p) {
        const auto [left, right] = window(d, p);
        for (std::size_t k = 1; k <= left; ++k) acc.add(pair_key(d.words[p], d.words[p - k], Side::left));
        for (std::size_t k = 1; k <= right; ++k) acc.add(pair_key(d.words[p], d.words[p + k], Side::right));
      }
      if (s == 0 && progress && (i - b) % 4096 == 0)
        progress(static_cast<double>(i - b) / static_cast<double>(std::max<std::size_t>(1, e - b)));
    }
    partial[s] = acc.finish();
  });
  KeyCounts merged;
  for (auto& p : partial) merged = merged.empty() ? std::move(p) : merge_counts(merged, p);
  return merged;
}

}  // namespace detail

inline CountStore build_counts(const Corpus& corpus, const ThresholdTable& table,
                               const YearScope& scope_in, const BuildOptions& opts = {}) {
  table.validate();
  const YearScope scope = normalize_scope(scope_in);
  corpus.require_scope(scope);
  const unsigned threads = resolve_threads(opts.threads);
  const auto docs = detail::scope_documents(corpus, scope);
  const std::size_t v = corpus.vocabulary().size();

  std::vector<std::uint64_t> unigram(v, 0);
  for (const Document* d : docs)
    for (WordId w : d->words) unigram[w] += 1;

  CountMeta meta;
  meta.thresholds = table;
  meta.corpus_fingerprint = corpus.fingerprint();
  meta.years = scope;
  meta.vocab_size = v;

  auto report = [&](int pass) {
    return std::function<void(double)>([&, pass](double f) {
      if (opts.progress) opts.progress(pass, f);
    });
  };

  meta.pass = 1;
  auto pass1 = detail::count_pass(docs, threads, report(1), [](const Document& d, std::size_t p) {
    return std::pair{std::min(p, kBootstrapWindow), std::min(d.size() - p - 1, kBootstrapWindow)};
  });
  const CountStore bootstrap(meta, unigram, std::move(pass1));
  if (opts.progress) opts.progress(1, 1.0);

  meta.pass = 2;
  auto pass2 = detail::count_pass(docs, threads, report(2), [&](const Document& d, std::size_t p) {
    const auto trace = grow_window(d.words, p, table[target_class(corpus, d, p)], bootstrap, kWindowCap);
    return std::pair{trace.left.extent, trace.right.extent};
  });
  if (opts.progress) opts.progress(2, 1.0);
  return CountStore(meta, std::move(unigram), std::move(pass2));
}

// Fixed-width counting only; exposed for diagnostics and tests.
inline CountStore build_bootstrap_counts(const Corpus& corpus, const YearScope& scope_in,
                                         unsigned threads = 1) {
  const YearScope scope = normalize_scope(scope_in);
  corpus.require_scope(scope);
  const auto docs = detail::scope_documents(corpus, scope);
  std::vector<std::uint64_t> unigram(corpus.vocabulary().size(), 0);
  for (const Document* d : docs)
    for (WordId w : d->words) unigram[w] += 1;
  CountMeta meta;
  meta.pass = 1;
  meta.corpus_fingerprint = corpus.fingerprint();
  meta.years = scope;
  meta.vocab_size = corpus.vocabulary().size();
  auto counts = detail::count_pass(docs, resolve_threads(threads), {}, [](const Document& d, std::size_t p) {
    return std::pair{std::min(p, kBootstrapWindow), std::min(d.size() - p - 1, kBootstrapWindow)};
  });
  return CountStore(meta, std::move(unigram), std::move(counts));
}

}  // namespace topicdraw
