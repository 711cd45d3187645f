#pragma once

// Latent Dirichlet allocation by collapsed Gibbs sampling.
//
//   p(z_i = k | z_-i, w) ∝ (n_dk + alpha) (n_kw + beta) / (n_k + V beta)
//
// One chain, documents visited in (year, seq) order, tokens left to right.
// phi and theta are read off the final sweep's counts.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topicdraw/condenser.hpp"
#include "topicdraw/corpus.hpp"
#include "topicdraw/error.hpp"

namespace topicdraw {

struct LdaConfig {
  std::size_t topics = 20;
  std::optional<double> alpha;  // defaults to 50 / topics
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::size_t burn_in = 200;
  std::uint64_t seed = 0;
  std::size_t min_doc_len = 1;

  double resolved_alpha() const { return alpha ? *alpha : 50.0 / static_cast<double>(topics); }

  void validate() const {
    if (topics < 1) throw ConfigError("topic count must be >= 1");
    if (!(resolved_alpha() > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (burn_in >= iterations) throw ConfigError("burn_in must be < iterations");
  }
};

inline nlohmann::json to_json(const LdaConfig& c) {
  return {{"k", c.topics},         {"alpha", c.resolved_alpha()}, {"beta", c.beta},
          {"iterations", c.iterations}, {"burn_in", c.burn_in},   {"seed", c.seed},
          {"min_doc_len", c.min_doc_len}};
}

// Documents with stopwords removed and a compact vocabulary. Local word ids
// follow corpus id order.
struct LdaCorpus {
  std::vector<std::string> vocab;
  std::vector<DocRef> refs;
  std::vector<std::vector<std::uint32_t>> docs;
  std::uint64_t tokens = 0;
};

// Documents are traversed in (year, seq) order whatever the order of `refs_in`.
inline LdaCorpus prepare_lda_corpus(const Corpus& corpus, std::span<const DocRef> refs_in,
                                    const StopwordList& stop, std::size_t min_doc_len) {
  std::vector<DocRef> refs(refs_in.begin(), refs_in.end());
  std::sort(refs.begin(), refs.end());
  refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
  const auto& vocab = corpus.vocabulary();
  std::vector<char> keep(vocab.size());
  for (WordId w = 0; w < vocab.size(); ++w) keep[w] = stop.contains(vocab.surface(w)) ? 0 : 1;

  std::vector<std::vector<WordId>> filtered;
  std::vector<DocRef> kept_refs;
  std::vector<char> used(vocab.size(), 0);
  for (const auto& ref : refs) {
    const Document* d = corpus.find(ref);
    if (d == nullptr) throw DomainError("document reference not in corpus");
    std::vector<WordId> words;
    for (WordId w : d->words)
      if (keep[w]) words.push_back(w);
    if (words.size() < std::max<std::size_t>(1, min_doc_len)) continue;
    for (WordId w : words) used[w] = 1;
    filtered.push_back(std::move(words));
    kept_refs.push_back(ref);
  }

  LdaCorpus out;
  std::vector<std::uint32_t> local(vocab.size(), 0);
  for (WordId w = 0; w < vocab.size(); ++w) {
    if (!used[w]) continue;
    local[w] = static_cast<std::uint32_t>(out.vocab.size());
    out.vocab.push_back(vocab.surface(w));
  }
  out.refs = std::move(kept_refs);
  out.docs.reserve(filtered.size());
  for (const auto& words : filtered) {
    std::vector<std::uint32_t> doc;
    doc.reserve(words.size());
    for (WordId w : words) doc.push_back(local[w]);
    out.tokens += doc.size();
    out.docs.push_back(std::move(doc));
  }
  if (out.docs.empty()) throw DomainError("empty effective corpus after stopword removal");
  if (out.vocab.size() < 2) throw DomainError("effective vocabulary has fewer than 2 words");
  return out;
}

inline std::vector<DocRef> all_documents(const Corpus& corpus) {
  std::vector<DocRef> refs;
  for (Year y : corpus.years())
    for (const auto& d : corpus.documents(y)) refs.push_back({d.year, d.seq});
  return refs;
}

inline LdaCorpus prepare_lda_corpus(const Corpus& corpus, const StopwordList& stop,
                                    std::size_t min_doc_len) {
  const auto refs = all_documents(corpus);
  return prepare_lda_corpus(corpus, refs, stop, min_doc_len);
}

struct TopicModelResult {
  LdaConfig config;
  std::size_t topics = 0;
  std::vector<std::string> vocab;
  std::vector<DocRef> refs;
  std::vector<double> phi;    // topics x vocab, row-major
  std::vector<double> theta;  // docs x topics, row-major
  std::vector<std::vector<std::uint16_t>> assignments;
  std::vector<double> log_likelihood;

  std::size_t vocab_size() const noexcept { return vocab.size(); }
  std::size_t doc_count() const noexcept { return refs.size(); }
  std::span<const double> phi_row(std::size_t t) const {
    return std::span(phi).subspan(t * vocab.size(), vocab.size());
  }
  std::span<const double> theta_row(std::size_t d) const {
    return std::span(theta).subspan(d * topics, topics);
  }
};

// xoshiro256** seeded through splitmix64. Fixed arithmetic, so a seed gives
// the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    if (!seeded_) seed_state();
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  void seed_state() {
    std::uint64_t z = state_;
    for (auto& s : s_) {
      z += 0x9e3779b97f4a7c15ULL;
      std::uint64_t x = z;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      s = x ^ (x >> 31);
    }
    seeded_ = true;
  }

  std::uint64_t state_;
  std::uint64_t s_[4]{};
  bool seeded_ = false;
};

class GibbsSampler {
 public:
  GibbsSampler(const LdaCorpus& corpus, LdaConfig cfg)
      : corpus_(corpus),
        cfg_(std::move(cfg)),
        k_(cfg_.topics),
        v_(corpus.vocab.size()),
        alpha_(cfg_.resolved_alpha()),
        beta_(cfg_.beta),
        rng_(cfg_.seed) {
    cfg_.validate();
    if (corpus_.docs.empty() || v_ < 2) throw DomainError("empty effective corpus");
    if (k_ > 65535) throw ConfigError("topic count must be <= 65535");
    word_topic_.assign(v_ * k_, 0);
    topic_total_.assign(k_, 0);
    doc_topic_.assign(corpus_.docs.size() * k_, 0);
    z_.resize(corpus_.docs.size());
    for (std::size_t d = 0; d < corpus_.docs.size(); ++d) {
      z_[d].resize(corpus_.docs[d].size());
      for (std::size_t i = 0; i < corpus_.docs[d].size(); ++i) {
        const auto t = static_cast<std::uint16_t>(rng_.below(k_));
        z_[d][i] = t;
        add(d, corpus_.docs[d][i], t);
      }
    }
    weights_.resize(k_);
  }

  void sweep() {
    const double vbeta = static_cast<double>(v_) * beta_;
    for (std::size_t d = 0; d < corpus_.docs.size(); ++d) {
      const auto& doc = corpus_.docs[d];
      std::uint32_t* nd = &doc_topic_[d * k_];
      for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::uint32_t w = doc[i];
        std::uint32_t* nw = &word_topic_[static_cast<std::size_t>(w) * k_];
        const std::uint16_t old = z_[d][i];
        nd[old] -= 1;
        nw[old] -= 1;
        topic_total_[old] -= 1;

        double sum = 0.0;
        for (std::size_t t = 0; t < k_; ++t) {
          sum += (nd[t] + alpha_) * (nw[t] + beta_) / (topic_total_[t] + vbeta);
          weights_[t] = sum;
        }
        const double u = rng_.uniform() * sum;
        std::size_t t = 0;
        while (t + 1 < k_ && weights_[t] <= u) ++t;

        z_[d][i] = static_cast<std::uint16_t>(t);
        nd[t] += 1;
        nw[t] += 1;
        topic_total_[t] += 1;
      }
    }
    ++sweeps_;
  }

  // Joint log p(w, z) under the collapsed model.
  double log_likelihood() const {
    const double k = static_cast<double>(k_);
    const double v = static_cast<double>(v_);
    double ll = k * (std::lgamma(v * beta_) - v * std::lgamma(beta_));
    for (std::size_t t = 0; t < k_; ++t) {
      for (std::size_t w = 0; w < v_; ++w) ll += std::lgamma(word_topic_[w * k_ + t] + beta_);
      ll -= std::lgamma(topic_total_[t] + v * beta_);
    }
    const double docs = static_cast<double>(corpus_.docs.size());
    ll += docs * (std::lgamma(k * alpha_) - k * std::lgamma(alpha_));
    for (std::size_t d = 0; d < corpus_.docs.size(); ++d) {
      for (std::size_t t = 0; t < k_; ++t) ll += std::lgamma(doc_topic_[d * k_ + t] + alpha_);
      ll -= std::lgamma(static_cast<double>(corpus_.docs[d].size()) + k * alpha_);
    }
    return ll;
  }

  std::size_t sweeps() const noexcept { return sweeps_; }
  std::size_t topics() const noexcept { return k_; }
  std::size_t vocab_size() const noexcept { return v_; }
  std::uint32_t doc_topic(std::size_t d, std::size_t t) const { return doc_topic_[d * k_ + t]; }
  std::uint32_t word_topic(std::size_t w, std::size_t t) const { return word_topic_[w * k_ + t]; }
  std::uint64_t topic_total(std::size_t t) const { return topic_total_[t]; }
  const std::vector<std::vector<std::uint16_t>>& assignments() const noexcept { return z_; }

  TopicModelResult result(std::vector<double> trace) const {
    TopicModelResult r;
    r.config = cfg_;
    r.config.alpha = alpha_;
    r.topics = k_;
    r.vocab = corpus_.vocab;
    r.refs = corpus_.refs;
    r.assignments = z_;
    r.log_likelihood = std::move(trace);
    r.phi.resize(k_ * v_);
    const double vbeta = static_cast<double>(v_) * beta_;
    for (std::size_t t = 0; t < k_; ++t)
      for (std::size_t w = 0; w < v_; ++w)
        r.phi[t * v_ + w] = (word_topic_[w * k_ + t] + beta_) / (topic_total_[t] + vbeta);
    r.theta.resize(corpus_.docs.size() * k_);
    const double kalpha = static_cast<double>(k_) * alpha_;
    for (std::size_t d = 0; d < corpus_.docs.size(); ++d) {
      const double len = static_cast<double>(corpus_.docs[d].size());
      for (std::size_t t = 0; t < k_; ++t)
        r.theta[d * k_ + t] = (doc_topic_[d * k_ + t] + alpha_) / (len + kalpha);
    }
    return r;
  }

 private:
  void add(std::size_t d, std::uint32_t w, std::uint16_t t) {
    doc_topic_[d * k_ + t] += 1;
    word_topic_[static_cast<std::size_t>(w) * k_ + t] += 1;
    topic_total_[t] += 1;
  }

  const LdaCorpus& corpus_;
  LdaConfig cfg_;
  std::size_t k_;
  std::size_t v_;
  double alpha_;
  double beta_;
  Rng rng_;
  std::vector<std::uint32_t> word_topic_;  // vocab x topics
  std::vector<std::uint64_t> topic_total_;
  std::vector<std::uint32_t> doc_topic_;  // docs x topics
  std::vector<std::vector<std::uint16_t>> z_;
  std::vector<double> weights_;
  std::size_t sweeps_ = 0;
};

using SweepObserver = std::function<void(const GibbsSampler&)>;

inline TopicModelResult train_lda(const LdaCorpus& corpus, const LdaConfig& cfg,
                                  const SweepObserver& observer = {}) {
  cfg.validate();
  GibbsSampler sampler(corpus, cfg);
  std::vector<double> trace;
  trace.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    sampler.sweep();
    trace.push_back(sampler.log_likelihood());
    if (observer) observer(sampler);
  }
  return sampler.result(std::move(trace));
}

inline TopicModelResult train_lda(const Corpus& corpus, std::span<const DocRef> refs,
                                  const StopwordList& stop, const LdaConfig& cfg,
                                  const SweepObserver& observer = {}) {
  cfg.validate();
  return train_lda(prepare_lda_corpus(corpus, refs, stop, cfg.min_doc_len), cfg, observer);
}

inline TopicModelResult train_lda(const CondensedCorpus& c, const Corpus& corpus,
                                  const StopwordList& stop, const LdaConfig& cfg,
                                  const SweepObserver& observer = {}) {
  return train_lda(corpus, c.documents, stop, cfg, observer);
}

struct WeightedWord {
  std::string word;
  double weight;
};

namespace detail {

inline std::vector<WeightedWord> top_of(std::span<const double> row,
                                        const std::vector<std::string>& vocab, std::size_t n) {
  std::vector<std::size_t> order(row.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (row[a] != row[b]) return row[a] > row[b];
                      return a < b;
                    });
  std::vector<WeightedWord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({vocab[order[i]], row[order[i]]});
  return out;
}

}  // namespace detail

inline constexpr std::size_t kDefaultTopWords = 12;

inline std::vector<WeightedWord> top_words(const TopicModelResult& r, std::size_t topic,
                                           std::size_t n = kDefaultTopWords) {
  if (topic >= r.topics) throw DomainError("topic out of range: " + std::to_string(topic));
  return detail::top_of(r.phi_row(topic), r.vocab, n);
}

// Mean theta over all documents.
inline std::vector<double> corpus_prevalence(const TopicModelResult& r) {
  std::vector<double> mass(r.topics, 0.0);
  for (std::size_t d = 0; d < r.doc_count(); ++d)
    for (std::size_t t = 0; t < r.topics; ++t) mass[t] += r.theta[d * r.topics + t];
  for (auto& m : mass) m /= static_cast<double>(r.doc_count());
  return mass;
}

// A single word ranking: phi rows averaged with corpus prevalence weights.
inline std::vector<WeightedWord> summary_words(const TopicModelResult& r,
                                               std::size_t n = kDefaultTopWords) {
  const auto weights = corpus_prevalence(r);
  std::vector<double> mixed(r.vocab_size(), 0.0);
  for (std::size_t t = 0; t < r.topics; ++t) {
    const auto row = r.phi_row(t);
    for (std::size_t w = 0; w < row.size(); ++w) mixed[w] += weights[t] * row[w];
  }
  return detail::top_of(mixed, r.vocab, n);
}

using PrevalenceSeries = std::map<Year, std::vector<double>>;

// Per-year mean of document-topic rows; years without documents are absent.
inline PrevalenceSeries prevalence(const TopicModelResult& r) {
  PrevalenceSeries series;
  std::map<Year, std::size_t> docs;
  for (std::size_t d = 0; d < r.doc_count(); ++d) {
    auto& v = series[r.refs[d].year];
    v.resize(r.topics, 0.0);
    for (std::size_t t = 0; t < r.topics; ++t) v[t] += r.theta[d * r.topics + t];
    docs[r.refs[d].year] += 1;
  }
  for (auto& [y, v] : series)
    for (auto& x : v) x /= static_cast<double>(docs[y]);
  return series;
}

// Restricted to documents of a condensed corpus the model was trained on.
inline PrevalenceSeries prevalence(const TopicModelResult& r, const CondensedCorpus& c) {
  for (const auto& ref : r.refs)
    if (!std::binary_search(c.documents.begin(), c.documents.end(), ref))
      throw DomainError("model was not trained on this condensed corpus");
  return prevalence(r);
}

namespace detail {

inline void append_fixed(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  out += buf;
}

inline void append_matrix(std::string& out, std::span<const double> m, std::size_t rows,
                          std::size_t cols) {
  out += "[";
  for (std::size_t r = 0; r < rows; ++r) {
    out += r == 0 ? "\n    [" : ",\n    [";
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += ",";
      append_fixed(out, m[r * cols + c]);
    }
    out += "]";
  }
  out += rows ? "\n  ]" : "]";
}

}  // namespace detail

// model.json: phi and theta as row-major arrays of 6-decimal fixed numbers;
// everything else as ordinary JSON.
inline std::string model_json(const TopicModelResult& r, bool summary, std::size_t top_n = kDefaultTopWords) {
  using nlohmann::json;
  json top = json::array();
  for (std::size_t t = 0; t < r.topics; ++t) {
    json words = json::array();
    for (const auto& w : top_words(r, t, top_n)) words.push_back({{"word", w.word}, {"weight", w.weight}});
    top.push_back(words);
  }
  json docs = json::array();
  for (const auto& ref : r.refs) docs.push_back({ref.year, ref.seq});
  json prev = json::object();
  for (const auto& [y, v] : prevalence(r)) prev[std::to_string(y)] = v;

  auto field = [](std::string& out, const char* name, const json& value) {
    out += "  \"";
    out += name;
    out += "\": ";
    out += value.dump();
    out += ",\n";
  };
  std::string out = "{\n";
  field(out, "config", to_json(r.config));
  field(out, "topics", r.topics);
  field(out, "vocabulary", r.vocab);
  field(out, "documents", docs);
  field(out, "top_words", top);
  if (summary) {
    json words = json::array();
    for (const auto& w : summary_words(r, top_n)) words.push_back({{"word", w.word}, {"weight", w.weight}});
    field(out, "summary", words);
  }
  field(out, "prevalence", prev);
  field(out, "log_likelihood", r.log_likelihood);
  out += "  \"phi\": ";
  detail::append_matrix(out, r.phi, r.topics, r.vocab_size());
  out += ",\n  \"theta\": ";
  detail::append_matrix(out, r.theta, r.doc_count(), r.topics);
  out += "\n}\n";
  return out;
}

}  // namespace topicdraw
