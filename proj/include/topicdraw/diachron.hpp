#pragma once

// Per-year word statistics: relative frequency and cross-year similarity of
// a word's context vector.

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topicdraw/corpus.hpp"
#include "topicdraw/error.hpp"
#include "topicdraw/parallel.hpp"
#include "topicdraw/similarity.hpp"
#include "topicdraw/window_stats.hpp"

namespace topicdraw {

struct SeriesPoint {
  Year year = 0;
  double value = 0.0;
};

struct FrequencySeries {
  std::string word;
  std::vector<SeriesPoint> points;
};

enum class VariationMode { base, adjacent };

inline VariationMode parse_variation_mode(std::string_view s) {
  if (s == "base") return VariationMode::base;
  if (s == "adjacent") return VariationMode::adjacent;
  throw ConfigError("unknown similarity mode: " + std::string(s));
}

inline std::string_view mode_name(VariationMode m) { return m == VariationMode::base ? "base" : "adjacent"; }

struct SimilarityVariationSeries {
  std::string word;
  Year base_year = 0;
  VariationMode mode = VariationMode::base;
  std::vector<SeriesPoint> points;
  std::vector<Year> gaps;  // years where the word does not occur
};

// Share of each year's tokens taken by `word`; years where it is absent
// contribute a zero point.
inline FrequencySeries frequency_series(const std::string& word, const Corpus& corpus,
                                        const YearRange& years) {
  const WordId id = corpus.vocabulary().id(word);
  FrequencySeries s;
  s.word = word;
  for (Year y : corpus.years_in(years)) {
    std::uint64_t hits = 0;
    for (const auto& d : corpus.documents(y))
      for (WordId w : d.words) hits += (w == id);
    const std::uint64_t total = corpus.stats(y).tokens;
    s.points.push_back({y, total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total)});
  }
  return s;
}

struct SeriesOptions {
  VariationMode mode = VariationMode::base;
  unsigned threads = 1;
};

// Each year gets its own two-pass count store and PPMI vector for `word`.
// base mode compares every year to the base year; adjacent mode compares each
// year to the previous year in which the word occurs (the first such year
// scores 1).
inline SimilarityVariationSeries similarity_series(const std::string& word, const Corpus& corpus,
                                                   Year base_year, const YearRange& years,
                                                   const ThresholdTable& table,
                                                   const SeriesOptions& opts = {}) {
  const WordId id = corpus.vocabulary().id(word);
  if (!corpus.has_year(base_year))
    throw DomainError("base year not in corpus: " + std::to_string(base_year));

  SimilarityVariationSeries s;
  s.word = word;
  s.base_year = base_year;
  s.mode = opts.mode;

  std::vector<Year> wanted = corpus.years_in(years);
  std::vector<Year> build = wanted;
  build.push_back(base_year);
  build = normalize_scope(build);

  std::vector<std::optional<PmiVector>> vectors(build.size());
  // Years are independent; each worker handles whole years single-threaded.
  parallel_shards(build.size(), resolve_threads(opts.threads),
                  [&](std::size_t, std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) {
                      const auto store = build_counts(corpus, table, {build[i]});
                      if (store.has_word(id)) vectors[i] = pmi_vector(id, store);
                    }
                  });
  auto vector_of = [&](Year y) -> const std::optional<PmiVector>& {
    return vectors[static_cast<std::size_t>(std::lower_bound(build.begin(), build.end(), y) - build.begin())];
  };

  if (opts.mode == VariationMode::base) {
    const auto& base = vector_of(base_year);
    if (!base) throw UnknownWord(word, "word absent from base year " + std::to_string(base_year));
    for (Year y : wanted) {
      const auto& v = vector_of(y);
      if (!v) {
        s.gaps.push_back(y);
      } else {
        // A word whose base-year vector is empty still matches itself.
        const bool self = y == base_year && base->norm == 0.0;
        s.points.push_back({y, self ? 1.0 : cosine(*base, *v)});
      }
    }
  } else {
    if (!vector_of(base_year)) throw UnknownWord(word, "word absent from base year " + std::to_string(base_year));
    const PmiVector* prev = nullptr;
    for (Year y : wanted) {
      const auto& v = vector_of(y);
      if (!v) {
        s.gaps.push_back(y);
        continue;
      }
      s.points.push_back({y, prev == nullptr ? 1.0 : cosine(*prev, *v)});
      prev = &*v;
    }
  }
  return s;
}

inline nlohmann::json points_json(const std::vector<SeriesPoint>& pts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : pts) out.push_back({{"year", p.year}, {"value", p.value}});
  return out;
}

inline nlohmann::json to_json(const FrequencySeries& s) {
  return {{"word", s.word}, {"points", points_json(s.points)}, {"gaps", nlohmann::json::array()}};
}

inline nlohmann::json to_json(const SimilarityVariationSeries& s) {
  return {{"word", s.word},
          {"base", s.base_year},
          {"mode", mode_name(s.mode)},
          {"points", points_json(s.points)},
          {"gaps", s.gaps}};
}

}  // namespace topicdraw
