#pragma once

// End-to-end run for one central word: similar words, condensed corpus,
// topic model and a markdown report, all written to one directory.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <functional>
#include <optional>
#include <string>

#include "topicdraw/condenser.hpp"
#include "topicdraw/corpus.hpp"
#include "topicdraw/count_store_io.hpp"
#include "topicdraw/error.hpp"
#include "topicdraw/similarity.hpp"
#include "topicdraw/topics.hpp"
#include "topicdraw/window_stats.hpp"

#ifndef TOPICDRAW_DEFAULT_STOPWORDS
#define TOPICDRAW_DEFAULT_STOPWORDS ""
#endif

namespace topicdraw {

inline fs::path default_stopwords_path() { return TOPICDRAW_DEFAULT_STOPWORDS; }

// Stopwords from `path`, or the bundled list when no path is given and the
// bundled file exists.
inline StopwordList resolve_stopwords(const std::optional<fs::path>& path, bool disabled) {
  if (disabled) return {};
  if (path) return load_stopwords(*path);
  const fs::path fallback = default_stopwords_path();
  std::error_code ec;
  if (!fallback.empty() && fs::exists(fallback, ec)) return load_stopwords(fallback);
  return {};
}

inline YearScope resolve_scope(const Corpus& corpus, const std::optional<YearRange>& range) {
  if (!range) return corpus.years();
  auto scope = corpus.years_in(*range);
  if (scope.empty()) throw DomainError("no corpus years in " + format_year_range(*range));
  return scope;
}

struct PipelineConfig {
  fs::path corpus;
  std::optional<fs::path> manifest;
  std::optional<fs::path> thresholds;
  std::size_t k = 300;
  std::size_t min_frequency = 5;
  std::optional<fs::path> stopwords;
  bool no_stopwords = false;
  LdaConfig lda;
  std::optional<YearRange> years;
  fs::path out;
  ExportFormat format = ExportFormat::tagged;
  bool summary = true;
  unsigned threads = 1;
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"corpus", c.corpus.string()},
          {"manifest", c.manifest ? c.manifest->string() : ""},
          {"thresholds", c.thresholds ? c.thresholds->string() : ""},
          {"k", c.k},
          {"min_frequency", c.min_frequency},
          {"stopwords", c.no_stopwords ? "" : c.stopwords ? c.stopwords->string() : default_stopwords_path().string()},
          {"lda", to_json(c.lda)},
          {"years", c.years ? format_year_range(*c.years) : "all"},
          {"out", c.out.string()},
          {"format", c.format == ExportFormat::tagged ? "tagged" : "plain"},
          {"threads", c.threads}};
}

// A failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::exception& cause, bool domain)
      : Error(stage + ": " + cause.what()), stage_(std::move(stage)), domain_(domain) {}

  const std::string& stage() const noexcept { return stage_; }
  bool domain() const noexcept { return domain_; }

 private:
  std::string stage_;
  bool domain_;
};

inline std::string markdown_report(const SimilarWordSet& similar, const CondensedCorpus& condensed,
                                   const TopicModelResult& model) {
  std::string out = "# Related topics for " + similar.central + "\n\n";
  out += "## Similar words\n\n| rank | word | score | included |\n|---|---|---|---|\n";
  for (std::size_t i = 0; i < similar.neighbors.size(); ++i) {
    const auto& n = similar.neighbors[i];
    char score[32];
    std::snprintf(score, sizeof score, "%.4f", n.score);
    out += "| " + std::to_string(i + 1) + " | " + n.word + " | " + score + " | " +
           (n.included ? "yes" : "no") + " |\n";
  }
  out += "\n## Corpus size\n\n" + reduction_table(condensed);
  out += "\n## Topic words\n\n";
  const auto summary = summary_words(model);
  out += "Prevalence-weighted summary: ";
  for (std::size_t i = 0; i < summary.size(); ++i) out += (i ? " " : "") + summary[i].word;
  out += "\n\n| topic | prevalence | top words |\n|---|---|---|\n";
  const auto mass = corpus_prevalence(model);
  for (std::size_t t = 0; t < model.topics; ++t) {
    char p[32];
    std::snprintf(p, sizeof p, "%.4f", mass[t]);
    std::string words;
    for (const auto& w : top_words(model, t)) words += (words.empty() ? "" : " ") + w.word;
    out += "| " + std::to_string(t) + " | " + p + " | " + words + " |\n";
  }
  return out;
}

struct DrawResult {
  SimilarWordSet similar;
  CondensedCorpus condensed;
  TopicModelResult model;
};

using StageLogger = std::function<void(const std::string& stage, const std::string& message)>;

// Stages run in order; an exception is rethrown as StageError after a
// FAILED marker naming the stage is written. Earlier outputs are kept.
inline DrawResult draw(const PipelineConfig& cfg, const std::string& central,
                       const StageLogger& log = {}) {
  std::string stage = "setup";
  auto note = [&](const std::string& msg) {
    if (log) log(stage, msg);
  };
  try {
    cfg.lda.validate();
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out.string() + ": " + ec.message());
    fs::remove(cfg.out / "FAILED", ec);

    stage = "ingest";
    const auto corpus = ingest(cfg.corpus, {cfg.manifest, cfg.threads});
    note(std::to_string(corpus->total().documents) + " documents");
    if (!corpus->vocabulary().contains(central)) throw UnknownWord(central);
    const auto scope = resolve_scope(*corpus, cfg.years);
    const auto table = cfg.thresholds ? load_thresholds(*cfg.thresholds) : ThresholdTable::standard();
    const auto stop = resolve_stopwords(cfg.stopwords, cfg.no_stopwords);

    stage = "counts";
    const auto store = build_counts(*corpus, table, scope, {cfg.threads, {}});
    note(std::to_string(store.pair_entries()) + " pair entries");

    stage = "similar";
    DrawResult r;
    r.similar = top_k_similar(corpus->vocabulary(), store, central,
                              {cfg.k, cfg.min_frequency, std::nullopt, cfg.threads});
    write_text(cfg.out / "similar.json", json_text(to_json(r.similar)));
    note(std::to_string(r.similar.neighbors.size()) + " neighbors");

    stage = "condense";
    r.condensed = condense(*corpus, make_match_set(r.similar), scope, cfg.threads);
    export_directory(r.condensed, *corpus, cfg.out / "condensed", cfg.format);
    write_text(cfg.out / "stats.json", json_text(reduction_report(r.condensed)));
    note(std::to_string(r.condensed.total.lines_kept) + " lines kept");

    stage = "topics";
    const auto condensed_corpus = ingest(cfg.out / "condensed", {std::nullopt, cfg.threads});
    r.model = train_lda(*condensed_corpus, all_documents(*condensed_corpus), stop, cfg.lda);
    write_text(cfg.out / "model.json", model_json(r.model, cfg.summary));

    stage = "report";
    write_text(cfg.out / "report.md", markdown_report(r.similar, r.condensed, r.model));
    return r;
  } catch (const std::exception& e) {
    std::error_code ec;
    if (fs::is_directory(cfg.out, ec)) {
      try {
        write_text(cfg.out / "FAILED", stage + ": " + e.what() + "\n");
      } catch (...) {
      }
    }
    throw StageError(stage, e, dynamic_cast<const DomainError*>(&e) != nullptr);
  }
}

}  // namespace topicdraw
