#pragma once

// Related-corpus extraction: keep every line that contains the central word
// or any included neighbor, matched on exact surface forms.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "topicdraw/corpus.hpp"
#include "topicdraw/count_store_io.hpp"
#include "topicdraw/error.hpp"
#include "topicdraw/parallel.hpp"
#include "topicdraw/similarity.hpp"

namespace topicdraw {

struct MatchSet {
  std::string central;
  std::set<std::string> words;  // always contains `central` when it is non-empty
};

// Central word plus every neighbor still flagged as included.
inline MatchSet make_match_set(const SimilarWordSet& s) {
  MatchSet m;
  m.central = s.central;
  if (!s.central.empty()) m.words.insert(s.central);
  for (const auto& n : s.neighbors)
    if (n.included) m.words.insert(n.word);
  return m;
}

inline MatchSet make_match_set(std::string central, const std::vector<std::string>& words) {
  MatchSet m;
  m.central = std::move(central);
  if (!m.central.empty()) m.words.insert(m.central);
  m.words.insert(words.begin(), words.end());
  return m;
}

struct CondenseStats {
  std::uint64_t lines_kept = 0;
  std::uint64_t lines_scanned = 0;
  std::uint64_t bytes_kept = 0;
  std::uint64_t bytes_scanned = 0;

  CondenseStats& operator+=(const CondenseStats& o) {
    lines_kept += o.lines_kept;
    lines_scanned += o.lines_scanned;
    bytes_kept += o.bytes_kept;
    bytes_scanned += o.bytes_scanned;
    return *this;
  }

  double ratio() const noexcept {
    return bytes_scanned == 0 ? 0.0
                              : static_cast<double>(bytes_kept) / static_cast<double>(bytes_scanned);
  }

  friend bool operator==(const CondenseStats&, const CondenseStats&) = default;
};

struct CondensedCorpus {
  std::string source_fingerprint;
  std::string central;
  std::set<std::string> match;
  std::vector<DocRef> documents;  // ascending (year, seq)
  std::map<Year, CondenseStats> per_year;
  CondenseStats total;
};

inline CondensedCorpus condense(const Corpus& corpus, const MatchSet& match,
                                const YearScope& scope_in, unsigned threads = 1) {
  if (match.words.empty()) throw DomainError("empty match set");
  const YearScope scope = normalize_scope(scope_in);
  corpus.require_scope(scope);

  const auto& vocab = corpus.vocabulary();
  std::vector<char> hit(vocab.size(), 0);
  for (const auto& w : match.words)
    if (auto id = vocab.find(w)) hit[*id] = 1;

  CondensedCorpus out;
  out.source_fingerprint = corpus.fingerprint();
  out.central = match.central;
  out.match = match.words;

  std::vector<std::vector<DocRef>> kept(scope.size());
  std::vector<CondenseStats> stats(scope.size());
  parallel_shards(scope.size(), resolve_threads(threads),
                  [&](std::size_t, std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) {
                      for (const auto& d : corpus.documents(scope[i])) {
                        stats[i].lines_scanned += 1;
                        stats[i].bytes_scanned += d.bytes();
                        bool matched = false;
                        for (WordId w : d.words)
                          if (hit[w]) {
                            matched = true;
                            break;
                          }
                        if (!matched) continue;
                        stats[i].lines_kept += 1;
                        stats[i].bytes_kept += d.bytes();
                        kept[i].push_back({d.year, d.seq});
                      }
                    }
                  });
  for (std::size_t i = 0; i < scope.size(); ++i) {
    out.documents.insert(out.documents.end(), kept[i].begin(), kept[i].end());
    out.per_year[scope[i]] = stats[i];
    out.total += stats[i];
  }
  return out;
}

inline std::string format_kb(std::uint64_t bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lluKB", static_cast<unsigned long long>((bytes + 1023) / 1024));
  return buf;
}

inline nlohmann::json stats_json(const CondenseStats& s) {
  return {{"lines_kept", s.lines_kept},
          {"lines_scanned", s.lines_scanned},
          {"bytes_kept", s.bytes_kept},
          {"bytes_scanned", s.bytes_scanned},
          {"ratio", s.ratio()}};
}

// Original versus condensed size, per year and in total. This is the content
// of stats.json.
inline nlohmann::json reduction_report(const CondensedCorpus& c) {
  nlohmann::json per_year = nlohmann::json::object();
  for (const auto& [y, s] : c.per_year) per_year[std::to_string(y)] = stats_json(s);
  return {{"central", c.central},
          {"match", c.match},
          {"source_fingerprint", c.source_fingerprint},
          {"per_year", per_year},
          {"total", stats_json(c.total)}};
}

inline std::string reduction_table(const CondensedCorpus& c) {
  std::string out = "| year | original size | condensed size | ratio | lines kept |\n";
  out += "|---|---|---|---|---|\n";
  auto row = [&](const std::string& label, const CondenseStats& s) {
    char ratio[32];
    std::snprintf(ratio, sizeof ratio, "%.4f", s.ratio());
    out += "| " + label + " | " + format_kb(s.bytes_scanned) + " | " + format_kb(s.bytes_kept) +
           " | " + ratio + " | " + std::to_string(s.lines_kept) + "/" +
           std::to_string(s.lines_scanned) + " |\n";
  };
  for (const auto& [y, s] : c.per_year) row(std::to_string(y), s);
  row("total", c.total);
  return out;
}

enum class ExportFormat { tagged, plain };

inline ExportFormat parse_export_format(std::string_view s) {
  if (s == "tagged") return ExportFormat::tagged;
  if (s == "plain") return ExportFormat::plain;
  throw ConfigError("unknown export format: " + std::string(s));
}

inline std::string render_line(const Corpus& corpus, const Document& d, ExportFormat format) {
  if (format == ExportFormat::tagged) return d.line;
  std::string out;
  for (WordId w : d.words) {
    if (!out.empty()) out += ' ';
    out += corpus.vocabulary().surface(w);
  }
  return out;
}

// Kept lines of one year, LF-terminated, in seq order.
inline std::string export_year(const CondensedCorpus& c, const Corpus& corpus, Year year,
                               ExportFormat format) {
  std::string out;
  for (const auto& ref : c.documents) {
    if (ref.year != year) continue;
    const Document* d = corpus.find(ref);
    if (d == nullptr) throw DomainError("condensed reference not in corpus");
    out += render_line(corpus, *d, format);
    out += '\n';
  }
  return out;
}

inline std::string export_all(const CondensedCorpus& c, const Corpus& corpus, ExportFormat format) {
  std::string out;
  for (const auto& [y, s] : c.per_year) out += export_year(c, corpus, y, format);
  return out;
}

inline void export_file(const CondensedCorpus& c, const Corpus& corpus, const fs::path& sink,
                        ExportFormat format) {
  write_text(sink, export_all(c, corpus, format));
}

inline std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// One `<year>.txt` per scanned year plus stats.json.
inline void export_directory(const CondensedCorpus& c, const Corpus& corpus, const fs::path& dir,
                             ExportFormat format) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  for (const auto& [y, s] : c.per_year)
    write_text(dir / (std::to_string(y) + ".txt"), export_year(c, corpus, y, format));
  write_text(dir / "stats.json", json_text(reduction_report(c)));
}

}  // namespace topicdraw
