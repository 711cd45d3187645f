#pragma once

// Tagged-corpus ingestion: one document per line, whitespace-separated
// `surface/pos` tokens, one file per year.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "topicdraw/error.hpp"
#include "topicdraw/parallel.hpp"
#include "topicdraw/sha256.hpp"
#include "topicdraw/years.hpp"

namespace topicdraw {

namespace fs = std::filesystem;

using WordId = std::uint32_t;
using TagId = std::uint16_t;

inline constexpr std::string_view kMalformedPos = "x";

struct Token {
  std::string surface;
  std::string pos;

  friend bool operator==(const Token&, const Token&) = default;
};

struct ParsedToken {
  std::string_view surface;
  std::string_view pos;
  bool malformed = false;
};

// Splits on the last '/'. A token with no '/', an empty surface or an empty
// tag is kept whole as its surface with pos "x".
inline ParsedToken parse_token(std::string_view raw) {
  const auto slash = raw.rfind('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == raw.size())
    return {raw, kMalformedPos, true};
  return {raw.substr(0, slash), raw.substr(slash + 1), false};
}

inline bool is_token_separator(char c) noexcept { return c == ' ' || c == '\t'; }

// Splits a line into raw tokens on runs of ASCII spaces and tabs. A trailing
// CR (CRLF input) is dropped.
inline std::vector<std::string_view> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_token_separator(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_token_separator(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string normalize_line(std::string_view line) {
  std::string out;
  for (auto tok : split_line(line)) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

struct Document {
  Year year = 0;
  std::size_t seq = 0;  // 0-based line index within the year file
  std::vector<WordId> words;
  std::vector<TagId> tags;
  std::string line;  // tokens joined by single spaces

  std::size_t size() const noexcept { return words.size(); }
  // Bytes of the normalized line plus its LF terminator.
  std::uint64_t bytes() const noexcept { return line.size() + 1; }
};

struct DocRef {
  Year year = 0;
  std::size_t seq = 0;

  friend auto operator<=>(const DocRef&, const DocRef&) = default;
};

class Vocabulary {
 public:
  std::size_t size() const noexcept { return surfaces_.size(); }

  std::optional<WordId> find(std::string_view surface) const {
    auto it = ids_.find(std::string(surface));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  WordId id(std::string_view surface) const {
    if (auto id = find(surface)) return *id;
    throw UnknownWord(std::string(surface));
  }

  bool contains(std::string_view surface) const { return find(surface).has_value(); }

  const std::string& surface(WordId id) const { return surfaces_.at(id); }
  std::uint64_t frequency(WordId id) const { return frequency_.at(id); }
  const std::string& dominant_pos(WordId id) const { return dominant_pos_.at(id); }

 private:
  friend class CorpusBuilder;

  std::vector<std::string> surfaces_;
  std::vector<std::uint64_t> frequency_;
  std::vector<std::string> dominant_pos_;
  std::unordered_map<std::string, WordId> ids_;
};

struct YearStats {
  std::uint64_t documents = 0;
  std::uint64_t tokens = 0;
  std::uint64_t bytes = 0;  // raw file bytes
  std::uint64_t warnings = 0;
};

// Immutable result of an ingest. Safe for concurrent readers.
class Corpus {
 public:
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const std::vector<Year>& years() const noexcept { return years_; }
  bool has_year(Year y) const { return std::binary_search(years_.begin(), years_.end(), y); }

  std::span<const Document> documents(Year y) const {
    auto it = docs_.find(y);
    if (it == docs_.end()) return {};
    return it->second;
  }

  const Document* find(const DocRef& ref) const {
    auto docs = documents(ref.year);
    auto it = std::lower_bound(docs.begin(), docs.end(), ref.seq,
                               [](const Document& d, std::size_t seq) { return d.seq < seq; });
    if (it == docs.end() || it->seq != ref.seq) return nullptr;
    return &*it;
  }

  const YearStats& stats(Year y) const {
    auto it = stats_.find(y);
    if (it == stats_.end()) throw DomainError("year not in corpus: " + std::to_string(y));
    return it->second;
  }

  YearStats total() const {
    YearStats t;
    for (const auto& [y, s] : stats_) {
      t.documents += s.documents;
      t.tokens += s.tokens;
      t.bytes += s.bytes;
      t.warnings += s.warnings;
    }
    return t;
  }

  const std::string& tag_name(TagId t) const { return tags_.at(t); }
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  Token token(const Document& d, std::size_t i) const {
    return {vocab_.surface(d.words.at(i)), tags_.at(d.tags.at(i))};
  }

  std::vector<Token> tokens(const Document& d) const {
    std::vector<Token> out;
    out.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out.push_back(token(d, i));
    return out;
  }

  // Years of the corpus inside an inclusive range.
  YearScope years_in(const YearRange& r) const {
    YearScope out;
    for (Year y : years_)
      if (r.contains(y)) out.push_back(y);
    return out;
  }

  void require_scope(const YearScope& scope) const {
    if (scope.empty()) throw DomainError("empty year scope");
    for (Year y : scope)
      if (!has_year(y)) throw DomainError("year not in corpus: " + std::to_string(y));
  }

 private:
  friend class CorpusBuilder;

  Vocabulary vocab_;
  std::vector<std::string> tags_;
  std::vector<Year> years_;
  std::map<Year, std::vector<Document>> docs_;
  std::map<Year, YearStats> stats_;
  std::string fingerprint_;
};

using CorpusHandle = std::shared_ptr<const Corpus>;

struct YearFile {
  Year year = 0;
  fs::path path;
};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading file: " + path.string());
  return std::move(ss).str();
}

inline std::optional<Year> year_from_stem(const fs::path& path) {
  const std::string stem = path.stem().string();
  if (stem.empty() || stem.size() > 9) return std::nullopt;
  if (!std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); }))
    return std::nullopt;
  return parse_year(stem);
}

// Manifest format: { "years": { "1957": "path", ... } }, paths relative to
// the manifest's directory.
inline std::vector<YearFile> read_manifest(const fs::path& manifest) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (!j.contains("years") || !j["years"].is_object())
    throw ConfigError("manifest lacks a \"years\" object: " + manifest.string());
  std::vector<YearFile> out;
  for (auto& [key, value] : j["years"].items()) {
    if (!value.is_string()) throw ConfigError("manifest entry for " + key + " is not a path");
    fs::path p = value.get<std::string>();
    if (p.is_relative()) p = manifest.parent_path() / p;
    out.push_back({parse_year(key), p});
  }
  return out;
}

inline std::vector<YearFile> discover_year_files(const fs::path& path,
                                                 const std::optional<fs::path>& manifest) {
  std::vector<YearFile> files;
  if (manifest) {
    files = read_manifest(*manifest);
  } else {
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
      for (const auto& entry : fs::directory_iterator(path)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        auto y = year_from_stem(entry.path());
        if (!y) throw ConfigError("cannot infer year from file name: " + entry.path().string());
        files.push_back({*y, entry.path()});
      }
    } else if (fs::exists(path, ec)) {
      auto y = year_from_stem(path);
      if (!y) throw ConfigError("cannot infer year from file name: " + path.string());
      files.push_back({*y, path});
    } else {
      throw IoError("no such file or directory: " + path.string());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const YearFile& a, const YearFile& b) { return a.year < b.year; });
  for (std::size_t i = 1; i < files.size(); ++i)
    if (files[i].year == files[i - 1].year)
      throw ConfigError("duplicate year " + std::to_string(files[i].year));
  return files;
}

struct IngestOptions {
  std::optional<fs::path> manifest;
  unsigned threads = 1;
};

class CorpusBuilder {
 public:
  static CorpusHandle build(const std::vector<YearFile>& files, unsigned threads) {
    std::vector<std::pair<Year, std::string>> texts;
    texts.reserve(files.size());
    for (const auto& f : files) texts.emplace_back(f.year, read_file(f.path));
    return build(std::move(texts), threads);
  }

  // `texts` must be sorted by year with unique years.
  static CorpusHandle build(std::vector<std::pair<Year, std::string>> texts, unsigned threads) {
    std::vector<FileParse> parsed(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) parsed[i].text = std::move(texts[i].second);

    parallel_shards(parsed.size(), resolve_threads(threads),
                    [&](std::size_t, std::size_t b, std::size_t e) {
                      for (std::size_t i = b; i < e; ++i) parse_file(parsed[i]);
                    });

    auto corpus = std::make_shared<Corpus>();
    Sha256 digest;
    for (const auto& p : parsed) digest.update(p.text);
    corpus->fingerprint_ = digest.hex();

    // Deterministic merge: counts are summed, then ids follow a total order.
    std::unordered_map<std::string_view, WordStat> merged;
    std::map<std::string_view, std::size_t> tag_set;
    std::uint64_t documents = 0;
    for (const auto& p : parsed) {
      documents += p.docs.size();
      for (const auto& [w, stat] : p.words) {
        auto& m = merged[w];
        m.frequency += stat.frequency;
        for (const auto& [tag, n] : stat.tags) {
          m.tags[tag] += n;
          tag_set.emplace(tag, 0);
        }
      }
    }
    if (documents == 0) throw DomainError("empty corpus: no documents");

    std::size_t next_tag = 0;
    for (auto& [tag, id] : tag_set) {
      id = next_tag++;
      corpus->tags_.emplace_back(tag);
    }

    std::vector<std::pair<std::string_view, const WordStat*>> order;
    order.reserve(merged.size());
    for (const auto& [w, stat] : merged) order.emplace_back(w, &stat);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (a.second->frequency != b.second->frequency)
        return a.second->frequency > b.second->frequency;
      return a.first < b.first;
    });

    Vocabulary& vocab = corpus->vocab_;
    vocab.surfaces_.reserve(order.size());
    vocab.frequency_.reserve(order.size());
    vocab.dominant_pos_.reserve(order.size());
    std::unordered_map<std::string_view, WordId> ids;
    ids.reserve(order.size());
    for (const auto& [w, stat] : order) {
      const auto id = static_cast<WordId>(vocab.surfaces_.size());
      vocab.surfaces_.emplace_back(w);
      vocab.frequency_.push_back(stat->frequency);
      std::string_view best;
      std::uint64_t best_n = 0;
      for (const auto& [tag, n] : stat->tags)  // std::map: ties resolve to the smaller tag
        if (n > best_n) best = tag, best_n = n;
      vocab.dominant_pos_.emplace_back(best);
      vocab.ids_.emplace(w, id);
      ids.emplace(w, id);
    }

    for (std::size_t f = 0; f < parsed.size(); ++f) {
      const Year year = texts[f].first;
      auto& out = corpus->docs_[year];
      auto& stats = corpus->stats_[year];
      stats.bytes = parsed[f].text.size();
      stats.warnings = parsed[f].warnings;
      out.reserve(parsed[f].docs.size());
      for (auto& raw : parsed[f].docs) {
        Document d;
        d.year = year;
        d.seq = raw.seq;
        d.words.reserve(raw.tokens.size());
        d.tags.reserve(raw.tokens.size());
        for (const auto& t : raw.tokens) {
          d.words.push_back(ids.at(t.surface));
          d.tags.push_back(static_cast<TagId>(tag_set.at(t.pos)));
        }
        d.line = std::move(raw.line);
        stats.documents += 1;
        stats.tokens += d.size();
        out.push_back(std::move(d));
      }
      corpus->years_.push_back(year);
    }
    return corpus;
  }

 private:
  struct WordStat {
    std::uint64_t frequency = 0;
    std::map<std::string_view, std::uint64_t> tags;
  };

  struct RawDoc {
    std::size_t seq = 0;
    std::vector<ParsedToken> tokens;
    std::string line;
  };

  struct FileParse {
    std::string text;
    std::vector<RawDoc> docs;
    std::unordered_map<std::string_view, WordStat> words;
    std::uint64_t warnings = 0;
  };

  static void parse_file(FileParse& p) {
    std::string_view text = p.text;
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::size_t seq = 0;
    std::size_t start = 0;
    while (start < text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      const auto raw_tokens = split_line(text.substr(start, nl - start));
      if (!raw_tokens.empty()) {
        RawDoc doc;
        doc.seq = seq;
        doc.tokens.reserve(raw_tokens.size());
        for (auto raw : raw_tokens) {
          auto t = parse_token(raw);
          if (t.malformed) ++p.warnings;
          auto& stat = p.words[t.surface];
          stat.frequency += 1;
          stat.tags[t.pos] += 1;
          doc.tokens.push_back(t);
          if (!doc.line.empty()) doc.line += ' ';
          doc.line += raw;
        }
        p.docs.push_back(std::move(doc));
      }
      ++seq;
      start = nl + 1;
    }
  }
};

inline CorpusHandle ingest(const fs::path& path, const IngestOptions& opts = {}) {
  return CorpusBuilder::build(discover_year_files(path, opts.manifest), opts.threads);
}

// Builds a corpus from in-memory year texts, exactly as if each text were
// the content of `<year>.txt`.
inline CorpusHandle ingest_texts(std::vector<std::pair<Year, std::string>> texts, unsigned threads = 1) {
  std::sort(texts.begin(), texts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < texts.size(); ++i)
    if (texts[i].first == texts[i - 1].first)
      throw ConfigError("duplicate year " + std::to_string(texts[i].first));
  return CorpusBuilder::build(std::move(texts), threads);
}

inline CorpusHandle ingest_files(const std::vector<YearFile>& files, unsigned threads = 1) {
  auto sorted = files;
  std::sort(sorted.begin(), sorted.end(),
            [](const YearFile& a, const YearFile& b) { return a.year < b.year; });
  return CorpusBuilder::build(sorted, threads);
}

// Exact, POS-insensitive surface matching.
class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  bool contains(std::string_view surface) const { return words_.count(std::string(surface)) != 0; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

 private:
  std::unordered_set<std::string> words_;
};

inline StopwordList load_stopwords(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string w = line.substr(b, e - b + 1);
    if (w.starts_with('#')) continue;
    words.insert(std::move(w));
  }
  return StopwordList(std::move(words));
}

inline nlohmann::json corpus_summary_json(const Corpus& c) {
  nlohmann::json years = nlohmann::json::array();
  nlohmann::json per_year = nlohmann::json::object();
  for (Year y : c.years()) {
    years.push_back(y);
    const auto& s = c.stats(y);
    per_year[std::to_string(y)] = {{"documents", s.documents},
                                   {"tokens", s.tokens},
                                   {"bytes", s.bytes},
                                   {"warnings", s.warnings}};
  }
  const auto t = c.total();
  return {{"years", years},
          {"documents", t.documents},
          {"tokens", t.tokens},
          {"bytes", t.bytes},
          {"warnings", t.warnings},
          {"vocabulary", c.vocabulary().size()},
          {"fingerprint", c.fingerprint()},
          {"per_year", per_year}};
}

}  // namespace topicdraw
