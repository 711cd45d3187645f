#pragma once

// On-disk cache for CountStore: a directory holding vocab.tsv, pairs.tsv and
// meta.json.

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "topicdraw/corpus.hpp"
#include "topicdraw/error.hpp"
#include "topicdraw/window_stats.hpp"

namespace topicdraw {

inline nlohmann::json count_meta_json(const CountMeta& m) {
  return {{"pass", m.pass},
          {"thresholds", m.thresholds.to_json()},
          {"corpus_fingerprint", m.corpus_fingerprint},
          {"years", m.years},
          {"vocab_size", m.vocab_size},
          {"bootstrap_window", m.bootstrap_window},
          {"cap", m.cap},
          {"epsilon", m.epsilon},
          {"log_base", m.log_base},
          {"marginals", m.marginals}};
}

inline CountMeta count_meta_from_json(const nlohmann::json& j) {
  CountMeta m;
  m.pass = j.at("pass").get<int>();
  m.thresholds = ThresholdTable::from_json(j.at("thresholds"));
  m.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
  m.years = j.at("years").get<YearScope>();
  m.vocab_size = j.at("vocab_size").get<std::size_t>();
  m.bootstrap_window = j.at("bootstrap_window").get<std::size_t>();
  m.cap = j.at("cap").get<std::size_t>();
  m.epsilon = j.at("epsilon").get<double>();
  m.log_base = j.at("log_base").get<std::string>();
  m.marginals = j.at("marginals").get<std::string>();
  return m;
}

inline void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("error writing file: " + path.string());
}

// vocab.tsv lists only words present in the store's scope, with their
// in-scope frequency. Ids are corpus ids.
inline void save_store(const CountStore& store, const Vocabulary& vocab, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  std::string vocab_tsv;
  for (WordId w = 0; w < store.vocab_size(); ++w) {
    if (!store.has_word(w)) continue;
    vocab_tsv += std::to_string(w);
    vocab_tsv += '\t';
    vocab_tsv += vocab.surface(w);
    vocab_tsv += '\t';
    vocab_tsv += vocab.dominant_pos(w);
    vocab_tsv += '\t';
    vocab_tsv += std::to_string(store.unigram(w));
    vocab_tsv += '\n';
  }
  write_text(dir / "vocab.tsv", vocab_tsv);

  std::ofstream pairs(dir / "pairs.tsv", std::ios::binary | std::ios::trunc);
  if (!pairs) throw IoError("cannot write file: " + (dir / "pairs.tsv").string());
  std::string line;
  store.for_each_pair([&](const PairCount& p) {
    line.clear();
    line += std::to_string(p.target);
    line += '\t';
    line += std::to_string(p.context);
    line += '\t';
    line += side_code(p.side);
    line += '\t';
    line += std::to_string(p.count);
    line += '\n';
    pairs << line;
  });
  if (!pairs) throw IoError("error writing " + (dir / "pairs.tsv").string());
  pairs.close();

  write_text(dir / "meta.json", count_meta_json(store.meta()).dump(2) + "\n");
}

namespace detail {

template <typename T>
T parse_field(std::string_view field, const fs::path& file) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ConfigError("malformed field '" + std::string(field) + "' in " + file.string());
  return value;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::string_view rest = text;
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    auto line = rest.substr(0, nl);
    if (!line.empty()) fn(line);
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
}

}  // namespace detail

inline CountStore load_store(const fs::path& dir) {
  CountMeta meta;
  try {
    meta = count_meta_from_json(nlohmann::json::parse(read_file(dir / "meta.json")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed " + (dir / "meta.json").string() + ": " + e.what());
  }

  const fs::path vocab_path = dir / "vocab.tsv";
  std::vector<std::uint64_t> unigram(meta.vocab_size, 0);
  detail::for_each_line(read_file(vocab_path), [&](std::string_view line) {
    auto f = detail::split_tabs(line);
    if (f.size() != 4) throw ConfigError("malformed line in " + vocab_path.string());
    const auto id = detail::parse_field<WordId>(f[0], vocab_path);
    if (id >= unigram.size()) throw ConfigError("word id out of range in " + vocab_path.string());
    unigram[id] = detail::parse_field<std::uint64_t>(f[3], vocab_path);
  });

  const fs::path pairs_path = dir / "pairs.tsv";
  std::vector<std::pair<std::uint64_t, std::uint64_t>> entries;
  detail::for_each_line(read_file(pairs_path), [&](std::string_view line) {
    auto f = detail::split_tabs(line);
    if (f.size() != 4 || (f[2] != "L" && f[2] != "R"))
      throw ConfigError("malformed line in " + pairs_path.string());
    const auto key = pair_key(detail::parse_field<WordId>(f[0], pairs_path),
                              detail::parse_field<WordId>(f[1], pairs_path),
                              f[2] == "L" ? Side::left : Side::right);
    if (!entries.empty() && entries.back().first >= key)
      throw ConfigError("pairs not sorted in " + pairs_path.string());
    entries.emplace_back(key, detail::parse_field<std::uint64_t>(f[3], pairs_path));
  });
  return CountStore(std::move(meta), std::move(unigram), std::move(entries));
}

}  // namespace topicdraw
